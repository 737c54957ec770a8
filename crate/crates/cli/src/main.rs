//! `mexico`: simulate heavy-tailed data, fit and apply feature-clustering
//! models, evaluate them, and tabulate the constraint-set volumes.

mod args;
mod commands;
mod manifest;

use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = args::Cli::parse();
    if let Err(e) = commands::run(cli) {
        // A closed downstream pipe (`mexico score ... | head`) is not a failure.
        let closed_pipe = e
            .chain()
            .any(|c| c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe));
        if closed_pipe {
            return;
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
