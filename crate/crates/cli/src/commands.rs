use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use log::{info, warn};
use mexico_core::inference::{score_data, select_m, ScoredSample};
use mexico_core::io::{column_index, fmt17, read_column, read_data_csv, read_float_column, read_labels, write_csv, write_labels, write_matrix_csv};
use mexico_core::metrics::mean_std;
use mexico_core::sim::{sample_clustered, sample_logistic};
use mexico_core::simplex::{ratio_l1, ratio_l2, ratio_mset, volume_simplex};
use mexico_core::skmeans::unit_rows;
use mexico_core::tail::{angular_normalize, frechet_standardize, rank_standardize, select_extremes};
use mexico_core::{
    average_precision, fit_data_best_of, h_c_v, load_model, roc_auc, save_model, spherical_kmeans, DataMatrix,
    FittedModel, LogisticSpec, Margins, StandardizedMatrix,
};
use serde::Serialize;

use crate::args::*;
use crate::manifest::Manifest;

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Simulate(a) => simulate(a, seed),
        Command::Fit(a) => fit(a, seed),
        Command::Predict(a) => apply(a, false),
        Command::Score(a) => apply(a, true),
        Command::Evaluate(a) => evaluate(a),
        Command::Volumes(a) => volumes(a),
        Command::SelectM(a) => select(a, seed),
        Command::Baseline(BaselineCommand::Skmeans(a)) => skmeans(a, seed),
    }
}

/// CSV rows to a file, or to stdout when no path is given.
fn emit(out: Option<&Path>, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    match out {
        Some(path) => write_csv(path, Some(header), rows).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{}", header.join(","))?;
            for row in rows {
                writeln!(stdout, "{}", row.join(","))?;
            }
            Ok(())
        }
    }
}

fn read_data(input: &DataInput) -> Result<DataMatrix> {
    read_data_csv(&input.data, input.header).with_context(|| format!("reading data {}", input.data.display()))
}

fn standardize(raw: &DataMatrix, margins: Margins) -> StandardizedMatrix {
    match margins {
        Margins::Empirical => rank_standardize(raw),
        Margins::UnitFrechet => frechet_standardize(raw),
    }
}

#[derive(Serialize)]
struct SimRecord {
    kind: SimKind,
    p: usize,
    clusters: Option<Vec<Vec<usize>>>,
    delta: f64,
    n: usize,
}

fn simulate(a: SimulateArgs, seed: Option<u64>) -> Result<()> {
    let file = read_config(a.config.as_deref())?;
    let params = a.params.over(file.simulate);
    let seed = seed.or(params.seed).unwrap_or(0);
    let kind = params.kind.unwrap_or(SimKind::Clustered);
    let delta = params.delta.unwrap_or(0.2);
    let n = params.n.unwrap_or(1000);
    let clusters = params.clusters.map(|c| c.0);
    let (data, labels, p, clusters) = match kind {
        SimKind::Clustered => {
            let Some(clusters) = clusters else { bail!("--kind clustered needs --clusters, e.g. \"0,1;2,3\"") };
            let p = params.p.unwrap_or_else(|| clusters.iter().flatten().max().map_or(0, |&j| j + 1));
            let sample = sample_clustered(p, &clusters, delta, n, seed)?;
            (sample.data, Some(sample.labels), p, Some(clusters))
        }
        SimKind::Logistic => {
            let Some(p) = params.p else { bail!("--kind logistic needs --p") };
            if clusters.is_some() {
                warn!("--clusters is ignored for logistic samples");
            }
            if a.labels.is_some() {
                bail!("logistic samples have no labels; drop --labels");
            }
            (sample_logistic(&LogisticSpec { p, delta, n, seed })?, None, p, None)
        }
    };
    write_matrix_csv(&a.out, None, data.values()).with_context(|| format!("writing {}", a.out.display()))?;
    let mut manifest = Manifest::new("simulate", Some(seed), SimRecord { kind, p, clusters, delta, n }).output(&a.out);
    if let (Some(path), Some(labels)) = (&a.labels, &labels) {
        write_labels(path, labels).with_context(|| format!("writing {}", path.display()))?;
        manifest = manifest.output(path);
    }
    manifest.write_beside(&a.out)?;
    Ok(())
}

/// `dir/stem.<tag>.json` for `dir/stem.json`.
fn sibling(path: &Path, tag: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

#[derive(Serialize)]
struct FitRecord {
    config: mexico_core::FitConfig,
    restarts: usize,
    repeat: usize,
}

fn fit(a: FitArgs, seed: Option<u64>) -> Result<()> {
    ensure!(a.repeat >= 1, "--repeat must be at least 1");
    let file = read_config(a.config.as_deref())?;
    let (mut cfg, restarts) = a.params.over(file.fit).resolve()?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let raw = read_data(&a.input)?;
    // Run r starts at seed + r·restarts so no two runs share a restart seed.
    let configs: Vec<_> =
        (0..a.repeat).map(|r| mexico_core::FitConfig { seed: cfg.seed + (r * restarts) as u64, ..cfg.clone() }).collect();
    let models: Vec<Result<FittedModel>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| scope.spawn(|| fit_data_best_of(&raw, c, restarts).map_err(anyhow::Error::from)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("fit thread panicked")).collect()
    });
    let mut manifest = Manifest::new("fit", Some(cfg.seed), FitRecord { config: cfg.clone(), restarts, repeat: a.repeat })
        .input(&a.input.data);
    if a.repeat == 1 {
        let model = models.into_iter().next().expect("one run")?;
        report(&model);
        save_model(&a.out, &model).with_context(|| format!("writing {}", a.out.display()))?;
        manifest.output(&a.out).write_beside(&a.out)?;
        return Ok(());
    }
    let mut rows = Vec::new();
    for (r, (model, c)) in models.into_iter().zip(&configs).enumerate() {
        let model = model.with_context(|| format!("run {r}"))?;
        report(&model);
        let path = sibling(&a.out, &format!("r{r}"), "json");
        save_model(&path, &model).with_context(|| format!("writing {}", path.display()))?;
        manifest = manifest.output(&path);
        rows.push(vec![
            r.to_string(),
            c.seed.to_string(),
            fmt17(model.objective_trace.last().copied().unwrap_or(f64::NAN)),
            (model.objective_trace.len() - 1).to_string(),
            model.converged.to_string(),
        ]);
    }
    let summary = sibling(&a.out, "runs", "csv");
    write_csv(&summary, Some(&["run", "seed", "final_objective", "iterations", "converged"]), rows)?;
    manifest.output(&summary).write_beside(&summary)?;
    Ok(())
}

fn report(model: &FittedModel) {
    let iters = model.objective_trace.len().saturating_sub(1);
    let obj = model.objective_trace.last().copied().unwrap_or(f64::NAN);
    if model.converged {
        info!("seed {}: converged after {iters} iterations, objective {obj}", model.config.seed);
    } else {
        warn!("seed {}: stopped at the iteration limit ({iters}), objective {obj}", model.config.seed);
    }
}

fn apply(a: ApplyArgs, with_scores: bool) -> Result<()> {
    let model = load_model(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let raw = read_data(&a.input)?;
    ensure!(
        raw.p() == model.p(),
        "{} has {} columns but the model was fitted on {} features",
        a.input.data.display(),
        raw.p(),
        model.p()
    );
    let scored: Vec<ScoredSample> = score_data(&raw, &model)?.into_iter().filter(|s| !a.extremes || !s.below_threshold).collect();
    let below = scored.iter().filter(|s| s.below_threshold).count();
    if below > 0 {
        warn!("{below} of {} rows lie below the training extreme threshold; their clusters are extrapolated", scored.len());
    }
    let (header, rows): (&[&str], Vec<Vec<String>>) = if with_scores {
        (
            &["sample_id", "cluster", "confidence", "loss", "normality"],
            scored
                .iter()
                .map(|s| vec![s.sample_id.to_string(), s.cluster.to_string(), fmt17(s.confidence), fmt17(s.loss), fmt17(s.normality)])
                .collect(),
        )
    } else {
        (
            &["sample_id", "cluster", "confidence"],
            scored.iter().map(|s| vec![s.sample_id.to_string(), s.cluster.to_string(), fmt17(s.confidence)]).collect(),
        )
    };
    emit(a.out.as_deref(), header, rows)?;
    if let Some(out) = &a.out {
        let command = if with_scores { "score" } else { "predict" };
        Manifest::new(command, Some(model.config.seed), serde_json::json!({ "extremes": a.extremes }))
            .input(&a.model)
            .input(&a.input.data)
            .output(out)
            .write_beside(out)?;
    }
    Ok(())
}

/// Values of `column` (by header name) keyed by the file's `sample_id` column,
/// matched against `labels[sample_id]`.
fn aligned<T>(path: &Path, labels: &[usize], read: impl Fn(&Path, usize) -> Result<Vec<T>>, column: &str) -> Result<(Vec<T>, Vec<usize>)> {
    let id_col = column_index(path, "sample_id")?;
    let val_col = column_index(path, column)?;
    let ids = read_column(path, true, id_col)?;
    let values = read(path, val_col)?;
    let truth = ids
        .iter()
        .map(|&i| labels.get(i).copied().with_context(|| format!("{}: sample_id {i} has no label", path.display())))
        .collect::<Result<Vec<_>>>()?;
    Ok((values, truth))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (inputs, ranking) = if a.scores.is_empty() { (&a.pred, false) } else { (&a.scores, true) };
    ensure!(
        a.labels.len() == 1 || a.labels.len() == inputs.len(),
        "give one label file, or one per input file ({} inputs, {} label files)",
        inputs.len(),
        a.labels.len()
    );
    let mut rows = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (r, path) in inputs.iter().enumerate() {
        let label_path = &a.labels[if a.labels.len() == 1 { 0 } else { r }];
        let labels = read_labels(label_path, false).with_context(|| format!("reading labels {}", label_path.display()))?;
        let metrics = if ranking {
            let (loss, truth) = aligned(path, &labels, |p, c| Ok(read_float_column(p, true, c)?), "loss")?;
            if let Some(bad) = truth.iter().find(|&&l| l > 1) {
                bail!("{}: anomaly labels must be 0 or 1, found {bad}", label_path.display());
            }
            let anomalous: Vec<bool> = truth.iter().map(|&l| l == 1).collect();
            vec![roc_auc(&loss, &anomalous)?, average_precision(&loss, &anomalous)?]
        } else {
            let (pred, truth) = aligned(path, &labels, |p, c| Ok(read_column(p, true, c)?), "cluster")?;
            let (h, c, v) = h_c_v(&truth, &pred)?;
            vec![h, c, v]
        };
        if columns.is_empty() {
            columns = vec![Vec::new(); metrics.len()];
        }
        for (col, &m) in columns.iter_mut().zip(&metrics) {
            col.push(m);
        }
        rows.push(std::iter::once(r.to_string()).chain(metrics.iter().map(|&m| fmt17(m))).collect());
    }
    if inputs.len() > 1 {
        let stats: Vec<(f64, f64)> = columns.iter().map(|c| mean_std(c)).collect();
        rows.push(std::iter::once("mean".to_string()).chain(stats.iter().map(|s| fmt17(s.0))).collect());
        rows.push(std::iter::once("std".to_string()).chain(stats.iter().map(|s| fmt17(s.1))).collect());
    }
    let header: &[&str] = if ranking { &["run", "ROC-AUC", "AP"] } else { &["run", "H", "C", "v-M"] };
    emit(a.out.as_deref(), header, rows)?;
    if let Some(out) = &a.out {
        let kind = if ranking { "ranking" } else { "clustering" };
        let mut manifest = Manifest::new("evaluate", None, serde_json::json!({ "metrics": kind }));
        for path in inputs.iter().chain(&a.labels) {
            manifest = manifest.input(path);
        }
        manifest.output(out).write_beside(out)?;
    }
    Ok(())
}

fn volumes(a: VolumesArgs) -> Result<()> {
    let mut rows = Vec::new();
    for &p in &a.p.0 {
        let base = [volume_simplex(p)?, ratio_l1(p)?, ratio_l2(p)?];
        for &tau in &a.tau.0 {
            let mset = match ratio_mset(p, tau) {
                Ok(v) => fmt17(v),
                Err(e) => {
                    warn!("p = {p}, tau = {tau}: {e}");
                    String::new()
                }
            };
            let mut row = vec![p.to_string(), tau.to_string()];
            row.extend(base.iter().map(|&v| fmt17(v)));
            row.push(mset);
            rows.push(row);
        }
    }
    emit(a.out.as_deref(), &["p", "tau", "vol_simplex", "ratio_l1", "ratio_l2", "ratio_mset"], rows)?;
    if let Some(out) = &a.out {
        Manifest::new("volumes", None, serde_json::json!({ "p": a.p.0, "tau": a.tau.0 })).output(out).write_beside(out)?;
    }
    Ok(())
}

fn select(a: SelectMArgs, seed: Option<u64>) -> Result<()> {
    let file = read_config(a.config.as_deref())?;
    let (mut cfg, restarts) = a.params.over(file.fit).resolve()?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let raw = read_data(&a.input)?;
    let v = standardize(&raw, cfg.margins);
    let choice = select_m(&v, &a.candidates.0, a.epsilon, &cfg, restarts)?;
    if !choice.within_epsilon {
        warn!("no candidate met the epsilon criterion; picked the smallest m with a near-minimal gap");
    }
    println!("m = {}", choice.m);
    if let Some(out) = &a.out {
        let rows = choice.candidates.iter().map(|&(m, mu, gap)| vec![m.to_string(), fmt17(mu), fmt17(gap)]).collect();
        emit(Some(out), &["m", "mu_inf", "gap"], rows)?;
        Manifest::new(
            "select-m",
            Some(cfg.seed),
            serde_json::json!({ "config": cfg, "restarts": restarts, "candidates": a.candidates.0, "epsilon": a.epsilon, "chosen": choice.m, "mu_1": choice.l1_mass }),
        )
        .input(&a.input.data)
        .output(out)
        .write_beside(out)?;
    }
    Ok(())
}

fn skmeans(a: SkmeansArgs, seed: Option<u64>) -> Result<()> {
    let seed = seed.unwrap_or(0);
    let raw = read_data(&a.input)?;
    let v = standardize(&raw, a.margins);
    let ext = select_extremes(&v, a.gamma)?;
    let ang = angular_normalize(&ext)?;
    let fit = spherical_kmeans(ang.values(), a.m, a.max_iter, seed)?;
    if !fit.converged {
        warn!("spherical k-means stopped at the iteration limit ({})", a.max_iter);
    }
    let unit = unit_rows(ang.values())?;
    let rows = ext
        .indices()
        .iter()
        .zip(unit.rows())
        .zip(&fit.assignments)
        .map(|((&i, u), &c)| vec![i.to_string(), c.to_string(), fmt17(u.dot(&fit.centroids.row(c)))])
        .collect();
    emit(Some(&a.out), &["sample_id", "cluster", "similarity"], rows)?;
    let mut manifest = Manifest::new(
        "baseline skmeans",
        Some(seed),
        serde_json::json!({ "m": a.m, "gamma": a.gamma, "margins": a.margins, "max_iter": a.max_iter }),
    )
    .input(&a.input.data)
    .output(&a.out);
    if let Some(path) = &a.centroids {
        write_matrix_csv(path, None, fit.centroids.view())?;
        manifest = manifest.output(path);
    }
    manifest.write_beside(&a.out)?;
    Ok(())
}
