use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mexico_core::{FitConfig, Margins, ProjectionMethod};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "mexico", version, about = "Feature clustering in multivariate extremes")]
pub struct Cli {
    /// Seed for every random choice of the command; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a logistic or clustered asymmetric-logistic sample.
    Simulate(SimulateArgs),
    /// Fit a mixture-matrix model on the extremes of a data file.
    Fit(FitArgs),
    /// Assign rows to feature clusters with a fitted model.
    Predict(ApplyArgs),
    /// Cluster assignment plus anomaly loss and normality for every row.
    Score(ApplyArgs),
    /// Clustering (H, C, v-M) or ranking (ROC-AUC, AP) metrics.
    Evaluate(EvaluateArgs),
    /// Volume ratios of the candidate constraint sets.
    Volumes(VolumesArgs),
    /// Choose the number of clusters from tail masses.
    SelectM(SelectMArgs),
    /// Comparison methods.
    #[command(subcommand)]
    Baseline(BaselineCommand),
}

#[derive(Debug, Subcommand)]
pub enum BaselineCommand {
    /// Spherical k-means on the angular extremes.
    Skmeans(SkmeansArgs),
}

/// Sections of a TOML config file; every key is optional and command-line
/// flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub fit: FitParams,
    #[serde(default)]
    pub simulate: SimParams,
}

pub fn read_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else { return Ok(ConfigFile::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Parameter presets of the reference anomaly-detection datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Sf,
    Sa,
    Http,
    Shuttle,
    Forestcover,
}

impl Preset {
    /// `(tau, lambda)`.
    pub fn values(self) -> (f64, f64) {
        match self {
            Preset::Sf => (0.8, 10.0),
            Preset::Sa => (0.7, 5.0),
            Preset::Http => (0.5, 10.0),
            Preset::Shuttle => (0.7, 5.0),
            Preset::Forestcover => (0.7, 5.0),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParams {
    /// Dataset preset setting tau and lambda (sf, sa, http, shuttle, forestcover).
    #[arg(long, ignore_case = true)]
    pub preset: Option<Preset>,
    /// Number of feature clusters.
    #[arg(long)]
    pub m: Option<usize>,
    /// Weight of the orthogonality penalty.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// M-set threshold in (0, 1]; smaller values spread the columns of W.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Fraction of rows kept as extremes.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub obj_tol: Option<f64>,
    #[arg(long)]
    pub armijo_c: Option<f64>,
    #[arg(long)]
    pub backtrack_factor: Option<f64>,
    #[arg(long)]
    pub init_step: Option<f64>,
    /// Fit on angular points (each extreme divided by its sup-norm).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub angular: Option<bool>,
    /// M-set projection: dykstra or pocs.
    #[arg(long)]
    pub projection: Option<ProjectionMethod>,
    /// Margin standardization: empirical (ranks) or unit-frechet.
    #[arg(long)]
    pub margins: Option<Margins>,
    #[arg(long)]
    pub proj_tol: Option<f64>,
    #[arg(long)]
    pub proj_max_iter: Option<usize>,
    /// Fits from this many consecutive seeds; the highest objective wins.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Only settable from a config file; use the global --seed flag otherwise.
    #[arg(skip)]
    pub seed: Option<u64>,
}

impl FitParams {
    /// Fields set here win over those of `base`.
    pub fn over(self, base: FitParams) -> FitParams {
        FitParams {
            preset: self.preset.or(base.preset),
            m: self.m.or(base.m),
            lambda: self.lambda.or(base.lambda),
            tau: self.tau.or(base.tau),
            gamma: self.gamma.or(base.gamma),
            max_iters: self.max_iters.or(base.max_iters),
            obj_tol: self.obj_tol.or(base.obj_tol),
            armijo_c: self.armijo_c.or(base.armijo_c),
            backtrack_factor: self.backtrack_factor.or(base.backtrack_factor),
            init_step: self.init_step.or(base.init_step),
            angular: self.angular.or(base.angular),
            projection: self.projection.or(base.projection),
            margins: self.margins.or(base.margins),
            proj_tol: self.proj_tol.or(base.proj_tol),
            proj_max_iter: self.proj_max_iter.or(base.proj_max_iter),
            restarts: self.restarts.or(base.restarts),
            seed: self.seed.or(base.seed),
        }
    }

    /// Library defaults, then the preset, then explicit values.
    pub fn resolve(&self) -> Result<(FitConfig, usize)> {
        let mut cfg = FitConfig::default();
        if let Some(preset) = self.preset {
            (cfg.tau, cfg.lambda) = preset.values();
        }
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { cfg.$target = v; })*
            };
        }
        set!(
            m => m, lambda => lambda, tau => tau, gamma => gamma, max_iters => max_outer_iters,
            obj_tol => obj_tol, armijo_c => armijo_c, backtrack_factor => backtrack_factor,
            init_step => init_step, angular => angular, projection => projection, margins => margins,
            proj_tol => proj_tol, proj_max_iter => proj_max_iter, seed => seed,
        );
        let restarts = self.restarts.unwrap_or(1);
        if restarts == 0 {
            bail!("--restarts must be at least 1");
        }
        Ok((cfg, restarts))
    }
}

/// Input data file shared by the commands that read raw samples.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DataInput {
    /// Numeric CSV, one sample per row.
    #[arg(long)]
    pub data: PathBuf,
    /// The data file starts with a header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: DataInput,
    #[command(flatten)]
    pub params: FitParams,
    /// TOML file with a [fit] section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model file to write (JSON).
    #[arg(long, short)]
    pub out: PathBuf,
    /// Independent runs with disjoint seed ranges; run r writes `<out stem>.r<r>.json`.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: DataInput,
    /// Keep only rows whose standardized sup-norm reaches the model's threshold.
    #[arg(long)]
    pub extremes: bool,
    /// Output CSV (stdout when omitted).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Prediction CSVs (columns sample_id, cluster); one metrics row each.
    #[arg(long = "pred", num_args = 1.., conflicts_with = "scores", required_unless_present = "scores")]
    pub pred: Vec<PathBuf>,
    /// Score CSVs (columns sample_id, loss) ranked against anomaly labels.
    #[arg(long = "scores", num_args = 1..)]
    pub scores: Vec<PathBuf>,
    /// Label files indexed by sample_id: one shared file or one per input.
    /// Anomaly labels are 0 (normal) or 1.
    #[arg(long, num_args = 1.., required = true)]
    pub labels: Vec<PathBuf>,
    /// Output CSV (stdout when omitted).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VolumesArgs {
    /// Dimensions: an inclusive range `a..b` or a comma list.
    #[arg(long, default_value = "3..10")]
    pub p: IntList,
    /// Thresholds for the M-set ratio, comma separated.
    #[arg(long, default_value = "0.5")]
    pub tau: FloatList,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectMArgs {
    #[command(flatten)]
    pub input: DataInput,
    #[command(flatten)]
    pub params: FitParams,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Candidate cluster counts, increasing.
    #[arg(long, default_value = "1,2,3,4")]
    pub candidates: IntList,
    /// Relative tolerance on the tail-mass gap.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Per-candidate table (m, mu_inf, gap).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SkmeansArgs {
    #[command(flatten)]
    pub input: DataInput,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value = "empirical")]
    pub margins: Margins,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    /// Assignments of the extreme rows (sample_id, cluster, similarity).
    #[arg(long, short)]
    pub out: PathBuf,
    /// Optional centroid matrix, one centroid per row.
    #[arg(long)]
    pub centroids: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimKind {
    /// Asymmetric logistic with one dependent block per cluster, plus labels.
    Clustered,
    /// Symmetric logistic over all features.
    Logistic,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    #[arg(long)]
    pub kind: Option<SimKind>,
    /// Number of features.
    #[arg(long)]
    pub p: Option<usize>,
    /// Disjoint feature groups, e.g. "0,1;2,3" (zero-based).
    #[arg(long)]
    pub clusters: Option<ClusterList>,
    /// Dependence parameter in (0, 1]; small means strong dependence.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(skip)]
    pub seed: Option<u64>,
}

impl SimParams {
    pub fn over(self, base: SimParams) -> SimParams {
        SimParams {
            kind: self.kind.or(base.kind),
            p: self.p.or(base.p),
            clusters: self.clusters.or(base.clusters),
            delta: self.delta.or(base.delta),
            n: self.n.or(base.n),
            seed: self.seed.or(base.seed),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: SimParams,
    /// TOML file with a [simulate] section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Data CSV to write.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Label file to write (clustered samples only).
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

/// Groups of feature ids, written `0,1;2,3` on the command line and as an
/// array of arrays in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterList(pub Vec<Vec<usize>>);

impl FromStr for ClusterList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(';')
            .filter(|g| !g.trim().is_empty())
            .map(|g| g.split(',').map(|v| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"))).collect())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(ClusterList)
    }
}

/// `a..b` (inclusive) or `a,b,c`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntList(pub Vec<usize>);

impl FromStr for IntList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some((a, b)) = s.split_once("..") {
            let a: usize = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
            let b: usize = b.trim().trim_start_matches('=').parse().map_err(|e| format!("{b:?}: {e}"))?;
            if a > b {
                return Err(format!("empty range {s}"));
            }
            return Ok(IntList((a..=b).collect()));
        }
        s.split(',').map(|v| v.trim().parse().map_err(|e| format!("{v:?}: {e}"))).collect::<std::result::Result<_, _>>().map(IntList)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',').map(|v| v.trim().parse().map_err(|e| format!("{v:?}: {e}"))).collect::<std::result::Result<_, _>>().map(FloatList)
    }
}
