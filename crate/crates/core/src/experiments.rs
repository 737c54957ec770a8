//! Reusable experiment protocols on simulated data: recovery of exact
//! clusters, feature clustering against spherical k-means, anomaly ranking,
//! and the contraction of intra-cluster distances.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::inference::{anomaly_score, extract_clusters, predict_cluster, FeatureClusterSet, DEFAULT_REL_THRESHOLD};
use crate::metrics::{average_precision, h_c_v, median, roc_auc};
use crate::mexico::{fit_data, fit_extremes, fit_matrix_best_of, FitConfig, FitOutcome, FittedModel};
use crate::sim::{label_of, sample_clustered_with};
use crate::skmeans::{assign_points, spherical_kmeans};
use crate::tail::{
    angular_normalize, angular_point, AngularMatrix, frechet_standardize, rank_standardize, select_extremes, sup_norm, Margins,
    StandardizedMatrix,
};

/// Largest step-to-step decrease of an objective trace (0 when monotone).
pub fn max_decrease(trace: &[f64]) -> f64 {
    trace.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}

/// Rows supported on one cluster each (cycling through `clusters`), equal to
/// a Pareto radius on the cluster and 0 elsewhere.
pub fn exact_cluster_matrix(p: usize, clusters: &[Vec<usize>], k: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((k, p));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        let radius = 1.0 / (1.0 - rng.random::<f64>());
        for &j in &clusters[i % clusters.len()] {
            row[j] = radius;
        }
    }
    x
}

/// The uniform vector on `cluster`.
pub fn uniform_support(p: usize, cluster: &[usize]) -> Array1<f64> {
    let mut u = Array1::zeros(p);
    for &j in cluster {
        u[j] = 1.0 / cluster.len() as f64;
    }
    u
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                prefix.push(j);
                go(prefix, used, out);
                prefix.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; m], &mut out);
    out
}

/// `min over column permutations of max |W - U|` where column `j` of `U` is
/// uniform on `clusters[j]`. Only meant for small `m`.
pub fn uniform_support_deviation(w: ArrayView2<'_, f64>, clusters: &[Vec<usize>]) -> Result<f64> {
    let (p, m) = w.dim();
    if m != clusters.len() {
        return invalid(format!("W has {m} columns for {} clusters", clusters.len()));
    }
    if m > 8 {
        return invalid("permutation search limited to m <= 8");
    }
    let targets: Vec<Array1<f64>> = clusters.iter().map(|c| uniform_support(p, c)).collect();
    let dev = |col: usize, target: usize| -> f64 {
        w.column(col).iter().zip(targets[target].iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    Ok(permutations(m)
        .iter()
        .map(|perm| perm.iter().enumerate().map(|(c, &t)| dev(c, t)).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min))
}

/// Outcome of fitting exact disjoint-cluster data.
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    pub outcome: FitOutcome,
    pub max_deviation: f64,
    pub clusters: FeatureClusterSet,
    pub partition_recovered: bool,
}

pub fn recovery_experiment(
    p: usize,
    clusters: &[Vec<usize>],
    k: usize,
    data_seed: u64,
    cfg: &FitConfig,
    restarts: usize,
) -> Result<RecoveryReport> {
    let x = exact_cluster_matrix(p, clusters, k, data_seed);
    let input = if cfg.angular { angular_rows(x.view())? } else { x };
    let (outcome, _) = fit_matrix_best_of(input.view(), cfg, restarts)?;
    let max_deviation = uniform_support_deviation(outcome.w.view(), clusters)?;
    let found = extract_clusters(outcome.w.view(), DEFAULT_REL_THRESHOLD)?;
    let partition_recovered = found.same_partition(clusters);
    Ok(RecoveryReport { outcome, max_deviation, clusters: found, partition_recovered })
}

/// Setup of the simulated feature-clustering experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringSetup {
    pub p: usize,
    pub clusters: Vec<Vec<usize>>,
    pub delta_in: f64,
    pub n_train: usize,
    pub n_test: usize,
}

impl ClusteringSetup {
    /// `n_clusters` consecutive clusters of `size` features, the rest noise.
    pub fn blocks(p: usize, n_clusters: usize, size: usize, delta_in: f64, n_train: usize, n_test: usize) -> Self {
        let clusters = (0..n_clusters).map(|c| (c * size..(c + 1) * size).collect()).collect();
        Self { p, clusters, delta_in, n_train, n_test }
    }
}

#[derive(Debug, Clone)]
pub struct ClusteringRun {
    pub model: FittedModel,
    /// Homogeneity, completeness and v-measure of the fitted model on the test extremes.
    pub mexico: (f64, f64, f64),
    pub skmeans: (f64, f64, f64),
    pub test_labels: Vec<usize>,
    pub mexico_pred: Vec<usize>,
}

/// Fresh rows from the clustered generator whose standardized sup-norm
/// reaches the model's threshold.
fn fresh_extremes<R: Rng>(
    model: &FittedModel,
    p: usize,
    clusters: &[Vec<usize>],
    delta_in: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<(Array1<f64>, usize)>> {
    let mut out = Vec::with_capacity(count);
    let batch = (count * 20).max(100);
    let mut rounds = 0;
    while out.len() < count {
        rounds += 1;
        if rounds > 10_000 {
            return invalid("could not draw enough test extremes");
        }
        let fresh = sample_clustered_with(p, clusters, delta_in, batch, rng)?;
        for (row, &label) in fresh.data.values().rows().into_iter().zip(&fresh.labels) {
            let x = model.standardize_row(row)?;
            if sup_norm(x.view()) >= model.threshold {
                out.push((x, label));
                if out.len() == count {
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Trains on simulated data, then labels fresh extremes with the fitted
/// model and with spherical k-means fitted on the same training extremes.
///
/// Margins are taken as unit Fréchet (the simulator's true marginals) unless
/// `cfg.margins` says otherwise.
pub fn clustering_run(setup: &ClusteringSetup, cfg: &FitConfig, seed: u64) -> Result<ClusteringRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = sample_clustered_with(setup.p, &setup.clusters, setup.delta_in, setup.n_train, &mut rng)?;
    let cfg = FitConfig { m: setup.clusters.len(), seed, ..cfg.clone() };
    let model = fit_data(&train.data, &cfg)?;

    let std: StandardizedMatrix = match cfg.margins {
        Margins::UnitFrechet => frechet_standardize(&train.data),
        Margins::Empirical => rank_standardize(&train.data),
    };
    let ext = select_extremes(&std, cfg.gamma)?;
    let ang = angular_normalize(&ext)?;
    let km = spherical_kmeans(ang.values(), cfg.m, 300, seed)?;

    let test = fresh_extremes(&model, setup.p, &setup.clusters, setup.delta_in, setup.n_test, &mut rng)?;
    let labels: Vec<usize> = test.iter().map(|t| t.1).collect();
    let mexico_pred = test
        .iter()
        .map(|(x, _)| predict_cluster(x.view(), &model).map(|a| a.cluster))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Array2::zeros((test.len(), setup.p));
    for (mut row, (x, _)) in points.rows_mut().into_iter().zip(&test) {
        row.assign(x);
    }
    let km_pred = assign_points(points.view(), km.centroids.view())?;
    Ok(ClusteringRun {
        mexico: h_c_v(&labels, &mexico_pred)?,
        skmeans: h_c_v(&labels, &km_pred)?,
        model,
        test_labels: labels,
        mexico_pred,
    })
}

/// Setup of the synthetic anomaly experiment: the model is trained on normal
/// data only, anomalies share the margins but group features differently.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalySetup {
    pub p: usize,
    pub normal_clusters: Vec<Vec<usize>>,
    pub anomaly_clusters: Vec<Vec<usize>>,
    pub delta_in: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub anomaly_fraction: f64,
}

impl Default for AnomalySetup {
    fn default() -> Self {
        Self {
            p: 8,
            normal_clusters: vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]],
            anomaly_clusters: vec![vec![0, 1, 4, 5], vec![2, 3, 6, 7]],
            delta_in: 0.2,
            n_train: 2000,
            n_test: 400,
            anomaly_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnomalyRun {
    pub model: FittedModel,
    pub roc_auc: f64,
    pub average_precision: f64,
    pub losses: Vec<f64>,
    pub is_anomaly: Vec<bool>,
    /// Standardized test extremes, normal ones first.
    pub test_points: Array2<f64>,
}

pub fn anomaly_run(setup: &AnomalySetup, cfg: &FitConfig, seed: u64) -> Result<AnomalyRun> {
    if !(setup.anomaly_fraction > 0.0 && setup.anomaly_fraction < 1.0) {
        return invalid("anomaly fraction must lie in (0, 1)");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = sample_clustered_with(setup.p, &setup.normal_clusters, setup.delta_in, setup.n_train, &mut rng)?;
    let cfg = FitConfig { m: setup.normal_clusters.len(), seed, ..cfg.clone() };
    let model = fit_data(&train.data, &cfg)?;

    let n_anom = ((setup.n_test as f64 * setup.anomaly_fraction).round() as usize).max(1);
    let normal = fresh_extremes(&model, setup.p, &setup.normal_clusters, setup.delta_in, setup.n_test - n_anom, &mut rng)?;
    let anomalous = fresh_extremes(&model, setup.p, &setup.anomaly_clusters, setup.delta_in, n_anom, &mut rng)?;
    let mut losses = Vec::with_capacity(setup.n_test);
    let mut is_anomaly = Vec::with_capacity(setup.n_test);
    let mut test_points = Array2::zeros((normal.len() + anomalous.len(), setup.p));
    let tagged = normal.iter().map(|t| (t, false)).chain(anomalous.iter().map(|t| (t, true)));
    for (((x, _), flag), mut row) in tagged.zip(test_points.rows_mut()) {
        losses.push(anomaly_score(x.view(), &model)?);
        is_anomaly.push(flag);
        row.assign(x);
    }
    Ok(AnomalyRun {
        roc_auc: roc_auc(&losses, &is_anomaly)?,
        average_precision: average_precision(&losses, &is_anomaly)?,
        model,
        losses,
        is_anomaly,
        test_points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub pairs: usize,
    /// Median intra-cluster ℓ2 distance between angular extremes.
    pub median_before: f64,
    /// Same after `θ ↦ θW / ||θW||_inf`.
    pub median_after: f64,
}

/// Intra-cluster distances before and after the fitted mixture map on
/// two-cluster data `{0, 1}`, `{2, 3}`, with `k = sqrt(n)` extremes.
pub fn contraction_experiment(n: usize, delta_in: f64, cfg: &FitConfig, seed: u64) -> Result<ContractionReport> {
    let clusters = vec![vec![0, 1], vec![2, 3]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = sample_clustered_with(4, &clusters, delta_in, n, &mut rng)?;
    let gamma = (n as f64).sqrt().floor() / n as f64;
    let cfg = FitConfig { m: 2, gamma, seed, ..cfg.clone() };
    let std = rank_standardize(&data.data);
    let ext = select_extremes(&std, gamma)?;
    let model = fit_extremes(&ext, &cfg)?;
    let ang = angular_normalize(&ext)?;
    let labels: Vec<usize> = ext.rows().rows().into_iter().map(|r| label_of(r, &clusters)).collect();

    let mapped: Vec<Array1<f64>> = ang
        .values()
        .rows()
        .into_iter()
        .map(|t| angular_point(t.dot(&model.w.view()).view()))
        .collect::<Result<_>>()?;
    let dist = |a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>| (&a - &b).mapv(|d| d * d).sum().sqrt();
    let mut before = Vec::new();
    let mut after = Vec::new();
    let k = ang.k();
    for i in 0..k {
        for j in i + 1..k {
            if labels[i] == labels[j] {
                before.push(dist(ang.values().row(i), ang.values().row(j)));
                after.push(dist(mapped[i].view(), mapped[j].view()));
            }
        }
    }
    if before.is_empty() {
        return invalid("no intra-cluster pairs among the extremes");
    }
    Ok(ContractionReport { pairs: before.len(), median_before: median(&before), median_after: median(&after) })
}

/// Angular rows of a k×p matrix, kept as a plain array.
pub fn angular_rows(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    Ok(AngularMatrix::from_rows(x)?.values().to_owned())
}
