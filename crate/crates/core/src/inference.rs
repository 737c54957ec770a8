//! Using a fitted mixture matrix: cluster prediction, loss-based anomaly
//! scores, hard feature clusters, and the tail-mass criterion for choosing `m`.

use log::warn;
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{invalid, Error, Result};
use crate::mexico::{fit_extremes_best_of, FitConfig, FittedModel};
use crate::tail::{angular_point, extreme_count, select_extremes, sup_norm, AngularMatrix, DataMatrix, StandardizedMatrix};

/// Offset in the normality transform `1 / (loss + NORMALITY_EPS)`.
pub const NORMALITY_EPS: f64 = 1e-12;

/// Default relative cut used by [`extract_clusters`].
pub const DEFAULT_REL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterAssignment {
    /// Zero-based column of `W` maximizing `(xW)^j`.
    pub cluster: usize,
    /// The maximal value `(xW)^j` itself.
    pub confidence: f64,
    /// The point lies below the training extreme threshold, where the model
    /// carries no guarantee.
    pub below_threshold: bool,
}

fn check_point(x: ArrayView1<'_, f64>, w: ArrayView2<'_, f64>) -> Result<()> {
    if x.len() != w.nrows() {
        return Err(Error::Shape(format!("point has {} features, W has {} rows", x.len(), w.nrows())));
    }
    if let Some(col) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: 0, col });
    }
    Ok(())
}

/// `argmax_j (xW)^j` with the lowest index winning ties, and the maximum.
pub fn best_column(x: ArrayView1<'_, f64>, w: ArrayView2<'_, f64>) -> Result<(usize, f64)> {
    check_point(x, w)?;
    let xw = x.dot(&w);
    let mut best = (0, xw[0]);
    for (j, &v) in xw.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (j, v);
        }
    }
    Ok(best)
}

/// Cluster of a point already on the model's Pareto scale.
pub fn predict_cluster(x: ArrayView1<'_, f64>, model: &FittedModel) -> Result<ClusterAssignment> {
    let (cluster, confidence) = best_column(x, model.w.view())?;
    Ok(ClusterAssignment { cluster, confidence, below_threshold: sup_norm(x) < model.threshold })
}

/// Reconstruction loss `(1/p)(||θ||_1 - max_j (θW)^j)` of the angular point
/// `θ = x / ||x||_inf`; lies in `[0, 1]`.
pub fn anomaly_loss(x: ArrayView1<'_, f64>, w: ArrayView2<'_, f64>) -> Result<f64> {
    check_point(x, w)?;
    let theta = angular_point(x)?;
    let (_, best) = best_column(theta.view(), w)?;
    let l1: f64 = theta.iter().map(|v| v.abs()).sum();
    Ok(((l1 - best) / x.len() as f64).clamp(0.0, 1.0))
}

pub fn anomaly_score(x: ArrayView1<'_, f64>, model: &FittedModel) -> Result<f64> {
    anomaly_loss(x, model.w.view())
}

/// Decreasing transform of the loss, large for normal points.
pub fn normality(loss: f64) -> f64 {
    1.0 / (loss + NORMALITY_EPS)
}

/// Mean loss over angular rows.
pub fn empirical_risk(angular: &AngularMatrix, w: ArrayView2<'_, f64>) -> Result<f64> {
    if angular.k() == 0 {
        return invalid("empirical risk of an empty sample");
    }
    let mut total = 0.0;
    for row in angular.values().rows() {
        total += anomaly_loss(row, w)?;
    }
    Ok(total / angular.k() as f64)
}

/// One scored input row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    pub sample_id: usize,
    pub cluster: usize,
    pub confidence: f64,
    pub loss: f64,
    pub normality: f64,
    pub below_threshold: bool,
}

/// Standardizes raw rows with the model's marginals, then predicts and scores them.
pub fn score_data(raw: &DataMatrix, model: &FittedModel) -> Result<Vec<ScoredSample>> {
    if raw.p() != model.p() {
        return Err(Error::Shape(format!("data has {} features, model expects {}", raw.p(), model.p())));
    }
    raw.values()
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let x = model.standardize_row(row)?;
            let a = predict_cluster(x.view(), model)?;
            let loss = anomaly_score(x.view(), model)?;
            Ok(ScoredSample {
                sample_id: i,
                cluster: a.cluster,
                confidence: a.confidence,
                loss,
                normality: normality(loss),
                below_threshold: a.below_threshold,
            })
        })
        .collect()
}

/// Hard feature groups read off the columns of `W`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureClusterSet {
    pub clusters: Vec<Vec<usize>>,
}

impl FeatureClusterSet {
    /// Indices of empty groups.
    pub fn degenerate(&self) -> Vec<usize> {
        self.clusters.iter().enumerate().filter(|(_, c)| c.is_empty()).map(|(j, _)| j).collect()
    }

    pub fn is_disjoint(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.clusters.iter().flatten().all(|f| seen.insert(*f))
    }

    /// Same groups regardless of their order.
    pub fn same_partition(&self, other: &[Vec<usize>]) -> bool {
        let norm = |cs: &[Vec<usize>]| {
            let mut v: Vec<Vec<usize>> = cs
                .iter()
                .map(|c| {
                    let mut c = c.clone();
                    c.sort_unstable();
                    c
                })
                .collect();
            v.sort();
            v
        };
        norm(&self.clusters) == norm(other)
    }
}

/// `K_j = { i : W_i^j > rel_threshold * max_l W_l^j }`.
pub fn extract_clusters(w: ArrayView2<'_, f64>, rel_threshold: f64) -> Result<FeatureClusterSet> {
    if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
        return invalid(format!("rel_threshold must lie in (0, 1), got {rel_threshold}"));
    }
    let clusters = w
        .axis_iter(Axis(1))
        .map(|col| {
            let max = col.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let cut = rel_threshold * max;
            col.iter().enumerate().filter(|(_, &v)| v > cut).map(|(i, _)| i).collect()
        })
        .collect();
    Ok(FeatureClusterSet { clusters })
}

fn tail_mass(rows: ArrayView2<'_, f64>, k: usize, norm: impl Fn(ArrayView1<'_, f64>) -> f64) -> Result<f64> {
    let n = rows.nrows();
    if k == 0 {
        return invalid("tail mass needs k >= 1");
    }
    if k > n {
        return invalid(format!("k = {k} exceeds n = {n}"));
    }
    let t = n as f64 / k as f64;
    let count = rows.rows().into_iter().filter(|r| norm(*r) > t).count();
    Ok(count as f64 / k as f64)
}

/// `(1/k) #{i : ||V_i||_1 > n/k}`: empirical exponent measure of the
/// complement of the unit ℓ1 ball.
pub fn empirical_tail_mass_l1(v: ArrayView2<'_, f64>, k: usize) -> Result<f64> {
    tail_mass(v, k, |r| r.iter().map(|x| x.abs()).sum())
}

/// Same with the sup-norm, typically evaluated on `VW`.
pub fn empirical_tail_mass_inf(vw: ArrayView2<'_, f64>, k: usize) -> Result<f64> {
    tail_mass(vw, k, sup_norm)
}

/// Outcome of [`select_m`]: the chosen `m` and the gap for each candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct MSelection {
    pub m: usize,
    pub l1_mass: f64,
    /// `(m, mu_inf(VW_m), |mu_inf(VW_m) - mu_1(V)|)` per candidate.
    pub candidates: Vec<(usize, f64, f64)>,
    /// Whether some candidate met the `epsilon` criterion.
    pub within_epsilon: bool,
}

/// Chooses the number of clusters from the tail masses.
///
/// For every candidate a model is fitted (best of `restarts` seeds) on the
/// extremes of `v` and the gap
/// `|mu_inf(VW) - mu_1(V)|` is measured at threshold `n/k`. The smallest
/// candidate with a gap below `epsilon * mu_1(V)` wins. When none qualifies the
/// smallest candidate whose gap is within `epsilon * mu_1(V)` of the best gap
/// is returned instead.
pub fn select_m(
    v: &StandardizedMatrix,
    candidates: &[usize],
    epsilon: f64,
    cfg: &FitConfig,
    restarts: usize,
) -> Result<MSelection> {
    if candidates.is_empty() {
        return invalid("no candidate values of m");
    }
    if candidates.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("candidate values of m must be strictly increasing");
    }
    if !(epsilon >= 0.0) {
        return invalid(format!("epsilon must be non-negative, got {epsilon}"));
    }
    let k = extreme_count(v.n(), cfg.gamma);
    let ext = select_extremes(v, cfg.gamma)?;
    let l1_mass = empirical_tail_mass_l1(v.values(), k)?;
    let mut rows = Vec::with_capacity(candidates.len());
    for &m in candidates {
        let model = fit_extremes_best_of(&ext, &FitConfig { m, ..cfg.clone() }, restarts)?;
        let vw: Array2<f64> = v.values().dot(&model.w.view());
        let inf_mass = empirical_tail_mass_inf(vw.view(), k)?;
        rows.push((m, inf_mass, (inf_mass - l1_mass).abs()));
    }
    let tol = epsilon * l1_mass;
    if let Some(&(m, _, _)) = rows.iter().find(|r| r.2 <= tol) {
        return Ok(MSelection { m, l1_mass, candidates: rows, within_epsilon: true });
    }
    let best = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let m = rows.iter().find(|r| r.2 <= best + tol).map(|r| r.0).unwrap_or(candidates[0]);
    warn!("no m within epsilon of the l1 tail mass {l1_mass:.4}; using m = {m} (gap {best:.4})");
    Ok(MSelection { m, l1_mass, candidates: rows, within_epsilon: false })
}
