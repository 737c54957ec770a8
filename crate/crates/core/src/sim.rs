//! Max-stable simulation: symmetric and asymmetric logistic models with unit
//! Fréchet margins, and labeled clustered datasets built from them.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Error, Result};
use crate::tail::DataMatrix;

/// Weight given to the independent component of clustered features and the
/// scale of the uncovered noise features.
pub const NOISE_WEIGHT: f64 = 1e-3;

/// Symmetric logistic model on `p` features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticSpec {
    pub p: usize,
    pub delta: f64,
    pub n: usize,
    pub seed: u64,
}

/// One dependence component of the asymmetric logistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    /// Zero-based feature ids.
    pub features: Vec<usize>,
    /// Dependence parameter in (0, 1]; 1 means independence within the subset.
    pub alpha: f64,
    /// Asymmetry weight of each feature in `features`.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymLogisticSpec {
    pub p: usize,
    pub subsets: Vec<Subset>,
    pub n: usize,
    pub seed: u64,
}

impl AsymLogisticSpec {
    /// Checks that every feature's weights sum to one, which gives unit
    /// Fréchet margins.
    pub fn validate(&self) -> Result<()> {
        let mut totals = vec![0.0; self.p];
        for (s, subset) in self.subsets.iter().enumerate() {
            check_delta(subset.alpha)?;
            if subset.features.is_empty() || subset.features.len() != subset.weights.len() {
                return invalid(format!("subset {s} needs one weight per feature"));
            }
            for (&j, &b) in subset.features.iter().zip(&subset.weights) {
                if j >= self.p {
                    return invalid(format!("subset {s} references feature {j} >= p = {}", self.p));
                }
                if !(b >= 0.0) {
                    return invalid(format!("subset {s} has a negative weight"));
                }
                totals[j] += b;
            }
        }
        if let Some((j, t)) = totals.iter().enumerate().find(|(_, t)| (**t - 1.0).abs() > 1e-9) {
            return invalid(format!("weights of feature {j} sum to {t}, expected 1"));
        }
        Ok(())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return invalid(format!("dependence parameter must lie in (0, 1], got {delta}"));
    }
    Ok(())
}

/// Positive stable variable with Laplace transform `exp(-t^delta)`, drawn
/// with Kanter's representation of the Chambers–Mallows–Stuck method.
pub fn sample_positive_stable<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> Result<f64> {
    check_delta(delta)?;
    if delta == 1.0 {
        return Ok(1.0);
    }
    loop {
        let u: f64 = PI * rng.random::<f64>();
        if u <= 0.0 {
            continue;
        }
        let e: f64 = Exp1.sample(rng);
        let a = (delta * u).sin() / u.sin().powf(1.0 / delta);
        let b = (((1.0 - delta) * u).sin() / e).powf((1.0 - delta) / delta);
        let s = a * b;
        if s.is_finite() && s > 0.0 {
            return Ok(s);
        }
    }
}

/// One logistic vector of dimension `dim` written into `out`.
fn logistic_draw<R: Rng + ?Sized>(delta: f64, rng: &mut R, out: &mut [f64]) -> Result<()> {
    let s = sample_positive_stable(delta, rng)?;
    for v in out.iter_mut() {
        let e: f64 = Exp1.sample(rng);
        *v = (s / e).powf(delta);
    }
    Ok(())
}

/// Rows with c.d.f. `exp{-(sum_j x_j^(-1/delta))^delta}`, generated as
/// `X_j = (S / E_j)^delta`.
pub fn sample_logistic(spec: &LogisticSpec) -> Result<DataMatrix> {
    check_delta(spec.delta)?;
    if spec.n == 0 || spec.p < 2 {
        return invalid("logistic sample needs n >= 1 and p >= 2");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Array2::zeros((spec.n, spec.p));
    let mut buf = vec![0.0; spec.p];
    for mut row in out.rows_mut() {
        logistic_draw(spec.delta, &mut rng, &mut buf)?;
        row.assign(&ArrayView1::from(&buf));
    }
    DataMatrix::new(out)
}

fn asym_rows<R: Rng + ?Sized>(p: usize, subsets: &[Subset], n: usize, rng: &mut R) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((n, p));
    let mut buf = Vec::new();
    for mut row in out.rows_mut() {
        for subset in subsets {
            buf.resize(subset.features.len(), 0.0);
            logistic_draw(subset.alpha, rng, &mut buf)?;
            for ((&j, &b), &y) in subset.features.iter().zip(&subset.weights).zip(&buf) {
                let v = b * y;
                if v > row[j] {
                    row[j] = v;
                }
            }
        }
    }
    Ok(out)
}

/// `X_j = max_{K containing j} beta_{j,K} Y_j^(K)` with independent logistic
/// vectors `Y^(K)` of dependence `alpha_K`.
pub fn sample_asym_logistic(spec: &AsymLogisticSpec) -> Result<DataMatrix> {
    spec.validate()?;
    if spec.n == 0 || spec.p < 2 {
        return invalid("asymmetric logistic sample needs n >= 1 and p >= 2");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    DataMatrix::new(asym_rows(spec.p, &spec.subsets, spec.n, &mut rng)?)
}

/// One simulated row with its ground-truth cluster (zero-based).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub row: Vec<f64>,
    pub label: usize,
}

/// A clustered dataset as a matrix plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredData {
    pub data: DataMatrix,
    pub labels: Vec<usize>,
}

impl ClusteredData {
    pub fn samples(&self) -> Vec<LabeledSample> {
        self.data
            .values()
            .rows()
            .into_iter()
            .zip(&self.labels)
            .map(|(r, &label)| LabeledSample { row: r.to_vec(), label })
            .collect()
    }
}

/// Checks that clusters are disjoint, have at least two features and fit in `p`.
pub fn validate_clusters(p: usize, clusters: &[Vec<usize>]) -> Result<()> {
    if clusters.is_empty() {
        return invalid("at least one cluster is required");
    }
    let mut owner = vec![None; p];
    for (c, cluster) in clusters.iter().enumerate() {
        if cluster.len() < 2 {
            return invalid(format!("cluster {c} has fewer than two features"));
        }
        for &j in cluster {
            if j >= p {
                return invalid(format!("cluster {c} references feature {j} >= p = {p}"));
            }
            if let Some(other) = owner[j] {
                return invalid(format!("clusters {other} and {c} overlap on feature {j}"));
            }
            owner[j] = Some(c);
        }
    }
    Ok(())
}

/// Asymmetric logistic data with one dependence subset per cluster.
///
/// Clustered features put weight `1 - NOISE_WEIGHT` on their cluster (dependence
/// `delta_in`) and `NOISE_WEIGHT` on an independent component, so their margins
/// stay unit Fréchet. Features outside every cluster are independent Fréchet
/// noise scaled by `NOISE_WEIGHT`. The label of a row is the cluster holding
/// its largest clustered feature.
pub fn sample_clustered(p: usize, clusters: &[Vec<usize>], delta_in: f64, n: usize, seed: u64) -> Result<ClusteredData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_clustered_with(p, clusters, delta_in, n, &mut rng)
}

pub(crate) fn clustered_subsets(p: usize, clusters: &[Vec<usize>], delta_in: f64) -> Result<Vec<Subset>> {
    validate_clusters(p, clusters)?;
    check_delta(delta_in)?;
    let mut subsets: Vec<Subset> = clusters
        .iter()
        .map(|c| Subset { features: c.clone(), alpha: delta_in, weights: vec![1.0 - NOISE_WEIGHT; c.len()] })
        .collect();
    let covered: Vec<usize> = clusters.iter().flatten().copied().collect();
    subsets.push(Subset { features: covered.clone(), alpha: 1.0, weights: vec![NOISE_WEIGHT; covered.len()] });
    let uncovered: Vec<usize> = (0..p).filter(|j| !covered.contains(j)).collect();
    if !uncovered.is_empty() {
        subsets.push(Subset { weights: vec![NOISE_WEIGHT; uncovered.len()], features: uncovered, alpha: 1.0 });
    }
    Ok(subsets)
}

/// Same as [`sample_clustered`] but drawing from a caller-owned generator.
pub fn sample_clustered_with<R: Rng + ?Sized>(
    p: usize,
    clusters: &[Vec<usize>],
    delta_in: f64,
    n: usize,
    rng: &mut R,
) -> Result<ClusteredData> {
    let subsets = clustered_subsets(p, clusters, delta_in)?;
    if n == 0 {
        return invalid("n must be positive");
    }
    let values = asym_rows(p, &subsets, n, rng)?;
    let labels = label_rows(&values, clusters);
    Ok(ClusteredData { data: DataMatrix::new(values)?, labels })
}

/// Cluster index of the largest clustered feature of every row; ties go to the
/// lowest feature id.
pub fn label_rows(values: &Array2<f64>, clusters: &[Vec<usize>]) -> Vec<usize> {
    values.rows().into_iter().map(|row| label_of(row, clusters)).collect()
}

pub fn label_of(row: ArrayView1<'_, f64>, clusters: &[Vec<usize>]) -> usize {
    let mut best = (f64::NEG_INFINITY, usize::MAX, 0);
    for (c, cluster) in clusters.iter().enumerate() {
        for &j in cluster {
            let v = row[j];
            if v > best.0 || (v == best.0 && j < best.1) {
                best = (v, j, c);
            }
        }
    }
    best.2
}

/// Smith's estimator of the pairwise extremal coefficient for unit Fréchet
/// margins: `n / sum_i 1/max(x_i, y_i)`. Equals `2^delta` for the logistic model.
pub fn extremal_coefficient(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Shape("extremal coefficient needs two equal non-empty columns".into()));
    }
    let s: f64 = x.iter().zip(y.iter()).map(|(a, b)| 1.0 / a.max(*b)).sum();
    Ok(x.len() as f64 / s)
}
