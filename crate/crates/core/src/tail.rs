//! Marginal standardization to Pareto scale and selection of the extreme
//! sub-sample.
//!
//! The empirical transform maps entry `x` of column `j` to
//! `1 / (1 - F_j(x))` where `F_j(x) = #{l : X_l^j <= x} / (n + 1)`, so every
//! standardized value lies in `[1, n + 1]`. Extremes are the `k = floor(n * gamma)`
//! rows of largest sup-norm after standardization.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Raw observations: rows are samples, columns are features.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(Array2<f64>);

impl DataMatrix {
    /// Validates that the matrix is non-empty, has at least two features and
    /// only finite entries.
    ///
    /// Negative values are accepted: the rank transform depends only on the
    /// ordering within each column.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        if n == 0 {
            return invalid("data matrix has no rows");
        }
        if p < 2 {
            return invalid(format!("data matrix needs at least 2 features, got {p}"));
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self(values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Shape("rows have differing lengths".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, p), flat).map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(values)
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn p(&self) -> usize {
        self.0.ncols()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Data on standard Pareto margins.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedMatrix {
    values: Array2<f64>,
}

impl StandardizedMatrix {
    /// Wraps values that are already on Pareto scale (entries `>= 1`).
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        if values.ncols() < 2 || values.nrows() == 0 {
            return Err(Error::Shape(format!("standardized matrix of shape {:?}", values.dim())));
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        if values.iter().any(|&v| v < 1.0) {
            return invalid("standardized values must be >= 1");
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }
}

/// Empirical marginal c.d.f.s fitted on training data.
///
/// Each column keeps its sorted training values; evaluating a new value only
/// needs a binary search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    n: usize,
    sorted_columns: Vec<Vec<f64>>,
}

impl Standardizer {
    pub fn fit(raw: &DataMatrix) -> Self {
        let sorted_columns = raw
            .values()
            .axis_iter(Axis(1))
            .map(|col| {
                let mut c = col.to_vec();
                c.sort_by(f64::total_cmp);
                c
            })
            .collect();
        Self { n: raw.n(), sorted_columns }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.sorted_columns.len()
    }

    /// `1 / (1 - F_j(x))`. Values above every training value map to `n + 1`,
    /// values below all of them to `1`.
    pub fn transform_value(&self, j: usize, x: f64) -> f64 {
        let col = &self.sorted_columns[j];
        let count = col.partition_point(|&v| v <= x);
        let n1 = (self.n + 1) as f64;
        n1 / (n1 - count as f64)
    }

    pub fn transform_row(&self, row: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if row.len() != self.p() {
            return Err(Error::Shape(format!(
                "row has {} features, standardizer expects {}",
                row.len(),
                self.p()
            )));
        }
        if let Some((col, _)) = row.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col });
        }
        Ok(Array1::from_iter(row.iter().enumerate().map(|(j, &x)| self.transform_value(j, x))))
    }

    pub fn transform(&self, raw: &DataMatrix) -> Result<StandardizedMatrix> {
        if raw.p() != self.p() {
            return Err(Error::Shape(format!(
                "data has {} features, standardizer expects {}",
                raw.p(),
                self.p()
            )));
        }
        let mut out = Array2::zeros(raw.values().dim());
        for (j, (src, mut dst)) in raw
            .values()
            .axis_iter(Axis(1))
            .zip(out.axis_iter_mut(Axis(1)))
            .enumerate()
        {
            for (d, &x) in dst.iter_mut().zip(src.iter()) {
                *d = self.transform_value(j, x);
            }
        }
        Ok(StandardizedMatrix { values: out })
    }
}

/// Which marginal transform maps raw data to Pareto scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Margins {
    /// Empirical c.d.f. of the training sample (rank transform).
    #[default]
    Empirical,
    /// Margins known to be unit Fréchet, `F(x) = exp(-1/x)`; used for
    /// simulated data where the true marginals are available.
    UnitFrechet,
}

impl std::str::FromStr for Margins {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "empirical" => Ok(Self::Empirical),
            "unit-frechet" | "frechet" => Ok(Self::UnitFrechet),
            other => invalid(format!("unknown margins {other:?}")),
        }
    }
}

/// `1 / (1 - exp(-1/x))` for `x > 0`, and `1` otherwise.
pub fn frechet_to_pareto(x: f64) -> f64 {
    if x > 0.0 {
        -1.0 / (-1.0 / x).exp_m1()
    } else {
        1.0
    }
}

/// Applies [`frechet_to_pareto`] entry-wise.
pub fn frechet_standardize(raw: &DataMatrix) -> StandardizedMatrix {
    StandardizedMatrix { values: raw.values().mapv(frechet_to_pareto) }
}

/// Rank-transforms every column of `raw` to Pareto scale.
pub fn rank_standardize(raw: &DataMatrix) -> StandardizedMatrix {
    let st = Standardizer::fit(raw);
    st.transform(raw).expect("standardizer fitted on the same matrix")
}

/// The `k` rows of largest sup-norm, sorted by non-increasing norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremeSet {
    rows: Array2<f64>,
    indices: Vec<usize>,
    threshold: f64,
    gamma: f64,
}

impl ExtremeSet {
    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    /// Original row ids of the selected samples.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn k(&self) -> usize {
        self.rows.nrows()
    }

    pub fn p(&self) -> usize {
        self.rows.ncols()
    }

    /// Sup-norm of the k-th largest row.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

pub fn sup_norm(row: ArrayView1<'_, f64>) -> f64 {
    row.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
}

/// `floor(n * gamma)`, guarding against representation error such as
/// `0.29 * 100 = 28.999999999999996`.
pub fn extreme_count(n: usize, gamma: f64) -> usize {
    let raw = n as f64 * gamma;
    (raw * (1.0 + 1e-12)).floor() as usize
}

/// Keeps the `floor(n * gamma)` rows of largest sup-norm.
pub fn select_extremes(std: &StandardizedMatrix, gamma: f64) -> Result<ExtremeSet> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return invalid(format!("gamma must lie in (0, 1), got {gamma}"));
    }
    let k = extreme_count(std.n(), gamma);
    if k == 0 {
        return Err(Error::NoExtremes { n: std.n(), gamma });
    }
    let mut ext = select_top_k(std, k)?;
    ext.gamma = gamma;
    Ok(ext)
}

/// Keeps the `k` rows of largest sup-norm; ties go to the smaller original index.
pub fn select_top_k(std: &StandardizedMatrix, k: usize) -> Result<ExtremeSet> {
    let n = std.n();
    if k == 0 || k > n {
        return invalid(format!("extreme count {k} outside 1..={n}"));
    }
    let values = std.values();
    let norms: Vec<f64> = values.axis_iter(Axis(0)).map(sup_norm).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps index order among equal norms
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    order.truncate(k);
    let rows = values.select(Axis(0), &order);
    let threshold = norms[order[k - 1]];
    Ok(ExtremeSet { rows, indices: order, threshold, gamma: k as f64 / n as f64 })
}

/// Extreme rows projected on the sup-norm sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularMatrix(Array2<f64>);

impl AngularMatrix {
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    pub fn p(&self) -> usize {
        self.0.ncols()
    }

    /// Normalizes arbitrary positive rows.
    pub fn from_rows(rows: ArrayView2<'_, f64>) -> Result<Self> {
        let mut out = rows.to_owned();
        for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let norm = sup_norm(row.view());
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::ZeroNorm(i));
            }
            row.mapv_inplace(|v| v / norm);
        }
        Ok(Self(out))
    }
}

/// `row / ||row||_inf` for every extreme row.
pub fn angular_normalize(ext: &ExtremeSet) -> Result<AngularMatrix> {
    AngularMatrix::from_rows(ext.rows())
}

/// Sup-norm projection of a single point.
pub fn angular_point(x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let norm = sup_norm(x);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroNorm(0));
    }
    Ok(x.mapv(|v| v / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn data(v: Array2<f64>) -> DataMatrix {
        DataMatrix::new(v).unwrap()
    }

    #[test]
    fn rank_transform_of_increasing_column() {
        let raw = data(array![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0]]);
        let st = rank_standardize(&raw);
        let col: Vec<f64> = st.values().column(0).to_vec();
        let expected = [5.0 / 4.0, 5.0 / 3.0, 5.0 / 2.0, 5.0];
        for (a, b) in col.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn single_row_maps_to_two() {
        let raw = data(array![[3.5, -2.0]]);
        let st = rank_standardize(&raw);
        assert_eq!(st.values().row(0).to_vec(), vec![2.0, 2.0]);
    }

    #[test]
    fn ties_use_max_rank() {
        let raw = data(array![[7.0, 1.0], [7.0, 2.0], [7.0, 3.0]]);
        let st = rank_standardize(&raw);
        assert_eq!(st.values().column(0).to_vec(), vec![4.0, 4.0, 4.0]);
    }

    #[test]
    fn non_finite_rejected() {
        let err = DataMatrix::new(array![[1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
        assert!(DataMatrix::new(array![[1.0], [2.0]]).is_err());
    }

    #[test]
    fn new_value_above_training_range() {
        let raw = data(array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
        let st = Standardizer::fit(&raw);
        assert_eq!(st.transform_value(0, 100.0), 4.0);
        assert_eq!(st.transform_value(0, -5.0), 1.0);
        assert_eq!(st.transform_value(0, 2.5), 2.0);
    }

    fn std_with_norms(norms: &[f64]) -> StandardizedMatrix {
        let rows: Vec<f64> = norms.iter().flat_map(|&v| [v, 1.0]).collect();
        StandardizedMatrix::from_values(Array2::from_shape_vec((norms.len(), 2), rows).unwrap()).unwrap()
    }

    #[test]
    fn top_rows_by_sup_norm() {
        let norms: Vec<f64> = (1..=10).map(f64::from).collect();
        let ext = select_extremes(&std_with_norms(&norms), 0.3).unwrap();
        assert_eq!(ext.k(), 3);
        assert_eq!(ext.indices(), &[9, 8, 7]);
        assert_eq!(ext.threshold(), 8.0);
        let ext = select_extremes(&std_with_norms(&norms), 0.999).unwrap();
        assert_eq!(ext.k(), 9);
    }

    #[test]
    fn ties_at_cut_keep_smaller_index() {
        let ext = select_extremes(&std_with_norms(&[5.0, 5.0, 1.0]), 0.34).unwrap();
        assert_eq!(ext.k(), 1);
        assert_eq!(ext.indices(), &[0]);
    }

    #[test]
    fn no_extremes_error() {
        let err = select_extremes(&std_with_norms(&[2.0, 3.0]), 0.2).unwrap_err();
        assert!(matches!(err, Error::NoExtremes { .. }));
        assert!(err.to_string().contains("no extremes at this gamma"));
    }

    #[test]
    fn extreme_count_guards_rounding() {
        assert_eq!(extreme_count(100, 0.29), 29);
        assert_eq!(extreme_count(10, 0.999), 9);
    }

    #[test]
    fn angular_rows() {
        let a = AngularMatrix::from_rows(array![[2.0, 4.0], [3.0, 3.0]].view()).unwrap();
        assert_eq!(a.values(), array![[0.5, 1.0], [1.0, 1.0]]);
        let again = AngularMatrix::from_rows(a.values()).unwrap();
        assert_eq!(again, a);
        assert!(matches!(
            AngularMatrix::from_rows(array![[0.0, 0.0]].view()),
            Err(Error::ZeroNorm(0))
        ));
    }

    #[test]
    fn frechet_margins() {
        // F(1) = e^-1, so 1/(1 - F(1)) = e/(e - 1)
        let e = std::f64::consts::E;
        assert!((frechet_to_pareto(1.0) - e / (e - 1.0)).abs() < 1e-14);
        assert_eq!(frechet_to_pareto(0.0), 1.0);
        assert_eq!(frechet_to_pareto(-3.0), 1.0);
        // tail equivalence: 1/(1 - F(x)) ~ x + 1/2 for large x
        assert!((frechet_to_pareto(1e6) - (1e6 + 0.5)).abs() < 1e-3);
        assert_eq!("unit-frechet".parse::<Margins>().unwrap(), Margins::UnitFrechet);
        assert!("pareto".parse::<Margins>().is_err());
    }
}
