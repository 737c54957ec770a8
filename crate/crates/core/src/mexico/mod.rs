//! Alternating projected gradient ascent over a mixture matrix `W` (columns
//! in the M-set) and a responsibility matrix `Z` (columns in the simplex).

mod fit;
mod objective;

pub use fit::{
    fit_angular, fit_data, fit_data_best_of, fit_extremes, fit_extremes_best_of, fit_matrix, fit_matrix_best_of,
    init_matrices, FitOutcome, FittedModel,
};
pub use objective::{grad_w, grad_z, objective, orthogonality_penalty, penalty_gradient};

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::simplex::{mset_radius, ProjectionMethod, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::tail::Margins;

/// Column-stochastic p×m matrix; column `j` is the feature mixture of cluster `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureMatrix(Array2<f64>);

impl MixtureMatrix {
    pub fn new(w: Array2<f64>) -> Result<Self> {
        check_column_stochastic(w.view(), "W")?;
        if w.ncols() >= w.nrows() {
            return invalid(format!("W must have fewer columns than rows, got {:?}", w.dim()));
        }
        Ok(Self(w))
    }

    /// Skips the `m < p` requirement; used for square test transforms.
    pub fn new_unchecked_dims(w: Array2<f64>) -> Result<Self> {
        check_column_stochastic(w.view(), "W")?;
        Ok(Self(w))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn p(&self) -> usize {
        self.0.nrows()
    }

    pub fn m(&self) -> usize {
        self.0.ncols()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Column-stochastic m×k matrix of soft cluster memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsibilityMatrix(Array2<f64>);

impl ResponsibilityMatrix {
    pub fn new(z: Array2<f64>) -> Result<Self> {
        check_column_stochastic(z.view(), "Z")?;
        Ok(Self(z))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

fn check_column_stochastic(a: ArrayView2<'_, f64>, name: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Shape(format!("{name} is empty")));
    }
    for (j, col) in a.axis_iter(Axis(1)).enumerate() {
        if col.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
            return invalid(format!("{name} column {j} has entries outside [0, 1]"));
        }
        let s = col.sum();
        if (s - 1.0).abs() > 1e-10 {
            return invalid(format!("{name} column {j} sums to {s}"));
        }
    }
    Ok(())
}

/// Hyper-parameters of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Number of feature clusters.
    pub m: usize,
    /// Weight of the orthogonality penalty.
    pub lambda: f64,
    /// M-set threshold.
    pub tau: f64,
    /// Fraction of training samples treated as extreme.
    pub gamma: f64,
    pub max_outer_iters: usize,
    /// Stop once the relative objective change falls below this.
    pub obj_tol: f64,
    /// Sufficient-increase constant of the backtracking line search.
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub init_step: f64,
    pub seed: u64,
    /// Fit on sup-norm-normalized extremes instead of the standardized ones.
    pub angular: bool,
    pub projection: ProjectionMethod,
    /// Marginal transform applied by the full pipeline.
    pub margins: Margins,
    pub proj_tol: f64,
    pub proj_max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            m: 2,
            lambda: 5.0,
            tau: 0.7,
            gamma: 0.1,
            max_outer_iters: 500,
            obj_tol: 1e-8,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            init_step: 1.0,
            seed: 0,
            angular: false,
            projection: ProjectionMethod::Dykstra,
            margins: Margins::Empirical,
            proj_tol: DEFAULT_TOL,
            proj_max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.m == 0 || self.m >= p {
            return invalid(format!("need 1 <= m < p, got m = {} with p = {p}", self.m));
        }
        mset_radius(p, self.tau)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return invalid(format!("lambda must be a finite non-negative number, got {}", self.lambda));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return invalid(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return invalid(format!("armijo_c must lie in (0, 1), got {}", self.armijo_c));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return invalid(format!("backtrack_factor must lie in (0, 1), got {}", self.backtrack_factor));
        }
        if !(self.init_step > 0.0) || !(self.obj_tol > 0.0) || !(self.proj_tol > 0.0) {
            return invalid("init_step, obj_tol and proj_tol must be positive");
        }
        if self.max_outer_iters == 0 || self.proj_max_iter == 0 {
            return invalid("iteration limits must be positive");
        }
        Ok(())
    }
}
