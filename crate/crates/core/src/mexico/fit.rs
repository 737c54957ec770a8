use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::objective::{objective, orthogonality_penalty, penalty_gradient};
use super::{FitConfig, MixtureMatrix, ResponsibilityMatrix};
use crate::error::{invalid, Error, Result};
use crate::random::dirichlet_uniform;
use crate::simplex::{project_simplex, MSetSpec, ProjectionMethod};
use crate::tail::{
    angular_normalize, frechet_standardize, frechet_to_pareto, select_extremes, AngularMatrix, DataMatrix, ExtremeSet,
    Margins, Standardizer,
};

/// Smallest step tried by the backtracking line search.
const MIN_STEP: f64 = 1e-12;
/// Cap on the warm-started initial step.
const MAX_STEP: f64 = 1e12;

/// Random starting point: Dirichlet(1) columns, `W` projected onto the M-set.
pub fn init_matrices(
    p: usize,
    m: usize,
    k: usize,
    tau: f64,
    seed: u64,
    method: ProjectionMethod,
) -> Result<(MixtureMatrix, ResponsibilityMatrix)> {
    if m == 0 || k == 0 || p < 2 {
        return invalid(format!("invalid dimensions p = {p}, m = {m}, k = {k}"));
    }
    let spec = MSetSpec::new(p, tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Array2::zeros((p, m));
    for mut col in w.axis_iter_mut(Axis(1)) {
        let draw = dirichlet_uniform(&mut rng, p);
        let proj = spec.project(&draw, method, crate::simplex::DEFAULT_TOL, crate::simplex::DEFAULT_MAX_ITER)?;
        col.assign(&Array1::from(proj));
    }
    let mut z = Array2::zeros((m, k));
    for mut col in z.axis_iter_mut(Axis(1)) {
        col.assign(&Array1::from(dirichlet_uniform(&mut rng, m)));
    }
    Ok((MixtureMatrix::new_unchecked_dims(w)?, ResponsibilityMatrix::new(z)?))
}

/// Result of the optimizer on a fixed k×p input.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub w: MixtureMatrix,
    pub z: ResponsibilityMatrix,
    /// Objective after initialization followed by one value per outer iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl FitOutcome {
    pub fn iterations(&self) -> usize {
        self.objective_trace.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace starts with the initial objective")
    }
}

/// A fitted model ready for scoring new points.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub w: MixtureMatrix,
    pub z: ResponsibilityMatrix,
    /// Sup-norm of the k-th largest standardized training sample.
    pub threshold: f64,
    pub config: FitConfig,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// Training marginals; absent when the model was fitted on pre-standardized extremes.
    pub standardizer: Option<Standardizer>,
}

impl FittedModel {
    pub fn p(&self) -> usize {
        self.w.p()
    }

    pub fn m(&self) -> usize {
        self.w.m()
    }

    /// Maps a raw point to Pareto scale with the training marginals.
    ///
    /// A model fitted on pre-standardized extremes (no stored standardizer,
    /// empirical margins) takes its input as already standardized.
    pub fn standardize_row(&self, raw: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if raw.len() != self.p() {
            return Err(Error::Shape(format!("point has {} features, model expects {}", raw.len(), self.p())));
        }
        if let Some(col) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col });
        }
        match (&self.standardizer, self.config.margins) {
            (_, Margins::UnitFrechet) => Ok(raw.mapv(frechet_to_pareto)),
            (Some(st), Margins::Empirical) => st.transform_row(raw),
            (None, Margins::Empirical) => Ok(raw.to_owned()),
        }
    }

    fn from_outcome(out: FitOutcome, threshold: f64, config: FitConfig, standardizer: Option<Standardizer>) -> Self {
        Self {
            w: out.w,
            z: out.z,
            threshold,
            config,
            objective_trace: out.objective_trace,
            converged: out.converged,
            standardizer,
        }
    }
}

/// Full pipeline on raw data: rank standardization, extreme selection,
/// optional angular normalization, then the alternating ascent.
pub fn fit_data(raw: &DataMatrix, cfg: &FitConfig) -> Result<FittedModel> {
    fit_data_best_of(raw, cfg, 1)
}

/// [`fit_data`] with `restarts` seeds.
pub fn fit_data_best_of(raw: &DataMatrix, cfg: &FitConfig, restarts: usize) -> Result<FittedModel> {
    cfg.validate(raw.p())?;
    let (std, standardizer) = match cfg.margins {
        Margins::Empirical => {
            let st = Standardizer::fit(raw);
            (st.transform(raw)?, Some(st))
        }
        Margins::UnitFrechet => (frechet_standardize(raw), None),
    };
    let ext = select_extremes(&std, cfg.gamma)?;
    let mut model = fit_extremes_best_of(&ext, cfg, restarts)?;
    model.standardizer = standardizer;
    Ok(model)
}

/// Fits on already selected extremes (normalizing them first when `cfg.angular`).
pub fn fit_extremes(ext: &ExtremeSet, cfg: &FitConfig) -> Result<FittedModel> {
    fit_extremes_best_of(ext, cfg, 1)
}

/// [`fit_extremes`] with the multi-start loop of [`fit_matrix_best_of`]; the
/// stored config carries the winning seed.
pub fn fit_extremes_best_of(ext: &ExtremeSet, cfg: &FitConfig, restarts: usize) -> Result<FittedModel> {
    let (out, seed) = if cfg.angular {
        let ang = angular_normalize(ext)?;
        fit_matrix_best_of(ang.values(), cfg, restarts)?
    } else {
        fit_matrix_best_of(ext.rows(), cfg, restarts)?
    };
    Ok(FittedModel::from_outcome(out, ext.threshold(), FitConfig { seed, ..cfg.clone() }, None))
}

/// Fits on angular points directly; the threshold is left at zero.
pub fn fit_angular(ang: &AngularMatrix, cfg: &FitConfig) -> Result<FittedModel> {
    let out = fit_matrix(ang.values(), cfg)?;
    Ok(FittedModel::from_outcome(out, 0.0, cfg.clone(), None))
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

fn frobenius_dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Backtracking projected ascent on one block whose objective is `value`,
/// starting from `step`.
///
/// Returns the accepted iterate, its objective and the accepted step, or
/// `None` when no step down to `MIN_STEP` gives a sufficient increase.
fn line_search<P, F>(
    current: &Array2<f64>,
    f0: f64,
    grad: &Array2<f64>,
    mut step: f64,
    cfg: &FitConfig,
    project: P,
    value: F,
) -> Result<Option<(Array2<f64>, f64, f64)>>
where
    P: Fn(&Array2<f64>) -> Result<Array2<f64>>,
    F: Fn(&Array2<f64>) -> f64,
{
    while step >= MIN_STEP {
        let trial = project(&(current + &(grad * step)))?;
        let f_trial = value(&trial);
        let predicted = frobenius_dot(grad, &(&trial - current));
        if f_trial >= f0 + (cfg.armijo_c * predicted).max(0.0) {
            return Ok(Some((trial, f_trial, step)));
        }
        step *= cfg.backtrack_factor;
    }
    Ok(None)
}

/// Per-block step memory: the next search starts one expansion above the
/// last accepted step, so a block whose gradient is tiny (the `Z` block is
/// scaled by `1/k`) can still take long steps.
struct StepSize {
    next: f64,
    initial: f64,
    grow: f64,
    cap: f64,
}

impl StepSize {
    fn new(cfg: &FitConfig, cap: f64) -> Self {
        Self { next: cfg.init_step, initial: cfg.init_step, grow: 1.0 / cfg.backtrack_factor, cap }
    }

    fn accepted(&mut self, step: f64) {
        self.next = (step * self.grow).min(self.cap);
    }

    fn failed(&mut self) {
        self.next = self.initial;
    }
}

fn project_columns_mset(a: &Array2<f64>, spec: &MSetSpec, cfg: &FitConfig) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(a.dim());
    for (src, mut dst) in a.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
        let v = src.to_vec();
        let proj = spec.project(&v, cfg.projection, cfg.proj_tol, cfg.proj_max_iter)?;
        dst.assign(&Array1::from(proj));
    }
    Ok(out)
}

fn project_columns_simplex(a: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(a.dim());
    for (src, mut dst) in a.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
        dst.assign(&Array1::from(project_simplex(&src.to_vec())));
    }
    out
}

/// Runs [`fit_matrix`] from `restarts` consecutive seeds starting at
/// `cfg.seed` and keeps the run with the highest final objective (earliest
/// seed on ties). The problem is non-convex; this is the multi-start loop.
pub fn fit_matrix_best_of(x: ArrayView2<'_, f64>, cfg: &FitConfig, restarts: usize) -> Result<(FitOutcome, u64)> {
    if restarts == 0 {
        return invalid("restarts must be at least 1");
    }
    let mut best: Option<(FitOutcome, u64)> = None;
    for r in 0..restarts as u64 {
        let seed = cfg.seed.wrapping_add(r);
        let out = fit_matrix(x, &FitConfig { seed, ..cfg.clone() })?;
        let better = match &best {
            None => true,
            Some((b, _)) => out.final_objective() > b.final_objective(),
        };
        if better {
            best = Some((out, seed));
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Alternating projected gradient ascent on a k×p input matrix.
///
/// Each outer iteration takes one backtracking step on `W` (columns projected
/// on the M-set) and then one on `Z` using the updated `W`.
pub fn fit_matrix(x: ArrayView2<'_, f64>, cfg: &FitConfig) -> Result<FitOutcome> {
    let (k, p) = x.dim();
    cfg.validate(p)?;
    if k < cfg.m {
        return invalid(format!("need at least m = {} extreme samples, got k = {k}", cfg.m));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("input matrix has non-finite entries");
    }
    let spec = MSetSpec::new(p, cfg.tau)?;
    let (w0, z0) = init_matrices(p, cfg.m, k, cfg.tau, cfg.seed, cfg.projection)?;
    let mut w = w0.into_inner();
    let mut z = z0.into_inner();
    let kf = k as f64;
    let lambda = cfg.lambda;

    let mut f = objective(x, w.view(), z.view(), lambda)?;
    let mut trace = vec![f];
    let mut converged = false;
        // W steps never grow past init_step: long projected steps land on M-set
    // vertices and lock columns onto cross-cluster feature pairs. Z has no
    // such trap (its optimum is a vertex) and needs the growth.
    let mut step_w = StepSize::new(cfg, cfg.init_step);
    let mut step_z = StepSize::new(cfg, MAX_STEP);

    for _ in 0..cfg.max_outer_iters {
        let f_prev = f;

        // W block: the data term is <W, (ZX)^T / k>.
        let data_w = z.dot(&x).reversed_axes() / kf;
        let grad = if lambda > 0.0 { &data_w - &(penalty_gradient(w.view()) * lambda) } else { data_w.clone() };
        let value_w = |cand: &Array2<f64>| frobenius_dot(cand, &data_w) - lambda * orthogonality_penalty(cand.view());
        let f_w = value_w(&w);
        let w_step = line_search(&w, f_w, &grad, step_w.next, cfg, |a| project_columns_mset(a, &spec, cfg), value_w)?;
        let w_moved = match w_step {
            Some((next, _, step)) => {
                // moves below the projection accuracy are projection noise
                let moved = max_abs_diff(&next, &w) > cfg.proj_tol;
                step_w.accepted(step);
                w = next;
                moved
            }
            None => {
                step_w.failed();
                false
            }
        };

        // Z block with the updated W: the data term is <Z, (XW)^T / k>.
        let data_z = x.dot(&w).reversed_axes() / kf;
        let value_z = |cand: &Array2<f64>| frobenius_dot(cand, &data_z);
        let f_z = value_z(&z);
        let z_step = line_search(&z, f_z, &data_z, step_z.next, cfg, |a| Ok(project_columns_simplex(a)), value_z)?;
        let z_moved = match z_step {
            Some((next, _, step)) => {
                let moved = next != z;
                step_z.accepted(step);
                z = next;
                moved
            }
            None => {
                step_z.failed();
                false
            }
        };

        f = objective(x, w.view(), z.view(), lambda)?;
        trace.push(f);
        if !w_moved && !z_moved {
            converged = true;
            break;
        }
        if (f - f_prev).abs() <= cfg.obj_tol * f_prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    let w = MixtureMatrix::new_unchecked_dims(w).map_err(|e| Error::Model(format!("fitted W invalid: {e}")))?;
    let z = ResponsibilityMatrix::new(z).map_err(|e| Error::Model(format!("fitted Z invalid: {e}")))?;
    Ok(FitOutcome { w, z, objective_trace: trace, converged })
}
