//! Euclidean projections onto the probability simplex and onto the M-set
//! (the simplex with its vertices cut off by a sup-norm ball), plus the
//! closed-form volume ratios of the candidate constraint sets.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// How a mixture column is projected back onto the M-set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMethod {
    /// Dykstra's corrected alternating projections: converges to the nearest point.
    #[default]
    Dykstra,
    /// Plain alternating projections: converges to some point of the intersection.
    Pocs,
}

impl std::str::FromStr for ProjectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dykstra" => Ok(Self::Dykstra),
            "pocs" => Ok(Self::Pocs),
            other => invalid(format!("unknown projection method {other:?}")),
        }
    }
}

/// `1 - (1 - tau)(p - 1)/p`: the largest coordinate allowed in the M-set.
pub fn mset_radius(p: usize, tau: f64) -> Result<f64> {
    if p < 2 {
        return invalid(format!("dimension must be >= 2, got {p}"));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return invalid(format!("tau must lie in (0, 1], got {tau}"));
    }
    let p = p as f64;
    Ok(1.0 - (1.0 - tau) * (p - 1.0) / p)
}

/// Simplex of dimension `p` intersected with `[0, r_inf]^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MSetSpec {
    p: usize,
    tau: f64,
    r_inf: f64,
}

impl MSetSpec {
    pub fn new(p: usize, tau: f64) -> Result<Self> {
        let r_inf = mset_radius(p, tau)?;
        Ok(Self { p, tau, r_inf })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn r_inf(&self) -> f64 {
        self.r_inf
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.p && in_simplex(x, tol) && x.iter().all(|&v| v <= self.r_inf + tol)
    }

    /// The M-set written through the barycenter geometry: the component of
    /// `x - xbar` along the unit direction towards each vertex `e_j` is at
    /// most `tau` times the barycenter-to-vertex distance.
    pub fn contains_by_projection(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.p || !in_simplex(x, tol) {
            return false;
        }
        let p = self.p as f64;
        let bary = 1.0 / p;
        let dist = ((p - 1.0) / p).sqrt();
        (0..self.p).all(|j| {
            let dot: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &xi)| (xi - bary) * (if i == j { 1.0 } else { 0.0 } - bary))
                .sum();
            dot / dist <= self.tau * dist + tol
        })
    }

    pub fn project(&self, v: &[f64], method: ProjectionMethod, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        match method {
            ProjectionMethod::Dykstra => project_mset_dykstra(v, self, tol, max_iter),
            ProjectionMethod::Pocs => project_mset_pocs(v, self, tol, max_iter),
        }
    }
}

pub fn in_simplex(x: &[f64], tol: f64) -> bool {
    x.iter().all(|&v| v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
}

/// Reversed simplex spanned by the face centers of the simplex.
pub fn in_l1_incircle(x: &[f64], tol: f64) -> bool {
    let p = x.len() as f64;
    in_simplex(x, tol) && x.iter().all(|&v| v <= 1.0 / (p - 1.0) + tol)
}

/// Simplex intersected with its inscribed Euclidean ball.
pub fn in_l2_incircle(x: &[f64], tol: f64) -> bool {
    let p = x.len() as f64;
    let radius = 1.0 / (p * (p - 1.0)).sqrt();
    let dist: f64 = x.iter().map(|&v| (v - 1.0 / p).powi(2)).sum::<f64>().sqrt();
    in_simplex(x, tol) && dist <= radius + tol
}

/// Euclidean projection onto the probability simplex by sorting and
/// thresholding.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    // the projection commutes with adding a constant to every coordinate;
    // centering on the maximum keeps the threshold accurate for large inputs
    let top = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let v: Vec<f64> = v.iter().map(|&x| x - top).collect();
    let mut u = v.clone();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|&vi| (vi - theta).max(0.0)).collect()
}

/// Component-wise clamp to `[0, r]`.
pub fn project_box(v: &[f64], r: f64) -> Vec<f64> {
    v.iter().map(|&x| x.clamp(0.0, r)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn box_violation(x: &[f64], r: f64) -> f64 {
    x.iter().fold(0.0_f64, |m, &v| m.max(v - r))
}

/// Dykstra's algorithm alternating between the box and the simplex.
///
/// The returned point always comes from the simplex step, so it sums to one
/// and is non-negative; the box constraint holds up to `tol`.
pub fn project_mset_dykstra(v: &[f64], spec: &MSetSpec, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    check_input(v, spec)?;
    let r = spec.r_inf;
    let direct = project_simplex(v);
    if box_violation(&direct, r) <= 0.0 {
        return Ok(direct);
    }

    let p = v.len();
    // the projection onto a subset of {sum x = 1} is unchanged by adding a
    // constant to every coordinate; start from the representative summing to one
    let offset = (1.0 - v.iter().sum::<f64>()) / p as f64;
    let mut x: Vec<f64> = v.iter().map(|&a| a + offset).collect();
    let mut inc_box = vec![0.0; p];
    let mut inc_simplex = vec![0.0; p];
    let mut y = vec![0.0; p];
    let mut y_prev = vec![f64::NAN; p];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        for i in 0..p {
            y[i] = (x[i] + inc_box[i]).clamp(0.0, r);
            inc_box[i] += x[i] - y[i];
        }
        let shifted: Vec<f64> = y.iter().zip(&inc_simplex).map(|(a, b)| a + b).collect();
        let next = project_simplex(&shifted);
        for i in 0..p {
            inc_simplex[i] = shifted[i] - next[i];
        }
        // the iterate alone can stall while the correction terms are still
        // moving, so also require the two half-steps to agree
        let change = max_abs_diff(&next, &x);
        let gap = max_abs_diff(&next, &y);
        let stalled = change <= PLATEAU_EPS && max_abs_diff(&y, &y_prev) <= PLATEAU_EPS;
        x = next;
        residual = change.max(gap).max(box_violation(&x, r));
        if residual <= tol {
            return Ok(x);
        }
        if stalled {
            skip_plateau(&x, &y, &mut inc_box, &mut inc_simplex, r);
        }
        y_prev.copy_from_slice(&y);
    }
    Err(Error::NotConverged { method: "dykstra", iterations: max_iter, residual, last: x })
}

const PLATEAU_EPS: f64 = 1e-14;

/// Fast-forwards a Dykstra plateau.
///
/// When both half-step iterates repeat, every further iteration adds
/// `d = x - y` to the box correction and subtracts it from the simplex
/// correction, and nothing else changes until some coordinate crosses a clamp
/// bound or leaves the zero set of the simplex projection. For inputs far
/// outside the set that can take millions of iterations. This applies all
/// but the last of those iterations at once, which is exactly what running
/// them would produce (up to rounding). Returns the number skipped.
fn skip_plateau(x: &[f64], y: &[f64], inc_box: &mut [f64], inc_simplex: &mut [f64], r: f64) -> usize {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut horizon = f64::INFINITY;

    // box step: inputs u = x + inc_box move by d
    for i in 0..x.len() {
        let u = x[i] + inc_box[i];
        if u < 0.0 {
            if d[i] > 0.0 {
                horizon = horizon.min(-u / d[i]);
            }
        } else if u > r {
            if d[i] < 0.0 {
                horizon = horizon.min((u - r) / -d[i]);
            }
        } else if d[i].abs() > PLATEAU_EPS {
            return 0;
        }
    }

    // simplex step: inputs s = y + inc_simplex move by -d; the support keeps
    // its values only if it moves rigidly, carrying the threshold with it
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
    let Some(&first) = support.first() else { return 0 };
    let rate = -d[first];
    if support.iter().any(|&i| (-d[i] - rate).abs() > PLATEAU_EPS) {
        return 0;
    }
    let theta = y[first] + inc_simplex[first] - x[first];
    for j in (0..x.len()).filter(|&j| x[j] <= 0.0) {
        let gap = y[j] + inc_simplex[j] - theta;
        let speed = -d[j] - rate;
        if speed > 0.0 {
            horizon = horizon.min(-gap / speed);
        }
    }

    if !horizon.is_finite() || horizon < 3.0 {
        return 0;
    }
    let jump = horizon.floor() - 1.0;
    for i in 0..x.len() {
        inc_box[i] += jump * d[i];
        inc_simplex[i] -= jump * d[i];
    }
    jump as usize
}

/// Alternating projections between the simplex and the box, stopping as soon
/// as the simplex iterate satisfies the box within `tol`.
pub fn project_mset_pocs(v: &[f64], spec: &MSetSpec, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    check_input(v, spec)?;
    let r = spec.r_inf;
    let mut x = project_simplex(v);
    let mut residual = box_violation(&x, r);
    if residual <= tol {
        return Ok(x);
    }
    for _ in 0..max_iter {
        let y = project_box(&x, r);
        x = project_simplex(&y);
        residual = box_violation(&x, r);
        if residual <= tol {
            return Ok(x);
        }
    }
    Err(Error::NotConverged { method: "pocs", iterations: max_iter, residual, last: x })
}

fn check_input(v: &[f64], spec: &MSetSpec) -> Result<()> {
    if v.len() != spec.p {
        return Err(Error::Shape(format!("vector of length {} for an M-set of dimension {}", v.len(), spec.p)));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return invalid("cannot project a non-finite vector");
    }
    Ok(())
}

fn check_dim(p: usize) -> Result<()> {
    if p < 2 {
        return invalid(format!("dimension must be >= 2, got {p}"));
    }
    Ok(())
}

/// Hypervolume of the probability simplex, `sqrt(p) / Gamma(p)`.
pub fn volume_simplex(p: usize) -> Result<f64> {
    check_dim(p)?;
    let pf = p as f64;
    Ok((0.5 * pf.ln() - ln_gamma(pf)).exp())
}

/// Volume ratio of the reversed simplex through the face centers.
pub fn ratio_l1(p: usize) -> Result<f64> {
    check_dim(p)?;
    let q = (p - 1) as f64;
    Ok((-q * q.ln()).exp())
}

/// Volume ratio of the inscribed-ball section of the simplex.
pub fn ratio_l2(p: usize) -> Result<f64> {
    check_dim(p)?;
    let pf = p as f64;
    let q = pf - 1.0;
    let ln = ln_gamma(pf) - ln_gamma((pf + 1.0) / 2.0) + 0.5 * q * std::f64::consts::PI.ln()
        - 0.5 * (pf * pf.ln() + q * q.ln());
    Ok(ln.exp())
}

/// Smallest `tau` for which the cut corners are pairwise disjoint.
pub fn mset_tau_min(p: usize) -> f64 {
    let pf = p as f64;
    1.0 - pf / (2.0 * (pf - 1.0))
}

/// Volume ratio of the M-set, `1 - p [(1 - tau)(p - 1)/p]^(p - 1)`.
///
/// Only valid while the removed corners do not overlap.
pub fn ratio_mset(p: usize, tau: f64) -> Result<f64> {
    check_dim(p)?;
    if !(tau > 0.0 && tau <= 1.0) {
        return invalid(format!("tau must lie in (0, 1], got {tau}"));
    }
    let min = mset_tau_min(p);
    if tau < min {
        return Err(Error::OverlappingCornerCut { p, tau, min });
    }
    let pf = p as f64;
    let corner = (1.0 - tau) * (pf - 1.0) / pf;
    Ok(1.0 - pf * corner.powi(p as i32 - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        max_abs_diff(a, b) <= tol
    }

    #[test]
    fn simplex_projection_examples() {
        assert_eq!(project_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        assert!(close(&project_simplex(&[0.6, 0.6]), &[0.5, 0.5], 1e-15));
        assert!(close(&project_simplex(&[-3.0, 10.0, 0.0]), &[0.0, 1.0, 0.0], 0.0));
    }

    #[test]
    fn box_projection_examples() {
        assert_eq!(project_box(&[0.2, 1.5], 1.0), vec![0.2, 1.0]);
        assert_eq!(project_box(&[-0.1, 0.3], 1.0), vec![0.0, 0.3]);
        assert_eq!(project_box(&[0.1, 0.9], 1.0), vec![0.1, 0.9]);
    }

    #[test]
    fn radius_examples() {
        for p in 2..10 {
            assert_eq!(mset_radius(p, 1.0).unwrap(), 1.0);
        }
        assert!((mset_radius(3, 1e-12).unwrap() - 1.0 / 3.0).abs() < 1e-11);
        assert!((mset_radius(2, 0.5).unwrap() - 0.75).abs() < 1e-15);
        assert!(mset_radius(3, 0.0).is_err());
        assert!(mset_radius(3, 1.5).is_err());
    }

    #[test]
    fn dykstra_examples() {
        let spec = MSetSpec::new(4, 0.3).unwrap();
        let bary = [0.25; 4];
        assert_eq!(project_mset_dykstra(&bary, &spec, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap(), bary.to_vec());

        let spec = MSetSpec::new(2, 0.5).unwrap();
        let x = project_mset_dykstra(&[1.0, 0.0], &spec, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(close(&x, &[0.75, 0.25], 1e-9), "{x:?}");

        let spec = MSetSpec::new(3, 0.9).unwrap();
        let v = [0.5, 0.2, 0.4];
        let x = project_mset_dykstra(&v, &spec, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(x, project_simplex(&v));
    }

    #[test]
    fn pocs_examples() {
        let spec = MSetSpec::new(3, 0.5).unwrap();
        let bary = [1.0 / 3.0; 3];
        assert!(close(&project_mset_pocs(&bary, &spec, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap(), &bary, 1e-15));

        let v = [0.4, 0.1, 0.3];
        assert_eq!(project_mset_pocs(&v, &spec, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap(), project_simplex(&v));

        let spec = MSetSpec::new(2, 0.5).unwrap();
        let x = project_mset_pocs(&[1.0, 0.0], &spec, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(spec.contains(&x, DEFAULT_TOL), "{x:?}");
    }

    #[test]
    fn projections_report_non_convergence() {
        let spec = MSetSpec::new(5, 0.2).unwrap();
        let err = project_mset_dykstra(&[3.0, -1.0, 0.5, 0.0, 0.2], &spec, 1e-15, 1).unwrap_err();
        match err {
            Error::NotConverged { method, last, .. } => {
                assert_eq!(method, "dykstra");
                assert_eq!(last.len(), 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn volume_formulas() {
        assert!((volume_simplex(2).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert!((ratio_l1(3).unwrap() - 0.25).abs() < 1e-15);
        assert!((ratio_mset(3, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        for p in 2..30 {
            assert!((ratio_mset(p, 1.0).unwrap() - 1.0).abs() < 1e-15);
        }
        // the l1 incircle is the M-set whose radius is 1/(p-1)
        assert!((ratio_mset(3, 0.25).unwrap() - ratio_l1(3).unwrap()).abs() < 1e-15);
        // p = 2: the inscribed ball of a segment is the whole segment
        assert!((ratio_l2(2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_cut_rejected() {
        let err = ratio_mset(3, 0.1).unwrap_err();
        assert!(err.to_string().contains("overlapping corner cut"));
        assert!(ratio_mset(3, mset_tau_min(3)).is_ok());
    }
}
