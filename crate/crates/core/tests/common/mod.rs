//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use mexico_core::mexico::objective;
use ndarray::Array2;
use rand::Rng;

/// Exact Euclidean projection onto `{x : sum x = 1, 0 <= x <= upper}` by
/// enumerating all 3^p active sets (each coordinate at 0, at `upper`, or
/// free). For a fixed active set the free coordinates solve an
/// equality-constrained least-squares problem in closed form; the nearest
/// feasible candidate over all active sets is the projection.
pub fn qp_project(v: &[f64], upper: f64) -> Vec<f64> {
    let p = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut state = vec![0u8; p];
    loop {
        if let Some(x) = candidate(v, upper, &state) {
            let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
        // next state in base 3
        let mut i = 0;
        while i < p && state[i] == 2 {
            state[i] = 0;
            i += 1;
        }
        if i == p {
            break;
        }
        state[i] += 1;
    }
    best.expect("the feasible set is non-empty").1
}

fn candidate(v: &[f64], upper: f64, state: &[u8]) -> Option<Vec<f64>> {
    const TOL: f64 = 1e-12;
    let n_up = state.iter().filter(|&&s| s == 1).count();
    if n_up > 0 && !upper.is_finite() {
        return None;
    }
    let free: Vec<usize> = (0..v.len()).filter(|&i| state[i] == 2).collect();
    let fixed_mass = n_up as f64 * if n_up > 0 { upper } else { 0.0 };
    let mut x = vec![0.0; v.len()];
    for (i, s) in state.iter().enumerate() {
        if *s == 1 {
            x[i] = upper;
        }
    }
    if free.is_empty() {
        return ((fixed_mass - 1.0).abs() <= TOL).then_some(x);
    }
    let theta = (free.iter().map(|&i| v[i]).sum::<f64>() + fixed_mass - 1.0) / free.len() as f64;
    for &i in &free {
        let xi = v[i] - theta;
        if xi < -TOL || xi > upper + TOL {
            return None;
        }
        x[i] = xi;
    }
    Some(x)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

/// Central differences of the objective with respect to every entry of `W` and `Z`.
pub fn finite_difference_gradients(
    x: &Array2<f64>,
    w: &Array2<f64>,
    z: &Array2<f64>,
    lambda: f64,
    h: f64,
) -> (Array2<f64>, Array2<f64>) {
    let f = |w: &Array2<f64>, z: &Array2<f64>| objective(x.view(), w.view(), z.view(), lambda).unwrap();
    let mut gw = Array2::zeros(w.dim());
    for idx in ndarray::indices(w.dim()) {
        let mut plus = w.clone();
        let mut minus = w.clone();
        plus[idx] += h;
        minus[idx] -= h;
        gw[idx] = (f(&plus, z) - f(&minus, z)) / (2.0 * h);
    }
    let mut gz = Array2::zeros(z.dim());
    for idx in ndarray::indices(z.dim()) {
        let mut plus = z.clone();
        let mut minus = z.clone();
        plus[idx] += h;
        minus[idx] -= h;
        gz[idx] = (f(w, &plus) - f(w, &minus)) / (2.0 * h);
    }
    (gw, gz)
}

/// Largest `|a - b| / max(|b|, 1)` over entries.
pub fn max_relative_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs() / y.abs().max(1.0)))
}

/// Uniform point of the simplex: normalized exponentials (Dirichlet(1, ..., 1)).
pub fn uniform_simplex<R: Rng>(rng: &mut R, p: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..p).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Fraction of `draws` uniform simplex points accepted by `inside`.
pub fn rejection_ratio<R: Rng>(rng: &mut R, p: usize, draws: usize, inside: impl Fn(&[f64]) -> bool) -> f64 {
    let mut hits = 0usize;
    for _ in 0..draws {
        if inside(&uniform_simplex(rng, p)) {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

/// Column-stochastic matrix with uniform Dirichlet columns.
pub fn random_stochastic<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let mut a = Array2::zeros((rows, cols));
    for j in 0..cols {
        let c = uniform_simplex(rng, rows);
        for i in 0..rows {
            a[[i, j]] = c[i];
        }
    }
    a
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous c.d.f.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the KS distance, `1.628 / sqrt(n_eff)`.
pub fn ks_critical_1pct(n_eff: f64) -> f64 {
    1.628 / n_eff.sqrt()
}

pub fn unit_frechet_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Extremal coefficient read off the c.d.f. of the pairwise maximum:
/// `P(max <= z) = exp(-theta / z)` for a max-stable pair with unit Fréchet
/// margins, so `theta = -z log F_max(z)`; averaged over a few levels.
pub fn extremal_coefficient_from_cdf(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let levels = [0.5, 1.0, 2.0, 4.0];
    let total: f64 = levels
        .iter()
        .map(|&z| {
            let below = x.iter().zip(y).filter(|(a, b)| a.max(**b) <= z).count() as f64;
            -z * (below / n).ln()
        })
        .sum();
    total / levels.len() as f64
}

/// `#{x > t, y > t} / #{x > t}`.
pub fn joint_exceedance_ratio(x: &[f64], y: &[f64], t: f64) -> f64 {
    let single = x.iter().filter(|&&a| a > t).count() as f64;
    let joint = x.iter().zip(y).filter(|(a, b)| **a > t && **b > t).count() as f64;
    joint / single
}
