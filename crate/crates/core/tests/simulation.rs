//! Fidelity of the max-stable simulators, measured with estimators that do
//! not share code with the library.

mod common;

use common::*;
use mexico_core::sim::{extremal_coefficient, sample_asym_logistic, sample_logistic, AsymLogisticSpec, LogisticSpec, Subset};
use mexico_core::inference::empirical_tail_mass_l1;
use mexico_core::tail::{angular_normalize, rank_standardize, select_top_k};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

fn column(data: &mexico_core::DataMatrix, j: usize) -> Vec<f64> {
    data.values().column(j).to_vec()
}

/// Every logistic margin is unit Fréchet, whatever the dependence.
#[test]
fn logistic_margins_are_unit_frechet() {
    let n = 10_000;
    for (seed, delta) in [(1, 0.1), (2, 0.5), (3, 0.9), (4, 1.0)] {
        let data = sample_logistic(&LogisticSpec { p: 3, delta, n, seed }).unwrap();
        for j in 0..3 {
            let d = ks_one_sample(&column(&data, j), unit_frechet_cdf);
            assert!(d < ks_critical_1pct(n as f64), "delta {delta}, margin {j}: KS distance {d}");
        }
    }
}

/// Same check through a two-sample test against direct `1/E` draws.
#[test]
fn logistic_margins_match_reference_draws() {
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let reference: Vec<f64> = (0..n).map(|_| { let e: f64 = Exp1.sample(&mut rng); 1.0 / e }).collect();
    let data = sample_logistic(&LogisticSpec { p: 2, delta: 0.3, n, seed: 5 }).unwrap();
    let d = ks_two_sample(&column(&data, 0), &reference);
    assert!(d < ks_critical_1pct(n as f64 / 2.0), "KS distance {d}");
}

/// The pairwise extremal coefficient of the logistic model is `2^delta`.
#[test]
fn extremal_coefficient_is_two_to_the_delta() {
    for (seed, delta) in [(11, 0.1), (12, 0.5), (13, 0.9)] {
        let data = sample_logistic(&LogisticSpec { p: 2, delta, n: 20_000, seed }).unwrap();
        let (x, y) = (column(&data, 0), column(&data, 1));
        let expected = 2f64.powf(delta);
        let lib = extremal_coefficient(data.values().column(0), data.values().column(1)).unwrap();
        let oracle = extremal_coefficient_from_cdf(&x, &y);
        assert!((lib - expected).abs() < 0.05, "delta {delta}: library estimate {lib} vs {expected}");
        assert!((oracle - expected).abs() < 0.05, "delta {delta}: c.d.f. estimate {oracle} vs {expected}");
    }
}

/// `P(X2 > t | X1 > t) -> 2 - 2^delta`.
#[test]
fn bivariate_tail_dependence() {
    let n = 400_000;
    for (seed, delta) in [(21, 0.2), (22, 0.5), (23, 0.8)] {
        let data = sample_logistic(&LogisticSpec { p: 2, delta, n, seed }).unwrap();
        let ratio = joint_exceedance_ratio(&column(&data, 0), &column(&data, 1), 200.0);
        let expected = 2.0 - 2f64.powf(delta);
        assert!((ratio - expected).abs() < 0.05, "delta {delta}: {ratio} vs {expected}");
    }
}

/// Strong dependence puts angular mass near the diagonal, weak dependence
/// near the axes.
#[test]
fn angular_mass_flips_with_dependence() {
    let fractions = |delta: f64| {
        let data = sample_logistic(&LogisticSpec { p: 2, delta, n: 50_000, seed: 31 }).unwrap();
        let ext = select_top_k(&rank_standardize(&data), 500).unwrap();
        let ang = angular_normalize(&ext).unwrap();
        let mins: Vec<f64> = ang.values().rows().into_iter().map(|r| r[0].min(r[1])).collect();
        let k = mins.len() as f64;
        let corner = mins.iter().filter(|&&m| m > 0.5).count() as f64 / k;
        let edge = mins.iter().filter(|&&m| m < 0.1).count() as f64 / k;
        (corner, edge)
    };
    let (corner_strong, edge_strong) = fractions(0.1);
    let (corner_weak, edge_weak) = fractions(0.9);
    assert!(corner_strong > 0.8 && edge_strong < 0.1, "delta 0.1: corner {corner_strong}, edge {edge_strong}");
    assert!(edge_weak > 0.5 && corner_weak < 0.2, "delta 0.9: corner {corner_weak}, edge {edge_weak}");
}

/// With unit margins the exponent measure of the l1 unit-ball complement
/// equals the dimension.
#[test]
fn l1_tail_mass_equals_dimension() {
    for (seed, delta) in [(41, 0.3), (42, 0.7)] {
        let data = sample_logistic(&LogisticSpec { p: 2, delta, n: 100_000, seed }).unwrap();
        let v = rank_standardize(&data);
        let mass = empirical_tail_mass_l1(v.values(), 1000).unwrap();
        assert!((mass - 2.0).abs() < 0.1, "delta {delta}: mass {mass}");
    }
}

/// Asymmetric components combine into unit Fréchet margins and feature pairs
/// from different components are asymptotically independent.
#[test]
fn asymmetric_logistic_margins_and_independence() {
    let spec = AsymLogisticSpec {
        p: 4,
        subsets: vec![
            Subset { features: vec![0, 1], alpha: 0.2, weights: vec![0.7, 0.7] },
            Subset { features: vec![2, 3], alpha: 0.2, weights: vec![0.7, 0.7] },
            Subset { features: vec![0, 1, 2, 3], alpha: 1.0, weights: vec![0.3; 4] },
        ],
        n: 200_000,
        seed: 51,
    };
    let data = sample_asym_logistic(&spec).unwrap();
    for j in 0..4 {
        let d = ks_one_sample(&column(&data, j), unit_frechet_cdf);
        assert!(d < ks_critical_1pct(spec.n as f64), "margin {j}: KS distance {d}");
    }
    let within = joint_exceedance_ratio(&column(&data, 0), &column(&data, 1), 100.0);
    let across = joint_exceedance_ratio(&column(&data, 0), &column(&data, 2), 100.0);
    // within a component the limit is 0.7 (2 - 2^0.2) ~ 0.596
    assert!((within - 0.7 * (2.0 - 2f64.powf(0.2))).abs() < 0.06, "within {within}");
    assert!(across < 0.05, "across {across}");
}
