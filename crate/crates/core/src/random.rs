use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Uniform draw on the probability simplex (Dirichlet with unit parameters).
pub fn dirichlet_uniform<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    let mut draw: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draw.iter().sum();
    for v in &mut draw {
        *v /= total;
    }
    draw
}
