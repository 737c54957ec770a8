//! Spherical k-means on extreme directions, the clustering baseline.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalKMeans {
    /// m×p matrix of unit-norm centroids.
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    /// `sum_i <u_i, c_{a(i)}>` after every assignment step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Rows rescaled to unit Euclidean norm.
pub fn unit_rows(points: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut out = points.to_owned();
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col });
        }
        let norm = row.dot(&row).sqrt();
        if !(norm > 0.0) {
            return Err(Error::ZeroNorm(i));
        }
        row.mapv_inplace(|v| v / norm);
    }
    Ok(out)
}

/// Nearest centroid by cosine similarity (lowest index on ties) and the similarity.
fn nearest(u: ArrayView1<'_, f64>, centroids: ArrayView2<'_, f64>) -> (usize, f64) {
    let sims = centroids.dot(&u);
    let mut best = (0, sims[0]);
    for (j, &s) in sims.iter().enumerate().skip(1) {
        if s > best.1 {
            best = (j, s);
        }
    }
    best
}

/// Assigns arbitrary positive rows to the given centroids.
pub fn assign_points(points: ArrayView2<'_, f64>, centroids: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    if points.ncols() != centroids.ncols() {
        return Err(Error::Shape(format!(
            "points have {} features, centroids {}",
            points.ncols(),
            centroids.ncols()
        )));
    }
    let u = unit_rows(points)?;
    Ok(u.rows().into_iter().map(|r| nearest(r, centroids).0).collect())
}

/// k-means++ seeding with the cosine distance `1 - <u, c>`.
fn seed_centroids(u: &Array2<f64>, m: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let k = u.nrows();
    let mut chosen = vec![rng.random_range(0..k)];
    let mut dist: Vec<f64> = u.rows().into_iter().map(|r| 1.0 - r.dot(&u.row(chosen[0]))).collect();
    while chosen.len() < m {
        let total: f64 = dist.iter().map(|d| d.max(0.0)).sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = k - 1;
            for (i, d) in dist.iter().enumerate() {
                target -= d.max(0.0);
                if target < 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // every point coincides with a centroid: pick any unused index
            let unused: Vec<usize> = (0..k).filter(|i| !chosen.contains(i)).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen.push(next);
        for (d, r) in dist.iter_mut().zip(u.rows()) {
            *d = d.min(1.0 - r.dot(&u.row(next)));
        }
    }
    u.select(Axis(0), &chosen)
}

/// Runs spherical k-means from k-means++ seeds.
pub fn spherical_kmeans(points: ArrayView2<'_, f64>, m: usize, max_iter: usize, seed: u64) -> Result<SphericalKMeans> {
    let u = unit_rows(points)?;
    if m == 0 {
        return invalid("m must be positive");
    }
    if u.nrows() < m {
        return invalid(format!("need at least m = {m} points, got {}", u.nrows()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = seed_centroids(&u, m, &mut rng);
    run(&u, init, max_iter)
}

/// Runs spherical k-means from given centroids (rows are renormalized).
pub fn spherical_kmeans_from(points: ArrayView2<'_, f64>, centroids: ArrayView2<'_, f64>, max_iter: usize) -> Result<SphericalKMeans> {
    let u = unit_rows(points)?;
    if centroids.ncols() != u.ncols() {
        return Err(Error::Shape("centroids and points differ in dimension".into()));
    }
    if u.nrows() < centroids.nrows() {
        return invalid("fewer points than centroids");
    }
    run(&u, unit_rows(centroids)?, max_iter)
}

fn run(u: &Array2<f64>, mut centroids: Array2<f64>, max_iter: usize) -> Result<SphericalKMeans> {
    if max_iter == 0 {
        return invalid("max_iter must be positive");
    }
    let m = centroids.nrows();
    let mut assignments: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let fits: Vec<(usize, f64)> = u.rows().into_iter().map(|r| nearest(r, centroids.view())).collect();
        let next: Vec<usize> = fits.iter().map(|f| f.0).collect();
        trace.push(fits.iter().map(|f| f.1).sum());
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        reseed_empty(&mut assignments, &fits, m);
        centroids = update_centroids(u, &assignments, &centroids);
    }
    Ok(SphericalKMeans { centroids, assignments, objective_trace: trace, converged })
}

/// Moves the worst-fitting point of a non-singleton cluster into each empty cluster.
fn reseed_empty(assignments: &mut [usize], fits: &[(usize, f64)], m: usize) {
    let mut sizes = vec![0usize; m];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    for j in 0..m {
        if sizes[j] > 0 {
            continue;
        }
        let worst = (0..assignments.len())
            .filter(|&i| sizes[assignments[i]] > 1)
            .min_by(|&a, &b| fits[a].1.total_cmp(&fits[b].1));
        if let Some(i) = worst {
            sizes[assignments[i]] -= 1;
            assignments[i] = j;
            sizes[j] = 1;
        }
    }
}

fn update_centroids(u: &Array2<f64>, assignments: &[usize], previous: &Array2<f64>) -> Array2<f64> {
    let mut sums = Array2::<f64>::zeros(previous.dim());
    for (row, &a) in u.rows().into_iter().zip(assignments) {
        let mut s = sums.row_mut(a);
        s += &row;
    }
    for (j, mut row) in sums.axis_iter_mut(Axis(0)).enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        } else {
            // antipodal members cancel out: keep the previous direction
            row.assign(&previous.row(j));
        }
    }
    sums
}

/// Normalized mean direction, the maximizer of `sum_i <u_i, c>` on the sphere.
pub fn mean_direction(points: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let u = unit_rows(points)?;
    let s = u.sum_axis(Axis(0));
    let norm = s.dot(&s).sqrt();
    if !(norm > 0.0) {
        return invalid("mean direction undefined for points summing to zero");
    }
    Ok(s / norm)
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::metrics::h_c_v;

    #[test]
    fn orthogonal_groups_are_separated() {
        let pts = array![
            [1.0, 0.2, 0.0, 0.0],
            [0.3, 1.0, 0.0, 0.0],
            [0.7, 0.7, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.1],
            [0.0, 0.0, 0.4, 1.0],
            [0.0, 0.0, 0.9, 0.8],
        ];
        for seed in 0..10 {
            let fit = spherical_kmeans(pts.view(), 2, 100, seed).unwrap();
            let (_, _, v) = h_c_v(&[0, 0, 0, 1, 1, 1], &fit.assignments).unwrap();
            assert_eq!(v, 1.0);
            assert!(fit.converged);
        }
    }

    #[test]
    fn single_cluster_is_mean_direction() {
        let pts = array![[1.0, 0.0, 0.5], [0.2, 1.0, 0.0], [0.5, 0.5, 0.5], [2.0, 1.0, 0.1]];
        let fit = spherical_kmeans(pts.view(), 1, 50, 3).unwrap();
        let expected = mean_direction(pts.view()).unwrap();
        for (a, b) in fit.centroids.row(0).iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_does_not_decrease_and_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = Array2::from_shape_fn((200, 5), |_| rng.random::<f64>() + 1e-3);
        let fit = spherical_kmeans(pts.view(), 4, 200, 5).unwrap();
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
        let again = spherical_kmeans_from(pts.view(), fit.centroids.view(), 10).unwrap();
        assert_eq!(again.assignments, fit.assignments);
        assert!(fit.converged && again.converged);
        // one pass to assign, one to confirm nothing moved
        assert_eq!(again.objective_trace.len(), 2);
        assert!((again.centroids.clone() - &fit.centroids).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn empty_clusters_are_reseeded() {
        // the second centroid attracts nothing at the start
        let pts = array![[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]];
        let init = array![[1.0, 1.0], [-1.0, -1.0]];
        let fit = spherical_kmeans_from(pts.view(), init.view(), 50).unwrap();
        let mut used = fit.assignments.clone();
        used.sort_unstable();
        used.dedup();
        assert_eq!(used, vec![0, 1]);
    }

    #[test]
    fn errors() {
        let pts = array![[1.0, 0.0]];
        assert!(spherical_kmeans(pts.view(), 2, 10, 0).is_err());
        assert!(matches!(unit_rows(array![[0.0, 0.0]].view()), Err(Error::ZeroNorm(0))));
    }
}
