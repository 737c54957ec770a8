//! The penalized bilinear objective and its partial gradients.
//!
//! Shapes: `x` is k×p (one extreme sample per row), `w` is p×m (one mixture
//! per column) and `z` is m×k (one responsibility vector per column).

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

fn check_shapes(x: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>, z: Option<ArrayView2<'_, f64>>) -> Result<()> {
    let (k, p) = x.dim();
    let (wp, m) = w.dim();
    if wp != p {
        return Err(Error::Shape(format!("X is {k}x{p} but W is {wp}x{m}")));
    }
    if let Some(z) = z {
        if z.dim() != (m, k) {
            return Err(Error::Shape(format!("Z is {:?}, expected {m}x{k}", z.dim())));
        }
    }
    if k == 0 {
        return Err(Error::Shape("X has no rows".into()));
    }
    Ok(())
}

/// `sum_{i<j} <W^i, W^j>`.
pub fn orthogonality_penalty(w: ArrayView2<'_, f64>) -> f64 {
    let m = w.ncols();
    let mut total = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            total += w.column(i).dot(&w.column(j));
        }
    }
    total
}

/// `Tr(XWZ)/k - lambda * sum_{i<j} <W^i, W^j>`.
///
/// The trace is accumulated from `XW` (k×m) without forming the k×k product.
pub fn objective(x: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>, lambda: f64) -> Result<f64> {
    check_shapes(x, w, Some(z))?;
    let k = x.nrows() as f64;
    let xw = x.dot(&w);
    let trace: f64 = xw.iter().zip(z.t().iter()).map(|(a, b)| a * b).sum();
    Ok(trace / k - lambda * orthogonality_penalty(w))
}

/// `(XW)^T / k`; independent of `Z` and `lambda`.
pub fn grad_z(x: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_shapes(x, w, None)?;
    let k = x.nrows() as f64;
    Ok(x.dot(&w).reversed_axes() / k)
}

/// Gradient of the orthogonality penalty: column `j` is `sum_{i != j} W^i`.
pub fn penalty_gradient(w: ArrayView2<'_, f64>) -> Array2<f64> {
    let m = w.ncols();
    let mut g = Array2::zeros(w.dim());
    // summed directly rather than as total - own column, which is not exact
    for j in 0..m {
        let mut col = g.column_mut(j);
        for i in (0..m).filter(|&i| i != j) {
            col += &w.column(i);
        }
    }
    g
}

/// `(ZX)^T / k - lambda * G` with `G^j = sum_{i != j} W^i`.
pub fn grad_w(x: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>, lambda: f64) -> Result<Array2<f64>> {
    check_shapes(x, w, Some(z))?;
    let k = x.nrows() as f64;
    let data = z.dot(&x).reversed_axes() / k;
    if lambda == 0.0 || w.ncols() == 1 {
        return Ok(data);
    }
    Ok(data - penalty_gradient(w) * lambda)
}
