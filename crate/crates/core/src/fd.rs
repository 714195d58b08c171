//! Central finite differences, used as a derivative fallback and as the
//! reference in gradient checks.

use nalgebra::{DMatrix, DVector};

/// Step for first derivatives: `1e-6 * (1 + ||x||_inf)`.
pub fn step(point: &DVector<f64>) -> f64 {
    1e-6 * (1.0 + point.amax())
}

/// Step for differentiating exact first derivatives a second time.
pub fn second_order_step(point: &DVector<f64>) -> f64 {
    1e-5 * (1.0 + point.amax())
}

/// Step for nested differences (a Jacobian of a difference quotient).
pub fn nested_step(point: &DVector<f64>) -> f64 {
    1e-4 * (1.0 + point.amax())
}

/// Forward-oriented Jacobian (`rows = outputs`) of `f` at `x`.
pub fn jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    jacobian_with_step(f, x, step(x))
}

pub fn jacobian_with_step(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let mut cols = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        cols.push((f(&xp) - f(&xm)) / (2.0 * h));
    }
    if cols.is_empty() {
        return DMatrix::zeros(f(x).len(), 0);
    }
    DMatrix::from_columns(&cols)
}

/// Gradient of a scalar function.
pub fn gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DVector<f64> {
    let h = step(x);
    DVector::from_fn(x.len(), |k, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

/// `||a - b|| / max(||b||, floor)`.
pub fn relative_error(a: &DVector<f64>, b: &DVector<f64>, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}
