//! Central finite-difference utilities for verifying gradients.
//!
//! These operate on plain closures over flat `f64` slices and deliberately
//! know nothing about the tape, so they stay an independent oracle for it.

/// Central-difference gradient of `f` at `point` with step `eps`.
pub fn finite_diff_grad<F>(mut f: F, point: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grads = Vec::with_capacity(point.len());
    let mut x = point.to_vec();
    for i in 0..point.len() {
        x[i] = point[i] + eps;
        let plus = f(&x);
        x[i] = point[i] - eps;
        let minus = f(&x);
        x[i] = point[i];
        grads.push((plus - minus) / (2.0 * eps));
    }
    grads
}

/// Relative L2 error between two gradient vectors:
/// `||a - b|| / max(||b||, floor)`.
pub fn rel_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(floor)
}
