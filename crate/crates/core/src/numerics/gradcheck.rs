//! Central finite-difference gradient checking.
//!
//! Only forward values are used, so the check is independent of every
//! backward kernel it validates.

use super::tensor::Tensor;
use crate::error::Result;

/// Default perturbation for fp64 central differences.
pub const STEP: f64 = 1e-5;

/// Magnitude below which a gradient component is compared absolutely
/// rather than relatively.
pub const REL_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, REL_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Numerical gradient of `f` at every component of every input tensor.
pub fn numerical_gradient<F>(inputs: &[Tensor], step: f64, mut f: F) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    let mut work = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for t in 0..work.len() {
        let mut g = Vec::with_capacity(work[t].numel());
        for i in 0..work[t].numel() {
            let orig = work[t].data()[i];
            work[t].data_mut()[i] = orig + step;
            let plus = f(&work)?;
            work[t].data_mut()[i] = orig - step;
            let minus = f(&work)?;
            work[t].data_mut()[i] = orig;
            g.push((plus - minus) / (2.0 * step));
        }
        out.push(g);
    }
    Ok(out)
}

/// Largest [`relative_error`] between analytic and numerical gradients.
pub fn max_relative_error(analytic: &[Vec<f64>], numeric: &[Vec<f64>]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.iter().zip(n).map(|(&x, &y)| relative_error(x, y)))
        .fold(0.0, f64::max)
}
