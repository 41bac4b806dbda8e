//! Central finite differences with a domain guard: a stencil point outside
//! the domain halves the step, up to [`MAX_SHRINKS`] times.

use crate::error::{Error, Result};

pub const MAX_SHRINKS: usize = 12;

/// Runs `attempt` with steps `h, h/2, h/4, …` until it stops reporting a
/// stencil exit (`Ok(None)`).
fn with_shrinking_step<T>(h: f64, mut attempt: impl FnMut(f64) -> Result<Option<T>>) -> Result<T> {
    let mut step = h;
    for _ in 0..=MAX_SHRINKS {
        if let Some(v) = attempt(step)? {
            return Ok(v);
        }
        step /= 2.0;
    }
    Err(Error::usage(format!(
        "finite-difference stencil leaves the domain even after shrinking the step from {h:e} to {:e}",
        step * 2.0
    )))
}

/// Gradient and Laplacian of a scalar function by central differences.
/// `f` returns `None` outside the domain.
pub fn gradient_and_laplacian(f: impl Fn(&[f64]) -> Option<f64>, x: &[f64], h: f64) -> Result<(Vec<f64>, f64)> {
    let fx = f(x).ok_or_else(|| Error::usage("finite-difference centre lies outside the domain"))?;
    with_shrinking_step(h, |h| {
        let mut y = x.to_vec();
        let mut grad = Vec::with_capacity(x.len());
        let mut lap = 0.0;
        for k in 0..x.len() {
            y[k] = x[k] + h;
            let Some(fp) = f(&y) else { return Ok(None) };
            y[k] = x[k] - h;
            let Some(fm) = f(&y) else { return Ok(None) };
            y[k] = x[k];
            grad.push((fp - fm) / (2.0 * h));
            lap += (fp - 2.0 * fx + fm) / (h * h);
        }
        Ok(Some((grad, lap)))
    })
}

/// Row-major Jacobian of a vector field by central differences.
pub fn jacobian(f: impl Fn(&[f64]) -> Option<Vec<f64>>, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let d = x.len();
    with_shrinking_step(h, |h| {
        let mut y = x.to_vec();
        let mut jac = vec![0.0; d * d];
        for k in 0..d {
            y[k] = x[k] + h;
            let Some(fp) = f(&y) else { return Ok(None) };
            y[k] = x[k] - h;
            let Some(fm) = f(&y) else { return Ok(None) };
            y[k] = x[k];
            for i in 0..d {
                jac[i * d + k] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(Some(jac))
    })
}

/// `‖a − b‖ / ‖a‖` (absolute error when `a = 0`).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    let norm = a.iter().map(|u| u * u).sum::<f64>().sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}
