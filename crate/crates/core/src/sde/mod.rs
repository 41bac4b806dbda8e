//! SDEs with additive noise on an open domain `D`,
//!
//! ```text
//! dX_t = b(X_t) dt + β dW_t,   X_0 = x0 ∈ D,
//! ```
//!
//! where the drift `b` is only defined on `D` and a Lyapunov function `V`
//! blows up on `∂D` while controlling the local Lipschitz constant of `b`.
//! The tamed Euler scheme switches the drift off whenever the state leaves
//! `D` or `V`/`|b|` exceed `√n`.

mod models;
mod noise;
mod scheme;
mod taming;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub use models::{FnModel, LinearDrift, PolynomialDrift};
pub use noise::{coarsen_noise, NoisePath, NoiseSource};
pub use scheme::{euler_step, euler_step_in_place, simulate_path, simulate_with, PathSummary, TrajectoryRecord};
pub use taming::{tamed_drift, tamed_drift_into, Precondition, TamingPolicy};

/// Which of the two Lyapunov functions a routine should use: `V`, which
/// controls the Lipschitz constant of `b`, or `V̂`, which controls the
/// second-order remainder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LyapunovKind {
    Primary,
    Hat,
}

/// Value, gradient and Laplacian of a Lyapunov function at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovDerivatives {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub laplacian: f64,
}

/// Coefficients of an SDE on an open domain.
///
/// `drift`, `lyapunov` and `lyapunov_hat` are only ever called at points
/// where `in_domain` holds.
pub trait SdeModel: Send + Sync {
    fn dimension(&self) -> usize;

    fn in_domain(&self, x: &[f64]) -> bool;

    fn drift(&self, x: &[f64], out: &mut [f64]);

    fn lyapunov(&self, x: &[f64]) -> f64;

    fn lyapunov_hat(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Writes `b(x)` into `drift` and returns `V(x)`. Models whose drift and
    /// Lyapunov function share work override this; the stepping kernel calls
    /// it once per step.
    fn lyapunov_and_drift(&self, x: &[f64], drift: &mut [f64]) -> f64 {
        self.drift(x, drift);
        self.lyapunov(x)
    }

    /// Row-major `d × d` Jacobian of the drift, when known in closed form.
    fn drift_jacobian(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn lyapunov_derivatives(&self, _kind: LyapunovKind, _x: &[f64]) -> Option<LyapunovDerivatives> {
        None
    }

    fn name(&self) -> String {
        "custom".to_string()
    }
}

/// An SDE problem: coefficients, noise intensity `β`, initial state and
/// horizon `T`. Cheap to clone and shareable across worker threads.
#[derive(Clone)]
pub struct SdeProblem {
    model: Arc<dyn SdeModel>,
    noise_intensity: f64,
    initial_state: Vec<f64>,
    horizon: f64,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("model", &self.model.name())
            .field("dimension", &self.model.dimension())
            .field("noise_intensity", &self.noise_intensity)
            .field("initial_state", &self.initial_state)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl SdeProblem {
    pub fn new(
        model: Arc<dyn SdeModel>,
        noise_intensity: f64,
        initial_state: Vec<f64>,
        horizon: f64,
    ) -> Result<Self> {
        if !(noise_intensity > 0.0 && noise_intensity.is_finite()) {
            return Err(Error::usage(format!(
                "noise intensity must be positive and finite, got {noise_intensity}"
            )));
        }
        Self::build(model, noise_intensity, initial_state, horizon)
    }

    /// A problem with `β = 0`. Only meant for deterministic testing of the
    /// stepping kernel.
    pub fn noiseless(model: Arc<dyn SdeModel>, initial_state: Vec<f64>, horizon: f64) -> Result<Self> {
        Self::build(model, 0.0, initial_state, horizon)
    }

    fn build(
        model: Arc<dyn SdeModel>,
        noise_intensity: f64,
        initial_state: Vec<f64>,
        horizon: f64,
    ) -> Result<Self> {
        let d = model.dimension();
        if d == 0 {
            return Err(Error::usage("dimension must be positive"));
        }
        if initial_state.len() != d {
            return Err(Error::usage(format!(
                "initial state has {} components, model dimension is {d}",
                initial_state.len()
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::usage(format!("horizon must be positive and finite, got {horizon}")));
        }
        if !model.in_domain(&initial_state) {
            return Err(Error::usage(format!("initial state {initial_state:?} lies outside the domain")));
        }
        let v0 = model.lyapunov(&initial_state);
        if !(v0.is_finite() && v0 >= 0.0) {
            return Err(Error::usage(format!(
                "Lyapunov function at the initial state must be finite and nonnegative, got {v0}"
            )));
        }
        Ok(SdeProblem { model, noise_intensity, initial_state, horizon })
    }

    pub fn model(&self) -> &dyn SdeModel {
        self.model.as_ref()
    }

    pub fn model_arc(&self) -> Arc<dyn SdeModel> {
        Arc::clone(&self.model)
    }

    pub fn dimension(&self) -> usize {
        self.model.dimension()
    }

    pub fn noise_intensity(&self) -> f64 {
        self.noise_intensity
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Same problem over a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::build(Arc::clone(&self.model), self.noise_intensity, self.initial_state.clone(), horizon)
    }

    /// Number of grid steps `m = round(n·T)` used at step count `n`.
    pub fn grid_steps(&self, step_count: u64) -> usize {
        (step_count as f64 * self.horizon).round() as usize
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dimension() && self.model.in_domain(x)
    }

    fn require_in_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::usage(format!(
                "point has {} components, problem dimension is {}",
                x.len(),
                self.dimension()
            )));
        }
        if !self.model.in_domain(x) {
            return Err(Error::usage(format!("point {x:?} lies outside the domain")));
        }
        Ok(())
    }

    /// `b(x)` for an in-domain point.
    pub fn drift_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_in_domain(x)?;
        let mut out = vec![0.0; x.len()];
        self.model.drift(x, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { quantity: "drift", context: format!("{x:?}") });
        }
        Ok(out)
    }

    /// `V(x)` for an in-domain point.
    pub fn lyapunov_at(&self, x: &[f64]) -> Result<f64> {
        self.require_in_domain(x)?;
        let v = self.model.lyapunov(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { quantity: "Lyapunov function", context: format!("{x:?}") });
        }
        Ok(v)
    }

    /// `V̂(x)` for an in-domain point, or `None` if the problem has none.
    pub fn lyapunov_hat_at(&self, x: &[f64]) -> Result<Option<f64>> {
        self.require_in_domain(x)?;
        match self.model.lyapunov_hat(x) {
            Some(v) if !v.is_finite() => {
                Err(Error::NonFinite { quantity: "second Lyapunov function", context: format!("{x:?}") })
            }
            other => Ok(other),
        }
    }

    pub(crate) fn lyapunov_of_kind(&self, kind: LyapunovKind, x: &[f64]) -> Result<f64> {
        match kind {
            LyapunovKind::Primary => self.lyapunov_at(x),
            LyapunovKind::Hat => self
                .lyapunov_hat_at(x)?
                .ok_or_else(|| Error::usage("problem does not define a second Lyapunov function")),
        }
    }
}

pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}
