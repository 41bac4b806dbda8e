use crate::error::{Error, Result};
use crate::sde::{euclidean_norm, SdeProblem};

/// Step count `n` of the scheme (grid spacing `1/n`) and the taming
/// threshold `√n` shared by the Lyapunov and drift indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TamingPolicy {
    step_count: u64,
    threshold: f64,
}

/// Step-count requirements under which the convergence rates are proven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precondition {
    /// `n ≥ V(x0)²`, rate 1/2.
    RateHalf,
    /// `n ≥ V(x0)³`, rate 1.
    RateOne,
    /// `n ≥ max{V(x0)², V̂(x0)², |b(x0)|²}`, the particle-system variant.
    Particles,
}

impl TamingPolicy {
    pub fn new(step_count: u64) -> Result<Self> {
        if step_count == 0 {
            return Err(Error::usage("step count must be positive"));
        }
        Ok(TamingPolicy { step_count, threshold: (step_count as f64).sqrt() })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn step_size(&self) -> f64 {
        1.0 / self.step_count as f64
    }

    /// Smallest step count satisfying `precondition` at the initial state.
    pub fn required_step_count(problem: &SdeProblem, precondition: Precondition) -> Result<u64> {
        let x0 = problem.initial_state();
        let v = problem.lyapunov_at(x0)?;
        let needed = match precondition {
            Precondition::RateHalf => v.powi(2),
            Precondition::RateOne => v.powi(3),
            Precondition::Particles => {
                let v_hat = problem.lyapunov_hat_at(x0)?.unwrap_or(0.0);
                let b = euclidean_norm(&problem.drift_at(x0)?);
                v.powi(2).max(v_hat.powi(2)).max(b.powi(2))
            }
        };
        Ok(needed.ceil().max(1.0) as u64)
    }

    /// `None` when the step count meets `precondition`, otherwise a message
    /// describing the violation.
    pub fn precondition_violation(&self, problem: &SdeProblem, precondition: Precondition) -> Result<Option<String>> {
        let required = Self::required_step_count(problem, precondition)?;
        if self.step_count >= required {
            Ok(None)
        } else {
            Ok(Some(format!(
                "theorem precondition violated: n = {} is below the required {} ({precondition:?})",
                self.step_count, required
            )))
        }
    }
}

/// Evaluates the tamed drift
///
/// ```text
/// b_n(x) = b(x) · 1{x ∈ D} · 1{V(x) ≤ √n} · 1{|b(x)| ≤ √n}
/// ```
///
/// into `out` and returns `true` when an indicator zeroed the drift.
///
/// The domain test runs first, so `V` and `b` are never evaluated outside
/// `D`. When `V(x) > √n` the drift value is discarded without inspection.
pub fn tamed_drift_into(problem: &SdeProblem, policy: &TamingPolicy, x: &[f64], out: &mut [f64]) -> Result<bool> {
    let d = problem.dimension();
    if x.len() != d || out.len() != d {
        return Err(Error::usage(format!(
            "tamed drift expects vectors of dimension {d}, got {} and {}",
            x.len(),
            out.len()
        )));
    }
    let model = problem.model();
    if !model.in_domain(x) {
        out.fill(0.0);
        return Ok(true);
    }
    let v = model.lyapunov_and_drift(x, out);
    if !v.is_finite() {
        return Err(Error::NonFinite { quantity: "Lyapunov function", context: format!("{x:?}") });
    }
    if v > policy.threshold {
        out.fill(0.0);
        return Ok(true);
    }
    let mut norm_sq = 0.0;
    for c in out.iter() {
        if !c.is_finite() {
            return Err(Error::NonFinite { quantity: "drift", context: format!("{x:?}") });
        }
        norm_sq += c * c;
    }
    if norm_sq.sqrt() > policy.threshold {
        out.fill(0.0);
        return Ok(true);
    }
    Ok(false)
}

/// Allocating form of [`tamed_drift_into`].
pub fn tamed_drift(problem: &SdeProblem, policy: &TamingPolicy, x: &[f64]) -> Result<(Vec<f64>, bool)> {
    let mut out = vec![0.0; problem.dimension()];
    let tamed = tamed_drift_into(problem, policy, x, &mut out)?;
    Ok((out, tamed))
}
