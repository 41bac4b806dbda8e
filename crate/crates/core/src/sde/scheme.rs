use serde::Serialize;

use crate::error::{Error, Result};
use crate::sde::{tamed_drift_into, NoisePath, SdeProblem, TamingPolicy};

/// `x + dt·drift + β·noise`.
pub fn euler_step(x: &[f64], drift: &[f64], dt: f64, noise: &[f64], beta: f64) -> Result<Vec<f64>> {
    if drift.len() != x.len() || noise.len() != x.len() {
        return Err(Error::usage(format!(
            "Euler step dimension mismatch: state {}, drift {}, noise {}",
            x.len(),
            drift.len(),
            noise.len()
        )));
    }
    let mut out = x.to_vec();
    euler_step_in_place(&mut out, drift, dt, noise, beta);
    Ok(out)
}

/// In-place [`euler_step`]; the slices must share one length.
#[inline]
pub fn euler_step_in_place(x: &mut [f64], drift: &[f64], dt: f64, noise: &[f64], beta: f64) {
    for ((xi, bi), wi) in x.iter_mut().zip(drift).zip(noise) {
        *xi = *xi + dt * bi + beta * wi;
    }
}

/// Grid values of one scheme path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `true` where the taming indicator zeroed the drift at that grid point.
    pub tamed_flags: Vec<bool>,
    /// Realized taming time `τ_n`: the first grid time with a taming event.
    pub first_taming_time: Option<f64>,
    pub seed: u64,
}

/// What [`simulate_with`] reports besides the visited states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathSummary {
    pub steps: usize,
    pub first_taming_step: Option<usize>,
    pub tamed_points: usize,
}

/// Runs the tamed scheme on the grid `{0, 1/n, …, m/n}`, `m = round(n·T)`,
/// calling `visit(k, X_k, tamed_k)` at every grid point.
///
/// The drift is evaluated at the left grid point. After a taming event the
/// path keeps going with whatever drift the indicators allow, so it may leave
/// the domain and move as a Brownian motion.
pub fn simulate_with<F>(problem: &SdeProblem, policy: &TamingPolicy, noise: &NoisePath, mut visit: F) -> Result<PathSummary>
where
    F: FnMut(usize, &[f64], bool),
{
    let d = problem.dimension();
    if noise.step_count() != policy.step_count() {
        return Err(Error::usage(format!(
            "noise step count {} differs from scheme step count {}",
            noise.step_count(),
            policy.step_count()
        )));
    }
    if noise.dimension() != d {
        return Err(Error::usage(format!("noise dimension {} differs from problem dimension {d}", noise.dimension())));
    }
    let steps = problem.grid_steps(policy.step_count());
    if noise.len() < steps {
        return Err(Error::usage(format!("noise covers {} steps, {steps} needed", noise.len())));
    }
    let dt = policy.step_size();
    let beta = problem.noise_intensity();
    let mut x = problem.initial_state().to_vec();
    let mut drift = vec![0.0; d];
    let mut first_taming_step = None;
    let mut tamed_points = 0;
    for k in 0..=steps {
        let tamed = tamed_drift_into(problem, policy, &x, &mut drift)?;
        if tamed {
            tamed_points += 1;
            first_taming_step.get_or_insert(k);
        }
        visit(k, &x, tamed);
        if k == steps {
            break;
        }
        euler_step_in_place(&mut x, &drift, dt, noise.increment(k), beta);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { quantity: "state", context: format!("step {}", k + 1) });
        }
    }
    Ok(PathSummary { steps, first_taming_step, tamed_points })
}

/// Full trajectory of the tamed scheme driven by `noise`.
pub fn simulate_path(problem: &SdeProblem, policy: &TamingPolicy, noise: &NoisePath) -> Result<TrajectoryRecord> {
    let steps = problem.grid_steps(policy.step_count());
    let mut states = Vec::with_capacity(steps + 1);
    let mut tamed_flags = Vec::with_capacity(steps + 1);
    let summary = simulate_with(problem, policy, noise, |_, x, tamed| {
        states.push(x.to_vec());
        tamed_flags.push(tamed);
    })?;
    let n = policy.step_count() as f64;
    Ok(TrajectoryRecord {
        times: (0..=steps).map(|k| k as f64 / n).collect(),
        states,
        tamed_flags,
        first_taming_time: summary.first_taming_step.map(|k| k as f64 / n),
        seed: noise.seed(),
    })
}
