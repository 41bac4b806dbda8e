use serde::Serialize;

use super::stats::{mean_and_stderr, CompensatedSum};
use super::{reduce_paths, ExperimentPlan};
use crate::error::{Error, Result};
use crate::sde::{simulate_with, NoiseSource, SdeProblem, TamingPolicy};

/// Monte Carlo moments of the scheme on its grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTrace {
    pub step_count: u64,
    pub times: Vec<f64>,
    /// `E|X_t|^p`.
    pub raw_moment: Vec<f64>,
    pub raw_moment_stderr: Vec<f64>,
    /// `E V(X_{t∧τ})^p`, `τ` the first taming time.
    pub stopped_lyapunov_moment: Vec<f64>,
    pub stopped_lyapunov_stderr: Vec<f64>,
    /// `P(τ ≤ t)`.
    pub taming_probability: Vec<f64>,
    pub quarantined_paths: u64,
}

struct TraceSums {
    raw: Vec<CompensatedSum>,
    raw_sq: Vec<CompensatedSum>,
    lyap: Vec<CompensatedSum>,
    lyap_sq: Vec<CompensatedSum>,
    /// Paths whose first taming happened at each grid index.
    first_tamed: Vec<u64>,
    paths: u64,
}

impl TraceSums {
    fn new(len: usize) -> Self {
        let zero = vec![CompensatedSum::default(); len];
        TraceSums {
            raw: zero.clone(),
            raw_sq: zero.clone(),
            lyap: zero.clone(),
            lyap_sq: zero,
            first_tamed: vec![0; len],
            paths: 0,
        }
    }

    fn merge(&mut self, other: TraceSums) {
        for (a, b) in [
            (&mut self.raw, &other.raw),
            (&mut self.raw_sq, &other.raw_sq),
            (&mut self.lyap, &other.lyap),
            (&mut self.lyap_sq, &other.lyap_sq),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
        }
        self.first_tamed.iter_mut().zip(&other.first_tamed).for_each(|(a, b)| *a += b);
        self.paths += other.paths;
    }
}

/// Traces `E|X_t|^p`, the stopped moment `E V(X_{t∧τ})^p` and `P(τ ≤ t)`
/// for the scheme with `step_count` steps per unit time, using the path
/// count, exponent and seed of `plan`.
///
/// When the state at the taming time has left the domain, `V` is frozen at
/// the last grid point before it.
pub fn moment_trace(problem: &SdeProblem, plan: &ExperimentPlan, step_count: u64) -> Result<MomentTrace> {
    if plan.path_count == 0 {
        return Err(Error::usage("plan.path_count must be positive"));
    }
    if !(plan.error_exponent > 0.0) {
        return Err(Error::usage("plan.error_exponent must be positive"));
    }
    let policy = TamingPolicy::new(step_count)?;
    let steps = problem.grid_steps(step_count);
    let d = problem.dimension();
    let p = plan.error_exponent;
    let source = NoiseSource::new(plan.base_seed);
    let (sums, quarantined) = reduce_paths(
        plan.path_count,
        || TraceSums::new(steps + 1),
        |acc, path| {
            let noise = source.path(path, step_count, steps, d);
            let mut raw = vec![0.0; steps + 1];
            let mut lyap = vec![0.0; steps + 1];
            let mut stopped: Option<f64> = None;
            let mut last_v = 0.0;
            let mut failure = None;
            let summary = simulate_with(problem, &policy, &noise, |k, x, tamed| {
                raw[k] = x.iter().map(|v| v * v).sum::<f64>().powf(p / 2.0);
                let v = match stopped {
                    Some(v) => v,
                    None if tamed => {
                        let v = if problem.in_domain(x) {
                            match problem.lyapunov_at(x) {
                                Ok(v) => v,
                                Err(e) => {
                                    failure.get_or_insert(e);
                                    last_v
                                }
                            }
                        } else {
                            last_v
                        };
                        stopped = Some(v);
                        v
                    }
                    None => match problem.lyapunov_at(x) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    },
                };
                last_v = v;
                lyap[k] = v.powf(p);
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            if raw.iter().chain(&lyap).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { quantity: "moment", context: format!("path {path}") });
            }
            for k in 0..=steps {
                acc.raw[k].add(raw[k]);
                acc.raw_sq[k].add(raw[k] * raw[k]);
                acc.lyap[k].add(lyap[k]);
                acc.lyap_sq[k].add(lyap[k] * lyap[k]);
            }
            if let Some(k) = summary.first_taming_step {
                acc.first_tamed[k] += 1;
            }
            acc.paths += 1;
            Ok(())
        },
        TraceSums::merge,
    )?;
    let stats = |s: &[CompensatedSum], sq: &[CompensatedSum]| -> (Vec<f64>, Vec<f64>) {
        s.iter().zip(sq).map(|(a, b)| mean_and_stderr(a.value(), b.value(), sums.paths)).unzip()
    };
    let (raw_moment, raw_moment_stderr) = stats(&sums.raw, &sums.raw_sq);
    let (stopped_lyapunov_moment, stopped_lyapunov_stderr) = stats(&sums.lyap, &sums.lyap_sq);
    let mut cumulative = 0;
    let taming_probability = sums
        .first_tamed
        .iter()
        .map(|&c| {
            cumulative += c;
            cumulative as f64 / sums.paths as f64
        })
        .collect();
    Ok(MomentTrace {
        step_count,
        times: (0..=steps).map(|k| k as f64 / step_count as f64).collect(),
        raw_moment,
        raw_moment_stderr,
        stopped_lyapunov_moment,
        stopped_lyapunov_stderr,
        taming_probability,
        quarantined_paths: quarantined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::FnModel;
    use std::sync::Arc;

    fn plan(paths: u64) -> ExperimentPlan {
        ExperimentPlan { path_count: paths, base_seed: 11, ..ExperimentPlan::default() }
    }

    #[test]
    fn brownian_moments_match_closed_form() {
        let m = FnModel::new(1, |_x, out| out[0] = 0.0, |x| 1.0 + x[0] * x[0]);
        let p = SdeProblem::new(Arc::new(m), 1.0, vec![0.0], 1.0).unwrap();
        let tr = moment_trace(&p, &plan(4000), 1024).unwrap();
        assert_eq!(tr.times.len(), 1025);
        for k in [256, 512, 1024] {
            let t = tr.times[k];
            // E W_t² = t and E (1 + W_t²)² = 1 + 2t + 3t²
            assert!((tr.raw_moment[k] - t).abs() < 3.0 * tr.raw_moment_stderr[k], "t={t}");
            let v2 = 1.0 + 2.0 * t + 3.0 * t * t;
            assert!((tr.stopped_lyapunov_moment[k] - v2).abs() < 3.0 * tr.stopped_lyapunov_stderr[k], "t={t}");
        }
        assert!(tr.taming_probability.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn unreachable_threshold_never_tames() {
        let m = FnModel::new(1, |x, out| out[0] = -x[0].tanh(), |_x| 1.0);
        let p = SdeProblem::new(Arc::new(m), 1.0, vec![0.5], 1.0).unwrap();
        let tr = moment_trace(&p, &plan(500), 64).unwrap();
        assert!(tr.taming_probability.iter().all(|&q| q == 0.0));
        assert!(tr.stopped_lyapunov_moment.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn stopped_moment_freezes_after_taming() {
        // V grows past √n = 4 once |x| > √15; the stopped moment cannot exceed
        // what is reached at the first taming time.
        let m = FnModel::new(1, |_x, out| out[0] = 0.0, |x| 1.0 + x[0] * x[0]);
        let p = SdeProblem::new(Arc::new(m), 3.0, vec![0.0], 1.0).unwrap();
        let tr = moment_trace(&p, &plan(500), 16).unwrap();
        let last = *tr.taming_probability.last().unwrap();
        assert!(last > 0.1 && last < 1.0, "{last}");
        assert!(tr.raw_moment.iter().all(|v| v.is_finite()));
    }
}
