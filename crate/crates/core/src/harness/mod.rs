//! Coupled Monte Carlo estimation of strong errors.
//!
//! Each path draws one fine noise path. The reference solution is the tamed
//! scheme on the fine grid; every coarse level runs on block sums of the
//! same increments, so coarse and reference paths are driven by the same
//! Brownian motion.
//!
//! Paths are processed in fixed-size chunks. Each chunk accumulates its
//! sums in path order with compensated summation and chunks are merged in
//! index order, so the result does not depend on the number of workers.

mod stats;
mod trace;

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::{coarsen_noise, simulate_with, NoisePath, NoiseSource, Precondition, SdeProblem, TamingPolicy};

pub use stats::{fit_rate, CompensatedSum, RateFit};
pub use trace::{moment_trace, MomentTrace};

/// Paths per reduction chunk. Part of the numerical contract: changing it
/// changes the low bits of every estimate.
pub const CHUNK_PATHS: usize = 64;

/// Fraction of quarantined paths above which an experiment fails.
pub const QUARANTINE_LIMIT: f64 = 0.01;

/// Maximum number of time points kept per path for the bootstrap.
const BOOTSTRAP_TIMES: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// `|X^n_T − X^ref_T|` only.
    Terminal,
    /// Max over coarse grid times of the per-time mean of `|X^n_t − X^ref_t|^p`.
    GridSup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Coarse paths run on block sums of the reference noise.
    Shared,
    /// The reference runs on an unrelated noise stream. Only useful as a
    /// baseline for the coupled estimator.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub coarse_step_counts: Vec<u64>,
    pub fine_step_count: u64,
    pub path_count: u64,
    pub error_exponent: f64,
    pub error_mode: ErrorMode,
    pub base_seed: u64,
    pub bootstrap_resamples: usize,
    /// Resolution at which Brownian increments are drawn before being
    /// summed down to the fine grid; defaults to `fine_step_count`. Two
    /// plans with the same value see the same Brownian paths.
    pub noise_step_count: Option<u64>,
    pub precondition: Option<Precondition>,
    pub coupling: Coupling,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            coarse_step_counts: vec![64, 128, 256, 512, 1024],
            fine_step_count: 1 << 14,
            path_count: 10_000,
            error_exponent: 2.0,
            error_mode: ErrorMode::GridSup,
            base_seed: 0,
            bootstrap_resamples: 200,
            noise_step_count: None,
            precondition: None,
            coupling: Coupling::Shared,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_step_counts.is_empty() {
            return Err(Error::usage("plan.coarse_step_counts must not be empty"));
        }
        for &n in self.coarse_step_counts.iter().chain([&self.fine_step_count]) {
            if !n.is_power_of_two() {
                return Err(Error::usage(format!("step count {n} is not a power of two")));
            }
        }
        let mut sorted = self.coarse_step_counts.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != self.coarse_step_counts {
            return Err(Error::usage("plan.coarse_step_counts must be strictly increasing"));
        }
        let max = *sorted.last().expect("nonempty");
        if self.fine_step_count < 16 * max {
            return Err(Error::usage(format!(
                "plan.fine_step_count = {} must be at least 16 times the largest coarse step count {max}",
                self.fine_step_count
            )));
        }
        if let Some(noise) = self.noise_step_count {
            if !noise.is_power_of_two() || noise < self.fine_step_count {
                return Err(Error::usage(format!(
                    "plan.noise_step_count = {noise} must be a power of two no smaller than plan.fine_step_count"
                )));
            }
        }
        if self.path_count == 0 {
            return Err(Error::usage("plan.path_count must be positive"));
        }
        if !(self.error_exponent >= 2.0 && self.error_exponent.is_finite()) {
            return Err(Error::usage(format!("plan.error_exponent must be at least 2, got {}", self.error_exponent)));
        }
        Ok(())
    }
}

/// Estimates for one coarse step count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelEstimate {
    pub step_count: u64,
    /// `ê_n = (mean |X^n − X^ref|^p)^{1/p}` in the chosen mode.
    pub error: f64,
    /// Delta-method standard error of `ê_n`.
    pub stderr: f64,
    /// Fraction of paths with `τ_n ≤ T`.
    pub taming_frequency: f64,
    /// Grid time at which the per-time mean is largest.
    pub worst_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub plan: ExperimentPlan,
    pub levels: Vec<LevelEstimate>,
    pub fitted_rate: Option<f64>,
    pub intercept: Option<f64>,
    /// Bootstrap 95% interval for the rate.
    pub rate_ci: Option<(f64, f64)>,
    pub fit_note: Option<String>,
    /// Fraction of reference paths with a taming event.
    pub reference_taming_frequency: f64,
    pub quarantined_paths: u64,
    pub precondition_warnings: Vec<String>,
    pub wall_time_seconds: f64,
}

impl ConvergenceReport {
    /// `n,error,stderr,taming_freq` rows in shortest round-trip notation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,error,stderr,taming_freq\n");
        for l in &self.levels {
            writeln!(out, "{},{},{},{}", l.step_count, l.error, l.stderr, l.taming_frequency).expect("string write");
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs `per_path` over `0..path_count` in chunks and merges the chunk
/// accumulators in order. Paths failing with a non-finite error are
/// quarantined; any other error aborts.
pub(crate) fn reduce_paths<A, I, P, M>(path_count: u64, init: I, per_path: P, merge: M) -> Result<(A, u64)>
where
    A: Send,
    I: Fn() -> A + Sync,
    P: Fn(&mut A, u64) -> Result<()> + Sync,
    M: Fn(&mut A, A),
{
    let chunks = path_count.div_ceil(CHUNK_PATHS as u64);
    let partial: Vec<Result<(A, u64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            let mut quarantined = 0;
            let end = ((c + 1) * CHUNK_PATHS as u64).min(path_count);
            for i in c * CHUNK_PATHS as u64..end {
                match per_path(&mut acc, i) {
                    Ok(()) => {}
                    Err(Error::NonFinite { quantity, context }) => {
                        log::warn!("quarantining path {i}: non-finite {quantity} ({context})");
                        quarantined += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok((acc, quarantined))
        })
        .collect();
    let mut total = init();
    let mut quarantined = 0;
    for r in partial {
        let (acc, q) = r?;
        merge(&mut total, acc);
        quarantined += q;
    }
    if quarantined as f64 > QUARANTINE_LIMIT * path_count as f64 {
        return Err(Error::Experiment(format!(
            "{quarantined} of {path_count} paths quarantined (limit {}%)",
            QUARANTINE_LIMIT * 100.0
        )));
    }
    Ok((total, quarantined))
}

fn norm_pow(a: &[f64], b: &[f64], p: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    if p == 2.0 {
        sq
    } else {
        sq.powf(p / 2.0)
    }
}

/// Per-level layout shared by the runners.
struct Layout {
    /// Grid steps of each coarse level.
    steps: Vec<usize>,
    /// Reference record stride per coarse level, in finest-coarse steps.
    strides: Vec<usize>,
    finest_steps: usize,
    /// Fine steps per finest-coarse step.
    record_every: usize,
    fine_steps: usize,
    /// Bootstrap time indices, on the coarsest grid.
    boot_times: Vec<usize>,
}

impl Layout {
    fn new(problem: &SdeProblem, plan: &ExperimentPlan) -> Result<Self> {
        let fine_steps = problem.grid_steps(plan.fine_step_count);
        let max = *plan.coarse_step_counts.last().expect("validated");
        let min = plan.coarse_step_counts[0];
        let steps: Vec<usize> = plan.coarse_step_counts.iter().map(|&n| problem.grid_steps(n)).collect();
        for (&n, &m) in plan.coarse_step_counts.iter().zip(&steps) {
            let factor = (plan.fine_step_count / n) as usize;
            if m == 0 || m * factor != fine_steps {
                return Err(Error::usage(format!(
                    "horizon {} does not put n = {n} and the fine grid on common points",
                    problem.horizon()
                )));
            }
        }
        let coarsest = steps[0];
        let boot_times = match plan.error_mode {
            ErrorMode::Terminal => vec![coarsest],
            ErrorMode::GridSup => {
                let mut t: Vec<usize> =
                    (0..BOOTSTRAP_TIMES).map(|j| (j * coarsest + (BOOTSTRAP_TIMES - 1) / 2) / (BOOTSTRAP_TIMES - 1)).collect();
                t.dedup();
                t
            }
        };
        Ok(Layout {
            strides: plan.coarse_step_counts.iter().map(|&n| (max / n) as usize).collect(),
            finest_steps: *steps.last().expect("nonempty"),
            record_every: (plan.fine_step_count / max) as usize,
            steps,
            fine_steps,
            boot_times: boot_times.into_iter().map(|k| k * (max / min) as usize).collect(),
        })
    }
}

struct Accumulator {
    /// Per level, per grid time: sum of `|Δ|^p` and of `|Δ|^{2p}`.
    sums: Vec<Vec<CompensatedSum>>,
    sums_sq: Vec<Vec<CompensatedSum>>,
    tamed: Vec<u64>,
    reference_tamed: u64,
    paths: u64,
    /// Per path, per level, per bootstrap time: `|Δ|^p`, in path order.
    boot: Vec<f64>,
}

impl Accumulator {
    fn new(layout: &Layout) -> Self {
        Accumulator {
            sums: layout.steps.iter().map(|&m| vec![CompensatedSum::default(); m + 1]).collect(),
            sums_sq: layout.steps.iter().map(|&m| vec![CompensatedSum::default(); m + 1]).collect(),
            tamed: vec![0; layout.steps.len()],
            reference_tamed: 0,
            paths: 0,
            boot: Vec::new(),
        }
    }

    fn merge(&mut self, other: Accumulator) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums).chain(self.sums_sq.iter_mut().zip(&other.sums_sq)) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
        for (a, b) in self.tamed.iter_mut().zip(&other.tamed) {
            *a += b;
        }
        self.reference_tamed += other.reference_tamed;
        self.paths += other.paths;
        self.boot.extend(other.boot);
    }
}

fn run_path(
    problem: &SdeProblem,
    plan: &ExperimentPlan,
    layout: &Layout,
    acc: &mut Accumulator,
    path: u64,
) -> Result<()> {
    let d = problem.dimension();
    let p = plan.error_exponent;
    let noise_count = plan.noise_step_count.unwrap_or(plan.fine_step_count);
    let draw = |seed: u64| -> Result<NoisePath> {
        let factor = noise_count / plan.fine_step_count;
        let raw = NoiseSource::new(seed).path(path, noise_count, layout.fine_steps * factor as usize, d);
        coarsen_noise(&raw, factor)
    };
    let fine_noise = draw(plan.base_seed)?;
    let reference_noise: NoisePath = match plan.coupling {
        Coupling::Shared => fine_noise.clone(),
        Coupling::Independent => draw(plan.base_seed ^ 0x5EED_0F1D_u64.rotate_left(32))?,
    };
    let fine_policy = TamingPolicy::new(plan.fine_step_count)?;
    let mut reference = vec![0.0; (layout.finest_steps + 1) * d];
    let summary = simulate_with(problem, &fine_policy, &reference_noise, |k, x, _| {
        if k % layout.record_every == 0 {
            let j = k / layout.record_every;
            reference[j * d..(j + 1) * d].copy_from_slice(x);
        }
    })?;
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(layout.steps.len());
    let mut tamed = Vec::with_capacity(layout.steps.len());
    for (level, &n) in plan.coarse_step_counts.iter().enumerate() {
        let noise = coarsen_noise(&fine_noise, plan.fine_step_count / n)?;
        let policy = TamingPolicy::new(n)?;
        let stride = layout.strides[level];
        let mut v = vec![0.0; layout.steps[level] + 1];
        let s = simulate_with(problem, &policy, &noise, |k, x, _| {
            let j = k * stride;
            v[k] = norm_pow(x, &reference[j * d..(j + 1) * d], p);
        })?;
        if let Some(bad) = v.iter().find(|e| !e.is_finite()) {
            return Err(Error::NonFinite { quantity: "error", context: format!("path {path}, n = {n}: {bad}") });
        }
        tamed.push(s.first_taming_step.is_some());
        values.push(v);
    }
    // commit only once the whole path succeeded
    for (level, v) in values.iter().enumerate() {
        for (k, &e) in v.iter().enumerate() {
            acc.sums[level][k].add(e);
            acc.sums_sq[level][k].add(e * e);
        }
        acc.tamed[level] += tamed[level] as u64;
        let stride = layout.strides[level];
        acc.boot.extend(layout.boot_times.iter().map(|&j| v[j / stride]));
    }
    acc.reference_tamed += summary.first_taming_step.is_some() as u64;
    acc.paths += 1;
    Ok(())
}

/// Per-level `(ê_n, se, worst time index)` from the accumulated sums.
fn level_estimates(acc: &Accumulator, plan: &ExperimentPlan) -> Vec<(f64, f64, usize)> {
    let p = plan.error_exponent;
    acc.sums
        .iter()
        .zip(&acc.sums_sq)
        .map(|(sums, sq)| {
            let k = match plan.error_mode {
                ErrorMode::Terminal => sums.len() - 1,
                ErrorMode::GridSup => {
                    let mut best = 0;
                    for (k, s) in sums.iter().enumerate() {
                        if s.value() > sums[best].value() {
                            best = k;
                        }
                    }
                    best
                }
            };
            let (mean, se_mean) = stats::mean_and_stderr(sums[k].value(), sq[k].value(), acc.paths);
            let err = mean.max(0.0).powf(1.0 / p);
            let se = if mean > 0.0 { err * se_mean / (p * mean) } else { 0.0 };
            (err, se, k)
        })
        .collect()
}

/// Basic bootstrap interval for the rate from the per-path values kept at the
/// bootstrap times. The point rate comes from the full grid, the resampled
/// rates from the bootstrap grid, so the interval is centred on their
/// difference rather than on the raw resampled slopes.
fn bootstrap_rate_ci(acc: &Accumulator, plan: &ExperimentPlan, layout: &Layout, rate: f64) -> Option<(f64, f64)> {
    let b = plan.bootstrap_resamples;
    let paths = acc.paths as usize;
    if b < 2 || paths < 2 {
        return None;
    }
    let levels = layout.steps.len();
    let times = layout.boot_times.len();
    let per_path = levels * times;
    let p = plan.error_exponent;
    let slope_of = |weights: &dyn Fn(usize) -> f64| -> Option<f64> {
        let mut errors = Vec::with_capacity(levels);
        for level in 0..levels {
            let mut best = f64::NEG_INFINITY;
            for t in 0..times {
                let mut s = CompensatedSum::default();
                for i in 0..paths {
                    let w = weights(i);
                    if w != 0.0 {
                        s.add(w * acc.boot[i * per_path + level * times + t]);
                    }
                }
                best = best.max(s.value() / paths as f64);
            }
            errors.push(best.max(0.0).powf(1.0 / p));
        }
        fit_rate(&plan.coarse_step_counts, &errors).ok().map(|f| f.slope)
    };
    let base = slope_of(&|_| 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.base_seed ^ 0xB007_57A9);
    let mut shifts = Vec::with_capacity(b);
    let mut counts = vec![0u32; paths];
    for _ in 0..b {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..paths {
            counts[rng.random_range(0..paths)] += 1;
        }
        if let Some(s) = slope_of(&|i| counts[i] as f64) {
            shifts.push(s - base);
        }
    }
    if shifts.len() < 2 {
        return None;
    }
    shifts.sort_by(f64::total_cmp);
    Some((rate - stats::quantile(&shifts, 0.975), rate - stats::quantile(&shifts, 0.025)))
}

fn precondition_warnings(problem: &SdeProblem, plan: &ExperimentPlan) -> Result<Vec<String>> {
    let Some(pre) = plan.precondition else { return Ok(Vec::new()) };
    let mut out = Vec::new();
    for &n in &plan.coarse_step_counts {
        if let Some(msg) = TamingPolicy::new(n)?.precondition_violation(problem, pre)? {
            log::warn!("{msg}");
            out.push(msg);
        }
    }
    Ok(out)
}

/// Estimates `ê_n` for every coarse step count of `plan` and fits the rate.
pub fn run_coupled_experiment(problem: &SdeProblem, plan: &ExperimentPlan) -> Result<ConvergenceReport> {
    let start = Instant::now();
    plan.validate()?;
    let layout = Layout::new(problem, plan)?;
    let warnings = precondition_warnings(problem, plan)?;
    let (acc, quarantined) = reduce_paths(
        plan.path_count,
        || Accumulator::new(&layout),
        |acc, i| run_path(problem, plan, &layout, acc, i),
        Accumulator::merge,
    )?;
    let estimates = level_estimates(&acc, plan);
    let levels: Vec<LevelEstimate> = plan
        .coarse_step_counts
        .iter()
        .zip(&estimates)
        .zip(&acc.tamed)
        .zip(&layout.steps)
        .map(|(((&n, &(error, stderr, k)), &tamed), &m)| LevelEstimate {
            step_count: n,
            error,
            stderr,
            taming_frequency: tamed as f64 / acc.paths as f64,
            worst_time: problem.horizon() * k as f64 / m as f64,
        })
        .collect();
    let errors: Vec<f64> = levels.iter().map(|l| l.error).collect();
    let (fitted_rate, intercept, rate_ci, fit_note) = match fit_rate(&plan.coarse_step_counts, &errors) {
        Ok(fit) => {
            let ci = bootstrap_rate_ci(&acc, plan, &layout, fit.slope);
            let note = (!fit.dropped.is_empty()).then(|| format!("zero error at n = {:?}, dropped from fit", fit.dropped));
            (Some(fit.slope), Some(fit.intercept), ci, note)
        }
        Err(e) => (None, None, None, Some(e.to_string())),
    };
    Ok(ConvergenceReport {
        plan: plan.clone(),
        levels,
        fitted_rate,
        intercept,
        rate_ci,
        fit_note,
        reference_taming_frequency: acc.reference_tamed as f64 / acc.paths as f64,
        quarantined_paths: quarantined,
        precondition_warnings: warnings,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}
