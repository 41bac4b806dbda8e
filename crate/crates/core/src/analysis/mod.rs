//! Statistical verification of the structural assumptions behind the tamed
//! scheme. Each checker sweeps a deterministic sample of points (or point
//! pairs), evaluates `lhs / rhs` for an inequality `lhs ≤ rhs` and reports
//! the worst ratio together with the sample that produced it.
//!
//! A passing report is evidence, not proof. A failing report carries a
//! concrete counterexample.

pub mod calibrated;
mod checks;
pub mod fd;
mod generator;
mod sampling;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub use checks::{
    check_higher_order, check_higher_order_with, check_lyapunov_lipschitz, check_monotonicity, JacobianFn,
};
pub use generator::{
    check_generator, envelope_max, generator_exponent, generator_lhs, particle_generator_exponent, DiffusionConvention,
    GeneratorParams,
};
pub use sampling::{BoxSampler, OrderedConfigSampler, Sampler};

/// Relative slack on `worst_ratio ≤ 1`. The calibrated constants carry the
/// lemma-style slack, so every condition uses the same floating tolerance.
pub const CHECK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum ConditionName {
    LyapunovLipschitz,
    HigherOrder,
    Generator,
    Monotonicity,
}

impl std::str::FromStr for ConditionName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LyapunovLipschitz" => Ok(ConditionName::LyapunovLipschitz),
            "HigherOrder" => Ok(ConditionName::HigherOrder),
            "Generator" => Ok(ConditionName::Generator),
            "Monotonicity" => Ok(ConditionName::Monotonicity),
            other => Err(Error::usage(format!("unknown condition {other:?}"))),
        }
    }
}

/// Outcome of one assumption sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub condition_name: ConditionName,
    pub samples_tested: u64,
    /// Max over samples of `lhs / rhs`.
    pub worst_ratio: f64,
    /// The point (or pair) attaining `worst_ratio`.
    pub worst_sample: Vec<Vec<f64>>,
    pub passed: bool,
    pub tolerance: f64,
    /// Constant multiplying the right-hand side (`c` in `c·(V(x)+V(y))|x−y|`,
    /// `μ`, or `a_p` for the generator).
    pub constant: f64,
    /// Generator sweeps with constant estimation: empirical `sup (lhs − b_p V^p)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimated_a_p: Option<f64>,
    /// Max relative deviation between the supplied Jacobian and central
    /// differences over the sweep (higher-order checks only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jacobian_fd_error: Option<f64>,
    /// Diffusion coefficient used in the generator (generator checks only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_coefficient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl AssumptionReport {
    fn new(condition_name: ConditionName, samples_tested: u64, worst: Worst, worst_sample: Vec<Vec<f64>>, constant: f64) -> Self {
        AssumptionReport {
            condition_name,
            samples_tested,
            worst_ratio: worst.ratio,
            worst_sample,
            passed: worst.ratio <= 1.0 + CHECK_TOLERANCE,
            tolerance: CHECK_TOLERANCE,
            constant,
            estimated_a_p: None,
            jacobian_fd_error: None,
            diffusion_coefficient: None,
            note: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Largest ratio of a sweep and where it occurred.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Worst {
    ratio: f64,
    index: u64,
}

/// `lhs / rhs` with `0/0 = 0`, `x/0 = ∞` and NaN mapped to `∞`.
fn ratio(lhs: f64, rhs: f64) -> f64 {
    let r = if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        lhs / rhs
    };
    if r.is_nan() {
        f64::INFINITY
    } else {
        r
    }
}

/// Evaluates `f` on `0..count` in parallel and returns the maximum, ties
/// broken by the smallest index, together with any per-sample extra maxed
/// separately. The first error by index wins.
fn sweep<F>(count: u64, f: F) -> Result<(Worst, f64)>
where
    F: Fn(u64) -> Result<(f64, f64)> + Sync,
{
    if count == 0 {
        return Err(Error::usage("sample count must be positive"));
    }
    let results: Vec<Result<(f64, f64)>> = (0..count).into_par_iter().map(&f).collect();
    let mut worst = Worst { ratio: f64::NEG_INFINITY, index: 0 };
    let mut extra = f64::NEG_INFINITY;
    for (i, r) in results.into_iter().enumerate() {
        let (value, side) = r?;
        if value > worst.ratio {
            worst = Worst { ratio: value, index: i as u64 };
        }
        extra = extra.max(side);
    }
    Ok((worst, extra))
}
