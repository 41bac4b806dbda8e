use serde::Serialize;

use crate::analysis::fd;
use crate::analysis::{ratio, sweep, AssumptionReport, ConditionName, Sampler};
use crate::error::{Error, Result};
use crate::sde::{LyapunovDerivatives, LyapunovKind, SdeProblem};

/// Coefficient in front of `ΔK` in the generator `⟨∇K, b⟩ + D·ΔK`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub enum DiffusionConvention {
    /// `D = β²/2`, the Itô generator of `dX = b dt + β dW`.
    Ito,
    /// `D = β/2`, the coefficient as literally printed with the model.
    Literal,
    Custom(f64),
}

impl DiffusionConvention {
    pub fn coefficient(&self, beta: f64) -> f64 {
        match *self {
            DiffusionConvention::Ito => beta * beta / 2.0,
            DiffusionConvention::Literal => beta / 2.0,
            DiffusionConvention::Custom(c) => c,
        }
    }
}

/// Constants of the generator inequality
/// `L(V^p) + (1/q_p)|∇(V^p)|^{q_p} ≤ a_p + b_p V^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorParams {
    pub p: f64,
    pub q_p: f64,
    pub a_p: f64,
    pub b_p: f64,
    pub lyapunov: LyapunovKind,
}

impl GeneratorParams {
    pub fn new(p: f64, q_p: f64, a_p: f64, b_p: f64) -> Self {
        GeneratorParams { p, q_p, a_p, b_p, lyapunov: LyapunovKind::Primary }
    }

    pub fn with_lyapunov(mut self, kind: LyapunovKind) -> Self {
        self.lyapunov = kind;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::usage(format!("generator exponent p must be positive, got {}", self.p)));
        }
        if !(self.q_p > 1.0 && self.q_p.is_finite()) {
            return Err(Error::usage(format!("q_p must exceed 1, got {}", self.q_p)));
        }
        if !(self.b_p >= 0.0) {
            return Err(Error::usage(format!("b_p must be nonnegative, got {}", self.b_p)));
        }
        Ok(())
    }
}

/// `q = ((ps − 1)(α − 1) + 1 + α) / ((ps − 1)(α − 1) + α)`, the gradient
/// exponent for which `N^r U_N^s` satisfies the generator inequality.
pub fn generator_exponent(p: f64, s: f64, alpha: f64) -> Result<f64> {
    if !(p * s > 1.0) || !(alpha > 1.0) {
        return Err(Error::usage(format!("generator exponent needs p·s > 1 and α > 1, got p={p}, s={s}, α={alpha}")));
    }
    let base = (p * s - 1.0) * (alpha - 1.0);
    Ok((base + 1.0 + alpha) / (base + alpha))
}

/// [`generator_exponent`] with `s = 1 + 2/(α−1)` for `V_N` or
/// `s = 1 + 3/(α−1)` for `V̂_N`.
pub fn particle_generator_exponent(p: f64, alpha: f64, kind: LyapunovKind) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::usage(format!("alpha must exceed 1, got {alpha}")));
    }
    let s = match kind {
        LyapunovKind::Primary => 1.0 + 2.0 / (alpha - 1.0),
        LyapunovKind::Hat => 1.0 + 3.0 / (alpha - 1.0),
    };
    generator_exponent(p, s, alpha)
}

/// Upper bound `b (bq/(ap))^{q/(p−q)}` on `sup_{t>0} (−a t^{−p} + b t^{−q})`.
pub fn envelope_max(a: f64, b: f64, p: f64, q: f64) -> Result<f64> {
    if !(p > q && q > 0.0 && a > 0.0 && b > 0.0) || ![a, b, p, q].iter().all(|v| v.is_finite()) {
        return Err(Error::usage(format!("envelope needs p > q > 0 and a, b > 0, got a={a}, b={b}, p={p}, q={q}")));
    }
    Ok(b * (b * q / (a * p)).powf(q / (p - q)))
}

fn lyapunov_derivatives(
    problem: &SdeProblem,
    kind: LyapunovKind,
    x: &[f64],
    fd_step: f64,
) -> Result<LyapunovDerivatives> {
    if let Some(ld) = problem.model().lyapunov_derivatives(kind, x) {
        return Ok(ld);
    }
    let value = problem.lyapunov_of_kind(kind, x)?;
    let f = |y: &[f64]| problem.in_domain(y).then(|| problem.lyapunov_of_kind(kind, y).ok()).flatten();
    let (gradient, laplacian) = fd::gradient_and_laplacian(f, x, fd_step)?;
    Ok(LyapunovDerivatives { value, gradient, laplacian })
}

/// `⟨∇(V^p), b⟩ + D Δ(V^p) + (1/q_p)|∇(V^p)|^{q_p}` at `x`.
///
/// Closed-form derivatives of `V` are used when the model has them, central
/// differences with step `fd_step` otherwise; the powers of `V` are then
/// formed by the chain rule.
pub fn generator_lhs(
    problem: &SdeProblem,
    params: &GeneratorParams,
    x: &[f64],
    fd_step: f64,
    convention: DiffusionConvention,
) -> Result<f64> {
    params.validate()?;
    let b = problem.drift_at(x)?;
    let ld = lyapunov_derivatives(problem, params.lyapunov, x, fd_step)?;
    let p = params.p;
    let v = ld.value;
    let grad_sq: f64 = ld.gradient.iter().map(|g| g * g).sum();
    let dot: f64 = ld.gradient.iter().zip(&b).map(|(g, bi)| g * bi).sum();
    // ∇(V^p) = p V^{p−1} ∇V,  Δ(V^p) = p(p−1) V^{p−2} |∇V|² + p V^{p−1} ΔV
    let vp1 = v.powf(p - 1.0);
    let lap_vp = if grad_sq == 0.0 { 0.0 } else { p * (p - 1.0) * v.powf(p - 2.0) * grad_sq } + p * vp1 * ld.laplacian;
    let grad_vp_norm = p * vp1 * grad_sq.sqrt();
    let diffusion = convention.coefficient(problem.noise_intensity());
    let lhs = p * vp1 * dot + diffusion * lap_vp + grad_vp_norm.powf(params.q_p) / params.q_p;
    if lhs.is_nan() {
        return Err(Error::NonFinite { quantity: "generator", context: format!("{x:?}") });
    }
    Ok(lhs)
}

/// Sweeps the generator inequality.
///
/// With `estimate_constants` the sweep instead estimates
/// `a_p = sup (lhs − b_p V^p)` over the sample; the report then carries the
/// estimate in `estimated_a_p`, its ratio is 1 by construction and it passes
/// iff the estimate is finite.
pub fn check_generator(
    problem: &SdeProblem,
    params: &GeneratorParams,
    sampler: &dyn Sampler,
    count: u64,
    estimate_constants: bool,
    convention: DiffusionConvention,
) -> Result<AssumptionReport> {
    params.validate()?;
    if sampler.dimension() != problem.dimension() {
        return Err(Error::usage("sampler dimension differs from problem dimension"));
    }
    if !estimate_constants && !(params.a_p > 0.0) {
        return Err(Error::usage(format!("a_p must be positive, got {}", params.a_p)));
    }
    let (worst, _) = sweep(count, |i| {
        let x = sampler.point(i);
        if !problem.in_domain(&x) {
            return Err(Error::usage(format!("sampler produced a point outside the domain: {x:?}")));
        }
        let h = 1e-4 * sampler.local_scale(&x);
        let lhs = generator_lhs(problem, params, &x, h, convention)?;
        let vp = problem.lyapunov_of_kind(params.lyapunov, &x)?.powf(params.p);
        if estimate_constants {
            Ok((lhs - params.b_p * vp, 0.0))
        } else {
            Ok((ratio(lhs, params.a_p + params.b_p * vp), 0.0))
        }
    })?;
    let sample = vec![sampler.point(worst.index)];
    let diffusion = convention.coefficient(problem.noise_intensity());
    let mut report = if estimate_constants {
        let a_hat = worst.ratio;
        let mut r = AssumptionReport::new(
            ConditionName::Generator,
            count,
            super::Worst { ratio: if a_hat.is_finite() { 1.0 } else { f64::INFINITY }, index: worst.index },
            sample,
            a_hat,
        );
        r.estimated_a_p = Some(a_hat);
        r.note = Some("constant estimation: worst_sample attains the empirical a_p".to_string());
        r
    } else {
        AssumptionReport::new(ConditionName::Generator, count, worst, sample, params.a_p)
    };
    report.diffusion_coefficient = Some(diffusion);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{BoxSampler, OrderedConfigSampler};
    use crate::particles::{build_problem, ParticleSystemSpec};
    use crate::sde::{FnModel, LinearDrift, PolynomialDrift};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn constant_lyapunov_gives_zero() {
        let p = SdeProblem::new(Arc::new(LinearDrift::new(2, 1.0, 3.0)), 1.0, vec![0.5, 0.5], 1.0).unwrap();
        let params = GeneratorParams::new(2.0, 2.0, 1.0, 0.0);
        assert_eq!(generator_lhs(&p, &params, &[1.0, -1.0], 1e-4, DiffusionConvention::Ito).unwrap(), 0.0);
        let r = check_generator(&p, &params, &BoxSampler::new(2, 3.0, 0), 100, false, DiffusionConvention::Ito).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn closed_form_one_dimensional_case() {
        // b = 0, β = 1, V = 1 + x², p = 1, q = 2: lhs = 1 + 2x²
        let m = FnModel::new(1, |_x, out| out[0] = 0.0, |x| 1.0 + x[0] * x[0]);
        let p = SdeProblem::new(Arc::new(m), 1.0, vec![0.0], 1.0).unwrap();
        let params = GeneratorParams::new(1.0, 2.0, 1.0, 0.0);
        for conv in [DiffusionConvention::Ito, DiffusionConvention::Literal] {
            let lhs = generator_lhs(&p, &params, &[1.0], 1e-4, conv).unwrap();
            assert_relative_eq!(lhs, 3.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn analytic_and_fd_generators_agree() {
        let analytic = SdeProblem::new(Arc::new(PolynomialDrift::new(2, 1.0)), 1.0, vec![0.0, 0.0], 1.0).unwrap();
        let m = FnModel::new(
            2,
            |x, out| {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v - v * v * v;
                }
            },
            |x| 1.0 + x[0] * x[0] + x[1] * x[1],
        );
        let numeric = SdeProblem::new(Arc::new(m), 1.0, vec![0.0, 0.0], 1.0).unwrap();
        let params = GeneratorParams::new(2.0, 1.5, 1.0, 0.0);
        for x in [[0.3, -0.2], [1.5, 0.7], [-2.0, 2.5]] {
            let a = generator_lhs(&analytic, &params, &x, 1e-4, DiffusionConvention::Ito).unwrap();
            let n = generator_lhs(&numeric, &params, &x, 1e-4, DiffusionConvention::Ito).unwrap();
            assert_relative_eq!(a, n, max_relative = 1e-5);
        }
    }

    #[test]
    fn eq_exponent_values() {
        assert_relative_eq!(generator_exponent(1.0, 3.0, 2.0).unwrap(), 1.25, max_relative = 1e-15);
        assert!(generator_exponent(0.5, 2.0, 2.0).is_err());
        for alpha in [1.5, 2.0, 3.0] {
            for kind in [LyapunovKind::Primary, LyapunovKind::Hat] {
                let qs: Vec<f64> = (1..=10).map(|p| particle_generator_exponent(p as f64, alpha, kind).unwrap()).collect();
                assert!(qs.iter().all(|&q| q > 1.0));
                assert!(qs.windows(2).all(|w| w[1] < w[0]));
            }
        }
    }

    #[test]
    fn envelope_example() {
        let bound = envelope_max(1.0, 1.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(bound, 0.5, max_relative = 1e-15);
        assert!(bound >= 0.25);
        assert!(envelope_max(1.0, 1.0, 1.0, 2.0).is_err());
        assert!(envelope_max(0.0, 1.0, 2.0, 1.0).is_err());
        // q → 0⁺ with b fixed
        assert_relative_eq!(envelope_max(1.0, 3.0, 2.0, 1e-9).unwrap(), 3.0, max_relative = 1e-6);
    }

    #[test]
    fn particle_generator_goes_negative_near_collision() {
        let spec = ParticleSystemSpec::equispaced(3, 2.0, 1.0, 1.0);
        let p = build_problem(&spec, 1.0).unwrap();
        let q = particle_generator_exponent(2.0, 2.0, LyapunovKind::Primary).unwrap();
        let params = GeneratorParams::new(2.0, q, 1.0, 0.0);
        let mut last = f64::INFINITY;
        for t in [0.1, 0.03, 0.01, 0.003, 0.001] {
            let lhs = generator_lhs(&p, &params, &[0.0, t, 2.0 * t], 1e-4 * t, DiffusionConvention::Ito).unwrap();
            assert!(lhs.is_finite());
            assert!(lhs < last);
            last = lhs;
        }
        assert!(last < -1e20);
    }

    #[test]
    fn estimator_reports_finite_constant() {
        let spec = ParticleSystemSpec::equispaced(3, 2.0, 1.0, 1.0);
        let p = build_problem(&spec, 1.0).unwrap();
        let q = particle_generator_exponent(2.0, 2.0, LyapunovKind::Primary).unwrap();
        let params = GeneratorParams::new(2.0, q, 1.0, 0.0);
        let s = OrderedConfigSampler::new(3, 5);
        let r = check_generator(&p, &params, &s, 2000, true, DiffusionConvention::Ito).unwrap();
        let a = r.estimated_a_p.unwrap();
        assert!(a.is_finite() && r.passed);
        let checked = check_generator(&p, &GeneratorParams { a_p: a, ..params }, &s, 2000, false, DiffusionConvention::Ito).unwrap();
        assert!(checked.passed);
        assert_relative_eq!(checked.worst_ratio, 1.0, max_relative = 1e-12);
    }
}
