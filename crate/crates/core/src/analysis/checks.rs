use crate::analysis::fd;
use crate::analysis::{ratio, sweep, AssumptionReport, ConditionName, Sampler};
use crate::error::{Error, Result};
use crate::sde::{euclidean_norm, SdeProblem};

/// Row-major drift Jacobian supplied by the caller.
pub type JacobianFn<'a> = dyn Fn(&[f64]) -> Vec<f64> + Sync + 'a;

fn validate(problem: &SdeProblem, sampler: &dyn Sampler, constant: f64) -> Result<()> {
    if sampler.dimension() != problem.dimension() {
        return Err(Error::usage(format!(
            "sampler dimension {} differs from problem dimension {}",
            sampler.dimension(),
            problem.dimension()
        )));
    }
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(Error::usage(format!("check constant must be positive, got {constant}")));
    }
    Ok(())
}

fn in_domain_pair(problem: &SdeProblem, sampler: &dyn Sampler, index: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, y) = sampler.pair(index);
    for p in [&x, &y] {
        if !problem.in_domain(p) {
            return Err(Error::usage(format!("sampler produced a point outside the domain: {p:?}")));
        }
    }
    Ok((x, y))
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Sweeps `|b(x) − b(y)| ≤ c (V(x) + V(y)) |x − y|`.
pub fn check_lyapunov_lipschitz(
    problem: &SdeProblem,
    sampler: &dyn Sampler,
    count: u64,
    constant: f64,
) -> Result<AssumptionReport> {
    validate(problem, sampler, constant)?;
    let (worst, _) = sweep(count, |i| {
        let (x, y) = in_domain_pair(problem, sampler, i)?;
        let bx = problem.drift_at(&x)?;
        let by = problem.drift_at(&y)?;
        let diff: Vec<f64> = bx.iter().zip(&by).map(|(a, b)| a - b).collect();
        let lhs = euclidean_norm(&diff);
        let rhs = constant * (problem.lyapunov_at(&x)? + problem.lyapunov_at(&y)?) * distance(&x, &y);
        Ok((ratio(lhs, rhs), 0.0))
    })?;
    let (x, y) = sampler.pair(worst.index);
    Ok(AssumptionReport::new(ConditionName::LyapunovLipschitz, count, worst, vec![x, y], constant))
}

/// Sweeps `|b(x) − b(y) − ∇b(x)(x − y)| ≤ c (1 + V̂(x) + V̂(y)) |x − y|²`
/// with the model's closed-form Jacobian.
pub fn check_higher_order(
    problem: &SdeProblem,
    sampler: &dyn Sampler,
    count: u64,
    constant: f64,
) -> Result<AssumptionReport> {
    let model = problem.model();
    if model.drift_jacobian(problem.initial_state()).is_none() {
        return Err(Error::usage("problem provides no drift Jacobian; use check_higher_order_with"));
    }
    let jac = |x: &[f64]| model.drift_jacobian(x).expect("Jacobian available");
    check_higher_order_with(problem, &jac, sampler, count, constant)
}

/// [`check_higher_order`] with a caller-supplied Jacobian. The Jacobian is
/// cross-checked against central differences at every sampled `x`; the
/// largest relative deviation is reported in `jacobian_fd_error`.
pub fn check_higher_order_with(
    problem: &SdeProblem,
    jacobian: &JacobianFn<'_>,
    sampler: &dyn Sampler,
    count: u64,
    constant: f64,
) -> Result<AssumptionReport> {
    validate(problem, sampler, constant)?;
    if problem.lyapunov_hat_at(problem.initial_state())?.is_none() {
        return Err(Error::usage("higher-order check needs a second Lyapunov function"));
    }
    let d = problem.dimension();
    let drift_or_none = |y: &[f64]| problem.in_domain(y).then(|| problem.drift_at(y).ok()).flatten();
    let (worst, fd_error) = sweep(count, |i| {
        let (x, y) = in_domain_pair(problem, sampler, i)?;
        let jac = jacobian(&x);
        if jac.len() != d * d {
            return Err(Error::usage(format!("Jacobian has {} entries, expected {}", jac.len(), d * d)));
        }
        let bx = problem.drift_at(&x)?;
        let by = problem.drift_at(&y)?;
        let remainder: Vec<f64> = (0..d)
            .map(|r| {
                let lin: f64 = (0..d).map(|c| jac[r * d + c] * (x[c] - y[c])).sum();
                bx[r] - by[r] - lin
            })
            .collect();
        let lhs = euclidean_norm(&remainder);
        let v_hat = |p: &[f64]| -> Result<f64> { Ok(problem.lyapunov_hat_at(p)?.unwrap_or(0.0)) };
        let rhs = constant * (1.0 + v_hat(&x)? + v_hat(&y)?) * distance(&x, &y).powi(2);
        let h = 1e-6 * sampler.local_scale(&x);
        let jac_fd = fd::jacobian(drift_or_none, &x, h)?;
        Ok((ratio(lhs, rhs), fd::relative_error(&jac, &jac_fd)))
    })?;
    let (x, y) = sampler.pair(worst.index);
    let mut report = AssumptionReport::new(ConditionName::HigherOrder, count, worst, vec![x, y], constant);
    report.jacobian_fd_error = Some(fd_error);
    Ok(report)
}

/// Sweeps the one-sided Lipschitz condition `⟨b(x) − b(y), x − y⟩ ≤ μ|x − y|²`.
pub fn check_monotonicity(problem: &SdeProblem, sampler: &dyn Sampler, count: u64, mu: f64) -> Result<AssumptionReport> {
    validate(problem, sampler, mu)?;
    let (worst, _) = sweep(count, |i| {
        let (x, y) = in_domain_pair(problem, sampler, i)?;
        let bx = problem.drift_at(&x)?;
        let by = problem.drift_at(&y)?;
        let lhs: f64 = (0..x.len()).map(|k| (bx[k] - by[k]) * (x[k] - y[k])).sum();
        Ok((ratio(lhs, mu * distance(&x, &y).powi(2)), 0.0))
    })?;
    let (x, y) = sampler.pair(worst.index);
    Ok(AssumptionReport::new(ConditionName::Monotonicity, count, worst, vec![x, y], mu))
}
