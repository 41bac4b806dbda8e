//! Harness estimates against closed forms for `dX = −X dt + dW`, `X_0 = 1`,
//! `T = 1`. Euler with step `h` gives
//! `X_T = a^m x0 + β Σ_k a^{m−1−k} ΔW_k`, `a = 1 − h`, a Gaussian linear in
//! the increments, so mean-square differences are sums of squared
//! coefficient differences.

use std::sync::Arc;

use tamed_euler::harness::{run_coupled_experiment, ErrorMode, ExperimentPlan};
use tamed_euler::sde::LinearDrift;
use tamed_euler::SdeProblem;

const X0: f64 = 1.0;
const BETA: f64 = 1.0;

fn ou() -> SdeProblem {
    SdeProblem::new(Arc::new(LinearDrift::new(1, 1.0, 1.0)), BETA, vec![X0], 1.0).unwrap()
}

/// `E|X^n_T − X^fine_T|²` for Euler paths driven by the same increments.
fn coupled_mse(n: u64, fine: u64) -> f64 {
    let (h, delta) = (1.0 / n as f64, 1.0 / fine as f64);
    let (a, big_a) = (1.0 - h, 1.0 - delta);
    let (m, big_m) = (n as i32, fine as i32);
    let f = (fine / n) as i32;
    let det = (a.powi(m) - big_a.powi(big_m)) * X0;
    let stoch: f64 = (0..big_m)
        .map(|j| {
            let c = a.powi(m - 1 - j / f) - big_a.powi(big_m - 1 - j);
            c * c * delta
        })
        .sum();
    det * det + BETA * BETA * stoch
}

/// `E|X^n_T − X_T|²` against the exact Ornstein–Uhlenbeck solution
/// `X_T = e^{−T} x0 + β ∫ e^{−(T−s)} dW_s`.
fn exact_mse(n: u64) -> f64 {
    let h = 1.0 / n as f64;
    let a = 1.0 - h;
    let m = n as i32;
    let det = (a.powi(m) - (-1.0f64).exp()) * X0;
    let stoch: f64 = (0..m)
        .map(|k| {
            let c = a.powi(m - 1 - k);
            let (s0, s1) = (k as f64 * h, (k + 1) as f64 * h);
            // ∫ (c − e^{−(1−s)})² ds over [s0, s1]
            let e1 = (-(1.0 - s1)).exp() - (-(1.0 - s0)).exp();
            let e2 = ((-2.0 * (1.0 - s1)).exp() - (-2.0 * (1.0 - s0)).exp()) / 2.0;
            c * c * h - 2.0 * c * e1 + e2
        })
        .sum();
    det * det + BETA * BETA * stoch
}

fn plan(paths: u64, fine: u64) -> ExperimentPlan {
    ExperimentPlan {
        coarse_step_counts: vec![16, 32, 64],
        fine_step_count: fine,
        path_count: paths,
        error_mode: ErrorMode::Terminal,
        base_seed: 99,
        ..ExperimentPlan::default()
    }
}

#[test]
fn terminal_errors_match_the_coupled_closed_form() {
    let r = run_coupled_experiment(&ou(), &plan(4000, 2048)).unwrap();
    for l in &r.levels {
        let expected = coupled_mse(l.step_count, 2048).sqrt();
        assert!((l.error - expected).abs() < 3.0 * l.stderr, "n={}: {} vs {expected} ± {}", l.step_count, l.error, l.stderr);
    }
}

#[test]
fn fine_reference_approaches_the_exact_solution() {
    for n in [16u64, 64, 256] {
        let coupled = coupled_mse(n, 1 << 14).sqrt();
        let exact = exact_mse(n).sqrt();
        assert!((coupled - exact).abs() < 0.05 * exact, "n={n}: {coupled} vs {exact}");
    }
    // both are first order
    let slope = (exact_mse(64).sqrt() / exact_mse(256).sqrt()).log2() / 2.0;
    assert!((slope - 1.0).abs() < 0.05, "{slope}");
}

#[test]
fn doubling_the_reference_resolution_is_within_one_stderr() {
    // Both references see the same Brownian paths. The closed form puts the
    // bias change at about 3e-5 here, against standard errors near 9e-5.
    let shared = |fine| ExperimentPlan { noise_step_count: Some(8192), ..plan(2000, fine) };
    let a = run_coupled_experiment(&ou(), &shared(4096)).unwrap();
    let b = run_coupled_experiment(&ou(), &shared(8192)).unwrap();
    for x in &a.levels {
        let predicted = (coupled_mse(x.step_count, 4096).sqrt() - coupled_mse(x.step_count, 8192).sqrt()).abs();
        assert!(predicted < 0.5 * x.stderr, "{predicted}");
    }
    for (x, y) in a.levels.iter().zip(&b.levels) {
        assert!((x.error - y.error).abs() < x.stderr.max(y.stderr), "{x:?} {y:?}");
    }
}

#[test]
fn errors_decrease_with_step_count() {
    let mut p = plan(2000, 4096);
    p.coarse_step_counts = vec![16, 32, 64, 128, 256];
    p.error_mode = ErrorMode::GridSup;
    let r = run_coupled_experiment(&ou(), &p).unwrap();
    for w in r.levels.windows(2) {
        assert!(w[1].error <= w[0].error + 2.0 * (w[0].stderr + w[1].stderr), "{w:?}");
    }
}
