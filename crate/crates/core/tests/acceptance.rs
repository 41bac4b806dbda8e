//! Acceptance runs. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tamed_euler::analysis::{
    calibrated, check_generator, check_higher_order, check_lyapunov_lipschitz, check_monotonicity, envelope_max, fd,
    particle_generator_exponent, DiffusionConvention, GeneratorParams, OrderedConfigSampler, Sampler,
};
use tamed_euler::harness::{run_coupled_experiment, ConvergenceReport, ExperimentPlan};
use tamed_euler::sde::{LinearDrift, LyapunovKind, PolynomialDrift, Precondition};
use tamed_euler::{build_problem, min_gap, ParticleSystem, ParticleSystemSpec, SdeProblem};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn desk_plan(seed: u64) -> ExperimentPlan {
    ExperimentPlan {
        coarse_step_counts: vec![1 << 6, 1 << 7, 1 << 8, 1 << 9, 1 << 10],
        fine_step_count: 1 << 14,
        path_count: 10_000,
        error_exponent: 2.0,
        base_seed: seed,
        ..ExperimentPlan::default()
    }
}

fn levels(r: &ConvergenceReport) -> String {
    r.levels.iter().map(|l| format!("n={} e={:.4e}±{:.1e} tamed={}", l.step_count, l.error, l.stderr, l.taming_frequency)).collect::<Vec<_>>().join("; ")
}

fn ou_problem() -> SdeProblem {
    SdeProblem::new(Arc::new(LinearDrift::new(1, 1.0, 1.0)), 1.0, vec![1.0], 1.0).unwrap()
}

fn polynomial_problem() -> SdeProblem {
    let model = PolynomialDrift::new(1, calibrated::POLYNOMIAL_LIPSCHITZ);
    SdeProblem::new(Arc::new(model), 1.0, vec![1.0], 1.0).unwrap()
}

fn particle_problem() -> SdeProblem {
    build_problem(&ParticleSystemSpec::equispaced(4, 2.0, 1.0, 1.0), 1.0).unwrap()
}

fn rate_in(r: &ConvergenceReport, lo: f64, hi: f64) -> Outcome {
    match r.fitted_rate {
        Some(rate) => outcome(
            (lo..=hi).contains(&rate),
            format!("rate {rate:.4} (CI {:?}) target [{lo}, {hi}]; {}", r.rate_ci, levels(r)),
        ),
        None => outcome(false, format!("no rate: {:?}", r.fit_note)),
    }
}

fn criterion_1() -> (Outcome, String) {
    let r = run_coupled_experiment(&ou_problem(), &desk_plan(1)).unwrap();
    (rate_in(&r, 0.9, 1.1), r.to_csv())
}

fn criterion_2() -> (Outcome, String) {
    let plan = ExperimentPlan { precondition: Some(Precondition::RateOne), ..desk_plan(2) };
    let r = run_coupled_experiment(&polynomial_problem(), &plan).unwrap();
    (rate_in(&r, 0.85, 1.15), r.to_csv())
}

fn particle_report() -> ConvergenceReport {
    let plan = ExperimentPlan {
        coarse_step_counts: vec![1 << 8, 1 << 9, 1 << 10, 1 << 11, 1 << 12],
        fine_step_count: 1 << 16,
        precondition: Some(Precondition::Particles),
        ..desk_plan(3)
    };
    run_coupled_experiment(&particle_problem(), &plan).unwrap()
}

fn criterion_3(r: &ConvergenceReport) -> Outcome {
    let rate = r.fitted_rate.unwrap_or(f64::NAN);
    let taming = r.levels.last().unwrap().taming_frequency;
    outcome(
        rate >= 0.8 && taming < 1e-3,
        format!(
            "rate {rate:.4} (CI {:?}) target >= 0.8; taming at n=4096 {taming} target < 1e-3; reference taming {}; {}",
            r.rate_ci,
            r.reference_taming_frequency,
            levels(r)
        ),
    )
}

const CELLS: [(usize, f64); 12] = [
    (2, 1.5),
    (2, 2.0),
    (2, 3.0),
    (3, 1.5),
    (3, 2.0),
    (3, 3.0),
    (5, 1.5),
    (5, 2.0),
    (5, 3.0),
    (8, 1.5),
    (8, 2.0),
    (8, 3.0),
];

fn criterion_4() -> Outcome {
    let mut failures = Vec::new();
    let mut worst = [f64::NEG_INFINITY; 4];
    for (n, alpha) in CELLS {
        let spec = ParticleSystemSpec::equispaced(n, alpha, 1.0, 1.0);
        let problem = build_problem(&spec, 1.0).unwrap();
        let frozen = calibrated::particle_constants(&spec).expect("calibrated cell");
        let sampler = OrderedConfigSampler::new(n, 2026);
        let q = particle_generator_exponent(2.0, alpha, LyapunovKind::Primary).unwrap();
        let params = GeneratorParams::new(2.0, q, frozen.generator_a2, 0.0);
        let reports = [
            check_lyapunov_lipschitz(&problem, &sampler, 10_000, frozen.lipschitz).unwrap(),
            check_higher_order(&problem, &sampler, 10_000, frozen.higher_order).unwrap(),
            check_generator(&problem, &params, &sampler, 10_000, false, DiffusionConvention::Ito).unwrap(),
            check_monotonicity(&problem, &sampler, 10_000, calibrated::particle_monotonicity(&spec)).unwrap(),
        ];
        for (k, r) in reports.iter().enumerate() {
            worst[k] = worst[k].max(r.worst_ratio);
            if !r.passed {
                failures.push(format!("N={n} α={alpha} {:?} ratio {}", r.condition_name, r.worst_ratio));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "48 sweeps x 1e4 samples; worst ratios lipschitz {:.3} higher-order {:.3} generator {:.3e} monotonicity {:.3}{}",
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            if failures.is_empty() { String::new() } else { format!("; failures: {failures:?}") }
        ),
    )
}

fn criterion_5() -> Outcome {
    let (mut grad_err, mut jac_err) = (0.0f64, 0.0f64);
    for (n, alpha) in CELLS {
        let sys = ParticleSystem::new(ParticleSystemSpec::equispaced(n, alpha, 1.0, 1.0)).unwrap();
        let sampler = OrderedConfigSampler::new(n, 505);
        for i in 0..100 {
            let x = sampler.point(i);
            let h = 1e-6 * min_gap(&x).unwrap().min_gap;
            let (g_fd, _) = fd::gradient_and_laplacian(|y: &[f64]| sys.interaction_energy(y).ok(), &x, h).unwrap();
            grad_err = grad_err.max(fd::relative_error(&sys.interaction_gradient(&x).unwrap(), &g_fd));
            let j_fd = fd::jacobian(|y: &[f64]| sys.drift(y).ok(), &x, h).unwrap();
            jac_err = jac_err.max(fd::relative_error(&sys.drift_jacobian(&x).unwrap(), &j_fd));
        }
    }
    outcome(
        grad_err <= 1e-5 && jac_err <= 1e-5,
        format!("max relative error gradient {grad_err:.2e}, Jacobian {jac_err:.2e} (limit 1e-5)"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = f64::NEG_INFINITY;
    let grid: Vec<f64> = (0..=200_000).map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 200_000.0)).collect();
    for _ in 0..100 {
        let a = 10f64.powf(rng.random_range(-2.0..2.0));
        let b = 10f64.powf(rng.random_range(-2.0..2.0));
        let q = rng.random_range(0.1..3.0);
        let p = q + rng.random_range(0.1..3.0);
        let bound = envelope_max(a, b, p, q).unwrap();
        let sup = grid.iter().map(|&t| -a * t.powf(-p) + b * t.powf(-q)).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((sup - bound) / bound);
    }
    outcome(worst <= 1e-12, format!("max (grid sup − bound)/bound over 100 sets: {worst:.3e}"))
}

fn criterion_7(r: &ConvergenceReport) -> Outcome {
    let m = r.plan.path_count as f64;
    let picked: Vec<(u64, f64, f64)> = r
        .levels
        .iter()
        .filter(|l| [1 << 8, 1 << 10, 1 << 12].contains(&l.step_count))
        .map(|l| (l.step_count, l.taming_frequency, (l.taming_frequency * (1.0 - l.taming_frequency) / m).sqrt()))
        .collect();
    let ok = picked.windows(2).all(|w| w[1].1 <= w[0].1 + 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    outcome(ok, format!("P(τ_n ≤ T) at n = 2^8, 2^10, 2^12: {:?}", picked.iter().map(|p| p.1).collect::<Vec<_>>()))
}

fn criterion_8(first: &[(&str, String)]) -> Outcome {
    let again = [criterion_1().1, criterion_2().1];
    let same = first.iter().zip(&again).all(|((_, a), b)| a == b);
    outcome(same, format!("reran {} experiments, CSV outputs byte-identical: {same}", first.len()))
}

fn main() {
    let mut failed = 0;
    let mut report = |k: u32, name: &str, start: Instant, o: Outcome| {
        println!(
            "{} criterion {k} ({name}): {} [{:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        std::io::stdout().flush().unwrap();
        if !o.passed {
            failed += 1;
        }
    };

    let t = Instant::now();
    let (c1, csv1) = criterion_1();
    report(1, "linear calibration rate", t, c1);
    let t = Instant::now();
    let (c2, csv2) = criterion_2();
    report(2, "polynomial drift rate", t, c2);
    let t = Instant::now();
    let particles = particle_report();
    report(3, "particle system rate", t, criterion_3(&particles));
    let t = Instant::now();
    report(4, "assumption suite", t, criterion_4());
    let t = Instant::now();
    report(5, "analytic vs finite-difference derivatives", t, criterion_5());
    let t = Instant::now();
    report(6, "envelope bound", t, criterion_6());
    let t = Instant::now();
    report(7, "taming probability decay", t, criterion_7(&particles));
    let t = Instant::now();
    report(8, "determinism", t, criterion_8(&[("linear", csv1), ("polynomial", csv2)]));

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
