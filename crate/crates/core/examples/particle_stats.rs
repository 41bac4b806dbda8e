//! Distribution of V_N along untamed paths of the four-particle problem.
//!
//!     cargo run --release --example particle_stats -- [paths] [step_count]

use tamed_euler::sde::NoiseSource;
use tamed_euler::{build_problem, ParticleSystemSpec, TamingPolicy};

fn main() -> tamed_euler::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let paths: u64 = args.get(1).map_or(1000, |s| s.parse().expect("paths"));
    let n: u64 = args.get(2).map_or(65536, |s| s.parse().expect("step count"));
    let spec = ParticleSystemSpec::equispaced(4, 2.0, 1.0, 1.0);
    let problem = build_problem(&spec, 1.0)?;
    let policy = TamingPolicy::new(n)?;
    let source = NoiseSource::new(1);
    let mut maxima = Vec::new();
    let mut terminal = Vec::new();
    for p in 0..paths {
        let noise = source.path(p, n, n as usize, 4);
        let mut max_v: f64 = 0.0;
        let mut last = 0.0;
        tamed_euler::sde::simulate_with(&problem, &policy, &noise, |_, x, _| {
            if let Ok(v) = problem.lyapunov_at(x) {
                max_v = max_v.max(v);
                last = v;
            }
        })?;
        maxima.push(max_v);
        terminal.push(last);
    }
    maxima.sort_by(f64::total_cmp);
    terminal.sort_by(f64::total_cmp);
    let q = |v: &[f64], f: f64| v[((v.len() - 1) as f64 * f) as usize];
    println!("V(x0) = {}", problem.lyapunov_at(problem.initial_state())?);
    println!("terminal V: median {} p90 {}", q(&terminal, 0.5), q(&terminal, 0.9));
    println!("path max V: min {} median {} p90 {} max {}", maxima[0], q(&maxima, 0.5), q(&maxima, 0.9), maxima[maxima.len() - 1]);
    for k in [8u32, 10, 12, 16] {
        let thr = 2f64.powi(k as i32).sqrt();
        let frac = maxima.iter().filter(|&&m| m > thr).count() as f64 / maxima.len() as f64;
        println!("P(max V > sqrt(2^{k}) = {thr}) = {frac}");
    }
    Ok(())
}
