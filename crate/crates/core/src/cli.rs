//! `tamed-euler simulate | converge | check`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{
    calibrated, check_generator, check_higher_order, check_lyapunov_lipschitz, check_monotonicity,
    particle_generator_exponent, AssumptionReport, BoxSampler, ConditionName, GeneratorParams, OrderedConfigSampler,
    Sampler,
};
use crate::config::{ProblemConfig, RunConfig};
use crate::error::{Error, Result};
use crate::harness::run_coupled_experiment;
use crate::sde::{simulate_path, LyapunovKind, NoiseSource, SdeProblem, TamingPolicy, TrajectoryRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_EXPERIMENT: i32 = 4;

/// Environment variable read for the log filter (`warn` when unset).
pub const LOG_ENV: &str = "TAMED_EULER_LOG";

#[derive(Debug, Parser)]
#[command(name = "tamed-euler", version, about = "Tamed Euler scheme for SDEs on open domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set plan.path_count=1000`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate sample trajectories.
    Simulate,
    /// Estimate strong errors across step sizes and fit the rate.
    Converge,
    /// Run assumption sweeps.
    Check,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::DomainBoundary { .. } => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
        Error::NonFinite { .. } | Error::Experiment(_) => EXIT_EXPERIMENT,
    }
}

/// Parses `args` and runs the selected command; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let path = cli.config.as_deref().ok_or_else(|| Error::usage("--config <path> is required"))?;
    let mut config = RunConfig::load(path, &cli.overrides)?;
    if let Some(out) = &cli.output {
        config.output_dir = out.clone();
    }
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = cli.workers {
            if w == 0 {
                return Err(Error::usage("--workers must be positive"));
            }
            b = b.num_threads(w);
        }
        b.build().map_err(|e| Error::usage(format!("thread pool: {e}")))?
    };
    pool.install(|| match cli.command {
        Command::Simulate => cmd_simulate(&config),
        Command::Converge => cmd_converge(&config),
        Command::Check => cmd_check(&config),
    })
}

fn prepare_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

/// `time,x1,…,xd,tamed` with shortest round-trip floats and 0/1 flags.
pub fn trajectory_csv(record: &TrajectoryRecord) -> String {
    let d = record.states.first().map_or(0, Vec::len);
    let mut out = String::from("time");
    for i in 1..=d {
        write!(out, ",x{i}").expect("string write");
    }
    out.push_str(",tamed\n");
    for ((t, x), tamed) in record.times.iter().zip(&record.states).zip(&record.tamed_flags) {
        write!(out, "{t}").expect("string write");
        for v in x {
            write!(out, ",{v}").expect("string write");
        }
        writeln!(out, ",{}", u8::from(*tamed)).expect("string write");
    }
    out
}

#[derive(Serialize)]
struct PathEntry {
    file: Option<String>,
    path_index: u64,
    first_taming_time: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    version: &'static str,
    seed: u64,
    step_count: u64,
    config: &'a RunConfig,
    paths: Vec<PathEntry>,
}

pub fn cmd_simulate(config: &RunConfig) -> Result<i32> {
    let problem = config.problem.build()?;
    let sim = &config.simulate;
    let policy = TamingPolicy::new(sim.step_count)?;
    let steps = problem.grid_steps(sim.step_count);
    let source = NoiseSource::new(sim.seed);
    prepare_output(&config.output_dir)?;
    let mut entries = Vec::new();
    for i in 0..sim.paths {
        let noise = source.path(i, sim.step_count, steps, problem.dimension());
        let record = simulate_path(&problem, &policy, &noise)?;
        let file = if config.emit_paths {
            let name = format!("path_{i:03}.csv");
            write_file(&config.output_dir.join(&name), &trajectory_csv(&record))?;
            Some(name)
        } else {
            None
        };
        entries.push(PathEntry { file, path_index: i, first_taming_time: record.first_taming_time });
    }
    let manifest = Manifest {
        command: "simulate",
        version: env!("CARGO_PKG_VERSION"),
        seed: sim.seed,
        step_count: sim.step_count,
        config,
        paths: entries,
    };
    write_file(&config.output_dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest).expect("manifest"))?;
    log::info!("simulated {} paths into {}", sim.paths, config.output_dir.display());
    Ok(EXIT_OK)
}

pub fn cmd_converge(config: &RunConfig) -> Result<i32> {
    let problem = config.problem.build()?;
    prepare_output(&config.output_dir)?;
    let report = run_coupled_experiment(&problem, &config.plan)?;
    write_file(&config.output_dir.join("convergence.csv"), &report.to_csv())?;
    write_file(&config.output_dir.join("summary.json"), &report.summary_json())?;
    match report.fitted_rate {
        Some(rate) => log::info!("fitted rate {rate}"),
        None => log::warn!("no rate fitted: {}", report.fit_note.as_deref().unwrap_or("")),
    }
    Ok(EXIT_OK)
}

fn sampler_for(config: &RunConfig, problem: &SdeProblem) -> Box<dyn Sampler> {
    let c = &config.check;
    match &config.problem {
        ProblemConfig::Particles { particle_count, .. } => Box::new(OrderedConfigSampler::new(*particle_count, c.seed)),
        _ => Box::new(BoxSampler::new(problem.dimension(), c.box_half_width, c.seed)),
    }
}

fn required(value: Option<f64>, fallback: Option<f64>, key: &str) -> Result<f64> {
    value.or(fallback).ok_or_else(|| Error::usage(format!("check.{key} must be set for this problem")))
}

/// Runs the selected sweeps in order.
pub fn run_checks(config: &RunConfig) -> Result<Vec<AssumptionReport>> {
    let problem = config.problem.build()?;
    let spec = config.problem.particle_spec()?;
    let frozen = spec.as_ref().and_then(calibrated::particle_constants);
    let sampler = sampler_for(config, &problem);
    let c = &config.check;
    let mut reports = Vec::new();
    for condition in &c.conditions {
        let report = match condition {
            ConditionName::LyapunovLipschitz => {
                let fallback = match (&config.problem, &frozen) {
                    (_, Some(f)) => Some(f.lipschitz),
                    (ProblemConfig::Polynomial { lyapunov_power, .. }, None) if *lyapunov_power == 2.0 => {
                        Some(calibrated::POLYNOMIAL_LIPSCHITZ)
                    }
                    _ => None,
                };
                let k = required(c.lipschitz_constant, fallback, "lipschitz_constant")?;
                check_lyapunov_lipschitz(&problem, sampler.as_ref(), c.samples, k)?
            }
            ConditionName::HigherOrder => {
                let k = required(c.higher_order_constant, frozen.map(|f| f.higher_order), "higher_order_constant")?;
                check_higher_order(&problem, sampler.as_ref(), c.samples, k)?
            }
            ConditionName::Monotonicity => {
                let fallback = spec.as_ref().map(calibrated::particle_monotonicity);
                let mu = required(c.monotonicity_constant, fallback, "monotonicity_constant")?;
                check_monotonicity(&problem, sampler.as_ref(), c.samples, mu)?
            }
            ConditionName::Generator => {
                let q = match (&spec, c.generator_q) {
                    (_, Some(q)) => q,
                    (Some(s), None) => particle_generator_exponent(c.generator_p, s.alpha, LyapunovKind::Primary)?,
                    (None, None) => return Err(Error::usage("check.generator_q must be set for this problem")),
                };
                let frozen_a = frozen
                    .filter(|_| c.generator_p == 2.0 && c.generator_b == 0.0 && c.generator_q.is_none())
                    .filter(|_| c.diffusion == crate::config::DiffusionConfig::Ito)
                    .map(|f| f.generator_a2);
                let a = if c.estimate_generator_constant {
                    c.generator_a.or(frozen_a).unwrap_or(1.0)
                } else {
                    required(c.generator_a, frozen_a, "generator_a")?
                };
                let params = GeneratorParams::new(c.generator_p, q, a, c.generator_b);
                check_generator(&problem, &params, sampler.as_ref(), c.samples, c.estimate_generator_constant, c.diffusion.into())?
            }
        };
        log::info!("{:?}: worst ratio {} ({})", condition, report.worst_ratio, if report.passed { "pass" } else { "fail" });
        reports.push(report);
    }
    Ok(reports)
}

pub fn cmd_check(config: &RunConfig) -> Result<i32> {
    prepare_output(&config.output_dir)?;
    let reports = run_checks(config)?;
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    write_file(&config.output_dir.join("check_report.json"), &json)?;
    let all = reports.iter().all(|r| r.passed);
    Ok(if all { EXIT_OK } else { EXIT_CHECK_FAILED })
}
