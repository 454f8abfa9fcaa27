use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use serde_json::Value;

use cm_vessel::output::{thin_records, write_json, write_state, write_timeseries, RunFiles, RunMetadata};
use cm_vessel::scenario::{parse_value, resolve_value, set_path, Scenario, ScenarioConfig};
use cm_vessel::{output, validation, Error};

const EXIT_NONCONVERGENCE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(name = "cm-vessel", version, about = "Constrained-mixture vessel growth and remodeling with steady hemodynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its time series.
    Run(RunArgs),
    /// Run the shipped benchmarks and check them against reference values.
    Validate {
        #[arg(long, default_value = "out/validate")]
        out: PathBuf,
    },
    /// Run one scenario per value of a configuration parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Dotted parameter path, e.g. `hemodynamics.R`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration file (JSON).
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Built-in preset name.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    /// State dump of an earlier run to continue from.
    #[arg(long)]
    seed_history: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AlgorithmArg {
    Alg2,
    Alg3,
}

impl RunArgs {
    fn raw_config(&self) -> Result<Value, Error> {
        let value = match (&self.config, &self.scenario) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?
            }
            (None, Some(name)) => serde_json::json!({ "preset": name }),
            (None, None) => return Err(Error::config("cli", "pass --config <path> or --scenario <preset>")),
        };
        let mut value = resolve_value(value)?;
        if let Some(alg) = self.algorithm {
            let name = match alg {
                AlgorithmArg::Alg2 => "alg2",
                AlgorithmArg::Alg3 => "alg3",
            };
            set_path(&mut value, "coupling.algorithm", Value::from(name))?;
        }
        Ok(value)
    }
}

/// Outcome of one run: whether the loop finished.
fn run_one(cfg: &ScenarioConfig, out: &Path, stem: &str, seed: Option<&Path>) -> Result<bool, Error> {
    std::fs::create_dir_all(out)?;
    let started = Instant::now();
    let mut scenario = Scenario::from_config(cfg)?;
    if let Some(path) = seed {
        scenario.seed(output::read_state(path)?)?;
    }
    let result = scenario.run()?;
    let files = RunFiles::in_dir(out, stem);
    let rows = thin_records(&result.records, scenario.config.output.cadence);
    write_timeseries(&rows, &scenario.names, &files.timeseries)?;
    let meta = RunMetadata::new(
        &scenario.config,
        &result,
        started.elapsed().as_secs_f64(),
        scenario.calibrated_prestretch,
    );
    write_json(&meta, &files.metadata)?;
    write_state(&scenario.state, &files.state)?;
    match &result.failure {
        None => info!("{stem}: finished in {:.2} s -> {}", meta.wall_clock_s, files.timeseries.display()),
        Some(f) => error!("{stem}: {f}; partial output in {}", files.timeseries.display()),
    }
    Ok(result.completed())
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::Config { .. } | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_NONCONVERGENCE,
    }
}

fn execute(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = parse_value(args.raw_config()?)?;
            let stem = cfg.name.clone();
            let done = run_one(&cfg, &args.out, &stem, args.seed_history.as_deref())?;
            Ok(if done { 0 } else { EXIT_NONCONVERGENCE })
        }
        Command::Sweep { run, param, values } => {
            if values.is_empty() {
                return Err(Error::config("values", "at least one value is required"));
            }
            let base = run.raw_config()?;
            let mut configs = Vec::with_capacity(values.len());
            for v in &values {
                let mut raw = base.clone();
                set_path(&mut raw, &param, Value::from(*v))?;
                configs.push(parse_value(raw)?);
            }
            let seed = run.seed_history.as_deref();
            let results: Vec<Result<bool, Error>> = std::thread::scope(|s| {
                let handles: Vec<_> = configs
                    .iter()
                    .zip(&values)
                    .map(|(cfg, v)| {
                        let stem = format!("{}-{}={}", cfg.name, param, v);
                        let out = &run.out;
                        s.spawn(move || run_one(cfg, out, &stem, seed))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
            });
            let mut code = 0;
            for r in results {
                match r {
                    Ok(true) => {}
                    Ok(false) => code = code.max(EXIT_NONCONVERGENCE),
                    Err(e) => return Err(e),
                }
            }
            Ok(code)
        }
        Command::Validate { out } => {
            std::fs::create_dir_all(&out)?;
            let checks = validation::run_all(&out)?;
            println!("{}", validation::table(&checks));
            Ok(if checks.iter().all(|c| c.passed) { 0 } else { EXIT_NONCONVERGENCE })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
