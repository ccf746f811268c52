//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 when a solve finds no feasible schedule,
//! 1 on usage, input or configuration errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::bench::{self, Algorithm, BenchConfig, SampleConfig};
use crate::error::HydroError;
use crate::lp::{build_network, solve_lp};
use crate::model::{check_feasibility, ScheduleFile, ValleyInstance, DEFAULT_FEASIBILITY_TOL};
use crate::predict::{self, PredictConfig};
use crate::price::{self, PriceDecompConfig};
use crate::heuristic;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;

/// Environment variable holding the log filter, e.g. `debug`.
pub const LOG_ENV: &str = "HYDROSCHED_LOG";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Hydro(#[from] HydroError),
    #[error("{0}")]
    Usage(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Hydro(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Hydro(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hydrosched", version, about = "Short-term scheduling of hydro valleys")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the benchmark sample as instance files plus a manifest.
    Generate {
        /// Sample configuration (JSON); built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overwrite an existing non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Solve one instance file.
    Solve {
        instance: PathBuf,
        #[arg(long, value_parser = parse_algorithm)]
        algo: Algorithm,
        /// Directory for the schedule and history files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        params: SolveParams,
    },
    /// Run all algorithms on every instance of a directory and score them.
    Bench {
        sample: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        jobs: Option<usize>,
        /// Algorithm parameters (JSON with `price` and `predict` sections).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolveParams {
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Augmentation weight (price) or brake weight (predict).
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    /// Proximal weight of the price decomposition.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Multiplier step of the price decomposition.
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: HydroError| e.to_string())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::from(EXIT_OK)
            };
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

/// Sets up logging from [`LOG_ENV`]; warnings by default.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}

pub fn execute(command: Command) -> CliResult<u8> {
    match command {
        Command::Generate {
            config,
            out,
            seed,
            force,
        } => cmd_generate(config.as_deref(), &out, seed, force),
        Command::Solve {
            instance,
            algo,
            out,
            params,
        } => cmd_solve(&instance, algo, &out, &params),
        Command::Bench {
            sample,
            out,
            jobs,
            config,
            force,
        } => cmd_bench(&sample, &out, jobs, config.as_deref(), force),
    }
}

/// Creates `dir`, refusing a non-empty one unless `force`.
fn prepare_out_dir(dir: &Path, force: bool) -> CliResult<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
        }
        if !force && fs::read_dir(dir)?.next().is_some() {
            return Err(CliError::Usage(format!(
                "{} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    seed: u64,
    config: &'a SampleConfig,
    instances: Vec<String>,
}

pub fn cmd_generate(config: Option<&Path>, out: &Path, seed: u64, force: bool) -> CliResult<u8> {
    let config = match config {
        Some(p) => SampleConfig::load(p)?,
        None => SampleConfig::default(),
    };
    let sample = bench::generate_sample(&config, seed)?;
    prepare_out_dir(out, force)?;
    let mut files = Vec::with_capacity(sample.len());
    for inst in &sample {
        let file = format!("{}.json", inst.name);
        fs::write(out.join(&file), inst.to_json()?)?;
        files.push(file);
    }
    let manifest = Manifest {
        seed,
        config: &config,
        instances: files,
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    println!("wrote {} instances to {}", sample.len(), out.display());
    Ok(EXIT_OK)
}

pub fn cmd_solve(path: &Path, algo: Algorithm, out: &Path, params: &SolveParams) -> CliResult<u8> {
    let instance = ValleyInstance::load(path)?;
    fs::create_dir_all(out)?;
    let stem = format!("{}.{}", instance.name, algo.name());
    let history_path = out.join(format!("{stem}.history.csv"));
    let (schedule, gain, relaxation) = match algo {
        Algorithm::Lp => {
            if params.max_iters.is_some() || params.c.is_some() || params.b.is_some() || params.eps.is_some() {
                log::warn!("the relaxation takes no parameters; ignoring them");
            }
            let sol = solve_lp(&instance, &build_network(&instance))?;
            println!("bound {}", sol.gain);
            (Some(sol.schedule), Some(sol.gain), true)
        }
        Algorithm::Price => {
            let mut cfg = PriceDecompConfig {
                c: params.c,
                b: params.b,
                eps: params.eps,
                ..Default::default()
            };
            if let Some(k) = params.max_iters {
                cfg.max_iters = k;
            }
            let res = price::run(&instance, &cfg)?;
            res.write_history_csv(fs::File::create(&history_path)?)?;
            (res.best, res.best_gain, false)
        }
        Algorithm::Predict => {
            if params.b.is_some() || params.eps.is_some() {
                return Err(CliError::Usage("--b and --eps apply to the price algorithm only".into()));
            }
            let mut cfg = PredictConfig {
                c: params.c,
                ..Default::default()
            };
            if let Some(k) = params.max_iters {
                cfg.max_iters = k;
            }
            let res = predict::run(&instance, &cfg)?;
            res.write_history_csv(fs::File::create(&history_path)?)?;
            (res.best, res.best_gain, false)
        }
        Algorithm::Heuristic => {
            if params.max_iters.is_some() || params.c.is_some() || params.b.is_some() || params.eps.is_some() {
                return Err(CliError::Usage("the heuristic takes no parameters".into()));
            }
            match heuristic::run(&instance) {
                Ok(res) => (res.schedule, res.gain, false),
                Err(HydroError::LpInfeasible { .. }) => (None, None, false),
                Err(e) => return Err(e.into()),
            }
        }
    };
    let Some(schedule) = schedule else {
        println!("no feasible schedule found");
        return Ok(EXIT_INFEASIBLE);
    };
    let feasible = check_feasibility(&instance, &schedule, DEFAULT_FEASIBILITY_TOL)?.feasible;
    let gain = gain.unwrap_or(f64::NAN);
    let file = ScheduleFile {
        instance: instance.name.clone(),
        algorithm: algo.name().to_string(),
        relaxation,
        feasible,
        gain,
        schedule,
    };
    let schedule_path = out.join(format!("{stem}.schedule.json"));
    fs::write(&schedule_path, serde_json::to_string_pretty(&file)?)?;
    if !relaxation {
        println!("gain {gain}");
    }
    println!("schedule written to {}", schedule_path.display());
    Ok(EXIT_OK)
}

/// Instance files of a sample directory in name order, skipping the
/// manifest.
fn sample_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "manifest.json"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn cmd_bench(sample: &Path, out: &Path, jobs: Option<usize>, config: Option<&Path>, force: bool) -> CliResult<u8> {
    if !sample.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", sample.display())));
    }
    let files = sample_files(sample)?;
    if files.is_empty() {
        return Err(CliError::Usage(format!("no instance files in {}", sample.display())));
    }
    let config: BenchConfig = match config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => BenchConfig::default(),
    };
    prepare_out_dir(out, force)?;
    let instances = files
        .iter()
        .map(ValleyInstance::load)
        .collect::<Result<Vec<_>, _>>()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?;
    let results = pool.install(|| bench::run_all(&instances, &config));
    let table = bench::score(&results);
    bench::write_instance_csv(&table, fs::File::create(out.join("instances.csv"))?)?;
    bench::write_summary_csv(&table, fs::File::create(out.join("summary.csv"))?)?;
    bench::write_timings_csv(&results, fs::File::create(out.join("timings.csv"))?)?;
    let summary = bench::render_summary(&table);
    fs::write(out.join("summary.txt"), &summary)?;
    print!("{summary}");
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    Ok(EXIT_OK)
}
