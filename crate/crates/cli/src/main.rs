//! `urysohn`: validate, evaluate, generate and run experiments from the shell.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use urysohn_core::experiments::{holdout_bound, run_concentration_experiment, run_zero_one_experiment};
use urysohn_core::fms::{parse_fms, write_fms, FmsError};
use urysohn_core::generate::{build_approximation, sequential_random_space, ApproximationParams};
use urysohn_core::logic::{parse_sentence, BoundKind, CompiledFormula, Env, EvalMode};
use urysohn_core::Mode;

use crate::config::FileConfig;

const THREADS_ENV: &str = "URYSOHN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "urysohn", version, about = "Random finite metric spaces and continuous-logic sentences")]
struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for experiment outputs.
    #[arg(long, global = true, default_value = "urysohn-out")]
    out_dir: PathBuf,
    /// Worker threads; all available cores when unset.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a .fms file and list every violation.
    Validate {
        path: PathBuf,
        /// Allow zero distances between distinct points.
        #[arg(long)]
        pseudometric: bool,
    },
    /// Evaluate a sentence (text or file) on a .fms space.
    Eval {
        sentence: String,
        space: PathBuf,
        /// Restrict the leading quantifier block to S sampled points.
        #[arg(long, value_name = "S")]
        sampled: Option<usize>,
        #[arg(long)]
        pseudometric: bool,
    },
    /// Build an approximation of the Urysohn sphere.
    GenApprox {
        #[arg(long)]
        target_size: usize,
        #[arg(long, default_value_t = 4)]
        max_base: usize,
        /// Distances are multiples of 1/GRID; 0 means continuous.
        #[arg(long, default_value_t = 0)]
        grid: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Build a random space row by row.
    GenSpace {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        grid: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Run an experiment from a JSON config.
    #[command(subcommand)]
    Experiment(Experiment),
    /// Print C(m,n)·(1-p)^floor((m-n)/k), clamped to [0,1].
    Bound {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        p: f64,
    },
}

#[derive(Debug, Args)]
struct Output {
    /// Output file; stdout when omitted.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
enum ExperimentKind {
    Theorem23,
    Zeroone,
}

#[derive(Debug, Subcommand)]
enum Experiment {
    /// Concentration of a kind sentence near 0, with the analytic bound.
    Theorem23 { config: PathBuf },
    /// Concentration of a sentence around its value on the host.
    Zeroone { config: PathBuf },
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn io(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

/// Writes through a temporary sibling and a rename, so readers never see a
/// partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::io(format!("{}: {e}", path.display()));
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn emit(output: &Output, contents: &str) -> Result<(), Failure> {
    match &output.output {
        Some(path) => write_atomic(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn load_space(path: &Path, pseudometric: bool) -> Result<urysohn_core::FiniteMetricSpace, Failure> {
    let mode = if pseudometric { Mode::Pseudometric } else { Mode::Metric };
    parse_fms(&read(path)?, mode).map_err(|e| match e {
        FmsError::Invalid(report) => {
            let lines: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            Failure::invalid(format!("{}: invalid space\n{}", path.display(), lines.join("\n")))
        }
        other => Failure::invalid(format!("{}: {other}", path.display())),
    })
}

fn unix_millis() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

fn run_experiment(cli: &Cli, kind: ExperimentKind, path: &Path) -> Result<(), Failure> {
    let started = unix_millis();
    let clock = Instant::now();
    let file = FileConfig::parse(&read(path)?)?.resolve(cli.seed);
    let (config, sentence) = file.to_experiment()?;
    let invalid = |e: urysohn_core::experiments::ExperimentError| Failure::invalid(e.to_string());
    let (subcommand, csv, mut result) = match kind {
        ExperimentKind::Theorem23 => {
            let res = run_concentration_experiment(&config).map_err(invalid)?;
            let csv = res.series.to_csv();
            let result = json!({
                "p_hat": res.bound.p.p_hat,
                "p_successes": res.bound.p.successes,
                "p_trials": res.bound.p.trials,
                "ci": res.bound.p.ci,
                "zero_variance": res.bound.p.zero_variance,
                "n": res.bound.n,
                "k": res.bound.k,
                "bound_curve": res.bound.bound_curve,
                "N": res.host_size,
                // Without-replacement draws shift p by O(m/N) relative to an atomless measure.
                "m_over_N": res.host_size.map(|n| {
                    res.series.rows.iter().map(|r| (r.m, r.m as f64 / n as f64)).collect::<Vec<_>>()
                }),
                "series": res.series,
            });
            ("experiment theorem23", csv, result)
        }
        ExperimentKind::Zeroone => {
            let res = run_zero_one_experiment(&config).map_err(invalid)?;
            let csv = res.series.to_csv();
            let result = json!({
                "r_hat": res.r_hat,
                "N": res.reference_size,
                "series": res.series,
            });
            ("experiment zeroone", csv, result)
        }
    };
    let wall = clock.elapsed().as_secs_f64();
    let extra = result.as_object_mut().expect("result is an object");
    extra.insert("config".into(), serde_json::to_value(&file).expect("config serializes"));
    extra.insert("sentence".into(), sentence.clone().into());
    extra.insert("seed".into(), config.seed.into());
    extra.insert("eval_mode".into(), serde_json::to_value(config.eval_mode).expect("mode serializes"));
    extra.insert("wall_time_s".into(), wall.into());

    let out = &cli.out_dir;
    fs::create_dir_all(out).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    let csv_path = out.join("series.csv");
    let result_path = out.join("result.json");
    let manifest_path = out.join("manifest.json");
    write_atomic(&csv_path, &csv)?;
    write_atomic(&result_path, &pretty(&result))?;
    let manifest = Manifest {
        subcommand,
        config: &file,
        sentence: &sentence,
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION"),
        started_unix_ms: started,
        finished_unix_ms: unix_millis(),
        outputs: vec![csv_path.display().to_string(), result_path.display().to_string()],
    };
    write_atomic(&manifest_path, &pretty(&manifest))?;
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config: &'a FileConfig,
    sentence: &'a str,
    seed: u64,
    version: &'a str,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    outputs: Vec<String>,
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate { path, pseudometric } => {
            let space = load_space(path, *pseudometric)?;
            println!("OK n={}", space.size());
        }
        Command::Eval { sentence, space, sampled, pseudometric } => {
            let text = if Path::new(sentence).is_file() { read(Path::new(sentence))? } else { sentence.clone() };
            let formula = parse_sentence(&text).map_err(|e| Failure::invalid(e.to_string()))?;
            let space = load_space(space, *pseudometric)?;
            let mode = sampled.map_or(EvalMode::Exact, |s| EvalMode::Sampled { s });
            let seed = cli.seed.unwrap_or(0);
            let value = CompiledFormula::new(&formula)
                .evaluate_mode(&space, &Env::new(), mode, seed)
                .map_err(|e| Failure::invalid(e.to_string()))?;
            match value.mode {
                EvalMode::Exact => println!("{} exact", value.value),
                EvalMode::Sampled { s } => {
                    let prefix = match value.bound {
                        BoundKind::Lower => "≥ ",
                        BoundKind::Upper => "≤ ",
                        BoundKind::Exact => "",
                    };
                    println!("{prefix}{} sampled s={s} seed={seed}", value.value);
                }
            }
        }
        Command::GenApprox { target_size, max_base, grid, output } => {
            let params = ApproximationParams {
                target_size: *target_size,
                max_base: *max_base,
                grid: *grid,
                seed: cli.seed.unwrap_or(0),
            };
            let space = build_approximation(&params).map_err(|e| Failure::invalid(e.to_string()))?;
            emit(output, &write_fms(&space))?;
        }
        Command::GenSpace { m, grid, output } => {
            let space = sequential_random_space(*m, *grid, cli.seed.unwrap_or(0))
                .map_err(|e| Failure::invalid(e.to_string()))?;
            emit(output, &write_fms(&space))?;
        }
        Command::Experiment(Experiment::Theorem23 { config }) => {
            run_experiment(cli, ExperimentKind::Theorem23, config)?
        }
        Command::Experiment(Experiment::Zeroone { config }) => run_experiment(cli, ExperimentKind::Zeroone, config)?,
        Command::Bound { m, n, k, p } => {
            let b = holdout_bound(*m, *n, *k, *p).map_err(|e| Failure::invalid(e.to_string()))?;
            println!("{b}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
