//! `distq` command-line front end.
//!
//! Exit codes: 0 on success, 2 for bad arguments or malformed inputs, 3 when
//! a file cannot be read or written. Diagnostics go to standard error;
//! standard output carries only the requested artifact or report.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::adaptive::{adapt, RateSchedule};
use crate::error::{Error, Result};
use crate::eval::{assumption1_diagnostic, evaluate_mse, MseReport};
use crate::experiments::{gen_synthetic, run_figure2, SyntheticSpec};
use crate::io::{self, CodebookFile};
use crate::model::{FeaturePartition, LinearModel};
use crate::scheme::{train_agnostic, train_distributed, TrainConfig};
use crate::simnet::run_session;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// File names written by `gen-data` inside the output directory.
pub const CAL_FILE: &str = "calibration.csv";
pub const TEST_FILE: &str = "test.csv";
pub const MODEL_FILE: &str = "model.json";
pub const PARTITION_FILE: &str = "partition.json";

#[derive(Debug, Parser)]
#[command(name = "distq", version, about = "Distributed rate-adaptive quantizers for linear-regression fusion")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Seed override (synthetic data, baseline K-Means restarts).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path; standard output when omitted (directory for gen-data).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "DISTQ_THREADS")]
    pub threads: Option<usize>,
    /// More diagnostics on standard error (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Distributed,
    Agnostic,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic Gaussian instance.
    GenData {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Train a quantizer from calibration data.
    Train {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        cal: PathBuf,
        /// One budget for all sensors, or a comma-separated list.
        #[arg(long, value_delimiter = ',', required = true)]
        bits: Vec<u32>,
        #[arg(long, value_enum, default_value_t = Strategy::Distributed)]
        strategy: Strategy,
        /// Lloyd restarts for the agnostic strategy.
        #[arg(long, default_value_t = crate::clustering::DEFAULT_RESTARTS)]
        restarts: usize,
    },
    /// Derive a quantizer for new budgets from a trained one.
    Adapt {
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        bits: Vec<u32>,
    },
    /// Report MSE of a quantizer on a test set.
    Eval {
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Run a sensor/fusion-center session under a rate schedule.
    Simulate {
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        /// Input stream, one sample per row.
        #[arg(long, alias = "test")]
        stream: PathBuf,
    },
    /// Compare non-adaptive, adaptive and model-agnostic strategies across budgets.
    ReproduceFig2 {
        #[arg(long)]
        spec: PathBuf,
    },
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    init_logging(cli.global.verbose);
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_CONFIG
            }
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        })
    }
}

fn require_out_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        }),
        _ => Ok(()),
    }
}

/// Writes `text` to `--out` or standard output.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })
        }
    }
}

fn expand_bits(bits: &[u32], m: usize) -> Result<Vec<u32>> {
    match bits.len() {
        1 => Ok(vec![bits[0]; m]),
        n if n == m => Ok(bits.to_vec()),
        n => Err(Error::invalid_argument(format!("{n} bit budgets given for {m} sensors"))),
    }
}

fn load_spec(path: &Path, seed: Option<u64>) -> Result<SyntheticSpec> {
    let mut spec: SyntheticSpec = io::read_json(path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct TrainReport {
    strategy: &'static str,
    bits: Vec<u32>,
    codebook_sizes: Vec<usize>,
    calibration: MseReport,
    projected_distortion: Vec<f64>,
    mean_error_norm: Vec<f64>,
}

pub fn run(cli: &Cli) -> Result<()> {
    let out = cli.global.out.as_deref();
    match &cli.command {
        Command::GenData { spec } => {
            require_file(spec)?;
            let dir = out.ok_or_else(|| Error::invalid_argument("gen-data needs --out DIR"))?;
            let spec = load_spec(spec, cli.global.seed)?;
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.display().to_string(),
                source: e,
            })?;
            let data = gen_synthetic(&spec)?;
            io::write_csv_matrix_file(&dir.join(CAL_FILE), &data.calibration)?;
            io::write_csv_matrix_file(&dir.join(TEST_FILE), &data.test)?;
            io::write_json(&dir.join(MODEL_FILE), &data.model)?;
            io::write_json(&dir.join(PARTITION_FILE), &data.partition)?;
            log::info!("wrote instance to {}", dir.display());
        }
        Command::Train {
            model,
            partition,
            cal,
            bits,
            strategy,
            restarts,
        } => {
            for p in [model, partition, cal] {
                require_file(p)?;
            }
            if let Some(o) = out {
                require_out_parent(o)?;
            }
            let model: LinearModel = io::read_json(model)?;
            let partition: FeaturePartition = io::read_json(partition)?;
            let cal = io::read_csv_matrix(cal)?;
            let cfg = TrainConfig::new(expand_bits(bits, partition.num_sensors())?)
                .with_baseline(cli.global.seed.unwrap_or(0), *restarts);
            let q = match strategy {
                Strategy::Distributed => train_distributed(&cal, &model, &partition, &cfg)?,
                Strategy::Agnostic => train_agnostic(&cal, &partition, &model, &cfg)?,
            };
            let report = TrainReport {
                strategy: match strategy {
                    Strategy::Distributed => "distributed",
                    Strategy::Agnostic => "agnostic",
                },
                bits: cfg.bits_per_sensor.clone(),
                codebook_sizes: q.codebooks().iter().map(|c| c.len()).collect(),
                calibration: evaluate_mse(&q, &cal)?,
                projected_distortion: q.projected_distortion(&cal)?,
                mean_error_norm: assumption1_diagnostic(&q, &cal)?,
            };
            let file = io::to_json_string(&CodebookFile::trained(q));
            match out {
                Some(p) => {
                    emit(Some(p), &file)?;
                    emit(None, &io::to_json_string(&report))?;
                }
                None => {
                    eprint!("{}", io::to_json_string(&report));
                    emit(None, &file)?;
                }
            }
        }
        Command::Adapt { codebook, bits } => {
            require_file(codebook)?;
            if let Some(o) = out {
                require_out_parent(o)?;
            }
            let file: CodebookFile = io::read_json(codebook)?;
            let full = file.full_rate().clone();
            let bits = expand_bits(bits, full.num_sensors())?;
            // Clamped budgets are reported on standard error by the logger.
            let q = adapt(&full, &bits)?;
            emit(out, &io::to_json_string(&CodebookFile::adapted(q, full)))?;
        }
        Command::Eval { codebook, test } => {
            require_file(codebook)?;
            require_file(test)?;
            let file: CodebookFile = io::read_json(codebook)?;
            let test = io::read_csv_matrix(test)?;
            let report = evaluate_mse(&file.quantizer, &test)?;
            emit(out, &io::to_json_string(&report))?;
        }
        Command::Simulate {
            codebook,
            schedule,
            stream,
        } => {
            for p in [codebook, schedule, stream] {
                require_file(p)?;
            }
            if let Some(o) = out {
                require_out_parent(o)?;
            }
            let file: CodebookFile = io::read_json(codebook)?;
            let schedule: RateSchedule = io::read_json(schedule)?;
            let stream = io::read_csv_matrix(stream)?;
            let transcript = run_session(file.full_rate(), &schedule, &stream)?;
            log::info!(
                "session MSE {:.6e} over {} steps, {} payload bits",
                transcript.mse(),
                transcript.steps.len(),
                transcript.total_bits()
            );
            let mut buf = Vec::new();
            transcript.write_csv(&mut buf)?;
            emit(out, std::str::from_utf8(&buf).expect("CSV output is UTF-8"))?;
        }
        Command::ReproduceFig2 { spec } => {
            require_file(spec)?;
            if let Some(o) = out {
                require_out_parent(o)?;
            }
            let spec = load_spec(spec, cli.global.seed)?;
            let table = run_figure2(&spec)?;
            emit(out, &table.to_csv_string()?)?;
        }
    }
    Ok(())
}
