use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

const EXIT_CODES: &str = "Exit codes: 0 success, 2 invalid input (bad file, flag or data), \
                          3 numerical failure (e.g. an approximation kept no component).";

#[derive(Debug, Parser)]
#[command(name = "stabenc", version, about = "Amplitude encoding and stabilizer-code classifiers", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// Master seed for splits, shots and optimizer perturbations
    #[arg(long, global = true, env = "STABENC_SEED")]
    pub seed: Option<u64>,
    /// Directory for relative output paths
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (default: available parallelism; 1 runs serially)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Exact amplitude encoding of a PGM image
    EncodeExact(EncodeExactArgs),
    /// Recursive approximate encoding of a PGM image
    EncodeRasa(EncodeRasaArgs),
    /// Train a perceptron or two-layer network on two digits
    Train(TrainArgs),
    /// Evaluate a trained model on the held-out split
    Eval(EvalArgs),
    /// Replay a run from its saved configuration
    Rerun { config: PathBuf },
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EncodeExactArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Reconstructed image (P2)
    #[arg(long)]
    pub out: PathBuf,
    /// Depth report (JSON)
    #[arg(long)]
    pub report: PathBuf,
    /// Initial block scale used when evaluating the exact-depth formula
    #[arg(long, default_value_t = 2)]
    pub qin: usize,
    #[arg(long, default_value_t = stabenc::encode::DEFAULT_EPSILON)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Shot,
    Exact,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EncodeRasaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub alpha: u32,
    /// Significant figures kept per amplitude
    #[arg(long, default_value_t = 2)]
    pub p: u32,
    /// Shots per approximation call; `rule` uses q^alpha * 10^(2p) per level
    #[arg(long, default_value = "40000")]
    pub chi: String,
    #[arg(long, default_value_t = 2)]
    pub qin: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Shot)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = stabenc::encode::DEFAULT_EPSILON)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelArg {
    Qp,
    Qnn2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    NelderMead,
    CoordinateDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoaderArg {
    /// Write normalized pixels straight into the statevector
    Inject,
    /// Prepare each image with the exact encoding circuit
    ExactCircuit,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Header-less CSV: 64 pixel columns and a label column
    #[arg(long)]
    pub data: PathBuf,
    /// Digit pair `a,b`; `a` becomes label 0 and `b` label 1
    #[arg(long, default_value = "0,1")]
    pub digits: String,
    /// Training fraction
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long, value_enum, default_value_t = LoaderArg::Inject)]
    pub loader: LoaderArg,
}

impl DataArgs {
    pub fn digit_pair(&self) -> Result<(u8, u8)> {
        let parts: Vec<&str> = self.digits.split(',').map(str::trim).collect();
        let [a, b] = parts.as_slice() else {
            bail!(
                "--digits expects two comma-separated digits, got `{}`",
                self.digits
            );
        };
        let parse = |s: &str| -> Result<u8> {
            let d: u8 = s.parse().with_context(|| format!("`{s}` is not a digit"))?;
            if d > 9 {
                bail!("digit {d} outside 0..=9");
            }
            Ok(d)
        };
        Ok((parse(a)?, parse(b)?))
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[command(flatten)]
    pub data: DataArgs,
    /// Model file (JSON); the trace goes next to it as `<stem>.trace.csv`
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::NelderMead)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub ftol: f64,
    /// Initial simplex edge / coordinate step (radians)
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    #[arg(long, default_value_t = 2)]
    pub restarts: usize,
    /// Half-width of the seeded uniform perturbation of the zero start
    #[arg(long, default_value_t = 0.0)]
    pub perturb: f64,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Metrics file (JSON)
    #[arg(long)]
    pub out: PathBuf,
    /// Optional PCA embedding of the test split (CSV)
    #[arg(long)]
    pub pca: Option<PathBuf>,
}

/// Subcommand with every path resolved, as stored next to the outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    EncodeExact(EncodeExactArgs),
    EncodeRasa(EncodeRasaArgs),
    Train(TrainArgs),
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    #[serde(flatten)]
    pub command: Command,
}

fn under(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

impl RunConfig {
    pub fn resolve(cli: Cli) -> Result<Self> {
        let command = match cli.command {
            CliCommand::Rerun { config } => {
                let text = std::fs::read_to_string(&config)
                    .with_context(|| format!("reading run configuration {}", config.display()))?;
                let mut cfg: RunConfig = serde_json::from_str(&text)
                    .with_context(|| format!("parsing run configuration {}", config.display()))?;
                if let Some(t) = cli.global.threads {
                    cfg.threads = Some(t);
                }
                return Ok(cfg);
            }
            CliCommand::EncodeExact(a) => Command::EncodeExact(a),
            CliCommand::EncodeRasa(a) => Command::EncodeRasa(a),
            CliCommand::Train(a) => Command::Train(a),
            CliCommand::Eval(a) => Command::Eval(a),
        };
        let output_dir = cli.global.output_dir.unwrap_or_else(|| PathBuf::from("."));
        let command = match command {
            Command::EncodeExact(mut a) => {
                a.out = under(&output_dir, &a.out);
                a.report = under(&output_dir, &a.report);
                Command::EncodeExact(a)
            }
            Command::EncodeRasa(mut a) => {
                a.out = under(&output_dir, &a.out);
                a.report = under(&output_dir, &a.report);
                Command::EncodeRasa(a)
            }
            Command::Train(mut a) => {
                a.out = under(&output_dir, &a.out);
                Command::Train(a)
            }
            Command::Eval(mut a) => {
                a.out = under(&output_dir, &a.out);
                a.pca = a.pca.map(|p| under(&output_dir, &p));
                Command::Eval(a)
            }
        };
        Ok(RunConfig {
            seed: cli.global.seed.unwrap_or(0),
            output_dir,
            threads: cli.global.threads,
            command,
        })
    }

    /// Main output file of the run.
    pub fn primary_output(&self) -> &Path {
        match &self.command {
            Command::EncodeExact(a) => &a.out,
            Command::EncodeRasa(a) => &a.out,
            Command::Train(a) => &a.out,
            Command::Eval(a) => &a.out,
        }
    }

    /// `<primary output>.config.json`
    pub fn config_path(&self) -> PathBuf {
        let mut name = self.primary_output().as_os_str().to_owned();
        name.push(".config.json");
        PathBuf::from(name)
    }
}
