//! Batch pipeline for bimanual wrist-view data augmentation.
//!
//! Subcommands: `gen-demos` (synthetic demonstrations), `label-contacts`
//! (contact-phase labels), `augment` (k-interval replacement plus merge),
//! `train-denoiser` (the diffusion backend), `validate` (format and invariant
//! checks), and `stats` (CSV summaries).
//!
//! Exit codes: 0 success, 2 usage/config error, 3 runtime/data error.
//! Reproducible: identical inputs and seed produce identical outputs,
//! independent of `--workers`.

mod commands;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Usage or configuration problem; exit code 2.
    Config(String),
    /// Runtime or data problem; exit code 3.
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    LiftBall,
    PushBlock,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Depth,
    Ssim,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthArg {
    Reproject,
    Diffusion,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

#[derive(Parser, Debug)]
#[command(
    name = "bimaug",
    version,
    about = "Bimanual wrist-view data augmentation"
)]
struct Cli {
    /// Run seed; drives every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available parallelism). Outputs do not
    /// depend on this value.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log level; the BIMAUG_LOG environment variable overrides it.
    #[arg(long, global = true, value_enum, default_value = "warn")]
    log_level: LogLevel,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic bimanual demonstrations.
    GenDemos {
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Number of episodes.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label contact phases for every episode.
    LabelContacts {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace every k-th state with a perturbed, re-synthesized one and
    /// merge with the original dataset.
    Augment {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory holding per-episode label files from label-contacts.
        #[arg(long)]
        labels: PathBuf,
        /// TOML configuration (bounds, constraints, annealer, k, run_seed).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "reproject")]
        synth: SynthArg,
        /// Trained denoiser checkpoint, required for --synth diffusion.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Replacement interval override.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the pose-conditioned diffusion denoiser on a dataset.
    TrainDenoiser {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = 1e-3)]
        learning_rate: f64,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        #[arg(long, default_value_t = 5)]
        gap_min: usize,
        #[arg(long, default_value_t = 15)]
        gap_max: usize,
        /// Write the per-step loss curve CSV here.
        #[arg(long)]
        loss_out: Option<PathBuf>,
    },
    /// Check dataset format and invariants; exits 3 on violations.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Emit dataset statistics as CSV.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        /// Labels directory for phase statistics.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Augmentation report.csv for replacement statistics.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let level = match cli.log_level {
        LogLevel::Error => "error",
        LogLevel::Warn => "warn",
        LogLevel::Info => "info",
        LogLevel::Debug => "debug",
        LogLevel::Trace => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BIMAUG_LOG", level)).init();

    if let Some(workers) = cli.workers {
        if workers == 0 {
            eprintln!("configuration error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("runtime error: building thread pool: {e}");
            return ExitCode::from(3);
        }
    }

    let result = match cli.command {
        Command::GenDemos { task, n, out } => commands::gen_demos(task, n, cli.seed, &out),
        Command::LabelContacts {
            dataset,
            method,
            out,
        } => commands::label_contacts(&dataset, method, &out),
        Command::Augment {
            dataset,
            labels,
            config,
            synth,
            model,
            k,
            out,
        } => commands::augment(
            &dataset,
            &labels,
            config.as_deref(),
            synth,
            model.as_deref(),
            k,
            cli.seed,
            &out,
        ),
        Command::TrainDenoiser {
            dataset,
            out,
            steps,
            learning_rate,
            batch_size,
            gap_min,
            gap_max,
            loss_out,
        } => commands::train_denoiser(
            &dataset,
            &out,
            steps,
            learning_rate,
            batch_size,
            gap_min,
            gap_max,
            cli.seed,
            loss_out.as_deref(),
        ),
        Command::Validate { dataset } => commands::validate(&dataset),
        Command::Stats {
            dataset,
            labels,
            report,
            out,
        } => commands::stats(
            &dataset,
            labels.as_deref(),
            report.as_deref(),
            out.as_deref(),
        ),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
