//! `flextime` command-line pipeline: generate synthetic data, train the
//! classifier, explain it, score the explanations, tune explainer settings and
//! render the filter comparison demo.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "flextime", version, about = "Frequency-band mask explanations for time-series classifiers")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// JSON run configuration; missing sections take defaults.
    #[arg(long, global = true, env = "FLEX_CONFIG")]
    pub config: Option<PathBuf>,
    /// Replaces every component seed of the configuration.
    #[arg(long, global = true, env = "FLEX_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (defaults to the configuration, then all cores).
    #[arg(long, global = true, env = "FLEX_WORKERS")]
    pub workers: Option<usize>,
    /// Overwrite existing outputs.
    #[arg(long, global = true, env = "FLEX_FORCE")]
    pub force: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate train, validation and balanced test splits.
    Gen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the classifier on a generated dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain samples of one split with one method.
    Explain {
        #[arg(long)]
        method: String,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Number of samples (defaults to `metrics.samples`).
        #[arg(long)]
        limit: Option<usize>,
        /// Leave wall-clock durations out of the JSON.
        #[arg(long)]
        no_timing: bool,
        /// Skip the per-sample SVG figures.
        #[arg(long)]
        no_svg: bool,
    },
    /// Score explanations; repeat the three paths to aggregate over splits.
    Metrics {
        #[arg(long, required = true)]
        model: Vec<PathBuf>,
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[arg(long, required = true)]
        explanations: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-search explainer settings on the validation split.
    Tune {
        #[arg(long, default_value = "flextime")]
        method: String,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Demonstrations.
    Demo {
        #[command(subcommand)]
        demo: Demo,
    },
}

#[derive(Subcommand, Debug)]
pub enum Demo {
    /// Windowed FIR versus DFT-zeroing bandpass of equal length.
    Gibbs {
        /// Passband edges in Hz.
        #[arg(long, num_args = 2, value_names = ["LOW", "HIGH"], default_values_t = [200.0, 400.0])]
        band: Vec<f64>,
        #[arg(long, default_value_t = 257)]
        taps: usize,
        #[arg(long, default_value_t = 2000.0)]
        sample_rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
