mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use logvec_core::alteration::{AlterationKind, Severity};
use logvec_core::detector::Label;
use logvec_core::nn::Objective;

/// Log anomaly detection with template embeddings and Bi-LSTM sequence models.
#[derive(Debug, Parser)]
#[command(name = "logvec", version)]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a log file into an events file and a templates file.
    Parse {
        #[arg(long = "in")]
        input: PathBuf,
        /// Events file: `line_no <TAB> template_id <TAB> variables`.
        #[arg(long)]
        out: PathBuf,
        /// Templates file; defaults to `<out stem>.templates.tsv` beside the events.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Also save the full parser state as JSON.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Key=value settings file (`parser.*`, `data.*`).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Embed a templates file with the hashed-token embedder.
    EmbedFallback {
        #[arg(long)]
        templates: PathBuf,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a detector on normal lines and write it to a directory.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "classification")]
        objective: Objective,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recalibrate a regression detector's threshold on normal lines.
    Calibrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        q: Option<f64>,
    },
    /// Score a log file with a trained detector.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Verdicts file: `line_no <TAB> label <TAB> score <TAB> reason`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Alter log lines, either a sampled share with one operator or a whole
    /// second dataset with random operators.
    Alter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(
            long,
            conflicts_with = "severity",
            required_unless_present = "severity"
        )]
        kind: Option<AlterationKind>,
        #[arg(long, default_value_t = 1)]
        intensity: usize,
        /// Percent of lines (semantic) or segments (sequential) to alter.
        #[arg(long, default_value_t = 10.0)]
        fraction: f64,
        #[arg(long, default_value_t = 1)]
        block_len: usize,
        #[arg(long, default_value_t = 12)]
        segment: usize,
        /// Ground truth for the input lines.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Label given to altered lines.
        #[arg(long, default_value = "anomaly")]
        label: Label,
        /// Where to write the labels of the altered stream.
        #[arg(long)]
        labels_out: Option<PathBuf>,
        /// Build a second dataset at this severity instead.
        #[arg(long)]
        severity: Option<Severity>,
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Train on system A, then evaluate on an updated system B zero-shot and
    /// after few-shot fine-tuning.
    Transfer {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Ground truth for the target lines.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precision, recall and F1 of a verdicts file against labels.
    Eval {
        #[arg(long)]
        verdicts: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment spec end to end and emit its report.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-event verdict files.
        #[arg(long)]
        verdicts_dir: Option<PathBuf>,
    },
    /// Write the built-in synthetic corpus: train.log, test.log, labels.tsv.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3000)]
        train_events: usize,
        #[arg(long, default_value_t = 3000)]
        test_events: usize,
        #[arg(long, default_value_t = 5.0)]
        noise_pct: f64,
        #[arg(long, default_value_t = 2.0)]
        anomaly_pct: f64,
    },
    /// Label lines of a public dataset from its list of anomalous ids.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        /// One identifier per line.
        #[arg(long)]
        ids: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
