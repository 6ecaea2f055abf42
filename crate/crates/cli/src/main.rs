use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use dgnn_cli::commands::{ablate, eval, export, sweep, train, validate};
use dgnn_cli::config::{Overrides, Settings};
use dgnn_cli::CliError;

#[derive(Parser)]
#[command(
    name = "dgnn",
    version,
    about = "Streaming dynamic-graph representation learning over timestamped edge events"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check an edge-stream file and print its statistics
    Validate {
        /// Edge-stream file: `src dst [weight] timestamp` per line
        data: PathBuf,
        /// Sort by timestamp instead of rejecting unsorted input
        #[arg(long)]
        sort: bool,
        /// Seconds per engine time unit (86400 reads timestamps as days)
        #[arg(long, default_value_t = 86_400.0)]
        time_unit_seconds: f64,
    },
    /// Train a model; writes model.ckpt and metrics.csv
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Node labels, required for --task nc
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Continue from a checkpoint (its settings win; only --epochs applies)
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint on one data split
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// train, valid, or test
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Use final-epoch parameters instead of the best validation epoch
        #[arg(long)]
        use_last: bool,
        /// Override the checkpoint's ranking features (projected|original)
        #[arg(long)]
        feature_mode: Option<String>,
        /// Also write per-pair ranks to ranks.csv for auditing
        #[arg(long)]
        dump_ranks: bool,
    },
    /// Train the full model and reduced variants, compare test metrics
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Comma-separated subset of ti,prop,att (default: all three)
        #[arg(long)]
        variants: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Train and evaluate once per propagation threshold
    SweepTau {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Comma-separated thresholds in days (default: 1,7,10,20..100)
        #[arg(long)]
        taus: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Write every node's feature vector from a checkpoint
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output file
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        use_last: bool,
    },
}

/// Tunables shared by the training-shaped commands. Every flag
/// overrides the matching config-file key.
#[derive(Args)]
struct Common {
    /// key=value config file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Embedding dimension d
    #[arg(long)]
    dim: Option<usize>,
    /// Propagation threshold in days
    #[arg(long)]
    tau: Option<f64>,
    /// Negative samples per positive event
    #[arg(long)]
    q: Option<usize>,
    /// Learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Events per minibatch
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// adam or sgd
    #[arg(long)]
    optimizer: Option<String>,
    /// lp (link prediction) or nc (node classification)
    #[arg(long)]
    task: Option<String>,
    /// Percent of visible nodes labeled for classification training
    #[arg(long)]
    labeled_fraction: Option<f64>,
    /// projected or original ranking features
    #[arg(long)]
    feature_mode: Option<String>,
    /// on or off
    #[arg(long)]
    time_intervals: Option<String>,
    /// on or off
    #[arg(long)]
    propagation: Option<String>,
    /// on or off
    #[arg(long)]
    attention: Option<String>,
    /// Seconds per engine time unit
    #[arg(long)]
    time_unit_seconds: Option<f64>,
    /// Sort unsorted input instead of rejecting it
    #[arg(long)]
    sort: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            dim: self.dim,
            tau: self.tau,
            q: self.q,
            lr: self.lr,
            batch: self.batch,
            epochs: self.epochs,
            seed: self.seed,
            optimizer: self.optimizer.clone(),
            task: self.task.clone(),
            labeled_fraction: self.labeled_fraction,
            feature_mode: self.feature_mode.clone(),
            time_intervals: self.time_intervals.clone(),
            propagation: self.propagation.clone(),
            attention: self.attention.clone(),
            time_unit_seconds: self.time_unit_seconds,
            sort: self.sort,
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Validate {
            data,
            sort,
            time_unit_seconds,
        } => {
            let report = validate::run(&data, sort, time_unit_seconds)?;
            report.print();
            Ok(())
        }
        Cmd::Train {
            data,
            labels,
            out,
            resume,
            common,
        } => train::run(&train::TrainArgs {
            data: &data,
            labels: labels.as_deref(),
            out_dir: &out,
            config: common.config.as_deref(),
            resume: resume.as_deref(),
            flags: &common.overrides(),
        }),
        Cmd::Eval {
            checkpoint,
            data,
            labels,
            split,
            out,
            use_last,
            feature_mode,
            dump_ranks,
        } => eval::run(&eval::EvalArgs {
            checkpoint: &checkpoint,
            data: &data,
            labels: labels.as_deref(),
            split: &split,
            out_dir: &out,
            use_last,
            feature_mode: feature_mode.as_deref(),
            dump_ranks,
        }),
        Cmd::Ablate {
            data,
            out,
            variants,
            common,
        } => {
            let settings = Settings::resolve(common.config.as_deref(), &common.overrides())?;
            ablate::run(&data, &out, &variants, &settings)
        }
        Cmd::SweepTau {
            data,
            out,
            taus,
            common,
        } => {
            let settings = Settings::resolve(common.config.as_deref(), &common.overrides())?;
            sweep::run(&data, &out, &taus, &settings)
        }
        Cmd::Export {
            checkpoint,
            data,
            out,
            use_last,
        } => export::run(&checkpoint, &data, &out, use_last),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
