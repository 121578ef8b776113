//! `skipnas`: connection search, final training and analysis over TU or
//! synthetic graph classification datasets.
//!
//! Exit status is 0 on success, 1 when a run fails and 2 for usage or
//! configuration errors.

mod analyze;
mod config;
mod dataset;
mod run;
mod search;
mod train;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use skipnas_core::ops::AggregationKind;
use skipnas_core::search::{HyperParams, OptimizerKind};
use skipnas_core::supernet::{Anneal, Preset, Variant};

use config::RunConfig;
use train::ArchSource;

/// Bad flags, config files or inputs; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "skipnas", version, about = "Search inter-layer connections of stacking GNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bi-level search per fold; writes fold<k>.arch and metrics.
    Search {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Tunes and trains an architecture per fold and prints `acc(std) [L<depth>]`.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// First WL iteration separating two graphs.
    Wl {
        #[arg(long, num_args = 2, value_names = ["A", "B"], required = true)]
        pair: Vec<String>,
        /// Graph index inside each dataset.
        #[arg(long, default_value_t = 0)]
        graph: usize,
        #[arg(long, default_value_t = 10)]
        max_iter: usize,
    },
    /// Longest ON path, counted in aggregation layers.
    Depth {
        #[arg(long)]
        arch: PathBuf,
    },
    /// Diameter histogram and average of a dataset.
    Diameter {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Final-layer smoothness and accuracy of a preset family per depth.
    Smooth {
        #[command(flatten)]
        run: RunArgs,
        /// GCN_stack, ResGCN or JK.
        #[arg(long, default_value = "GCN_stack")]
        family: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        eval_fold: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 0.0)]
        dropout: f64,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
    },
}

/// Dataset, folds, seed and output flags shared by the run commands.
#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// TU dataset name under the data directory, or a TU directory path.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Synthetic diameter trees as `diameter:count,...`.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long)]
    node_budget: Option<usize>,
    #[arg(long)]
    subsample: Option<usize>,
    /// Number of cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated folds to run.
    #[arg(long, value_delimiter = ',')]
    fold: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    parallel_folds: Option<usize>,
    #[arg(long)]
    aggregation: Option<AggregationKind>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    c: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    weight_lr: Option<f64>,
    #[arg(long)]
    alpha_lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    temperature_start: Option<f64>,
    #[arg(long)]
    temperature_end: Option<f64>,
    /// geometric, linear or constant.
    #[arg(long, value_parser = parse_anneal)]
    anneal: Option<Anneal>,
}

#[derive(Args)]
struct TrainArgs {
    /// Architecture document, or a search run directory with fold<k>.arch.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    arch: Option<PathBuf>,
    /// Hand-designed baseline such as `GCN_stack(4)`.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Fixes the hidden width instead of sampling it.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    weight_decay: Option<f64>,
}

fn parse_anneal(s: &str) -> std::result::Result<Anneal, String> {
    match s.to_ascii_lowercase().as_str() {
        "geometric" => Ok(Anneal::Geometric),
        "linear" => Ok(Anneal::Linear),
        "constant" => Ok(Anneal::Constant),
        _ => Err(format!("unknown schedule {s:?}")),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        set(&mut c.seed, self.seed);
        set(&mut c.aggregation, self.aggregation);
        set(&mut c.parallel_folds, self.parallel_folds);
        if self.out.is_some() {
            c.out = self.out;
        }
        let d = &mut c.data;
        if self.dataset.is_some() {
            d.dataset = self.dataset;
            d.synthetic = None;
        }
        if self.synthetic.is_some() {
            d.synthetic = self.synthetic;
            d.dataset = None;
        }
        if self.data_dir.is_some() {
            d.data_dir = self.data_dir;
        }
        if self.subsample.is_some() {
            d.subsample = self.subsample;
        }
        set(&mut d.node_budget, self.node_budget);
        set(&mut d.folds, self.folds);
        set(&mut d.fold, self.fold);
        Ok(c)
    }
}

impl SearchArgs {
    fn apply(self, c: &mut RunConfig) {
        let s = &mut c.search;
        set(&mut s.variant, self.variant);
        set(&mut s.b, self.b);
        set(&mut s.c, self.c);
        set(&mut s.hidden, self.hidden);
        set(&mut s.epochs, self.epochs);
        set(&mut s.batch_size, self.batch_size);
        set(&mut s.weight_lr, self.weight_lr);
        set(&mut s.alpha_lr, self.alpha_lr);
        set(&mut s.weight_decay, self.weight_decay);
        set(&mut s.temperature.start, self.temperature_start);
        set(&mut s.temperature.end, self.temperature_end);
        set(&mut s.temperature.anneal, self.anneal);
    }
}

impl TrainArgs {
    fn apply(&self, c: &mut RunConfig) {
        let t = &mut c.train;
        set(&mut t.trials, self.trials);
        set(&mut t.epochs, self.epochs);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.weight_decay, self.weight_decay);
        set(&mut t.hidden, self.hidden.map(|h| vec![h]));
        set(&mut t.dropout, self.dropout.map(|p| vec![p]));
        set(&mut t.optimizers, self.optimizer.map(|o| vec![o]));
        if let Some(lr) = self.lr {
            t.lr_min = lr;
            t.lr_max = lr;
        }
    }

    fn source(&self) -> ArchSource {
        match (&self.arch, self.preset) {
            (Some(p), _) => ArchSource::from_path(p),
            (None, Some(p)) => ArchSource::Preset(p),
            (None, None) => unreachable!("clap requires --arch or --preset"),
        }
    }
}

fn parse_family(s: &str) -> Result<Preset> {
    let spec = if s.contains('(') { s.to_string() } else { format!("{s}(1)") };
    spec.parse::<Preset>().map_err(|e| UsageError(e.to_string()).into())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Search { run, search } => {
            let mut cfg = run.resolve()?;
            search.apply(&mut cfg);
            search::run(&cfg)?;
        }
        Command::Train { run, train } => {
            let mut cfg = run.resolve()?;
            train.apply(&mut cfg);
            train::run(&cfg, &train.source())?;
        }
        Command::Analyze(a) => match a {
            AnalyzeCommand::Wl { pair, graph, max_iter } => println!("{}", analyze::wl(&pair[0], &pair[1], graph, max_iter)?),
            AnalyzeCommand::Depth { arch } => println!("{}", analyze::depth(&arch)?),
            AnalyzeCommand::Diameter { run } => print!("{}", analyze::diameter(&run.resolve()?)?),
            AnalyzeCommand::Smooth {
                run,
                family,
                depths,
                eval_fold,
                epochs,
                hidden,
                lr,
                dropout,
                batch_size,
            } => {
                let cfg = run.resolve()?;
                let hyper = HyperParams {
                    hidden,
                    dropout,
                    lr,
                    epochs,
                    batch_size,
                    ..HyperParams::default()
                };
                print!("{}", analyze::smooth(&cfg, parse_family(&family)?, &depths, &hyper, eval_fold)?);
            }
        },
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<skipnas_core::Error>() {
        Some(skipnas_core::Error::Config(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
