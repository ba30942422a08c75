//! `setembed`: one binary wiring ingestion, training, hyperparameter search,
//! benchmark generation, querying, evaluation and completeness analysis into
//! reproducible runs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! divergence.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use setembed::checkpoint::CheckpointFormat;
use setembed::observations::MatrixKind;
use setembed::training::ModelKind;
use setembed::Error;

#[derive(Parser)]
#[command(name = "setembed", version, about = "Set-theoretic embeddings of item-attribute data")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// RNG seed; overrides the seed in config files when given
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel scoring (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Payload format for produced artifacts
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Tsv,
    Binary,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Groundtruth,
    Noisy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Vector,
    Box,
}

impl From<ModelArg> for ModelKind {
    fn from(value: ModelArg) -> Self {
        match value {
            ModelArg::Vector => ModelKind::Vector,
            ModelArg::Box => ModelKind::Box,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Probabilistic,
    Algebraic,
    Box,
}

impl StrategyArg {
    fn as_str(self) -> &'static str {
        match self {
            StrategyArg::Probabilistic => "probabilistic",
            StrategyArg::Algebraic => "algebraic",
            StrategyArg::Box => "box",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a raw pair TSV into the internal catalog + matrix format
    Ingest {
        /// `item<TAB>attribute[<TAB>weight]` lines, weight defaults to 1
        #[arg(long)]
        observations: PathBuf,
        /// `child<TAB>parent` attribute hierarchy for ground-truth expansion
        #[arg(long)]
        hierarchy: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Writes `<prefix>.catalog.tsv` and `<prefix>.matrix.tsv`
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Train one model from a config file
    Train {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        /// Flat key=value training config
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: ModelArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random hyperparameter search selected by precision@1 on singletons
    Search {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        /// Grid file: `key=v1,v2,...` candidate lists plus `trials=N`
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, value_enum)]
        kind: ModelArg,
        /// Benchmark JSONL supplying singleton validation queries
        #[arg(long)]
        val_benchmark: PathBuf,
        /// Fraction of singletons held out for validation
        #[arg(long, default_value_t = 0.2)]
        val_split: f64,
        /// Validate on every singleton query instead of a split
        #[arg(long)]
        val_all: bool,
        /// Writes `<prefix>.ckpt`, `<prefix>.config`, `<prefix>.trials.tsv`
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Rank items for one query against a checkpoint
    Query {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(short, default_value_t = 10)]
        k: usize,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Query text, e.g. `comedy & !romance`
        text: String,
    },
    /// Generate a compositional-query benchmark from ground truth
    Genbench {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.5)]
        lift_min: f64,
        #[arg(long, default_value_t = 0.8)]
        contain_max: f64,
        #[arg(long, default_value_t = 10)]
        min_result: usize,
        /// Defaults to a quarter of the item count
        #[arg(long)]
        max_result: Option<usize>,
    },
    /// Evaluate methods on a benchmark with precision@k
    Eval {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        /// Noisy matrix enabling the lookup baseline
        #[arg(long)]
        lookup_matrix: Option<PathBuf>,
        #[arg(long)]
        vector_checkpoint: Option<PathBuf>,
        #[arg(long)]
        box_checkpoint: Option<PathBuf>,
        /// Comma-separated precision cutoffs
        #[arg(long, default_value = "1,10,20,50", value_delimiter = ',')]
        ks: Vec<usize>,
        /// Also write per-query precision rows
        #[arg(long)]
        details: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate annotation completeness from two independent sources
    Completeness {
        /// Ground-truth pair TSV
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long)]
        hierarchy: Option<PathBuf>,
        /// Noisy pair TSV sharing the item namespace
        #[arg(long)]
        noisy: PathBuf,
        #[arg(long, default_value_t = 5)]
        min_overlap: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report benchmark task counts and, with ground truth, mean result ratios
    Benchstats {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

fn checkpoint_format(format: Format) -> Result<CheckpointFormat, Error> {
    match format {
        Format::Text => Ok(CheckpointFormat::Text),
        Format::Binary => Ok(CheckpointFormat::Binary),
        Format::Tsv => Err(Error::InvalidConfig(
            "checkpoints support --format text or binary".into(),
        )),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(threads) = cli.global.threads {
        // ignore failure when a pool already exists (tests set one up)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let seed = cli.global.seed;
    match cli.command {
        Command::Ingest {
            observations,
            hierarchy,
            kind,
            out_prefix,
        } => commands::ingest(
            &observations,
            hierarchy.as_deref(),
            match kind {
                KindArg::Groundtruth => MatrixKind::GroundTruth,
                KindArg::Noisy => MatrixKind::Noisy,
            },
            &out_prefix,
            seed.unwrap_or(0),
        ),
        Command::Train {
            matrix,
            catalog,
            config,
            kind,
            out,
        } => commands::train(
            &matrix,
            &catalog,
            &config,
            kind.into(),
            &out,
            checkpoint_format(cli.global.format)?,
            seed,
        ),
        Command::Search {
            matrix,
            catalog,
            grid,
            kind,
            val_benchmark,
            val_split,
            val_all,
            out_prefix,
        } => commands::search(
            &matrix,
            &catalog,
            &grid,
            kind.into(),
            &val_benchmark,
            val_split,
            val_all,
            &out_prefix,
            checkpoint_format(cli.global.format)?,
            seed.unwrap_or(0),
        ),
        Command::Query {
            checkpoint,
            catalog,
            k,
            strategy,
            text,
        } => commands::query(&checkpoint, &catalog, &text, k, strategy.as_str()),
        Command::Genbench {
            matrix,
            catalog,
            out,
            lift_min,
            contain_max,
            min_result,
            max_result,
        } => commands::genbench(
            &matrix,
            &catalog,
            &out,
            lift_min,
            contain_max,
            min_result,
            max_result,
            seed.unwrap_or(0),
        ),
        Command::Eval {
            benchmark,
            catalog,
            lookup_matrix,
            vector_checkpoint,
            box_checkpoint,
            ks,
            details,
            out,
        } => commands::eval(
            &benchmark,
            &catalog,
            lookup_matrix.as_deref(),
            vector_checkpoint.as_deref(),
            box_checkpoint.as_deref(),
            &ks,
            details,
            &out,
            seed.unwrap_or(0),
        ),
        Command::Completeness {
            ground_truth,
            hierarchy,
            noisy,
            min_overlap,
            out,
        } => commands::completeness(
            &ground_truth,
            hierarchy.as_deref(),
            &noisy,
            min_overlap,
            &out,
            seed.unwrap_or(0),
        ),
        Command::Benchstats {
            benchmark,
            matrix,
            catalog,
        } => commands::benchstats(&benchmark, matrix.as_deref(), catalog.as_deref()),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_)
        | Error::UnsupportedTransform { .. }
        | Error::LossTransformMismatch { .. } => 1,
        Error::Diverged(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
