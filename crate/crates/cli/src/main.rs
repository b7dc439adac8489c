//! `oncograph`: generate or ingest cohorts, inspect feature graphs and run
//! the thirteen-model benchmark.
//!
//! Exit codes: 0 success, 1 partial model failure, 2 configuration error,
//! 3 input parse error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oncograph::ingest::CancerType;

#[derive(Parser)]
#[command(name = "oncograph", version, about = "Cancer-type classification benchmark on phenotype/genotype feature graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort file.
    Generate(GenerateArgs),
    /// Merge genetic report texts with a phenotype table into a cohort file.
    Ingest(IngestArgs),
    /// Train and evaluate the selected models and write report files.
    Bench(BenchArgs),
    /// Print feature-graph statistics, optionally exporting nodes and edges.
    InspectGraph(InspectArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML file; only its `[synthetic]` section is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "cohort")]
    out: PathBuf,
    /// Generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Per-class patient count, e.g. `lung=5`. Repeatable.
    #[arg(long = "count", value_name = "CLASS=N", value_parser = config::parse_count)]
    counts: Vec<(CancerType, usize)>,
    /// Also write one report text per patient and a phenotype table.
    #[arg(long)]
    render_reports: bool,
}

#[derive(Args)]
struct IngestArgs {
    /// Directory of report texts (`*.txt`).
    #[arg(long)]
    reports: PathBuf,
    /// Phenotype table: `patient_id<TAB>cancer_type<TAB>term;term;...`.
    #[arg(long)]
    phenotypes: PathBuf,
    #[arg(long, default_value = "cohort")]
    out: PathBuf,
    #[arg(long)]
    pheno_threshold: Option<usize>,
    #[arg(long)]
    gene_threshold: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct InputArgs {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Line-delimited JSON cohort file.
    #[arg(long, conflicts_with_all = ["reports", "counts"])]
    cohort: Option<PathBuf>,
    /// Report-text directory; needs `--phenotypes`.
    #[arg(long, requires = "phenotypes", conflicts_with = "counts")]
    reports: Option<PathBuf>,
    #[arg(long, requires = "reports")]
    phenotypes: Option<PathBuf>,
    /// Synthetic per-class count override, e.g. `lung=5`. Repeatable.
    #[arg(long = "count", value_name = "CLASS=N", value_parser = config::parse_count)]
    counts: Vec<(CancerType, usize)>,
    #[arg(long)]
    pheno_threshold: Option<usize>,
    #[arg(long)]
    gene_threshold: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Single run seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed sweep, e.g. `1,2,3`.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated model keys; `all`, `gnn` and `baselines` select groups.
    #[arg(long)]
    models: Option<String>,
    /// Train, validation and test fractions, e.g. `0.7,0.1,0.2`.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
    /// Epoch budget for every GNN and the MLP.
    #[arg(long)]
    epochs: Option<usize>,
    /// `macro` or `micro`.
    #[arg(long)]
    averaging: Option<String>,
    /// Mark column maxima over all models instead of within each group.
    #[arg(long)]
    global_max: bool,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Also write `nodes.tsv`, `edges.tsv` and `vocabulary.tsv` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<oncograph::Error> for Failure {
    fn from(e: oncograph::Error) -> Self {
        use oncograph::Error as E;
        let code = match e {
            E::Config(_) | E::Usage(_) | E::Io(_) => 2,
            E::Parse { .. } | E::Json(_) | E::Data(_) => 3,
            E::Dimension(_) | E::Numeric(_) => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Bench(a) => commands::bench(a),
        Command::InspectGraph(a) => commands::inspect_graph(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
