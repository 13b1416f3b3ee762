use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use avs_core::dataset::{DEFAULT_FRAME_SPACING, DEFAULT_TARGET_FRAMES};
use avs_core::engine::{DEFAULT_ALPHA, DEFAULT_K};
use avs_core::eval::DEFAULT_DEPTH;

/// Concept-bank construction, indexing, search and evaluation for ad-hoc
/// video search.
///
/// File formats:
///   .trees.jsonl   {"id": <sentence id>, "tree": "<bracketed parse>"} per line
///   bank (TSV)     "#avs-bank v1 min_freq=<k> n=<n>" then id, surface, freq, kinds
///   AVSV           binary dense store: "AVSV", u16 version, u32 dim, u64 count, records
///   sparse JSONL   {"id": <item id>, "w": {"<bank id>": weight, ...}} per line
///   run            TREC 6 columns: query_id Q0 item_id rank score tag
///   qrels          query_id stratum_id item_id judgment(0|1)
///   strata         query_id stratum_id pool_size sampled_size
///   membership     query_id stratum_id item_id
///
/// Exit status: 0 on success, 1 on usage errors, 2 on data errors.
#[derive(Debug, Parser)]
#[command(name = "avs", version, verbatim_doc_comment)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build, inspect and apply concept banks.
    #[command(subcommand)]
    Bank(BankCommand),
    /// Build a search index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Rank the indexed corpus for each query and write a TREC run file.
    Search(SearchArgs),
    /// Score run files against qrels (xinfAP, mAP, R@K, MedR).
    Eval(EvalArgs),
    /// Caption-corpus utilities.
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Debug, Subcommand)]
pub enum BankCommand {
    /// Count concepts in parse trees and keep those seen in at least --min-freq sentences.
    Build(BankBuildArgs),
    /// Print bank size, phrase/word split and phrase frequency bands.
    Stats(BankStatsArgs),
    /// Turn parse trees into sparse concept vectors over a bank.
    Vectorize(BankVectorizeArgs),
}

#[derive(Debug, Args)]
pub struct BankBuildArgs {
    /// Parse trees (.trees.jsonl); repeat for several files.
    #[arg(long, required = true)]
    pub trees: Vec<PathBuf>,
    /// Keep concepts with sentence frequency >= this.
    #[arg(long, default_value_t = 20)]
    pub min_freq: u64,
    /// Normalization config (key = value lines); defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output bank (TSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Count in this many shards; the bank does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub shards: usize,
}

#[derive(Debug, Args)]
pub struct BankStatsArgs {
    /// Bank (TSV).
    #[arg(long)]
    pub bank: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BankVectorizeArgs {
    /// Parse trees (.trees.jsonl).
    #[arg(long)]
    pub trees: PathBuf,
    /// Bank (TSV).
    #[arg(long)]
    pub bank: PathBuf,
    /// Normalization config; defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus JSONL mapping caption ids (tree ids) to videos. When given, one
    /// unit-norm vector per video is built from its captions; otherwise one
    /// vector per tree.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Per-tree weighting (ignored with --corpus, which sums term frequencies).
    #[arg(long, value_enum, default_value_t = Weighting::Tf)]
    pub weighting: Weighting,
    /// Output sparse store (JSONL).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Combine a dense store and/or a sparse store with a bank into an index file.
    Build(IndexBuildArgs),
}

#[derive(Debug, Args)]
pub struct IndexBuildArgs {
    /// Item embeddings (AVSV).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Item concept vectors (sparse JSONL).
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    /// Bank (TSV) the concept ids refer to.
    #[arg(long)]
    pub bank: PathBuf,
    /// Keep only the M largest weights of each concept vector.
    #[arg(long)]
    pub top_m: Option<usize>,
    /// Output index.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Concept,
    Embedding,
    Fusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Weighting {
    Binary,
    Tf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Index file.
    #[arg(long)]
    pub index: PathBuf,
    /// Query parse trees (.trees.jsonl); ids become query ids.
    #[arg(long)]
    pub queries: PathBuf,
    /// Query embeddings (AVSV), keyed by query id.
    #[arg(long)]
    pub query_embeddings: Option<PathBuf>,
    /// Query concept vectors (sparse JSONL); overrides vectors derived from the trees.
    #[arg(long)]
    pub query_concepts: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Concept)]
    pub mode: Mode,
    /// Embedding weight in fusion mode.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Search length.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Query-side weighting of tree-derived concept vectors.
    #[arg(long, value_enum, default_value_t = Weighting::Tf)]
    pub weighting: Weighting,
    /// Normalization config for query trees; defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run tag (last run-file column).
    #[arg(long, default_value = "avs")]
    pub tag: String,
    /// Output run file.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; output does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run file.
    #[arg(long)]
    pub runs: PathBuf,
    /// Qrels.
    #[arg(long)]
    pub qrels: PathBuf,
    /// Strata sidecar; without it every stratum counts as fully judged.
    #[arg(long)]
    pub strata: Option<PathBuf>,
    /// Stratum membership lists (needed for sampled strata).
    #[arg(long, requires = "strata")]
    pub membership: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    pub depth: usize,
    /// Comma-separated subset of xinfap,map,recall,medr.
    #[arg(long, default_value = "xinfap,map,recall,medr")]
    pub metrics: String,
    /// Also print per-query values.
    #[arg(long)]
    pub per_query: bool,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; output does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Video, caption and token counts of a corpus.
    Stats(DatasetStatsArgs),
    /// Frame timestamps for a video of the given duration.
    Frames(FramesArgs),
    /// Seeded train/validation split by video id.
    Manifest(ManifestArgs),
}

#[derive(Debug, Args)]
pub struct DatasetStatsArgs {
    /// Corpus JSONL: {"video_id", "duration", "captions": [{"caption_id", "text", "frame_time", "origin"}]}.
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Args)]
pub struct FramesArgs {
    /// Video duration in seconds.
    #[arg(long)]
    pub duration: f64,
    /// Target spacing in seconds.
    #[arg(long, default_value_t = DEFAULT_FRAME_SPACING)]
    pub spacing: f64,
    /// Maximum number of frames.
    #[arg(long, default_value_t = DEFAULT_TARGET_FRAMES)]
    pub frames: usize,
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    /// Corpus JSONL.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Fraction of videos assigned to training.
    #[arg(long, default_value_t = 0.8)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving train.txt and val.txt.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<commands::UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
