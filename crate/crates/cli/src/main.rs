mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Blog event-log analytics: bipartite networks, temporal statistics and
/// spectral communities.
#[derive(Debug, Parser)]
#[command(name = "blogspace", version, propagate_version = true)]
pub struct Cli {
    /// Optional key=value file; its entries act as flags placed before any
    /// given on the command line.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a log, optionally filter it and write it back canonically.
    IngestValidate(IngestArgs),
    /// Build the bipartite network, degree and commons distributions, and the user projection.
    NetBuild(NetArgs),
    /// Distribution of inter-event intervals with a power-law fit.
    StatsIntervals(IntervalArgs),
    /// Activity time series of one user or post.
    StatsActivity(SeriesArgs),
    /// Fluctuation scaling of every user's (or post's) activity series.
    StatsScaling(ScalingArgs),
    /// Periodogram of one activity series.
    StatsSpectrum(SeriesArgs),
    /// Response-time distribution with a q-exponential fit.
    StatsResponse(ResponseArgs),
    /// Spectral communities of the user projection.
    Communities(CommunityArgs),
    /// Generate a synthetic log with planted groups.
    Synth(SynthArgs),
    /// Summarize the artifacts in a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Jsonl,
    Tsv,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Event log (JSON lines or TSV).
    #[arg(short, long, value_name = "PATH")]
    pub input: PathBuf,
    /// Log format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Drop unresolvable comments instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub min_comments: Option<usize>,
    #[arg(long)]
    pub max_comments: Option<usize>,
    /// Start of the time window (minutes, inclusive).
    #[arg(long)]
    pub window_start: Option<u64>,
    /// End of the time window (minutes, exclusive).
    #[arg(long)]
    pub window_end: Option<u64>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct IngestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Write the (filtered) log here.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Format of the written log.
    #[arg(long, value_enum, default_value = "jsonl")]
    pub out_format: Format,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct NetArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory.
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,
    /// Collapse comments into their root post.
    #[arg(long)]
    pub flatten: bool,
    /// Also build the weighted user-post network of posts with at least this many comments.
    #[arg(long)]
    pub min_comments: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitRange {
    /// Lower end of the power-law fit range (default: median).
    #[arg(long)]
    pub fit_min: Option<f64>,
    /// Upper end of the power-law fit range (default: 99th percentile).
    #[arg(long)]
    pub fit_max: Option<f64>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct IntervalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory.
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,
    #[command(flatten)]
    pub fit: FitRange,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SeriesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory.
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,
    /// User id, or post id with --post.
    #[arg(long)]
    pub owner: String,
    /// Treat the owner as a post (series of comments received).
    #[arg(long)]
    pub post: bool,
    /// Bin width in minutes (default 1440 for users, 60 for posts).
    #[arg(long)]
    pub twin: Option<u64>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory.
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,
    /// Use post series instead of user series.
    #[arg(long)]
    pub posts: bool,
    /// Bin width in minutes (default 1440 for users, 60 for posts).
    #[arg(long)]
    pub twin: Option<u64>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ResponseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory.
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CommunityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory.
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,
    /// Collapse comments into their root post before projecting.
    #[arg(long)]
    pub flatten: bool,
    /// Analyse the weighted user-post network of posts with at least this many comments.
    #[arg(long)]
    pub min_comments: Option<usize>,
    /// Number of eigenpairs to compute.
    #[arg(long, default_value_t = 10)]
    pub eigs: usize,
    /// Eigenvalues scanned for the gap (default: all computed).
    #[arg(long)]
    pub scan: Option<usize>,
    /// Use this many communities instead of the gap rule.
    #[arg(long)]
    pub k: Option<usize>,
    /// Scatter dimensions (2 or 3).
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub dims: u8,
    /// Absolute row-norm threshold for the central ring (default 1e-3 of the largest).
    #[arg(long)]
    pub ring_eps: Option<f64>,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Sampler {
    Pareto,
    Exponential,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActivityKind {
    Uniform,
    Loguniform,
    Pareto,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TimingKind {
    User,
    Post,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    /// Output log path.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Ground-truth TSV path (default: <output>.truth.tsv).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: Format,
    #[arg(long, default_value_t = 4)]
    pub groups: usize,
    /// Total users, split evenly over the groups.
    #[arg(long, default_value_t = 400)]
    pub users: usize,
    #[arg(long, default_value_t = 20)]
    pub posts_per_group: usize,
    #[arg(long, default_value_t = 0.95)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.05)]
    pub p_out: f64,
    #[arg(long, value_enum, default_value = "exponential")]
    pub interevent: Sampler,
    /// Pareto density exponent.
    #[arg(long, default_value_t = 1.5)]
    pub alpha: f64,
    /// Pareto lower cutoff in minutes.
    #[arg(long, default_value_t = 10.0)]
    pub x_min: f64,
    /// Exponential rate per minute.
    #[arg(long, default_value_t = 1.0 / 720.0)]
    pub rate: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    pub activity: ActivityKind,
    /// Decades spanned by log-uniform activity.
    #[arg(long, default_value_t = 2.0)]
    pub spread: f64,
    /// Survival exponent of Pareto activity.
    #[arg(long, default_value_t = 1.5)]
    pub tail: f64,
    #[arg(long, default_value_t = 1.55)]
    pub q: f64,
    #[arg(long, default_value_t = 60.0)]
    pub t_star: f64,
    #[arg(long, default_value_t = 0.2)]
    pub reply_prob: f64,
    #[arg(long, value_enum, default_value = "user")]
    pub timing: TimingKind,
    /// Horizon in minutes.
    #[arg(long, default_value_t = 30 * 1440)]
    pub horizon: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ReportArgs {
    /// Run directory holding artifacts.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Report path (default: <input>/report.md).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match commands::run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
