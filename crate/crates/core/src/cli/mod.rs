//! Command-line entry point: config loading, output layout and the five
//! pipeline commands.

mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{DensitySet, EgoTrainingSummary, EnsembleIndex, EvalSummary, Histogram, IndexEntry, MemberStatus, SweepRow};
pub use config::{load_config, parse_config, AnalysisConfig, BetaSweepConfig, EgoConfig, RunConfig};
pub use manifest::{RunManifest, BUILD_ID};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("training budget exhausted: {0}")]
    Budget(String),
    #[error("every ensemble member failed: {0}")]
    EnsembleFailed(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::EnsembleFailed(_) => 4,
            CliError::MissingArtifact(_) => 5,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "advscen", version, about = "Adversarial lane-change scenario generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `base_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overrides `output_dir`; otherwise `$ADVSCEN_OUTPUT_ROOT/<config stem>`.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Skip work whose artifacts are already complete.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the DQN ego in naturalistic traffic.
    TrainEgo(CommonArgs),
    /// Train the adversary ensemble against the configured ego.
    TrainAdversaries(CommonArgs),
    /// Monte-Carlo evaluation of the ego against the chosen traffic.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// `naturalistic`, `ensemble` or a member id such as `member-003`.
        #[arg(long, default_value = "ensemble")]
        adversary: String,
    },
    /// Cluster the trained ensemble by state distribution.
    Cluster(CommonArgs),
    /// Train and evaluate one ensemble per rationality weight.
    BetaSweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated β values overriding the config.
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::TrainEgo(c) | Command::TrainAdversaries(c) | Command::Cluster(c) => c,
            Command::Evaluate { common, .. } | Command::BetaSweep { common, .. } => common,
        }
    }
}

/// JSON schemas of the config and every JSON artifact, by file stem.
pub fn schemas() -> Vec<(&'static str, schemars::Schema)> {
    use schemars::schema_for;
    vec![
        ("run_config", schema_for!(RunConfig)),
        ("run_manifest", schema_for!(RunManifest)),
        ("ego_training", schema_for!(commands::EgoTrainingSummary)),
        ("ensemble_index", schema_for!(EnsembleIndex)),
        ("member_meta", schema_for!(crate::adversary::store::MemberMeta)),
        ("eval_summary", schema_for!(EvalSummary)),
        ("cluster_report", schema_for!(crate::analysis::report::ClusterReport)),
        ("densities", schema_for!(DensitySet)),
    ]
}

/// Resolved inputs shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: RunConfig,
    pub config_bytes: Vec<u8>,
    pub config_sha256: String,
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    pub resume: bool,
}

impl Context {
    pub fn from_args(args: &CommonArgs) -> Result<Self, CliError> {
        let (cfg, config_bytes) = load_config(&args.config)?;
        let out = match (&args.output_dir, &cfg.output_dir) {
            (Some(d), _) | (None, Some(d)) => d.clone(),
            (None, None) => {
                let root = std::env::var_os(config::OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| "runs".into());
                let stem = args.config.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "run".into());
                root.join(stem)
            }
        };
        let jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        Ok(Self {
            seed: args.seed.unwrap_or(cfg.base_seed),
            config_sha256: crate::artifact::sha256_hex(&config_bytes),
            cfg,
            config_bytes,
            jobs,
            out,
            resume: args.resume,
        })
    }
}

/// Execute a parsed command line and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = Context::from_args(cli.command.common()).and_then(|ctx| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(ctx.jobs)
            .build()
            .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))?;
        pool.install(|| match &cli.command {
            Command::TrainEgo(_) => commands::train_ego(&ctx),
            Command::TrainAdversaries(_) => commands::train_adversaries(&ctx),
            Command::Evaluate { adversary, .. } => commands::evaluate(&ctx, adversary),
            Command::Cluster(_) => commands::cluster(&ctx),
            Command::BetaSweep { betas, .. } => commands::beta_sweep(&ctx, betas.as_deref()),
        })
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parse `args` (including the program name) and run.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
