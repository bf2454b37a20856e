use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use drcfs_cli::config::{Command, RunConfig};
use drcfs_cli::{commands, CliError, OnMissing};
use drcfs_core::dgp::{MixtureComponent, Transform};
use drcfs_core::{FeatureMap, ForestSpec, LearnerSpec, LinearSpec, ScoreConvention};

#[derive(Parser, Debug)]
#[command(name = "drcfs", version, about = "Doubly robust causal feature selection")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Sample a random causal graph and write data.csv + ground_truth.json.
    Simulate(Common),
    /// Select the direct causes of the outcome column of a CSV file.
    Select(Common),
    /// Replicate simulate -> select -> score over a grid of settings.
    Benchmark(Common),
    /// Check the oracle identities on discrete models.
    OracleCheck(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, value_parser = ["linear", "forest"])]
    learner: Option<String>,
    /// identity or poly:<degree>
    #[arg(long)]
    map: Option<String>,
    #[arg(long, value_parser = ["eq3", "paper"])]
    convention: Option<String>,
    /// Output file (select, oracle-check) or directory (simulate, benchmark).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "DRCFS_THREADS")]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    on_missing: Option<OnMissing>,
    #[arg(long)]
    allow_hidden_parents: bool,
    /// Input CSV (select) or discrete model JSON (oracle-check).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Outcome column name or zero-based index.
    #[arg(long)]
    outcome: Option<String>,
    #[arg(long)]
    no_header: bool,
    /// Ground-truth JSON to score the selection against.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p_c: Option<f64>,
    #[arg(long)]
    p_h: Option<f64>,
    /// Use a single transform family (linear, f1..f7, ...).
    #[arg(long)]
    transform: Option<String>,
    /// Record wall-clock fields as 0 for byte-reproducible artifacts.
    #[arg(long)]
    deterministic: bool,
}

fn resolve(command: Command, flags: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.command = Some(command);
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.k {
        cfg.drcfs.k = v;
    }
    if let Some(v) = flags.q {
        cfg.drcfs.q = v;
    }
    let map = flags
        .map
        .as_deref()
        .map(|s| FeatureMap::parse(s).map_err(|e| CliError::Usage(e.to_string())))
        .transpose()?;
    if let Some(kind) = &flags.learner {
        let current = cfg.drcfs.learner.map().clone();
        cfg.drcfs.learner = match kind.as_str() {
            "forest" => LearnerSpec::Forest(ForestSpec::default()),
            _ => LearnerSpec::Linear(LinearSpec::default()),
        }
        .with_map(current);
    }
    if let Some(map) = map {
        cfg.drcfs.learner = cfg.drcfs.learner.clone().with_map(map);
    }
    if let Some(c) = &flags.convention {
        cfg.drcfs.convention = ScoreConvention::parse(c).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if flags.out.is_some() {
        cfg.out = flags.out.clone();
    }
    if flags.threads.is_some() {
        cfg.threads = flags.threads;
    }
    if let Some(v) = flags.on_missing {
        cfg.ingest.on_missing = v;
    }
    if flags.allow_hidden_parents {
        cfg.dgp.allow_hidden_parents = true;
    }
    if flags.input.is_some() {
        cfg.input = flags.input.clone();
    }
    if let Some(v) = &flags.outcome {
        cfg.ingest.outcome = v.clone();
    }
    if flags.no_header {
        cfg.ingest.has_header = false;
    }
    if flags.truth.is_some() {
        cfg.truth = flags.truth.clone();
    }
    if let Some(v) = flags.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = flags.m {
        cfg.dgp.m = v;
    }
    if let Some(v) = flags.n {
        cfg.dgp.n = v;
    }
    if let Some(v) = flags.p_c {
        cfg.dgp.p_c = v;
    }
    if let Some(v) = flags.p_h {
        cfg.dgp.p_h = v;
    }
    if let Some(t) = &flags.transform {
        let family = Transform::parse(t).ok_or_else(|| CliError::Usage(format!("unknown transform {t:?}")))?;
        cfg.dgp.transform_mixture = vec![MixtureComponent::new(family, 1.0)];
    }
    if flags.deterministic {
        cfg.deterministic = true;
    }
    cfg.resolve_seeds();
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, flags) = match &cli.command {
        Cmd::Simulate(f) => (Command::Simulate, f),
        Cmd::Select(f) => (Command::Select, f),
        Cmd::Benchmark(f) => (Command::Benchmark, f),
        Cmd::OracleCheck(f) => (Command::OracleCheck, f),
    };
    let cfg = resolve(command, flags)?;
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Select => commands::select(&cfg).map(drop),
        Command::Benchmark => commands::benchmark(&cfg),
        Command::OracleCheck => {
            let summary = commands::oracle_check(&cfg)?;
            if cfg.input.is_none() && summary.parents_identified != summary.models {
                return Err(CliError::Estimation(drcfs_core::DrcfsError::IdentityViolation(format!(
                    "parents identified in only {} of {} models",
                    summary.parents_identified, summary.models
                ))));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
