//! Command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::config::{config_digest, parse_config_with, ConfigError};
use crate::output::{replication_dir, write_run, RunManifest};
use crate::session::run_replications;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// Environment variable overriding the config seed (the --seed flag wins).
pub const SEED_ENV: &str = "NMS_SEED";

#[derive(Debug, Clone, Parser)]
#[command(name = "nms", version, about = "Opinion-driven market simulations")]
pub struct Args {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; one subdirectory per replication.
    #[arg(long, default_value = "./out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<u32>,
    /// Dotted override such as `od.pe=0.25`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

/// Resolves the config, runs every replication and writes its artifacts.
/// `env_seed` is the raw value of [`SEED_ENV`], if set.
pub fn execute(args: &Args, env_seed: Option<&str>) -> Result<Vec<RunManifest>, CliError> {
    let mut overrides = args.overrides.clone();
    if let Some(raw) = env_seed {
        let seed: u64 = raw.trim().parse().map_err(|_| ConfigError::OutOfRange {
            key: SEED_ENV.into(),
            message: format!("{raw:?} is not an unsigned integer"),
        })?;
        overrides.push(format!("seed={seed}"));
    }
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(r) = args.replications {
        overrides.push(format!("replications={r}"));
    }
    let cfg = parse_config_with(&args.config, &overrides)?;
    let digest = config_digest(&cfg);
    let outputs = run_replications(&cfg)?;
    outputs
        .iter()
        .zip(0u32..)
        .map(|(out, rep)| {
            let dir = replication_dir(&args.out, rep);
            write_run(&dir, out, &digest, rep)
                .map_err(|e| CliError::Runtime(format!("writing {}: {e}", dir.display())))
        })
        .collect()
}

pub fn main() -> ExitCode {
    let args = Args::parse();
    let env_seed = std::env::var(SEED_ENV).ok();
    match execute(&args, env_seed.as_deref()) {
        Ok(manifests) => {
            for m in &manifests {
                eprintln!(
                    "replication {} seed {} -> {}",
                    m.replication,
                    m.seed,
                    replication_dir(&args.out, m.replication).display()
                );
            }
            ExitCode::from(EXIT_OK)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
