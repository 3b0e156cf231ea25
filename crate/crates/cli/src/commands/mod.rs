pub mod decode;
pub mod evaluate;
pub mod keywords;
pub mod serve;
pub mod tune;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use pmidc_core::JobConfig;

/// Flags shared by the subcommands that run decode jobs; every flag
/// overrides the corresponding config-file key.
#[derive(Args, Debug, Clone)]
pub struct ConfigOverrides {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scoring strategy: beam | pmi | cpmi | pmi_dc.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Penalty weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Entropy threshold in nats.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Priming phrase (must be in the prompt library; empty allowed).
    #[arg(long)]
    pub phrase: Option<String>,
    /// Domain information kind: keywords | first_sentence | random_sentence
    /// | keyword_sentence | none.
    #[arg(long)]
    pub domain_kind: Option<String>,
    /// Seed for the random domain variants.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Concurrent decode jobs.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl ConfigOverrides {
    /// Loads the config file (or defaults) and applies the flag overrides.
    pub fn load(&self) -> Result<JobConfig> {
        let mut config = match &self.config {
            Some(path) => JobConfig::from_file(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => JobConfig::default(),
        };
        if let Some(v) = &self.strategy {
            config.set("strategy", v)?;
        }
        if let Some(v) = self.lambda {
            config.set("lambda", &v.to_string())?;
        }
        if let Some(v) = self.tau {
            config.set("tau", &v.to_string())?;
        }
        if let Some(v) = &self.phrase {
            config.set("prompt.phrase", v)?;
        }
        if let Some(v) = &self.domain_kind {
            config.set("domain.kind", v)?;
        }
        if let Some(v) = self.seed {
            config.set("seed", &v.to_string())?;
        }
        if let Some(v) = self.jobs {
            config.set("jobs", &v.to_string())?;
        }
        Ok(config)
    }
}

/// Builds a rayon pool with the configured parallelism.
pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building worker pool")
}
