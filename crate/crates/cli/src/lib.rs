//! Experiment driver for the `trisr` binary: run configuration, named
//! presets and the subcommand implementations.

pub mod commands;
pub mod config;

pub use commands::{CliError, Report};
pub use config::{ConfigError, RunConfig};

use std::path::PathBuf;

/// Where a run's configuration comes from, applied in field order.
#[derive(Debug, Clone, Default)]
pub struct Sources {
    pub preset: Option<String>,
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Sources {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.preset {
            Some(name) => RunConfig::preset(name)?,
            None => RunConfig::default(),
        };
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Invalid(format!("cannot read config {}: {e}", path.display()))
            })?;
            cfg.apply_text(&text)?;
        }
        for pair in &self.overrides {
            cfg.apply_override(pair)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}
