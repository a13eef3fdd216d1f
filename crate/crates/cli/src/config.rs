use std::fs;
use std::path::Path;
use std::time::Duration;

use examforge_core::assessment::RubricConfig;
use examforge_core::llm_gateway::ProviderConfig;
use examforge_core::ranking::PageRankConfig;
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Settings read from `--config`. Command-line flags override them.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub rubric: RubricConfig,
    pub provider: Option<ProviderConfig>,
    pub pagerank: PageRankConfig,
    pub seed: Option<u64>,
    pub max_retries: Option<u32>,
    /// Upper/lower segment share for discrimination.
    pub fraction: Option<f64>,
    pub timeout_secs: Option<u64>,
    pub segment_chars: Option<usize>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: Config = serde_json::from_str(&text).map_err(|e| CliError::new("InvalidConfig", format!("{}: {e}", path.display())))?;
        config.rubric.validate()?;
        config.pagerank.validate()?;
        if let Some(p) = &config.provider {
            p.validate()?;
        }
        Ok(config)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs.unwrap_or(120))
    }
}
