use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::IvtParams;
use crate::layout::DEFAULT_SNAP_RADIUS;
use crate::learner::TrainingConfig;
use crate::linguistics::Lexicons;
use crate::simplifier::{
    example_pairs, load_pairs, CompletionClient, HttpClient, HttpClientConfig, MockClient, MockFallback,
};

/// Which completion backend the service talks to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientConfig {
    Mock {
        /// Extra fixture pairs; the bundled examples are always loaded.
        #[serde(default)]
        pairs: Option<PathBuf>,
        #[serde(default)]
        fallback: MockFallback,
    },
    Http(HttpClientConfig),
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig::Mock {
            pairs: None,
            fallback: MockFallback::Rules,
        }
    }
}

impl ClientConfig {
    pub fn build(&self, lexicons: &Lexicons) -> Result<Box<dyn CompletionClient>> {
        Ok(match self {
            ClientConfig::Mock { pairs, fallback } => {
                let mut client = MockClient::new(*fallback)
                    .with_pairs(example_pairs())
                    .with_aoa_lexicon(lexicons.aoa.clone());
                if let Some(path) = pairs {
                    client = client.with_pairs(load_pairs(path)?);
                }
                Box::new(client)
            }
            ClientConfig::Http(cfg) => Box::new(HttpClient::new(cfg.clone())),
        })
    }
}

/// Service and CLI configuration. Every field is optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub ivt: IvtParams,
    pub snap_radius: f64,
    pub training: TrainingConfig,
    pub client: ClientConfig,
    /// Directory holding `aoa.csv` and `frequency.csv`; bundled lexicons
    /// are used when unset.
    pub lexicon_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            ivt: IvtParams::default(),
            snap_radius: DEFAULT_SNAP_RADIUS,
            training: TrainingConfig::default(),
            client: ClientConfig::default(),
            lexicon_dir: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ServiceConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.ivt.validate()?;
        if !(self.snap_radius.is_finite() && self.snap_radius >= 0.0) {
            return Err(Error::InvalidParam {
                name: "snap_radius",
                reason: format!("must be finite and non-negative, got {}", self.snap_radius),
            });
        }
        if self.training.grid.is_empty() {
            return Err(Error::InvalidParam {
                name: "training.grid",
                reason: "empty hyperparameter grid".into(),
            });
        }
        Ok(())
    }

    pub fn lexicons(&self) -> Result<Lexicons> {
        Lexicons::from_option_dir(self.lexicon_dir.as_deref())
    }
}
