//! The single JSON run configuration and `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::checkpoint::hex;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::eval::CemConfig;
use crate::ppo::TrainConfig;
use crate::reward::RewardCoefficients;
use crate::sfm::SfmConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub suite: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            checkpoint: None,
            suite: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub rewards: RewardCoefficients,
    pub train: TrainConfig,
    pub sfm: SfmConfig,
    pub oracle: CemConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    /// Parse a config document and apply `overrides` (`dotted.key=value`,
    /// value parsed as JSON and falling back to a string).
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        // Parse once as the typed struct so diagnostics carry line numbers.
        let typed: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        let cfg = if overrides.is_empty() {
            typed
        } else {
            let mut value = serde_json::to_value(&typed).expect("config serialises");
            for o in overrides {
                apply_override(&mut value, o)?;
            }
            serde_json::from_value(value)
                .map_err(|e| Error::Config(format!("after overrides: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, overrides).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.rewards.validate()?;
        self.train.validate()?;
        self.sfm.validate()?;
        Ok(())
    }

    /// Use one seed for scenario generation, training and the oracle.
    pub fn set_seed(&mut self, seed: u64) {
        self.env.seed = seed;
        self.train.seed = seed;
        self.oracle.seed = seed;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of the canonical JSON form, first 16 hex digits.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        hex(&Sha256::digest(canonical.as_bytes()))[..16].to_owned()
    }
}

fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            Error::Config(format!("override key `{key}` does not name a section"))
        })?;
        if !obj.contains_key(*part) {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        if i + 1 == parts.len() {
            obj.insert((*part).to_owned(), value);
            return Ok(());
        }
        node = obj.get_mut(*part).expect("checked above");
    }
    unreachable!("split always yields at least one part")
}
