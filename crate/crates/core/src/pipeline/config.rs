use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clean::CleaningStrategy;
use crate::error::{Error, Result};
use crate::ingest::GroundTruthFormat;
use crate::parse::FallbackPolicy;
use crate::refine::RefineParams;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParseConfig {
    pub fallback: FallbackPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanConfig {
    pub strategy: CleaningStrategy,
    pub l: usize,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            strategy: CleaningStrategy::Lrc,
            l: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub responses: Option<PathBuf>,
    /// A single `.crvb` file or a directory of them.
    pub embeddings: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub gt_format: GroundTruthFormat,
    pub out: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            responses: None,
            embeddings: None,
            ground_truth: None,
            gt_format: GroundTruthFormat::Normalized,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Also write per-video plot data under `plots/`.
    pub plots: bool,
}

/// Every knob of a run. Serialized as TOML with dotted sections
/// (`clean.l`, `refine.tau`, `refine.toggles.smoothing`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Segment interval in frames.
    pub d: usize,
    /// Frames sampled per segment by the extractor; recorded, not used here.
    pub n: usize,
    pub seed: u64,
    /// Worker threads for per-video processing; 0 picks the machine default.
    pub workers: usize,
    pub parse: ParseConfig,
    pub clean: CleanConfig,
    pub refine: RefineParams,
    pub paths: PathsConfig,
    pub output: OutputConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            d: 30,
            n: 8,
            seed: 0,
            workers: 0,
            parse: ParseConfig::default(),
            clean: CleanConfig::default(),
            refine: RefineParams::default(),
            paths: PathsConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 || self.n < 1 {
            return Err(Error::Config(format!(
                "d and n must be at least 1, got {} and {}",
                self.d, self.n
            )));
        }
        self.refine.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets one dotted key, e.g. `refine.tau = 0.1`. The value is read as a
    /// TOML literal, or as a bare string if it is not one.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut tree = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_owned()));
        let (sections, leaf) = match key.rsplit_once('.') {
            Some((head, leaf)) => (head.split('.').collect::<Vec<_>>(), leaf),
            None => (Vec::new(), key),
        };
        let mut node = &mut tree;
        for part in sections {
            node = node
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("{key:?} does not name a config section")))?
                .entry(part.to_owned())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        node.as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key:?} does not name a config section")))?
            .insert(leaf.to_owned(), parsed);
        let updated: Self = tree
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}
