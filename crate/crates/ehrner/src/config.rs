//! The command line's configuration file.
//!
//! A TOML file with one optional table per stage. Every key has a default,
//! and unknown top-level tables are rejected. Flags given on the command
//! line override the file.
//!
//! ```toml
//! seed = 7
//!
//! [synth]
//! documents = 1200
//! raw_sentences = 6000
//! density = 1.0
//! domain = "clinical"
//!
//! [split]
//! test_ratio = 0.3
//!
//! [embeddings]   # static skip-gram table
//! dim = 64
//! min_count = 3
//!
//! [pretrain]     # contextual encoder
//! epochs = 100
//! encoder = { dim = 64, depth = 4, window = 1 }
//!
//! [model]
//! hidden = 64
//!
//! [train]
//! iterations = 100
//! dropout = 0.2
//!
//! [experiment]   # learning-curve grid, see `harness::ExperimentSpec`
//! fractions = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
//! seeds = [0, 1, 2, 3, 4]
//!
//! [serve]
//! port = 8080
//! ```

use std::path::{Path, PathBuf};

use ehrner_core::corpus::Domain;
use ehrner_core::repr::{PretrainConfig, SkipGramConfig};
use ehrner_core::tagger::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::harness::ExperimentSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub documents: usize,
    pub raw_sentences: usize,
    /// Clinical: multiplier on the reference mention rates.
    pub density: f64,
    /// Biomedical: mentions per document.
    pub mentions_per_doc: f64,
    pub domain: Domain,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            documents: 1200,
            raw_sentences: 6000,
            density: 1.0,
            mentions_per_doc: 2.0,
            domain: Domain::Clinical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub test_ratio: f64,
    pub fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_ratio: 0.3,
            fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    /// Persist projects here; in memory when unset.
    pub data_dir: Option<PathBuf>,
    pub token: Option<String>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: None,
            token: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Applied to every stage unless `--seed` is given.
    pub seed: Option<u64>,
    pub synth: SynthConfig,
    pub split: SplitConfig,
    pub embeddings: SkipGramConfig,
    pub pretrain: PretrainConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub experiment: ExperimentSpec,
    pub serve: ServeConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Config {
    pub fn from_toml(text: &str, path: &Path) -> Result<Config, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string().replace('\n', " "),
        })
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Set every stage's seed. The grid's seed list keeps its length and
    /// starts at `seed`.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.embeddings.seed = seed;
        self.pretrain.seed = seed;
        self.model.seed = seed;
        self.train.seed = seed;
        let n = self.experiment.seeds.len() as u64;
        self.experiment.seeds = (seed..seed + n).collect();
        self.experiment.split_seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(Config::from_toml("", Path::new("c.toml")).unwrap(), Config::default());
    }

    #[test]
    fn partial_tables_keep_defaults() {
        let c = Config::from_toml("[train]\niterations = 5\n[pretrain.encoder]\ndim = 8\n", Path::new("c.toml")).unwrap();
        assert_eq!(c.train.iterations, 5);
        assert_eq!(c.train.dropout, 0.2);
        assert_eq!(c.pretrain.encoder.dim, 8);
        assert_eq!(c.pretrain.encoder.depth, 4);
    }

    #[test]
    fn unknown_table_rejected() {
        let err = Config::from_toml("[trian]\niterations = 5\n", Path::new("c.toml")).unwrap_err();
        assert!(err.to_string().contains("c.toml"));
        assert!(!err.to_string().contains('\n'));
    }
}
