//! Experiment configuration: one JSON document drives the full pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qubofit::data::{SplitMode, SplitRatios};
use qubofit::latent::ProjectionKind;
use qubofit::optim::OptimizerSpec;
use qubofit::rng::fnv1a64;
use qubofit::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub split: SplitConfig,
    pub latent: LatentConfig,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub optimizers: OptimizersConfig,
    #[serde(default)]
    pub decode: DecodeConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathsConfig {
    pub embeddings: PathBuf,
    pub fitness: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequences: Option<PathBuf>,
    #[serde(default = "default_fitness_column")]
    pub fitness_column: String,
    #[serde(default = "default_sequence_column")]
    pub sequence_column: String,
}

fn default_fitness_column() -> String {
    "fitness".to_string()
}

fn default_sequence_column() -> String {
    "sequence".to_string()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub mode: SplitMode,
    pub ratios: SplitRatios,
    pub seed: u64,
    pub n_bins: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            mode: SplitMode::TwoStageRandom,
            ratios: SplitRatios {
                train: 0.7,
                val: 0.1,
                test: 0.2,
            },
            seed: 42,
            n_bins: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatentConfig {
    pub kind: ProjectionKind,
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_entropy_floor")]
    pub entropy_floor: f64,
}

fn default_entropy_floor() -> f64 {
    qubofit::latent::DEFAULT_ENTROPY_FLOOR
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub lambda: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self { lambda: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizersConfig {
    pub list: Vec<OptimizerSpec>,
    pub seeds: Vec<u64>,
}

impl Default for OptimizersConfig {
    fn default() -> Self {
        Self {
            list: ["sa", "ga", "rs", "ghc", "lbo"]
                .iter()
                .map(|t| OptimizerSpec::from_tag(t).unwrap())
                .collect(),
            seeds: (0..5).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    /// Mean of the K highest oracle scores is reported per run and overall.
    pub k: usize,
    /// Candidate budget: how many top codes each optimizer run returns for
    /// decoding and oracle scoring.
    pub candidates: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            k: 10,
            candidates: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Ridge,
    Gp,
}

impl OracleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::Ridge => "ridge",
            OracleKind::Gp => "gp",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub kind: OracleKind,
    /// Ridge regularization strength.
    pub alpha: f64,
    /// Training-size cap for the exact GP.
    pub gp_max_train: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kind: OracleKind::Ridge,
            alpha: 1.0,
            gp_max_train: 2000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if overrides.is_empty() {
            return Self::from_json(&text);
        }
        let mut value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("config parse error: {e}")))?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        serde_json::from_value(value)
            .map_err(|e| Error::InvalidArgument(format!("config parse error after overrides: {e}")))
    }

    /// Returns warnings for unusual but allowed settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        for (name, path) in [
            ("embeddings", Some(&self.paths.embeddings)),
            ("fitness", Some(&self.paths.fitness)),
            ("sequences", self.paths.sequences.as_ref()),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(Error::InvalidArgument(format!(
                        "{name} path does not exist: {}",
                        path.display()
                    )));
                }
            }
        }
        if self.latent.m == 0 {
            return Err(Error::InvalidArgument(
                "latent.m must be positive".to_string(),
            ));
        }
        if ![8, 16, 32, 64].contains(&self.latent.m) {
            warnings.push(format!(
                "latent.m = {} is outside the benchmark grid {{8, 16, 32, 64}}",
                self.latent.m
            ));
        }
        if self.optimizers.seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "optimizers.seeds must not be empty".to_string(),
            ));
        }
        if self.optimizers.list.is_empty() {
            return Err(Error::InvalidArgument(
                "optimizers.list must not be empty".to_string(),
            ));
        }
        if self.surrogate.lambda <= 0.0 || self.surrogate.lambda.is_nan() {
            return Err(Error::InvalidArgument(
                "surrogate.lambda must be positive".to_string(),
            ));
        }
        if self.decode.k == 0 {
            return Err(Error::InvalidArgument("decode.k must be >= 1".to_string()));
        }
        if self.decode.candidates == 0 {
            return Err(Error::InvalidArgument(
                "decode.candidates must be >= 1".to_string(),
            ));
        }
        self.split.ratios.validate()?;
        Ok(warnings)
    }

    /// Canonical JSON of the resolved config (defaults filled, field order
    /// fixed by the struct definitions).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// FNV-1a hash of the canonical JSON; the run directory name is its
    /// first twelve hex digits.
    pub fn hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.canonical_json().as_bytes()))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output.directory.join(&self.hash()[..12])
    }
}

/// Set `key` (a dot path such as `latent.m`) to `raw`, parsed as JSON when
/// possible and as a bare string otherwise.
fn apply_override(value: &mut serde_json::Value, key: &str, raw: &str) -> Result<()> {
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = value;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidArgument(format!("malformed override key '{key}'")));
    }
    for part in &parts[..parts.len() - 1] {
        cursor = cursor
            .as_object_mut()
            .ok_or_else(|| {
                Error::InvalidArgument(format!("override key '{key}' crosses a non-object"))
            })?
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    cursor
        .as_object_mut()
        .ok_or_else(|| Error::InvalidArgument(format!("override key '{key}' crosses a non-object")))?
        .insert(parts.last().unwrap().to_string(), parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json(dir: &Path) -> String {
        format!(
            r#"{{
  "paths": {{"embeddings": "{0}/e.npy", "fitness": "{0}/y.npy"}},
  "latent": {{"kind": "pca", "m": 8}},
  "output": {{"directory": "{0}/runs"}}
}}"#,
            dir.display()
        )
    }

    #[test]
    fn defaults_fill_in() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_json(&minimal_json(dir.path())).unwrap();
        assert_eq!(cfg.surrogate.lambda, 1e-3);
        assert_eq!(cfg.optimizers.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(cfg.optimizers.list.len(), 5);
        assert_eq!(cfg.decode.k, 10);
        assert_eq!(cfg.split.seed, 42);
        assert_eq!(cfg.oracle.kind, OracleKind::Ridge);
    }

    #[test]
    fn overrides_apply_with_json_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, minimal_json(dir.path())).unwrap();
        let cfg = ExperimentConfig::load(
            &path,
            &[
                ("latent.m".to_string(), "32".to_string()),
                ("optimizers.seeds".to_string(), "[7]".to_string()),
                ("latent.kind".to_string(), "random_gaussian".to_string()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.latent.m, 32);
        assert_eq!(cfg.optimizers.seeds, vec![7]);
        assert_eq!(cfg.latent.kind, ProjectionKind::RandomGaussian);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        let a = ExperimentConfig::from_json(&minimal_json(dir.path())).unwrap();
        let b = ExperimentConfig::from_json(&minimal_json(dir.path())).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = ExperimentConfig::from_json(&minimal_json(dir.path())).unwrap();
        c.latent.m = 16;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn validation_requires_existing_paths_and_seeds() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::from_json(&minimal_json(dir.path())).unwrap();
        assert!(cfg.validate().is_err()); // files missing
        std::fs::write(dir.path().join("e.npy"), b"x").unwrap();
        std::fs::write(dir.path().join("y.npy"), b"x").unwrap();
        let warnings = cfg.validate().unwrap();
        assert!(warnings.is_empty());
        cfg.latent.m = 12;
        assert!(!cfg.validate().unwrap().is_empty());
        cfg.optimizers.seeds.clear();
        assert!(cfg.validate().is_err());
    }
}
