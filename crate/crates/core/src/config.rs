//! Declarative run configuration, read from a TOML file.
//!
//! Every section is optional except `[dataset]`; unknown keys are rejected.
//! Individual keys can be overridden with dotted paths, e.g.
//! `backbone.train.epochs=5`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backbone::DEFAULT_HIDDEN;
use crate::data::{SkewProfile, DEFAULT_TAIL_THRESHOLD};
use crate::error::{Error, Result};
use crate::eval::FinetuneMode;
use crate::fsutil::{read_to_string, sha256_hex};
use crate::mcmau::DEFAULT_ENCODER_HIDDEN;
use crate::nn::{EarlyStoppingConfig, TrainConfig};
use crate::ranking::{Method, ProbabilitySource, DEFAULT_TOP_K};
use crate::recalib::{AlphaPolicy, DEFAULT_EPOCHS, DEFAULT_GAMMA};

/// Optimizer settings without a seed; the run seed is mixed in per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub early_stopping: Option<EarlyStoppingConfig>,
}

impl TrainSection {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            early_stopping: self.early_stopping.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFiles {
    pub train: PathBuf,
    pub pool: PathBuf,
    pub test: PathBuf,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default)]
    pub profile: Option<SkewProfile>,
    #[serde(default)]
    pub files: Option<DatasetFiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackboneSection {
    pub hidden: Vec<usize>,
    pub train: TrainSection,
}

impl Default for BackboneSection {
    fn default() -> Self {
        BackboneSection {
            hidden: DEFAULT_HIDDEN.to_vec(),
            train: TrainSection {
                learning_rate: 0.5,
                epochs: 20,
                batch_size: 64,
                early_stopping: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecalibSection {
    pub gamma: f64,
    pub alpha: AlphaPolicy,
    pub train: TrainSection,
}

impl Default for RecalibSection {
    fn default() -> Self {
        RecalibSection {
            gamma: DEFAULT_GAMMA,
            alpha: AlphaPolicy::InverseFrequency,
            train: TrainSection {
                learning_rate: 1.0,
                epochs: DEFAULT_EPOCHS,
                batch_size: 64,
                early_stopping: Some(EarlyStoppingConfig::default()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoencoderSection {
    pub encoder_hidden: Vec<usize>,
    pub train: TrainSection,
}

impl Default for AutoencoderSection {
    fn default() -> Self {
        AutoencoderSection {
            encoder_hidden: DEFAULT_ENCODER_HIDDEN.to_vec(),
            train: TrainSection {
                learning_rate: 1e-3,
                epochs: 30,
                batch_size: 64,
                early_stopping: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiningSection {
    pub methods: Vec<Method>,
    pub top_k: usize,
    pub min_confidence: Option<f64>,
    pub baseline_probabilities: ProbabilitySource,
    pub sample_sizes: Vec<usize>,
    pub finetune_mode: FinetuneMode,
}

impl Default for MiningSection {
    fn default() -> Self {
        MiningSection {
            methods: Method::ALL.to_vec(),
            top_k: DEFAULT_TOP_K,
            min_confidence: None,
            baseline_probabilities: ProbabilitySource::Recalibrated,
            sample_sizes: vec![50, 100, 200],
            finetune_mode: FinetuneMode::Scratch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub tail_threshold: f64,
    pub seeds: Vec<u64>,
    pub precision_at: Vec<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
            seeds: vec![0, 1, 2, 3, 4],
            precision_at: vec![50, 100, 200],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub backbone: BackboneSection,
    #[serde(default)]
    pub recalib: RecalibSection,
    #[serde(default)]
    pub autoencoder: AutoencoderSection,
    #[serde(default)]
    pub mining: MiningSection,
    #[serde(default)]
    pub eval: EvalSection,
}

/// Per-stage seed derived from the run seed.
#[derive(Debug, Clone, Copy)]
pub enum Stage {
    Backbone = 1,
    Recalib = 2,
    Autoencoder = 3,
    AutoencoderNoRc = 4,
    Mining = 5,
}

pub fn stage_seed(run_seed: u64, stage: Stage) -> u64 {
    run_seed ^ ((stage as u64) << 48)
}

impl RunConfig {
    /// Default synthetic benchmark configuration.
    pub fn synthetic_default() -> Self {
        RunConfig {
            dataset: DatasetSection {
                profile: Some(SkewProfile::default()),
                files: None,
            },
            ..Default::default()
        }
    }

    /// Parses `text` layered over the defaults, then applies `key=value`
    /// overrides. Partial tables keep the default values of missing keys.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let user: toml::Table =
            toml::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        let mut value = toml::Table::try_from(RunConfig::default())
            .map_err(|e| Error::config(format!("cannot serialize defaults: {e}")))?;
        merge(&mut value, user);
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("invalid config: {e}")))?;
        Ok(cfg)
    }

    /// Loads, applies overrides, resolves relative file paths against the
    /// config's directory and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = read_to_string(path).map_err(|e| Error::config(e.to_string()))?;
        let mut cfg = Self::from_toml_str(&text, overrides)?;
        if let (Some(files), Some(dir)) = (cfg.dataset.files.as_mut(), path.parent()) {
            for p in [&mut files.train, &mut files.pool, &mut files.test] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset.profile, &self.dataset.files) {
            (Some(p), None) => p.validate()?,
            (None, Some(f)) => {
                for p in [&f.train, &f.pool, &f.test] {
                    if !p.is_file() {
                        return Err(Error::config(format!(
                            "dataset file {} does not exist",
                            p.display()
                        )));
                    }
                }
                if f.class_names.is_empty() {
                    return Err(Error::config("dataset.files.class_names must not be empty"));
                }
            }
            _ => {
                return Err(Error::config(
                    "dataset section needs exactly one of `profile` or `files`",
                ))
            }
        }
        self.backbone.train.with_seed(0).validate()?;
        if self.backbone.hidden.is_empty() || self.backbone.hidden.contains(&0) {
            return Err(Error::config("backbone.hidden must list positive widths"));
        }
        let rc = self.recalib.train.with_seed(0);
        rc.validate()?;
        if rc.early_stopping.is_none() {
            return Err(Error::config("recalib.train.early_stopping is required"));
        }
        if !(self.recalib.gamma >= 0.0) {
            return Err(Error::config("recalib.gamma must be >= 0"));
        }
        if let AlphaPolicy::Explicit(a) = &self.recalib.alpha {
            if a.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::config("explicit alphas must lie in [0, 1]"));
            }
        }
        self.autoencoder.train.with_seed(0).validate()?;
        if self.autoencoder.encoder_hidden.is_empty()
            || self.autoencoder.encoder_hidden.contains(&0)
        {
            return Err(Error::config(
                "autoencoder.encoder_hidden must list positive widths",
            ));
        }
        if self.mining.methods.is_empty() {
            return Err(Error::config("mining.methods must not be empty"));
        }
        if self.mining.top_k == 0 {
            return Err(Error::config("mining.top_k must be positive"));
        }
        if let Some(t) = self.mining.min_confidence {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config("mining.min_confidence must lie in [0, 1]"));
            }
        }
        if !(self.eval.tail_threshold > 0.0) {
            return Err(Error::config("eval.tail_threshold must be positive"));
        }
        if self.eval.seeds.is_empty() {
            return Err(Error::config("eval.seeds must not be empty"));
        }
        if self.eval.precision_at.contains(&0) {
            return Err(Error::config("eval.precision_at sizes must be positive"));
        }
        Ok(())
    }

    /// Short hash of everything except the run seed.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        if let Some(p) = c.dataset.profile.as_mut() {
            p.seed = 0;
        }
        let json = serde_json::to_string(&c).expect("config serializes");
        sha256_hex(json.as_bytes())[..12].to_string()
    }

    /// Profile with the run seed applied.
    pub fn profile_for_seed(&self, seed: u64) -> Option<SkewProfile> {
        self.dataset
            .profile
            .clone()
            .map(|p| SkewProfile { seed, ..p })
    }
}

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    let value = parse_override_value(raw.trim());
    let mut cur = table;
    for key in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            Error::config(format!("override path `{path}` crosses a non-table key"))
        })?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    toml::from_str::<toml::Table>(&doc)
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
[dataset.profile]
head_count = 100
multipliers = [1.0, 1.0, 0.05]
feature_dim = 4
cluster_separation = 3.0
noise_scale = 1.0
seed = 0
pool_per_class = 10
test_per_class = 10
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL, &[]).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.autoencoder.encoder_hidden, vec![10, 9]);
        assert_eq!(cfg.mining.methods.len(), 6);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\n[backbone]\nwidth = 3\n");
        assert!(matches!(
            RunConfig::from_toml_str(&text, &[]),
            Err(Error::Config(_))
        ));
        let text = format!("bogus = 1\n{MINIMAL}");
        assert!(RunConfig::from_toml_str(&text, &[]).is_err());
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_toml_str(
            MINIMAL,
            &[
                "backbone.train.epochs=2".into(),
                "mining.methods=[\"ours\",\"random\"]".into(),
                "recalib.alpha=\"uniform\"".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.backbone.train.epochs, 2);
        assert_eq!(cfg.mining.methods, vec![Method::Ours, Method::Random]);
        assert_eq!(cfg.recalib.alpha, AlphaPolicy::Uniform);
        assert_eq!(cfg.backbone.hidden, vec![32, 16]);
    }

    #[test]
    fn explicit_alphas_parse() {
        let text = format!("{MINIMAL}\n[recalib]\nalpha = {{ explicit = [0.5, 0.5, 1.0] }}\n");
        let cfg = RunConfig::from_toml_str(&text, &[]).unwrap();
        assert_eq!(
            cfg.recalib.alpha,
            AlphaPolicy::Explicit(vec![0.5, 0.5, 1.0])
        );
    }

    #[test]
    fn hash_ignores_seed_only() {
        let a = RunConfig::from_toml_str(MINIMAL, &[]).unwrap();
        let b = RunConfig::from_toml_str(MINIMAL, &["seed=9".into()]).unwrap();
        let c = RunConfig::from_toml_str(MINIMAL, &["backbone.train.epochs=2".into()]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn invalid_numbers_rejected() {
        let bad = RunConfig::from_toml_str(MINIMAL, &["mining.top_k=0".into()]).unwrap();
        assert!(bad.validate().is_err());
        let bad = RunConfig::from_toml_str(
            MINIMAL,
            &["recalib.train.early_stopping.validation_fraction=1.5".into()],
        );
        // partial early_stopping table fails to deserialize or validate
        assert!(bad.is_err() || bad.unwrap().validate().is_err());
        let missing = RunConfig::from_toml_str("[dataset]\n", &[]).unwrap();
        assert!(missing.validate().is_err());
    }
}
