//! Examples, split datasets, class statistics and the synthetic long-tail
//! benchmark.
//!
//! Pool examples never expose a label through [`Example::label`]. Their true
//! class rides along as an oracle label that only the simulated annotator
//! ([`Example::oracle_label`], [`OracleLabels`]) reads.

mod catalog;
mod csvio;
mod synth;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

pub use catalog::{compute_catalog, ClassCatalog, DEFAULT_TAIL_THRESHOLD};
pub use csvio::{load_csv, read_csv, save_csv, write_csv};
pub use synth::{generate_synthetic, DatasetManifest, SkewProfile, SplitCounts, Splits};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Pool,
    Test,
}

/// One candidate detection inside an example: its logits and confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub logits: Vec<f64>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn new(detections: Vec<Detection>) -> Result<Self> {
        for d in &detections {
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(Error::invalid(format!(
                    "detection confidence {} outside [0, 1]",
                    d.confidence
                )));
            }
            if d.logits.iter().any(|z| !z.is_finite()) {
                return Err(Error::invalid("detection logits must be finite"));
            }
        }
        Ok(DetectionSet { detections })
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: u64,
    pub features: Vec<f64>,
    pub label: Option<usize>,
    oracle: Option<usize>,
    pub detections: Option<DetectionSet>,
}

impl Example {
    pub fn labeled(id: u64, features: Vec<f64>, label: usize) -> Self {
        Example {
            id,
            features,
            label: Some(label),
            oracle: None,
            detections: None,
        }
    }

    pub fn unlabeled(id: u64, features: Vec<f64>) -> Self {
        Example {
            id,
            features,
            label: None,
            oracle: None,
            detections: None,
        }
    }

    /// Attaches a hidden ground-truth class for the simulated annotator.
    pub fn with_oracle(mut self, class: usize) -> Self {
        self.oracle = Some(class);
        self
    }

    pub fn with_detections(mut self, detections: DetectionSet) -> Self {
        self.detections = Some(detections);
        self
    }

    /// Simulated annotator: the hidden ground-truth class of a pool example.
    pub fn oracle_label(&self) -> Option<usize> {
        self.oracle
    }

    /// Annotates the example with its oracle label, as a human labeler would.
    pub fn reveal(&self) -> Result<Example> {
        let class = self.oracle.or(self.label).ok_or_else(|| {
            Error::invalid(format!("example {} has no oracle label to reveal", self.id))
        })?;
        Ok(Example {
            id: self.id,
            features: self.features.clone(),
            label: Some(class),
            oracle: None,
            detections: self.detections.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    role: SplitRole,
    class_names: Vec<String>,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(role: SplitRole, class_names: Vec<String>, examples: Vec<Example>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::invalid("dataset needs at least one class"));
        }
        let c = class_names.len();
        let mut ids = HashSet::with_capacity(examples.len());
        let dim = examples.first().map(|e| e.features.len());
        for e in &examples {
            if !ids.insert(e.id) {
                return Err(Error::invalid(format!("duplicate example id {}", e.id)));
            }
            if Some(e.features.len()) != dim {
                return Err(Error::invalid(format!(
                    "example {} has {} features, expected {}",
                    e.id,
                    e.features.len(),
                    dim.unwrap_or(0)
                )));
            }
            if e.features.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!(
                    "example {} has non-finite features",
                    e.id
                )));
            }
            for l in e.label.iter().chain(e.oracle.iter()) {
                if *l >= c {
                    return Err(Error::invalid(format!(
                        "example {} has label {l} but only {c} classes exist",
                        e.id
                    )));
                }
            }
            match role {
                SplitRole::Train if e.label.is_none() => {
                    return Err(Error::invalid(format!(
                        "train example {} is unlabeled",
                        e.id
                    )))
                }
                SplitRole::Pool if e.label.is_some() => {
                    return Err(Error::invalid(format!(
                        "pool example {} exposes a label; use an oracle label instead",
                        e.id
                    )))
                }
                _ => {}
            }
        }
        Ok(Dataset {
            role,
            class_names,
            examples,
        })
    }

    pub fn role(&self) -> SplitRole {
        self.role
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.examples.first().map(|e| e.features.len())
    }

    /// Copy of a pool dataset with every oracle label removed.
    pub fn without_oracle(&self) -> Dataset {
        let mut out = self.clone();
        out.examples.iter_mut().for_each(|e| e.oracle = None);
        out
    }
}

/// Ground-truth classes for pool ids, obtained from the simulated annotator.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleLabels {
    labels: BTreeMap<u64, usize>,
}

impl OracleLabels {
    /// Reads every pool example's oracle label. Fails if any is missing.
    pub fn from_pool(pool: &Dataset) -> Result<Self> {
        let mut labels = BTreeMap::new();
        for e in pool.examples() {
            let l = e.oracle_label().or(e.label).ok_or_else(|| {
                Error::invalid(format!(
                    "no oracle label available for pool example {}",
                    e.id
                ))
            })?;
            labels.insert(e.id, l);
        }
        Ok(OracleLabels { labels })
    }

    pub fn from_map(labels: BTreeMap<u64, usize>) -> Self {
        OracleLabels { labels }
    }

    pub fn get(&self, id: u64) -> Option<usize> {
        self.labels.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Adds annotated examples to a training split.
pub fn augment(train: &Dataset, mined: &[Example]) -> Result<Dataset> {
    let existing: HashSet<u64> = train.examples.iter().map(|e| e.id).collect();
    let mut examples = train.examples.clone();
    for e in mined {
        if existing.contains(&e.id) {
            return Err(Error::invalid(format!(
                "mined example {} collides with a training id",
                e.id
            )));
        }
        if e.label.is_none() {
            return Err(Error::invalid(format!(
                "mined example {} has not been annotated",
                e.id
            )));
        }
        let mut e = e.clone();
        e.oracle = None;
        examples.push(e);
    }
    Dataset::new(SplitRole::Train, train.class_names.clone(), examples)
}

pub fn default_class_names(num_classes: usize) -> Vec<String> {
    (0..num_classes).map(|k| format!("class_{k}")).collect()
}
