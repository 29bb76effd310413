use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::catalog::{compute_catalog, ClassCatalog};
use super::{default_class_names, Dataset, Example, SplitRole};
use crate::error::{Error, Result};
use crate::rng::{seeded, stream};

const MAX_CENTER_ATTEMPTS: usize = 1000;

/// Recipe for a synthetic long-tail benchmark of Gaussian clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkewProfile {
    /// Train count of a class with multiplier 1.
    pub head_count: usize,
    /// Per-class fraction of `head_count` in Train, each in (0, 1].
    pub multipliers: Vec<f64>,
    pub feature_dim: usize,
    /// Minimum center distance in units of `noise_scale`.
    pub cluster_separation: f64,
    pub noise_scale: f64,
    pub seed: u64,
    pub pool_per_class: usize,
    pub test_per_class: usize,
    #[serde(default)]
    pub class_names: Option<Vec<String>>,
}

impl Default for SkewProfile {
    fn default() -> Self {
        let mut multipliers = vec![1.0; 10];
        multipliers[8] = 0.04;
        multipliers[9] = 0.015;
        SkewProfile {
            head_count: 1500,
            multipliers,
            feature_dim: 16,
            cluster_separation: 3.0,
            noise_scale: 1.0,
            seed: 0,
            pool_per_class: 200,
            test_per_class: 100,
            class_names: None,
        }
    }
}

impl SkewProfile {
    pub fn num_classes(&self) -> usize {
        self.multipliers.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.class_names
            .clone()
            .unwrap_or_else(|| default_class_names(self.num_classes()))
    }

    pub fn train_counts(&self) -> Vec<usize> {
        self.multipliers
            .iter()
            .map(|m| (self.head_count as f64 * m).round() as usize)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProfile(msg));
        if self.multipliers.is_empty() {
            return bad("at least one class multiplier is required".into());
        }
        if self.head_count == 0 {
            return bad("head_count must be positive".into());
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive".into());
        }
        if !(self.cluster_separation > 0.0 && self.cluster_separation.is_finite()) {
            return bad("cluster_separation must be positive".into());
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return bad("noise_scale must be positive".into());
        }
        if self.pool_per_class == 0 || self.test_per_class == 0 {
            return bad("pool_per_class and test_per_class must be positive".into());
        }
        let names = self.names();
        if names.len() != self.num_classes() {
            return bad(format!(
                "{} class names for {} multipliers",
                names.len(),
                self.num_classes()
            ));
        }
        for (k, m) in self.multipliers.iter().enumerate() {
            if !(*m > 0.0 && *m <= 1.0) {
                return bad(format!(
                    "multiplier {m} of class {} outside (0, 1]",
                    names[k]
                ));
            }
        }
        for (k, n) in self.train_counts().into_iter().enumerate() {
            if n == 0 {
                return bad(format!(
                    "class {} ({k}) rounds to zero training examples",
                    names[k]
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub pool: Dataset,
    pub test: Dataset,
}

/// Generates disjoint Train (skewed), Pool and Test (balanced) splits.
///
/// Ids are unique across the three splits and assigned after shuffling, so
/// they carry no class information.
pub fn generate_synthetic(profile: &SkewProfile) -> Result<Splits> {
    profile.validate()?;
    let centers = draw_centers(profile)?;
    let noise = Normal::new(0.0, profile.noise_scale).expect("validated noise scale");
    let names = profile.names();
    let c = profile.num_classes();

    let mut next_id = 0u64;
    let mut make_split = |counts: &[usize], role: SplitRole, stream_id: u64| -> Result<Dataset> {
        let mut rng = seeded(profile.seed, stream_id);
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(counts.iter().sum());
        for (k, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                let x = centers[k]
                    .iter()
                    .map(|&m| m + noise.sample(&mut rng))
                    .collect();
                rows.push((k, x));
            }
        }
        rows.shuffle(&mut rng);
        let examples = rows
            .into_iter()
            .map(|(k, x)| {
                let id = next_id;
                next_id += 1;
                match role {
                    SplitRole::Pool => Example::unlabeled(id, x).with_oracle(k),
                    _ => Example::labeled(id, x, k),
                }
            })
            .collect();
        Dataset::new(role, names.clone(), examples)
    };

    let train = make_split(
        &profile.train_counts(),
        SplitRole::Train,
        stream::TRAIN_SPLIT,
    )?;
    let pool = make_split(
        &vec![profile.pool_per_class; c],
        SplitRole::Pool,
        stream::POOL_SPLIT,
    )?;
    let test = make_split(
        &vec![profile.test_per_class; c],
        SplitRole::Test,
        stream::TEST_SPLIT,
    )?;
    Ok(Splits { train, pool, test })
}

/// Cluster centers with coordinates ~ N(0, (sep·σ)²/d), rejection-sampled until
/// every pair is at least `sep·σ` apart.
fn draw_centers(profile: &SkewProfile) -> Result<Vec<Vec<f64>>> {
    let min_dist = profile.cluster_separation * profile.noise_scale;
    let spread = Normal::new(0.0, min_dist / (profile.feature_dim as f64).sqrt())
        .expect("validated separation");
    let mut rng = seeded(profile.seed, stream::CENTERS);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(profile.num_classes());
    for k in 0..profile.num_classes() {
        let mut placed = false;
        for _ in 0..MAX_CENTER_ATTEMPTS {
            let cand: Vec<f64> = (0..profile.feature_dim)
                .map(|_| spread.sample(&mut rng))
                .collect();
            if centers.iter().all(|c| dist(c, &cand) >= min_dist) {
                centers.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InvalidProfile(format!(
                "could not place cluster center {k} after {MAX_CENTER_ATTEMPTS} attempts; \
                 lower cluster_separation or raise feature_dim"
            )));
        }
    }
    Ok(centers)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: Vec<usize>,
    pub pool: Vec<usize>,
    pub test: Vec<usize>,
}

/// Sidecar written next to generated or ingested splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema: String,
    pub profile: Option<SkewProfile>,
    pub seed: Option<u64>,
    pub class_names: Vec<String>,
    pub feature_dim: usize,
    pub counts: SplitCounts,
    pub tail_threshold: f64,
    pub skewness_ratios: Vec<f64>,
    pub tail_classes: Vec<usize>,
}

pub const MANIFEST_SCHEMA: &str = "tailminer-dataset-v1";

impl DatasetManifest {
    pub fn describe(
        splits: &Splits,
        profile: Option<&SkewProfile>,
        tail_threshold: f64,
    ) -> Result<(Self, ClassCatalog)> {
        let catalog = compute_catalog(&splits.train, tail_threshold)?;
        let count = |d: &Dataset, use_oracle: bool| {
            let mut v = vec![0usize; d.num_classes()];
            for e in d.examples() {
                let l = if use_oracle {
                    e.oracle_label()
                } else {
                    e.label
                };
                if let Some(l) = l {
                    v[l] += 1;
                }
            }
            v
        };
        let manifest = DatasetManifest {
            schema: MANIFEST_SCHEMA.to_string(),
            profile: profile.cloned(),
            seed: profile.map(|p| p.seed),
            class_names: splits.train.class_names().to_vec(),
            feature_dim: splits.train.feature_dim().unwrap_or(0),
            counts: SplitCounts {
                train: catalog.counts.clone(),
                pool: count(&splits.pool, true),
                test: count(&splits.test, false),
            },
            tail_threshold,
            skewness_ratios: catalog.skewness_ratios.clone(),
            tail_classes: catalog.tail_classes.clone(),
        };
        Ok((manifest, catalog))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DEFAULT_TAIL_THRESHOLD;

    fn small_profile() -> SkewProfile {
        SkewProfile {
            head_count: 40,
            multipliers: vec![1.0, 1.0, 0.25],
            feature_dim: 4,
            pool_per_class: 7,
            test_per_class: 5,
            seed: 11,
            ..SkewProfile::default()
        }
    }

    #[test]
    fn balanced_profile_has_unit_ratios() {
        let p = SkewProfile {
            multipliers: vec![1.0; 4],
            ..small_profile()
        };
        let s = generate_synthetic(&p).unwrap();
        let cat = compute_catalog(&s.train, DEFAULT_TAIL_THRESHOLD).unwrap();
        assert!(cat.skewness_ratios.iter().all(|&r| r == 1.0));
        assert!(cat.tail_classes.is_empty());
    }

    #[test]
    fn reference_profile_tail_ratios() {
        // counts: 8 × 1500, 60, round(4.5) = 5; mean = 12065 / 10 = 1206.5
        let mut p = SkewProfile::default();
        p.multipliers[9] = 0.003;
        assert_eq!(p.train_counts()[8..], [60, 5]);
        let s = generate_synthetic(&p).unwrap();
        let cat = compute_catalog(&s.train, DEFAULT_TAIL_THRESHOLD).unwrap();
        assert!((cat.skewness_ratios[8] - 60.0 / 1206.5).abs() < 1e-12);
        assert!((cat.skewness_ratios[9] - 5.0 / 1206.5).abs() < 1e-12);
        assert!((cat.skewness_ratios[8] - 0.05).abs() < 0.001);
        assert!((cat.skewness_ratios[9] - 0.004).abs() < 0.001);
        assert_eq!(cat.tail_classes, vec![8, 9]);
    }

    #[test]
    fn default_profile_tail_ratios() {
        // counts: 8 × 1500, 60, round(22.5) = 23; mean = 12083 / 10 = 1208.3
        let p = SkewProfile::default();
        assert_eq!(p.train_counts()[8..], [60, 23]);
        let s = generate_synthetic(&p).unwrap();
        let cat = compute_catalog(&s.train, DEFAULT_TAIL_THRESHOLD).unwrap();
        assert!((cat.skewness_ratios[8] - 60.0 / 1208.3).abs() < 1e-12);
        assert!((cat.skewness_ratios[9] - 23.0 / 1208.3).abs() < 1e-12);
        assert!(cat.skewness_ratios[8] <= 0.05 && cat.skewness_ratios[9] <= 0.05);
        assert_eq!(cat.tail_classes, vec![8, 9]);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate_synthetic(&small_profile()).unwrap();
        let b = generate_synthetic(&small_profile()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SkewProfile {
            seed: 12,
            ..small_profile()
        })
        .unwrap();
        assert_ne!(
            a.train.examples()[0].features,
            c.train.examples()[0].features
        );
        let ca = compute_catalog(&a.train, 0.3).unwrap();
        let cc = compute_catalog(&c.train, 0.3).unwrap();
        assert_eq!(ca.counts, cc.counts);
    }

    #[test]
    fn splits_are_disjoint_and_balanced() {
        let s = generate_synthetic(&small_profile()).unwrap();
        let mut ids: Vec<u64> = [&s.train, &s.pool, &s.test]
            .iter()
            .flat_map(|d| d.examples().iter().map(|e| e.id))
            .collect();
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), n);
        assert!(s
            .pool
            .examples()
            .iter()
            .all(|e| e.label.is_none() && e.oracle_label().is_some()));
        let (m, _) = DatasetManifest::describe(&s, None, 0.3).unwrap();
        assert_eq!(m.counts.pool, vec![7, 7, 7]);
        assert_eq!(m.counts.test, vec![5, 5, 5]);
    }

    #[test]
    fn zero_count_class_is_named() {
        let p = SkewProfile {
            multipliers: vec![1.0, 0.001],
            class_names: Some(vec!["cake".into(), "chocolate".into()]),
            ..small_profile()
        };
        let err = generate_synthetic(&p).unwrap_err().to_string();
        assert!(err.contains("chocolate"), "{err}");
    }

    #[test]
    fn impossible_separation_errors() {
        let p = SkewProfile {
            multipliers: vec![1.0; 30],
            feature_dim: 1,
            cluster_separation: 50.0,
            ..small_profile()
        };
        assert!(matches!(
            generate_synthetic(&p),
            Err(Error::InvalidProfile(_))
        ));
    }
}
