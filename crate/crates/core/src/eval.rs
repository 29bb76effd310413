//! Mining-quality metrics over rank lists and the finetune-and-remeasure
//! experiment.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::backbone::{continue_training, per_class_accuracy, train_backbone, BackboneModel};
use crate::data::{augment, Dataset, Example, OracleLabels};
use crate::error::{Error, Result};
use crate::nn::TrainConfig;
use crate::ranking::{Method, RankList};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub positives_total: usize,
}

impl PrCurve {
    pub fn precision_at(&self, k: usize) -> Option<f64> {
        k.checked_sub(1)
            .and_then(|i| self.points.get(i))
            .map(|p| p.precision)
    }
}

fn f_score(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// One point per prefix size `k = 1..=n`. An example is positive iff its
/// oracle class is in `tail`.
pub fn pr_curve(rank: &RankList, oracle: &OracleLabels, tail: &[usize]) -> Result<PrCurve> {
    if tail.is_empty() {
        return Err(Error::invalid("the tail class set is empty"));
    }
    let positive = rank
        .entries
        .iter()
        .map(|e| {
            oracle
                .get(e.example_id)
                .map(|l| tail.contains(&l))
                .ok_or_else(|| {
                    Error::invalid(format!("no oracle label for pool example {}", e.example_id))
                })
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(pr_curve_from_flags(&positive))
}

/// Curve over a ranked sequence of positive/negative flags.
pub fn pr_curve_from_flags(positive: &[bool]) -> PrCurve {
    let total = positive.iter().filter(|&&p| p).count();
    let mut tp = 0usize;
    let points = positive
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if p {
                tp += 1;
            }
            let k = i + 1;
            let precision = tp as f64 / k as f64;
            let recall = if total == 0 {
                0.0
            } else {
                tp as f64 / total as f64
            };
            PrPoint {
                k,
                precision,
                recall,
                f_score: f_score(precision, recall),
            }
        })
        .collect();
    PrCurve {
        points,
        positives_total: total,
    }
}

/// Trapezoidal area under precision-vs-recall.
///
/// Runs of equal recall collapse to their maximum precision, points at zero
/// recall are dropped, and the curve is anchored at recall 0 with the
/// precision of its first remaining point (P@1 whenever rank 1 is positive).
pub fn auc_pr(curve: &PrCurve) -> f64 {
    let mut collapsed: Vec<(f64, f64)> = Vec::new();
    for p in &curve.points {
        match collapsed.last_mut() {
            Some((r, best)) if *r == p.recall => *best = best.max(p.precision),
            _ => collapsed.push((p.recall, p.precision)),
        }
    }
    collapsed.retain(|&(r, _)| r > 0.0);
    let Some(&(_, first_p)) = collapsed.first() else {
        return 0.0;
    };
    let mut area = 0.0;
    let mut prev = (0.0, first_p);
    for &(r, p) in &collapsed {
        area += (r - prev.0) * (p + prev.1) / 2.0;
        prev = (r, p);
    }
    area
}

/// Mean F-score over every point of the curve.
pub fn avg_f(curve: &PrCurve) -> f64 {
    if curve.points.is_empty() {
        return 0.0;
    }
    curve.points.iter().map(|p| p.f_score).sum::<f64>() / curve.points.len() as f64
}

/// `(ours − base) / base · 100`.
pub fn relative_improvement(r_our: f64, r_base: f64) -> Result<f64> {
    if !(r_base > 0.0) {
        return Err(Error::UndefinedBaseline(r_base));
    }
    Ok((r_our - r_base) / r_base * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub seed: u64,
    pub auc_pr: f64,
    pub avg_f: f64,
    pub precision_at: BTreeMap<usize, f64>,
}

pub fn evaluate(
    rank: &RankList,
    oracle: &OracleLabels,
    tail: &[usize],
    precision_ks: &[usize],
    seed: u64,
) -> Result<(PrCurve, EvalReport)> {
    let curve = pr_curve(rank, oracle, tail)?;
    let precision_at = precision_ks
        .iter()
        .filter_map(|&k| curve.precision_at(k).map(|p| (k, p)))
        .collect();
    let report = EvalReport {
        method: rank.method,
        seed,
        auc_pr: auc_pr(&curve),
        avg_f: avg_f(&curve),
        precision_at,
    };
    Ok((curve, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinetuneMode {
    /// Retrain from a fresh initialization on the augmented split.
    #[default]
    Scratch,
    /// Continue optimizing the original backbone on the augmented split.
    Continue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneRow {
    pub sample_size: usize,
    pub tail_examples_added: usize,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub per_class_delta: Vec<Option<f64>>,
    pub tail_accuracy: f64,
    pub tail_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneReport {
    pub method: Method,
    pub mode: FinetuneMode,
    pub tail_classes: Vec<usize>,
    pub baseline_per_class_accuracy: Vec<Option<f64>>,
    pub baseline_tail_accuracy: f64,
    pub rows: Vec<FinetuneRow>,
}

fn mean_over(classes: &[usize], acc: &[Option<f64>]) -> f64 {
    let vals: Vec<f64> = classes
        .iter()
        .filter_map(|&k| acc.get(k).copied().flatten())
        .collect();
    if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Inputs shared by every sample size of a finetune run.
#[derive(Debug, Clone)]
pub struct FinetuneSetup<'a> {
    pub train: &'a Dataset,
    pub pool: &'a Dataset,
    pub test: &'a Dataset,
    pub hidden: &'a [usize],
    pub cfg: &'a TrainConfig,
    pub tail: &'a [usize],
    pub mode: FinetuneMode,
    /// Required for [`FinetuneMode::Continue`].
    pub base: Option<&'a BackboneModel>,
}

/// For each size `n`: annotate the top `n` of `rank` through the oracle,
/// augment Train, retrain, and report per-class Test accuracy against the
/// unaugmented model.
pub fn finetune_experiment(
    setup: &FinetuneSetup<'_>,
    rank: &RankList,
    sample_sizes: &[usize],
) -> Result<FinetuneReport> {
    if let Some(&n) = sample_sizes.iter().find(|&&n| n > setup.pool.len()) {
        return Err(Error::invalid(format!(
            "sample size {n} exceeds the pool size {}",
            setup.pool.len()
        )));
    }
    let by_id: HashMap<u64, &Example> = setup.pool.examples().iter().map(|e| (e.id, e)).collect();
    let retrain = |data: &Dataset| -> Result<BackboneModel> {
        match setup.mode {
            FinetuneMode::Scratch => Ok(train_backbone(data, setup.hidden, setup.cfg)?.0),
            FinetuneMode::Continue => {
                let mut m = setup
                    .base
                    .ok_or_else(|| Error::config("continue mode needs the original backbone"))?
                    .thawed_copy();
                continue_training(&mut m, data, setup.cfg)?;
                Ok(m)
            }
        }
    };
    let base_model = match setup.mode {
        FinetuneMode::Scratch => retrain(setup.train)?,
        FinetuneMode::Continue => setup
            .base
            .ok_or_else(|| Error::config("continue mode needs the original backbone"))?
            .clone(),
    };
    let baseline = per_class_accuracy(&base_model, setup.test)?;
    let baseline_tail = mean_over(setup.tail, &baseline);

    let mut rows = Vec::with_capacity(sample_sizes.len());
    for &n in sample_sizes {
        let mined = rank
            .top(n)
            .iter()
            .map(|entry| {
                by_id
                    .get(&entry.example_id)
                    .ok_or_else(|| {
                        Error::invalid(format!("ranked id {} is not in the pool", entry.example_id))
                    })?
                    .reveal()
            })
            .collect::<Result<Vec<Example>>>()?;
        let tail_added = mined
            .iter()
            .filter(|e| e.label.is_some_and(|l| setup.tail.contains(&l)))
            .count();
        let acc = if n == 0 && setup.mode == FinetuneMode::Scratch {
            baseline.clone()
        } else {
            let model = retrain(&augment(setup.train, &mined)?)?;
            per_class_accuracy(&model, setup.test)?
        };
        let per_class_delta = acc
            .iter()
            .zip(&baseline)
            .map(|(a, b)| Some((*a)? - (*b)?))
            .collect();
        let tail_accuracy = mean_over(setup.tail, &acc);
        rows.push(FinetuneRow {
            sample_size: n,
            tail_examples_added: tail_added,
            per_class_accuracy: acc,
            per_class_delta,
            tail_accuracy,
            tail_delta: tail_accuracy - baseline_tail,
        });
    }
    Ok(FinetuneReport {
        method: rank.method,
        mode: setup.mode,
        tail_classes: setup.tail.to_vec(),
        baseline_per_class_accuracy: baseline,
        baseline_tail_accuracy: baseline_tail,
        rows,
    })
}
