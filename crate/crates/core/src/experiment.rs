//! End-to-end pipeline for one seed and multi-seed sweeps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backbone::{per_class_accuracy, train_backbone, BackboneModel, BackboneReport};
use crate::config::{stage_seed, RunConfig, Stage};
use crate::data::{
    generate_synthetic, load_csv, ClassCatalog, DatasetManifest, OracleLabels, SplitRole, Splits,
};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, finetune_experiment, relative_improvement, EvalReport, FinetuneReport, FinetuneSetup,
    PrCurve,
};
use crate::mcmau::{fit_autoencoder, AutoencoderModel, AutoencoderReport};
use crate::ranking::{build_rank_list, Method, MiningContext, RankList};
use crate::recalib::{backbone_logits, calibrated_logits, fit_rc_layer, RecalibrationLayer};

/// Splits for `seed`: generated from the profile, or loaded from files.
pub fn prepare_data(cfg: &RunConfig, seed: u64) -> Result<(Splits, DatasetManifest, ClassCatalog)> {
    let profile = cfg.profile_for_seed(seed);
    let splits = match (&profile, &cfg.dataset.files) {
        (Some(p), _) => generate_synthetic(p)?,
        (None, Some(f)) => Splits {
            train: load_csv(&f.train, SplitRole::Train, f.class_names.clone())?,
            pool: load_csv(&f.pool, SplitRole::Pool, f.class_names.clone())?,
            test: load_csv(&f.test, SplitRole::Test, f.class_names.clone())?,
        },
        (None, None) => return Err(Error::config("no dataset configured")),
    };
    let (manifest, catalog) =
        DatasetManifest::describe(&splits, profile.as_ref(), cfg.eval.tail_threshold)?;
    Ok((splits, manifest, catalog))
}

/// Every model the mining methods need.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub backbone: BackboneModel,
    pub backbone_report: BackboneReport,
    pub rc: RecalibrationLayer,
    pub autoencoder: AutoencoderModel,
    pub autoencoder_report: AutoencoderReport,
    pub autoencoder_no_rc: AutoencoderModel,
    pub autoencoder_no_rc_report: AutoencoderReport,
}

pub fn train_stage_backbone(
    cfg: &RunConfig,
    splits: &Splits,
    seed: u64,
) -> Result<(BackboneModel, BackboneReport)> {
    let tc = cfg
        .backbone
        .train
        .with_seed(stage_seed(seed, Stage::Backbone));
    let (model, report) = train_backbone(&splits.train, &cfg.backbone.hidden, &tc)?;
    Ok((model.freeze(), report))
}

pub fn train_stage_recalib(
    cfg: &RunConfig,
    splits: &Splits,
    backbone: &BackboneModel,
    seed: u64,
) -> Result<RecalibrationLayer> {
    let tc = cfg
        .recalib
        .train
        .with_seed(stage_seed(seed, Stage::Recalib));
    fit_rc_layer(
        backbone,
        &splits.train,
        &tc,
        cfg.recalib.gamma,
        &cfg.recalib.alpha,
    )
}

/// Autoencoders on calibrated and on raw backbone Train logits.
pub fn train_stage_autoencoders(
    cfg: &RunConfig,
    splits: &Splits,
    backbone: &BackboneModel,
    rc: &RecalibrationLayer,
    seed: u64,
) -> Result<(
    (AutoencoderModel, AutoencoderReport),
    (AutoencoderModel, AutoencoderReport),
)> {
    let dims = &cfg.autoencoder.encoder_hidden;
    let z: Vec<Vec<f64>> = calibrated_logits(backbone, rc, splits.train.examples())?
        .into_iter()
        .map(|c| c.z)
        .collect();
    let ours = fit_autoencoder(
        &z,
        dims,
        &cfg.autoencoder
            .train
            .with_seed(stage_seed(seed, Stage::Autoencoder)),
    )?;
    let raw: Vec<Vec<f64>> = backbone_logits(backbone, splits.train.examples())?
        .into_iter()
        .map(|c| c.z)
        .collect();
    let no_rc = fit_autoencoder(
        &raw,
        dims,
        &cfg.autoencoder
            .train
            .with_seed(stage_seed(seed, Stage::AutoencoderNoRc)),
    )?;
    Ok((ours, no_rc))
}

pub fn train_models(cfg: &RunConfig, splits: &Splits, seed: u64) -> Result<TrainedModels> {
    let (backbone, backbone_report) = train_stage_backbone(cfg, splits, seed)?;
    let rc = train_stage_recalib(cfg, splits, &backbone, seed)?;
    let ((autoencoder, autoencoder_report), (autoencoder_no_rc, autoencoder_no_rc_report)) =
        train_stage_autoencoders(cfg, splits, &backbone, &rc, seed)?;
    Ok(TrainedModels {
        backbone,
        backbone_report,
        rc,
        autoencoder,
        autoencoder_report,
        autoencoder_no_rc,
        autoencoder_no_rc_report,
    })
}

impl TrainedModels {
    pub fn context<'a>(
        &'a self,
        cfg: &RunConfig,
        catalog: &'a ClassCatalog,
        seed: u64,
    ) -> MiningContext<'a> {
        MiningContext {
            backbone: Some(&self.backbone),
            rc: Some(&self.rc),
            autoencoder: Some(&self.autoencoder),
            autoencoder_no_rc: Some(&self.autoencoder_no_rc),
            proportions: Some(&catalog.proportions),
            baseline_source: cfg.mining.baseline_probabilities,
            seed: stage_seed(seed, Stage::Mining),
            top_k: cfg.mining.top_k,
            min_confidence: cfg.mining.min_confidence,
        }
    }
}

/// Finetune setup for the configured mode, reusing the backbone settings.
pub fn finetune_for(
    cfg: &RunConfig,
    splits: &Splits,
    catalog: &ClassCatalog,
    models: &TrainedModels,
    rank: &RankList,
    seed: u64,
) -> Result<FinetuneReport> {
    let tc = cfg
        .backbone
        .train
        .with_seed(stage_seed(seed, Stage::Backbone));
    let setup = FinetuneSetup {
        train: &splits.train,
        pool: &splits.pool,
        test: &splits.test,
        hidden: &cfg.backbone.hidden,
        cfg: &tc,
        tail: &catalog.tail_classes,
        mode: cfg.mining.finetune_mode,
        base: Some(&models.backbone),
    };
    finetune_experiment(&setup, rank, &cfg.mining.sample_sizes)
}

#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub rank: RankList,
    pub curve: PrCurve,
    pub report: EvalReport,
    pub finetune: Option<FinetuneReport>,
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub catalog: ClassCatalog,
    pub oracle: OracleLabels,
    pub splits: Splits,
    pub models: TrainedModels,
    pub test_accuracy: Vec<Option<f64>>,
    pub methods: Vec<MethodOutcome>,
}

impl SeedOutcome {
    pub fn method(&self, m: Method) -> Option<&MethodOutcome> {
        self.methods.iter().find(|o| o.rank.method == m)
    }
}

/// Runs data, training, mining and evaluation for one seed.
pub fn run_seed(cfg: &RunConfig, seed: u64, with_finetune: bool) -> Result<SeedOutcome> {
    let (splits, _, catalog) = prepare_data(cfg, seed)?;
    let models = train_models(cfg, &splits, seed)?;
    let test_accuracy = per_class_accuracy(&models.backbone, &splits.test)?;
    let oracle = OracleLabels::from_pool(&splits.pool)?;
    let mining_pool = splits.pool.without_oracle();
    let ctx = models.context(cfg, &catalog, seed);
    let mut methods = Vec::with_capacity(cfg.mining.methods.len());
    for &m in &cfg.mining.methods {
        let rank = build_rank_list(&mining_pool, m, &ctx)?;
        let (curve, report) = evaluate(
            &rank,
            &oracle,
            &catalog.tail_classes,
            &cfg.eval.precision_at,
            seed,
        )?;
        let finetune = if with_finetune {
            Some(finetune_for(cfg, &splits, &catalog, &models, &rank, seed)?)
        } else {
            None
        };
        methods.push(MethodOutcome {
            rank,
            curve,
            report,
            finetune,
        });
    }
    Ok(SeedOutcome {
        seed,
        catalog,
        oracle,
        splits,
        models,
        test_accuracy,
        methods,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat {
                mean: 0.0,
                std: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Stat {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub auc_pr: Stat,
    pub avg_f: Stat,
    pub precision_at: BTreeMap<usize, Stat>,
}

/// `(method − baseline) / baseline · 100` for one metric; `None` when the
/// baseline value is not positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method: Method,
    pub baseline: Method,
    pub metric: String,
    pub relative_improvement: Option<f64>,
}

fn metric_values(s: &MethodSummary) -> Vec<(String, f64)> {
    let mut v = vec![
        ("auc_pr".to_string(), s.auc_pr.mean),
        ("avg_f".to_string(), s.avg_f.mean),
    ];
    v.extend(
        s.precision_at
            .iter()
            .map(|(k, st)| (format!("precision@{k}"), st.mean)),
    );
    v
}

/// Pairwise relative improvements between every ordered pair of methods.
pub fn compare_all(summaries: &[MethodSummary]) -> Vec<Comparison> {
    let mut out = Vec::new();
    for a in summaries {
        for b in summaries {
            if a.method == b.method {
                continue;
            }
            for ((metric, va), (_, vb)) in metric_values(a).into_iter().zip(metric_values(b)) {
                out.push(Comparison {
                    method: a.method,
                    baseline: b.method,
                    metric,
                    relative_improvement: relative_improvement(va, vb).ok(),
                });
            }
        }
    }
    out
}

pub fn summarize(reports: &[&EvalReport]) -> Result<Vec<MethodSummary>> {
    let mut by_method: BTreeMap<Method, Vec<&EvalReport>> = BTreeMap::new();
    for r in reports {
        by_method.entry(r.method).or_default().push(r);
    }
    by_method
        .into_iter()
        .map(|(method, rs)| {
            let col = |f: &dyn Fn(&EvalReport) -> f64| {
                Stat::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let ks: Vec<usize> = rs[0].precision_at.keys().copied().collect();
            let precision_at = ks
                .into_iter()
                .map(|k| {
                    let vals = rs
                        .iter()
                        .map(|r| {
                            r.precision_at.get(&k).copied().ok_or_else(|| {
                                Error::invalid(format!("precision@{k} missing for a seed"))
                            })
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    Ok((k, Stat::of(&vals)))
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(MethodSummary {
                method,
                auc_pr: col(&|r| r.auc_pr),
                avg_f: col(&|r| r.avg_f),
                precision_at,
            })
        })
        .collect()
}

/// Aggregate over several seeds, as written to `eval_summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub seeds: Vec<u64>,
    pub tail_classes: Vec<usize>,
    pub reports: Vec<EvalReport>,
    pub methods: Vec<MethodSummary>,
    pub relative_improvements: Vec<Comparison>,
}

impl EvalSummary {
    pub fn from_reports(
        seeds: Vec<u64>,
        tail_classes: Vec<usize>,
        reports: Vec<EvalReport>,
    ) -> Result<Self> {
        let methods = summarize(&reports.iter().collect::<Vec<_>>())?;
        let relative_improvements = compare_all(&methods);
        Ok(EvalSummary {
            seeds,
            tail_classes,
            reports,
            methods,
            relative_improvements,
        })
    }

    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

/// Runs every configured seed.
pub fn run_sweep(cfg: &RunConfig, with_finetune: bool) -> Result<Vec<SeedOutcome>> {
    cfg.eval
        .seeds
        .iter()
        .map(|&s| run_seed(cfg, s, with_finetune))
        .collect()
}

pub fn sweep_summary(outcomes: &[SeedOutcome]) -> Result<EvalSummary> {
    let first = outcomes
        .first()
        .ok_or_else(|| Error::invalid("no seeds were run"))?;
    let reports = outcomes
        .iter()
        .flat_map(|o| o.methods.iter().map(|m| m.report.clone()))
        .collect();
    EvalSummary::from_reports(
        outcomes.iter().map(|o| o.seed).collect(),
        first.catalog.tail_classes.clone(),
        reports,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_values() {
        let s = Stat::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-15);
        assert_eq!(Stat::of(&[4.0]).std, 0.0);
    }

    #[test]
    fn comparisons_cover_all_pairs() {
        let mk = |method, v: f64| EvalReport {
            method,
            seed: 0,
            auc_pr: v,
            avg_f: v,
            precision_at: BTreeMap::from([(50, v)]),
        };
        let reports = vec![
            mk(Method::Ours, 0.6),
            mk(Method::Entropy, 0.3),
            mk(Method::Random, 0.0),
        ];
        let summary = EvalSummary::from_reports(vec![0], vec![9], reports).unwrap();
        assert_eq!(summary.methods.len(), 3);
        // 3·2 ordered pairs × 3 metrics
        assert_eq!(summary.relative_improvements.len(), 18);
        let c = summary
            .relative_improvements
            .iter()
            .find(|c| {
                c.method == Method::Ours && c.baseline == Method::Entropy && c.metric == "auc_pr"
            })
            .unwrap();
        assert!((c.relative_improvement.unwrap() - 100.0).abs() < 1e-9);
        assert!(summary
            .relative_improvements
            .iter()
            .filter(|c| c.baseline == Method::Random)
            .all(|c| c.relative_improvement.is_none()));
    }
}
