//! Directional checks on the default synthetic benchmark, averaged over the
//! configured seeds.

use std::sync::OnceLock;

use tailminer::config::RunConfig;
use tailminer::experiment::{finetune_for, run_sweep, SeedOutcome};
use tailminer::nn::softmax;
use tailminer::ranking::{score_ours, Method, RankList};

fn sweep() -> &'static (RunConfig, Vec<SeedOutcome>) {
    static SWEEP: OnceLock<(RunConfig, Vec<SeedOutcome>)> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let cfg = RunConfig::synthetic_default();
        let outs = run_sweep(&cfg, false).unwrap();
        assert!(outs.len() >= 5);
        (cfg, outs)
    })
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn is_tail(o: &SeedOutcome, class: usize) -> bool {
    o.catalog.tail_classes.contains(&class)
}

#[test]
fn backbone_is_worse_on_tail_classes() {
    let (_, outs) = sweep();
    for o in outs {
        let acc = |tail: bool| {
            mean(
                o.test_accuracy
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| is_tail(o, *k) == tail)
                    .map(|(_, a)| a.unwrap()),
            )
        };
        assert!(
            acc(true) < acc(false),
            "seed {}: tail {} head {}",
            o.seed,
            acc(true),
            acc(false)
        );
    }
}

#[test]
fn recalibration_raises_tail_probability_mass() {
    let (_, outs) = sweep();
    let (mut before, mut after) = (0.0, 0.0);
    for o in outs {
        for e in o.splits.pool.examples() {
            if !is_tail(o, e.oracle_label().unwrap()) {
                continue;
            }
            let raw = softmax(&o.models.backbone.logits(&e.features).unwrap()).unwrap();
            let z = o
                .models
                .rc
                .apply(&o.models.backbone.penultimate(&e.features).unwrap())
                .unwrap();
            let cal = softmax(&z).unwrap();
            before += o.catalog.tail_classes.iter().map(|&k| raw[k]).sum::<f64>();
            after += o.catalog.tail_classes.iter().map(|&k| cal[k]).sum::<f64>();
        }
    }
    assert!(after > before, "tail mass {before} -> {after}");
}

#[test]
fn tail_examples_reconstruct_worse_than_head_examples() {
    let (_, outs) = sweep();
    for o in outs {
        let (mut tail, mut head) = (Vec::new(), Vec::new());
        for e in o.splits.pool.examples() {
            let z = o
                .models
                .rc
                .apply(&o.models.backbone.penultimate(&e.features).unwrap())
                .unwrap();
            let s = score_ours(&z, &o.models.autoencoder.reconstruct(&z).unwrap()).unwrap();
            if is_tail(o, e.oracle_label().unwrap()) {
                tail.push(s);
            } else {
                head.push(s);
            }
        }
        let (t, h) = (mean(tail), mean(head));
        assert!(t > h, "seed {}: tail {t} head {h}", o.seed);
    }
}

#[test]
fn ours_mines_more_tail_than_random_in_top_50() {
    let (_, outs) = sweep();
    let count = |m: Method| {
        mean(outs.iter().map(|o| {
            o.method(m)
                .unwrap()
                .rank
                .top(50)
                .iter()
                .filter(|e| is_tail(o, o.oracle.get(e.example_id).unwrap()))
                .count() as f64
        }))
    };
    assert!(count(Method::Ours) > count(Method::Random));
}

#[test]
fn perfect_annotations_do_not_hurt_tail_accuracy() {
    let (cfg, outs) = sweep();
    let mut cfg = cfg.clone();
    cfg.mining.sample_sizes = vec![100];
    let mut deltas = Vec::new();
    for o in outs {
        let scores = o
            .splits
            .pool
            .examples()
            .iter()
            .map(|e| {
                (
                    e.id,
                    if is_tail(o, e.oracle_label().unwrap()) {
                        1.0
                    } else {
                        0.0
                    },
                )
            })
            .collect();
        let rank = RankList::from_scores(Method::Ours, scores).unwrap();
        let report = finetune_for(&cfg, &o.splits, &o.catalog, &o.models, &rank, o.seed).unwrap();
        assert_eq!(report.rows[0].tail_examples_added, 100);
        deltas.push(report.rows[0].tail_delta);
    }
    assert!(mean(deltas.iter().copied()) >= 0.0, "{deltas:?}");
}
