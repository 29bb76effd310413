//! Command-line front end. Every command reads and writes one run directory,
//! `<out>/run-<config hash>-s<seed>`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::{per_class_accuracy, BackboneModel};
use crate::config::{stage_seed, RunConfig, Stage};
use crate::data::{
    load_csv, save_csv, ClassCatalog, DatasetManifest, OracleLabels, SplitRole, Splits,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, FinetuneMode, PrCurve};
use crate::experiment::{self, run_sweep, sweep_summary, EvalSummary};
use crate::fsutil::{fmt_f64, read_to_string, sha256_file, write_atomic};
use crate::mcmau::AutoencoderModel;
use crate::nn::{build_mlp, gradient_check, Activation, Checkpoint, FocalLossConfig, Loss, Sample};
use crate::ranking::{
    build_rank_list, read_rank_csv, write_rank_csv, Method, MiningContext, RankList,
};
use crate::recalib::RecalibrationLayer;
use crate::rng::seeded;

#[derive(Debug, Parser)]
#[command(
    name = "tailminer",
    version,
    about = "Mine tail-class examples from an unlabeled pool"
)]
pub struct Cli {
    /// TOML run configuration; the built-in synthetic benchmark when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Run seed; overrides the `seed` key of the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Root directory for run directories.
    #[arg(long, global = true, value_name = "DIR", default_value = "runs")]
    pub out: PathBuf,
    /// Override one config key, e.g. `--set backbone.train.epochs=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write train/pool/test CSVs and the dataset manifest.
    Generate,
    /// Train and freeze the backbone classifier.
    Train,
    /// Fit the recalibration layer on the frozen backbone.
    Recalibrate,
    /// Fit the mining autoencoders on Train logits.
    TrainAe,
    /// Rank the pool with one or more methods.
    Mine {
        /// Method tag; repeatable. Defaults to the configured methods.
        #[arg(long = "method", value_name = "TAG")]
        methods: Vec<String>,
    },
    /// Mine with every configured method and score against oracle labels.
    Eval {
        /// Run the full pipeline for every configured seed and aggregate.
        #[arg(long)]
        sweep: bool,
    },
    /// Annotate top-ranked examples, retrain, and report tail accuracy.
    Finetune {
        #[arg(long = "method", value_name = "TAG")]
        methods: Vec<String>,
        /// Continue training the existing backbone instead of retraining.
        #[arg(long = "continue")]
        continue_training: bool,
    },
    /// Compare analytic and numeric gradients on random networks.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        nets: usize,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Resolved configuration plus the run directory it maps to.
#[derive(Debug, Clone)]
pub struct Session {
    pub config: RunConfig,
    pub seed: u64,
    pub run_dir: RunDir,
}

impl Session {
    pub fn open(
        config: Option<&Path>,
        seed: Option<u64>,
        out: &Path,
        overrides: &[String],
    ) -> Result<Self> {
        let mut cfg = match config {
            Some(p) => RunConfig::load(p, overrides)?,
            None => {
                let text = toml::to_string(&RunConfig::synthetic_default())
                    .map_err(|e| Error::config(format!("cannot render default config: {e}")))?;
                let cfg = RunConfig::from_toml_str(&text, overrides)?;
                cfg.validate()?;
                cfg
            }
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let seed = cfg.seed;
        let run_dir = RunDir {
            root: out.join(format!("run-{}-s{seed}", cfg.hash())),
        };
        Ok(Session {
            config: cfg,
            seed,
            run_dir,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn manifest(&self) -> PathBuf {
        self.root.join("data").join("manifest.json")
    }

    fn split(&self, role: SplitRole) -> PathBuf {
        let name = match role {
            SplitRole::Train => "train.csv",
            SplitRole::Pool => "pool.csv",
            SplitRole::Test => "test.csv",
        };
        self.root.join("data").join(name)
    }

    fn require(&self, stage: &'static str, name: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingStage { stage, path: p })
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn load_splits(run: &RunDir) -> Result<(Splits, DatasetManifest)> {
    let mpath = run.manifest();
    if !mpath.is_file() {
        return Err(Error::MissingStage {
            stage: "generate",
            path: mpath,
        });
    }
    let manifest: DatasetManifest = read_json(&mpath)?;
    let names = manifest.class_names.clone();
    let splits = Splits {
        train: load_csv(
            &run.split(SplitRole::Train),
            SplitRole::Train,
            names.clone(),
        )?,
        pool: load_csv(&run.split(SplitRole::Pool), SplitRole::Pool, names.clone())?,
        test: load_csv(&run.split(SplitRole::Test), SplitRole::Test, names)?,
    };
    Ok((splits, manifest))
}

fn catalog_of(splits: &Splits, manifest: &DatasetManifest) -> Result<ClassCatalog> {
    crate::data::compute_catalog(&splits.train, manifest.tail_threshold)
}

fn load_backbone(run: &RunDir) -> Result<BackboneModel> {
    let p = run.require("train", "backbone.weights")?;
    Ok(BackboneModel::from_checkpoint(Checkpoint::load(&p)?)?.freeze())
}

fn load_rc(run: &RunDir) -> Result<RecalibrationLayer> {
    let p = run.require("recalibrate", "rc.weights")?;
    RecalibrationLayer::from_checkpoint(Checkpoint::load(&p)?)
}

fn load_ae(run: &RunDir, name: &str) -> Result<AutoencoderModel> {
    let p = run.require("train-ae", name)?;
    AutoencoderModel::from_checkpoint(Checkpoint::load(&p)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct BackboneReportFile {
    epochs_run: usize,
    train_loss: Vec<f64>,
    train_accuracy: f64,
    test_per_class_accuracy: Vec<Option<f64>>,
    test_accuracy: f64,
    checksum: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RcReportFile {
    gamma: f64,
    alphas: Vec<f64>,
    report: crate::recalib::RecalibReport,
    checksum: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct AeReportFile {
    ours: crate::mcmau::AutoencoderReport,
    ours_checksum: String,
    no_rc: crate::mcmau::AutoencoderReport,
    no_rc_checksum: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RankManifest {
    method: Method,
    seed: u64,
    config_hash: String,
    pool_examples: usize,
    rank_sha256: String,
    checksums: BTreeMap<String, String>,
}

fn parse_methods(tags: &[String], default: &[Method]) -> Result<Vec<Method>> {
    if tags.is_empty() {
        return Ok(default.to_vec());
    }
    tags.iter().map(|t| t.parse()).collect()
}

pub fn run(cli: &Cli) -> Result<Vec<String>> {
    if let Command::Gradcheck {
        nets,
        epsilon,
        tolerance,
    } = &cli.command
    {
        let seed = cli.seed.unwrap_or(0);
        return cmd_gradcheck(*nets, *epsilon, *tolerance, seed);
    }
    let session = Session::open(cli.config.as_deref(), cli.seed, &cli.out, &cli.overrides)?;
    match &cli.command {
        Command::Generate => cmd_generate(&session),
        Command::Train => cmd_train(&session),
        Command::Recalibrate => cmd_recalibrate(&session),
        Command::TrainAe => cmd_train_ae(&session),
        Command::Mine { methods } => {
            let methods = parse_methods(methods, &session.config.mining.methods)?;
            cmd_mine(&session, &methods)
        }
        Command::Eval { sweep: false } => cmd_eval(&session),
        Command::Eval { sweep: true } => cmd_sweep(&session, &cli.out),
        Command::Finetune {
            methods,
            continue_training,
        } => {
            let methods = parse_methods(methods, &[Method::Ours, Method::Random])?;
            let mode = if *continue_training {
                FinetuneMode::Continue
            } else {
                session.config.mining.finetune_mode
            };
            cmd_finetune(&session, &methods, mode)
        }
        Command::Gradcheck { .. } => unreachable!("handled above"),
    }
}

pub fn cmd_generate(s: &Session) -> Result<Vec<String>> {
    let (splits, manifest, _) = experiment::prepare_data(&s.config, s.seed)?;
    for (role, ds) in [
        (SplitRole::Train, &splits.train),
        (SplitRole::Pool, &splits.pool),
        (SplitRole::Test, &splits.test),
    ] {
        save_csv(ds, &s.run_dir.split(role))?;
    }
    write_json(&s.run_dir.manifest(), &manifest)?;
    write_json(&s.run_dir.path("config.json"), &s.config)?;
    Ok(vec![format!(
        "generated {} train, {} pool, {} test examples in {}",
        splits.train.len(),
        splits.pool.len(),
        splits.test.len(),
        s.run_dir.root.join("data").display()
    )])
}

pub fn cmd_train(s: &Session) -> Result<Vec<String>> {
    let (splits, _) = load_splits(&s.run_dir)?;
    let (model, report) = experiment::train_stage_backbone(&s.config, &splits, s.seed)?;
    let per_class = per_class_accuracy(&model, &splits.test)?;
    let test_accuracy = crate::backbone::accuracy(&model, &splits.test)?;
    model
        .to_checkpoint()
        .save(&s.run_dir.path("backbone.weights"))?;
    write_json(
        &s.run_dir.path("backbone_report.json"),
        &BackboneReportFile {
            epochs_run: report.epochs_run,
            train_loss: report.train_loss,
            train_accuracy: report.train_accuracy,
            test_per_class_accuracy: per_class,
            test_accuracy,
            checksum: model.checksum(),
        },
    )?;
    Ok(vec![format!(
        "backbone trained: test accuracy {test_accuracy:.4}, saved {}",
        s.run_dir.path("backbone.weights").display()
    )])
}

pub fn cmd_recalibrate(s: &Session) -> Result<Vec<String>> {
    let backbone = load_backbone(&s.run_dir)?;
    let (splits, _) = load_splits(&s.run_dir)?;
    let rc = experiment::train_stage_recalib(&s.config, &splits, &backbone, s.seed)?;
    rc.to_checkpoint().save(&s.run_dir.path("rc.weights"))?;
    write_json(
        &s.run_dir.path("rc_report.json"),
        &RcReportFile {
            gamma: rc.focal.gamma,
            alphas: rc.focal.alphas.clone(),
            report: rc.report.clone(),
            checksum: crate::fsutil::sha256_hex(rc.to_checkpoint().to_text().as_bytes()),
        },
    )?;
    Ok(vec![format!(
        "recalibration layer fit in {} epochs (best {:?}), saved {}",
        rc.report.epochs_run,
        rc.report.best_epoch,
        s.run_dir.path("rc.weights").display()
    )])
}

pub fn cmd_train_ae(s: &Session) -> Result<Vec<String>> {
    let backbone = load_backbone(&s.run_dir)?;
    let rc = load_rc(&s.run_dir)?;
    let (splits, _) = load_splits(&s.run_dir)?;
    let ((ae, ae_report), (no_rc, no_rc_report)) =
        experiment::train_stage_autoencoders(&s.config, &splits, &backbone, &rc, s.seed)?;
    ae.to_checkpoint().save(&s.run_dir.path("ae.weights"))?;
    no_rc
        .to_checkpoint()
        .save(&s.run_dir.path("ae_no_rc.weights"))?;
    let err = ae_report.final_reconstruction_error;
    write_json(
        &s.run_dir.path("ae_report.json"),
        &AeReportFile {
            ours: ae_report,
            ours_checksum: ae.checksum(),
            no_rc: no_rc_report,
            no_rc_checksum: no_rc.checksum(),
        },
    )?;
    Ok(vec![format!(
        "autoencoders trained: reconstruction error {err:.6}, saved {}",
        s.run_dir.path("ae.weights").display()
    )])
}

/// Models the listed methods need, loaded lazily so that e.g. `random`
/// works right after `generate`.
struct LoadedModels {
    backbone: Option<BackboneModel>,
    rc: Option<RecalibrationLayer>,
    ae: Option<AutoencoderModel>,
    ae_no_rc: Option<AutoencoderModel>,
}

fn load_models_for(run: &RunDir, methods: &[Method], s: &Session) -> Result<LoadedModels> {
    let needs_bb = methods.iter().any(|&m| m != Method::Random);
    let needs_rc = methods.iter().any(|&m| {
        m == Method::Ours
            || (matches!(
                m,
                Method::MaxScore | Method::Entropy | Method::WeightedEntropy
            ) && s.config.mining.baseline_probabilities
                == crate::ranking::ProbabilitySource::Recalibrated)
    });
    Ok(LoadedModels {
        backbone: if needs_bb {
            Some(load_backbone(run)?)
        } else {
            None
        },
        rc: if needs_rc { Some(load_rc(run)?) } else { None },
        ae: if methods.contains(&Method::Ours) {
            Some(load_ae(run, "ae.weights")?)
        } else {
            None
        },
        ae_no_rc: if methods.contains(&Method::OursNoRc) {
            Some(load_ae(run, "ae_no_rc.weights")?)
        } else {
            None
        },
    })
}

fn mine_all(s: &Session, methods: &[Method]) -> Result<(Vec<RankList>, Splits, DatasetManifest)> {
    let (splits, manifest) = load_splits(&s.run_dir)?;
    let catalog = catalog_of(&splits, &manifest)?;
    let models = load_models_for(&s.run_dir, methods, s)?;
    let ctx = MiningContext {
        backbone: models.backbone.as_ref(),
        rc: models.rc.as_ref(),
        autoencoder: models.ae.as_ref(),
        autoencoder_no_rc: models.ae_no_rc.as_ref(),
        proportions: Some(&catalog.proportions),
        baseline_source: s.config.mining.baseline_probabilities,
        seed: stage_seed(s.seed, Stage::Mining),
        top_k: s.config.mining.top_k,
        min_confidence: s.config.mining.min_confidence,
    };
    // Mining never sees oracle labels.
    let pool = splits.pool.without_oracle();
    let mut checksums = BTreeMap::new();
    checksums.insert(
        "pool.csv".to_string(),
        sha256_file(&s.run_dir.split(SplitRole::Pool))?,
    );
    checksums.insert(
        "train.csv".to_string(),
        sha256_file(&s.run_dir.split(SplitRole::Train))?,
    );
    for name in [
        "backbone.weights",
        "rc.weights",
        "ae.weights",
        "ae_no_rc.weights",
    ] {
        let p = s.run_dir.path(name);
        if p.is_file() {
            checksums.insert(name.to_string(), sha256_file(&p)?);
        }
    }
    let mut ranks = Vec::with_capacity(methods.len());
    for &m in methods {
        let rank = build_rank_list(&pool, m, &ctx)?;
        let bytes = write_rank_csv(&rank)?;
        write_atomic(&s.run_dir.path(&format!("rank_{m}.csv")), &bytes)?;
        write_json(
            &s.run_dir.path(&format!("rank_{m}.json")),
            &RankManifest {
                method: m,
                seed: s.seed,
                config_hash: s.config.hash(),
                pool_examples: rank.len(),
                rank_sha256: crate::fsutil::sha256_hex(&bytes),
                checksums: checksums.clone(),
            },
        )?;
        ranks.push(rank);
    }
    Ok((ranks, splits, manifest))
}

pub fn cmd_mine(s: &Session, methods: &[Method]) -> Result<Vec<String>> {
    let (ranks, _, _) = mine_all(s, methods)?;
    Ok(ranks
        .iter()
        .map(|r| {
            format!(
                "ranked {} pool examples with `{}` into {}",
                r.len(),
                r.method,
                s.run_dir.path(&format!("rank_{}.csv", r.method)).display()
            )
        })
        .collect())
}

fn write_curve(s: &Session, m: Method, curve: &PrCurve) -> Result<()> {
    let mut csv = String::from("k,precision,recall,f_score\n");
    let mut tsv = String::from("recall\tprecision\n");
    for p in &curve.points {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            p.k,
            fmt_f64(p.precision),
            fmt_f64(p.recall),
            fmt_f64(p.f_score)
        ));
        tsv.push_str(&format!(
            "{}\t{}\n",
            fmt_f64(p.recall),
            fmt_f64(p.precision)
        ));
    }
    write_atomic(&s.run_dir.path(&format!("pr_{m}.csv")), csv.as_bytes())?;
    write_atomic(&s.run_dir.path(&format!("pr_{m}.tsv")), tsv.as_bytes())
}

fn summary_lines(summary: &EvalSummary) -> Vec<String> {
    summary
        .methods
        .iter()
        .map(|m| {
            let p: Vec<String> = m
                .precision_at
                .iter()
                .map(|(k, st)| format!("P@{k} {:.4}", st.mean))
                .collect();
            format!(
                "{:<17} AUC-PR {:.4}  avg-F {:.4}  {}",
                m.method.tag(),
                m.auc_pr.mean,
                m.avg_f.mean,
                p.join("  ")
            )
        })
        .collect()
}

pub fn cmd_eval(s: &Session) -> Result<Vec<String>> {
    let methods = s.config.mining.methods.clone();
    let (ranks, splits, manifest) = mine_all(s, &methods)?;
    let oracle = OracleLabels::from_pool(&splits.pool)?;
    let mut reports = Vec::with_capacity(ranks.len());
    for rank in &ranks {
        let (curve, report) = evaluate(
            rank,
            &oracle,
            &manifest.tail_classes,
            &s.config.eval.precision_at,
            s.seed,
        )?;
        write_curve(s, rank.method, &curve)?;
        reports.push(report);
    }
    let summary = EvalSummary::from_reports(vec![s.seed], manifest.tail_classes.clone(), reports)?;
    let path = s.run_dir.path("eval_summary.json");
    write_json(&path, &summary)?;
    let mut lines = summary_lines(&summary);
    lines.push(format!("summary written to {}", path.display()));
    Ok(lines)
}

pub fn cmd_sweep(s: &Session, out: &Path) -> Result<Vec<String>> {
    let outcomes = run_sweep(&s.config, false)?;
    let summary = sweep_summary(&outcomes)?;
    let dir = out.join(format!("sweep-{}", s.config.hash()));
    let path = dir.join("eval_summary.json");
    write_json(&path, &summary)?;
    let mut lines = summary_lines(&summary);
    lines.push(format!(
        "sweep over seeds {:?} written to {}",
        summary.seeds,
        path.display()
    ));
    Ok(lines)
}

pub fn cmd_finetune(s: &Session, methods: &[Method], mode: FinetuneMode) -> Result<Vec<String>> {
    let (splits, manifest) = load_splits(&s.run_dir)?;
    let catalog = catalog_of(&splits, &manifest)?;
    let backbone = load_backbone(&s.run_dir)?;
    let mut cfg = s.config.clone();
    cfg.mining.finetune_mode = mode;
    let mut lines = Vec::new();
    for &m in methods {
        let path = s.run_dir.require("mine", &format!("rank_{m}.csv"))?;
        let rank = read_rank_csv(&read_to_string(&path)?, &path.display().to_string())?;
        let tc = cfg
            .backbone
            .train
            .with_seed(stage_seed(s.seed, Stage::Backbone));
        let setup = crate::eval::FinetuneSetup {
            train: &splits.train,
            pool: &splits.pool,
            test: &splits.test,
            hidden: &cfg.backbone.hidden,
            cfg: &tc,
            tail: &catalog.tail_classes,
            mode,
            base: Some(&backbone),
        };
        let report = crate::eval::finetune_experiment(&setup, &rank, &cfg.mining.sample_sizes)?;
        write_json(&s.run_dir.path(&format!("finetune_{m}.json")), &report)?;
        for row in &report.rows {
            lines.push(format!(
                "{:<17} n={:<4} tail added {:<4} tail accuracy {:.4} (delta {:+.4})",
                m.tag(),
                row.sample_size,
                row.tail_examples_added,
                row.tail_accuracy,
                row.tail_delta
            ));
        }
    }
    Ok(lines)
}

/// Maximum relative gradient error per loss over `nets` random three-layer
/// networks.
pub fn gradcheck_suite(nets: usize, epsilon: f64, seed: u64) -> Result<Vec<(&'static str, f64)>> {
    let mut rng = seeded(seed, crate::rng::stream::INIT);
    let mut worst = [("cross_entropy", 0.0f64), ("focal", 0.0), ("mse", 0.0)];
    for _ in 0..nets {
        let input = rng.random_range(2..6);
        let hidden = [rng.random_range(2..7), rng.random_range(2..7)];
        let classes = rng.random_range(2..5);
        let mut net = build_mlp(input, &hidden, classes, Activation::Identity, &mut rng);
        // nonzero biases keep ReLU inputs off the kink at 0
        for layer in &mut net.layers {
            layer
                .biases
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        let batch_len = rng.random_range(1..6);
        let xs: Vec<Vec<f64>> = (0..batch_len)
            .map(|_| (0..input).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let class_batch: Vec<Sample> = xs
            .iter()
            .map(|x| Sample::class(x.clone(), rng.random_range(0..classes)))
            .collect();
        let value_batch: Vec<Sample> = xs
            .iter()
            .map(|x| {
                Sample::values(
                    x.clone(),
                    (0..classes).map(|_| rng.random_range(-1.0..1.0)).collect(),
                )
            })
            .collect();
        let alphas = (0..classes).map(|_| rng.random_range(0.1..=1.0)).collect();
        let focal = Loss::Focal(FocalLossConfig::new(rng.random_range(0.0..3.0), alphas)?);
        let errs = [
            gradient_check(&net, &class_batch, &Loss::CrossEntropy, epsilon)?,
            gradient_check(&net, &class_batch, &focal, epsilon)?,
            gradient_check(&net, &value_batch, &Loss::Mse, epsilon)?,
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            w.1 = w.1.max(e);
        }
    }
    Ok(worst.to_vec())
}

pub fn cmd_gradcheck(nets: usize, epsilon: f64, tolerance: f64, seed: u64) -> Result<Vec<String>> {
    if nets == 0 || !(epsilon > 0.0) {
        return Err(Error::config(
            "gradcheck needs at least one net and a positive epsilon",
        ));
    }
    let worst = gradcheck_suite(nets, epsilon, seed)?;
    let lines: Vec<String> = worst
        .iter()
        .map(|(name, e)| format!("{name:<14} max relative error {e:.3e} over {nets} nets"))
        .collect();
    if let Some((name, e)) = worst.iter().find(|(_, e)| !(*e < tolerance)) {
        for l in &lines {
            eprintln!("{l}");
        }
        return Err(Error::GradientCheck(format!(
            "{name}: max relative error {e:.3e} >= {tolerance:.1e}"
        )));
    }
    Ok(lines)
}
