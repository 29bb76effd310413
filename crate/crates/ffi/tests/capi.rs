use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use tailminer::cli::run_from_args;
use tailminer::mcmau::AutoencoderModel;
use tailminer::nn::Checkpoint;
use tailminer::ranking::score_ours;
use tailminer::recalib::RecalibrationLayer;
use tailminer_ffi::*;

fn last_error() -> String {
    let p = tm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(tm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn softmax_and_scores() {
    let z = [1.0, 2.0, 3.0];
    let mut p = [0.0; 3];
    assert_eq!(
        unsafe { tm_softmax(z.as_ptr(), 3, p.as_mut_ptr()) },
        TmStatus::Ok
    );
    let e: Vec<f64> = z.iter().map(|v: &f64| v.exp()).collect();
    let sum: f64 = e.iter().sum();
    for (a, b) in p.iter().zip(&e) {
        assert!((a - b / sum).abs() < 1e-15);
    }

    let mut s = -1.0;
    assert_eq!(
        unsafe { tm_score_ours(z.as_ptr(), z.as_ptr(), 3, &mut s) },
        TmStatus::Ok
    );
    assert_eq!(s, 0.0);

    let u = [0.25; 4];
    assert_eq!(
        unsafe { tm_score_entropy(u.as_ptr(), 4, &mut s) },
        TmStatus::Ok
    );
    assert!((s - 4f64.ln()).abs() < 1e-12);
    assert_eq!(unsafe { tm_score_max(u.as_ptr(), 4, &mut s) }, TmStatus::Ok);
    assert_eq!(s, 0.75);
    let mut w = 0.0;
    assert_eq!(
        unsafe { tm_score_weighted_entropy(u.as_ptr(), u.as_ptr(), 4, &mut w) },
        TmStatus::Ok
    );
    // uniform proportions reduce to plain entropy
    assert!((w - 4f64.ln()).abs() < 1e-12);
}

#[test]
fn ranking_metrics() {
    let flags = [0u8, 0, 0, 1];
    let mut auc = 0.0;
    assert_eq!(
        unsafe { tm_auc_pr(flags.as_ptr(), 4, &mut auc) },
        TmStatus::Ok
    );
    assert!((auc - 0.25).abs() < 1e-12);
    let flags = [1u8, 0, 1, 0];
    let mut f = 0.0;
    assert_eq!(unsafe { tm_avg_f(flags.as_ptr(), 4, &mut f) }, TmStatus::Ok);
    // F at each prefix: 2/3, 1/2, 4/5, 2/3
    let expected = (2.0 / 3.0 + 0.5 + 0.8 + 2.0 / 3.0) / 4.0;
    assert!((f - expected).abs() < 1e-12);
}

#[test]
fn errors_set_status_and_message() {
    let mut s = 0.0;
    let z = [1.0, f64::NAN];
    assert_eq!(
        unsafe { tm_softmax(z.as_ptr(), 2, ptr::null_mut()) },
        TmStatus::NullPointer
    );
    assert!(last_error().contains("out"));
    let mut out = [0.0; 2];
    assert_eq!(
        unsafe { tm_softmax(z.as_ptr(), 2, out.as_mut_ptr()) },
        TmStatus::InvalidInput
    );
    assert!(!last_error().is_empty());
    assert_eq!(
        unsafe { tm_score_ours(ptr::null(), z.as_ptr(), 2, &mut s) },
        TmStatus::NullPointer
    );
    let bad = [0.5, 0.6];
    assert_eq!(
        unsafe { tm_score_entropy(bad.as_ptr(), 2, &mut s) },
        TmStatus::InvalidInput
    );
}

#[test]
fn missing_files_report_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("nope.weights").to_str().unwrap()).unwrap();
    let mut net: *mut TmNetwork = ptr::null_mut();
    assert_eq!(
        unsafe { tm_network_load(path.as_ptr(), &mut net) },
        TmStatus::Io
    );
    assert!(net.is_null());
    let dirc = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut miner: *mut TmMiner = ptr::null_mut();
    assert_eq!(
        unsafe { tm_miner_open(dirc.as_ptr(), &mut miner) },
        TmStatus::MissingStage
    );
    assert!(last_error().contains("train"));
    unsafe {
        tm_network_free(ptr::null_mut());
        tm_miner_free(ptr::null_mut());
    }
}

fn small_run(out: &Path) -> PathBuf {
    let sets = [
        "dataset.profile.head_count=60",
        "dataset.profile.multipliers=[1.0,1.0,0.1]",
        "dataset.profile.feature_dim=4",
        "dataset.profile.pool_per_class=10",
        "dataset.profile.test_per_class=10",
        "backbone.hidden=[6,5]",
        "backbone.train.epochs=3",
        "recalib.train.epochs=3",
        "autoencoder.train.epochs=3",
    ];
    for cmd in ["generate", "train", "recalibrate", "train-ae"] {
        let mut args = vec![
            "tailminer".to_string(),
            "--out".into(),
            out.display().to_string(),
        ];
        for s in sets {
            args.push("--set".into());
            args.push(s.into());
        }
        args.push(cmd.into());
        assert_eq!(run_from_args(args), 0, "{cmd} failed");
    }
    std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.is_dir())
        .unwrap()
}

#[test]
fn miner_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let run = small_run(tmp.path());
    let runc = CString::new(run.to_str().unwrap()).unwrap();
    let mut miner: *mut TmMiner = ptr::null_mut();
    assert_eq!(
        unsafe { tm_miner_open(runc.as_ptr(), &mut miner) },
        TmStatus::Ok,
        "{}",
        last_error()
    );
    let (mut d, mut c) = (0usize, 0usize);
    assert_eq!(
        unsafe { tm_miner_dims(miner, &mut d, &mut c) },
        TmStatus::Ok
    );
    assert_eq!((d, c), (4, 3));

    let xs = [0.3, -1.0, 2.0, 0.5, 1.5, 0.0, -0.7, 0.2];
    let mut scores = [0.0; 2];
    assert_eq!(
        unsafe { tm_miner_score(miner, xs.as_ptr(), 2, 4, scores.as_mut_ptr()) },
        TmStatus::Ok
    );

    let backbone = tailminer::backbone::BackboneModel::from_checkpoint(
        Checkpoint::load(&run.join("backbone.weights")).unwrap(),
    )
    .unwrap();
    let rc =
        RecalibrationLayer::from_checkpoint(Checkpoint::load(&run.join("rc.weights")).unwrap())
            .unwrap();
    let ae = AutoencoderModel::from_checkpoint(Checkpoint::load(&run.join("ae.weights")).unwrap())
        .unwrap();
    for (row, got) in xs.chunks(4).zip(scores) {
        let z = rc.apply(&backbone.penultimate(row).unwrap()).unwrap();
        let want = score_ours(&z, &ae.reconstruct(&z).unwrap()).unwrap();
        assert_eq!(got.to_bits(), want.to_bits());

        let mut zc = [0.0; 3];
        assert_eq!(
            unsafe { tm_miner_calibrated_logits(miner, row.as_ptr(), 4, zc.as_mut_ptr(), 3) },
            TmStatus::Ok
        );
        assert_eq!(zc.to_vec(), z);
    }
    let mut short = [0.0; 2];
    assert_eq!(
        unsafe { tm_miner_calibrated_logits(miner, xs.as_ptr(), 4, short.as_mut_ptr(), 2) },
        TmStatus::InvalidInput
    );
    unsafe { tm_miner_free(miner) };

    let wpath = CString::new(run.join("ae.weights").to_str().unwrap()).unwrap();
    let mut net: *mut TmNetwork = ptr::null_mut();
    assert_eq!(
        unsafe { tm_network_load(wpath.as_ptr(), &mut net) },
        TmStatus::Ok
    );
    let (mut i, mut o) = (0usize, 0usize);
    assert_eq!(
        unsafe { tm_network_dims(net, &mut i, &mut o) },
        TmStatus::Ok
    );
    assert_eq!((i, o), (3, 3));
    let z = [0.1, -0.2, 0.3];
    let mut y = [0.0; 3];
    assert_eq!(
        unsafe { tm_network_forward(net, z.as_ptr(), 3, y.as_mut_ptr(), 3) },
        TmStatus::Ok
    );
    assert_eq!(y.to_vec(), ae.reconstruct(&z).unwrap());
    unsafe { tm_network_free(net) };
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("tailminer.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "tm_last_error_message",
        "tm_version",
        "tm_softmax",
        "tm_score_ours",
        "tm_score_max",
        "tm_score_entropy",
        "tm_score_weighted_entropy",
        "tm_auc_pr",
        "tm_avg_f",
        "tm_network_load",
        "tm_network_forward",
        "tm_network_free",
        "tm_miner_open",
        "tm_miner_score",
        "tm_miner_free",
        "typedef struct TmMiner TmMiner",
        "TM_STATUS_MISSING_STAGE = 6",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(header())
        .status()
    else {
        eprintln!("no C compiler available; header compile check skipped");
        return;
    };
    assert!(status.success());
}
