//! C ABI over the tailminer library.
//!
//! Every fallible function returns a [`TmStatus`]; on failure a description is
//! available from [`tm_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use tailminer::backbone::BackboneModel;
use tailminer::eval::{auc_pr, avg_f, pr_curve_from_flags};
use tailminer::mcmau::AutoencoderModel;
use tailminer::nn::{softmax, Checkpoint, Network};
use tailminer::ranking::{score_entropy, score_max, score_ours, score_weighted_entropy};
use tailminer::recalib::RecalibrationLayer;
use tailminer::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Parse = 4,
    Io = 5,
    MissingStage = 6,
    Training = 7,
    Frozen = 8,
    UndefinedBaseline = 9,
    Panic = 10,
}

impl From<&Error> for TmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::InvalidProfile(_) => TmStatus::InvalidInput,
            Error::Config(_) => TmStatus::Config,
            Error::Parse { .. } | Error::Json(_) => TmStatus::Parse,
            Error::Io { .. } => TmStatus::Io,
            Error::MissingStage { .. } => TmStatus::MissingStage,
            Error::TrainingDiverged { .. } | Error::GradientCheck(_) => TmStatus::Training,
            Error::FrozenModel => TmStatus::Frozen,
            Error::UndefinedBaseline(_) => TmStatus::UndefinedBaseline,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> TmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TmStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer passed for `{what}`"));
            TmStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            TmStatus::from(&e)
        }
        Err(_) => {
            set_last_error("internal panic".to_string());
            TmStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &'static str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &'static str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &'static str) -> FfiResult<()> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn path_arg<'a>(p: *const c_char) -> FfiResult<&'a Path> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::InvalidInput("path is not valid UTF-8".into()))?;
    Ok(Path::new(s))
}

fn copy_into(dst: &mut [f64], src: &[f64]) -> FfiResult<()> {
    if dst.len() != src.len() {
        return Err(Error::InvalidInput(format!(
            "output buffer holds {} values, result has {}",
            dst.len(),
            src.len()
        ))
        .into());
    }
    dst.copy_from_slice(src);
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Numerically stable softmax of `n` logits into `out[n]`.
///
/// # Safety
/// `z` and `out` must point to `n` readable / writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tm_softmax(z: *const f64, n: usize, out: *mut f64) -> TmStatus {
    guard(|| {
        let z = input(z, n, "z")?;
        let dst = output(out, n, "out")?;
        copy_into(dst, &softmax(z)?)
    })
}

/// Decision score `||softmax(z) - softmax(z_hat)||^2`.
///
/// # Safety
/// `z` and `z_hat` must point to `n` doubles; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn tm_score_ours(
    z: *const f64,
    z_hat: *const f64,
    n: usize,
    out: *mut f64,
) -> TmStatus {
    guard(|| {
        let s = score_ours(input(z, n, "z")?, input(z_hat, n, "z_hat")?)?;
        write_out(out, s, "out")
    })
}

/// `1 - max p`.
///
/// # Safety
/// `probs` must point to `n` doubles; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn tm_score_max(probs: *const f64, n: usize, out: *mut f64) -> TmStatus {
    guard(|| write_out(out, score_max(input(probs, n, "probs")?)?, "out"))
}

/// Shannon entropy in nats.
///
/// # Safety
/// `probs` must point to `n` doubles; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn tm_score_entropy(probs: *const f64, n: usize, out: *mut f64) -> TmStatus {
    guard(|| write_out(out, score_entropy(input(probs, n, "probs")?)?, "out"))
}

/// Entropy of `p_k / (b_k * n)` for class proportions `b`.
///
/// # Safety
/// `probs` and `proportions` must point to `n` doubles; `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn tm_score_weighted_entropy(
    probs: *const f64,
    proportions: *const f64,
    n: usize,
    out: *mut f64,
) -> TmStatus {
    guard(|| {
        let s = score_weighted_entropy(
            input(probs, n, "probs")?,
            input(proportions, n, "proportions")?,
        )?;
        write_out(out, s, "out")
    })
}

/// AUC-PR of a ranked list given per-position relevance flags (nonzero = tail).
///
/// # Safety
/// `flags` must point to `n` bytes; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn tm_auc_pr(flags: *const u8, n: usize, out: *mut f64) -> TmStatus {
    guard(|| {
        let f: Vec<bool> = input(flags, n, "flags")?.iter().map(|&b| b != 0).collect();
        write_out(out, auc_pr(&pr_curve_from_flags(&f)), "out")
    })
}

/// Mean F-score over every prefix of a ranked list.
///
/// # Safety
/// `flags` must point to `n` bytes; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn tm_avg_f(flags: *const u8, n: usize, out: *mut f64) -> TmStatus {
    guard(|| {
        let f: Vec<bool> = input(flags, n, "flags")?.iter().map(|&b| b != 0).collect();
        write_out(out, avg_f(&pr_curve_from_flags(&f)), "out")
    })
}

/// A dense network loaded from a weights checkpoint.
pub struct TmNetwork {
    net: Network,
}

/// Loads any `tailminer-weights-v1` checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tm_network_load(
    path: *const c_char,
    out: *mut *mut TmNetwork,
) -> TmStatus {
    guard(|| {
        let ckpt = Checkpoint::load(path_arg(path)?)?;
        if ckpt.network.layers.is_empty() {
            return Err(Error::InvalidInput("checkpoint has no layers".into()).into());
        }
        let handle = Box::into_raw(Box::new(TmNetwork { net: ckpt.network }));
        write_out(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// Input and output widths of a network.
///
/// # Safety
/// `net` must come from [`tm_network_load`]; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn tm_network_dims(
    net: *const TmNetwork,
    input_dim: *mut usize,
    output_dim: *mut usize,
) -> TmStatus {
    guard(|| {
        let n = net.as_ref().ok_or(Failure::Null("net"))?;
        write_out(input_dim, n.net.input_dim().unwrap_or(0), "input_dim")?;
        write_out(output_dim, n.net.output_dim().unwrap_or(0), "output_dim")
    })
}

/// Forward pass of one input vector.
///
/// # Safety
/// `x` must point to `n_in` doubles and `out` to `n_out` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tm_network_forward(
    net: *const TmNetwork,
    x: *const f64,
    n_in: usize,
    out: *mut f64,
    n_out: usize,
) -> TmStatus {
    guard(|| {
        let n = net.as_ref().ok_or(Failure::Null("net"))?;
        let y = n.net.predict(input(x, n_in, "x")?)?;
        copy_into(output(out, n_out, "out")?, &y)
    })
}

/// Releases a network; NULL is ignored.
///
/// # Safety
/// `net` must come from [`tm_network_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tm_network_free(net: *mut TmNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Frozen backbone, recalibration layer and autoencoder from one run directory.
pub struct TmMiner {
    backbone: BackboneModel,
    rc: RecalibrationLayer,
    ae: AutoencoderModel,
}

impl TmMiner {
    fn calibrated(&self, x: &[f64]) -> tailminer::Result<Vec<f64>> {
        self.rc.apply(&self.backbone.penultimate(x)?)
    }
}

/// Opens `backbone.weights`, `rc.weights` and `ae.weights` in `run_dir`.
///
/// # Safety
/// `run_dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tm_miner_open(run_dir: *const c_char, out: *mut *mut TmMiner) -> TmStatus {
    guard(|| {
        let dir = path_arg(run_dir)?;
        let load = |name: &'static str, stage: &'static str| -> tailminer::Result<Checkpoint> {
            let p = dir.join(name);
            if !p.is_file() {
                return Err(Error::MissingStage { stage, path: p });
            }
            Checkpoint::load(&p)
        };
        let miner = TmMiner {
            backbone: BackboneModel::from_checkpoint(load("backbone.weights", "train")?)?.freeze(),
            rc: RecalibrationLayer::from_checkpoint(load("rc.weights", "recalibrate")?)?,
            ae: AutoencoderModel::from_checkpoint(load("ae.weights", "train-ae")?)?,
        };
        let handle = Box::into_raw(Box::new(miner));
        write_out(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// Feature width and class count the miner expects.
///
/// # Safety
/// `miner` must come from [`tm_miner_open`]; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn tm_miner_dims(
    miner: *const TmMiner,
    feature_dim: *mut usize,
    num_classes: *mut usize,
) -> TmStatus {
    guard(|| {
        let m = miner.as_ref().ok_or(Failure::Null("miner"))?;
        write_out(feature_dim, m.backbone.input_dim(), "feature_dim")?;
        write_out(num_classes, m.backbone.num_classes(), "num_classes")
    })
}

/// Calibrated logits `z` for one feature vector.
///
/// # Safety
/// `x` must point to `n` doubles and `out` to `c` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tm_miner_calibrated_logits(
    miner: *const TmMiner,
    x: *const f64,
    n: usize,
    out: *mut f64,
    c: usize,
) -> TmStatus {
    guard(|| {
        let m = miner.as_ref().ok_or(Failure::Null("miner"))?;
        let z = m.calibrated(input(x, n, "x")?)?;
        copy_into(output(out, c, "out")?, &z)
    })
}

/// Mining score of `rows` feature vectors stored row-major in `x`
/// (`rows * n` doubles); writes `rows` scores.
///
/// # Safety
/// `x` must point to `rows * n` doubles and `out` to `rows` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tm_miner_score(
    miner: *const TmMiner,
    x: *const f64,
    rows: usize,
    n: usize,
    out: *mut f64,
) -> TmStatus {
    guard(|| {
        let m = miner.as_ref().ok_or(Failure::Null("miner"))?;
        if n == 0 && rows > 0 {
            return Err(Error::InvalidInput("feature width must be positive".into()).into());
        }
        let total = rows
            .checked_mul(n)
            .ok_or_else(|| Error::InvalidInput("rows * n overflows".into()))?;
        let xs = input(x, total, "x")?;
        let dst = output(out, rows, "out")?;
        for (row, slot) in xs.chunks(n.max(1)).zip(dst.iter_mut()) {
            let z = m.calibrated(row)?;
            *slot = score_ours(&z, &m.ae.reconstruct(&z)?)?;
        }
        Ok(())
    })
}

/// Releases a miner; NULL is ignored.
///
/// # Safety
/// `miner` must come from [`tm_miner_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tm_miner_free(miner: *mut TmMiner) {
    if !miner.is_null() {
        drop(Box::from_raw(miner));
    }
}
