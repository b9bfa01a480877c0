//! C ABI for loading a trained captioner, captioning audio and scoring
//! caption files.
//!
//! Every function returns an [`AcStatus`]. On failure a description is
//! available from [`ac_last_error_message`] on the same thread. Strings
//! handed out by the library must be released with [`ac_string_free`],
//! captioner handles with [`ac_captioner_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use audiocap::captioner::ModelError;
use audiocap::corpus::CorpusError;
use audiocap::dsp::{extract_lms, read_features, read_wav, AudioClip, DspError, FeatureMatrix, LmsConfig};
use audiocap::metrics::{evaluate, read_eval_corpus, EvalOptions, MetricsError};
use audiocap::trainer::{load_checkpoint, Captioner, CheckpointError};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    /// Malformed or unsupported file contents.
    Format = 4,
    /// Arguments or data violate an input requirement.
    Invalid = 5,
    /// Unexpected internal failure.
    Internal = 6,
}

/// Opaque captioner handle.
pub struct AcCaptioner {
    inner: Captioner,
}

/// Corpus-level scores.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AcScoreReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub richness: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(AcStatus, String);

impl Failure {
    fn new(status: AcStatus, message: impl Into<String>) -> Self {
        Self(status, message.into())
    }
}

impl From<DspError> for Failure {
    fn from(e: DspError) -> Self {
        let status = match e {
            DspError::Io { .. } => AcStatus::Io,
            DspError::BadMagic { .. } | DspError::VersionMismatch { .. } | DspError::TruncatedFile { .. } | DspError::Wav { .. } => {
                AcStatus::Format
            }
            _ => AcStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        let status = match e {
            CheckpointError::Io { .. } => AcStatus::Io,
            _ => AcStatus::Format,
        };
        Failure(status, e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure(AcStatus::Invalid, e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        let status = match e {
            MetricsError::Io { .. } => AcStatus::Io,
            MetricsError::ParseError { .. } => AcStatus::Format,
            _ => AcStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        Failure(AcStatus::Invalid, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            AcStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            AcStatus::Internal
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::new(AcStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure::new(AcStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(h: *const AcCaptioner) -> Result<&'a Captioner, Failure> {
    h.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| Failure::new(AcStatus::NullPointer, "captioner handle is null"))
}

unsafe fn emit_caption(tokens: Vec<String>, out: *mut *mut c_char) -> Result<(), Failure> {
    let text = CString::new(tokens.join(" ")).map_err(|_| Failure::new(AcStatus::Internal, "caption contains NUL"))?;
    *out = text.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(AcStatus::NullPointer, "output pointer is null"))
    } else {
        Ok(())
    }
}

/// Loads a checkpoint file into a new handle stored in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ac_captioner_load(path: *const c_char, out: *mut *mut AcCaptioner) -> AcStatus {
    guard(|| {
        check_out(out)?;
        *out = ptr::null_mut();
        let path = path_arg(path, "path")?;
        let inner = Captioner::new(load_checkpoint(&path)?);
        *out = Box::into_raw(Box::new(AcCaptioner { inner }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `h` must come from [`ac_captioner_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ac_captioner_free(h: *mut AcCaptioner) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Feature dimension the captioner expects.
///
/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ac_captioner_feature_dim(h: *const AcCaptioner, out: *mut u32) -> AcStatus {
    guard(|| {
        check_out(out)?;
        *out = handle(h)?.checkpoint().config.feat_dim as u32;
        Ok(())
    })
}

/// Captions a row-major `frames x dims` matrix of raw log-mel features.
/// The caption (space-separated tokens) is stored in `*out`.
///
/// # Safety
/// `data` must point to `frames * dims` floats; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ac_caption_features(
    h: *const AcCaptioner,
    data: *const f32,
    frames: usize,
    dims: usize,
    out: *mut *mut c_char,
) -> AcStatus {
    guard(|| {
        check_out(out)?;
        let c = handle(h)?;
        if data.is_null() {
            return Err(Failure::new(AcStatus::NullPointer, "data is null"));
        }
        let len = frames
            .checked_mul(dims)
            .ok_or_else(|| Failure::new(AcStatus::Invalid, "frames * dims overflows"))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        let f = FeatureMatrix::new(frames, dims, values)?;
        emit_caption(c.caption(&f)?, out)
    })
}

/// Captions mono samples in [-1, 1] at `sample_rate` Hz.
///
/// # Safety
/// `samples` must point to `len` floats; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ac_caption_samples(
    h: *const AcCaptioner,
    samples: *const f32,
    len: usize,
    sample_rate: u32,
    out: *mut *mut c_char,
) -> AcStatus {
    guard(|| {
        check_out(out)?;
        let c = handle(h)?;
        if samples.is_null() {
            return Err(Failure::new(AcStatus::NullPointer, "samples is null"));
        }
        let clip = AudioClip::new(std::slice::from_raw_parts(samples, len).to_vec(), sample_rate)?;
        emit_caption(c.caption(&extract_lms(&clip, &LmsConfig::default())?)?, out)
    })
}

/// Captions a 16-bit PCM WAV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ac_caption_wav_file(h: *const AcCaptioner, path: *const c_char, out: *mut *mut c_char) -> AcStatus {
    guard(|| {
        check_out(out)?;
        let c = handle(h)?;
        let clip = read_wav(&path_arg(path, "path")?)?;
        emit_caption(c.caption(&extract_lms(&clip, &LmsConfig::default())?)?, out)
    })
}

/// Captions a stored feature file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ac_caption_feature_file(h: *const AcCaptioner, path: *const c_char, out: *mut *mut c_char) -> AcStatus {
    guard(|| {
        check_out(out)?;
        let c = handle(h)?;
        let f = read_features(&path_arg(path, "path")?)?;
        emit_caption(c.caption(&f)?, out)
    })
}

/// Scores a line-delimited `{audio_id, hypothesis, references}` file.
/// A non-zero `cider_raw` omits the ×10 CIDEr scale.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ac_evaluate_file(path: *const c_char, cider_raw: i32, out: *mut AcScoreReport) -> AcStatus {
    guard(|| {
        check_out(out)?;
        let corpus = read_eval_corpus(&path_arg(path, "path")?)?;
        let r = evaluate(&corpus, EvalOptions { cider_raw: cider_raw != 0 })?;
        *out = AcScoreReport {
            bleu1: r.bleu1,
            bleu2: r.bleu2,
            bleu3: r.bleu3,
            bleu4: r.bleu4,
            rouge_l: r.rouge_l,
            cider: r.cider,
            richness: r.richness,
        };
        Ok(())
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ac_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread (empty after success).
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ac_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
