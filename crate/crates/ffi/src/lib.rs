//! C ABI over the wavescope core.
//!
//! Clips and models are opaque heap handles released with their `_free`
//! function. Every fallible call returns a `WsStatus`; on failure the message
//! is available from [`ws_last_error`] on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wavescope::detector::{self, LogisticModel};
use wavescope::metrics::sigmoid;
use wavescope::video_io::{self, Clip};
use wavescope::{wavelet, waverep, Error};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Dimension = 5,
    Capability = 6,
    Other = 7,
    Panic = 8,
}

/// Opaque luma clip.
pub struct WsClip(Clip);

/// Opaque trained detector.
pub struct WsModel(LogisticModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> WsStatus {
    match e {
        Error::Io { .. } => WsStatus::Io,
        Error::Format { .. } | Error::Truncated { .. } | Error::Json(_) | Error::Csv(_) => WsStatus::Format,
        Error::Size(_) | Error::Dimension(_) | Error::Structure(_) => WsStatus::Dimension,
        Error::Capability(_) => WsStatus::Capability,
        Error::Config(_) => WsStatus::InvalidArgument,
        _ => WsStatus::Other,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Run `f`, record any failure and map it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> WsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            WsStatus::Ok
        }
        Ok(Err(Fail::Null(name))) => {
            set_error(&format!("null pointer: {name}"));
            WsStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(&msg);
            WsStatus::InvalidArgument
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            WsStatus::Panic
        }
    }
}

unsafe fn arg<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn c_str<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Arg(format!("{name} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ws_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load a `.y4m` or `.wvt` clip.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ws_clip_load(path: *const c_char, out: *mut *mut WsClip) -> WsStatus {
    guard(|| put(out, WsClip(video_io::load_clip(c_str(path, "path")?)?)))
}

/// Build a clip from `frames * height * width` luma samples in [0, 1].
///
/// # Safety
/// `data` must point to that many floats and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_clip_from_luma(
    frames: usize,
    height: usize,
    width: usize,
    data: *const f32,
    out: *mut *mut WsClip,
) -> WsStatus {
    guard(|| {
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        let n = frames.checked_mul(height).and_then(|v| v.checked_mul(width)).ok_or(Fail::Arg("clip size overflows".into()))?;
        let v = std::slice::from_raw_parts(data, n).to_vec();
        put(out, WsClip(Clip::new(frames, height, width, v)?))
    })
}

/// Write a clip; the extension picks Y4M or `.wvt`.
///
/// # Safety
/// `clip` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ws_clip_save(clip: *const WsClip, path: *const c_char) -> WsStatus {
    guard(|| Ok(video_io::save_clip(&arg(clip, "clip")?.0, c_str(path, "path")?)?))
}

/// # Safety
/// `clip` must be a live handle; each out pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn ws_clip_dims(clip: *const WsClip, frames: *mut usize, height: *mut usize, width: *mut usize) -> WsStatus {
    guard(|| {
        let c = &arg(clip, "clip")?.0;
        for (p, v) in [(frames, c.frames), (height, c.height), (width, c.width)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copy the luma samples into `buf`, which must hold `frames * height * width` floats.
///
/// # Safety
/// `clip` must be a live handle and `buf` writable for `len` floats.
#[no_mangle]
pub unsafe extern "C" fn ws_clip_copy_luma(clip: *const WsClip, buf: *mut f32, len: usize) -> WsStatus {
    guard(|| {
        let c = &arg(clip, "clip")?.0;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        if len < c.data.len() {
            return Err(Fail::Arg(format!("buffer holds {len} floats, clip needs {}", c.data.len())));
        }
        ptr::copy_nonoverlapping(c.data.as_ptr(), buf, c.data.len());
        Ok(())
    })
}

/// # Safety
/// `clip` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ws_clip_free(clip: *mut WsClip) {
    if !clip.is_null() {
        drop(Box::from_raw(clip));
    }
}

/// Energies of the `(levels+1)^2` subbands of one frame, row-major into `out`.
///
/// # Safety
/// `clip` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ws_band_energies(clip: *const WsClip, frame: usize, levels: u32, out: *mut f64, len: usize) -> WsStatus {
    guard(|| {
        let c = &arg(clip, "clip")?.0;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        if frame >= c.frames {
            return Err(Fail::Arg(format!("frame {frame} out of range for {} frames", c.frames)));
        }
        let e = wavelet::band_energies(&wavelet::fswt_forward(c.frame(frame), c.height, c.width, levels)?);
        if len < e.len() {
            return Err(Fail::Arg(format!("buffer holds {len} values, need {}", e.len())));
        }
        ptr::copy_nonoverlapping(e.as_ptr(), out, e.len());
        Ok(())
    })
}

/// Replace the bands named by `mask` (`default`, `all`, `none` or a JSON
/// file) of every fake frame with the real frame's.
///
/// # Safety
/// Handles must be live, `mask` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ws_waverep(
    fake: *const WsClip,
    real: *const WsClip,
    mask: *const c_char,
    levels: u32,
    out: *mut *mut WsClip,
) -> WsStatus {
    guard(|| {
        let m = waverep::parse_mask(c_str(mask, "mask")?, levels)?;
        put(out, WsClip(waverep::replace_clip(&arg(fake, "fake")?.0, &arg(real, "real")?.0, &m)?))
    })
}

/// Real clip with its diagonal mid/high bands taken from `fake`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ws_attack(real: *const WsClip, fake: *const WsClip, levels: u32, out: *mut *mut WsClip) -> WsStatus {
    guard(|| put(out, WsClip(detector::band_swap_attack(&arg(real, "real")?.0, &arg(fake, "fake")?.0, levels)?)))
}

/// Load a model JSON written by `wavescope train`.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ws_model_load(path: *const c_char, out: *mut *mut WsModel) -> WsStatus {
    guard(|| put(out, WsModel(LogisticModel::load(c_str(path, "path")?)?)))
}

/// Mean per-frame logit of `clip` and its probability of being fake.
/// The clip must already be cropped to a multiple of `2^levels`.
///
/// # Safety
/// Handles must be live; `logit` and `prob` may be null.
#[no_mangle]
pub unsafe extern "C" fn ws_model_score(model: *const WsModel, clip: *const WsClip, logit: *mut f64, prob: *mut f64) -> WsStatus {
    guard(|| {
        let m = &arg(model, "model")?.0;
        let den = m.denoiser.build()?;
        let s = detector::score_clip(m, &arg(clip, "clip")?.0, den.as_ref(), "", 0)?;
        if !logit.is_null() {
            *logit = s.score;
        }
        if !prob.is_null() {
            *prob = sigmoid(s.score);
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ws_model_free(model: *mut WsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
