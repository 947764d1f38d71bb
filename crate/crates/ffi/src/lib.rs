//! C ABI over the core pipeline.
//!
//! Every entry point returns an [`LgStatus`]. On failure the message is kept
//! per thread and can be copied out with [`lg_last_error_message`]. Buffers
//! are caller-owned; images are interleaved 8-bit RGB, depth is millimetres
//! as `u16` with 0 marking a hole, masks are one `u8` class id per pixel.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lumigrasp::fusion::{load_model, Model};
use lumigrasp::{fda, grasp, imageproc, io, Error, SemanticMask};

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericError = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Trained model handle. Opaque to C.
pub struct LgModel {
    inner: Model,
}

/// One planned grasp. `depth_m` is in metres.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LgGraspPoint {
    pub class_id: u8,
    pub row: u32,
    pub col: u32,
    pub depth_m: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> LgStatus {
    match e {
        Error::InvalidArgument(_) | Error::DimensionMismatch(_) | Error::Config(_) => LgStatus::InvalidArgument,
        Error::Numeric(_) => LgStatus::NumericError,
        _ => LgStatus::DataError,
    }
}

struct Fail(LgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LgStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LgStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            LgStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

fn pixels(width: u32, height: u32) -> Result<usize, Fail> {
    if width == 0 || height == 0 {
        return Err(Fail(LgStatus::InvalidArgument, format!("image size {width}x{height} is empty")));
    }
    Ok(width as usize * height as usize)
}

/// Loads a model directory written by `lumigrasp train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_model_load(path: *const c_char, out: *mut *mut LgModel) -> LgStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = CStr::from_ptr(path).to_str().map_err(|_| Fail(LgStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let model = load_model(Path::new(p))?;
        *out = Box::into_raw(Box::new(LgModel { inner: model }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`lg_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lg_model_free(model: *mut LgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of classes the model predicts, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_model_classes(model: *const LgModel) -> u32 {
    model.as_ref().map_or(0, |m| m.inner.config.classes as u32)
}

/// Semantic mask of an RGB image; `labels_out` holds `width * height` bytes.
///
/// # Safety
/// `rgb` must hold `3 * width * height` bytes and `labels_out` `width * height`.
#[no_mangle]
pub unsafe extern "C" fn lg_predict_mask(model: *const LgModel, rgb: *const u8, width: u32, height: u32, labels_out: *mut u8) -> LgStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let n = pixels(width, height)?;
        let img = io::rgb_from_bytes(width as usize, height as usize, slice(rgb, 3 * n, "rgb")?)?;
        let out = slice_mut(labels_out, n, "labels_out")?;
        out.copy_from_slice(&m.inner.predict_mask(&img)?.labels);
        Ok(())
    })
}

/// Grasp sequence for a mask and depth map, largest region first.
///
/// `k = 0` selects the default `ceil(area / 100)` policy. At most `capacity`
/// points are written; `len_out` always receives the full count, and
/// `BufferTooSmall` is returned when it exceeds `capacity`.
///
/// # Safety
/// `labels` and `depth_mm` must hold `width * height` elements and `points_out`
/// `capacity` (it may be null when `capacity` is 0).
#[no_mangle]
pub unsafe extern "C" fn lg_plan_grasps(
    labels: *const u8,
    depth_mm: *const u16,
    width: u32,
    height: u32,
    k: u32,
    points_out: *mut LgGraspPoint,
    capacity: usize,
    len_out: *mut usize,
) -> LgStatus {
    guard(|| {
        let n = pixels(width, height)?;
        if len_out.is_null() {
            return Err(null("len_out"));
        }
        *len_out = 0;
        let (w, h) = (width as usize, height as usize);
        let mask = SemanticMask::new(w, h, slice(labels, n, "labels")?.to_vec())?;
        let depth = io::depth_from_mm(w, h, slice(depth_mm, n, "depth_mm")?)?;
        let plan = grasp::plan_grasp_sequence(&mask, &depth, (k > 0).then_some(k as usize))?;
        *len_out = plan.points.len();
        if plan.points.len() > capacity {
            return Err(Fail(LgStatus::BufferTooSmall, format!("{} grasp points, capacity {capacity}", plan.points.len())));
        }
        if capacity > 0 {
            let out = slice_mut(points_out, capacity, "points_out")?;
            for (o, p) in out.iter_mut().zip(&plan.points) {
                *o = LgGraspPoint { class_id: p.class_id, row: p.row as u32, col: p.col as u32, depth_m: p.depth_m };
            }
        }
        Ok(())
    })
}

/// Bilateral smoothing then hole filling with default parameters.
///
/// # Safety
/// Both buffers must hold `width * height` elements; they may not overlap.
#[no_mangle]
pub unsafe extern "C" fn lg_enhance_depth(depth_mm: *const u16, width: u32, height: u32, depth_out: *mut u16) -> LgStatus {
    guard(|| {
        let n = pixels(width, height)?;
        let d = io::depth_from_mm(width as usize, height as usize, slice(depth_mm, n, "depth_mm")?)?;
        let e = imageproc::enhance_depth(&d, imageproc::BilateralParams::default())?;
        slice_mut(depth_out, n, "depth_out")?.copy_from_slice(&io::depth_to_mm(&e));
        Ok(())
    })
}

/// Low-frequency amplitude transfer from `target` onto `source`.
///
/// # Safety
/// All three buffers must hold `3 * width * height` bytes.
#[no_mangle]
pub unsafe extern "C" fn lg_fda_transfer(
    source: *const u8,
    target: *const u8,
    width: u32,
    height: u32,
    beta: f64,
    rgb_out: *mut u8,
) -> LgStatus {
    guard(|| {
        let n = pixels(width, height)?;
        let (w, h) = (width as usize, height as usize);
        let s = io::rgb_from_bytes(w, h, slice(source, 3 * n, "source")?)?;
        let t = io::rgb_from_bytes(w, h, slice(target, 3 * n, "target")?)?;
        let out = fda::fda_transfer(&s, &t, beta)?;
        slice_mut(rgb_out, 3 * n, "rgb_out")?.copy_from_slice(&io::rgb_to_bytes(&out));
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to fit) and returns the full message length without the NUL.
/// Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn lg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
