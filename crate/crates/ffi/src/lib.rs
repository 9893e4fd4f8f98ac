//! C ABI over the reptex extraction pipeline.
//!
//! All objects are opaque handles created and freed by this library. Every
//! fallible call returns a [`ReptexStatus`]; on failure a message is kept per
//! thread and can be read with [`reptex_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use reptex::embedder::EmbedderKind;
use reptex::pipeline::{process_region, ExtractionParams, PipelineError, RegionOutcome};
use reptex::raster::{load_image, load_mask, save_image, MaskRaster, RasterImage};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReptexStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Pipeline = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// Embedder selection for [`reptex_params_set_embedder`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReptexEmbedder {
    Autoencoder = 0,
    Descriptor = 1,
}

/// Which of the selected candidates to query.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReptexChoice {
    /// Closest to the centroid.
    Plain = 0,
    /// Smallest weighted distance.
    Weighted = 1,
    /// Median distance.
    Median = 2,
}

/// Axis-aligned pixel rectangle, top-left origin.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReptexRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// RGB image, 8 bits per channel.
pub struct ReptexImage(RasterImage);

/// Binary region mask.
pub struct ReptexMask(MaskRaster);

/// Extraction parameters.
pub struct ReptexParams(ExtractionParams);

/// Outcome of one extraction.
pub struct ReptexResult(RegionOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(ReptexStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(ReptexStatus::NullArgument, format!("{what} is null"))
    }

    fn invalid(msg: impl Into<String>) -> Self {
        Failure(ReptexStatus::InvalidArgument, msg.into())
    }
}

/// Runs `f`, records any error or panic and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ReptexStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ReptexStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            ReptexStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn raster_failure(e: reptex::raster::RasterError) -> Failure {
    use reptex::raster::RasterError;
    match e {
        RasterError::UnreadableFile { .. } | RasterError::UnwritableFile { .. } => Failure(ReptexStatus::Io, e.to_string()),
        other => Failure::invalid(other.to_string()),
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn reptex_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn reptex_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ------------------------------------------------------------------ images

/// Creates an image from `width * height * 3` bytes of packed RGB.
///
/// # Safety
/// `rgb` must point to at least `width * height * 3` readable bytes and `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn reptex_image_new(
    width: usize,
    height: usize,
    rgb: *const u8,
    out: *mut *mut ReptexImage,
) -> ReptexStatus {
    guard(|| {
        if rgb.is_null() {
            return Err(Failure::null("rgb"));
        }
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let len = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or_else(|| Failure::invalid("image size overflows"))?;
        let data = std::slice::from_raw_parts(rgb, len).to_vec();
        let img = RasterImage::new(width, height, data).map_err(raster_failure)?;
        store(out, ReptexImage(img));
        Ok(())
    })
}

/// Loads a PNG image.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn reptex_image_load(path: *const c_char, out: *mut *mut ReptexImage) -> ReptexStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let img = load_image(&path).map_err(raster_failure)?;
        store(out, ReptexImage(img));
        Ok(())
    })
}

/// Writes an image as PNG.
///
/// # Safety
/// `image` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn reptex_image_save(image: *const ReptexImage, path: *const c_char) -> ReptexStatus {
    guard(|| {
        let img = handle(image, "image")?;
        let path = path_arg(path, "path")?;
        save_image(&img.0, &path).map_err(raster_failure)
    })
}

/// Width in pixels, 0 for a null handle.
///
/// # Safety
/// `image` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn reptex_image_width(image: *const ReptexImage) -> usize {
    image.as_ref().map_or(0, |i| i.0.width())
}

/// Height in pixels, 0 for a null handle.
///
/// # Safety
/// `image` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn reptex_image_height(image: *const ReptexImage) -> usize {
    image.as_ref().map_or(0, |i| i.0.height())
}

/// Copies packed RGB bytes into `buf`, which must hold `width * height * 3`.
///
/// # Safety
/// `image` must come from this library and `buf` must point to `len`
/// writable bytes.
#[no_mangle]
pub unsafe extern "C" fn reptex_image_copy_pixels(image: *const ReptexImage, buf: *mut u8, len: usize) -> ReptexStatus {
    guard(|| {
        let img = handle(image, "image")?;
        if buf.is_null() {
            return Err(Failure::null("buf"));
        }
        let raw = img.0.as_raw();
        if len < raw.len() {
            return Err(Failure(
                ReptexStatus::OutOfRange,
                format!("buffer holds {len} bytes, need {}", raw.len()),
            ));
        }
        ptr::copy_nonoverlapping(raw.as_ptr(), buf, raw.len());
        Ok(())
    })
}

/// Releases an image. Null is ignored.
///
/// # Safety
/// `image` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn reptex_image_free(image: *mut ReptexImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

// ------------------------------------------------------------------- masks

/// Creates a mask from `width * height` bytes; nonzero marks the region.
///
/// # Safety
/// `bits` must point to at least `width * height` readable bytes and `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn reptex_mask_new(
    width: usize,
    height: usize,
    bits: *const u8,
    out: *mut *mut ReptexMask,
) -> ReptexStatus {
    guard(|| {
        if bits.is_null() {
            return Err(Failure::null("bits"));
        }
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let len = width
            .checked_mul(height)
            .ok_or_else(|| Failure::invalid("mask size overflows"))?;
        let bits = std::slice::from_raw_parts(bits, len).iter().map(|&b| b != 0).collect();
        let mask = MaskRaster::new(width, height, bits).map_err(raster_failure)?;
        store(out, ReptexMask(mask));
        Ok(())
    })
}

/// Loads a mask PNG; nonzero pixels mark the region.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn reptex_mask_load(path: *const c_char, out: *mut *mut ReptexMask) -> ReptexStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let mask = load_mask(&path).map_err(raster_failure)?;
        store(out, ReptexMask(mask));
        Ok(())
    })
}

/// Releases a mask. Null is ignored.
///
/// # Safety
/// `mask` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn reptex_mask_free(mask: *mut ReptexMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

// ------------------------------------------------------------------ params

/// Default parameters: 10000 samples, sides 16..48, coverage 0.9,
/// autoencoder embedder, k in {3,4,5,6}, seed 0.
#[no_mangle]
pub extern "C" fn reptex_params_new() -> *mut ReptexParams {
    Box::into_raw(Box::new(ReptexParams(ExtractionParams::default())))
}

/// Releases parameters. Null is ignored.
///
/// # Safety
/// `params` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn reptex_params_free(params: *mut ReptexParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// # Safety
/// `params` must come from [`reptex_params_new`].
#[no_mangle]
pub unsafe extern "C" fn reptex_params_set_seed(params: *mut ReptexParams, seed: u64) -> ReptexStatus {
    guard(|| {
        handle_mut(params, "params")?.0.seed = seed;
        Ok(())
    })
}

/// Number of candidate crops to draw.
///
/// # Safety
/// `params` must come from [`reptex_params_new`].
#[no_mangle]
pub unsafe extern "C" fn reptex_params_set_samples(params: *mut ReptexParams, samples: usize) -> ReptexStatus {
    guard(|| {
        if samples == 0 {
            return Err(Failure::invalid("samples must be positive"));
        }
        let p = &mut handle_mut(params, "params")?.0;
        p.sampler.sample_count = samples;
        p.sampler.max_attempts = p.sampler.max_attempts.max(samples);
        Ok(())
    })
}

/// Inclusive range of crop side lengths.
///
/// # Safety
/// `params` must come from [`reptex_params_new`].
#[no_mangle]
pub unsafe extern "C" fn reptex_params_set_side_range(
    params: *mut ReptexParams,
    min_side: usize,
    max_side: usize,
) -> ReptexStatus {
    guard(|| {
        if min_side == 0 || min_side > max_side {
            return Err(Failure::invalid(format!("bad side range {min_side}..{max_side}")));
        }
        let p = &mut handle_mut(params, "params")?.0;
        p.sampler.min_side = min_side;
        p.sampler.max_side = max_side;
        Ok(())
    })
}

/// Minimum fraction of a crop that must lie inside the mask, in (0, 1].
///
/// # Safety
/// `params` must come from [`reptex_params_new`].
#[no_mangle]
pub unsafe extern "C" fn reptex_params_set_coverage(params: *mut ReptexParams, coverage: f64) -> ReptexStatus {
    guard(|| {
        if !(coverage > 0.0 && coverage <= 1.0) {
            return Err(Failure::invalid(format!("coverage {coverage} outside (0, 1]")));
        }
        handle_mut(params, "params")?.0.sampler.coverage_threshold = coverage;
        Ok(())
    })
}

/// # Safety
/// `params` must come from [`reptex_params_new`].
#[no_mangle]
pub unsafe extern "C" fn reptex_params_set_embedder(params: *mut ReptexParams, kind: ReptexEmbedder) -> ReptexStatus {
    guard(|| {
        handle_mut(params, "params")?.0.embedder = match kind {
            ReptexEmbedder::Autoencoder => EmbedderKind::Autoencoder,
            ReptexEmbedder::Descriptor => EmbedderKind::Descriptor,
        };
        Ok(())
    })
}

/// Autoencoder training epochs.
///
/// # Safety
/// `params` must come from [`reptex_params_new`].
#[no_mangle]
pub unsafe extern "C" fn reptex_params_set_epochs(params: *mut ReptexParams, epochs: usize) -> ReptexStatus {
    guard(|| {
        handle_mut(params, "params")?.0.train.epochs = epochs;
        Ok(())
    })
}

/// Candidate cluster counts. Each must be at least 2.
///
/// # Safety
/// `params` must come from [`reptex_params_new`]; `ks` must point to `len`
/// readable values.
#[no_mangle]
pub unsafe extern "C" fn reptex_params_set_k_set(params: *mut ReptexParams, ks: *const usize, len: usize) -> ReptexStatus {
    guard(|| {
        let p = handle_mut(params, "params")?;
        if ks.is_null() {
            return Err(Failure::null("ks"));
        }
        let ks = std::slice::from_raw_parts(ks, len);
        if ks.is_empty() || ks.iter().any(|&k| k < 2) {
            return Err(Failure::invalid("k set needs at least one k >= 2"));
        }
        p.0.k_set = ks.to_vec();
        Ok(())
    })
}

// -------------------------------------------------------------- extraction

/// Extracts textures from `image`. A null `mask` treats the whole image as
/// one region.
///
/// # Safety
/// Handles must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn reptex_extract(
    image: *const ReptexImage,
    mask: *const ReptexMask,
    params: *const ReptexParams,
    out: *mut *mut ReptexResult,
) -> ReptexStatus {
    guard(|| {
        let img = &handle(image, "image")?.0;
        let params = &handle(params, "params")?.0;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let full;
        let mask = match mask.as_ref() {
            Some(m) => &m.0,
            None => {
                full = MaskRaster::filled(img.width(), img.height(), true);
                &full
            }
        };
        let outcome = process_region(img, mask, 0, params).map_err(|e| match e {
            PipelineError::Config(_) => Failure::invalid(e.to_string()),
            _ => Failure(ReptexStatus::Pipeline, format!("{} stage: {e}", e.stage())),
        })?;
        store(out, ReptexResult(outcome));
        Ok(())
    })
}

/// Releases a result. Null is ignored.
///
/// # Safety
/// `result` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn reptex_result_free(result: *mut ReptexResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of sampled candidates, 0 for a null handle.
///
/// # Safety
/// `result` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn reptex_result_candidate_count(result: *const ReptexResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.candidates.len())
}

/// Cluster count chosen by the Davies-Bouldin criterion, 0 for a null handle.
///
/// # Safety
/// `result` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn reptex_result_selected_k(result: *const ReptexResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.clustering.model.k)
}

/// Size of the cluster the texture was picked from, 0 for a null handle.
///
/// # Safety
/// `result` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn reptex_result_cluster_size(result: *const ReptexResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.selection.member_indices.len())
}

fn chosen_index(r: &RegionOutcome, which: ReptexChoice) -> usize {
    match which {
        ReptexChoice::Plain => r.selection.chosen_plain,
        ReptexChoice::Weighted => r.selection.chosen_weighted,
        ReptexChoice::Median => r.selection.chosen_median,
    }
}

/// Image rectangle of the chosen candidate.
///
/// # Safety
/// `result` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn reptex_result_chosen_rect(
    result: *const ReptexResult,
    which: ReptexChoice,
    out: *mut ReptexRect,
) -> ReptexStatus {
    guard(|| {
        let r = &handle(result, "result")?.0;
        let out = handle_mut(out, "out")?;
        let rect = r.candidates[chosen_index(r, which)].rect();
        *out = ReptexRect {
            x: rect.x,
            y: rect.y,
            width: rect.w,
            height: rect.h,
        };
        Ok(())
    })
}

/// Copy of the chosen texture crop as a new image.
///
/// # Safety
/// `result` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn reptex_result_texture(
    result: *const ReptexResult,
    which: ReptexChoice,
    out: *mut *mut ReptexImage,
) -> ReptexStatus {
    guard(|| {
        let r = &handle(result, "result")?.0;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let patch = r.candidates[chosen_index(r, which)].patch.clone();
        store(out, ReptexImage(patch));
        Ok(())
    })
}
