//! C ABI over the augundo library.
//!
//! Inputs are described by [`AugundoBufferView`] and copied once into the
//! library's own f64 buffers. Outputs are opaque handles owned by the library
//! until released with the matching `*_free` function. Configs, records and
//! calibration cross the boundary as JSON text. Every call is reentrant and
//! the library keeps no global mutable state.
//!
//! Fallible calls return an [`AugundoStatus`] and, when `out_error` is not
//! null, store a message of the form `<Code>: <text>` that the caller
//! releases with [`augundo_string_free`].

use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use augundo::geometric::TransformRecord;
use augundo::loss::{total_loss, LossConfig, LossInputs};
use augundo::pipeline::io::{self, Calibration};
use augundo::pipeline::{augment_inputs, evaluate_metrics_sparse_gt, sample_plan_seeded, AugmentationConfig, AugmentationPlan};
use augundo::undo::undo_depth;
use augundo::{DenseDepthMap, DepthRange, Dims, Error, Image, SparseDepthMap, ValidityMask};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AugundoStatus {
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// A text argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A buffer descriptor is inconsistent (kind, channels or stride).
    InvalidBuffer = 3,
    /// Values or parameters were rejected by the library.
    InvalidArgument = 4,
    /// Config, record or calibration text could not be parsed.
    ParseError = 5,
    /// Nothing to evaluate (no sparse points, empty evaluation set).
    EmptyInput = 6,
    /// The library panicked; this is a bug.
    Internal = 7,
}

/// Element type of a buffer.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AugundoElementKind {
    U8 = 0,
    U16 = 1,
    F32 = 2,
    F64 = 3,
}

/// Borrowed, row-major input buffer.
///
/// Images have 3 interleaved channels: u8 in 0..=255 or floats in [0, 1].
/// Depth has 1 channel: u16 millimeters or float meters, 0 meaning missing.
/// Masks have 1 channel of u8, non-zero meaning valid. `row_stride` is in
/// bytes; 0 means tightly packed. Any alignment is accepted.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct AugundoBufferView {
    pub data: *const c_void,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub kind: AugundoElementKind,
    pub row_stride: usize,
}

/// Loss terms of one evaluation.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AugundoLossBreakdown {
    pub photometric: f64,
    pub sparse: f64,
    pub smoothness: f64,
    pub total: f64,
    pub valid_pixel_count: u64,
}

/// Error metrics: MAE/RMSE in mm, iMAE/iRMSE in 1/m, AbsRel/SqRel and the
/// delta thresholds as fractions.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AugundoMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub imae: f64,
    pub irmse: f64,
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub count: u64,
}

/// Owned RGB image.
pub struct AugundoImage {
    image: Image,
}

/// Owned depth map in meters, 0 meaning missing.
pub struct AugundoDepth {
    dims: Dims,
    values: Vec<f64>,
}

/// Owned validity mask.
pub struct AugundoMask {
    mask: ValidityMask,
}

struct Failure {
    status: AugundoStatus,
    message: String,
}

impl Failure {
    fn new(status: AugundoStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::ParseError(_) | Error::MissingKey(_) => AugundoStatus::ParseError,
            Error::NoSparsePoints | Error::EmptyEvalSet => AugundoStatus::EmptyInput,
            _ => AugundoStatus::InvalidArgument,
        };
        Failure::new(status, format!("{}: {e}", e.code()))
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Runs `f`, converting failures and panics into a status and message.
fn guard(out_error: *mut *mut c_char, f: impl FnOnce() -> FfiResult<()>) -> AugundoStatus {
    if !out_error.is_null() {
        // SAFETY: caller passes either null or a writable pointer.
        unsafe { *out_error = ptr::null_mut() };
    }
    let failure = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return AugundoStatus::Ok,
        Ok(Err(e)) => e,
        Err(_) => Failure::new(AugundoStatus::Internal, "Internal: panic inside augundo"),
    };
    if !out_error.is_null() {
        // SAFETY: checked non-null above.
        unsafe { *out_error = into_c_string(failure.message) };
    }
    failure.status
}

fn check_out<T>(p: *mut T, name: &str) -> FfiResult<()> {
    if p.is_null() {
        Err(Failure::new(AugundoStatus::NullArgument, format!("NullArgument: {name}")))
    } else {
        Ok(())
    }
}

/// Text argument; null or empty yields `None`.
unsafe fn opt_text(p: *const c_char, name: &str) -> FfiResult<Option<String>> {
    if p.is_null() {
        return Ok(None);
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(AugundoStatus::InvalidUtf8, format!("InvalidUtf8: {name}")))?;
    Ok(if s.trim().is_empty() { None } else { Some(s.to_owned()) })
}

unsafe fn text(p: *const c_char, name: &str) -> FfiResult<String> {
    opt_text(p, name)?.ok_or_else(|| Failure::new(AugundoStatus::NullArgument, format!("NullArgument: {name}")))
}

enum Raw {
    U8(Vec<u8>),
    U16(Vec<u16>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

fn bad_buffer(name: &str, detail: impl std::fmt::Display) -> Failure {
    Failure::new(AugundoStatus::InvalidBuffer, format!("InvalidBuffer: {name}: {detail}"))
}

unsafe fn read_elems<T: Copy>(view: &AugundoBufferView, row_len: usize, stride: usize) -> Vec<T> {
    let base = view.data as *const u8;
    let mut out = Vec::with_capacity(row_len * view.height);
    for r in 0..view.height {
        let row = base.add(r * stride) as *const T;
        for c in 0..row_len {
            out.push(ptr::read_unaligned(row.add(c)));
        }
    }
    out
}

/// Copies a buffer out of caller memory.
unsafe fn read_view(view: *const AugundoBufferView, channels: usize, name: &str) -> FfiResult<(Dims, Raw)> {
    let view = view
        .as_ref()
        .ok_or_else(|| Failure::new(AugundoStatus::NullArgument, format!("NullArgument: {name}")))?;
    if view.data.is_null() {
        return Err(Failure::new(AugundoStatus::NullArgument, format!("NullArgument: {name}.data")));
    }
    if view.channels != channels {
        return Err(bad_buffer(name, format!("expected {channels} channels, got {}", view.channels)));
    }
    let size = match view.kind {
        AugundoElementKind::U8 => 1,
        AugundoElementKind::U16 => 2,
        AugundoElementKind::F32 => 4,
        AugundoElementKind::F64 => 8,
    };
    let row_len = view
        .width
        .checked_mul(channels)
        .ok_or_else(|| bad_buffer(name, "size overflow"))?;
    let packed = row_len.checked_mul(size).ok_or_else(|| bad_buffer(name, "size overflow"))?;
    let stride = if view.row_stride == 0 { packed } else { view.row_stride };
    if stride < packed {
        return Err(bad_buffer(name, format!("row stride {stride} below packed row size {packed}")));
    }
    stride
        .checked_mul(view.height)
        .ok_or_else(|| bad_buffer(name, "size overflow"))?;
    let raw = match view.kind {
        AugundoElementKind::U8 => Raw::U8(read_elems(view, row_len, stride)),
        AugundoElementKind::U16 => Raw::U16(read_elems(view, row_len, stride)),
        AugundoElementKind::F32 => Raw::F32(read_elems(view, row_len, stride)),
        AugundoElementKind::F64 => Raw::F64(read_elems(view, row_len, stride)),
    };
    Ok((Dims::new(view.height, view.width), raw))
}

unsafe fn read_image(view: *const AugundoBufferView, name: &str) -> FfiResult<Image> {
    let (dims, raw) = read_view(view, 3, name)?;
    Ok(match raw {
        Raw::U8(b) => io::image_from_rgb8(dims, &b)?,
        Raw::F32(v) => Image::new(dims.height, dims.width, v.into_iter().map(f64::from).collect())?,
        Raw::F64(v) => Image::new(dims.height, dims.width, v)?,
        Raw::U16(_) => return Err(bad_buffer(name, "u16 is not an image kind")),
    })
}

unsafe fn read_depth(view: *const AugundoBufferView, name: &str) -> FfiResult<(Dims, Vec<f64>)> {
    let (dims, raw) = read_view(view, 1, name)?;
    Ok((
        dims,
        match raw {
            Raw::U16(mm) => io::depth_from_mm(&mm),
            Raw::F32(v) => v.into_iter().map(f64::from).collect(),
            Raw::F64(v) => v,
            Raw::U8(_) => return Err(bad_buffer(name, "u8 is not a depth kind")),
        },
    ))
}

unsafe fn read_sparse(view: *const AugundoBufferView, name: &str) -> FfiResult<SparseDepthMap> {
    let (dims, v) = read_depth(view, name)?;
    Ok(SparseDepthMap::new(dims.height, dims.width, v)?)
}

unsafe fn read_dense(view: *const AugundoBufferView, name: &str) -> FfiResult<DenseDepthMap> {
    let (dims, v) = read_depth(view, name)?;
    Ok(DenseDepthMap::new(dims.height, dims.width, v)?)
}

unsafe fn read_mask(view: *const AugundoBufferView, name: &str) -> FfiResult<ValidityMask> {
    let (dims, raw) = read_view(view, 1, name)?;
    match raw {
        Raw::U8(b) => Ok(ValidityMask::new(dims, b.into_iter().map(|x| x != 0).collect())?),
        _ => Err(bad_buffer(name, "masks must be u8")),
    }
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn augundo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Samples a plan from `config_json` (null or empty: no augmentation) with
/// `seed`, applies it to the image and sparse depth, and returns the
/// augmented buffers with the serialized transform record. `out_plan`, if
/// not null, receives the full plan including photometric transforms.
///
/// # Safety
/// Views must describe readable memory; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn augundo_augment(
    image: *const AugundoBufferView,
    sparse: *const AugundoBufferView,
    config_json: *const c_char,
    seed: u64,
    out_image: *mut *mut AugundoImage,
    out_sparse: *mut *mut AugundoDepth,
    out_record: *mut *mut c_char,
    out_plan: *mut *mut c_char,
    out_error: *mut *mut c_char,
) -> AugundoStatus {
    guard(out_error, || {
        check_out(out_image, "out_image")?;
        check_out(out_sparse, "out_sparse")?;
        check_out(out_record, "out_record")?;
        let img = read_image(image, "image")?;
        let z = read_sparse(sparse, "sparse")?;
        let cfg = match opt_text(config_json, "config_json")? {
            Some(t) => AugmentationConfig::from_json(&t)?,
            None => AugmentationConfig::disabled(),
        };
        let plan = sample_plan_seeded(&cfg, img.dims(), seed)?;
        let (a, az) = augment_inputs(&img, &z, &plan)?;
        *out_image = boxed(AugundoImage { image: a });
        *out_sparse = boxed(AugundoDepth {
            dims: az.dims(),
            values: az.data().to_vec(),
        });
        *out_record = into_c_string(plan.record.to_json());
        if !out_plan.is_null() {
            *out_plan = into_c_string(plan.to_json());
        }
        Ok(())
    })
}

/// Warps a depth map predicted on the augmented input back to the original
/// frame. `record_json` is a transform record or a full plan.
///
/// # Safety
/// Views must describe readable memory; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn augundo_undo(
    depth: *const AugundoBufferView,
    record_json: *const c_char,
    out_depth: *mut *mut AugundoDepth,
    out_mask: *mut *mut AugundoMask,
    out_error: *mut *mut c_char,
) -> AugundoStatus {
    guard(out_error, || {
        check_out(out_depth, "out_depth")?;
        check_out(out_mask, "out_mask")?;
        let d = read_dense(depth, "depth")?;
        let t = text(record_json, "record_json")?;
        let record = match AugmentationPlan::from_json(&t) {
            Ok(plan) => plan.record,
            Err(_) => TransformRecord::from_json(&t)?,
        };
        let r = undo_depth(&d, &record)?;
        *out_depth = boxed(AugundoDepth {
            dims: r.depth.dims(),
            values: r.depth.into_data(),
        });
        *out_mask = boxed(AugundoMask { mask: r.mask });
        Ok(())
    })
}

/// Evaluates the masked loss of `depth` on the target frame. `mask` may be
/// null (all pixels valid). `calibration_json` holds the intrinsics and the
/// two neighbour poses; `loss_json` (null or empty: defaults) holds the
/// loss configuration.
///
/// # Safety
/// Views must describe readable memory; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn augundo_loss(
    image: *const AugundoBufferView,
    prev: *const AugundoBufferView,
    next: *const AugundoBufferView,
    sparse: *const AugundoBufferView,
    depth: *const AugundoBufferView,
    mask: *const AugundoBufferView,
    calibration_json: *const c_char,
    loss_json: *const c_char,
    out: *mut AugundoLossBreakdown,
    out_error: *mut *mut c_char,
) -> AugundoStatus {
    guard(out_error, || {
        check_out(out, "out")?;
        let img = read_image(image, "image")?;
        let neighbours = [read_image(prev, "prev")?, read_image(next, "next")?];
        let z = read_sparse(sparse, "sparse")?;
        let d = read_dense(depth, "depth")?;
        let m = if mask.is_null() {
            ValidityMask::ones(img.dims())
        } else {
            read_mask(mask, "mask")?
        };
        let calib = Calibration::from_json(&text(calibration_json, "calibration_json")?)?;
        let cfg: LossConfig = match opt_text(loss_json, "loss_json")? {
            Some(t) => LossConfig::from_json(&t)?,
            None => LossConfig::default(),
        };
        let poses = [calib.pose_prev, calib.pose_next];
        let b = total_loss(
            &LossInputs {
                image: &img,
                neighbours: &neighbours,
                sparse: &z,
                depth: &d,
                mask: &m,
                intrinsics: &calib.intrinsics,
                poses: &poses,
            },
            &cfg,
        )?;
        *out = AugundoLossBreakdown {
            photometric: b.photometric,
            sparse: b.sparse,
            smoothness: b.smoothness,
            total: b.total,
            valid_pixel_count: b.valid_pixel_count as u64,
        };
        Ok(())
    })
}

/// Scores `pred` against ground truth over pixels with gt in
/// [min_depth, max_depth]; gt 0 marks missing values.
///
/// # Safety
/// Views must describe readable memory; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn augundo_metrics(
    pred: *const AugundoBufferView,
    gt: *const AugundoBufferView,
    min_depth: f64,
    max_depth: f64,
    out: *mut AugundoMetrics,
    out_error: *mut *mut c_char,
) -> AugundoStatus {
    guard(out_error, || {
        check_out(out, "out")?;
        let range = DepthRange::new(min_depth, max_depth)?;
        let p = read_dense(pred, "pred")?;
        let g = read_sparse(gt, "gt")?;
        let m = evaluate_metrics_sparse_gt(&p, &g, range)?;
        *out = AugundoMetrics {
            mae: m.mae,
            rmse: m.rmse,
            imae: m.imae,
            irmse: m.irmse,
            abs_rel: m.abs_rel,
            sq_rel: m.sq_rel,
            delta1: m.delta1,
            delta2: m.delta2,
            delta3: m.delta3,
            count: m.count as u64,
        };
        Ok(())
    })
}

/// Image height and width; zeros for a null handle.
///
/// # Safety
/// `image` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn augundo_image_dims(image: *const AugundoImage, height: *mut usize, width: *mut usize) {
    let d = image.as_ref().map_or(Dims::new(0, 0), |i| i.image.dims());
    if !height.is_null() {
        *height = d.height;
    }
    if !width.is_null() {
        *width = d.width;
    }
}

/// Interleaved RGB intensities (height * width * 3 values), valid until the
/// handle is freed.
///
/// # Safety
/// `image` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn augundo_image_data(image: *const AugundoImage) -> *const f64 {
    image.as_ref().map_or(ptr::null(), |i| i.image.data().as_ptr())
}

/// Writes round(v * 255) into `out`, which holds `len` bytes.
///
/// # Safety
/// `image` must be a live handle and `out` writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn augundo_image_to_u8(image: *const AugundoImage, out: *mut u8, len: usize) -> AugundoStatus {
    let Some(i) = image.as_ref() else {
        return AugundoStatus::NullArgument;
    };
    if out.is_null() {
        return AugundoStatus::NullArgument;
    }
    let bytes = io::image_to_rgb8(&i.image);
    if len != bytes.len() {
        return AugundoStatus::InvalidBuffer;
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), out, len);
    AugundoStatus::Ok
}

/// # Safety
/// `image` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn augundo_image_free(image: *mut AugundoImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Depth height and width; zeros for a null handle.
///
/// # Safety
/// `depth` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn augundo_depth_dims(depth: *const AugundoDepth, height: *mut usize, width: *mut usize) {
    let d = depth.as_ref().map_or(Dims::new(0, 0), |d| d.dims);
    if !height.is_null() {
        *height = d.height;
    }
    if !width.is_null() {
        *width = d.width;
    }
}

/// Depth in meters (height * width values), valid until the handle is freed.
///
/// # Safety
/// `depth` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn augundo_depth_data(depth: *const AugundoDepth) -> *const f64 {
    depth.as_ref().map_or(ptr::null(), |d| d.values.as_ptr())
}

/// Writes rounded millimeters, saturating at 65535, into `out` of `len` values.
///
/// # Safety
/// `depth` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn augundo_depth_to_u16(depth: *const AugundoDepth, out: *mut u16, len: usize) -> AugundoStatus {
    let Some(d) = depth.as_ref() else {
        return AugundoStatus::NullArgument;
    };
    if out.is_null() {
        return AugundoStatus::NullArgument;
    }
    let mm = io::depth_to_mm(&d.values);
    if len != mm.len() {
        return AugundoStatus::InvalidBuffer;
    }
    ptr::copy_nonoverlapping(mm.as_ptr(), out, len);
    AugundoStatus::Ok
}

/// # Safety
/// `depth` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn augundo_depth_free(depth: *mut AugundoDepth) {
    if !depth.is_null() {
        drop(Box::from_raw(depth));
    }
}

/// Mask height and width; zeros for a null handle.
///
/// # Safety
/// `mask` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn augundo_mask_dims(mask: *const AugundoMask, height: *mut usize, width: *mut usize) {
    let d = mask.as_ref().map_or(Dims::new(0, 0), |m| m.mask.dims());
    if !height.is_null() {
        *height = d.height;
    }
    if !width.is_null() {
        *width = d.width;
    }
}

/// Number of valid pixels; 0 for a null handle.
///
/// # Safety
/// `mask` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn augundo_mask_valid_count(mask: *const AugundoMask) -> usize {
    mask.as_ref().map_or(0, |m| m.mask.valid_count())
}

/// Writes 1 for valid and 0 for invalid pixels into `out` of `len` bytes.
///
/// # Safety
/// `mask` must be a live handle and `out` writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn augundo_mask_to_u8(mask: *const AugundoMask, out: *mut u8, len: usize) -> AugundoStatus {
    let Some(m) = mask.as_ref() else {
        return AugundoStatus::NullArgument;
    };
    if out.is_null() {
        return AugundoStatus::NullArgument;
    }
    let data = m.mask.data();
    if len != data.len() {
        return AugundoStatus::InvalidBuffer;
    }
    for (i, &b) in data.iter().enumerate() {
        *out.add(i) = b as u8;
    }
    AugundoStatus::Ok
}

/// # Safety
/// `mask` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn augundo_mask_free(mask: *mut AugundoMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn augundo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
