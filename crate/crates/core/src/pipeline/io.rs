//! On-disk formats.
//!
//! Images are 8-bit RGB PNG. Depth is 16-bit grayscale PNG in millimeters,
//! 0 meaning missing. Masks are 8-bit PNG with values {0, 255}. Calibration
//! and poses live in a JSON sidecar:
//!
//! ```json
//! { "fx": 500, "fy": 500, "cx": 31.5, "cy": 31.5,
//!   "prev": { "rotation": [1,0,0, 0,1,0, 0,0,1], "translation": [0.1, 0, 0] },
//!   "next": { "rotation": [1,0,0, 0,1,0, 0,0,1], "translation": [-0.1, 0, 0] } }
//! ```

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::types::{CameraIntrinsics, DenseDepthMap, Dims, Image, RigidPose, SparseDepthMap, ValidityMask};

use super::step::FrameTriplet;

fn codec(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Codec {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    Ok(())
}

fn open(path: &Path) -> Result<image::DynamicImage> {
    let reader = image::ImageReader::open(path).map_err(|e| io_err(path, e))?;
    reader.with_guessed_format().map_err(|e| io_err(path, e))?.decode().map_err(|e| codec(path, e))
}

pub fn load_image(path: &Path) -> Result<Image> {
    let rgb = open(path)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    image_from_rgb8(Dims::new(h as usize, w as usize), &rgb.into_raw())
}

/// Interleaved 8-bit RGB to an intensity image (v / 255).
pub fn image_from_rgb8(dims: Dims, bytes: &[u8]) -> Result<Image> {
    Image::new(dims.height, dims.width, bytes.iter().map(|&b| b as f64 / 255.0).collect())
}

/// Intensities to interleaved 8-bit RGB (round(v * 255)).
pub fn image_to_rgb8(img: &Image) -> Vec<u8> {
    img.data().iter().map(|v| (v * 255.0).round() as u8).collect()
}

/// Millimeters to meters; 0 stays 0.
pub fn depth_from_mm(mm: &[u16]) -> Vec<f64> {
    mm.iter().map(|&m| m as f64 / 1000.0).collect()
}

/// Meters to rounded millimeters, saturating at 65535.
pub fn depth_to_mm(values: &[f64]) -> Vec<u16> {
    values
        .iter()
        .map(|m| (m * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16)
        .collect()
}

pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let bytes = image_to_rgb8(img);
    let buf: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("buffer matches dims");
    buf.save(path).map_err(|e| codec(path, e))
}

/// Raw depth in meters, 0 where the file holds 0.
pub fn load_depth_values(path: &Path) -> Result<(Dims, Vec<f64>)> {
    let img = match open(path)? {
        image::DynamicImage::ImageLuma16(b) => b,
        other => {
            return Err(Error::ParseError(format!(
                "{}: expected 16-bit grayscale depth, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = img.dimensions();
    Ok((Dims::new(h as usize, w as usize), depth_from_mm(&img.into_raw())))
}

pub fn load_sparse_depth(path: &Path) -> Result<SparseDepthMap> {
    let (dims, data) = load_depth_values(path)?;
    SparseDepthMap::new(dims.height, dims.width, data)
}

/// Dense depth; every pixel must be non-zero.
pub fn load_dense_depth(path: &Path) -> Result<DenseDepthMap> {
    let (dims, data) = load_depth_values(path)?;
    DenseDepthMap::new(dims.height, dims.width, data)
}

/// Writes meters as rounded millimeters, saturating at 65535.
pub fn save_depth(values: &[f64], dims: Dims, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let mm = depth_to_mm(values);
    let buf: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(dims.width as u32, dims.height as u32, mm).expect("buffer matches dims");
    buf.save(path).map_err(|e| codec(path, e))
}

pub fn save_mask(mask: &ValidityMask, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let dims = mask.dims();
    let bytes: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, _> =
        ImageBuffer::from_raw(dims.width as u32, dims.height as u32, bytes).expect("buffer matches dims");
    buf.save(path).map_err(|e| codec(path, e))
}

pub fn load_mask(path: &Path) -> Result<ValidityMask> {
    let gray = open(path)?.to_luma8();
    let (w, h) = gray.dimensions();
    let dims = Dims::new(h as usize, w as usize);
    let bits: Vec<u8> = gray
        .into_raw()
        .into_iter()
        .map(|b| match b {
            0 => Ok(0),
            255 => Ok(1),
            other => Err(Error::ParseError(format!("{}: mask value {other}", path.display()))),
        })
        .collect::<Result<_>>()?;
    ValidityMask::from_u8(dims, &bits)
}

const COLORMAP: [[f64; 3]; 6] = [
    [0.0, 0.0, 0.5],
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.5, 0.0, 0.0],
];

/// Blue-to-red color for `t` in [0, 1].
pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 1.0 };
    let x = t * (COLORMAP.len() - 1) as f64;
    let i = (x.floor() as usize).min(COLORMAP.len() - 2);
    let f = x - i as f64;
    let mut out = [0u8; 3];
    for (k, o) in out.iter_mut().enumerate() {
        *o = ((COLORMAP[i][k] * (1.0 - f) + COLORMAP[i + 1][k] * f) * 255.0).round() as u8;
    }
    out
}

/// Color-mapped error image; `vmax` defaults to the largest value.
pub fn save_error_map(values: &[f64], dims: Dims, vmax: Option<f64>, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let top = vmax.unwrap_or_else(|| values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max));
    let scale = if top > 0.0 { 1.0 / top } else { 0.0 };
    let bytes: Vec<u8> = values.iter().flat_map(|v| colormap(v * scale)).collect();
    let buf: ImageBuffer<Rgb<u8>, _> =
        ImageBuffer::from_raw(dims.width as u32, dims.height as u32, bytes).expect("buffer matches dims");
    buf.save(path).map_err(|e| codec(path, e))
}

/// Intrinsics and the poses of the two neighbouring frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub intrinsics: CameraIntrinsics,
    pub pose_prev: RigidPose,
    pub pose_next: RigidPose,
}

fn number(obj: &Map<String, Value>, key: &str, path: &str) -> Result<f64> {
    obj.get(key)
        .ok_or_else(|| Error::MissingKey(format!("{path}{key}")))?
        .as_f64()
        .ok_or_else(|| Error::ParseError(format!("`{path}{key}` is not a number")))
}

fn numbers<const N: usize>(obj: &Map<String, Value>, key: &str, path: &str) -> Result<[f64; N]> {
    let arr = obj
        .get(key)
        .ok_or_else(|| Error::MissingKey(format!("{path}{key}")))?
        .as_array()
        .ok_or_else(|| Error::ParseError(format!("`{path}{key}` is not an array")))?;
    if arr.len() != N {
        return Err(Error::ParseError(format!("`{path}{key}` needs {N} numbers, got {}", arr.len())));
    }
    let mut out = [0.0; N];
    for (o, v) in out.iter_mut().zip(arr) {
        *o = v
            .as_f64()
            .ok_or_else(|| Error::ParseError(format!("`{path}{key}` holds a non-number")))?;
    }
    Ok(out)
}

fn pose_from(obj: &Map<String, Value>, key: &str) -> Result<RigidPose> {
    let inner = obj
        .get(key)
        .ok_or_else(|| Error::MissingKey(key.to_string()))?
        .as_object()
        .ok_or_else(|| Error::ParseError(format!("`{key}` is not an object")))?;
    let prefix = format!("{key}.");
    RigidPose::from_rows(numbers(inner, "rotation", &prefix)?, numbers(inner, "translation", &prefix)?)
}

impl Calibration {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::ParseError(format!("calibration: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::ParseError("calibration must be a JSON object".into()))?;
        let intrinsics = CameraIntrinsics::new(
            number(obj, "fx", "")?,
            number(obj, "fy", "")?,
            number(obj, "cx", "")?,
            number(obj, "cy", "")?,
        )?;
        Ok(Self {
            intrinsics,
            pose_prev: pose_from(obj, "prev")?,
            pose_next: pose_from(obj, "next")?,
        })
    }

    pub fn to_json(&self) -> String {
        let k = &self.intrinsics;
        let pose = |p: &RigidPose| json!({ "rotation": p.rotation_rows(), "translation": p.translation_array() });
        serde_json::to_string_pretty(&json!({
            "fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
            "prev": pose(&self.pose_prev),
            "next": pose(&self.pose_next),
        }))
        .expect("calibration serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// File locations of one training sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplePaths {
    pub image: PathBuf,
    pub prev: PathBuf,
    pub next: PathBuf,
    pub sparse: PathBuf,
    pub calibration: PathBuf,
    /// Optional dense ground truth.
    pub ground_truth: Option<PathBuf>,
}

impl SamplePaths {
    /// Standard layout: `image.png`, `prev.png`, `next.png`, `sparse.png`,
    /// `calibration.json` and optionally `ground_truth.png`.
    pub fn in_dir(dir: &Path) -> Self {
        let gt = dir.join("ground_truth.png");
        Self {
            image: dir.join("image.png"),
            prev: dir.join("prev.png"),
            next: dir.join("next.png"),
            sparse: dir.join("sparse.png"),
            calibration: dir.join("calibration.json"),
            ground_truth: gt.exists().then_some(gt),
        }
    }
}

pub fn load_sample(paths: &SamplePaths) -> Result<FrameTriplet> {
    let calib = Calibration::load(&paths.calibration)?;
    FrameTriplet::new(
        load_image(&paths.prev)?,
        load_image(&paths.image)?,
        load_image(&paths.next)?,
        load_sparse_depth(&paths.sparse)?,
        calib.intrinsics,
        calib.pose_prev,
        calib.pose_next,
    )
}

/// Writes a sample in the [`SamplePaths::in_dir`] layout.
pub fn save_sample(triplet: &FrameTriplet, ground_truth: Option<&DenseDepthMap>, dir: &Path) -> Result<SamplePaths> {
    let paths = SamplePaths {
        ground_truth: ground_truth.map(|_| dir.join("ground_truth.png")),
        ..SamplePaths::in_dir(dir)
    };
    save_image(&triplet.image, &paths.image)?;
    save_image(&triplet.prev, &paths.prev)?;
    save_image(&triplet.next, &paths.next)?;
    save_depth(triplet.sparse.data(), triplet.sparse.dims(), &paths.sparse)?;
    let calib = Calibration {
        intrinsics: triplet.intrinsics,
        pose_prev: triplet.pose_prev,
        pose_next: triplet.pose_next,
    };
    write_text(&paths.calibration, &calib.to_json())?;
    if let (Some(gt), Some(p)) = (ground_truth, &paths.ground_truth) {
        save_depth(gt.data(), gt.dims(), p)?;
    }
    Ok(paths)
}
