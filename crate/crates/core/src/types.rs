//! Validated value types shared by every other module.
//!
//! Grids are stored row-major. A pixel coordinate is `(u, v)` with `u` the
//! column and `v` the row, and pixel centres sit on integer coordinates.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Height and width of a raster, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub const fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub const fn area(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub const fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// True when the continuous coordinate lies inside the pixel-centre hull
    /// `[0, W-1] x [0, H-1]`.
    #[inline]
    pub fn contains_point(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }

    /// Centre of the canvas in pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        )
    }

    fn check_min(&self) -> Result<()> {
        if self.height < 2 || self.width < 2 {
            return Err(Error::DegenerateDims {
                height: self.height,
                width: self.width,
            });
        }
        Ok(())
    }

    pub(crate) fn expect(&self, actual: Dims) -> Result<()> {
        if *self != actual {
            return Err(Error::DimsMismatch {
                expected: *self,
                actual,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

fn check_len(dims: Dims, channels: usize, len: usize) -> Result<()> {
    let expected = dims.area() * channels;
    if len != expected {
        return Err(Error::BufferLength {
            expected,
            actual: len,
        });
    }
    Ok(())
}

/// RGB image with intensities in `[0, 1]`, interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    dims: Dims,
    data: Vec<f64>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    /// Validates an interleaved `H x W x 3` buffer.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let dims = Dims::new(height, width);
        dims.check_min()?;
        check_len(dims, Self::CHANNELS, data.len())?;
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRangeIntensity { index, value });
        }
        Ok(Self { dims, data })
    }

    /// Builds an image by evaluating `f(row, col)`; results are clamped to `[0, 1]`.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        dims.check_min()?;
        let mut data = Vec::with_capacity(dims.area() * 3);
        for row in 0..dims.height {
            for col in 0..dims.width {
                data.extend(f(row, col).iter().map(|c| clamp_unit(*c)));
            }
        }
        Ok(Self { dims, data })
    }

    pub fn constant(dims: Dims, rgb: [f64; 3]) -> Result<Self> {
        Self::from_fn(dims, |_, _| rgb)
    }

    /// Caller guarantees every value is already in `[0, 1]` and dims are valid.
    pub(crate) fn from_raw(dims: Dims, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.area() * 3);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = self.dims.index(row, col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Channel-mean intensity per pixel.
    pub fn gray(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|p| (p[0] + p[1] + p[2]) / 3.0)
            .collect()
    }

    /// BT.601 luma per pixel.
    pub fn luma(&self) -> Vec<f64> {
        self.data.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect()
    }
}

#[inline]
pub(crate) fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Sparse metric depth; `0` marks a pixel without a measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDepthMap {
    dims: Dims,
    data: Vec<f64>,
}

impl SparseDepthMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let dims = Dims::new(height, width);
        dims.check_min()?;
        check_len(dims, 1, data.len())?;
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidDepth { index, value });
        }
        Ok(Self { dims, data })
    }

    pub fn empty(dims: Dims) -> Result<Self> {
        Self::new(dims.height, dims.width, vec![0.0; dims.area()])
    }

    pub(crate) fn from_raw(dims: Dims, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.area());
        Self { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.dims.index(row, col)]
    }

    /// Flat indices of the measured pixels (the support of the map).
    pub fn support(&self) -> Vec<usize> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn point_count(&self) -> usize {
        self.data.iter().filter(|d| **d > 0.0).count()
    }
}

/// Closed interval of admissible predicted depths, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRange {
    pub min: f64,
    pub max: f64,
}

impl DepthRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min > 0.0 && min < max) {
            return Err(Error::bad_range("depth range", format!("[{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.min && d <= self.max
    }
}

impl Default for DepthRange {
    /// Indoor evaluation range.
    fn default() -> Self {
        Self { min: 0.2, max: 5.0 }
    }
}

/// Dense predicted depth; every entry is finite and strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseDepthMap {
    dims: Dims,
    data: Vec<f64>,
}

impl DenseDepthMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let dims = Dims::new(height, width);
        dims.check_min()?;
        check_len(dims, 1, data.len())?;
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v <= 0.0)
        {
            return Err(Error::InvalidDepth { index, value });
        }
        Ok(Self { dims, data })
    }

    /// Clamps every entry into `range` (non-finite values become `range.max`).
    pub fn clamped(height: usize, width: usize, data: Vec<f64>, range: DepthRange) -> Result<Self> {
        let data = data
            .into_iter()
            .map(|d| {
                if d.is_nan() {
                    range.max
                } else {
                    d.clamp(range.min, range.max)
                }
            })
            .collect();
        Self::new(height, width, data)
    }

    pub fn constant(dims: Dims, depth: f64) -> Result<Self> {
        Self::new(dims.height, dims.width, vec![depth; dims.area()])
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.area());
        for row in 0..dims.height {
            for col in 0..dims.width {
                data.push(f(row, col));
            }
        }
        Self::new(dims.height, dims.width, data)
    }

    pub(crate) fn from_raw(dims: Dims, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.area());
        Self { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.dims.index(row, col)]
    }

    pub fn within(&self, range: DepthRange) -> bool {
        self.data.iter().all(|d| range.contains(*d))
    }
}

/// Binary per-pixel validity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityMask {
    dims: Dims,
    data: Vec<bool>,
}

impl ValidityMask {
    pub fn new(dims: Dims, data: Vec<bool>) -> Result<Self> {
        check_len(dims, 1, data.len())?;
        Ok(Self { dims, data })
    }

    /// Accepts only 0/1 bytes.
    pub fn from_u8(dims: Dims, bytes: &[u8]) -> Result<Self> {
        check_len(dims, 1, bytes.len())?;
        let mut data = Vec::with_capacity(bytes.len());
        for (index, b) in bytes.iter().enumerate() {
            match b {
                0 => data.push(false),
                1 => data.push(true),
                other => {
                    return Err(Error::ParseError(format!(
                        "mask value {other} at index {index} is not 0 or 1"
                    )))
                }
            }
        }
        Ok(Self { dims, data })
    }

    pub fn ones(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![true; dims.area()],
        }
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![false; dims.area()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[self.dims.index(row, col)]
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|m| **m).count()
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|m| u8::from(*m)).collect()
    }

    /// Pixelwise AND.
    pub fn and(&self, other: &ValidityMask) -> Result<ValidityMask> {
        self.dims.expect(other.dims)?;
        Ok(Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a && *b)
                .collect(),
        })
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return Err(Error::BadIntrinsics(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::BadIntrinsics(format!(
                "principal point must be finite, got ({cx}, {cy})"
            )));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Back-projects pixel `(u, v)` at depth `z` into camera coordinates.
    #[inline]
    pub fn backproject(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        Vector3::new(z * (u - self.cx) / self.fx, z * (v - self.cy) / self.fy, z)
    }

    /// Perspective projection of a camera-frame point. `p.z` must be non-zero.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }
}

/// Rigid motion `P' = R P + t` taking points from one camera frame to another.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

const ROTATION_TOL: f64 = 1e-6;

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::NotRotation("non-finite entries".into()));
        }
        let gram = rotation.transpose() * rotation;
        let ortho_err = (gram - Matrix3::identity()).abs().max();
        if ortho_err > ROTATION_TOL {
            return Err(Error::NotRotation(format!(
                "R^T R deviates from identity by {ortho_err:e}"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::NotRotation(format!("determinant is {det}")));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Row-major 3x3 rotation plus translation.
    pub fn from_rows(rotation: [f64; 9], translation: [f64; 3]) -> Result<Self> {
        Self::new(
            Matrix3::from_row_slice(&rotation),
            Vector3::from_column_slice(&translation),
        )
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: [f64; 3]) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::from_column_slice(&t),
        }
    }

    /// Rotation of `angle` radians about `axis` (normalised internally), then translation.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64, t: [f64; 3]) -> Result<Self> {
        let axis = Vector3::from_column_slice(&axis);
        let norm = axis.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotRotation("zero rotation axis".into()));
        }
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Self::new(*rot.matrix(), Vector3::from_column_slice(&t))
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation_rows(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    pub fn translation_array(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    #[inline]
    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}
