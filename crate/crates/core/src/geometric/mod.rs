//! Geometric augmentations as coordinate maps between canvases.
//!
//! Every transform maps input pixel coordinates to output pixel coordinates
//! (`x' = T x`). Images are resampled by inverse warping through the map, and
//! every transform has a closed-form inverse, so a [`TransformRecord`] is
//! enough to rebuild both the forward and the inverse warp.

mod warp;

pub use warp::{
    warp_depth_nearest, warp_depth_nearest_traced, warp_image, warp_image_traced,
    warp_sparse_depth, TracedDepthWarp, TracedImageWarp,
};
pub(crate) use warp::sample_bilinear;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{check_probability, FamilyConfig, InclusionMode, UniformRange};
use crate::types::Dims;

/// The parameterised kind of a geometric transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    FlipH,
    FlipV,
    /// Content scaling about the canvas centre on a canvas of unchanged size.
    Resize { scale_h: f64, scale_w: f64 },
    /// Rotation about the input centre, re-centred on the output canvas.
    Rotate { degrees: f64 },
    /// Integer pixel shift.
    Translate { du: i64, dv: i64 },
}

/// A single transform together with the canvases it maps between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricTransform {
    #[serde(flatten)]
    pub kind: TransformKind,
    pub in_dims: Dims,
    pub out_dims: Dims,
}

/// `(cos, sin)` of an angle in degrees, exact for multiples of 90.
fn cos_sin_deg(degrees: f64) -> (f64, f64) {
    let quarter = degrees / 90.0;
    if quarter == quarter.round() {
        match (quarter.round() as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        let r = degrees.to_radians();
        (r.cos(), r.sin())
    }
}

/// Smallest canvas holding the input rectangle rotated by `degrees`.
pub fn tight_rotation_canvas(in_dims: Dims, degrees: f64) -> Dims {
    let (c, s) = cos_sin_deg(degrees);
    let (c, s) = (c.abs(), s.abs());
    let (h, w) = (in_dims.height as f64, in_dims.width as f64);
    let fit = |x: f64| (x - 1e-9).ceil().max(1.0) as usize;
    Dims::new(fit(w * s + h * c), fit(w * c + h * s))
}

impl GeometricTransform {
    pub fn flip_h(dims: Dims) -> Self {
        Self {
            kind: TransformKind::FlipH,
            in_dims: dims,
            out_dims: dims,
        }
    }

    pub fn flip_v(dims: Dims) -> Self {
        Self {
            kind: TransformKind::FlipV,
            in_dims: dims,
            out_dims: dims,
        }
    }

    pub fn resize(dims: Dims, scale_h: f64, scale_w: f64) -> Result<Self> {
        let t = Self {
            kind: TransformKind::Resize { scale_h, scale_w },
            in_dims: dims,
            out_dims: dims,
        };
        t.validate()?;
        Ok(t)
    }

    /// Rotation onto the tight canvas enlarged by `pad` pixels on every side.
    pub fn rotate(dims: Dims, degrees: f64, pad: usize) -> Result<Self> {
        if !degrees.is_finite() {
            return Err(Error::bad_range("rotate", format!("angle {degrees}")));
        }
        let tight = tight_rotation_canvas(dims, degrees);
        Ok(Self {
            kind: TransformKind::Rotate { degrees },
            in_dims: dims,
            out_dims: Dims::new(tight.height + 2 * pad, tight.width + 2 * pad),
        })
    }

    pub fn translate(dims: Dims, du: i64, dv: i64) -> Self {
        Self {
            kind: TransformKind::Translate { du, dv },
            in_dims: dims,
            out_dims: dims,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dims.area() == 0 || self.out_dims.area() == 0 {
            return Err(Error::InconsistentRecord(format!(
                "empty canvas in {:?}",
                self.kind
            )));
        }
        match self.kind {
            TransformKind::Resize { scale_h, scale_w } => {
                if !(scale_h.is_finite() && scale_w.is_finite()) || scale_h <= 0.0 || scale_w <= 0.0 {
                    return Err(Error::NonInvertibleParam(format!(
                        "resize factors ({scale_h}, {scale_w})"
                    )));
                }
            }
            TransformKind::Rotate { degrees } if !degrees.is_finite() => {
                return Err(Error::NonInvertibleParam(format!("rotation angle {degrees}")));
            }
            _ => {}
        }
        let same = !matches!(self.kind, TransformKind::Rotate { .. });
        if same && self.in_dims != self.out_dims {
            return Err(Error::InconsistentRecord(format!(
                "{:?} must keep the canvas, got {} -> {}",
                self.kind, self.in_dims, self.out_dims
            )));
        }
        Ok(())
    }

    /// Whether this resize enlarges content (and therefore crops it).
    pub fn is_upscale(&self) -> bool {
        matches!(self.kind, TransformKind::Resize { scale_h, scale_w } if scale_h > 1.0 || scale_w > 1.0)
    }

    /// Maps an input coordinate to the output canvas.
    #[inline]
    pub fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        match self.kind {
            TransformKind::FlipH => ((self.in_dims.width - 1) as f64 - u, v),
            TransformKind::FlipV => (u, (self.in_dims.height - 1) as f64 - v),
            TransformKind::Resize { scale_h, scale_w } => {
                let (cu, cv) = self.in_dims.center();
                (cu + scale_w * (u - cu), cv + scale_h * (v - cv))
            }
            TransformKind::Rotate { degrees } => {
                let (c, s) = cos_sin_deg(degrees);
                let (iu, iv) = self.in_dims.center();
                let (ou, ov) = self.out_dims.center();
                let (du, dv) = (u - iu, v - iv);
                (ou + c * du - s * dv, ov + s * du + c * dv)
            }
            TransformKind::Translate { du, dv } => (u + du as f64, v + dv as f64),
        }
    }

    /// Exact closed-form inverse: flips are involutions, resize inverts its
    /// factors, rotation negates the angle and maps back onto the original
    /// canvas (the centre crop), translation negates the shift.
    pub fn inverse(&self) -> Result<Self> {
        self.validate()?;
        let kind = match self.kind {
            TransformKind::FlipH => TransformKind::FlipH,
            TransformKind::FlipV => TransformKind::FlipV,
            TransformKind::Resize { scale_h, scale_w } => TransformKind::Resize {
                scale_h: 1.0 / scale_h,
                scale_w: 1.0 / scale_w,
            },
            TransformKind::Rotate { degrees } => TransformKind::Rotate { degrees: -degrees },
            TransformKind::Translate { du, dv } => TransformKind::Translate { du: -du, dv: -dv },
        };
        Ok(Self {
            kind,
            in_dims: self.out_dims,
            out_dims: self.in_dims,
        })
    }

    /// Homogeneous pixel-coordinate matrix `A` with `[u', v', 1]^T = A [u, v, 1]^T`.
    pub fn as_matrix(&self) -> Matrix3<f64> {
        let (tu, tv) = self.apply(0.0, 0.0);
        let (au, av) = self.apply(1.0, 0.0);
        let (bu, bv) = self.apply(0.0, 1.0);
        Matrix3::new(au - tu, bu - tu, tu, av - tv, bv - tv, tv, 0.0, 0.0, 1.0)
    }
}

/// Ordered geometric transforms applied to a sample, with the original canvas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub original_dims: Dims,
    pub transforms: Vec<GeometricTransform>,
    /// Seed of the draw that produced this record, when it was sampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TransformRecord {
    pub fn empty(original_dims: Dims) -> Self {
        Self {
            original_dims,
            transforms: Vec::new(),
            seed: None,
        }
    }

    pub fn new(original_dims: Dims, transforms: Vec<GeometricTransform>) -> Result<Self> {
        let r = Self {
            original_dims,
            transforms,
            seed: None,
        };
        r.validate()?;
        Ok(r)
    }

    /// Builds a record by chaining kinds onto the running canvas.
    pub fn from_kinds(original_dims: Dims, kinds: &[TransformKind]) -> Result<Self> {
        let mut dims = original_dims;
        let mut transforms = Vec::with_capacity(kinds.len());
        for kind in kinds {
            let t = match *kind {
                TransformKind::FlipH => GeometricTransform::flip_h(dims),
                TransformKind::FlipV => GeometricTransform::flip_v(dims),
                TransformKind::Resize { scale_h, scale_w } => {
                    GeometricTransform::resize(dims, scale_h, scale_w)?
                }
                TransformKind::Rotate { degrees } => GeometricTransform::rotate(dims, degrees, 0)?,
                TransformKind::Translate { du, dv } => GeometricTransform::translate(dims, du, dv),
            };
            dims = t.out_dims;
            transforms.push(t);
        }
        Self::new(original_dims, transforms)
    }

    pub fn validate(&self) -> Result<()> {
        let mut dims = self.original_dims;
        for (i, t) in self.transforms.iter().enumerate() {
            t.validate()?;
            if t.in_dims != dims {
                return Err(Error::InconsistentRecord(format!(
                    "stage {i} expects canvas {} but receives {dims}",
                    t.in_dims
                )));
            }
            dims = t.out_dims;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }

    /// Canvas after the last transform.
    pub fn final_dims(&self) -> Dims {
        self.transforms
            .last()
            .map_or(self.original_dims, |t| t.out_dims)
    }

    pub fn forward_map(&self) -> WarpMap {
        WarpMap {
            in_dims: self.original_dims,
            stages: self.transforms.clone(),
        }
    }

    pub fn inverse_map(&self) -> Result<WarpMap> {
        let stages = self
            .transforms
            .iter()
            .rev()
            .map(GeometricTransform::inverse)
            .collect::<Result<Vec<_>>>()?;
        Ok(WarpMap {
            in_dims: self.final_dims(),
            stages,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::ParseError(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }
}

/// A chain of transforms with the canvas of every stage.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpMap {
    in_dims: Dims,
    stages: Vec<GeometricTransform>,
}

/// Result of tracing an output pixel back to the source canvas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceTrace {
    pub u: f64,
    pub v: f64,
    /// Set when some stage had to clamp the coordinate to its input frame,
    /// i.e. the value is an edge replication rather than genuine content.
    pub clamped: bool,
}

impl WarpMap {
    pub fn identity(dims: Dims) -> Self {
        Self {
            in_dims: dims,
            stages: Vec::new(),
        }
    }

    pub fn in_dims(&self) -> Dims {
        self.in_dims
    }

    pub fn out_dims(&self) -> Dims {
        self.stages.last().map_or(self.in_dims, |t| t.out_dims)
    }

    pub fn stages(&self) -> &[GeometricTransform] {
        &self.stages
    }

    /// Canvas dimensions before the first and after every stage.
    pub fn canvas_trace(&self) -> Vec<Dims> {
        std::iter::once(self.in_dims)
            .chain(self.stages.iter().map(|t| t.out_dims))
            .collect()
    }

    /// Single effective homogeneous matrix of the whole chain.
    pub fn matrix(&self) -> Matrix3<f64> {
        self.stages
            .iter()
            .fold(Matrix3::identity(), |acc, t| t.as_matrix() * acc)
    }

    /// Forward-maps a point through every stage without frame checks.
    pub fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        self.stages.iter().fold((u, v), |(u, v), t| t.apply(u, v))
    }

    /// Forward-maps a point, returning `None` if it leaves the pixel hull of
    /// any intermediate or final canvas.
    pub fn apply_in_frame(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let mut p = (u, v);
        for t in &self.stages {
            p = t.apply(p.0, p.1);
            if !t.out_dims.contains_point(p.0, p.1) {
                return None;
            }
        }
        Some(p)
    }

    /// Traces an output coordinate back to the source canvas, clamping at each
    /// stage's input frame (edge replication applied stage by stage).
    pub fn trace_source(&self, u: f64, v: f64) -> Result<SourceTrace> {
        Ok(self.tracer()?.trace(u, v))
    }

    /// Precomputes the per-stage inverses used by [`WarpMap::trace_source`].
    pub fn tracer(&self) -> Result<SourceTracer> {
        let stages = self
            .stages
            .iter()
            .rev()
            .map(|t| Ok((t.inverse()?, t.in_dims)))
            .collect::<Result<_>>()?;
        Ok(SourceTracer { stages })
    }

    /// Closed-form inverse chain: reversed order, each stage inverted.
    pub fn inverse(&self) -> Result<WarpMap> {
        Ok(WarpMap {
            in_dims: self.out_dims(),
            stages: self
                .stages
                .iter()
                .rev()
                .map(GeometricTransform::inverse)
                .collect::<Result<_>>()?,
        })
    }
}

/// Inverse stages of a map in tracing order, each with the frame it clamps to.
#[derive(Clone, Debug)]
pub struct SourceTracer {
    stages: Vec<(GeometricTransform, Dims)>,
}

impl SourceTracer {
    #[inline]
    pub fn trace(&self, u: f64, v: f64) -> SourceTrace {
        let mut p = (u, v);
        let mut clamped = false;
        for (inv, frame) in &self.stages {
            p = inv.apply(p.0, p.1);
            let cu = p.0.clamp(0.0, (frame.width - 1) as f64);
            let cv = p.1.clamp(0.0, (frame.height - 1) as f64);
            if cu != p.0 || cv != p.1 {
                clamped = true;
            }
            p = (cu, cv);
        }
        SourceTrace {
            u: p.0,
            v: p.1,
            clamped,
        }
    }
}

/// Forward map of a non-empty record.
pub fn compose(record: &TransformRecord) -> Result<WarpMap> {
    if record.is_empty() {
        return Err(Error::EmptyRecord);
    }
    record.validate()?;
    Ok(record.forward_map())
}

/// Inverse map `(T^m)^-1 o ... o (T^1)^-1` of a record.
pub fn invert(record: &TransformRecord) -> Result<WarpMap> {
    record.validate()?;
    record.inverse_map()
}

/// Which flips a flip draw may choose from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipModes {
    pub horizontal: bool,
    pub vertical: bool,
}

/// Per-family geometric sampling settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometricConfig {
    pub flip: FamilyConfig<FlipModes>,
    /// Content scale factor range.
    pub resize: FamilyConfig<UniformRange>,
    /// Draw height and width factors independently.
    pub anisotropic_resize: bool,
    /// Rotation range in degrees.
    pub rotate: FamilyConfig<UniformRange>,
    /// Maximum shift as a fraction of the canvas height and width.
    pub translate: FamilyConfig<f64>,
}

impl Default for GeometricConfig {
    fn default() -> Self {
        Self::disabled()
    }
}

impl GeometricConfig {
    pub fn disabled() -> Self {
        Self {
            flip: FamilyConfig::off(FlipModes {
                horizontal: true,
                vertical: true,
            }),
            resize: FamilyConfig::off(UniformRange::new(0.6, 1.0)),
            anisotropic_resize: false,
            rotate: FamilyConfig::off(UniformRange::new(-25.0, 25.0)),
            translate: FamilyConfig::off(0.1),
        }
    }

    /// Indoor depth-completion settings: horizontal and vertical flips,
    /// resize 0.6-1, rotation +-25 degrees, translation up to 10%, each at p = 0.5.
    pub fn indoor() -> Self {
        Self {
            flip: FamilyConfig::on(
                FlipModes {
                    horizontal: true,
                    vertical: true,
                },
                0.5,
            ),
            resize: FamilyConfig::on(UniformRange::new(0.6, 1.0), 0.5),
            anisotropic_resize: false,
            rotate: FamilyConfig::on(UniformRange::new(-25.0, 25.0), 0.5),
            translate: FamilyConfig::on(0.1, 0.5),
        }
    }

    /// Outdoor settings: horizontal flips only, no resize, rotation +-20 degrees,
    /// translation up to 10%.
    pub fn outdoor() -> Self {
        Self {
            flip: FamilyConfig::on(
                FlipModes {
                    horizontal: true,
                    vertical: false,
                },
                0.5,
            ),
            resize: FamilyConfig::off(UniformRange::new(0.6, 1.0)),
            anisotropic_resize: false,
            rotate: FamilyConfig::on(UniformRange::new(-20.0, 20.0), 0.5),
            translate: FamilyConfig::on(0.1, 0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("flip", self.flip.probability)?;
        if self.flip.enabled && !(self.flip.range.horizontal || self.flip.range.vertical) {
            return Err(Error::bad_range("flip", "no flip mode enabled"));
        }
        self.resize.validate("resize", |r| r.lo > 0.0)?;
        self.rotate
            .validate("rotate", |r| r.lo >= -180.0 && r.hi <= 180.0)?;
        check_probability("translate", self.translate.probability)?;
        if !(0.0..1.0).contains(&self.translate.range) {
            return Err(Error::bad_range(
                "translate",
                format!("max fraction {} outside [0, 1)", self.translate.range),
            ));
        }
        Ok(())
    }
}

/// Draws a record in the canonical order flip, resize, rotate, translate.
pub fn sample_geometric<R: Rng + ?Sized>(
    cfg: &GeometricConfig,
    dims: Dims,
    mode: InclusionMode,
    rng: &mut R,
) -> Result<TransformRecord> {
    cfg.validate()?;
    mode.validate()?;
    let block = mode.block_coin(rng);
    let mut kinds = Vec::new();
    if cfg.flip.include(block, rng) {
        let m = cfg.flip.range;
        let horizontal = match (m.horizontal, m.vertical) {
            (true, true) => rng.random_bool(0.5),
            (h, _) => h,
        };
        kinds.push(if horizontal {
            TransformKind::FlipH
        } else {
            TransformKind::FlipV
        });
    }
    if cfg.resize.include(block, rng) {
        let scale_w = cfg.resize.range.sample(rng);
        let scale_h = if cfg.anisotropic_resize {
            cfg.resize.range.sample(rng)
        } else {
            scale_w
        };
        kinds.push(TransformKind::Resize { scale_h, scale_w });
    }
    let mut canvas = dims;
    if cfg.rotate.include(block, rng) {
        let degrees = cfg.rotate.range.sample(rng);
        canvas = tight_rotation_canvas(dims, degrees);
        kinds.push(TransformKind::Rotate { degrees });
    }
    if cfg.translate.include(block, rng) {
        let max_u = (cfg.translate.range * canvas.width as f64).floor() as i64;
        let max_v = (cfg.translate.range * canvas.height as f64).floor() as i64;
        kinds.push(TransformKind::Translate {
            du: rng.random_range(-max_u..=max_u),
            dv: rng.random_range(-max_v..=max_v),
        });
    }
    TransformRecord::from_kinds(dims, &kinds)
}

/// Point form of a homogeneous matrix.
pub fn apply_matrix(m: &Matrix3<f64>, u: f64, v: f64) -> (f64, f64) {
    let p = m * Vector3::new(u, v, 1.0);
    (p.x / p.z, p.y / p.z)
}
