//! Unsupervised depth-completion objective evaluated in the original frame.
//!
//! The data terms (photometric reconstruction and sparse-depth fidelity) are
//! averaged over the validity mask; smoothness is not masked by default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometric::sample_bilinear;
use crate::types::{CameraIntrinsics, DenseDepthMap, Dims, Image, RigidPose, SparseDepthMap, ValidityMask};

/// Reprojected points closer than this to the camera plane count as behind it.
pub const BEHIND_CAMERA_EPS: f64 = 1e-6;
/// Reprojected coordinates this close to a pixel centre are snapped onto it.
pub const GRID_SNAP_EPS: f64 = 1e-9;

const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Weights of the three loss terms and the SSIM share of the photometric error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub ssim_weight: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            lambda: 0.01,
            ssim_weight: 0.85,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("alpha", self.alpha), ("beta", self.beta), ("lambda", self.lambda)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::bad_range(name, format!("weight {w} must be >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.ssim_weight) {
            return Err(Error::bad_range(
                "ssim_weight",
                format!("{} outside [0, 1]", self.ssim_weight),
            ));
        }
        Ok(())
    }
}

/// Penalty applied to sparse-depth residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparseNorm {
    #[default]
    L1,
    L2,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub weights: LossWeights,
    pub sparse_norm: SparseNorm,
    /// Restrict the smoothness term to differences between two valid pixels.
    pub mask_smoothness: bool,
}

impl LossConfig {
    /// Parses JSON; missing fields take their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::ParseError(format!("loss config: {e}")))?;
        cfg.weights.validate()?;
        Ok(cfg)
    }
}

/// Scalar loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub photometric: f64,
    pub sparse: f64,
    pub smoothness: f64,
    pub total: f64,
    pub valid_pixel_count: usize,
}

/// Per-pixel sampling coordinates produced by reprojection.
#[derive(Clone, Debug, PartialEq)]
pub struct Reprojection {
    pub dims: Dims,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Set where the transformed point is at or behind the camera plane.
    pub behind: Vec<bool>,
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= GRID_SNAP_EPS {
        r
    } else {
        x
    }
}

/// Coordinates in the neighbouring view of every pixel: back-project with the
/// depth, move by the relative pose, project.
pub fn reproject(d: &DenseDepthMap, k: &CameraIntrinsics, pose: &RigidPose) -> Reprojection {
    let dims = d.dims();
    let n = dims.area();
    let mut out = Reprojection {
        dims,
        u: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        behind: Vec::with_capacity(n),
    };
    for row in 0..dims.height {
        for col in 0..dims.width {
            let p = pose.transform(&k.backproject(col as f64, row as f64, d.get(row, col)));
            if p.z <= BEHIND_CAMERA_EPS {
                out.u.push(f64::NAN);
                out.v.push(f64::NAN);
                out.behind.push(true);
            } else {
                let (u, v) = k.project(&p);
                out.u.push(snap(u));
                out.v.push(snap(v));
                out.behind.push(false);
            }
        }
    }
    out
}

/// Bilinear reconstruction of the target view from `src` at the given coordinates.
pub fn reconstruct(src: &Image, coords: &Reprojection) -> Result<(Image, ValidityMask)> {
    let dims = coords.dims;
    let sd = src.dims();
    let mut data = Vec::with_capacity(dims.area() * 3);
    let mut mask = Vec::with_capacity(dims.area());
    for i in 0..dims.area() {
        let (u, v) = (coords.u[i], coords.v[i]);
        if coords.behind[i] || !u.is_finite() || !v.is_finite() {
            data.extend_from_slice(&[0.0; 3]);
            mask.push(false);
            continue;
        }
        mask.push(sd.contains_point(u, v));
        data.extend_from_slice(&sample_bilinear(src, u, v));
    }
    Ok((Image::from_raw(dims, data), ValidityMask::new(dims, mask)?))
}

/// Channel-averaged SSIM per pixel over 3x3 windows, using only pixels in
/// `support`. Unsupported centres get 0.
pub fn ssim_map(a: &Image, b: &Image, support: Option<&ValidityMask>) -> Result<Vec<f64>> {
    a.dims().expect(b.dims())?;
    let dims = a.dims();
    if let Some(m) = support {
        dims.expect(m.dims())?;
    }
    let inside = |r: usize, c: usize| support.is_none_or(|m| m.get(r, c));
    let mut out = vec![0.0; dims.area()];
    for row in 0..dims.height {
        for col in 0..dims.width {
            if !inside(row, col) {
                continue;
            }
            let mut acc = 0.0;
            for ch in 0..3 {
                let (mut n, mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
                for r in row.saturating_sub(1)..=(row + 1).min(dims.height - 1) {
                    for c in col.saturating_sub(1)..=(col + 1).min(dims.width - 1) {
                        if !inside(r, c) {
                            continue;
                        }
                        let x = a.pixel(r, c)[ch];
                        let y = b.pixel(r, c)[ch];
                        n += 1.0;
                        sa += x;
                        sb += y;
                        saa += x * x;
                        sbb += y * y;
                        sab += x * y;
                    }
                }
                let (mx, my) = (sa / n, sb / n);
                let vx = (saa / n - mx * mx).max(0.0);
                let vy = (sbb / n - my * my).max(0.0);
                let cxy = sab / n - mx * my;
                let s = ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2))
                    / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
                acc += s.clamp(-1.0, 1.0);
            }
            out[dims.index(row, col)] = acc / 3.0;
        }
    }
    Ok(out)
}

/// Per-pixel `w (1 - SSIM) / 2 + (1 - w) |a - b|_1`, channel-averaged.
pub fn photometric_error(i_hat: &Image, i: &Image, ssim_weight: f64) -> Result<Vec<f64>> {
    photometric_error_masked(i_hat, i, ssim_weight, None)
}

/// As [`photometric_error`], with SSIM windows restricted to `support`.
pub fn photometric_error_masked(
    i_hat: &Image,
    i: &Image,
    ssim_weight: f64,
    support: Option<&ValidityMask>,
) -> Result<Vec<f64>> {
    i_hat.dims().expect(i.dims())?;
    let l1 = i_hat
        .data()
        .chunks_exact(3)
        .zip(i.data().chunks_exact(3))
        .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>() / 3.0);
    if ssim_weight == 0.0 {
        return Ok(l1.collect());
    }
    let ssim = ssim_map(i_hat, i, support)?;
    Ok(l1
        .zip(ssim)
        .map(|(l, s)| ssim_weight * (1.0 - s) / 2.0 + (1.0 - ssim_weight) * l)
        .collect())
}

/// Per-pixel sparse-depth residual, zero off the sparse support.
pub fn sparse_depth_error(d: &DenseDepthMap, z: &SparseDepthMap, norm: SparseNorm) -> Result<Vec<f64>> {
    d.dims().expect(z.dims())?;
    Ok(d
        .data()
        .iter()
        .zip(z.data())
        .map(|(p, m)| {
            if *m > 0.0 {
                let r = (p - m).abs();
                match norm {
                    SparseNorm::L1 => r,
                    SparseNorm::L2 => r * r,
                }
            } else {
                0.0
            }
        })
        .collect())
}

/// Edge-aware first-order smoothness of the depth, averaged per axis.
pub fn smoothness(d: &DenseDepthMap, img: &Image) -> Result<f64> {
    smoothness_impl(d, img, None)
}

/// Smoothness counting only differences between two mask-1 pixels.
pub fn smoothness_masked(d: &DenseDepthMap, img: &Image, mask: &ValidityMask) -> Result<f64> {
    smoothness_impl(d, img, Some(mask))
}

fn smoothness_impl(d: &DenseDepthMap, img: &Image, mask: Option<&ValidityMask>) -> Result<f64> {
    let dims = d.dims();
    dims.expect(img.dims())?;
    if let Some(m) = mask {
        dims.expect(m.dims())?;
    }
    let gray = img.gray();
    let ok = |a: usize, b: usize| mask.is_none_or(|m| m.data()[a] && m.data()[b]);
    let (mut sx, mut nx, mut sy, mut ny) = (0.0, 0usize, 0.0, 0usize);
    for row in 0..dims.height {
        for col in 0..dims.width {
            let i = dims.index(row, col);
            if col + 1 < dims.width && ok(i, i + 1) {
                let dd = (d.data()[i + 1] - d.data()[i]).abs();
                sx += dd * (-(gray[i + 1] - gray[i]).abs()).exp();
                nx += 1;
            }
            if row + 1 < dims.height && ok(i, i + dims.width) {
                let j = i + dims.width;
                let dd = (d.data()[j] - d.data()[i]).abs();
                sy += dd * (-(gray[j] - gray[i]).abs()).exp();
                ny += 1;
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    Ok(mean(sx, nx) + mean(sy, ny))
}

/// Everything the objective needs for one target frame.
#[derive(Clone, Copy, Debug)]
pub struct LossInputs<'a> {
    pub image: &'a Image,
    pub neighbours: &'a [Image],
    pub sparse: &'a SparseDepthMap,
    pub depth: &'a DenseDepthMap,
    pub mask: &'a ValidityMask,
    pub intrinsics: &'a CameraIntrinsics,
    /// Relative pose from the target frame to each neighbour.
    pub poses: &'a [RigidPose],
}

/// Loss terms plus the intermediate maps.
#[derive(Clone, Debug)]
pub struct LossEvaluation {
    pub breakdown: LossBreakdown,
    pub reconstructions: Vec<Image>,
    /// Support of each photometric term: validity mask AND in-frame.
    pub supports: Vec<ValidityMask>,
    pub photometric_maps: Vec<Vec<f64>>,
    pub sparse_map: Vec<f64>,
}

fn masked_mean(values: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, v) in values.iter().enumerate() {
        if keep(i) {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn evaluate_loss(inputs: &LossInputs<'_>, cfg: &LossConfig) -> Result<LossEvaluation> {
    cfg.weights.validate()?;
    let dims = inputs.image.dims();
    for other in [inputs.sparse.dims(), inputs.depth.dims(), inputs.mask.dims()] {
        dims.expect(other)?;
    }
    for n in inputs.neighbours {
        dims.expect(n.dims())?;
    }
    if inputs.neighbours.len() != inputs.poses.len() {
        return Err(Error::PoseCountMismatch {
            images: inputs.neighbours.len(),
            poses: inputs.poses.len(),
        });
    }

    let mut photometric = 0.0;
    let mut reconstructions = Vec::with_capacity(inputs.neighbours.len());
    let mut supports = Vec::with_capacity(inputs.neighbours.len());
    let mut photometric_maps = Vec::with_capacity(inputs.neighbours.len());
    for (src, pose) in inputs.neighbours.iter().zip(inputs.poses) {
        let coords = reproject(inputs.depth, inputs.intrinsics, pose);
        let (rec, in_frame) = reconstruct(src, &coords)?;
        let support = inputs.mask.and(&in_frame)?;
        let rho = photometric_error_masked(&rec, inputs.image, cfg.weights.ssim_weight, Some(&support))?;
        photometric += masked_mean(&rho, |i| support.data()[i]);
        reconstructions.push(rec);
        supports.push(support);
        photometric_maps.push(rho);
    }

    let psi = sparse_depth_error(inputs.depth, inputs.sparse, cfg.sparse_norm)?;
    let sparse = masked_mean(&psi, |i| inputs.mask.data()[i] && inputs.sparse.data()[i] > 0.0);
    let smooth = if cfg.mask_smoothness {
        smoothness_masked(inputs.depth, inputs.image, inputs.mask)?
    } else {
        smoothness(inputs.depth, inputs.image)?
    };
    let w = cfg.weights;
    Ok(LossEvaluation {
        breakdown: LossBreakdown {
            photometric,
            sparse,
            smoothness: smooth,
            total: w.alpha * photometric + w.beta * sparse + w.lambda * smooth,
            valid_pixel_count: inputs.mask.valid_count(),
        },
        reconstructions,
        supports,
        photometric_maps,
        sparse_map: psi,
    })
}

/// Masked objective summed over the neighbouring frames.
pub fn total_loss(inputs: &LossInputs<'_>, cfg: &LossConfig) -> Result<LossBreakdown> {
    Ok(evaluate_loss(inputs, cfg)?.breakdown)
}
