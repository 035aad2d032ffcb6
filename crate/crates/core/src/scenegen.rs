//! Synthetic planar scenes with exactly known depth, for checking
//! reprojection, undo and the loss against ground truth.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{reproject, GRID_SNAP_EPS};
use crate::types::{CameraIntrinsics, DenseDepthMap, Dims, Image, RigidPose, SparseDepthMap};

/// Scene geometry in the reference camera frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneKind {
    /// Plane `Z = depth` facing the camera.
    FrontoPlane { depth: f64 },
    /// Near plane on columns `< split`, far plane elsewhere.
    TwoPlaneStep { near: f64, far: f64, split: usize },
}

impl SceneKind {
    fn validate(&self, dims: Dims) -> Result<()> {
        let positive = |d: f64| d.is_finite() && d > 0.0;
        match *self {
            SceneKind::FrontoPlane { depth } if !positive(depth) => {
                Err(Error::BadKind(format!("plane depth {depth} must be > 0")))
            }
            SceneKind::TwoPlaneStep { near, far, .. } if !(positive(near) && positive(far) && near < far) => {
                Err(Error::BadKind(format!("need 0 < near < far, got near={near} far={far}")))
            }
            SceneKind::TwoPlaneStep { split, .. } if split == 0 || split >= dims.width => Err(Error::BadKind(
                format!("split column {split} must lie in 1..{}", dims.width),
            )),
            _ => Ok(()),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[inline]
fn quintic(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Band-limited RGB value noise defined on the whole plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueNoiseTexture {
    pub seed: u64,
}

/// (cell size in px, weight, lattice phase)
const OCTAVES: [(f64, f64, f64); 2] = [(24.0, 0.65, 0.37), (12.0, 0.35, 0.71)];

impl ValueNoiseTexture {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn lattice(seed: u64, i: i64, j: i64) -> f64 {
        let h = splitmix64(
            seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F),
        );
        (h >> 11) as f64 / (1u64 << 53) as f64
    }

    fn octave(seed: u64, u: f64, v: f64, cell: f64, phase: f64) -> f64 {
        let (x, y) = (u / cell + phase, v / cell + phase);
        let (x0, y0) = (x.floor(), y.floor());
        let (i, j) = (x0 as i64, y0 as i64);
        let (sx, sy) = (quintic(x - x0), quintic(y - y0));
        let a = Self::lattice(seed, i, j);
        let b = Self::lattice(seed, i + 1, j);
        let c = Self::lattice(seed, i, j + 1);
        let d = Self::lattice(seed, i + 1, j + 1);
        let top = a + sx * (b - a);
        let bottom = c + sx * (d - c);
        top + sy * (bottom - top)
    }

    /// RGB value at continuous pixel coordinates, within [0.15, 0.85].
    pub fn sample(&self, u: f64, v: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (ch, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &(cell, w, phase)) in OCTAVES.iter().enumerate() {
                let s = splitmix64(self.seed.wrapping_add((ch * OCTAVES.len() + k) as u64));
                acc += w * Self::octave(s, u, v, cell, phase);
            }
            *slot = 0.15 + 0.7 * acc;
        }
        out
    }

    pub fn render(&self, dims: Dims) -> Result<Image> {
        Image::from_fn(dims, |row, col| self.sample(col as f64, row as f64))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub image: Image,
    pub depth: DenseDepthMap,
    pub intrinsics: CameraIntrinsics,
    pub kind: SceneKind,
    pub texture: ValueNoiseTexture,
}

pub fn make_scene(kind: SceneKind, dims: Dims, k: CameraIntrinsics, texture_seed: u64) -> Result<SyntheticScene> {
    if dims.height < 2 || dims.width < 2 {
        return Err(Error::DegenerateDims {
            height: dims.height,
            width: dims.width,
        });
    }
    kind.validate(dims)?;
    let texture = ValueNoiseTexture::new(texture_seed);
    let depth = match kind {
        SceneKind::FrontoPlane { depth } => DenseDepthMap::constant(dims, depth)?,
        SceneKind::TwoPlaneStep { near, far, split } => {
            DenseDepthMap::from_fn(dims, |_, col| if col < split { near } else { far })?
        }
    };
    Ok(SyntheticScene {
        image: texture.render(dims)?,
        depth,
        intrinsics: k,
        kind,
        texture,
    })
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= GRID_SNAP_EPS {
        r
    } else {
        x
    }
}

/// Minimum fraction of reference pixels that must stay in frame for [`render_view`].
pub const MIN_IN_FRAME_FRACTION: f64 = 0.5;

/// Image of the scene seen from a camera displaced by `pose`, which maps
/// reference-frame points into the new camera frame.
pub fn render_view(scene: &SyntheticScene, pose: &RigidPose) -> Result<Image> {
    let dims = scene.image.dims();
    let k = &scene.intrinsics;
    let rp = reproject(&scene.depth, k, pose);
    let kept = (0..dims.area())
        .filter(|&i| !rp.behind[i] && dims.contains_point(rp.u[i], rp.v[i]))
        .count();
    let fraction = kept as f64 / dims.area() as f64;
    if fraction < MIN_IN_FRAME_FRACTION {
        return Err(Error::ExcessiveMotion { fraction });
    }

    let rt = pose.rotation().transpose();
    let rt_t = rt * pose.translation();
    // Hit of the ray through (u, v) with the reference plane Z = d, as reference pixel coordinates.
    let hit = |u: f64, v: f64, d: f64| -> Option<(f64, f64)> {
        let dir = rt * nalgebra::Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        if dir.z <= 0.0 {
            return None;
        }
        let lambda = (d + rt_t.z) / dir.z;
        if lambda <= 0.0 {
            return None;
        }
        let p = dir * lambda - rt_t;
        let (pu, pv) = k.project(&p);
        Some((snap(pu), snap(pv)))
    };

    Image::from_fn(dims, |row, col| {
        let (u, v) = (col as f64, row as f64);
        let src = match scene.kind {
            SceneKind::FrontoPlane { depth } => hit(u, v, depth),
            SceneKind::TwoPlaneStep { near, far, split } => hit(u, v, near)
                .filter(|&(pu, _)| pu < split as f64 - 0.5)
                .or_else(|| hit(u, v, far).filter(|&(pu, _)| pu >= split as f64 - 0.5)),
        };
        src.map_or([0.0; 3], |(pu, pv)| scene.texture.sample(pu, pv))
    })
}

/// How sparse measurement locations are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparseSampling {
    #[default]
    Uniform,
    /// Highest corner responses of the image's structure tensor.
    Harris,
}

/// `n_points` distinct pixels chosen uniformly, carrying the dense depth.
pub fn sample_sparse<R: Rng + ?Sized>(depth: &DenseDepthMap, n_points: usize, rng: &mut R) -> Result<SparseDepthMap> {
    let dims = depth.dims();
    if n_points > dims.area() {
        return Err(Error::TooManyPoints {
            requested: n_points,
            available: dims.area(),
        });
    }
    let picked = index::sample(rng, dims.area(), n_points);
    Ok(sparse_from_indices(depth, picked.into_iter()))
}

/// Like [`sample_sparse`], optionally choosing corner pixels of `image` instead.
pub fn sample_sparse_with<R: Rng + ?Sized>(
    depth: &DenseDepthMap,
    image: &Image,
    n_points: usize,
    mode: SparseSampling,
    rng: &mut R,
) -> Result<SparseDepthMap> {
    depth.dims().expect(image.dims())?;
    match mode {
        SparseSampling::Uniform => sample_sparse(depth, n_points, rng),
        SparseSampling::Harris => {
            let dims = depth.dims();
            if n_points > dims.area() {
                return Err(Error::TooManyPoints {
                    requested: n_points,
                    available: dims.area(),
                });
            }
            let score = harris_response(image);
            let mut order: Vec<usize> = (0..dims.area()).collect();
            order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
            Ok(sparse_from_indices(depth, order.into_iter().take(n_points)))
        }
    }
}

fn sparse_from_indices(depth: &DenseDepthMap, idx: impl Iterator<Item = usize>) -> SparseDepthMap {
    let mut data = vec![0.0; depth.dims().area()];
    for i in idx {
        data[i] = depth.data()[i];
    }
    SparseDepthMap::from_raw(depth.dims(), data)
}

/// `det(M) - 0.04 trace(M)^2` of the 2x2 structure tensor summed over 3x3 windows.
pub fn harris_response(image: &Image) -> Vec<f64> {
    let dims = image.dims();
    let g = image.gray();
    let at = |r: usize, c: usize| g[dims.index(r, c)];
    let (h, w) = (dims.height, dims.width);
    let mut ix = vec![0.0; dims.area()];
    let mut iy = vec![0.0; dims.area()];
    for r in 0..h {
        for c in 0..w {
            let i = dims.index(r, c);
            ix[i] = (at(r, (c + 1).min(w - 1)) - at(r, c.saturating_sub(1))) / 2.0;
            iy[i] = (at((r + 1).min(h - 1), c) - at(r.saturating_sub(1), c)) / 2.0;
        }
    }
    let mut out = vec![0.0; dims.area()];
    for r in 0..h {
        for c in 0..w {
            let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
            for rr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
                for cc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                    let j = dims.index(rr, cc);
                    sxx += ix[j] * ix[j];
                    syy += iy[j] * iy[j];
                    sxy += ix[j] * iy[j];
                }
            }
            let trace = sxx + syy;
            out[dims.index(r, c)] = sxx * syy - sxy * sxy - 0.04 * trace * trace;
        }
    }
    out
}
