//! Intensity and occlusion augmentations.
//!
//! None of these are ever undone by resampling: the loss always consumes the
//! original image and sparse depth, so the "inverse" of every transform here
//! is simply the untouched input.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{FamilyConfig, InclusionMode, UniformRange};
use crate::types::{clamp_unit, luma, Image, SparseDepthMap};

/// One photometric or occlusion augmentation with its sampled parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhotometricTransform {
    Brightness { factor: f64 },
    Contrast { factor: f64 },
    Saturation { factor: f64 },
    Hue { delta: f64 },
    PatchOcclusion {
        pixel_fraction: f64,
        patch_size: usize,
        seed: u64,
    },
    SparsePointRemoval { rate: f64, seed: u64 },
}

impl PhotometricTransform {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Brightness { factor } | Self::Contrast { factor } | Self::Saturation { factor } => {
                check_factor(factor)
            }
            Self::Hue { delta } => check_delta(delta),
            Self::PatchOcclusion {
                pixel_fraction,
                patch_size,
                ..
            } => {
                check_fraction(pixel_fraction)?;
                check_patch(patch_size)
            }
            Self::SparsePointRemoval { rate, .. } => check_rate(rate),
        }
    }

    /// Whether this transform acts on the sparse depth rather than the image.
    pub fn acts_on_depth(&self) -> bool {
        matches!(self, Self::SparsePointRemoval { .. })
    }

    /// Applies the transform to an image; depth-only transforms return the input.
    pub fn apply_image(&self, img: &Image) -> Result<Image> {
        match *self {
            Self::Brightness { factor } => adjust_brightness(img, factor),
            Self::Contrast { factor } => adjust_contrast(img, factor),
            Self::Saturation { factor } => adjust_saturation(img, factor),
            Self::Hue { delta } => adjust_hue(img, delta),
            Self::PatchOcclusion {
                pixel_fraction,
                patch_size,
                seed,
            } => occlude_patches(
                img,
                pixel_fraction,
                patch_size,
                &mut ChaCha8Rng::seed_from_u64(seed),
            ),
            Self::SparsePointRemoval { .. } => Ok(img.clone()),
        }
    }

    /// Applies the transform to sparse depth; image-only transforms return the input.
    pub fn apply_sparse(&self, z: &SparseDepthMap) -> Result<SparseDepthMap> {
        match *self {
            Self::SparsePointRemoval { rate, seed } => {
                remove_sparse_points(z, rate, &mut ChaCha8Rng::seed_from_u64(seed))
            }
            _ => Ok(z.clone()),
        }
    }
}

/// Applies a chain of photometric transforms in order.
pub fn apply_all(
    transforms: &[PhotometricTransform],
    img: &Image,
    z: &SparseDepthMap,
) -> Result<(Image, SparseDepthMap)> {
    let mut img = img.clone();
    let mut z = z.clone();
    for t in transforms {
        t.validate()?;
        if t.acts_on_depth() {
            z = t.apply_sparse(&z)?;
        } else {
            img = t.apply_image(&img)?;
        }
    }
    Ok((img, z))
}

fn check_factor(factor: f64) -> Result<()> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::BadFactor(factor));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(-0.5..=0.5).contains(&delta) {
        return Err(Error::BadDelta(delta));
    }
    Ok(())
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::BadFraction(fraction));
    }
    Ok(())
}

fn check_patch(size: usize) -> Result<()> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::BadPatchSize(size));
    }
    Ok(())
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::BadRate(rate));
    }
    Ok(())
}

fn map_channels(img: &Image, f: impl Fn(&[f64], &mut [f64])) -> Image {
    let mut out = vec![0.0; img.data().len()];
    for (src, dst) in img.data().chunks_exact(3).zip(out.chunks_exact_mut(3)) {
        f(src, dst);
        for c in dst.iter_mut() {
            *c = clamp_unit(*c);
        }
    }
    Image::from_raw(img.dims(), out)
}

pub fn adjust_brightness(img: &Image, factor: f64) -> Result<Image> {
    check_factor(factor)?;
    Ok(map_channels(img, |src, dst| {
        for (d, s) in dst.iter_mut().zip(src) {
            *d = factor * s;
        }
    }))
}

/// Blends every channel toward the mean luma of the whole image.
pub fn adjust_contrast(img: &Image, factor: f64) -> Result<Image> {
    check_factor(factor)?;
    let lum = img.luma();
    let mean = lum.iter().sum::<f64>() / lum.len() as f64;
    Ok(map_channels(img, |src, dst| {
        for (d, s) in dst.iter_mut().zip(src) {
            *d = mean + factor * (s - mean);
        }
    }))
}

/// Blends every channel toward the pixel's own luma.
pub fn adjust_saturation(img: &Image, factor: f64) -> Result<Image> {
    check_factor(factor)?;
    Ok(map_channels(img, |src, dst| {
        let l = luma(src[0], src[1], src[2]);
        for (d, s) in dst.iter_mut().zip(src) {
            *d = l + factor * (s - l);
        }
    }))
}

/// Rotates hue by `delta` turns. Achromatic pixels are left unchanged.
pub fn adjust_hue(img: &Image, delta: f64) -> Result<Image> {
    check_delta(delta)?;
    if delta == 0.0 {
        return Ok(img.clone());
    }
    Ok(map_channels(img, |src, dst| {
        let (h, s, v) = rgb_to_hsv(src[0], src[1], src[2]);
        if s == 0.0 {
            dst.copy_from_slice(src);
            return;
        }
        let (r, g, b) = hsv_to_rgb((h + delta).rem_euclid(1.0), s, v);
        dst[0] = r;
        dst[1] = g;
        dst[2] = b;
    }))
}

/// Hue in turns `[0, 1)`, saturation and value in `[0, 1]`.
pub(crate) fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    if max == 0.0 || chroma == 0.0 {
        return (0.0, 0.0, max);
    }
    let sector = if max == r {
        ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        (b - r) / chroma + 2.0
    } else {
        (r - g) / chroma + 4.0
    };
    (sector / 6.0, chroma / max, max)
}

pub(crate) fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as i64 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

/// Zeroes `patch_size x patch_size` squares around `ceil(fraction * H * W)`
/// centres drawn uniformly with replacement. Patches are clipped at borders.
pub fn occlude_patches<R: Rng + ?Sized>(
    img: &Image,
    pixel_fraction: f64,
    patch_size: usize,
    rng: &mut R,
) -> Result<Image> {
    check_fraction(pixel_fraction)?;
    check_patch(patch_size)?;
    let dims = img.dims();
    let centers = (pixel_fraction * dims.area() as f64).ceil() as usize;
    let half = patch_size / 2;
    let mut data = img.data().to_vec();
    for _ in 0..centers {
        let row = rng.random_range(0..dims.height);
        let col = rng.random_range(0..dims.width);
        zero_patch(&mut data, dims, row, col, half);
    }
    Ok(Image::from_raw(dims, data))
}

fn zero_patch(data: &mut [f64], dims: crate::types::Dims, row: usize, col: usize, half: usize) {
    for r in row.saturating_sub(half)..(row + half + 1).min(dims.height) {
        for c in col.saturating_sub(half)..(col + half + 1).min(dims.width) {
            let i = dims.index(r, c) * 3;
            data[i..i + 3].fill(0.0);
        }
    }
}

/// Removes exactly `floor(rate * |support|)` measured points chosen without replacement.
pub fn remove_sparse_points<R: Rng + ?Sized>(
    z: &SparseDepthMap,
    rate: f64,
    rng: &mut R,
) -> Result<SparseDepthMap> {
    check_rate(rate)?;
    let support = z.support();
    let remove = (rate * support.len() as f64).floor() as usize;
    let mut data = z.data().to_vec();
    for k in index::sample(rng, support.len(), remove) {
        data[support[k]] = 0.0;
    }
    Ok(SparseDepthMap::from_raw(z.dims(), data))
}

/// Per-family photometric sampling settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotometricConfig {
    pub brightness: FamilyConfig<UniformRange>,
    pub contrast: FamilyConfig<UniformRange>,
    pub saturation: FamilyConfig<UniformRange>,
    pub hue: FamilyConfig<UniformRange>,
    /// Fraction of pixels used as patch centres.
    pub patch_occlusion: FamilyConfig<UniformRange>,
    pub patch_size: usize,
    pub point_removal: FamilyConfig<UniformRange>,
}

impl Default for PhotometricConfig {
    fn default() -> Self {
        Self::disabled()
    }
}

impl PhotometricConfig {
    pub fn disabled() -> Self {
        Self {
            brightness: FamilyConfig::off(UniformRange::new(0.5, 1.5)),
            contrast: FamilyConfig::off(UniformRange::new(0.5, 1.5)),
            saturation: FamilyConfig::off(UniformRange::new(0.5, 1.5)),
            hue: FamilyConfig::off(UniformRange::new(-0.1, 0.1)),
            patch_occlusion: FamilyConfig::off(UniformRange::new(0.001, 0.005)),
            patch_size: 5,
            point_removal: FamilyConfig::off(UniformRange::new(0.6, 0.7)),
        }
    }

    /// Depth-completion settings: jitter 0.5-1.5, hue +-0.1, 0.1%-0.5% of
    /// pixels occluded by 5x5 patches, 60%-70% point removal, each at p = 0.5.
    pub fn depth_completion() -> Self {
        Self {
            brightness: FamilyConfig::on(UniformRange::new(0.5, 1.5), 0.5),
            contrast: FamilyConfig::on(UniformRange::new(0.5, 1.5), 0.5),
            saturation: FamilyConfig::on(UniformRange::new(0.5, 1.5), 0.5),
            hue: FamilyConfig::on(UniformRange::new(-0.1, 0.1), 0.5),
            patch_occlusion: FamilyConfig::on(UniformRange::new(0.001, 0.005), 0.5),
            patch_size: 5,
            point_removal: FamilyConfig::on(UniformRange::new(0.6, 0.7), 0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.brightness.validate("brightness", |r| r.lo > 0.0)?;
        self.contrast.validate("contrast", |r| r.lo > 0.0)?;
        self.saturation.validate("saturation", |r| r.lo > 0.0)?;
        self.hue.validate("hue", |r| r.lo >= -0.5 && r.hi <= 0.5)?;
        self.patch_occlusion
            .validate("patch_occlusion", |r| r.lo > 0.0 && r.hi <= 1.0)?;
        if self.patch_occlusion.enabled {
            check_patch(self.patch_size)?;
        }
        self.point_removal
            .validate("point_removal", |r| r.lo >= 0.0 && r.hi < 1.0)?;
        Ok(())
    }
}

/// Draws the photometric chain: brightness, contrast, saturation, hue,
/// patch occlusion, point removal (in that order).
pub fn sample_photometric<R: Rng + ?Sized>(
    cfg: &PhotometricConfig,
    mode: InclusionMode,
    rng: &mut R,
) -> Result<Vec<PhotometricTransform>> {
    cfg.validate()?;
    let block = mode.block_coin(rng);
    let mut out = Vec::new();
    if cfg.brightness.include(block, rng) {
        out.push(PhotometricTransform::Brightness {
            factor: cfg.brightness.range.sample(rng),
        });
    }
    if cfg.contrast.include(block, rng) {
        out.push(PhotometricTransform::Contrast {
            factor: cfg.contrast.range.sample(rng),
        });
    }
    if cfg.saturation.include(block, rng) {
        out.push(PhotometricTransform::Saturation {
            factor: cfg.saturation.range.sample(rng),
        });
    }
    if cfg.hue.include(block, rng) {
        out.push(PhotometricTransform::Hue {
            delta: cfg.hue.range.sample(rng),
        });
    }
    if cfg.patch_occlusion.include(block, rng) {
        out.push(PhotometricTransform::PatchOcclusion {
            pixel_fraction: cfg.patch_occlusion.range.sample(rng),
            patch_size: cfg.patch_size,
            seed: rng.random(),
        });
    }
    if cfg.point_removal.include(block, rng) {
        out.push(PhotometricTransform::SparsePointRemoval {
            rate: cfg.point_removal.range.sample(rng),
            seed: rng.random(),
        });
    }
    Ok(out)
}
