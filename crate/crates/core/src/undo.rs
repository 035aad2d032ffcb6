//! Warping predicted depth back to the original frame, and the validity mask.
//!
//! A pixel `x` of the original frame is undone by reading the augmented
//! prediction at the nearest pixel to `T x`. The mask is 1 exactly when that
//! read is genuine: `T x` stays inside every intermediate canvas, and the
//! augmented pixel it rounds to was itself produced from in-frame content
//! rather than by edge replication.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometric::{warp_depth_nearest, warp_depth_nearest_traced, TransformRecord};
use crate::types::{DenseDepthMap, Dims, Image, ValidityMask};

/// Depth in the original frame plus the mask of recoverable pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct UndoResult {
    pub depth: DenseDepthMap,
    pub mask: ValidityMask,
}

/// [`UndoResult`] with the sampler's bookkeeping, for auditing the mask.
#[derive(Clone, Debug)]
pub struct UndoTrace {
    pub result: UndoResult,
    /// Flat index into the augmented raster read by every original pixel.
    pub source_index: Vec<usize>,
    /// Whether the undo sampler had to clamp (edge-replicate) for that pixel.
    pub clamped: Vec<bool>,
}

pub fn undo_depth(d_aug: &DenseDepthMap, record: &TransformRecord) -> Result<UndoResult> {
    Ok(undo_depth_traced(d_aug, record)?.result)
}

pub fn undo_depth_traced(d_aug: &DenseDepthMap, record: &TransformRecord) -> Result<UndoTrace> {
    record.validate()?;
    record.final_dims().expect(d_aug.dims())?;
    let inverse = record.inverse_map()?;
    let traced = warp_depth_nearest_traced(d_aug.data(), d_aug.dims(), &inverse)?;
    let mask = build_validity_mask(record, record.original_dims)?;
    Ok(UndoTrace {
        result: UndoResult {
            depth: DenseDepthMap::from_raw(record.original_dims, traced.values),
            mask,
        },
        source_index: traced.source_index,
        clamped: traced.replicated,
    })
}

/// Mask of original pixels whose undone value comes from genuine augmented content.
pub fn build_validity_mask(record: &TransformRecord, original_dims: Dims) -> Result<ValidityMask> {
    record.validate()?;
    record.original_dims.expect(original_dims)?;
    let forward = record.forward_map();
    let back = forward.tracer()?;
    let aug = record.final_dims();
    let mut data = Vec::with_capacity(original_dims.area());
    for row in 0..original_dims.height {
        for col in 0..original_dims.width {
            let valid = forward
                .apply_in_frame(col as f64, row as f64)
                .is_some_and(|(u, v)| {
                    let c = (u.round() as usize).min(aug.width - 1);
                    let r = (v.round() as usize).min(aug.height - 1);
                    !back.trace(c as f64, r as f64).clamped
                });
            data.push(valid);
        }
    }
    ValidityMask::new(original_dims, data)
}

/// Nearest-neighbour forward warp of a dense depth map into the augmented frame.
pub fn forward_warp_depth(d: &DenseDepthMap, record: &TransformRecord) -> Result<DenseDepthMap> {
    record.validate()?;
    record.original_dims.expect(d.dims())?;
    let values = warp_depth_nearest(d.data(), d.dims(), &record.forward_map())?;
    Ok(DenseDepthMap::from_raw(record.final_dims(), values))
}

/// Per-side padding added to centre an item on a larger canvas.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PadRecord {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl PadRecord {
    /// Centres `item` on `target`; an odd remainder puts the extra pixel at the bottom/right.
    pub fn centered(item: Dims, target: Dims) -> Result<Self> {
        if target.height < item.height || target.width < item.width {
            return Err(Error::TargetTooSmall { target, item });
        }
        let dh = target.height - item.height;
        let dw = target.width - item.width;
        Ok(Self {
            top: dh / 2,
            bottom: dh - dh / 2,
            left: dw / 2,
            right: dw - dw / 2,
        })
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }

    fn padded(&self, d: Dims) -> Dims {
        Dims::new(d.height + self.top + self.bottom, d.width + self.left + self.right)
    }
}

/// Rasters that can be edge-padded and cropped.
pub trait Paddable: Sized {
    fn raster_dims(&self) -> Dims;
    fn pad_edge(&self, pad: PadRecord) -> Self;
    /// Removes a pad previously applied with [`Paddable::pad_edge`].
    fn remove_pad(&self, pad: PadRecord) -> Result<Self>;
}

fn pad_raster(src: &[f64], dims: Dims, channels: usize, pad: PadRecord) -> (Dims, Vec<f64>) {
    let out = pad.padded(dims);
    let mut data = Vec::with_capacity(out.area() * channels);
    for row in 0..out.height {
        let r = row.saturating_sub(pad.top).min(dims.height - 1);
        for col in 0..out.width {
            let c = col.saturating_sub(pad.left).min(dims.width - 1);
            let i = dims.index(r, c) * channels;
            data.extend_from_slice(&src[i..i + channels]);
        }
    }
    (out, data)
}

fn crop_raster(src: &[f64], dims: Dims, channels: usize, pad: PadRecord) -> Result<(Dims, Vec<f64>)> {
    let trim_h = pad.top + pad.bottom;
    let trim_w = pad.left + pad.right;
    if trim_h >= dims.height || trim_w >= dims.width {
        return Err(Error::TargetTooSmall {
            target: dims,
            item: Dims::new(trim_h, trim_w),
        });
    }
    let out = Dims::new(dims.height - trim_h, dims.width - trim_w);
    let mut data = Vec::with_capacity(out.area() * channels);
    for row in 0..out.height {
        let start = dims.index(row + pad.top, pad.left) * channels;
        data.extend_from_slice(&src[start..start + out.width * channels]);
    }
    Ok((out, data))
}

impl Paddable for Image {
    fn raster_dims(&self) -> Dims {
        self.dims()
    }

    fn pad_edge(&self, pad: PadRecord) -> Self {
        let (d, data) = pad_raster(self.data(), self.dims(), 3, pad);
        Image::from_raw(d, data)
    }

    fn remove_pad(&self, pad: PadRecord) -> Result<Self> {
        let (d, data) = crop_raster(self.data(), self.dims(), 3, pad)?;
        Image::new(d.height, d.width, data)
    }
}

impl Paddable for DenseDepthMap {
    fn raster_dims(&self) -> Dims {
        self.dims()
    }

    fn pad_edge(&self, pad: PadRecord) -> Self {
        let (d, data) = pad_raster(self.data(), self.dims(), 1, pad);
        DenseDepthMap::from_raw(d, data)
    }

    fn remove_pad(&self, pad: PadRecord) -> Result<Self> {
        let (d, data) = crop_raster(self.data(), self.dims(), 1, pad)?;
        DenseDepthMap::new(d.height, d.width, data)
    }
}

/// Largest height and width over a batch.
pub fn batch_max_dims<T: Paddable>(items: &[T]) -> Option<Dims> {
    items.iter().map(Paddable::raster_dims).reduce(|a, b| {
        Dims::new(a.height.max(b.height), a.width.max(b.width))
    })
}

/// Centre-pads every item to `target` with edge replication.
pub fn batch_center_pad<T: Paddable>(items: &[T], target: Dims) -> Result<Vec<(T, PadRecord)>> {
    items
        .iter()
        .map(|item| {
            let pad = PadRecord::centered(item.raster_dims(), target)?;
            Ok((item.pad_edge(pad), pad))
        })
        .collect()
}
