//! Resampling through a [`WarpMap`].
//!
//! Images use bilinear interpolation; depth uses nearest neighbour so metric
//! values are never blended. Out-of-frame sources are edge-replicated, stage
//! by stage, and the traced variants report which outputs were replicated.

use std::collections::HashMap;

use super::WarpMap;
use crate::error::Result;
use crate::types::{Dims, Image, SparseDepthMap};

/// Warped image plus a per-pixel flag marking edge-replicated outputs.
#[derive(Clone, Debug)]
pub struct TracedImageWarp {
    pub image: Image,
    pub replicated: Vec<bool>,
}

/// Nearest-neighbour depth warp with the source pixel read for every output.
#[derive(Clone, Debug)]
pub struct TracedDepthWarp {
    pub values: Vec<f64>,
    /// Flat index into the source raster that each output copied.
    pub source_index: Vec<usize>,
    pub replicated: Vec<bool>,
}

#[inline]
fn bilinear(img: &Image, u: f64, v: f64) -> [f64; 3] {
    let dims = img.dims();
    let u0 = u.floor();
    let v0 = v.floor();
    let fu = u - u0;
    let fv = v - v0;
    let (c0, r0) = (u0 as usize, v0 as usize);
    if fu == 0.0 && fv == 0.0 {
        return img.pixel(r0, c0);
    }
    let c1 = (c0 + 1).min(dims.width - 1);
    let r1 = (r0 + 1).min(dims.height - 1);
    let p00 = img.pixel(r0, c0);
    let p01 = img.pixel(r0, c1);
    let p10 = img.pixel(r1, c0);
    let p11 = img.pixel(r1, c1);
    let mut out = [0.0; 3];
    for k in 0..3 {
        let top = (1.0 - fu) * p00[k] + fu * p01[k];
        let bottom = (1.0 - fu) * p10[k] + fu * p11[k];
        out[k] = ((1.0 - fv) * top + fv * bottom).clamp(0.0, 1.0);
    }
    out
}

/// Bilinear sample of an image at a continuous coordinate, clamped to the frame.
pub(crate) fn sample_bilinear(img: &Image, u: f64, v: f64) -> [f64; 3] {
    let d = img.dims();
    bilinear(
        img,
        u.clamp(0.0, (d.width - 1) as f64),
        v.clamp(0.0, (d.height - 1) as f64),
    )
}

/// Inverse-warps `img` through `map` with bilinear interpolation.
pub fn warp_image(img: &Image, map: &WarpMap) -> Result<Image> {
    Ok(warp_image_traced(img, map)?.image)
}

pub fn warp_image_traced(img: &Image, map: &WarpMap) -> Result<TracedImageWarp> {
    map.in_dims().expect(img.dims())?;
    let out_dims = map.out_dims();
    let tracer = map.tracer()?;
    let mut data = Vec::with_capacity(out_dims.area() * 3);
    let mut replicated = Vec::with_capacity(out_dims.area());
    for row in 0..out_dims.height {
        for col in 0..out_dims.width {
            let s = tracer.trace(col as f64, row as f64);
            data.extend_from_slice(&bilinear(img, s.u, s.v));
            replicated.push(s.clamped);
        }
    }
    Ok(TracedImageWarp {
        image: Image::from_raw(out_dims, data),
        replicated,
    })
}

/// Inverse-warps a single-channel raster through `map` with nearest-neighbour lookup.
pub fn warp_depth_nearest(values: &[f64], dims: Dims, map: &WarpMap) -> Result<Vec<f64>> {
    Ok(warp_depth_nearest_traced(values, dims, map)?.values)
}

pub fn warp_depth_nearest_traced(values: &[f64], dims: Dims, map: &WarpMap) -> Result<TracedDepthWarp> {
    map.in_dims().expect(dims)?;
    assert_eq!(values.len(), dims.area(), "raster length does not match dims");
    let out_dims = map.out_dims();
    let tracer = map.tracer()?;
    let n = out_dims.area();
    let mut out = TracedDepthWarp {
        values: Vec::with_capacity(n),
        source_index: Vec::with_capacity(n),
        replicated: Vec::with_capacity(n),
    };
    for row in 0..out_dims.height {
        for col in 0..out_dims.width {
            let s = tracer.trace(col as f64, row as f64);
            let c = (s.u.round() as usize).min(dims.width - 1);
            let r = (s.v.round() as usize).min(dims.height - 1);
            let idx = dims.index(r, c);
            out.values.push(values[idx]);
            out.source_index.push(idx);
            out.replicated.push(s.clamped);
        }
    }
    Ok(out)
}

/// Forward-splats every measured point to the rounded destination. Points
/// leaving any intermediate canvas are dropped; collisions keep the nearest
/// (smallest) depth.
pub fn warp_sparse_depth(z: &SparseDepthMap, map: &WarpMap) -> Result<SparseDepthMap> {
    map.in_dims().expect(z.dims())?;
    let out_dims = map.out_dims();
    let mut out = vec![0.0; out_dims.area()];
    let mut hits: HashMap<usize, f64> = HashMap::new();
    let src = z.dims();
    for idx in z.support() {
        let (row, col) = (idx / src.width, idx % src.width);
        let mut p = (col as f64, row as f64);
        let mut alive = true;
        for t in map.stages() {
            p = t.apply(p.0, p.1);
            let d = t.out_dims;
            if p.0 < -0.5 || p.1 < -0.5 || p.0 >= d.width as f64 - 0.5 || p.1 >= d.height as f64 - 0.5 {
                alive = false;
                break;
            }
        }
        if !alive {
            continue;
        }
        let c = (p.0.round() as usize).min(out_dims.width - 1);
        let r = (p.1.round() as usize).min(out_dims.height - 1);
        let depth = z.data()[idx];
        hits.entry(out_dims.index(r, c))
            .and_modify(|d| *d = d.min(depth))
            .or_insert(depth);
    }
    for (i, d) in hits {
        out[i] = d;
    }
    Ok(SparseDepthMap::from_raw(out_dims, out))
}
