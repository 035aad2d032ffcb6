use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DenseDepthMap, DepthRange, Dims, SparseDepthMap};

/// Depth error and accuracy metrics.
///
/// MAE and RMSE are in millimeters, iMAE and iRMSE in 1/m, AbsRel and SqRel
/// on depths in meters. The threshold accuracies are fractions in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub imae: f64,
    pub irmse: f64,
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// Number of evaluated pixels.
    pub count: usize,
}

/// Compares a prediction against dense ground truth; pixels whose ground
/// truth lies outside `range` are skipped.
pub fn evaluate_metrics(d: &DenseDepthMap, d_gt: &DenseDepthMap, range: DepthRange) -> Result<DepthMetrics> {
    d.dims().expect(d_gt.dims())?;
    evaluate_slices(d.data(), d_gt.data(), range)
}

/// As [`evaluate_metrics`] with ground truth that may have holes (0 = missing).
pub fn evaluate_metrics_sparse_gt(d: &DenseDepthMap, d_gt: &SparseDepthMap, range: DepthRange) -> Result<DepthMetrics> {
    d.dims().expect(d_gt.dims())?;
    evaluate_slices(d.data(), d_gt.data(), range)
}

fn evaluate_slices(pred: &[f64], gt: &[f64], range: DepthRange) -> Result<DepthMetrics> {
    let (mut abs, mut sq, mut iabs, mut isq, mut rel, mut sqrel) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut within = [0usize; 3];
    let mut n = 0usize;
    for (&p, &g) in pred.iter().zip(gt) {
        if !(g > 0.0 && range.contains(g)) {
            continue;
        }
        n += 1;
        let e = p - g;
        abs += e.abs();
        sq += e * e;
        let ie = 1.0 / p - 1.0 / g;
        iabs += ie.abs();
        isq += ie * ie;
        rel += e.abs() / g;
        sqrel += e * e / g;
        let delta = (p / g).max(g / p);
        for (k, t) in [1.25f64, 1.25 * 1.25, 1.25 * 1.25 * 1.25].into_iter().enumerate() {
            if delta < t {
                within[k] += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyEvalSet);
    }
    let m = n as f64;
    Ok(DepthMetrics {
        mae: 1000.0 * abs / m,
        rmse: 1000.0 * (sq / m).sqrt(),
        imae: iabs / m,
        irmse: (isq / m).sqrt(),
        abs_rel: rel / m,
        sq_rel: sqrel / m,
        delta1: within[0] as f64 / m,
        delta2: within[1] as f64 / m,
        delta3: within[2] as f64 / m,
        count: n,
    })
}

/// Per-pixel absolute error in meters, 0 where ground truth is missing or out of range.
pub fn abs_error_map(d: &DenseDepthMap, gt: &[f64], range: DepthRange) -> Result<Vec<f64>> {
    let dims: Dims = d.dims();
    if gt.len() != dims.area() {
        return Err(Error::BufferLength {
            expected: dims.area(),
            actual: gt.len(),
        });
    }
    Ok(d
        .data()
        .iter()
        .zip(gt)
        .map(|(&p, &g)| if g > 0.0 && range.contains(g) { (p - g).abs() } else { 0.0 })
        .collect())
}
