use crate::error::{Error, Result};
use crate::geometric::TransformRecord;
use crate::types::{DenseDepthMap, DepthRange, Dims, Image, SparseDepthMap};
use crate::undo::forward_warp_depth;

/// Side information available to a predictor for one augmented input.
#[derive(Clone, Copy, Debug)]
pub struct PredictionContext<'a> {
    /// Geometric transforms that produced the input.
    pub record: &'a TransformRecord,
}

/// Depth completion model: augmented image and sparse depth in, dense depth out.
///
/// Implementations must return a map with the input's dimensions and every
/// value inside [`DepthPredictor::range`].
pub trait DepthPredictor: Send + Sync {
    fn predict(&self, image: &Image, sparse: &SparseDepthMap, ctx: &PredictionContext<'_>) -> Result<DenseDepthMap>;

    fn range(&self) -> DepthRange {
        DepthRange::default()
    }
}

fn clamp_to(d: DenseDepthMap, range: DepthRange) -> Result<DenseDepthMap> {
    if d.within(range) {
        return Ok(d);
    }
    let dims = d.dims();
    DenseDepthMap::clamped(dims.height, dims.width, d.into_data(), range)
}

/// Returns the known ground truth, warped into the augmented frame.
#[derive(Clone, Debug)]
pub struct OraclePredictor {
    pub ground_truth: DenseDepthMap,
    pub range: DepthRange,
}

impl OraclePredictor {
    pub fn new(ground_truth: DenseDepthMap) -> Self {
        Self {
            ground_truth,
            range: DepthRange::default(),
        }
    }
}

impl DepthPredictor for OraclePredictor {
    fn predict(&self, image: &Image, _sparse: &SparseDepthMap, ctx: &PredictionContext<'_>) -> Result<DenseDepthMap> {
        let d = forward_warp_depth(&self.ground_truth, ctx.record)?;
        d.dims().expect(image.dims())?;
        clamp_to(d, self.range)
    }

    fn range(&self) -> DepthRange {
        self.range
    }
}

/// Every pixel takes the depth of the closest sparse point (Euclidean
/// distance, ties to the lowest flat index).
#[derive(Clone, Copy, Debug, Default)]
pub struct NearestFillPredictor {
    pub range: DepthRange,
}

impl DepthPredictor for NearestFillPredictor {
    fn predict(&self, image: &Image, sparse: &SparseDepthMap, _ctx: &PredictionContext<'_>) -> Result<DenseDepthMap> {
        image.dims().expect(sparse.dims())?;
        let values = nearest_fill(sparse)?;
        let dims = sparse.dims();
        DenseDepthMap::clamped(dims.height, dims.width, values, self.range)
    }

    fn range(&self) -> DepthRange {
        self.range
    }
}

/// Nearest-point fill of a sparse map.
pub fn nearest_fill(sparse: &SparseDepthMap) -> Result<Vec<f64>> {
    let dims = sparse.dims();
    let support = sparse.support();
    if support.is_empty() {
        return Err(Error::NoSparsePoints);
    }
    let grid = BucketGrid::new(dims, &support);
    let mut out = Vec::with_capacity(dims.area());
    for row in 0..dims.height {
        for col in 0..dims.width {
            out.push(sparse.data()[grid.nearest(row, col)]);
        }
    }
    Ok(out)
}

struct BucketGrid {
    dims: Dims,
    cell: usize,
    rows: usize,
    cols: usize,
    buckets: Vec<Vec<usize>>,
}

impl BucketGrid {
    fn new(dims: Dims, support: &[usize]) -> Self {
        let cell = ((dims.area() as f64 / support.len() as f64).sqrt().ceil() as usize).max(1);
        let rows = dims.height.div_ceil(cell);
        let cols = dims.width.div_ceil(cell);
        let mut buckets = vec![Vec::new(); rows * cols];
        for &i in support {
            let (r, c) = (i / dims.width, i % dims.width);
            buckets[(r / cell) * cols + c / cell].push(i);
        }
        Self {
            dims,
            cell,
            rows,
            cols,
            buckets,
        }
    }

    fn nearest(&self, row: usize, col: usize) -> usize {
        let (cr, cc) = ((row / self.cell) as isize, (col / self.cell) as isize);
        let mut best: Option<(usize, usize)> = None;
        let max_ring = self.rows.max(self.cols) as isize;
        for ring in 0..=max_ring {
            for r in cr - ring..=cr + ring {
                if r < 0 || r >= self.rows as isize {
                    continue;
                }
                for c in cc - ring..=cc + ring {
                    if c < 0 || c >= self.cols as isize {
                        continue;
                    }
                    if (r - cr).abs() != ring && (c - cc).abs() != ring {
                        continue;
                    }
                    for &i in &self.buckets[r as usize * self.cols + c as usize] {
                        let (pr, pc) = (i / self.dims.width, i % self.dims.width);
                        let d2 = pr.abs_diff(row).pow(2) + pc.abs_diff(col).pow(2);
                        if best.is_none_or(|(bd, bi)| d2 < bd || (d2 == bd && i < bi)) {
                            best = Some((d2, i));
                        }
                    }
                }
            }
            // Points in later rings are at least `ring * cell` away.
            if let Some((bd, _)) = best {
                let reach = ring as usize * self.cell;
                if bd < reach * reach {
                    break;
                }
            }
        }
        best.expect("support is non-empty").1
    }
}
