//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Reference values come from oracles
//! written here, independent of the library's own code paths.

use std::collections::{HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use augundo::geometric::{
    sample_geometric, warp_depth_nearest_traced, warp_sparse_depth, GeometricConfig, GeometricTransform,
    TransformKind, TransformRecord,
};
use augundo::loss::{reproject, total_loss, LossConfig, LossInputs};
use augundo::pipeline::{
    evaluate_metrics, replay_augundo_step, run_augundo_step, save_artifacts, AugmentationConfig, AugmentationPlan,
    DepthMetrics, FrameTriplet, NearestFillPredictor, OraclePredictor,
};
use augundo::photometric::{sample_photometric, PhotometricTransform};
use augundo::sampling::{FamilyConfig, InclusionMode, UniformRange};
use augundo::scenegen::{make_scene, render_view, sample_sparse, SceneKind};
use augundo::undo::{build_validity_mask, forward_warp_depth, undo_depth, undo_depth_traced};
use augundo::{CameraIntrinsics, DenseDepthMap, DepthRange, Dims, RigidPose, SparseDepthMap, ValidityMask};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Oracles

/// Forward coordinate map of one stage, from the definitions: flips mirror
/// about the last index, resize scales about the canvas centre, rotation
/// turns about the input centre and re-centres on the output canvas,
/// translation adds the shift.
fn oracle_forward(t: &GeometricTransform, u: f64, v: f64) -> (f64, f64) {
    let (iw, ih) = (t.in_dims.width as f64, t.in_dims.height as f64);
    let (icu, icv) = ((iw - 1.0) / 2.0, (ih - 1.0) / 2.0);
    match t.kind {
        TransformKind::FlipH => (iw - 1.0 - u, v),
        TransformKind::FlipV => (u, ih - 1.0 - v),
        TransformKind::Resize { scale_h, scale_w } => (icu + scale_w * (u - icu), icv + scale_h * (v - icv)),
        TransformKind::Rotate { degrees } => {
            let (s, c) = degrees.to_radians().sin_cos();
            let ocu = (t.out_dims.width as f64 - 1.0) / 2.0;
            let ocv = (t.out_dims.height as f64 - 1.0) / 2.0;
            let (du, dv) = (u - icu, v - icv);
            (ocu + c * du - s * dv, ocv + s * du + c * dv)
        }
        TransformKind::Translate { du, dv } => (u + du as f64, v + dv as f64),
    }
}

/// Algebraic inverse of [`oracle_forward`].
fn oracle_backward(t: &GeometricTransform, u: f64, v: f64) -> (f64, f64) {
    let (iw, ih) = (t.in_dims.width as f64, t.in_dims.height as f64);
    let (icu, icv) = ((iw - 1.0) / 2.0, (ih - 1.0) / 2.0);
    match t.kind {
        TransformKind::FlipH | TransformKind::FlipV => oracle_forward(t, u, v),
        TransformKind::Resize { scale_h, scale_w } => (icu + (u - icu) / scale_w, icv + (v - icv) / scale_h),
        TransformKind::Rotate { degrees } => {
            let (s, c) = degrees.to_radians().sin_cos();
            let ocu = (t.out_dims.width as f64 - 1.0) / 2.0;
            let ocv = (t.out_dims.height as f64 - 1.0) / 2.0;
            let (du, dv) = (u - ocu, v - ocv);
            (icu + c * du + s * dv, icv - s * du + c * dv)
        }
        TransformKind::Translate { du, dv } => (u - du as f64, v - dv as f64),
    }
}

/// Back-traces an augmented pixel with per-stage clamping. Returns whether a
/// clamp happened and the smallest distance of any pre-clamp coordinate to
/// its frame edge (negative when outside).
fn oracle_trace(record: &TransformRecord, u: f64, v: f64) -> (bool, f64) {
    let mut p = (u, v);
    let mut clamped = false;
    let mut margin = f64::INFINITY;
    for t in record.transforms.iter().rev() {
        p = oracle_backward(t, p.0, p.1);
        let (w, h) = ((t.in_dims.width - 1) as f64, (t.in_dims.height - 1) as f64);
        margin = margin.min(p.0).min(w - p.0).min(p.1).min(h - p.1);
        let c = (p.0.clamp(0.0, w), p.1.clamp(0.0, h));
        clamped |= c != p;
        p = c;
    }
    (clamped, margin)
}

/// Brute-force forward splat: points leaving any canvas are dropped, the rest
/// land on the rounded destination and collisions keep the smallest depth.
/// Also returns the number of points that lost a collision.
fn oracle_splat(z: &SparseDepthMap, record: &TransformRecord) -> (Vec<f64>, usize) {
    let src = z.dims();
    let dst = record.final_dims();
    let mut cells: HashMap<(i64, i64), Vec<f64>> = HashMap::new();
    for row in 0..src.height {
        for col in 0..src.width {
            let depth = z.get(row, col);
            if depth <= 0.0 {
                continue;
            }
            let mut p = (col as f64, row as f64);
            let mut inside = true;
            for t in &record.transforms {
                p = oracle_forward(t, p.0, p.1);
                let (w, h) = (t.out_dims.width as f64, t.out_dims.height as f64);
                if !(p.0 >= -0.5 && p.0 < w - 0.5 && p.1 >= -0.5 && p.1 < h - 0.5) {
                    inside = false;
                    break;
                }
            }
            if inside {
                cells.entry((p.1.round() as i64, p.0.round() as i64)).or_default().push(depth);
            }
        }
    }
    let mut out = vec![0.0; dst.area()];
    let mut collisions = 0;
    for ((r, c), depths) in cells {
        collisions += depths.len() - 1;
        out[r as usize * dst.width + c as usize] = depths.into_iter().fold(f64::INFINITY, f64::min);
    }
    (out, collisions)
}

/// Dense map with all-distinct values so every read can be attributed.
fn distinct_depth(dims: Dims, rng: &mut ChaCha8Rng) -> DenseDepthMap {
    let mut vals: Vec<f64> = (0..dims.area()).map(|i| 0.5 + i as f64 * 1e-3).collect();
    for i in (1..vals.len()).rev() {
        vals.swap(i, rng.random_range(0..=i));
    }
    DenseDepthMap::new(dims.height, dims.width, vals).unwrap()
}

fn random_integer_record(dims: Dims, rng: &mut ChaCha8Rng) -> TransformRecord {
    let n = rng.random_range(1..=4);
    let kinds: Vec<TransformKind> = (0..n)
        .map(|_| match rng.random_range(0..3) {
            0 => TransformKind::FlipH,
            1 => TransformKind::FlipV,
            _ => TransformKind::Translate {
                du: rng.random_range(-6..=6),
                dv: rng.random_range(-6..=6),
            },
        })
        .collect();
    TransformRecord::from_kinds(dims, &kinds).unwrap()
}

/// Rotation and resize always on, flips and translation at one half.
fn rotate_resize_config() -> GeometricConfig {
    let mut g = GeometricConfig::indoor();
    g.rotate = FamilyConfig::on(UniformRange::new(-25.0, 25.0), 1.0);
    g.resize = FamilyConfig::on(UniformRange::new(0.6, 1.0), 1.0);
    g
}

fn intrinsics(dims: Dims) -> CameraIntrinsics {
    CameraIntrinsics::new(500.0, 500.0, (dims.width as f64 - 1.0) / 2.0, (dims.height as f64 - 1.0) / 2.0).unwrap()
}

fn triplet_for(seed: u64, dims: Dims) -> (FrameTriplet, DenseDepthMap) {
    let kind = if seed.is_multiple_of(2) {
        SceneKind::FrontoPlane { depth: 2.0 }
    } else {
        SceneKind::TwoPlaneStep {
            near: 1.5,
            far: 3.0,
            split: dims.width / 2,
        }
    };
    let k = intrinsics(dims);
    let scene = make_scene(kind, dims, k, seed).unwrap();
    let prev = RigidPose::from_translation([0.02, 0.0, 0.0]);
    let next = RigidPose::from_translation([-0.02, 0.0, 0.0]);
    let z = sample_sparse(&scene.depth, dims.area() / 20, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let t = FrameTriplet::new(
        render_view(&scene, &prev).unwrap(),
        scene.image.clone(),
        render_view(&scene, &next).unwrap(),
        z,
        k,
        prev,
        next,
    )
    .unwrap();
    (t, scene.depth)
}

// ---------------------------------------------------------------------------
// Criteria

fn round_trip_exact() -> Outcome {
    let dims = Dims::new(64, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let mut masked = 0;
    for i in 0..200 {
        let d = distinct_depth(dims, &mut rng);
        let record = random_integer_record(dims, &mut rng);
        let r = undo_depth(&forward_warp_depth(&d, &record).unwrap(), &record).unwrap();
        for row in 0..dims.height {
            for col in 0..dims.width {
                let mut p = (col as f64, row as f64);
                let mut inside = true;
                for t in &record.transforms {
                    p = oracle_forward(t, p.0, p.1);
                    inside &= t.out_dims.contains_point(p.0, p.1);
                }
                ensure(r.mask.get(row, col) == inside, || {
                    format!("record {i}: mask at ({row},{col}) is {} but oracle says {inside}", r.mask.get(row, col))
                })?;
                if inside {
                    ensure(r.depth.get(row, col).to_bits() == d.get(row, col).to_bits(), || {
                        format!("record {i}: value at ({row},{col}) differs")
                    })?;
                } else {
                    masked += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!("records=200 mismatches=0 masked_pixels={masked} runtime={secs:.3}s"))
}

fn round_trip_tolerance() -> Outcome {
    let dims = Dims::new(64, 64);
    let cfg = rotate_resize_config();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut checked, mut exact) = (0usize, 0usize);
    for i in 0..200 {
        let d = distinct_depth(dims, &mut rng);
        let values: HashSet<u64> = d.data().iter().map(|v| v.to_bits()).collect();
        let record = sample_geometric(&cfg, dims, InclusionMode::PerFamily, &mut rng).unwrap();
        let kinds: Vec<_> = record.transforms.iter().map(|t| t.kind).collect();
        ensure(
            kinds.iter().any(|k| matches!(k, TransformKind::Rotate { .. }))
                && kinds.iter().any(|k| matches!(k, TransformKind::Resize { .. })),
            || format!("record {i} lacks rotation or resize"),
        )?;
        let r = undo_depth(&forward_warp_depth(&d, &record).unwrap(), &record).unwrap();
        for row in 0..dims.height {
            for col in 0..dims.width {
                if !r.mask.get(row, col) {
                    continue;
                }
                checked += 1;
                let got = r.depth.get(row, col);
                ensure(values.contains(&got.to_bits()), || {
                    format!("record {i}: invented value {got} at ({row},{col})")
                })?;
                let mut found = false;
                for rr in row.saturating_sub(1)..=(row + 1).min(dims.height - 1) {
                    for cc in col.saturating_sub(1)..=(col + 1).min(dims.width - 1) {
                        found |= d.get(rr, cc).to_bits() == got.to_bits();
                    }
                }
                ensure(found, || format!("record {i}: ({row},{col}) reads beyond 1 px"))?;
                exact += (got.to_bits() == d.get(row, col).to_bits()) as usize;
            }
        }
    }
    Ok(format!(
        "records=200 mask1_pixels={checked} exact_pixel={exact} displaced_beyond_1px=0 invented=0"
    ))
}

fn mask_soundness() -> Outcome {
    let dims = Dims::new(64, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut reads, mut compared, mut ambiguous) = (0usize, 0usize, 0usize);
    for i in 0..100 {
        let cfg = if i % 2 == 0 {
            rotate_resize_config()
        } else {
            GeometricConfig::indoor()
        };
        let record = sample_geometric(&cfg, dims, InclusionMode::PerFamily, &mut rng).unwrap();
        let d = distinct_depth(dims, &mut rng);
        let fwd = warp_depth_nearest_traced(d.data(), dims, &record.forward_map()).unwrap();
        let aug_dims = record.final_dims();
        // The forward sampler's replication flags agree with an independent back-trace.
        for row in 0..aug_dims.height {
            for col in 0..aug_dims.width {
                let (clamped, margin) = oracle_trace(&record, col as f64, row as f64);
                if margin.abs() < 1e-9 {
                    ambiguous += 1;
                    continue;
                }
                compared += 1;
                ensure(fwd.replicated[aug_dims.index(row, col)] == clamped, || {
                    format!("record {i}: replication flag at ({row},{col}) disagrees with oracle")
                })?;
            }
        }
        let aug = DenseDepthMap::new(aug_dims.height, aug_dims.width, fwd.values).unwrap();
        let trace = undo_depth_traced(&aug, &record).unwrap();
        for (p, &valid) in trace.result.mask.data().iter().enumerate() {
            if valid {
                reads += 1;
                ensure(!trace.clamped[p], || format!("record {i}: pixel {p} undone through a clamp"))?;
                ensure(!fwd.replicated[trace.source_index[p]], || {
                    format!("record {i}: pixel {p} reads an edge-replicated augmented pixel")
                })?;
            }
        }
    }
    Ok(format!(
        "records=100 mask1_reads={reads} replicated_reads=0 oracle_flags_compared={compared} boundary_skipped={ambiguous}"
    ))
}

fn reprojection_oracle() -> Outcome {
    let start = Instant::now();
    let dims = Dims::new(64, 64);
    let k = intrinsics(dims);
    let scene = make_scene(SceneKind::FrontoPlane { depth: 2.0 }, dims, k, 404).map_err(|e| e.to_string())?;
    let pose = RigidPose::from_translation([0.1, 0.0, 0.0]);
    let rep = reproject(&scene.depth, &k, &pose);
    let mut worst = 0.0f64;
    for row in 0..dims.height {
        for col in 0..dims.width {
            // Pinhole back-projection at Z = 2, shift by t, project.
            let z = 2.0;
            let x = (col as f64 - k.cx) * z / k.fx + 0.1;
            let y = (row as f64 - k.cy) * z / k.fy;
            let (eu, ev) = (k.fx * x / z + k.cx, k.fy * y / z + k.cy);
            let i = dims.index(row, col);
            worst = worst
                .max((rep.u[i] - (col as f64 + 25.0)).abs())
                .max((rep.v[i] - row as f64).abs())
                .max((rep.u[i] - eu).abs())
                .max((rep.v[i] - ev).abs());
        }
    }
    ensure(worst < 1e-9, || format!("max coordinate error {worst:e} px"))?;
    let neighbour = render_view(&scene, &pose).map_err(|e| e.to_string())?;
    let z = sample_sparse(&scene.depth, 150, &mut ChaCha8Rng::seed_from_u64(404)).unwrap();
    let mask = ValidityMask::ones(dims);
    let b = total_loss(
        &LossInputs {
            image: &scene.image,
            neighbours: std::slice::from_ref(&neighbour),
            sparse: &z,
            depth: &scene.depth,
            mask: &mask,
            intrinsics: &k,
            poses: &[pose],
        },
        &LossConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(b.photometric <= 1e-3, || format!("photometric {:e}", b.photometric))?;
    ensure(b.sparse == 0.0, || format!("sparse {:e}", b.sparse))?;
    ensure(secs < 1.0, || format!("took {secs:.3}s"))?;
    Ok(format!(
        "max_error_px={worst:e} photometric={:.3e} sparse={} runtime={secs:.3}s",
        b.photometric, b.sparse
    ))
}

fn flip_loss_equivalence() -> Outcome {
    let dims = Dims::new(48, 64);
    let predictor_for = |gt: &DenseDepthMap| OraclePredictor::new(gt.clone());
    let flips = AugmentationConfig::flips_only(1.0);
    let none = AugmentationConfig::disabled();
    let loss = LossConfig::default();
    let mut kinds = HashSet::new();
    for seed in 0..50u64 {
        let (t, gt) = triplet_for(seed, dims);
        let p = predictor_for(&gt);
        let base = run_augundo_step(&t, &none, &p, &loss, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let aug = run_augundo_step(&t, &flips, &p, &loss, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let rec = &aug.artifacts.plan.record;
        ensure(rec.transforms.len() == 1, || format!("seed {seed}: expected one flip"))?;
        kinds.insert(format!("{:?}", rec.transforms[0].kind));
        ensure(aug.loss.photometric.to_bits() == base.loss.photometric.to_bits(), || {
            format!("seed {seed}: photometric {} vs {}", aug.loss.photometric, base.loss.photometric)
        })?;
        ensure(aug.loss.sparse.to_bits() == base.loss.sparse.to_bits(), || {
            format!("seed {seed}: sparse {} vs {}", aug.loss.sparse, base.loss.sparse)
        })?;
    }
    ensure(kinds.len() == 2, || "both flip directions should occur".into())?;
    Ok("seeds=50 differing=0 flip_kinds=FlipH,FlipV".into())
}

fn mask_exclusion() -> Outcome {
    let dims = Dims::new(48, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut perturbed_total = 0;
    for case in 0..20u64 {
        let (t, _) = triplet_for(case, dims);
        let record = sample_geometric(&rotate_resize_config(), dims, InclusionMode::PerFamily, &mut rng).unwrap();
        let mask = build_validity_mask(&record, dims).unwrap();
        let zeros: Vec<usize> = (0..dims.area()).filter(|&i| !mask.data()[i]).collect();
        ensure(!zeros.is_empty(), || format!("case {case}: mask has no zeros"))?;
        let d: Vec<f64> = (0..dims.area()).map(|_| rng.random_range(0.5..4.0)).collect();
        let mut e = d.clone();
        for &i in &zeros {
            e[i] = rng.random_range(0.3..8.0);
        }
        let eval = |vals: Vec<f64>| {
            let depth = DenseDepthMap::new(dims.height, dims.width, vals).unwrap();
            total_loss(
                &LossInputs {
                    image: &t.image,
                    neighbours: &[t.prev.clone(), t.next.clone()],
                    sparse: &t.sparse,
                    depth: &depth,
                    mask: &mask,
                    intrinsics: &t.intrinsics,
                    poses: &[t.pose_prev, t.pose_next],
                },
                &LossConfig::default(),
            )
            .unwrap()
        };
        let (a, b) = (eval(d), eval(e));
        ensure(a.photometric.to_bits() == b.photometric.to_bits(), || {
            format!("case {case}: photometric {} vs {}", a.photometric, b.photometric)
        })?;
        ensure(a.sparse.to_bits() == b.sparse.to_bits(), || {
            format!("case {case}: sparse {} vs {}", a.sparse, b.sparse)
        })?;
        perturbed_total += zeros.len();
    }
    Ok(format!("cases=20 perturbed_pixels={perturbed_total} changed=0"))
}

fn sparse_conservation() -> Outcome {
    let dims = Dims::new(480, 640);
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let (mut min_margin, mut total_collisions) = (f64::INFINITY, 0usize);
    for i in 0..20 {
        let d = DenseDepthMap::from_fn(dims, |_, _| rng.random_range(0.2..5.0)).unwrap();
        let z = sample_sparse(&d, 1500, &mut rng).unwrap();
        let n = z.point_count();
        ensure(n == 1500, || format!("map {i}: {n} points"))?;

        let flips: Vec<TransformKind> = (0..rng.random_range(1..=3))
            .map(|_| if rng.random_bool(0.5) { TransformKind::FlipH } else { TransformKind::FlipV })
            .collect();
        let flip_rec = TransformRecord::from_kinds(dims, &flips).unwrap();
        let flipped = warp_sparse_depth(&z, &flip_rec.forward_map()).unwrap();
        ensure(flipped.point_count() == n, || format!("map {i}: flips changed the count"))?;
        ensure(flipped.data() == oracle_splat(&z, &flip_rec).0.as_slice(), || {
            format!("map {i}: flip splat differs from oracle")
        })?;

        let (sh, sw) = (rng.random_range(0.6..1.0), rng.random_range(0.6..1.0));
        let rec = TransformRecord::from_kinds(dims, &[TransformKind::Resize { scale_h: sh, scale_w: sw }]).unwrap();
        let out = warp_sparse_depth(&z, &rec.forward_map()).unwrap();
        let (expect, collisions) = oracle_splat(&z, &rec);
        ensure(out.data() == expect.as_slice(), || format!("map {i}: resize splat differs from oracle"))?;
        let surviving = out.point_count();
        let bound = sh * sw * n as f64 - collisions as f64;
        ensure(surviving as f64 >= bound, || {
            format!("map {i}: {surviving} survivors below bound {bound:.1}")
        })?;
        let input: HashSet<u64> = z.data().iter().map(|v| v.to_bits()).collect();
        ensure(out.data().iter().filter(|&&v| v > 0.0).all(|v| input.contains(&v.to_bits())), || {
            format!("map {i}: splat produced a value absent from the input")
        })?;
        min_margin = min_margin.min(surviving as f64 - bound);
        total_collisions += collisions;
    }
    Ok(format!(
        "maps=20 points=1500 flip_count_changes=0 oracle_mismatches=0 collisions={total_collisions} min_margin_over_bound={min_margin:.1}"
    ))
}

fn brute_metrics(pred: &[f64], gt: &[f64], range: DepthRange) -> DepthMetrics {
    let pairs: Vec<(f64, f64)> = pred
        .iter()
        .zip(gt)
        .filter(|(_, &g)| g > 0.0 && g >= range.min && g <= range.max)
        .map(|(&p, &g)| (p, g))
        .collect();
    let n = pairs.len() as f64;
    let mean = |f: &dyn Fn(f64, f64) -> f64| pairs.iter().map(|&(p, g)| f(p, g)).sum::<f64>() / n;
    let frac = |t: f64| pairs.iter().filter(|&&(p, g)| f64::max(p / g, g / p) < t).count() as f64 / n;
    DepthMetrics {
        mae: mean(&|p, g| (p - g).abs() * 1000.0),
        rmse: mean(&|p, g| ((p - g) * 1000.0).powi(2)).sqrt(),
        imae: mean(&|p, g| (1.0 / p - 1.0 / g).abs()),
        irmse: mean(&|p, g| (1.0 / p - 1.0 / g).powi(2)).sqrt(),
        abs_rel: mean(&|p, g| (p - g).abs() / g),
        sq_rel: mean(&|p, g| (p - g).powi(2) / g),
        delta1: frac(1.25),
        delta2: frac(1.25f64.powi(2)),
        delta3: frac(1.25f64.powi(3)),
        count: pairs.len(),
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn metrics_close(name: &str, got: &DepthMetrics, want: &DepthMetrics, tol: f64) -> Result<(), String> {
    let fields = [
        ("mae", got.mae, want.mae),
        ("rmse", got.rmse, want.rmse),
        ("imae", got.imae, want.imae),
        ("irmse", got.irmse, want.irmse),
        ("abs_rel", got.abs_rel, want.abs_rel),
        ("sq_rel", got.sq_rel, want.sq_rel),
        ("delta1", got.delta1, want.delta1),
        ("delta2", got.delta2, want.delta2),
        ("delta3", got.delta3, want.delta3),
    ];
    for (f, a, b) in fields {
        ensure(rel_close(a, b, tol), || format!("{name}: {f} = {a} expected {b}"))?;
    }
    ensure(got.count == want.count, || format!("{name}: count {} expected {}", got.count, want.count))
}

fn metric_formulas() -> Outcome {
    let dims = Dims::new(8, 8);
    let range = DepthRange::new(0.2, 5.0).unwrap();
    let gt = DenseDepthMap::constant(dims, 2.0).unwrap();
    let n = dims.area();

    let same = evaluate_metrics(&gt, &gt, range).map_err(|e| e.to_string())?;
    let zero = DepthMetrics {
        mae: 0.0,
        rmse: 0.0,
        imae: 0.0,
        irmse: 0.0,
        abs_rel: 0.0,
        sq_rel: 0.0,
        delta1: 1.0,
        delta2: 1.0,
        delta3: 1.0,
        count: n,
    };
    metrics_close("identical", &same, &zero, 1e-9)?;

    // 0.1 m error at 2 m: 100 mm, inverse error 1/2 - 1/2.1, relative 0.05, squared relative 0.01/2.
    let plus = DenseDepthMap::constant(dims, 2.1).unwrap();
    let got = evaluate_metrics(&plus, &gt, range).map_err(|e| e.to_string())?;
    let inv = 1.0 / 2.0 - 1.0 / 2.1;
    let want = DepthMetrics {
        mae: 100.0,
        rmse: 100.0,
        imae: inv,
        irmse: inv,
        abs_rel: 0.05,
        sq_rel: 0.005,
        delta1: 1.0,
        delta2: 1.0,
        delta3: 1.0,
        count: n,
    };
    metrics_close("offset", &got, &want, 1e-9)?;

    // Ratio 2 exceeds 1.25^3 = 1.953125.
    let double = DenseDepthMap::constant(dims, 4.0).unwrap();
    let got = evaluate_metrics(&double, &gt, range).map_err(|e| e.to_string())?;
    ensure(got.delta1 == 0.0 && got.delta2 == 0.0 && got.delta3 == 0.0, || {
        format!("doubled: deltas {} {} {}", got.delta1, got.delta2, got.delta3)
    })?;
    ensure(rel_close(got.mae, 2000.0, 1e-9) && rel_close(got.abs_rel, 1.0, 1e-9), || "doubled: mae/abs_rel".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for i in 0..20 {
        let dims = Dims::new(rng.random_range(8..40), rng.random_range(8..40));
        let g = DenseDepthMap::from_fn(dims, |_, _| rng.random_range(0.1..6.0)).unwrap();
        let p = DenseDepthMap::from_fn(dims, |_, _| rng.random_range(0.1..6.0)).unwrap();
        let got = evaluate_metrics(&p, &g, range).map_err(|e| e.to_string())?;
        metrics_close(&format!("pair {i}"), &got, &brute_metrics(p.data(), g.data(), range), 1e-12)?;
    }
    Ok("examples=3 within 1e-9 relative, random_pairs=20 match brute force within 1e-12 relative".into())
}

fn preset_fidelity() -> Outcome {
    let dims = Dims::new(480, 640);
    let cfg = AugmentationConfig::void();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let draws = 10_000;
    let mut hits: HashMap<&'static str, usize> = HashMap::new();
    for i in 0..draws {
        let photometric = sample_photometric(&cfg.photometric, cfg.mode, &mut rng).unwrap();
        let record = sample_geometric(&cfg.geometric, dims, cfg.mode, &mut rng).unwrap();
        for t in &photometric {
            let (name, ok) = match *t {
                PhotometricTransform::Brightness { factor } => ("brightness", (0.5..=1.5).contains(&factor)),
                PhotometricTransform::Contrast { factor } => ("contrast", (0.5..=1.5).contains(&factor)),
                PhotometricTransform::Saturation { factor } => ("saturation", (0.5..=1.5).contains(&factor)),
                PhotometricTransform::Hue { delta } => ("hue", (-0.1..=0.1).contains(&delta)),
                PhotometricTransform::PatchOcclusion {
                    pixel_fraction,
                    patch_size,
                    ..
                } => (
                    "patch_removal",
                    (0.001..=0.005).contains(&pixel_fraction) && patch_size == 5,
                ),
                PhotometricTransform::SparsePointRemoval { rate, .. } => ("point_removal", (0.6..=0.7).contains(&rate)),
            };
            ensure(ok, || format!("draw {i}: {t:?} outside range"))?;
            *hits.entry(name).or_default() += 1;
        }
        let mut canvas = dims;
        for t in &record.transforms {
            let (name, ok) = match t.kind {
                TransformKind::FlipH | TransformKind::FlipV => ("flip", true),
                TransformKind::Resize { scale_h, scale_w } => {
                    ("resize", scale_h == scale_w && (0.6..=1.0).contains(&scale_w))
                }
                TransformKind::Rotate { degrees } => ("rotate", (-25.0..=25.0).contains(&degrees)),
                TransformKind::Translate { du, dv } => (
                    "translate",
                    du.unsigned_abs() as f64 <= 0.1 * canvas.width as f64
                        && dv.unsigned_abs() as f64 <= 0.1 * canvas.height as f64,
                ),
            };
            ensure(ok, || format!("draw {i}: {:?} outside range", t.kind))?;
            *hits.entry(name).or_default() += 1;
            canvas = t.out_dims;
        }
    }
    let families = [
        "brightness",
        "contrast",
        "saturation",
        "hue",
        "patch_removal",
        "point_removal",
        "flip",
        "resize",
        "rotate",
        "translate",
    ];
    let mut rates = Vec::new();
    for f in families {
        let rate = *hits.get(f).unwrap_or(&0) as f64 / draws as f64;
        ensure((rate - 0.5).abs() <= 0.02, || format!("{f} inclusion rate {rate:.4}"))?;
        rates.push(format!("{f}={rate:.4}"));
    }
    Ok(format!("draws={draws} out_of_range=0 {}", rates.join(" ")))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism_replay() -> Outcome {
    let dims = Dims::new(48, 64);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let predictor = NearestFillPredictor::default();
    let loss = LossConfig::default();
    let mut geo_only = AugmentationConfig::disabled();
    geo_only.geometric = rotate_resize_config();
    let mut files = 0;
    for seed in 0..10u64 {
        let (t, _) = triplet_for(seed, dims);
        let cfg = AugmentationConfig::void();
        let a = run_augundo_step(&t, &cfg, &predictor, &loss, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = run_augundo_step(&t, &cfg, &predictor, &loss, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let (da, db) = (tmp.path().join(format!("a{seed}")), tmp.path().join(format!("b{seed}")));
        save_artifacts(&a, &da).unwrap();
        save_artifacts(&b, &db).unwrap();
        let (fa, fb) = (dir_bytes(&da), dir_bytes(&db));
        ensure(fa == fb, || format!("seed {seed}: artifacts differ"))?;
        files += fa.len();

        // Full plan persisted as text, reloaded and replayed.
        let plan = AugmentationPlan::from_json(&std::fs::read_to_string(da.join("plan.json")).unwrap()).unwrap();
        let r = replay_augundo_step(&t, &plan, &predictor, &loss).unwrap();
        ensure(loss_bits(&r.loss) == loss_bits(&a.loss), || format!("seed {seed}: plan replay differs"))?;

        // Geometric-only run replayed from the persisted TransformRecord alone.
        let g = run_augundo_step(&t, &geo_only, &predictor, &loss, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let path = tmp.path().join(format!("record{seed}.json"));
        std::fs::write(&path, g.artifacts.plan.record.to_json()).unwrap();
        let record = TransformRecord::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let plan = AugmentationPlan {
            photometric: Vec::new(),
            record,
        };
        let r = replay_augundo_step(&t, &plan, &predictor, &loss).unwrap();
        ensure(loss_bits(&r.loss) == loss_bits(&g.loss), || format!("seed {seed}: record replay differs"))?;
    }
    Ok(format!("seeds=10 artifact_files_compared={files} plan_replays=10 record_replays=10 differing=0"))
}

fn loss_bits(b: &augundo::loss::LossBreakdown) -> [u64; 5] {
    [
        b.photometric.to_bits(),
        b.sparse.to_bits(),
        b.smoothness.to_bits(),
        b.total.to_bits(),
        b.valid_pixel_count as u64,
    ]
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("round_trip_exact", round_trip_exact),
        ("round_trip_tolerance", round_trip_tolerance),
        ("mask_soundness", mask_soundness),
        ("reprojection_oracle", reprojection_oracle),
        ("flip_loss_equivalence", flip_loss_equivalence),
        ("mask_exclusion", mask_exclusion),
        ("sparse_splat_conservation", sparse_conservation),
        ("metric_formulas", metric_formulas),
        ("preset_fidelity", preset_fidelity),
        ("determinism_replay", determinism_replay),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        ran += 1;
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name} {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} {detail}");
            }
        }
    }
    println!("{}/{ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
