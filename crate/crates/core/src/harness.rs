//! Property suite run on synthetic scenes.
//!
//! Each check exercises one invariant of the augment / undo / loss chain and
//! reports pass or fail with a short detail string. Family-exclusion flags
//! switch augmentation families off and verify that the off path is honoured.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometric::{sample_geometric, warp_sparse_depth, FlipModes, GeometricConfig, TransformKind, TransformRecord};
use crate::loss::{evaluate_loss, reproject, LossConfig, LossInputs, LossWeights};
use crate::photometric::{sample_photometric, PhotometricConfig, PhotometricTransform};
use crate::pipeline::{
    replay_augundo_step, run_augundo_step_seeded, AugmentationConfig, AugmentationPlan, Family, FrameTriplet,
    NearestFillPredictor, OraclePredictor, Preset,
};
use crate::sampling::{FamilyConfig, InclusionMode};
use crate::scenegen::{make_scene, render_view, sample_sparse, SceneKind, SyntheticScene};
use crate::types::{CameraIntrinsics, DenseDepthMap, Dims, RigidPose, SparseDepthMap, ValidityMask};
use crate::undo::{forward_warp_depth, undo_depth, undo_depth_traced};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessOptions {
    pub seed: u64,
    /// Random records per record-based check.
    pub records: usize,
    pub preset: Preset,
    pub exclude: Vec<Family>,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            records: 50,
            preset: Preset::Void,
            exclude: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub checks: Vec<CheckResult>,
}

impl HarnessReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, outcome: Result<(bool, String)>) {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: kind={} msg=\"{e}\"", e.code())));
        self.checks.push(CheckResult {
            name: name.into(),
            passed,
            detail,
        });
    }
}

impl fmt::Display for HarnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        write!(f, "{passed}/{} checks passed", self.checks.len())
    }
}

const SIDE: usize = 64;

fn dims() -> Dims {
    Dims::new(SIDE, SIDE)
}

fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(500.0, 500.0, 31.5, 31.5).expect("valid intrinsics")
}

fn random_depth(rng: &mut ChaCha8Rng) -> DenseDepthMap {
    DenseDepthMap::from_fn(dims(), |_, _| rng.random_range(0.2..5.0)).expect("positive depths")
}

fn flip_translate_config() -> GeometricConfig {
    GeometricConfig {
        flip: FamilyConfig::on(
            FlipModes {
                horizontal: true,
                vertical: true,
            },
            0.5,
        ),
        translate: FamilyConfig::on(0.1, 0.5),
        ..GeometricConfig::disabled()
    }
}

fn triplet_for(scene: &SyntheticScene, prev: RigidPose, next: RigidPose, points: usize, seed: u64) -> Result<FrameTriplet> {
    let z = sample_sparse(&scene.depth, points, &mut ChaCha8Rng::seed_from_u64(seed))?;
    FrameTriplet::new(
        render_view(scene, &prev)?,
        scene.image.clone(),
        render_view(scene, &next)?,
        z,
        scene.intrinsics,
        prev,
        next,
    )
}

/// Step scene whose disparities are whole pixels (3 px near, 1 px far).
fn step_triplet(seed: u64) -> Result<(FrameTriplet, DenseDepthMap)> {
    let scene = make_scene(
        SceneKind::TwoPlaneStep {
            near: 1.0,
            far: 3.0,
            split: SIDE / 2,
        },
        dims(),
        intrinsics(),
        seed,
    )?;
    let t = triplet_for(
        &scene,
        RigidPose::from_translation([-0.006, 0.0, 0.0]),
        RigidPose::from_translation([-0.012, 0.0, 0.0]),
        150,
        seed,
    )?;
    Ok((t, scene.depth))
}

fn fronto_triplet(seed: u64) -> Result<(FrameTriplet, DenseDepthMap)> {
    let scene = make_scene(SceneKind::FrontoPlane { depth: 2.0 }, dims(), intrinsics(), seed)?;
    let t = triplet_for(
        &scene,
        RigidPose::from_translation([0.0137, 0.004, 0.0]),
        RigidPose::from_axis_angle([0.0, 1.0, 0.0], 0.01, [-0.02, 0.0, 0.0])?,
        150,
        seed,
    )?;
    Ok((t, scene.depth))
}

fn check_round_trip_exact(opts: &HarnessOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let cfg = flip_translate_config();
    let mut bad = 0usize;
    for _ in 0..opts.records {
        let d = random_depth(rng);
        let rec = sample_geometric(&cfg, dims(), InclusionMode::PerFamily, rng)?;
        let undone = undo_depth(&forward_warp_depth(&d, &rec)?, &rec)?;
        bad += (0..dims().area())
            .filter(|&i| undone.mask.data()[i] && undone.depth.data()[i].to_bits() != d.data()[i].to_bits())
            .count();
    }
    Ok((bad == 0, format!("records={} mismatches={bad}", opts.records)))
}

fn check_round_trip_nearest(opts: &HarnessOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let cfg = GeometricConfig::indoor();
    let (mut far, mut invented) = (0usize, 0usize);
    for _ in 0..opts.records {
        let d = random_depth(rng);
        let rec = sample_geometric(&cfg, dims(), InclusionMode::PerFamily, rng)?;
        let undone = undo_depth(&forward_warp_depth(&d, &rec)?, &rec)?;
        let values: HashSet<u64> = d.data().iter().map(|v| v.to_bits()).collect();
        for row in 0..SIDE {
            for col in 0..SIDE {
                if !undone.mask.get(row, col) {
                    continue;
                }
                let v = undone.depth.get(row, col);
                if !values.contains(&v.to_bits()) {
                    invented += 1;
                }
                let near = (row.saturating_sub(1)..=(row + 1).min(SIDE - 1))
                    .any(|r| (col.saturating_sub(1)..=(col + 1).min(SIDE - 1)).any(|c| d.get(r, c) == v));
                if !near {
                    far += 1;
                }
            }
        }
    }
    Ok((
        far == 0 && invented == 0,
        format!("records={} displaced={far} invented={invented}", opts.records),
    ))
}

fn check_mask_sound(opts: &HarnessOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let cfg = GeometricConfig::indoor();
    let mut reads = 0usize;
    for _ in 0..opts.records {
        let d = random_depth(rng);
        let rec = sample_geometric(&cfg, dims(), InclusionMode::PerFamily, rng)?;
        let fwd = crate::geometric::warp_depth_nearest_traced(d.data(), dims(), &rec.forward_map())?;
        let aug = DenseDepthMap::new(rec.final_dims().height, rec.final_dims().width, fwd.values.clone())?;
        let trace = undo_depth_traced(&aug, &rec)?;
        for i in 0..dims().area() {
            if trace.result.mask.data()[i] && (trace.clamped[i] || fwd.replicated[trace.source_index[i]]) {
                reads += 1;
            }
        }
    }
    Ok((reads == 0, format!("records={} replicated_reads={reads}", opts.records)))
}

fn check_reprojection(_: &HarnessOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let d = DenseDepthMap::constant(dims(), 2.0)?;
    let rp = reproject(&d, &intrinsics(), &RigidPose::from_translation([0.1, 0.0, 0.0]));
    let mut worst = 0.0f64;
    for row in 0..SIDE {
        for col in 0..SIDE {
            let i = row * SIDE + col;
            worst = worst.max((rp.u[i] - (col as f64 + 25.0)).abs()).max((rp.v[i] - row as f64).abs());
        }
    }
    Ok((worst < 1e-9, format!("max_error_px={worst:e}")))
}

fn check_zero_residual(opts: &HarnessOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let cfg = LossConfig {
        weights: LossWeights {
            lambda: 0.0,
            ..LossWeights::default()
        },
        ..LossConfig::default()
    };
    let mut worst: f64 = 0.0;
    let mut sparse: f64 = 0.0;
    for (t, gt) in [fronto_triplet(opts.seed)?, step_triplet(opts.seed)?] {
        let b = evaluate_loss(
            &LossInputs {
                image: &t.image,
                neighbours: &[t.prev.clone(), t.next.clone()],
                sparse: &t.sparse,
                depth: &gt,
                mask: &ValidityMask::ones(dims()),
                intrinsics: &t.intrinsics,
                poses: &[t.pose_prev, t.pose_next],
            },
            &cfg,
        )?
        .breakdown;
        worst = worst.max(b.photometric);
        sparse = sparse.max(b.sparse);
    }
    Ok((worst <= 1e-3 && sparse == 0.0, format!("photometric={worst:.3e} sparse={sparse}")))
}

fn check_flip_equivalence(opts: &HarnessOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (t, gt) = step_triplet(opts.seed)?;
    let oracle = OraclePredictor::new(gt);
    let loss = LossConfig::default();
    let base = run_augundo_step_seeded(&t, &AugmentationConfig::disabled(), &oracle, &loss)?.loss;
    let mut differing = 0usize;
    let seeds = 10u64;
    for s in 0..seeds {
        let cfg = AugmentationConfig::flips_only(0.5).with_seed(opts.seed.wrapping_add(s));
        let b = run_augundo_step_seeded(&t, &cfg, &oracle, &loss)?.loss;
        if b.photometric.to_bits() != base.photometric.to_bits() || b.sparse.to_bits() != base.sparse.to_bits() {
            differing += 1;
        }
    }
    Ok((differing == 0, format!("seeds={seeds} differing={differing}")))
}

fn check_mask_exclusion(opts: &HarnessOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (t, gt) = fronto_triplet(opts.seed)?;
    let cfg = GeometricConfig::indoor();
    let loss = LossConfig::default();
    let neighbours = [t.prev.clone(), t.next.clone()];
    let poses = [t.pose_prev, t.pose_next];
    let mut changed = 0usize;
    let cases = 10;
    for _ in 0..cases {
        let rec = sample_geometric(&cfg, dims(), InclusionMode::PerFamily, rng)?;
        let undone = undo_depth(&forward_warp_depth(&gt, &rec)?, &rec)?;
        let perturbed: Vec<f64> = undone
            .depth
            .data()
            .iter()
            .zip(undone.mask.data())
            .map(|(&d, &m)| if m { d } else { rng.random_range(0.2..5.0) })
            .collect();
        let perturbed = DenseDepthMap::new(SIDE, SIDE, perturbed)?;
        let eval = |depth: &DenseDepthMap| {
            evaluate_loss(
                &LossInputs {
                    image: &t.image,
                    neighbours: &neighbours,
                    sparse: &t.sparse,
                    depth,
                    mask: &undone.mask,
                    intrinsics: &t.intrinsics,
                    poses: &poses,
                },
                &loss,
            )
        };
        let (a, b) = (eval(&undone.depth)?.breakdown, eval(&perturbed)?.breakdown);
        if a.photometric.to_bits() != b.photometric.to_bits() || a.sparse.to_bits() != b.sparse.to_bits() {
            changed += 1;
        }
    }
    Ok((changed == 0, format!("cases={cases} changed={changed}")))
}

fn check_sparse_flip_conservation(opts: &HarnessOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut lost = 0usize;
    for _ in 0..opts.records {
        let d = random_depth(rng);
        let z: SparseDepthMap = sample_sparse(&d, 200, rng)?;
        let kinds: &[TransformKind] = if rng.random_bool(0.5) {
            &[TransformKind::FlipH]
        } else {
            &[TransformKind::FlipV, TransformKind::FlipH]
        };
        let rec = TransformRecord::from_kinds(dims(), kinds)?;
        lost += z.point_count().abs_diff(warp_sparse_depth(&z, &rec.forward_map())?.point_count());
    }
    Ok((lost == 0, format!("records={} count_changes={lost}", opts.records)))
}

fn check_replay(opts: &HarnessOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (t, _) = fronto_triplet(opts.seed)?;
    let cfg = AugmentationConfig::preset(opts.preset).without(&opts.exclude).with_seed(opts.seed);
    let p = NearestFillPredictor::default();
    let loss = LossConfig::default();
    let a = run_augundo_step_seeded(&t, &cfg, &p, &loss)?;
    let b = run_augundo_step_seeded(&t, &cfg, &p, &loss)?;
    let plan = AugmentationPlan::from_json(&a.artifacts.plan.to_json())?;
    let c = replay_augundo_step(&t, &plan, &p, &loss)?;
    let ok = a.loss == b.loss && a.loss == c.loss && a.artifacts.depth == c.artifacts.depth;
    Ok((ok, format!("total={:.6e}", a.loss.total)))
}

fn present(family: Family, photometric: &[PhotometricTransform], record: &TransformRecord) -> bool {
    let geo = |f: fn(&TransformKind) -> bool| record.transforms.iter().any(|t| f(&t.kind));
    let pho = |f: fn(&PhotometricTransform) -> bool| photometric.iter().any(f);
    match family {
        Family::Trn => geo(|k| matches!(k, TransformKind::Translate { .. })),
        Family::Rot => geo(|k| matches!(k, TransformKind::Rotate { .. })),
        Family::Rzd => geo(|k| matches!(k, TransformKind::Resize { .. })),
        Family::Flp => geo(|k| matches!(k, TransformKind::FlipH | TransformKind::FlipV)),
        Family::Hue => pho(|t| matches!(t, PhotometricTransform::Hue { .. })),
        Family::Coj => pho(|t| {
            matches!(
                t,
                PhotometricTransform::Brightness { .. }
                    | PhotometricTransform::Contrast { .. }
                    | PhotometricTransform::Saturation { .. }
            )
        }),
        Family::Rmp => pho(|t| matches!(t, PhotometricTransform::SparsePointRemoval { .. })),
        Family::Rmi => pho(|t| matches!(t, PhotometricTransform::PatchOcclusion { .. })),
    }
}

/// Forces every enabled family of `cfg` to fire.
fn always(mut cfg: AugmentationConfig) -> AugmentationConfig {
    let p: &mut PhotometricConfig = &mut cfg.photometric;
    for fam in [&mut p.brightness, &mut p.contrast, &mut p.saturation, &mut p.hue, &mut p.patch_occlusion, &mut p.point_removal] {
        fam.probability = 1.0;
    }
    let g = &mut cfg.geometric;
    g.flip.probability = 1.0;
    g.resize.probability = 1.0;
    g.rotate.probability = 1.0;
    g.translate.probability = 1.0;
    cfg
}

fn check_family(family: Family, opts: &HarnessOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let excluded = opts.exclude.contains(&family);
    let base = AugmentationConfig::preset(opts.preset);
    let enabled_in_preset = AugmentationConfig::preset(opts.preset).without(&[family]) != base;
    let cfg = always(base.without(&opts.exclude));
    let draws = 50;
    let mut hits = 0;
    for _ in 0..draws {
        let pho = sample_photometric(&cfg.photometric, cfg.mode, rng)?;
        let rec = sample_geometric(&cfg.geometric, dims(), cfg.mode, rng)?;
        if present(family, &pho, &rec) {
            hits += 1;
        }
    }
    let expected = if excluded || !enabled_in_preset { 0 } else { draws };
    let state = if excluded {
        "excluded"
    } else if enabled_in_preset {
        "on"
    } else {
        "not_in_preset"
    };
    Ok((hits == expected, format!("{state} hits={hits}/{draws}")))
}

fn check_preset_ranges(opts: &HarnessOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let cfg = always(AugmentationConfig::preset(opts.preset));
    let (p, g) = (&cfg.photometric, &cfg.geometric);
    let mut outside = 0usize;
    let draws = 200;
    for _ in 0..draws {
        for t in sample_photometric(p, cfg.mode, rng)? {
            let ok = match t {
                PhotometricTransform::Brightness { factor } => p.brightness.range.contains(factor),
                PhotometricTransform::Contrast { factor } => p.contrast.range.contains(factor),
                PhotometricTransform::Saturation { factor } => p.saturation.range.contains(factor),
                PhotometricTransform::Hue { delta } => p.hue.range.contains(delta),
                PhotometricTransform::PatchOcclusion { pixel_fraction, patch_size, .. } => {
                    p.patch_occlusion.range.contains(pixel_fraction) && patch_size == p.patch_size
                }
                PhotometricTransform::SparsePointRemoval { rate, .. } => p.point_removal.range.contains(rate),
            };
            outside += usize::from(!ok);
        }
        let rec = sample_geometric(g, dims(), cfg.mode, rng)?;
        let mut canvas = dims();
        for t in &rec.transforms {
            let ok = match t.kind {
                TransformKind::FlipH => g.flip.range.horizontal,
                TransformKind::FlipV => g.flip.range.vertical,
                TransformKind::Resize { scale_h, scale_w } => {
                    g.resize.range.contains(scale_h) && g.resize.range.contains(scale_w)
                }
                TransformKind::Rotate { degrees } => g.rotate.range.contains(degrees),
                TransformKind::Translate { du, dv } => {
                    du.unsigned_abs() as f64 <= g.translate.range * canvas.width as f64
                        && dv.unsigned_abs() as f64 <= g.translate.range * canvas.height as f64
                }
            };
            canvas = t.out_dims;
            outside += usize::from(!ok);
        }
    }
    Ok((outside == 0, format!("preset={} draws={draws} outside={outside}", opts.preset)))
}

type Check = fn(&HarnessOptions, &mut ChaCha8Rng) -> Result<(bool, String)>;

/// Runs the whole suite. The report depends only on `opts`.
pub fn run_harness(opts: &HarnessOptions) -> HarnessReport {
    let checks: [(&str, Check); 10] = [
        ("round_trip_exact", check_round_trip_exact),
        ("round_trip_nearest", check_round_trip_nearest),
        ("mask_soundness", check_mask_sound),
        ("reprojection_oracle", check_reprojection),
        ("zero_residual", check_zero_residual),
        ("flip_loss_equivalence", check_flip_equivalence),
        ("mask_exclusion", check_mask_exclusion),
        ("sparse_flip_conservation", check_sparse_flip_conservation),
        ("replay", check_replay),
        ("preset_ranges", check_preset_ranges),
    ];
    let mut report = HarnessReport::default();
    for (k, (name, check)) in checks.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((k as u64 + 1) << 32));
        report.push(*name, check(opts, &mut rng));
    }
    for (k, family) in Family::ALL.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((k as u64 + 101) << 32));
        report.push(format!("family_{}", family.code()), check_family(*family, opts, &mut rng));
    }
    report
}
