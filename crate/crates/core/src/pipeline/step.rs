use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometric::{compose, invert, warp_image, warp_sparse_depth, TransformRecord};
use crate::loss::{evaluate_loss, LossBreakdown, LossConfig, LossInputs};
use crate::photometric::{apply_all, sample_photometric, PhotometricTransform};
use crate::types::{CameraIntrinsics, DenseDepthMap, Dims, Image, RigidPose, SparseDepthMap, ValidityMask};
use crate::undo::undo_depth;

use super::config::AugmentationConfig;
use super::io;
use super::predictor::{DepthPredictor, PredictionContext};

/// Target frame with its two temporal neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTriplet {
    pub prev: Image,
    pub image: Image,
    pub next: Image,
    pub sparse: SparseDepthMap,
    pub intrinsics: CameraIntrinsics,
    /// Relative pose taking target-frame points into the previous frame.
    pub pose_prev: RigidPose,
    /// Relative pose taking target-frame points into the next frame.
    pub pose_next: RigidPose,
}

impl FrameTriplet {
    pub fn new(
        prev: Image,
        image: Image,
        next: Image,
        sparse: SparseDepthMap,
        intrinsics: CameraIntrinsics,
        pose_prev: RigidPose,
        pose_next: RigidPose,
    ) -> Result<Self> {
        let dims = image.dims();
        dims.expect(prev.dims())?;
        dims.expect(next.dims())?;
        dims.expect(sparse.dims())?;
        Ok(Self {
            prev,
            image,
            next,
            sparse,
            intrinsics,
            pose_prev,
            pose_next,
        })
    }
}

/// Everything drawn for one step; persisting it makes the step replayable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub photometric: Vec<PhotometricTransform>,
    pub record: TransformRecord,
}

impl AugmentationPlan {
    pub fn identity(triplet: &FrameTriplet) -> Self {
        Self {
            photometric: Vec::new(),
            record: TransformRecord::empty(triplet.image.dims()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text).map_err(|e| Error::ParseError(format!("plan: {e}")))?;
        for t in &plan.photometric {
            t.validate()?;
        }
        plan.record.validate()?;
        Ok(plan)
    }
}

/// The eight stages of one augment-predict-undo step, in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepEvent {
    SamplePhotometric,
    SampleGeometric,
    ComposeInverse,
    Augment,
    Predict,
    Undo,
    Reconstruct,
    Loss,
}

impl StepEvent {
    pub const ORDER: [StepEvent; 8] = [
        StepEvent::SamplePhotometric,
        StepEvent::SampleGeometric,
        StepEvent::ComposeInverse,
        StepEvent::Augment,
        StepEvent::Predict,
        StepEvent::Undo,
        StepEvent::Reconstruct,
        StepEvent::Loss,
    ];
}

/// Intermediate products of a step.
#[derive(Clone, Debug)]
pub struct StepArtifacts {
    pub plan: AugmentationPlan,
    pub augmented_image: Image,
    pub augmented_sparse: SparseDepthMap,
    pub augmented_prediction: DenseDepthMap,
    /// Prediction warped back to the original frame.
    pub depth: DenseDepthMap,
    pub mask: ValidityMask,
    /// Reconstructions of the target from the previous and next frames.
    pub reconstructions: Vec<Image>,
    pub photometric_maps: Vec<Vec<f64>>,
    pub sparse_map: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub loss: LossBreakdown,
    pub artifacts: StepArtifacts,
    pub events: Vec<StepEvent>,
}

/// Samples a plan and runs one step.
pub fn run_augundo_step<R: Rng + ?Sized>(
    triplet: &FrameTriplet,
    cfg: &AugmentationConfig,
    predictor: &dyn DepthPredictor,
    loss: &LossConfig,
    rng: &mut R,
) -> Result<StepOutput> {
    let plan = sample_plan(cfg, triplet.image.dims(), rng)?;
    let events = vec![StepEvent::SamplePhotometric, StepEvent::SampleGeometric];
    execute(triplet, plan, predictor, loss, events)
}

/// Draws photometric transforms, then the geometric record, from one generator.
pub fn sample_plan<R: Rng + ?Sized>(cfg: &AugmentationConfig, dims: Dims, rng: &mut R) -> Result<AugmentationPlan> {
    cfg.validate()?;
    let photometric = sample_photometric(&cfg.photometric, cfg.mode, rng)?;
    let record = crate::geometric::sample_geometric(&cfg.geometric, dims, cfg.mode, rng)?;
    Ok(AugmentationPlan { photometric, record })
}

/// [`sample_plan`] with a ChaCha8 generator seeded from `seed`; the seed is kept in the record.
pub fn sample_plan_seeded(cfg: &AugmentationConfig, dims: Dims, seed: u64) -> Result<AugmentationPlan> {
    let mut plan = sample_plan(cfg, dims, &mut ChaCha8Rng::seed_from_u64(seed))?;
    plan.record.seed = Some(seed);
    Ok(plan)
}

/// [`run_augundo_step`] with a generator seeded from `cfg.seed`; the seed is kept in the record.
pub fn run_augundo_step_seeded(
    triplet: &FrameTriplet,
    cfg: &AugmentationConfig,
    predictor: &dyn DepthPredictor,
    loss: &LossConfig,
) -> Result<StepOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = run_augundo_step(triplet, cfg, predictor, loss, &mut rng)?;
    out.artifacts.plan.record.seed = Some(cfg.seed);
    Ok(out)
}

/// Runs a step with a previously drawn plan instead of sampling.
pub fn replay_augundo_step(
    triplet: &FrameTriplet,
    plan: &AugmentationPlan,
    predictor: &dyn DepthPredictor,
    loss: &LossConfig,
) -> Result<StepOutput> {
    let events = vec![StepEvent::SamplePhotometric, StepEvent::SampleGeometric];
    execute(triplet, plan.clone(), predictor, loss, events)
}

/// Applies a plan to the target image and sparse depth.
pub fn augment_inputs(image: &Image, sparse: &SparseDepthMap, plan: &AugmentationPlan) -> Result<(Image, SparseDepthMap)> {
    plan.record.original_dims.expect(image.dims())?;
    let (img, z) = apply_all(&plan.photometric, image, sparse)?;
    if plan.record.is_empty() {
        return Ok((img, z));
    }
    let forward = compose(&plan.record)?;
    Ok((warp_image(&img, &forward)?, warp_sparse_depth(&z, &forward)?))
}

fn execute(
    triplet: &FrameTriplet,
    plan: AugmentationPlan,
    predictor: &dyn DepthPredictor,
    loss: &LossConfig,
    mut events: Vec<StepEvent>,
) -> Result<StepOutput> {
    plan.record.validate()?;
    plan.record.original_dims.expect(triplet.image.dims())?;
    if !plan.record.is_empty() {
        invert(&plan.record)?;
    }
    events.push(StepEvent::ComposeInverse);

    let (augmented_image, augmented_sparse) = augment_inputs(&triplet.image, &triplet.sparse, &plan)?;
    events.push(StepEvent::Augment);

    let augmented_prediction = predictor.predict(
        &augmented_image,
        &augmented_sparse,
        &PredictionContext { record: &plan.record },
    )?;
    augmented_image.dims().expect(augmented_prediction.dims())?;
    events.push(StepEvent::Predict);

    let undone = undo_depth(&augmented_prediction, &plan.record)?;
    events.push(StepEvent::Undo);

    let neighbours = [triplet.prev.clone(), triplet.next.clone()];
    let poses = [triplet.pose_prev, triplet.pose_next];
    let eval = evaluate_loss(
        &LossInputs {
            image: &triplet.image,
            neighbours: &neighbours,
            sparse: &triplet.sparse,
            depth: &undone.depth,
            mask: &undone.mask,
            intrinsics: &triplet.intrinsics,
            poses: &poses,
        },
        loss,
    )?;
    events.push(StepEvent::Reconstruct);
    events.push(StepEvent::Loss);

    Ok(StepOutput {
        loss: eval.breakdown,
        artifacts: StepArtifacts {
            plan,
            augmented_image,
            augmented_sparse,
            augmented_prediction,
            depth: undone.depth,
            mask: undone.mask,
            reconstructions: eval.reconstructions,
            photometric_maps: eval.photometric_maps,
            sparse_map: eval.sparse_map,
        },
        events,
    })
}

/// Writes every artifact of a step into `dir`.
pub fn save_artifacts(out: &StepOutput, dir: &Path) -> Result<()> {
    let a = &out.artifacts;
    let dims = a.depth.dims();
    io::write_text(&dir.join("plan.json"), &a.plan.to_json())?;
    io::write_text(&dir.join("record.json"), &a.plan.record.to_json())?;
    io::write_text(
        &dir.join("loss.json"),
        &serde_json::to_string_pretty(&out.loss).expect("loss serializes"),
    )?;
    io::save_image(&a.augmented_image, &dir.join("augmented_image.png"))?;
    io::save_depth(a.augmented_sparse.data(), a.augmented_sparse.dims(), &dir.join("augmented_sparse.png"))?;
    io::save_depth(
        a.augmented_prediction.data(),
        a.augmented_prediction.dims(),
        &dir.join("augmented_prediction.png"),
    )?;
    io::save_depth(a.depth.data(), dims, &dir.join("depth.png"))?;
    io::save_mask(&a.mask, &dir.join("mask.png"))?;
    for (name, (rec, rho)) in ["prev", "next"].iter().zip(a.reconstructions.iter().zip(&a.photometric_maps)) {
        io::save_image(rec, &dir.join(format!("reconstruction_{name}.png")))?;
        io::save_error_map(rho, dims, Some(1.0), &dir.join(format!("photometric_error_{name}.png")))?;
    }
    io::save_error_map(&a.sparse_map, dims, None, &dir.join("sparse_error.png"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometric::TransformKind;
    use crate::pipeline::predictor::{NearestFillPredictor, OraclePredictor};
    use crate::scenegen::{make_scene, render_view, sample_sparse, SceneKind};
    use crate::types::Dims;

    fn fixture() -> (FrameTriplet, DenseDepthMap) {
        let dims = Dims::new(48, 64);
        let k = CameraIntrinsics::new(500.0, 500.0, 31.5, 23.5).unwrap();
        let scene = make_scene(SceneKind::FrontoPlane { depth: 2.0 }, dims, k, 7).unwrap();
        let prev_pose = RigidPose::from_translation([0.02, 0.0, 0.0]);
        let next_pose = RigidPose::from_translation([-0.02, 0.0, 0.0]);
        let z = sample_sparse(&scene.depth, 200, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let t = FrameTriplet::new(
            render_view(&scene, &prev_pose).unwrap(),
            scene.image.clone(),
            render_view(&scene, &next_pose).unwrap(),
            z,
            k,
            prev_pose,
            next_pose,
        )
        .unwrap();
        (t, scene.depth)
    }

    #[test]
    fn events_follow_the_algorithm() {
        let (t, gt) = fixture();
        let out = run_augundo_step_seeded(&t, &AugmentationConfig::void().with_seed(3), &OraclePredictor::new(gt), &LossConfig::default())
            .unwrap();
        assert_eq!(out.events, StepEvent::ORDER.to_vec());
    }

    #[test]
    fn unaugmented_oracle_is_near_zero() {
        let (t, gt) = fixture();
        let cfg = LossConfig::default();
        let out = run_augundo_step_seeded(&t, &AugmentationConfig::disabled(), &OraclePredictor::new(gt), &cfg).unwrap();
        assert!(out.loss.photometric <= 1e-3, "{}", out.loss.photometric);
        assert_eq!(out.loss.sparse, 0.0);
        assert_eq!(out.loss.valid_pixel_count, 48 * 64);
    }

    #[test]
    fn translation_masks_the_strip() {
        let (t, gt) = fixture();
        let plan = AugmentationPlan {
            photometric: Vec::new(),
            record: TransformRecord::from_kinds(t.image.dims(), &[TransformKind::Translate { du: 5, dv: -2 }]).unwrap(),
        };
        let out = replay_augundo_step(&t, &plan, &OraclePredictor::new(gt), &LossConfig::default()).unwrap();
        assert_eq!(out.loss.valid_pixel_count, 48 * 64 - (5 * 48 + 2 * 64 - 5 * 2));
    }

    #[test]
    fn replay_reproduces_the_loss() {
        let (t, _) = fixture();
        let cfg = AugmentationConfig::void().with_seed(21);
        let first = run_augundo_step_seeded(&t, &cfg, &NearestFillPredictor::default(), &LossConfig::default()).unwrap();
        let plan = AugmentationPlan::from_json(&first.artifacts.plan.to_json()).unwrap();
        let again = replay_augundo_step(&t, &plan, &NearestFillPredictor::default(), &LossConfig::default()).unwrap();
        assert_eq!(first.loss, again.loss);
        assert_eq!(first.artifacts.depth, again.artifacts.depth);
    }

    #[test]
    fn artifacts_are_written() {
        let (t, gt) = fixture();
        let out = run_augundo_step_seeded(&t, &AugmentationConfig::void().with_seed(4), &OraclePredictor::new(gt), &LossConfig::default())
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_artifacts(&out, dir.path()).unwrap();
        for f in ["plan.json", "record.json", "loss.json", "depth.png", "mask.png", "reconstruction_prev.png", "sparse_error.png"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(io::load_mask(&dir.path().join("mask.png")).unwrap(), out.artifacts.mask);
    }
}
