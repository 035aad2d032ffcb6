//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant failure.
//! Failures print one line to stderr: `error: kind=<Code> msg="<text>"`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometric::TransformRecord;
use crate::harness::{run_harness, HarnessOptions};
use crate::loss::{LossConfig, LossWeights, SparseNorm};
use crate::pipeline::io::{self, SamplePaths};
use crate::pipeline::{
    augment_inputs, evaluate_metrics_sparse_gt, replay_augundo_step, run_augundo_step, run_parallel, sample_plan_seeded, save_artifacts,
    AugmentationConfig, AugmentationPlan, DepthPredictor, Family, FrameTriplet, NearestFillPredictor, OraclePredictor,
    Preset,
};
use crate::scenegen::{make_scene, render_view, sample_sparse_with, SceneKind, SparseSampling};
use crate::types::{CameraIntrinsics, DepthRange, Dims, RigidPose};
use crate::undo::{forward_warp_depth, undo_depth};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "augundo", version, about = "Invertible augmentation for unsupervised depth completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Augment samples and write the augmented inputs with their plans.
    Augment(AugmentArgs),
    /// Warp a depth map back to the original frame and write the validity mask.
    Undo(UndoArgs),
    /// Run one augment-predict-undo step per sample and report the loss.
    Loss(LossArgs),
    /// Run the property suite on synthetic scenes.
    Harness(HarnessArgs),
    /// Compare a predicted depth map against ground truth.
    Metrics(MetricsArgs),
    /// Generate synthetic samples with known depth and poses.
    Scenegen(ScenegenArgs),
}

#[derive(Args, Debug)]
struct SamplingArgs {
    /// JSON augmentation config; overrides --preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PresetArg::Void)]
    preset: PresetArg,
    /// Base seed; sample i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Void,
    Kitti,
    /// No augmentation.
    None,
}

impl SamplingArgs {
    fn config(&self) -> Result<AugmentationConfig> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(p), _) => AugmentationConfig::load(p)?,
            (None, PresetArg::Void) => AugmentationConfig::preset(Preset::Void),
            (None, PresetArg::Kitti) => AugmentationConfig::preset(Preset::Kitti),
            (None, PresetArg::None) => AugmentationConfig::disabled(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Sample directories (image.png, prev.png, next.png, sparse.png, calibration.json).
    #[arg(long = "sample", required = true)]
    samples: Vec<PathBuf>,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct UndoArgs {
    /// Depth predicted on the augmented input (16-bit PNG, mm).
    #[arg(long)]
    depth: PathBuf,
    /// record.json or plan.json written by `augment`.
    #[arg(long)]
    record: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PredictorArg {
    /// Nearest sparse point fill.
    Nearest,
    /// Ground truth from ground_truth.png.
    Oracle,
}

#[derive(Args, Debug)]
struct LossArgs {
    #[arg(long = "sample", required = true)]
    samples: Vec<PathBuf>,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Replay a persisted plan instead of sampling (single sample only).
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PredictorArg::Nearest)]
    predictor: PredictorArg,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    #[arg(long, default_value_t = 0.85)]
    ssim_weight: f64,
    #[arg(long)]
    l2_sparse: bool,
    #[arg(long)]
    mask_smoothness: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct HarnessArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    records: usize,
    #[arg(long, value_enum, default_value_t = PresetArg::Void)]
    preset: PresetArg,
    /// Families to switch off: TRN, ROT, HUE, COJ, RMP, FLP, RZD, RMI.
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    exclude: Vec<Family>,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    min_depth: f64,
    #[arg(long, default_value_t = 5.0)]
    max_depth: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SceneArg {
    Fronto,
    Step,
}

#[derive(Args, Debug)]
struct ScenegenArgs {
    #[arg(long, value_enum, default_value_t = SceneArg::Fronto)]
    kind: SceneArg,
    #[arg(long, default_value_t = 2.0)]
    depth: f64,
    #[arg(long, default_value_t = 1.0)]
    near: f64,
    #[arg(long, default_value_t = 3.0)]
    far: f64,
    /// Step column; defaults to the middle.
    #[arg(long)]
    split: Option<usize>,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 500.0)]
    focal: f64,
    /// Sideways camera offset of the neighbours, in meters (prev +b, next -b).
    #[arg(long, default_value_t = 0.02)]
    baseline: f64,
    #[arg(long, default_value_t = 150)]
    points: usize,
    #[arg(long)]
    harris: bool,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Failure that maps to an exit code.
enum Failure {
    Data(Error),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

fn error_line(kind: &str, msg: &str) -> String {
    format!("error: kind={kind} msg={:?}", msg.replace('\n', " "))
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", error_line("Usage", first));
            return EXIT_USAGE;
        }
    };
    let outcome = match cli.command {
        Command::Augment(a) => augment(a),
        Command::Undo(a) => undo(a),
        Command::Loss(a) => loss(a),
        Command::Harness(a) => harness(a),
        Command::Metrics(a) => metrics(a),
        Command::Scenegen(a) => scenegen(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Data(e)) => {
            eprintln!("{}", error_line(e.code(), &e.to_string()));
            EXIT_DATA
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("{}", error_line("InvariantFailure", &msg));
            EXIT_INVARIANT
        }
    }
}

fn sample_name(dir: &Path, index: usize) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .filter(|n| !n.is_empty() && n != "." && n != "..")
        .unwrap_or_else(|| format!("sample_{index:04}"))
}

/// Output directory per sample; a single sample writes straight into `out`.
fn sample_out(out: &Path, samples: &[PathBuf], index: usize) -> PathBuf {
    if samples.len() == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("{index:04}_{}", sample_name(&samples[index], index)))
    }
}

fn first_error(results: Vec<Result<String>>) -> std::result::Result<(), Failure> {
    let mut first = None;
    for r in results {
        match r {
            Ok(line) => println!("{line}"),
            Err(e) => {
                if first.is_none() {
                    first = Some(e);
                }
            }
        }
    }
    first.map_or(Ok(()), |e| Err(Failure::Data(e)))
}

fn augment(a: AugmentArgs) -> std::result::Result<(), Failure> {
    let cfg = a.sampling.config()?;
    cfg.validate()?;
    let results = run_parallel(&a.samples, a.sampling.workers, |i, dir| -> Result<String> {
        let paths = SamplePaths::in_dir(dir);
        let triplet = io::load_sample(&paths)?;
        let plan = sample_plan_seeded(&cfg, triplet.image.dims(), cfg.seed.wrapping_add(i as u64))?;
        let (img, z) = augment_inputs(&triplet.image, &triplet.sparse, &plan)?;
        let out = sample_out(&a.out, &a.samples, i);
        io::save_image(&img, &out.join("augmented_image.png"))?;
        io::save_depth(z.data(), z.dims(), &out.join("augmented_sparse.png"))?;
        if let Some(gt) = &paths.ground_truth {
            let gt = io::load_dense_depth(gt)?;
            let warped = forward_warp_depth(&gt, &plan.record)?;
            io::save_depth(warped.data(), warped.dims(), &out.join("augmented_ground_truth.png"))?;
        }
        io::write_text(&out.join("plan.json"), &plan.to_json())?;
        io::write_text(&out.join("record.json"), &plan.record.to_json())?;
        Ok(format!(
            "sample={} photometric={} geometric={} out={}",
            dir.display(),
            plan.photometric.len(),
            plan.record.transforms.len(),
            out.display()
        ))
    });
    first_error(results)
}

fn load_record(path: &Path) -> Result<TransformRecord> {
    let text = io::read_text(path)?;
    match AugmentationPlan::from_json(&text) {
        Ok(plan) => Ok(plan.record),
        Err(_) => TransformRecord::from_json(&text),
    }
}

fn undo(a: UndoArgs) -> std::result::Result<(), Failure> {
    let record = load_record(&a.record)?;
    let d = io::load_dense_depth(&a.depth)?;
    let r = undo_depth(&d, &record)?;
    io::save_depth(r.depth.data(), r.depth.dims(), &a.out.join("depth.png"))?;
    io::save_mask(&r.mask, &a.out.join("mask.png"))?;
    println!(
        "valid={} total={} out={}",
        r.mask.valid_count(),
        record.original_dims.area(),
        a.out.display()
    );
    Ok(())
}

fn loss(a: LossArgs) -> std::result::Result<(), Failure> {
    let cfg = a.sampling.config()?;
    cfg.validate()?;
    let loss_cfg = LossConfig {
        weights: LossWeights {
            alpha: a.alpha,
            beta: a.beta,
            lambda: a.lambda,
            ssim_weight: a.ssim_weight,
        },
        sparse_norm: if a.l2_sparse { SparseNorm::L2 } else { SparseNorm::L1 },
        mask_smoothness: a.mask_smoothness,
    };
    loss_cfg.weights.validate()?;
    let plan = match &a.plan {
        Some(p) if a.samples.len() > 1 => {
            return Err(Failure::Data(Error::ParseError(format!(
                "--plan {} applies to a single sample, got {}",
                p.display(),
                a.samples.len()
            ))))
        }
        Some(p) => Some(AugmentationPlan::from_json(&io::read_text(p)?)?),
        None => None,
    };
    let results = run_parallel(&a.samples, a.sampling.workers, |i, dir| -> Result<String> {
        let paths = SamplePaths::in_dir(dir);
        let triplet: FrameTriplet = io::load_sample(&paths)?;
        let predictor: Box<dyn DepthPredictor> = match a.predictor {
            PredictorArg::Nearest => Box::new(NearestFillPredictor::default()),
            PredictorArg::Oracle => {
                let gt = paths
                    .ground_truth
                    .as_ref()
                    .ok_or_else(|| Error::MissingKey(format!("{}/ground_truth.png", dir.display())))?;
                Box::new(OraclePredictor::new(io::load_dense_depth(gt)?))
            }
        };
        let out = match &plan {
            Some(p) => replay_augundo_step(&triplet, p, predictor.as_ref(), &loss_cfg)?,
            None => {
                let seed = cfg.seed.wrapping_add(i as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut o = run_augundo_step(&triplet, &cfg, predictor.as_ref(), &loss_cfg, &mut rng)?;
                o.artifacts.plan.record.seed = Some(seed);
                o
            }
        };
        let dir_out = sample_out(&a.out, &a.samples, i);
        save_artifacts(&out, &dir_out)?;
        Ok(serde_json::to_string(&out.loss).expect("loss serializes"))
    });
    first_error(results)
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse::<Family>().map_err(|e| e.to_string())
}

fn harness(a: HarnessArgs) -> std::result::Result<(), Failure> {
    let preset = match a.preset {
        PresetArg::Kitti => Preset::Kitti,
        _ => Preset::Void,
    };
    let report = run_harness(&HarnessOptions {
        seed: a.seed,
        records: a.records,
        preset,
        exclude: a.exclude,
    });
    println!("{report}");
    if let Some(p) = &a.out {
        io::write_text(p, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::Invariant(format!("failed checks: {}", failed.join(","))))
    }
}

fn metrics(a: MetricsArgs) -> std::result::Result<(), Failure> {
    let range = DepthRange::new(a.min_depth, a.max_depth)?;
    let pred = io::load_dense_depth(&a.pred)?;
    let gt = io::load_sparse_depth(&a.gt)?;
    let m = evaluate_metrics_sparse_gt(&pred, &gt, range)?;
    let text = serde_json::to_string(&m).expect("metrics serialize");
    println!("{text}");
    if let Some(p) = &a.out {
        io::write_text(p, &text)?;
        let err = crate::pipeline::metrics::abs_error_map(&pred, gt.data(), range)?;
        io::save_error_map(&err, pred.dims(), None, &p.with_extension("png"))?;
    }
    Ok(())
}

fn scenegen(a: ScenegenArgs) -> std::result::Result<(), Failure> {
    let dims = Dims::new(a.height, a.width);
    let (cx, cy) = dims.center();
    let k = CameraIntrinsics::new(a.focal, a.focal, cx, cy)?;
    let kind = match a.kind {
        SceneArg::Fronto => SceneKind::FrontoPlane { depth: a.depth },
        SceneArg::Step => SceneKind::TwoPlaneStep {
            near: a.near,
            far: a.far,
            split: a.split.unwrap_or(a.width / 2),
        },
    };
    let mode = if a.harris {
        SparseSampling::Harris
    } else {
        SparseSampling::Uniform
    };
    let indices: Vec<usize> = (0..a.count).collect();
    let results = run_parallel(&indices, a.workers, |_, &i| -> Result<String> {
        let seed = a.seed.wrapping_add(i as u64);
        let scene = make_scene(kind, dims, k, seed)?;
        let prev = RigidPose::from_translation([a.baseline, 0.0, 0.0]);
        let next = RigidPose::from_translation([-a.baseline, 0.0, 0.0]);
        let z = sample_sparse_with(&scene.depth, &scene.image, a.points, mode, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let triplet = FrameTriplet::new(
            render_view(&scene, &prev)?,
            scene.image.clone(),
            render_view(&scene, &next)?,
            z,
            k,
            prev,
            next,
        )?;
        let dir = if a.count == 1 {
            a.out.clone()
        } else {
            a.out.join(format!("sample_{i:04}"))
        };
        io::save_sample(&triplet, Some(&scene.depth), &dir)?;
        Ok(format!("scene={} out={}", i, dir.display()))
    });
    first_error(results)
}
