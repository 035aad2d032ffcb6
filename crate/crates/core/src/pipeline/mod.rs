//! End-to-end training-step driver, configuration, metrics and file IO.

pub mod config;
pub mod io;
pub mod metrics;
pub mod predictor;
pub mod step;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub use config::{AugmentationConfig, Family, Preset};
pub use metrics::{evaluate_metrics, evaluate_metrics_sparse_gt, DepthMetrics};
pub use predictor::{DepthPredictor, NearestFillPredictor, OraclePredictor, PredictionContext};
pub use step::{
    augment_inputs, replay_augundo_step, run_augundo_step, run_augundo_step_seeded, sample_plan, sample_plan_seeded,
    save_artifacts,
    AugmentationPlan, FrameTriplet, StepArtifacts, StepEvent, StepOutput,
};

/// Runs `job` on every item with up to `workers` threads pulling from a
/// shared queue. Results come back in input order.
pub fn run_parallel<T, R, F>(items: &[T], workers: usize, job: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().enumerate().map(|(i, t)| job(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = job(i, item);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}
