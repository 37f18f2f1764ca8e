//! Evaluation metrics and the multi-seed experiment harness.

mod experiment;
mod report;

use crate::colorspace::{delta_e_rgb, Rgb};

pub use experiment::{
    prepare_samples, run_experiment, run_single, ExperimentConfig, ExperimentData, RunResult,
    SplitMetrics, TripleOutcome,
};
pub use report::{
    aggregate, EvalResult, ExperimentReport, SpeakerKind, SplitLabel, CSV_HEADER, REPORT_SCHEMA_VERSION,
};

/// Difference vectors shorter than this count as zero.
const ZERO_SHIFT: f64 = 1e-9;

/// Cosine similarity between the true shift `target - reference` and the
/// predicted shift `pred - reference`. `None` when either shift is zero.
pub fn eval_cosine_checked(target: Rgb, reference: Rgb, pred: Rgb) -> Option<f64> {
    let (t, r, p) = (target.to_array(), reference.to_array(), pred.to_array());
    let u: [f64; 3] = std::array::from_fn(|i| t[i] - r[i]);
    let v: [f64; 3] = std::array::from_fn(|i| p[i] - r[i]);
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu < ZERO_SHIFT || nv < ZERO_SHIFT {
        return None;
    }
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    Some((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// [`eval_cosine_checked`] with degenerate cases scored as 0.
pub fn eval_cosine(target: Rgb, reference: Rgb, pred: Rgb) -> f64 {
    eval_cosine_checked(target, reference, pred).unwrap_or(0.0)
}

/// CIEDE2000 between the gold target and the prediction.
pub fn eval_delta_e(target: Rgb, pred: Rgb) -> f64 {
    delta_e_rgb(target, pred)
}
