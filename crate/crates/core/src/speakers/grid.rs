use serde::{Deserialize, Serialize};

use super::{check_lambda, pragmatic_select, CandidateSet};
use crate::colorspace::Rgb;
use crate::error::{Error, Result};
use crate::eval::{eval_cosine, eval_delta_e};

/// What the lambda search maximizes on the validation set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Mean cosine similarity of the color shifts.
    #[default]
    Cosine,
    /// Negated mean Delta-E to the gold target.
    DeltaE,
}

/// A scored validation query: candidates with literal and listener
/// distributions, the gold target, and the reference color.
#[derive(Debug, Clone)]
pub struct ValidationItem {
    pub candidates: CandidateSet,
    pub target: Rgb,
    pub reference: Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_lambda: f64,
    pub best_score: f64,
    /// `(lambda, score)` for every grid point, in ascending lambda order.
    pub scores: Vec<(f64, f64)>,
}

/// `0, 0.01, ..., 1`.
pub fn default_grid() -> Vec<f64> {
    (0..=100).map(|i| f64::from(i) / 100.0).collect()
}

/// Mean objective over the items when every query uses `lambda`.
pub fn validation_score(items: &[ValidationItem], lambda: f64, objective: Objective) -> Result<f64> {
    let mut total = 0.0;
    for item in items {
        let (pred, _) = pragmatic_select(item.candidates.clone(), lambda)?;
        total += match objective {
            Objective::Cosine => eval_cosine(item.target, item.reference, pred),
            Objective::DeltaE => -eval_delta_e(item.target, pred),
        };
    }
    Ok(total / items.len() as f64)
}

/// Evaluates every lambda in `grid` and returns the best one. Ties go to the
/// smaller lambda.
pub fn grid_search_lambda(
    items: &[ValidationItem],
    grid: &[f64],
    objective: Objective,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::input("lambda grid is empty"));
    }
    if items.is_empty() {
        return Err(Error::input("validation set is empty"));
    }
    for &lambda in grid {
        check_lambda(lambda)?;
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();

    let mut scores = Vec::with_capacity(sorted.len());
    let mut best = (sorted[0], f64::NEG_INFINITY);
    for lambda in sorted {
        let score = validation_score(items, lambda, objective)?;
        if score > best.1 {
            best = (lambda, score);
        }
        scores.push((lambda, score));
    }
    Ok(GridResult {
        best_lambda: best.0,
        best_score: best.1,
        scores,
    })
}
