use std::collections::BTreeSet;

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{aggregate, ExperimentReport, SpeakerKind, SplitLabel};
use super::{eval_cosine_checked, eval_delta_e};
use crate::colorspace::Rgb;
use crate::dataset::{
    classify_triple, mean_rgb, Fractions, Partition, SampleStore, SplitName, Triple, TrainingVocab,
};
use crate::embeddings::{embed_modifier, EmbeddedModifier, EmbeddingTable};
use crate::error::{Error, Result};
use crate::net::{train, Direction, ModelArtifact, SpeakerNet, TrainConfig, TrainingView};
use crate::seeds;
use crate::speakers::{
    default_grid, grid_search_lambda, pragmatic_select, score_candidates, GridResult, Objective,
    PragmaticConfig, ValidationItem,
};

#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub triples: Vec<Triple>,
    /// Raw, unpartitioned samples.
    pub samples: SampleStore,
    pub embeddings: EmbeddingTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub pragmatic: PragmaticConfig,
    pub fractions: Fractions,
    /// Seed of the per-label vector partition, shared by all runs.
    pub partition_seed: u64,
    /// Number of training triples held up for lambda tuning.
    pub validation_size: usize,
    /// Exclude validation triples from training.
    pub strict_validation: bool,
    pub lambda_grid: Vec<f64>,
    pub objective: Objective,
    /// Skip the grid search and use this lambda.
    pub fixed_lambda: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            pragmatic: PragmaticConfig::default(),
            fractions: Fractions::default(),
            partition_seed: 0,
            validation_size: 100,
            strict_validation: false,
            lambda_grid: default_grid(),
            objective: Objective::Cosine,
            fixed_lambda: None,
        }
    }
}

/// Predictions and scores for one evaluated triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleOutcome {
    pub index: usize,
    pub split: SplitName,
    pub reference: Rgb,
    pub target: Rgb,
    pub s0_pred: Rgb,
    pub s2r_pred: Rgb,
    /// `None` when a shift vector is degenerate (scored as 0 in means).
    pub s0_cosine: Option<f64>,
    pub s2r_cosine: Option<f64>,
    pub s0_delta_e: f64,
    pub s2r_delta_e: f64,
}

impl TripleOutcome {
    fn cosine(&self, speaker: SpeakerKind) -> Option<f64> {
        match speaker {
            SpeakerKind::S0 => self.s0_cosine,
            SpeakerKind::S2R => self.s2r_cosine,
        }
    }

    fn delta_e(&self, speaker: SpeakerKind) -> f64 {
        match speaker {
            SpeakerKind::S0 => self.s0_delta_e,
            SpeakerKind::S2R => self.s2r_delta_e,
        }
    }
}

/// Per-run mean metrics for one split and speaker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub speaker: SpeakerKind,
    pub split: SplitLabel,
    pub cosine_mean: f64,
    pub delta_e_mean: f64,
    pub n_triples: usize,
    pub degenerate_cosine: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridResult>,
    pub metrics: Vec<SplitMetrics>,
    #[serde(skip)]
    pub outcomes: Vec<TripleOutcome>,
    /// The trained speaker and listener of this run.
    #[serde(skip)]
    pub models: Option<(ModelArtifact, ModelArtifact)>,
}

/// Partitions the samples of every label a triple refers to.
pub fn prepare_samples(data: &ExperimentData, cfg: &ExperimentConfig) -> Result<SampleStore> {
    let labels: BTreeSet<&str> = data
        .triples
        .iter()
        .flat_map(|t| [t.ref_label.as_str(), t.target_label.as_str()])
        .collect();
    let mut subset = SampleStore::new();
    for label in labels {
        subset.insert(data.samples.get(label)?.clone());
    }
    subset.partitioned(cfg.fractions, cfg.partition_seed)
}

fn split_metrics(outcomes: &[TripleOutcome]) -> Vec<SplitMetrics> {
    let labels = SplitName::ALL
        .iter()
        .map(|s| SplitLabel::from(*s))
        .chain([SplitLabel::OVERALL]);
    let mut out = Vec::new();
    for speaker in [SpeakerKind::S0, SpeakerKind::S2R] {
        for label in labels.clone() {
            let members: Vec<&TripleOutcome> = outcomes
                .iter()
                .filter(|o| label.contains(o.split))
                .collect();
            if members.is_empty() {
                continue;
            }
            let n = members.len() as f64;
            out.push(SplitMetrics {
                speaker,
                split: label,
                cosine_mean: members
                    .iter()
                    .map(|o| o.cosine(speaker).unwrap_or(0.0))
                    .sum::<f64>()
                    / n,
                delta_e_mean: members.iter().map(|o| o.delta_e(speaker)).sum::<f64>() / n,
                n_triples: members.len(),
                degenerate_cosine: members.iter().filter(|o| o.cosine(speaker).is_none()).count(),
            });
        }
    }
    out
}

fn choose_validation(train_idx: &[usize], size: usize, seed: u64) -> Vec<usize> {
    let size = size.min(train_idx.len());
    let mut picked: Vec<usize> = sample_indices(&mut seeds::rng(seed), train_idx.len(), size)
        .into_iter()
        .map(|i| train_idx[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// One seeded run: train both nets, tune lambda on validation, evaluate every
/// triple on test-partition colors.
pub fn run_single(
    data: &ExperimentData,
    samples: &SampleStore,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<RunResult> {
    cfg.pragmatic.validate()?;
    let train_idx: Vec<usize> = (0..data.triples.len())
        .filter(|&i| data.triples[i].is_train())
        .collect();
    if train_idx.is_empty() {
        return Err(Error::input("no training triples"));
    }
    let validation_idx = choose_validation(
        &train_idx,
        cfg.validation_size,
        seeds::derive_named(seed, "validation"),
    );
    let fit_idx: Vec<usize> = if cfg.strict_validation {
        train_idx
            .iter()
            .copied()
            .filter(|i| validation_idx.binary_search(i).is_err())
            .collect()
    } else {
        train_idx.clone()
    };
    let fit: Vec<&Triple> = fit_idx.iter().map(|&i| &data.triples[i]).collect();
    let view = TrainingView {
        triples: &fit,
        samples,
        partition: Some(Partition::Train),
    };

    let speaker_cfg = TrainConfig {
        seed: seeds::derive_named(seed, "speaker"),
        ..cfg.train.clone()
    };
    let listener_cfg = TrainConfig {
        seed: seeds::derive_named(seed, "listener"),
        ..cfg.train.clone()
    };
    let (speaker, listener) = rayon::join(
        || train(&view, &data.embeddings, Direction::Speaker, &speaker_cfg),
        || train(&view, &data.embeddings, Direction::Listener, &listener_cfg),
    );
    let speaker = speaker?.net;
    let listener = listener?.net;

    let modifiers = data
        .triples
        .iter()
        .map(|t| embed_modifier(&data.embeddings, &t.modifier, cfg.train.oov_policy))
        .collect::<Result<Vec<_>>>()?;

    let (lambda, grid) = match cfg.fixed_lambda {
        Some(lambda) => (lambda, None),
        None => {
            let stream = seeds::derive_named(seed, "validation-sampling");
            let items = validation_idx
                .iter()
                .map(|&i| {
                    let t = &data.triples[i];
                    let mut rng = seeds::rng(seeds::derive(stream, i as u64));
                    let candidates = score_candidates(
                        &speaker,
                        &listener,
                        samples.get(&t.ref_label)?,
                        Some(Partition::Validation),
                        &modifiers[i],
                        &cfg.pragmatic,
                        &mut rng,
                    )?;
                    Ok(ValidationItem {
                        reference: candidates.ref_mean,
                        target: mean_rgb(samples.get(&t.target_label)?, Some(Partition::Validation))?,
                        candidates,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let grid = grid_search_lambda(&items, &cfg.lambda_grid, cfg.objective)?;
            (grid.best_lambda, Some(grid))
        }
    };

    let vocab = TrainingVocab::from_triples(fit.iter().copied());
    let outcomes = evaluate_triples(
        data,
        samples,
        &modifiers,
        &vocab,
        (&speaker, &listener),
        &cfg.pragmatic,
        lambda,
        seeds::derive_named(seed, "test-sampling"),
    )?;
    Ok(RunResult {
        seed,
        lambda,
        grid,
        metrics: split_metrics(&outcomes),
        outcomes,
        models: Some((
            ModelArtifact::new(Direction::Speaker, speaker_cfg, speaker),
            ModelArtifact::new(Direction::Listener, listener_cfg, listener),
        )),
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_triples(
    data: &ExperimentData,
    samples: &SampleStore,
    modifiers: &[EmbeddedModifier],
    vocab: &TrainingVocab,
    (speaker, listener): (&SpeakerNet, &SpeakerNet),
    pragmatic: &PragmaticConfig,
    lambda: f64,
    stream: u64,
) -> Result<Vec<TripleOutcome>> {
    data.triples
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut rng = seeds::rng(seeds::derive(stream, i as u64));
            let cs = score_candidates(
                speaker,
                listener,
                samples.get(&t.ref_label)?,
                Some(Partition::Test),
                &modifiers[i],
                pragmatic,
                &mut rng,
            )?;
            let reference = cs.ref_mean;
            let target = mean_rgb(samples.get(&t.target_label)?, Some(Partition::Test))?;
            let s0_pred = cs.candidates[cs.literal_choice()];
            let (s2r_pred, _) = pragmatic_select(cs, lambda)?;
            Ok(TripleOutcome {
                index: i,
                split: classify_triple(t, vocab),
                reference,
                target,
                s0_pred,
                s2r_pred,
                s0_cosine: eval_cosine_checked(target, reference, s0_pred),
                s2r_cosine: eval_cosine_checked(target, reference, s2r_pred),
                s0_delta_e: eval_delta_e(target, s0_pred),
                s2r_delta_e: eval_delta_e(target, s2r_pred),
            })
        })
        .collect()
}

/// Runs one experiment per seed (in parallel) and aggregates them in seed
/// order.
pub fn run_experiment(
    data: &ExperimentData,
    cfg: &ExperimentConfig,
    seeds: &[u64],
) -> Result<ExperimentReport> {
    if seeds.is_empty() {
        return Err(Error::input("at least one seed is required"));
    }
    let samples = prepare_samples(data, cfg)?;
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            run_single(data, &samples, cfg, seed).map_err(|e| Error::Run {
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(runs))
}
