//! Literal speaker, reconstructor-based listener, and pragmatic speaker.
//!
//! For a reference label and a modifier the literal speaker draws `n`
//! reference samples, pushes each through the speaker net, and scores the
//! resulting candidates by how far they move away from the mean reference
//! color. The listener maps each candidate back through the listener net and
//! prefers candidates whose reconstruction lands close to that mean. The
//! pragmatic speaker mixes both log-distributions with weight `lambda`.
//!
//! All distributions are kept as normalized log-probabilities.

mod grid;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::colorspace::{delta_e_rgb, Rgb};
use crate::dataset::{mean_rgb, sample_reference, LabelSamples, Partition};
use crate::embeddings::EmbeddedModifier;
use crate::error::{Error, Result};
use crate::net::SpeakerNet;

pub use grid::{default_grid, grid_search_lambda, GridResult, Objective, ValidationItem};

/// Distance used inside the speaker and listener distributions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    /// CIEDE2000 between the Lab conversions of both colors.
    #[default]
    DeltaE2000,
    /// `1 - cos` of the two RGB vectors taken from the origin.
    CosineRgb,
}

impl DistanceMetric {
    pub fn distance(self, a: Rgb, b: Rgb) -> f64 {
        match self {
            DistanceMetric::DeltaE2000 => delta_e_rgb(a, b),
            DistanceMetric::CosineRgb => {
                let (x, y) = (a.to_array(), b.to_array());
                let dot: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
                let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
                let ny = y.iter().map(|q| q * q).sum::<f64>().sqrt();
                if nx == 0.0 || ny == 0.0 {
                    0.0
                } else {
                    1.0 - dot / (nx * ny)
                }
            }
        }
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta_e_2000" | "delta-e" | "deltae" => Ok(DistanceMetric::DeltaE2000),
            "cosine_rgb" | "cosine" => Ok(DistanceMetric::CosineRgb),
            other => Err(Error::input(format!("unknown distance metric {other:?}"))),
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMetric::DeltaE2000 => "delta_e_2000",
            DistanceMetric::CosineRgb => "cosine_rgb",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PragmaticConfig {
    pub lambda: f64,
    /// Candidates per query.
    pub n: usize,
    /// Survey draws averaged into each reference sample.
    pub k: usize,
    pub metric: DistanceMetric,
    /// Distances are divided by this before exponentiation.
    pub temperature: f64,
}

impl Default for PragmaticConfig {
    fn default() -> Self {
        PragmaticConfig {
            lambda: 0.33,
            n: 10,
            k: 100,
            metric: DistanceMetric::DeltaE2000,
            temperature: 1.0,
        }
    }
}

impl PragmaticConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if self.n == 0 || self.k == 0 {
            return Err(Error::input("n and k must be positive"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::input("temperature must be positive"));
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::input(format!("lambda must lie in [0, 1], got {lambda}")))
    }
}

/// `x_i - logsumexp(x)`, with the maximum subtracted first.
pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![-(scores.len() as f64).ln(); scores.len()];
    }
    let sum: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    let log_z = max + sum.ln();
    scores.iter().map(|s| s - log_z).collect()
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Literal speaker log-probabilities: larger divergence from the reference
/// mean is more probable.
pub fn literal_log_probs(distances: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = distances.iter().map(|d| d / temperature).collect();
    log_softmax(&scaled)
}

/// Listener log-probabilities: the renormalized inverse of the softmax over
/// reconstruction distances, i.e. a softmax over negated distances.
pub fn listener_log_probs(distances: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = distances.iter().map(|d| -d / temperature).collect();
    log_softmax(&scaled)
}

/// Unnormalized pragmatic scores `lambda * listener + (1 - lambda) * literal`.
pub fn pragmatic_scores(listener: &[f64], literal: &[f64], lambda: f64) -> Vec<f64> {
    listener
        .iter()
        .zip(literal)
        .map(|(l, s)| lambda * l + (1.0 - lambda) * s)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<Rgb>,
    /// Mean color of the reference label's partition.
    pub ref_mean: Rgb,
    pub s0_logprob: Vec<f64>,
    pub l1r_logprob: Option<Vec<f64>>,
    pub s2r_logprob: Option<Vec<f64>>,
}

impl CandidateSet {
    /// Scores `candidates` with the literal speaker distribution.
    pub fn from_candidates(
        candidates: Vec<Rgb>,
        ref_mean: Rgb,
        metric: DistanceMetric,
        temperature: f64,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::input("candidate set must not be empty"));
        }
        let distances: Vec<f64> = candidates
            .iter()
            .map(|c| metric.distance(*c, ref_mean))
            .collect();
        Ok(CandidateSet {
            s0_logprob: literal_log_probs(&distances, temperature),
            candidates,
            ref_mean,
            l1r_logprob: None,
            s2r_logprob: None,
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Fills the listener distribution from reconstruction distances,
    /// one per candidate.
    pub fn set_listener_distances(&mut self, distances: &[f64], temperature: f64) -> Result<()> {
        if distances.len() != self.candidates.len() {
            return Err(Error::Shape {
                what: "listener distances",
                expected: self.candidates.len(),
                found: distances.len(),
            });
        }
        self.l1r_logprob = Some(listener_log_probs(distances, temperature));
        self.s2r_logprob = None;
        Ok(())
    }

    pub fn literal_choice(&self) -> usize {
        argmax(&self.s0_logprob)
    }

    pub fn listener_choice(&self) -> Option<usize> {
        self.l1r_logprob.as_deref().map(argmax)
    }

    pub fn pragmatic_choice(&self) -> Option<usize> {
        self.s2r_logprob.as_deref().map(argmax)
    }
}

/// Generates `cfg.n` candidates for a reference label and scores them with the
/// literal speaker.
pub fn literal_candidates<R: rand::Rng + ?Sized>(
    speaker: &SpeakerNet,
    samples: &LabelSamples,
    partition: Option<Partition>,
    m: &EmbeddedModifier,
    cfg: &PragmaticConfig,
    rng: &mut R,
) -> Result<CandidateSet> {
    cfg.validate()?;
    let refs = sample_reference(samples, partition, cfg.n, cfg.k, rng)?;
    let ref_mean = mean_rgb(samples, partition)?;
    let candidates = refs
        .into_iter()
        .map(|c| speaker.predict(c, m))
        .collect::<Result<Vec<_>>>()?;
    CandidateSet::from_candidates(candidates, ref_mean, cfg.metric, cfg.temperature)
}

/// Reconstructs the reference from every candidate and fills the listener
/// distribution.
pub fn listener_scores(
    listener: &SpeakerNet,
    mut cs: CandidateSet,
    m: &EmbeddedModifier,
    cfg: &PragmaticConfig,
) -> Result<CandidateSet> {
    let distances = cs
        .candidates
        .iter()
        .map(|c| Ok(cfg.metric.distance(listener.predict(*c, m)?, cs.ref_mean)))
        .collect::<Result<Vec<_>>>()?;
    cs.set_listener_distances(&distances, cfg.temperature)?;
    Ok(cs)
}

/// Combines both distributions and picks the most probable candidate. The
/// argmax runs on the unnormalized mixture, so `lambda = 0` and `lambda = 1`
/// reproduce the literal and listener choices exactly.
pub fn pragmatic_select(mut cs: CandidateSet, lambda: f64) -> Result<(Rgb, CandidateSet)> {
    check_lambda(lambda)?;
    let listener = cs
        .l1r_logprob
        .as_deref()
        .ok_or_else(|| Error::input("listener scores missing from candidate set"))?;
    let mixed = pragmatic_scores(listener, &cs.s0_logprob, lambda);
    let chosen = cs.candidates[argmax(&mixed)];
    cs.s2r_logprob = Some(log_softmax(&mixed));
    Ok((Rgb::new(chosen.r, chosen.g, chosen.b), cs))
}

/// Literal candidates followed by listener scoring.
pub fn score_candidates<R: rand::Rng + ?Sized>(
    speaker: &SpeakerNet,
    listener: &SpeakerNet,
    samples: &LabelSamples,
    partition: Option<Partition>,
    m: &EmbeddedModifier,
    cfg: &PragmaticConfig,
    rng: &mut R,
) -> Result<CandidateSet> {
    let cs = literal_candidates(speaker, samples, partition, m, cfg, rng)?;
    listener_scores(listener, cs, m, cfg)
}
