use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::experiment::RunResult;
use crate::dataset::SplitName;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "split,metric,mean,sd,n_triples,n_runs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerKind {
    /// Literal speaker.
    S0,
    /// Reconstructor-based pragmatic speaker.
    S2R,
}

impl SpeakerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpeakerKind::S0 => "s0",
            SpeakerKind::S2R => "s2r",
        }
    }
}

/// A split stratum or the whole test set.
#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SplitLabel {
    SP,
    UP,
    URC,
    UM,
    FUN,
    OVERALL,
}

impl SplitLabel {
    pub fn contains(self, split: SplitName) -> bool {
        self == SplitLabel::OVERALL || self == SplitLabel::from(split)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SplitLabel::SP => "SP",
            SplitLabel::UP => "UP",
            SplitLabel::URC => "URC",
            SplitLabel::UM => "UM",
            SplitLabel::FUN => "FUN",
            SplitLabel::OVERALL => "OVERALL",
        }
    }
}

impl From<SplitName> for SplitLabel {
    fn from(s: SplitName) -> Self {
        match s {
            SplitName::SP => SplitLabel::SP,
            SplitName::UP => SplitLabel::UP,
            SplitName::URC => SplitLabel::URC,
            SplitName::UM => SplitLabel::UM,
            SplitName::FUN => SplitLabel::FUN,
        }
    }
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Across-run statistics for one speaker on one split. Standard deviations
/// are population deviations of the per-run means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub speaker: SpeakerKind,
    pub split: SplitLabel,
    pub cosine_mean: f64,
    pub cosine_sd: f64,
    pub delta_e_mean: f64,
    pub delta_e_sd: f64,
    pub n_triples: usize,
    pub n_runs: usize,
    /// Total count, over runs, of triples whose cosine was degenerate.
    pub degenerate_cosine: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub sd_convention: String,
    pub seeds: Vec<u64>,
    pub results: Vec<EvalResult>,
    pub runs: Vec<RunResult>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Combines per-run split means into across-run statistics. Row order is
/// fixed: speaker, then split in taxonomy order with OVERALL last.
pub fn aggregate(runs: Vec<RunResult>) -> ExperimentReport {
    let mut keys: Vec<(SpeakerKind, SplitLabel)> = runs
        .iter()
        .flat_map(|r| r.metrics.iter().map(|m| (m.speaker, m.split)))
        .collect();
    keys.sort_unstable();
    keys.dedup();

    let results = keys
        .into_iter()
        .map(|(speaker, split)| {
            let rows: Vec<_> = runs
                .iter()
                .flat_map(|r| r.metrics.iter())
                .filter(|m| m.speaker == speaker && m.split == split)
                .collect();
            let cos: Vec<f64> = rows.iter().map(|m| m.cosine_mean).collect();
            let de: Vec<f64> = rows.iter().map(|m| m.delta_e_mean).collect();
            let (cosine_mean, cosine_sd) = mean_sd(&cos);
            let (delta_e_mean, delta_e_sd) = mean_sd(&de);
            EvalResult {
                speaker,
                split,
                cosine_mean,
                cosine_sd,
                delta_e_mean,
                delta_e_sd,
                n_triples: rows[0].n_triples,
                n_runs: rows.len(),
                degenerate_cosine: rows.iter().map(|m| m.degenerate_cosine).sum(),
            }
        })
        .collect();

    ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        sd_convention: "population".to_string(),
        seeds: runs.iter().map(|r| r.seed).collect(),
        results,
        runs,
    }
}

impl ExperimentReport {
    pub fn result(&self, speaker: SpeakerKind, split: SplitLabel) -> Option<&EvalResult> {
        self.results
            .iter()
            .find(|r| r.speaker == speaker && r.split == split)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per (split, metric) with columns
    /// `split,metric,mean,sd,n_triples,n_runs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.results {
            for (metric, mean, sd) in [
                ("cosine", r.cosine_mean, r.cosine_sd),
                ("delta_e", r.delta_e_mean, r.delta_e_sd),
            ] {
                let _ = writeln!(
                    out,
                    "{},{}_{},{:.6},{:.6},{},{}",
                    r.split,
                    r.speaker.as_str(),
                    metric,
                    mean,
                    sd,
                    r.n_triples,
                    r.n_runs
                );
            }
        }
        out
    }
}
