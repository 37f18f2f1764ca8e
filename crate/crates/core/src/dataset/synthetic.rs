//! Hermetic corpora where every modifier is a fixed RGB displacement.
//!
//! Reference label `ref{i}` has vectors scattered around a base color.
//! Modifier `mod{j}` carries a displacement `d_j`; the target label
//! `mod{j} ref{i}` receives, for each reference vector, that vector plus `d_j`
//! plus Gaussian noise. Every modifier token gets a random unit embedding.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{write_samples, write_triples, SampleStore, Triple, TripleRole};
use crate::colorspace::Rgb;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub num_refs: usize,
    pub num_mods: usize,
    pub vectors_per_label: usize,
    /// Standard deviation of the noise added to target vectors.
    pub noise_sd: f64,
    /// Spread of reference vectors around their base color (truncated at 3 sd).
    pub label_sd: f64,
    pub embed_dim: usize,
    /// The last `held_out_refs` references never appear in training.
    pub held_out_refs: usize,
    /// The last `held_out_mods` modifiers never appear in training.
    pub held_out_mods: usize,
    /// Number of seen (reference, modifier) pairs withheld from training.
    pub held_out_pairs: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_refs: 8,
            num_mods: 6,
            vectors_per_label: 60,
            noise_sd: 0.0,
            label_sd: 6.0,
            embed_dim: 16,
            held_out_refs: 0,
            held_out_mods: 0,
            held_out_pairs: 0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// A corpus that populates all five split strata.
    pub fn with_held_out(mut self) -> Self {
        self.held_out_refs = 2;
        self.held_out_mods = 2;
        self.held_out_pairs = 2;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.num_refs == 0 || self.num_mods == 0 || self.vectors_per_label == 0 || self.embed_dim == 0 {
            return Err(Error::input("synthetic corpus counts must be positive"));
        }
        if !(self.noise_sd >= 0.0 && self.label_sd >= 0.0) {
            return Err(Error::input("noise and label spread must be non-negative"));
        }
        if self.held_out_refs >= self.num_refs || self.held_out_mods >= self.num_mods {
            return Err(Error::input(
                "at least one reference and one modifier must remain for training",
            ));
        }
        let seen_refs = self.num_refs - self.held_out_refs;
        let seen_mods = self.num_mods - self.held_out_mods;
        if self.held_out_pairs > 0 && (seen_mods < 2 || seen_refs < 2 || self.held_out_pairs > seen_refs) {
            return Err(Error::input(
                "held-out pairs need two seen modifiers, two seen references, and at most one pair per seen reference",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub triples: Vec<Triple>,
    pub samples: SampleStore,
    pub embeddings: EmbeddingTable,
    /// Displacement of every modifier, in 0-255 RGB units.
    pub displacements: BTreeMap<String, [f64; 3]>,
}

pub fn ref_label(i: usize) -> String {
    format!("ref{i}")
}

pub fn mod_label(j: usize) -> String {
    format!("mod{j}")
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let mut rng = seeds::rng(seeds::derive_named(cfg.seed, "synthetic"));

    // Bases and displacements are bounded so no vector needs clamping when
    // there is no noise: 70 - 45 - 3 * label_sd stays in gamut for the default spread.
    let bases: Vec<[f64; 3]> = (0..cfg.num_refs)
        .map(|_| std::array::from_fn(|_| rng.gen_range(70.0..185.0)))
        .collect();
    let displacements: Vec<[f64; 3]> = (0..cfg.num_mods)
        .map(|_| loop {
            let d: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-45.0..45.0));
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm >= 25.0 {
                break d;
            }
        })
        .collect();

    let mut samples = SampleStore::new();
    let mut ref_vectors = Vec::with_capacity(cfg.num_refs);
    for (i, base) in bases.iter().enumerate() {
        let vectors: Vec<Rgb> = (0..cfg.vectors_per_label)
            .map(|_| {
                Rgb::from_array(std::array::from_fn(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    base[c] + cfg.label_sd * z.clamp(-3.0, 3.0)
                }))
            })
            .collect();
        for v in &vectors {
            samples.push(&ref_label(i), *v);
        }
        ref_vectors.push(vectors);
    }

    let noise = Normal::new(0.0, cfg.noise_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::input(e.to_string()))?;
    let seen_refs = cfg.num_refs - cfg.held_out_refs;
    let seen_mods = cfg.num_mods - cfg.held_out_mods;
    let mut triples = Vec::new();
    for (i, vectors) in ref_vectors.iter().enumerate() {
        for (j, d) in displacements.iter().enumerate() {
            let target = format!("{} {}", mod_label(j), ref_label(i));
            for v in vectors {
                let shifted = std::array::from_fn(|c| {
                    let eps = if cfg.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    v.to_array()[c] + d[c] + eps
                });
                samples.push(&target, Rgb::from_array(shifted));
            }
            let held_pair = i < cfg.held_out_pairs && j == i % seen_mods;
            let role = if i < seen_refs && j < seen_mods && !held_pair {
                TripleRole::Train
            } else {
                TripleRole::Test
            };
            triples.push(Triple::new(ref_label(i), mod_label(j), target, role)?);
        }
    }

    let mut embeddings = EmbeddingTable::new(cfg.embed_dim)?;
    for j in 0..cfg.num_mods {
        let v: Vec<f64> = (0..cfg.embed_dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        embeddings.insert(mod_label(j), v.iter().map(|x| x / norm).collect())?;
    }

    Ok(SyntheticCorpus {
        triples,
        samples,
        embeddings,
        displacements: (0..cfg.num_mods)
            .map(|j| (mod_label(j), displacements[j]))
            .collect(),
    })
}

/// Paths written by [`SyntheticCorpus::write_to`].
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub triples: PathBuf,
    pub samples: PathBuf,
    pub embeddings: PathBuf,
}

impl SyntheticCorpus {
    /// Writes `triples.csv`, `samples.csv`, and `embeddings.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<CorpusFiles> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = CorpusFiles {
            triples: dir.join("triples.csv"),
            samples: dir.join("samples.csv"),
            embeddings: dir.join("embeddings.txt"),
        };
        let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e));
        write_triples(&self.triples, create(&files.triples)?)?;
        write_samples(&self.samples, create(&files.samples)?)?;
        self.embeddings.save(&files.embeddings)?;
        Ok(files)
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::dataset::{classify_triple, mean_rgb, SplitName, TrainingVocab};

    #[test]
    fn zero_noise_targets_are_exact_shifts() {
        let corpus = generate_synthetic(&SyntheticConfig::default()).unwrap();
        assert_eq!(corpus.triples.len(), 48);
        for t in &corpus.triples {
            let r = mean_rgb(corpus.samples.get(&t.ref_label).unwrap(), None).unwrap();
            let g = mean_rgb(corpus.samples.get(&t.target_label).unwrap(), None).unwrap();
            let d = corpus.displacements[&t.modifier];
            for c in 0..3 {
                assert!((g.to_array()[c] - r.to_array()[c] - d[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn seeded_corpora_are_identical() {
        let cfg = SyntheticConfig { seed: 5, noise_sd: 2.0, ..Default::default() };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.triples, b.triples);
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.embeddings, b.embeddings);
        let c = generate_synthetic(&SyntheticConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn embeddings_are_unit_vectors() {
        let corpus = generate_synthetic(&SyntheticConfig::default()).unwrap();
        assert_eq!(corpus.embeddings.len(), 6);
        for token in corpus.embeddings.tokens() {
            let v = corpus.embeddings.get(token).unwrap();
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn held_out_config_populates_all_splits() {
        let corpus = generate_synthetic(&SyntheticConfig::default().with_held_out()).unwrap();
        let vocab = TrainingVocab::from_triples(corpus.triples.iter().filter(|t| t.is_train()));
        for split in SplitName::ALL {
            let n = corpus
                .triples
                .iter()
                .filter(|t| classify_triple(t, &vocab) == split)
                .count();
            assert!(n > 0, "{split} is empty");
        }
    }

    #[test]
    fn rejects_degenerate_configs() {
        assert!(generate_synthetic(&SyntheticConfig { num_refs: 0, ..Default::default() }).is_err());
        assert!(generate_synthetic(&SyntheticConfig { held_out_mods: 6, ..Default::default() }).is_err());
    }
}
