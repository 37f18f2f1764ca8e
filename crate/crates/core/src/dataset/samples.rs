use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::colorspace::Rgb;
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Validation, Partition::Test];
}

/// Per-label fractions of vectors assigned to each partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for Fractions {
    fn default() -> Self {
        Fractions {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

impl Fractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!(
                "partition fractions must be non-negative and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }

    /// Vector counts for a label with `n` vectors: validation and test are
    /// rounded, train takes the rest.
    fn counts(&self, n: usize) -> [usize; 3] {
        let validation = (n as f64 * self.validation).round() as usize;
        let test = (n as f64 * self.test).round() as usize;
        let train = n.saturating_sub(validation + test);
        [train, validation, test]
    }
}

/// All survey draws for one color label, optionally tagged with partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSamples {
    label: String,
    vectors: Vec<Rgb>,
    tags: Option<Vec<Partition>>,
}

impl LabelSamples {
    pub fn new(label: impl Into<String>, vectors: Vec<Rgb>) -> Self {
        LabelSamples {
            label: label.into(),
            vectors,
            tags: None,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn vectors(&self) -> &[Rgb] {
        &self.vectors
    }

    pub fn tags(&self) -> Option<&[Partition]> {
        self.tags.as_deref()
    }

    pub fn is_partitioned(&self) -> bool {
        self.tags.is_some()
    }

    /// Vectors of one partition, or every vector when `subset` is `None`.
    pub fn subset(&self, subset: Option<Partition>) -> Result<Vec<Rgb>> {
        let Some(p) = subset else {
            return Ok(self.vectors.clone());
        };
        let tags = self.tags.as_ref().ok_or_else(|| {
            Error::input(format!("samples for {:?} are not partitioned", self.label))
        })?;
        Ok(self
            .vectors
            .iter()
            .zip(tags)
            .filter(|(_, t)| **t == p)
            .map(|(v, _)| *v)
            .collect())
    }

    fn non_empty_subset(&self, subset: Option<Partition>) -> Result<Vec<Rgb>> {
        let vectors = self.subset(subset)?;
        if vectors.is_empty() {
            return Err(Error::input(format!(
                "label {:?} has no vectors in partition {subset:?}",
                self.label
            )));
        }
        Ok(vectors)
    }
}

/// Tags each vector of `samples` with a partition. The assignment is a
/// seeded shuffle, so the same seed always reproduces the same tags.
pub fn partition_samples(
    samples: &LabelSamples,
    fractions: Fractions,
    seed: u64,
) -> Result<LabelSamples> {
    fractions.validate()?;
    let n = samples.vectors.len();
    let counts = fractions.counts(n);
    let wanted = [fractions.train, fractions.validation, fractions.test];
    for ((count, fraction), p) in counts.iter().zip(wanted).zip(Partition::ALL) {
        if fraction > 0.0 && *count == 0 {
            return Err(Error::input(format!(
                "label {:?} has {n} vectors, too few to fill the {p:?} partition",
                samples.label
            )));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeds::rng(seed));
    let mut tags = vec![Partition::Train; n];
    for (rank, &idx) in order.iter().enumerate() {
        tags[idx] = if rank < counts[0] {
            Partition::Train
        } else if rank < counts[0] + counts[1] {
            Partition::Validation
        } else {
            Partition::Test
        };
    }
    Ok(LabelSamples {
        label: samples.label.clone(),
        vectors: samples.vectors.clone(),
        tags: Some(tags),
    })
}

fn running_mean<'a>(vectors: impl IntoIterator<Item = &'a Rgb>) -> Rgb {
    let mut mean = [0.0; 3];
    for (i, v) in vectors.into_iter().enumerate() {
        let k = (i + 1) as f64;
        for (m, x) in mean.iter_mut().zip(v.to_array()) {
            *m += (x - *m) / k;
        }
    }
    Rgb::from_array(mean)
}

/// Per-channel mean over a partition (or all vectors).
pub fn mean_rgb(samples: &LabelSamples, subset: Option<Partition>) -> Result<Rgb> {
    let vectors = samples.non_empty_subset(subset)?;
    Ok(running_mean(&vectors))
}

/// Draws `n` reference samples, each the mean of `k` draws with replacement
/// from the partition's vectors.
pub fn sample_reference<R: Rng + ?Sized>(
    samples: &LabelSamples,
    subset: Option<Partition>,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Rgb>> {
    if n == 0 || k == 0 {
        return Err(Error::input("sample count and draws per sample must be positive"));
    }
    let vectors = samples.non_empty_subset(subset)?;
    Ok((0..n)
        .map(|_| running_mean((0..k).map(|_| &vectors[rng.gen_range(0..vectors.len())])))
        .collect())
}

/// Label-indexed collection of samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleStore {
    labels: BTreeMap<String, LabelSamples>,
}

impl SampleStore {
    pub fn new() -> Self {
        SampleStore::default()
    }

    pub fn insert(&mut self, samples: LabelSamples) {
        self.labels.insert(samples.label.clone(), samples);
    }

    pub fn push(&mut self, label: &str, color: Rgb) {
        self.labels
            .entry(label.to_string())
            .or_insert_with(|| LabelSamples::new(label, Vec::new()))
            .vectors
            .push(color);
    }

    pub fn get(&self, label: &str) -> Result<&LabelSamples> {
        self.labels
            .get(label)
            .ok_or_else(|| Error::input(format!("no color samples for label {label:?}")))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.contains_key(label)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabelSamples> {
        self.labels.values()
    }

    /// Partitions every label with its own stream derived from `seed` and the
    /// label name.
    pub fn partitioned(&self, fractions: Fractions, seed: u64) -> Result<SampleStore> {
        let mut out = SampleStore::new();
        for samples in self.labels.values() {
            let label_seed = seeds::derive_named(seed, &samples.label);
            out.insert(partition_samples(samples, fractions, label_seed)?);
        }
        Ok(out)
    }
}

/// Parses a samples CSV with header `label,r,g,b`, one row per survey draw.
pub fn read_samples<R: Read>(reader: R, origin: &Path) -> Result<SampleStore> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        Error::format(origin, line, e.to_string())
    };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let mut store = SampleStore::new();
    if headers.is_empty() {
        return Ok(store);
    }
    if headers.iter().ne(["label", "r", "g", "b"]) {
        return Err(Error::format(origin, 1, "expected header label,r,g,b"));
    }
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 4 {
            return Err(Error::format(
                origin,
                line,
                format!("expected 4 fields, found {}", record.len()),
            ));
        }
        if record[0].is_empty() {
            return Err(Error::format(origin, line, "empty label"));
        }
        let mut channels = [0.0; 3];
        for (c, field) in channels.iter_mut().zip(record.iter().skip(1)) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::format(origin, line, format!("invalid channel {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::format(origin, line, "non-finite channel"));
            }
            *c = v;
        }
        store.push(&record[0], Rgb::from_array(channels));
    }
    Ok(store)
}

pub fn load_samples(path: &Path) -> Result<SampleStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_samples(file, path)
}

pub fn write_samples<W: Write>(store: &SampleStore, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::input(format!("writing samples: {e}"));
    w.write_record(["label", "r", "g", "b"]).map_err(to_err)?;
    for samples in store.iter() {
        for v in samples.vectors() {
            w.write_record([
                samples.label().to_string(),
                v.r.to_string(),
                v.g.to_string(),
                v.b.to_string(),
            ])
            .map_err(to_err)?;
        }
    }
    w.flush()
        .map_err(|e| Error::input(format!("writing samples: {e}")))?;
    Ok(())
}
