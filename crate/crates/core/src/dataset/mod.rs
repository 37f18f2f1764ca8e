//! Triples, per-label color samples, and the train/test split taxonomy.

mod samples;
mod split;
mod synthetic;
mod triples;

pub use samples::{
    load_samples, mean_rgb, partition_samples, read_samples, sample_reference, write_samples,
    Fractions, LabelSamples, Partition, SampleStore,
};
pub use split::{classify_triple, SplitName, TrainingVocab};
pub use synthetic::{generate_synthetic, mod_label, ref_label, CorpusFiles, SyntheticConfig, SyntheticCorpus};
pub use triples::{load_triples, read_triples, write_triples, Triple, TripleRole};
