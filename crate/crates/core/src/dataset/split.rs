use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Triple;

/// Generalization stratum of a test triple relative to the training triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SplitName {
    /// Seen pairing.
    SP,
    /// Reference and modifier both seen, but never together.
    UP,
    /// Unseen reference color, seen modifier.
    URC,
    /// Seen reference color, unseen modifier.
    UM,
    /// Fully unseen.
    FUN,
}

impl SplitName {
    pub const ALL: [SplitName; 5] = [
        SplitName::SP,
        SplitName::UP,
        SplitName::URC,
        SplitName::UM,
        SplitName::FUN,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::SP => "SP",
            SplitName::UP => "UP",
            SplitName::URC => "URC",
            SplitName::UM => "UM",
            SplitName::FUN => "FUN",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reference labels, modifiers, and (reference, modifier) pairs seen in
/// training.
#[derive(Debug, Clone, Default)]
pub struct TrainingVocab {
    pub refs: HashSet<String>,
    pub mods: HashSet<String>,
    pub pairs: HashSet<(String, String)>,
}

impl TrainingVocab {
    pub fn from_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut vocab = TrainingVocab::default();
        for t in triples {
            vocab.refs.insert(t.ref_label.clone());
            vocab.mods.insert(t.modifier.clone());
            vocab.pairs.insert((t.ref_label.clone(), t.modifier.clone()));
        }
        vocab
    }
}

pub fn classify_triple(t: &Triple, vocab: &TrainingVocab) -> SplitName {
    let ref_seen = vocab.refs.contains(&t.ref_label);
    let mod_seen = vocab.mods.contains(&t.modifier);
    match (ref_seen, mod_seen) {
        (true, true) => {
            if vocab
                .pairs
                .contains(&(t.ref_label.clone(), t.modifier.clone()))
            {
                SplitName::SP
            } else {
                SplitName::UP
            }
        }
        (false, true) => SplitName::URC,
        (true, false) => SplitName::UM,
        (false, false) => SplitName::FUN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TripleRole;

    fn t(r: &str, m: &str) -> Triple {
        Triple::new(r, m, format!("{m} {r}"), TripleRole::Train).unwrap()
    }

    #[test]
    fn five_way_taxonomy() {
        let train = [t("green", "dirty"), t("blue", "light")];
        let vocab = TrainingVocab::from_triples(&train);
        assert_eq!(classify_triple(&t("green", "dirty"), &vocab), SplitName::SP);
        assert_eq!(classify_triple(&t("green", "light"), &vocab), SplitName::UP);
        assert_eq!(classify_triple(&t("red", "light"), &vocab), SplitName::URC);
        assert_eq!(classify_triple(&t("blue", "vibrant"), &vocab), SplitName::UM);
        assert_eq!(classify_triple(&t("red", "vibrant"), &vocab), SplitName::FUN);
    }
}
