//! Control words: the nouns and verbs of an agent response, fed to the
//! generator as lexical hints.

mod tagger;

pub use tagger::{tagger_by_name, LexRulesTagger, PosTagger, Tagged, LEXRULES_NAME, LEXRULES_VERSION};

use std::collections::{BTreeSet, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::text::{is_punctuation_only, split_pieces, PieceKind};
use crate::{Error, Result};

/// Tags kept as control words. Finite verb forms (VBD/VBP/VBZ) and modals are
/// left out, as are forms of the auxiliaries below.
pub const NOUN_TAGS: [&str; 4] = ["NN", "NNS", "NNP", "NNPS"];
pub const VERB_TAGS: [&str; 3] = ["VB", "VBG", "VBN"];

const AUXILIARIES: &[&str] = &[
    "be", "am", "is", "are", "was", "were", "been", "being", "'m", "'s", "'re", "have", "has", "had", "having",
    "'ve", "do", "does", "did", "done", "doing",
];

pub fn is_control_tag(tag: &str) -> bool {
    NOUN_TAGS.contains(&tag) || VERB_TAGS.contains(&tag)
}

/// Control words of one response. Surface casing is preserved; no two words
/// are equal ignoring case; order is first occurrence in the response.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlWordSet {
    pub words: Vec<String>,
    pub source_response_id: String,
}

impl ControlWordSet {
    pub fn new(words: Vec<String>, source_response_id: impl Into<String>) -> Self {
        ControlWordSet {
            words,
            source_response_id: source_response_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn as_set(&self) -> BTreeSet<&str> {
        self.words.iter().map(String::as_str).collect()
    }

    fn with_words(&self, words: Vec<String>) -> Self {
        ControlWordSet {
            words,
            source_response_id: self.source_response_id.clone(),
        }
    }
}

/// Extracts the nouns and non-auxiliary, non-finite verbs of `response`.
pub fn extract_control_words(response: &str, response_id: &str, tagger: &dyn PosTagger) -> Result<ControlWordSet> {
    if response.trim().is_empty() {
        return Err(Error::invalid("cannot extract control words from an empty response"));
    }
    let tagged = tagger.tag(response)?;
    Ok(ControlWordSet::new(select_control_words(&tagged), response_id))
}

pub fn select_control_words(tagged: &[Tagged]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut words = Vec::new();
    for t in tagged {
        if !is_control_tag(t.tag) || is_punctuation_only(&t.word) {
            continue;
        }
        let lower = t.word.to_lowercase();
        if AUXILIARIES.contains(&lower.as_str()) {
            continue;
        }
        if seen.insert(lower) {
            words.push(t.word.clone());
        }
    }
    words
}

/// Number of words kept at a sampling rate: ⌈rate·n⌉, with a small tolerance
/// so that e.g. 0.6·5 counts as exactly 3.
pub fn sampled_count(rate: f64, n: usize) -> usize {
    ((rate * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Keeps ⌈rate·n⌉ words chosen uniformly without replacement, in their original order.
pub fn sample_control_words(set: &ControlWordSet, rate: f64, rng: &mut impl Rng) -> Result<ControlWordSet> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(format!("sampling rate {rate} outside [0, 1]")));
    }
    let k = sampled_count(rate, set.len()).min(set.len());
    let mut idx = rand::seq::index::sample(rng, set.len(), k).into_vec();
    idx.sort_unstable();
    Ok(set.with_words(idx.into_iter().map(|i| set.words[i].clone()).collect()))
}

/// Number of words replaced at a corruption fraction: fraction·n rounded half-up.
pub fn corrupted_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 0.5 + 1e-9).floor() as usize
}

const MAX_REDRAWS: usize = 100;

/// Replaces fraction·n (half-up) randomly chosen words with draws from `vocab`.
/// A draw that collides with any original word or a word already in the output
/// is redrawn, up to 100 times, after which the collision is accepted.
pub fn corrupt_control_words(
    set: &ControlWordSet,
    vocab: &[String],
    fraction: f64,
    rng: &mut impl Rng,
) -> Result<ControlWordSet> {
    if vocab.is_empty() {
        return Err(Error::invalid("corruption vocabulary is empty"));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!("corruption fraction {fraction} outside [0, 1]")));
    }
    if set.is_empty() {
        return Ok(set.clone());
    }
    let k = corrupted_count(fraction, set.len()).min(set.len());
    let mut replaced = rand::seq::index::sample(rng, set.len(), k).into_vec();
    replaced.sort_unstable();
    let originals: HashSet<String> = set.words.iter().map(|w| w.to_lowercase()).collect();
    let mut taken: HashSet<String> = set
        .words
        .iter()
        .enumerate()
        .filter(|(i, _)| !replaced.contains(i))
        .map(|(_, w)| w.to_lowercase())
        .collect();
    let mut words = set.words.clone();
    for &i in &replaced {
        let mut draw = vocab.choose(rng).expect("non-empty vocab").clone();
        for _ in 0..MAX_REDRAWS {
            let key = draw.to_lowercase();
            if !originals.contains(&key) && !taken.contains(&key) {
                break;
            }
            draw = vocab.choose(rng).expect("non-empty vocab").clone();
        }
        taken.insert(draw.to_lowercase());
        words[i] = draw;
    }
    Ok(set.with_words(words))
}

/// A uniformly random ordering of the words.
pub fn order_for_prompt(set: &ControlWordSet, rng: &mut impl Rng) -> Vec<String> {
    let mut words = set.words.clone();
    words.shuffle(rng);
    words
}

/// The corruption vocabulary: distinct lowercased alphabetic words of the
/// training responses, sorted.
pub fn build_vocab<'a>(responses: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut vocab = BTreeSet::new();
    for r in responses {
        for p in split_pieces(r) {
            let w = p.text(r);
            if p.kind == PieceKind::Word && w.chars().all(char::is_alphabetic) {
                vocab.insert(w.to_lowercase());
            }
        }
    }
    vocab.into_iter().collect()
}
