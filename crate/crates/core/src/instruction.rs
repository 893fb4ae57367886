//! Relation-tuning instances: one templated question per triplet, a positive
//! response naming the triplet, and negatives drawn from mutually exclusive
//! relation categories.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    normalize_phrase, InstructionInstance, PredicateVocabulary, RelationCategory, RelationTriplet,
};
use crate::seed;

/// Which categories may serve as negatives for a positive category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterNegativeMap {
    allowed: BTreeMap<RelationCategory, BTreeSet<RelationCategory>>,
}

impl Default for CounterNegativeMap {
    /// spatial ↔ possessive and semantic ↔ possessive are exclusive;
    /// spatial and semantic may co-occur.
    fn default() -> Self {
        use RelationCategory::*;
        let allowed = BTreeMap::from([
            (Spatial, BTreeSet::from([Possessive])),
            (Possessive, BTreeSet::from([Spatial, Semantic])),
            (Semantic, BTreeSet::from([Possessive])),
        ]);
        Self { allowed }
    }
}

impl CounterNegativeMap {
    pub fn new(allowed: BTreeMap<RelationCategory, BTreeSet<RelationCategory>>) -> Result<Self> {
        for category in RelationCategory::ALL {
            let set = allowed.get(&category).ok_or_else(|| {
                Error::InvalidArgument(format!("no negatives listed for `{category}`"))
            })?;
            if set.is_empty() || set.contains(&category) {
                return Err(Error::InvalidArgument(format!(
                    "negatives for `{category}` must be non-empty and exclude itself"
                )));
            }
        }
        Ok(Self { allowed })
    }

    pub fn allowed(&self, category: RelationCategory) -> &BTreeSet<RelationCategory> {
        &self.allowed[&category]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeMode {
    Counter,
    Random,
    None,
}

impl FromStr for NegativeMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "counter" => Ok(NegativeMode::Counter),
            "random" => Ok(NegativeMode::Random),
            "none" => Ok(NegativeMode::None),
            other => Err(format!("expected counter, random or none, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationConfig {
    pub negatives_per_sample: usize,
    pub negative_mode: NegativeMode,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            negatives_per_sample: 1,
            negative_mode: NegativeMode::Counter,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn effective_negatives(&self) -> usize {
        match self.negative_mode {
            NegativeMode::None => 0,
            _ => self.negatives_per_sample,
        }
    }
}

pub fn categorize(predicate: &str, vocab: &PredicateVocabulary) -> Result<RelationCategory> {
    vocab.category_of(predicate)
}

pub fn render_question(triplet: &RelationTriplet, category: RelationCategory) -> String {
    format!(
        "Is there a prominent {} relation between {} (subject) and {} (object) in the image?",
        category.name(),
        triplet.subject,
        triplet.object
    )
}

/// The positive slot carries the specific predicate phrase, not the category.
pub fn render_positive(triplet: &RelationTriplet) -> String {
    format!("Yes, {} {} {}.", triplet.subject, triplet.predicate, triplet.object)
}

pub fn render_negative(triplet: &RelationTriplet, category: RelationCategory) -> String {
    format!(
        "No, there is no prominent {} relation between {} and {}.",
        category.name(),
        triplet.subject,
        triplet.object
    )
}

/// True when `text` reads as a negative ("No, ...") response.
pub fn is_negative_text(text: &str) -> bool {
    let t = text.trim_start().to_ascii_lowercase();
    t == "no" || t.starts_with("no,") || t.starts_with("no ") || t.starts_with("no.")
}

/// Recovers the predicted predicate from a positive response about
/// `subject` and `object`. Returns `None` when the text does not have the
/// "Yes, ⟨s⟩ ⟨p⟩ ⟨o⟩." shape for this pair.
pub fn parse_positive(text: &str, subject: &str, object: &str) -> Option<String> {
    let phrase = positive_phrase(text)?;
    let subject = format!("{} ", normalize_phrase(subject));
    let object = format!(" {}", normalize_phrase(object));
    let middle = phrase
        .strip_prefix(&subject)?
        .strip_suffix(&object)?
        .trim();
    if middle.is_empty() {
        None
    } else {
        Some(middle.to_string())
    }
}

/// Normalized "⟨s⟩ ⟨p⟩ ⟨o⟩" phrase of a positive response.
pub fn positive_phrase(text: &str) -> Option<String> {
    if is_negative_text(text) {
        return None;
    }
    let t = text.trim();
    let t = match t.get(..4) {
        Some(head) if head.eq_ignore_ascii_case("yes,") => &t[4..],
        _ => t,
    };
    let t = t.trim().trim_end_matches('.');
    let phrase = normalize_phrase(t);
    (!phrase.is_empty()).then_some(phrase)
}

/// Negative categories and their rendered responses for one triplet.
///
/// Candidates are shuffled with a stream keyed by the triplet id, so output
/// does not depend on the order triplets are processed in. When more
/// negatives are requested than candidates exist, the shuffled candidates
/// repeat round-robin.
pub fn mine_negatives(
    triplet: &RelationTriplet,
    category: RelationCategory,
    map: &CounterNegativeMap,
    cfg: &GenerationConfig,
) -> Vec<(RelationCategory, String)> {
    let count = cfg.effective_negatives();
    if count == 0 {
        return Vec::new();
    }
    let mut candidates: Vec<RelationCategory> = match cfg.negative_mode {
        NegativeMode::Counter => map.allowed(category).iter().copied().collect(),
        NegativeMode::Random => RelationCategory::ALL
            .into_iter()
            .filter(|c| *c != category)
            .collect(),
        NegativeMode::None => unreachable!("effective count is zero"),
    };
    let mut rng = seed::rng(cfg.seed, &format!("negatives/{}", triplet.id));
    candidates.shuffle(&mut rng);
    candidates
        .iter()
        .cycle()
        .take(count)
        .map(|c| (*c, render_negative(triplet, *c)))
        .collect()
}

/// One instance per triplet, in input order. The instance id is the
/// triplet id.
pub fn generate(
    triplets: &[RelationTriplet],
    vocab: &PredicateVocabulary,
    map: &CounterNegativeMap,
    cfg: &GenerationConfig,
) -> Result<Vec<InstructionInstance>> {
    triplets
        .iter()
        .map(|t| {
            let category = categorize(&t.predicate, vocab)?;
            let (negative_categories, negative_responses) =
                mine_negatives(t, category, map, cfg).into_iter().unzip();
            Ok(InstructionInstance {
                instance_id: t.id.clone(),
                triplet_id: t.id.clone(),
                question: render_question(t, category),
                positive_response: render_positive(t),
                negative_responses,
                positive_category: category,
                negative_categories,
            })
        })
        .collect()
}
