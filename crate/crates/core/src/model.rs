//! Domain vocabulary shared by every stage: predicates and their relation
//! categories, annotated triplets, generated instances, prediction records,
//! beam logits and the train/pool/val partition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{jsonl, seed};

/// High-level relation type of a predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationCategory {
    Spatial,
    Possessive,
    Semantic,
}

impl RelationCategory {
    pub const ALL: [RelationCategory; 3] = [
        RelationCategory::Spatial,
        RelationCategory::Possessive,
        RelationCategory::Semantic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelationCategory::Spatial => "spatial",
            RelationCategory::Possessive => "possessive",
            RelationCategory::Semantic => "semantic",
        }
    }
}

impl fmt::Display for RelationCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spatial" | "geometric" => Ok(RelationCategory::Spatial),
            "possessive" => Ok(RelationCategory::Possessive),
            "semantic" => Ok(RelationCategory::Semantic),
            other => Err(Error::Vocabulary(format!("unknown relation category `{other}`"))),
        }
    }
}

/// Lowercases, maps underscores to spaces and collapses internal whitespace.
pub fn normalize_phrase(raw: &str) -> String {
    raw.replace('_', " ")
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateVocabulary {
    predicates: Vec<String>,
    category_of: BTreeMap<String, RelationCategory>,
}

impl PredicateVocabulary {
    pub fn new<S: AsRef<str>>(
        entries: impl IntoIterator<Item = (S, RelationCategory)>,
    ) -> Result<Self> {
        let mut predicates = Vec::new();
        let mut category_of = BTreeMap::new();
        for (name, category) in entries {
            let name = normalize_phrase(name.as_ref());
            if name.is_empty() {
                return Err(Error::Vocabulary("empty predicate name".into()));
            }
            if category_of.insert(name.clone(), category).is_some() {
                return Err(Error::Vocabulary(format!("duplicate predicate `{name}`")));
            }
            predicates.push(name);
        }
        if predicates.is_empty() {
            return Err(Error::Vocabulary("vocabulary is empty".into()));
        }
        Ok(Self {
            predicates,
            category_of,
        })
    }

    /// Reads `predicate<TAB>category` lines; `#` starts a comment line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (name, category) = trimmed
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, idx + 1, "expected `predicate<TAB>category`"))?;
            let category = category
                .parse()
                .map_err(|e: Error| Error::parse(path, idx + 1, e.to_string()))?;
            entries.push((name.to_string(), category));
        }
        Self::new(entries).map_err(|e| Error::parse(path, 0, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for p in &self.predicates {
            text.push_str(p);
            text.push('\t');
            text.push_str(self.category_of[p].name());
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn predicates(&self) -> &[String] {
        &self.predicates
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    /// Canonical spelling of `raw`, if it is in the vocabulary after normalization.
    pub fn canonical(&self, raw: &str) -> Option<&str> {
        let key = normalize_phrase(raw);
        self.category_of
            .get_key_value(&key)
            .map(|(k, _)| k.as_str())
    }

    pub fn category_of(&self, raw: &str) -> Result<RelationCategory> {
        self.category_of
            .get(&normalize_phrase(raw))
            .copied()
            .ok_or_else(|| Error::UnknownPredicate(raw.to_string()))
    }
}

/// One annotated ⟨subject, predicate, object⟩ fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTriplet {
    pub id: String,
    pub image_id: String,
    pub subject: String,
    pub object: String,
    pub predicate: String,
    pub subject_box: [f64; 4],
    pub object_box: [f64; 4],
}

impl RelationTriplet {
    /// Checks the triplet against `vocab` and returns it with its predicate
    /// in canonical form.
    pub fn validated(mut self, vocab: &PredicateVocabulary) -> Result<Self> {
        if self.id.is_empty() {
            return Err(Error::InvalidArgument("triplet id must be non-empty".into()));
        }
        for (which, b) in [("subject", self.subject_box), ("object", self.object_box)] {
            let ok = b.iter().all(|v| v.is_finite()) && b[0] < b[2] && b[1] < b[3];
            if !ok {
                return Err(Error::DegenerateBox {
                    id: self.id.clone(),
                    which,
                    bbox: b,
                });
            }
        }
        self.subject = self.subject.split_whitespace().collect::<Vec<_>>().join(" ");
        self.object = self.object.split_whitespace().collect::<Vec<_>>().join(" ");
        if self.subject.is_empty() || self.object.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "triplet `{}` has an empty subject or object",
                self.id
            )));
        }
        self.predicate = vocab
            .canonical(&self.predicate)
            .ok_or_else(|| Error::UnknownPredicate(self.predicate.clone()))?
            .to_string();
        Ok(self)
    }

    /// The full "⟨s⟩ ⟨p⟩ ⟨o⟩" phrase used for similarity.
    pub fn phrase(&self) -> String {
        format!("{} {} {}", self.subject, self.predicate, self.object)
    }
}

/// Loads the annotation JSONL file, preserving file order.
pub fn load_annotations(path: &Path, vocab: &PredicateVocabulary) -> Result<Vec<RelationTriplet>> {
    let rows: Vec<(usize, RelationTriplet)> = jsonl::read(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, triplet) in rows {
        let triplet = triplet.validated(vocab).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::parse(path, line, msg),
            other => other,
        })?;
        if !seen.insert(triplet.id.clone()) {
            return Err(Error::DuplicateId(triplet.id));
        }
        out.push(triplet);
    }
    Ok(out)
}

pub fn save_annotations(path: &Path, triplets: &[RelationTriplet]) -> Result<()> {
    jsonl::write(path, triplets)
}

/// A question / positive / negatives bundle generated from one triplet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionInstance {
    pub instance_id: String,
    pub triplet_id: String,
    pub question: String,
    pub positive_response: String,
    pub negative_responses: Vec<String>,
    pub positive_category: RelationCategory,
    pub negative_categories: Vec<RelationCategory>,
}

impl InstructionInstance {
    /// Ground-truth triplet phrase recovered from the positive response.
    pub fn ground_truth_phrase(&self) -> &str {
        let s = self.positive_response.trim();
        let s = s.strip_prefix("Yes,").unwrap_or(s).trim_start();
        s.strip_suffix('.').unwrap_or(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "TP")]
    TruePositive,
    #[serde(rename = "FP")]
    FalsePositive,
    #[serde(rename = "FN")]
    FalseNegative,
}

/// One external-model inference result on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    /// Ground-truth predicate of the queried instance.
    pub predicate: String,
    pub predicted_text: String,
    pub is_negative_prediction: bool,
    pub entropy: f64,
    /// Similarity to the ground truth. Set on FP records by classification;
    /// before that it may carry a precomputed value from the wire.
    pub similarity: Option<f64>,
    /// Mean log-probability of the decoded sequence.
    pub confidence: Option<f64>,
    /// Embedding of the predicted phrase when supplied on the wire.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    pub outcome: Option<Outcome>,
}

/// Raw beam-search logits, `beams × length × vocab`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamLogits {
    beams: usize,
    length: usize,
    vocab: usize,
    values: Vec<f64>,
}

impl BeamLogits {
    pub fn new(beams: usize, length: usize, vocab: usize, values: Vec<f64>) -> Result<Self> {
        if beams == 0 || length == 0 || vocab == 0 {
            return Err(Error::LogitsShape(format!(
                "dimensions must be >= 1, got {beams}x{length}x{vocab}"
            )));
        }
        let expected = beams
            .checked_mul(length)
            .and_then(|n| n.checked_mul(vocab))
            .ok_or_else(|| Error::LogitsShape("dimensions overflow".into()))?;
        if values.len() != expected {
            return Err(Error::LogitsShape(format!(
                "{beams}x{length}x{vocab} needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLogits(idx));
        }
        Ok(Self {
            beams,
            length,
            vocab,
            values,
        })
    }

    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let beams = nested.len();
        let length = nested.first().map_or(0, Vec::len);
        let vocab = nested
            .first()
            .and_then(|b| b.first())
            .map_or(0, Vec::len);
        let mut values = Vec::with_capacity(beams * length * vocab);
        for beam in nested {
            if beam.len() != length {
                return Err(Error::LogitsShape("ragged sequence length".into()));
            }
            for row in beam {
                if row.len() != vocab {
                    return Err(Error::LogitsShape("ragged vocabulary axis".into()));
                }
                values.extend_from_slice(row);
            }
        }
        Self::new(beams, length, vocab, values)
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        self.values
            .chunks(self.length * self.vocab)
            .map(|beam| beam.chunks(self.vocab).map(<[f64]>::to_vec).collect())
            .collect()
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates the `beams × length` distributions, each a `vocab`-long slice.
    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.vocab)
    }

    pub fn beam(&self, m: usize) -> impl Iterator<Item = &[f64]> {
        let stride = self.length * self.vocab;
        self.values[m * stride..(m + 1) * stride].chunks_exact(self.vocab)
    }
}

/// Disjoint train / pool / val id sets plus per-predicate pool counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPartition {
    train: BTreeSet<String>,
    pool: BTreeSet<String>,
    val: BTreeSet<String>,
    predicate_of: BTreeMap<String, String>,
    availability: BTreeMap<String, usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PartitionFile {
    train: Vec<String>,
    pool: Vec<String>,
    val: Vec<String>,
    predicates: BTreeMap<String, String>,
}

impl DatasetPartition {
    pub fn from_sets(
        train: BTreeSet<String>,
        pool: BTreeSet<String>,
        val: BTreeSet<String>,
        predicate_of: BTreeMap<String, String>,
    ) -> Result<Self> {
        let availability = count_availability(&pool, &predicate_of)?;
        let out = Self {
            train,
            pool,
            val,
            predicate_of,
            availability,
        };
        out.check()?;
        Ok(out)
    }

    pub fn train(&self) -> &BTreeSet<String> {
        &self.train
    }

    pub fn pool(&self) -> &BTreeSet<String> {
        &self.pool
    }

    pub fn val(&self) -> &BTreeSet<String> {
        &self.val
    }

    pub fn availability(&self) -> &BTreeMap<String, usize> {
        &self.availability
    }

    pub fn predicate_of(&self, id: &str) -> Option<&str> {
        self.predicate_of.get(id).map(String::as_str)
    }

    pub fn predicates(&self) -> &BTreeMap<String, String> {
        &self.predicate_of
    }

    /// Pool ids carrying `predicate`, in sorted order.
    pub fn pool_ids_for<'a>(&'a self, predicate: &'a str) -> impl Iterator<Item = &'a String> + 'a {
        self.pool
            .iter()
            .filter(move |id| self.predicate_of.get(*id).map(String::as_str) == Some(predicate))
    }

    /// Returns a new partition with `ids` moved from pool to train.
    pub fn with_moved_to_train<'a>(&self, ids: impl IntoIterator<Item = &'a String>) -> Result<Self> {
        let mut next = self.clone();
        for id in ids {
            if !next.pool.remove(id) {
                return Err(Error::Partition(format!("id `{id}` is not in the pool")));
            }
            let predicate = &next.predicate_of[id];
            if let Some(n) = next.availability.get_mut(predicate) {
                *n -= 1;
            }
            next.train.insert(id.clone());
        }
        Ok(next)
    }

    /// Verifies disjointness, exhaustiveness and the availability counts.
    pub fn check(&self) -> Result<()> {
        let total = self.train.len() + self.pool.len() + self.val.len();
        if total != self.predicate_of.len() {
            return Err(Error::Partition(format!(
                "{} ids across sets but {} known ids",
                total,
                self.predicate_of.len()
            )));
        }
        for id in self.train.iter().chain(&self.pool).chain(&self.val) {
            if !self.predicate_of.contains_key(id) {
                return Err(Error::Partition(format!("id `{id}` has no predicate")));
            }
        }
        let overlap = self
            .train
            .intersection(&self.pool)
            .chain(self.train.intersection(&self.val))
            .chain(self.pool.intersection(&self.val))
            .next();
        if let Some(id) = overlap {
            return Err(Error::Partition(format!("id `{id}` appears in two sets")));
        }
        let recount = count_availability(&self.pool, &self.predicate_of)?;
        if recount != self.availability {
            return Err(Error::Partition("availability does not match pool".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = PartitionFile {
            train: self.train.iter().cloned().collect(),
            pool: self.pool.iter().cloned().collect(),
            val: self.val.iter().cloned().collect(),
            predicates: self.predicate_of.clone(),
        };
        jsonl::write_json(path, &file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: PartitionFile = jsonl::read_json(path)?;
        let mut sets = Vec::new();
        for (name, ids) in [("train", file.train), ("pool", file.pool), ("val", file.val)] {
            let n = ids.len();
            let set: BTreeSet<String> = ids.into_iter().collect();
            if set.len() != n {
                return Err(Error::Partition(format!("duplicate ids in `{name}`")));
            }
            sets.push(set);
        }
        let val = sets.pop().unwrap_or_default();
        let pool = sets.pop().unwrap_or_default();
        let train = sets.pop().unwrap_or_default();
        Self::from_sets(train, pool, val, file.predicates)
    }
}

fn count_availability(
    pool: &BTreeSet<String>,
    predicate_of: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, usize>> {
    let mut counts: BTreeMap<String, usize> =
        predicate_of.values().map(|p| (p.clone(), 0)).collect();
    for id in pool {
        let p = predicate_of
            .get(id)
            .ok_or_else(|| Error::Partition(format!("pool id `{id}` has no predicate")))?;
        *counts.entry(p.clone()).or_default() += 1;
    }
    Ok(counts)
}

fn fraction_count(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction + 1e-9).floor() as usize
}

/// Splits triplets into an empty train set, a pool and a validation set
/// stratified per predicate.
///
/// Each predicate contributes `floor(n_p * val_fraction)` ids to validation;
/// the gap to `floor(n * val_fraction)` is filled by a global random draw.
pub fn partition(triplets: &[RelationTriplet], seed: u64, val_fraction: f64) -> Result<DatasetPartition> {
    if triplets.is_empty() {
        return Err(Error::Partition("no triplets to partition".into()));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "val_fraction must be in (0, 1), got {val_fraction}"
        )));
    }
    let target = fraction_count(triplets.len(), val_fraction);
    if target >= triplets.len() {
        return Err(Error::Partition("validation split leaves the pool empty".into()));
    }

    let mut predicate_of = BTreeMap::new();
    let mut by_predicate: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for t in triplets {
        if predicate_of.insert(t.id.clone(), t.predicate.clone()).is_some() {
            return Err(Error::DuplicateId(t.id.clone()));
        }
        by_predicate.entry(&t.predicate).or_default().push(&t.id);
    }

    let mut rng = seed::rng(seed, seed::PARTITION);
    let mut val: BTreeSet<String> = BTreeSet::new();
    for ids in by_predicate.values() {
        let take = fraction_count(ids.len(), val_fraction);
        let mut ids = ids.clone();
        ids.shuffle(&mut rng);
        val.extend(ids.into_iter().take(take).map(str::to_string));
    }
    if val.len() < target {
        let mut rest: Vec<&str> = triplets
            .iter()
            .map(|t| t.id.as_str())
            .filter(|id| !val.contains(*id))
            .collect();
        rest.shuffle(&mut rng);
        let need = target - val.len();
        val.extend(rest.into_iter().take(need).map(str::to_string));
    }

    let pool: BTreeSet<String> = triplets
        .iter()
        .filter(|t| !val.contains(&t.id))
        .map(|t| t.id.clone())
        .collect();
    DatasetPartition::from_sets(BTreeSet::new(), pool, val, predicate_of)
}
