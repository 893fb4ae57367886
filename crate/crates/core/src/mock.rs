//! Synthetic stand-in for the external model, for closed-loop runs without
//! any real inference.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::instruction::{render_negative, render_positive};
use crate::model::{BeamLogits, InstructionInstance, PredicateVocabulary, PredictionRecord, RelationTriplet};
use crate::scoring::{entropy, sequence_confidence};
use crate::seed;

const NOUNS: [&str; 20] = [
    "man", "woman", "boy", "girl", "dog", "cat", "horse", "table", "chair", "car", "tree", "shirt",
    "hat", "bag", "street", "water", "boat", "plate", "window", "building",
];

const TRIPLETS_PER_IMAGE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct MockModelSpec {
    pub per_predicate_accuracy: BTreeMap<String, f64>,
    /// The wrong predicate emitted on a false positive.
    pub confusion: BTreeMap<String, String>,
    pub negative_rate: BTreeMap<String, f64>,
    /// Logit magnitude of the emitted token; larger means lower entropy.
    pub sharpness: f64,
    pub beams: usize,
    pub length: usize,
    pub vocab: usize,
    pub seed: u64,
}

impl MockModelSpec {
    /// Same accuracy and negative rate for every predicate; each predicate is
    /// confused with the next one in vocabulary order.
    pub fn uniform(vocab: &PredicateVocabulary, accuracy: f64, negative_rate: f64) -> Result<Self> {
        let preds = vocab.predicates();
        if preds.len() < 2 {
            return Err(Error::InvalidArgument("mock model needs at least two predicates".into()));
        }
        let spec = Self {
            per_predicate_accuracy: preds.iter().map(|p| (p.clone(), accuracy)).collect(),
            confusion: cyclic_confusion(preds),
            negative_rate: preds.iter().map(|p| (p.clone(), negative_rate)).collect(),
            sharpness: 4.0,
            beams: 2,
            length: 4,
            vocab: 16,
            seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return Err(Error::InvalidArgument("sharpness must be positive".into()));
        }
        if self.beams == 0 || self.length == 0 || self.vocab < 2 {
            return Err(Error::InvalidArgument("mock logits need beams, length >= 1 and vocab >= 2".into()));
        }
        for (p, &acc) in &self.per_predicate_accuracy {
            let neg = self.negative_rate.get(p).copied().unwrap_or(0.0);
            if !(0.0..=1.0).contains(&acc) || !(0.0..=1.0).contains(&neg) || acc + neg > 1.0 + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "`{p}`: accuracy {acc} and negative rate {neg} must be probabilities summing to <= 1"
                )));
            }
            match self.confusion.get(p) {
                Some(c) if c != p => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "`{p}` needs a confusion predicate different from itself"
                    )))
                }
            }
        }
        Ok(())
    }
}

pub fn cyclic_confusion(predicates: &[String]) -> BTreeMap<String, String> {
    predicates
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), predicates[(i + 1) % predicates.len()].clone()))
        .collect()
}

/// Accuracy gained from training: rises from `base` towards `cap` as
/// `1 - exp(-n / scale)` in the number of training samples `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningCurve {
    pub cap: f64,
    pub scale: f64,
}

impl LearningCurve {
    pub fn accuracy(&self, base: f64, samples: usize) -> f64 {
        if base >= self.cap {
            return base;
        }
        self.cap - (self.cap - base) * (-(samples as f64) / self.scale).exp()
    }
}

/// Exact-frequency synthetic triplets, shuffled and grouped four to an
/// image. Ids are prefixed with the seed so pools drawn with different
/// seeds never collide.
pub fn synthesize_pool(
    vocab: &PredicateVocabulary,
    predicate_frequencies: &BTreeMap<String, usize>,
    seed: u64,
) -> Result<Vec<RelationTriplet>> {
    let mut rng = seed::rng(seed, "synthesize");
    let mut predicates = Vec::new();
    for (p, &n) in predicate_frequencies {
        let canonical = vocab
            .canonical(p)
            .ok_or_else(|| Error::UnknownPredicate(p.clone()))?;
        predicates.extend(std::iter::repeat_n(canonical.to_string(), n));
    }
    predicates.shuffle(&mut rng);
    let mut out = Vec::with_capacity(predicates.len());
    for (i, predicate) in predicates.into_iter().enumerate() {
        let subject = NOUNS[rng.gen_range(0..NOUNS.len())].to_string();
        let object = NOUNS[rng.gen_range(0..NOUNS.len())].to_string();
        out.push(RelationTriplet {
            id: format!("s{seed}-{i:06}"),
            image_id: format!("s{seed}-img{:05}", i / TRIPLETS_PER_IMAGE),
            subject,
            object,
            predicate,
            subject_box: random_box(&mut rng),
            object_box: random_box(&mut rng),
        });
    }
    Ok(out)
}

fn random_box(rng: &mut impl Rng) -> [f64; 4] {
    let x = rng.gen_range(0.0..500.0_f64).round();
    let y = rng.gen_range(0.0..500.0_f64).round();
    let w = rng.gen_range(10.0..200.0_f64).round();
    let h = rng.gen_range(10.0..200.0_f64).round();
    [x, y, x + w, y + h]
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockPrediction {
    pub record: PredictionRecord,
    pub logits: BeamLogits,
}

/// Deterministic predictions, one per instance, each drawn from a stream
/// keyed by `(spec.seed, instance_id)`.
///
/// The emitted token at every beam position gets logit `sharpness · j` with
/// a per-position jitter `j ∈ [0.5, 1.5)`, all other tokens 0. The jitter is
/// drawn independently of `sharpness`, so for a fixed instance entropy
/// falls strictly as sharpness rises.
pub fn predict(
    instances: &[InstructionInstance],
    triplets: &HashMap<String, RelationTriplet>,
    spec: &MockModelSpec,
) -> Result<Vec<MockPrediction>> {
    spec.validate()?;
    instances
        .iter()
        .map(|inst| {
            let t = triplets
                .get(&inst.triplet_id)
                .ok_or_else(|| Error::UnknownInstance(inst.triplet_id.clone()))?;
            let accuracy = *spec
                .per_predicate_accuracy
                .get(&t.predicate)
                .ok_or_else(|| Error::UnknownPredicate(t.predicate.clone()))?;
            let negative = spec.negative_rate.get(&t.predicate).copied().unwrap_or(0.0);
            let mut rng = seed::rng(spec.seed, &format!("{}/{}", seed::MOCK, inst.instance_id));
            let u: f64 = rng.gen();
            let (text, is_negative) = if u < accuracy {
                (render_positive(t), false)
            } else if u < accuracy + negative {
                (render_negative(t, inst.positive_category), true)
            } else {
                let wrong = RelationTriplet {
                    predicate: spec.confusion[&t.predicate].clone(),
                    ..t.clone()
                };
                (render_positive(&wrong), false)
            };

            let slots = spec.beams * spec.length;
            let mut values = vec![0.0; slots * spec.vocab];
            for slot in 0..slots {
                let token = rng.gen_range(0..spec.vocab);
                let jitter = 0.5 + rng.gen::<f64>();
                values[slot * spec.vocab + token] = spec.sharpness * jitter;
            }
            let logits = BeamLogits::new(spec.beams, spec.length, spec.vocab, values)?;
            let record = PredictionRecord {
                instance_id: inst.instance_id.clone(),
                predicate: t.predicate.clone(),
                predicted_text: text,
                is_negative_prediction: is_negative,
                entropy: entropy(&logits),
                similarity: None,
                confidence: Some(sequence_confidence(&logits)),
                embedding: None,
                outcome: None,
            };
            Ok(MockPrediction { record, logits })
        })
        .collect()
}
