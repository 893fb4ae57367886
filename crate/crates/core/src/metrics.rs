//! Recall@k, mean recall@k and their generalized variants, plus counts of
//! unique and unseen predicted predicates.
//!
//! Each prediction record answers the question about one annotated pair
//! (its instance id is the ground-truth triplet id). Within an image,
//! positive predictions are ranked by the configured key; a ground-truth
//! triplet is recovered at `k` when one of its own records sits in the
//! image's top `k` and names the same subject, object and predicate. The
//! generalized variant also accepts a different predicate whose full
//! triplet phrase is at least `similarity_threshold` similar.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::instruction::{is_negative_text, parse_positive};
use crate::model::{normalize_phrase, PredictionRecord, RelationTriplet};
use crate::scoring::{similarity, EmbeddingProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingKey {
    Confidence,
    NegEntropy,
}

impl FromStr for RankingKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "confidence" => Ok(RankingKey::Confidence),
            "neg_entropy" => Ok(RankingKey::NegEntropy),
            other => Err(format!("expected confidence or neg_entropy, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub k_values: Vec<usize>,
    pub similarity_threshold: f64,
    pub ranking_key: RankingKey,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k_values: vec![20, 50],
            similarity_threshold: 0.95,
            ranking_key: RankingKey::Confidence,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::InvalidArgument("k values must be positive".into()));
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "similarity threshold must be in (0, 1], got {}",
                self.similarity_threshold
            )));
        }
        Ok(())
    }
}

/// Best (smallest) in-image rank at which each ground-truth triplet is
/// recovered, exactly and under the generalized rule.
#[derive(Debug, Clone)]
struct Recovery {
    predicates: Vec<String>,
    exact: Vec<Option<usize>>,
    general: Vec<Option<usize>>,
}

impl Recovery {
    fn compute(
        gt: &[RelationTriplet],
        records: &[PredictionRecord],
        cfg: &EvalConfig,
        provider: Option<&dyn EmbeddingProvider>,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut index = HashMap::with_capacity(gt.len());
        for (i, t) in gt.iter().enumerate() {
            if index.insert(t.id.as_str(), i).is_some() {
                return Err(Error::DuplicateId(t.id.clone()));
            }
        }

        let mut by_image: BTreeMap<&str, Vec<(f64, &str, usize, &PredictionRecord)>> = BTreeMap::new();
        for (order, r) in records.iter().enumerate() {
            let &g = index
                .get(r.instance_id.as_str())
                .ok_or_else(|| Error::UnknownInstance(r.instance_id.clone()))?;
            if r.is_negative_prediction || is_negative_text(&r.predicted_text) {
                continue;
            }
            let key = match cfg.ranking_key {
                RankingKey::Confidence => r
                    .confidence
                    .ok_or_else(|| Error::MissingRankingKey(r.instance_id.clone()))?,
                RankingKey::NegEntropy => -r.entropy,
            };
            if !key.is_finite() {
                return Err(Error::MissingRankingKey(r.instance_id.clone()));
            }
            by_image
                .entry(gt[g].image_id.as_str())
                .or_default()
                .push((key, r.instance_id.as_str(), order, r));
        }

        let mut exact = vec![None; gt.len()];
        let mut general = vec![None; gt.len()];
        for ranked in by_image.values_mut() {
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)).then(a.2.cmp(&b.2)));
            for (rank, (_, id, _, r)) in ranked.iter().enumerate() {
                let g = index[id];
                let truth = &gt[g];
                let Some(predicted) = parse_positive(&r.predicted_text, &truth.subject, &truth.object) else {
                    continue;
                };
                let is_exact = predicted == normalize_phrase(&truth.predicate);
                if is_exact {
                    exact[g].get_or_insert(rank);
                    general[g].get_or_insert(rank);
                    continue;
                }
                if general[g].is_some() {
                    continue;
                }
                if let Some(provider) = provider {
                    let s = match r.similarity {
                        Some(s) => s,
                        None => {
                            let phrase = format!("{} {} {}", truth.subject, predicted, truth.object);
                            similarity(&phrase, &truth.phrase(), provider)?
                        }
                    };
                    if s >= cfg.similarity_threshold {
                        general[g] = Some(rank);
                    }
                }
            }
        }
        Ok(Self {
            predicates: gt.iter().map(|t| normalize_phrase(&t.predicate)).collect(),
            exact,
            general,
        })
    }

    fn recall(ranks: &[Option<usize>], k: usize) -> f64 {
        if ranks.is_empty() {
            return 0.0;
        }
        let hit = ranks.iter().filter(|r| matches!(r, Some(x) if *x < k)).count();
        hit as f64 / ranks.len() as f64
    }

    fn per_predicate(&self, ranks: &[Option<usize>], k: usize) -> BTreeMap<String, f64> {
        let mut groups: BTreeMap<&str, Vec<Option<usize>>> = BTreeMap::new();
        for (p, r) in self.predicates.iter().zip(ranks) {
            groups.entry(p).or_default().push(*r);
        }
        groups
            .into_iter()
            .map(|(p, rs)| (p.to_string(), Self::recall(&rs, k)))
            .collect()
    }

    fn mean_recall(&self, ranks: &[Option<usize>], k: usize) -> f64 {
        let per = self.per_predicate(ranks, k);
        if per.is_empty() {
            0.0
        } else {
            per.values().sum::<f64>() / per.len() as f64
        }
    }
}

pub fn recall_at_k(
    gt: &[RelationTriplet],
    records: &[PredictionRecord],
    cfg: &EvalConfig,
) -> Result<BTreeMap<usize, f64>> {
    let rec = Recovery::compute(gt, records, cfg, None)?;
    Ok(cfg.k_values.iter().map(|&k| (k, Recovery::recall(&rec.exact, k))).collect())
}

/// Unweighted mean of per-predicate recall over predicates with at least one
/// ground-truth triplet.
pub fn mean_recall_at_k(
    gt: &[RelationTriplet],
    records: &[PredictionRecord],
    cfg: &EvalConfig,
) -> Result<BTreeMap<usize, f64>> {
    let rec = Recovery::compute(gt, records, cfg, None)?;
    Ok(cfg.k_values.iter().map(|&k| (k, rec.mean_recall(&rec.exact, k))).collect())
}

/// `(gR@k, gmR@k)` per k.
pub fn generalized_recall_at_k(
    gt: &[RelationTriplet],
    records: &[PredictionRecord],
    cfg: &EvalConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<BTreeMap<usize, (f64, f64)>> {
    let rec = Recovery::compute(gt, records, cfg, Some(provider))?;
    Ok(cfg
        .k_values
        .iter()
        .map(|&k| (k, (Recovery::recall(&rec.general, k), rec.mean_recall(&rec.general, k))))
        .collect())
}

/// Exact per-predicate recall at `k`, or over all predictions when `k` is `None`.
pub fn per_predicate_recall(
    gt: &[RelationTriplet],
    records: &[PredictionRecord],
    cfg: &EvalConfig,
    k: Option<usize>,
) -> Result<BTreeMap<String, f64>> {
    let rec = Recovery::compute(gt, records, cfg, None)?;
    Ok(rec.per_predicate(&rec.exact, k.unwrap_or(usize::MAX)))
}

/// `(unique, unseen)`: distinct predicted predicates, and those of them
/// absent from `train_predicates`.
pub fn prediction_diversity(
    gt: &[RelationTriplet],
    records: &[PredictionRecord],
    train_predicates: &BTreeSet<String>,
) -> (usize, usize) {
    let by_id: HashMap<&str, &RelationTriplet> = gt.iter().map(|t| (t.id.as_str(), t)).collect();
    let seen: BTreeSet<String> = train_predicates.iter().map(|p| normalize_phrase(p)).collect();
    let predicted: BTreeSet<String> = records
        .iter()
        .filter(|r| !r.is_negative_prediction)
        .filter_map(|r| {
            let t = by_id.get(r.instance_id.as_str())?;
            parse_positive(&r.predicted_text, &t.subject, &t.object)
        })
        .collect();
    let unseen = predicted.iter().filter(|p| !seen.contains(*p)).count();
    (predicted.len(), unseen)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KMetrics {
    #[serde(rename = "R")]
    pub recall: f64,
    #[serde(rename = "mR")]
    pub mean_recall: f64,
    #[serde(rename = "gR")]
    pub generalized_recall: f64,
    #[serde(rename = "gmR")]
    pub generalized_mean_recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateMetrics {
    pub ground_truth: usize,
    pub recall: BTreeMap<usize, f64>,
    pub generalized_recall: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub at_k: BTreeMap<usize, KMetrics>,
    pub per_predicate: BTreeMap<String, PredicateMetrics>,
    pub unique: usize,
    pub unseen: usize,
}

impl MetricsReport {
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        for (k, m) in &self.at_k {
            root.insert(k.to_string(), json!(m));
        }
        let mut per = Map::new();
        for (p, m) in &self.per_predicate {
            let mut entry = Map::new();
            entry.insert("gt".into(), json!(m.ground_truth));
            for (k, r) in &m.recall {
                entry.insert(
                    k.to_string(),
                    json!({"R": r, "gR": m.generalized_recall[k]}),
                );
            }
            per.insert(p.clone(), Value::Object(entry));
        }
        root.insert("per_predicate".into(), Value::Object(per));
        root.insert("unique".into(), json!(self.unique));
        root.insert("unseen".into(), json!(self.unseen));
        Value::Object(root)
    }
}

pub fn evaluate(
    gt: &[RelationTriplet],
    records: &[PredictionRecord],
    cfg: &EvalConfig,
    provider: &dyn EmbeddingProvider,
    train_predicates: &BTreeSet<String>,
) -> Result<MetricsReport> {
    let rec = Recovery::compute(gt, records, cfg, Some(provider))?;
    let mut at_k = BTreeMap::new();
    let mut per_predicate: BTreeMap<String, PredicateMetrics> = BTreeMap::new();
    for p in &rec.predicates {
        per_predicate
            .entry(p.clone())
            .or_insert_with(|| PredicateMetrics {
                ground_truth: 0,
                recall: BTreeMap::new(),
                generalized_recall: BTreeMap::new(),
            })
            .ground_truth += 1;
    }
    for &k in &cfg.k_values {
        at_k.insert(
            k,
            KMetrics {
                recall: Recovery::recall(&rec.exact, k),
                mean_recall: rec.mean_recall(&rec.exact, k),
                generalized_recall: Recovery::recall(&rec.general, k),
                generalized_mean_recall: rec.mean_recall(&rec.general, k),
            },
        );
        for (p, r) in rec.per_predicate(&rec.exact, k) {
            per_predicate.get_mut(&p).expect("grouped").recall.insert(k, r);
        }
        for (p, r) in rec.per_predicate(&rec.general, k) {
            per_predicate.get_mut(&p).expect("grouped").generalized_recall.insert(k, r);
        }
    }
    let (unique, unseen) = prediction_diversity(gt, records, train_predicates);
    Ok(MetricsReport {
        at_k,
        per_predicate,
        unique,
        unseen,
    })
}
