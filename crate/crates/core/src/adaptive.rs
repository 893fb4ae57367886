//! Recall-weighted, threshold-adaptive sample selection.
//!
//! Each iteration:
//! 1. splits the budget across predicates in proportion to `1 - recall`,
//!    capped by how many pool records each predicate has;
//! 2. per predicate, fits mean/std of entropy over its TP and FN records and
//!    of similarity over its FP records, and selects high-entropy TPs,
//!    high- and low-entropy FNs and low-similarity FPs, relaxing the
//!    z-score by `z_step` until the budget is met;
//! 3. moves the selected ids from pool to train.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use serde::Serialize;

use crate::balanced::BudgetAllocation;
use crate::error::{Error, Result};
use crate::instruction::positive_phrase;
use crate::model::{normalize_phrase, DatasetPartition, InstructionInstance, Outcome, PredictionRecord};
use crate::scoring::{cosine, similarity, EmbeddingProvider};

/// TP / FN / FP records of one predicate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredicatePools {
    pub tp: Vec<PredictionRecord>,
    pub fn_: Vec<PredictionRecord>,
    pub fp: Vec<PredictionRecord>,
}

impl PredicatePools {
    pub fn len(&self) -> usize {
        self.tp.len() + self.fn_.len() + self.fp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, record: PredictionRecord) -> Result<()> {
        match record.outcome {
            Some(Outcome::TruePositive) => self.tp.push(record),
            Some(Outcome::FalseNegative) => self.fn_.push(record),
            Some(Outcome::FalsePositive) => self.fp.push(record),
            None => {
                return Err(Error::InvalidArgument(format!(
                    "record `{}` is unclassified",
                    record.instance_id
                )))
            }
        }
        Ok(())
    }

    fn records(&self) -> impl Iterator<Item = &PredictionRecord> {
        self.tp.iter().chain(&self.fn_).chain(&self.fp)
    }

    /// Keeps only records whose id satisfies `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.tp.retain(|r| keep(&r.instance_id));
        self.fn_.retain(|r| keep(&r.instance_id));
        self.fp.retain(|r| keep(&r.instance_id));
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutcomePools {
    pub per_predicate: BTreeMap<String, PredicatePools>,
}

impl OutcomePools {
    pub fn from_classified(records: impl IntoIterator<Item = PredictionRecord>) -> Result<Self> {
        let mut pools = OutcomePools::default();
        for r in records {
            pools
                .per_predicate
                .entry(r.predicate.clone())
                .or_default()
                .push(r)?;
        }
        Ok(pools)
    }

    pub fn len(&self) -> usize {
        self.per_predicate.values().map(PredicatePools::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Assigns TP / FN / FP to one record.
///
/// Negative predictions are FNs (every pool instance is an annotated
/// relation). A positive prediction is a TP when its normalized triplet
/// phrase equals the ground truth's, otherwise an FP whose similarity comes
/// from, in order: a precomputed value on the record, its embedding against
/// the ground-truth embedding, or the provider over both phrases.
pub fn classify(
    record: &PredictionRecord,
    instance: &InstructionInstance,
    provider: &dyn EmbeddingProvider,
) -> Result<PredictionRecord> {
    let mut out = record.clone();
    if record.is_negative_prediction {
        out.outcome = Some(Outcome::FalseNegative);
        out.similarity = None;
        return Ok(out);
    }
    let truth = normalize_phrase(instance.ground_truth_phrase());
    let predicted = positive_phrase(&record.predicted_text);
    if predicted.as_deref() == Some(truth.as_str()) {
        out.outcome = Some(Outcome::TruePositive);
        out.similarity = Some(1.0);
        return Ok(out);
    }
    let s = match (record.similarity, &record.embedding) {
        (Some(s), _) => s,
        (None, Some(e)) => cosine(e, &provider.embed(&truth)?),
        (None, None) => similarity(predicted.as_deref().unwrap_or(""), &truth, provider)?,
    };
    if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&s) {
        return Err(Error::InvalidArgument(format!(
            "record `{}` has similarity {s} outside [-1, 1]",
            record.instance_id
        )));
    }
    out.outcome = Some(Outcome::FalsePositive);
    out.similarity = Some(s.clamp(-1.0, 1.0));
    Ok(out)
}

pub fn classify_outcomes(
    records: &[PredictionRecord],
    instances: &HashMap<String, InstructionInstance>,
    provider: &dyn EmbeddingProvider,
) -> Result<OutcomePools> {
    let classified = records
        .iter()
        .map(|r| {
            let instance = instances
                .get(&r.instance_id)
                .ok_or_else(|| Error::UnknownInstance(r.instance_id.clone()))?;
            classify(r, instance, provider)
        })
        .collect::<Result<Vec<_>>>()?;
    OutcomePools::from_classified(classified)
}

/// Selection weight `(1 - R_p) / Σ (1 - R_j)` over predicates with
/// availability; uniform when every recall is 1.
pub fn budget_weights(
    recalls: &BTreeMap<String, f64>,
    availability: &BTreeMap<String, usize>,
) -> Result<BTreeMap<String, f64>> {
    let mut deficits = BTreeMap::new();
    for (p, &n) in availability {
        if n == 0 {
            continue;
        }
        let r = *recalls.get(p).ok_or_else(|| Error::MissingRecall(p.clone()))?;
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidArgument(format!("recall for `{p}` is {r}, outside [0, 1]")));
        }
        deficits.insert(p.clone(), 1.0 - r);
    }
    let total: f64 = deficits.values().sum();
    let n = deficits.len() as f64;
    Ok(deficits
        .into_iter()
        .map(|(p, d)| {
            let w = if total > 0.0 { d / total } else { 1.0 / n };
            (p, w)
        })
        .collect())
}

/// `B'_p = min(floor(B · P_p), N_p)`, then the floor remainder goes one slot
/// each to the largest fractional parts (ties by name), skipping predicates
/// at their cap or with zero weight. Budget lost to the cap is not
/// redistributed.
pub fn allocate_budget(
    recalls: &BTreeMap<String, f64>,
    availability: &BTreeMap<String, usize>,
    budget: usize,
) -> Result<BudgetAllocation> {
    let weights = budget_weights(recalls, availability)?;
    let mut per_predicate: BTreeMap<String, usize> =
        availability.keys().map(|p| (p.clone(), 0)).collect();
    let mut fractions = Vec::new();
    let mut floor_sum = 0usize;
    for (p, &w) in &weights {
        let raw = budget as f64 * w;
        let base = (raw + 1e-9).floor() as usize;
        floor_sum += base;
        per_predicate.insert(p.clone(), base.min(availability[p]));
        fractions.push((p.as_str(), (raw - base as f64).max(0.0), w));
    }
    let mut remainder = budget.saturating_sub(floor_sum);
    fractions.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    for (p, _, w) in fractions {
        if remainder == 0 {
            break;
        }
        let slot = per_predicate.get_mut(p).expect("weighted predicate");
        if w > 0.0 && *slot < availability[p] {
            *slot += 1;
            remainder -= 1;
        }
    }
    Ok(BudgetAllocation {
        per_predicate,
        total_budget: budget,
    })
}

/// Population mean and standard deviation; `(0, 0)` for an empty slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSet {
    pub mu_tp: f64,
    pub sigma_tp: f64,
    pub mu_fn: f64,
    pub sigma_fn: f64,
    pub mu_fp: f64,
    pub sigma_fp: f64,
    pub z: f64,
    pub h_tp: f64,
    pub h_fn: f64,
    pub t_fn: f64,
    pub t_fp: f64,
}

impl ThresholdSet {
    fn from_stats(stats: &PoolStats, z: f64) -> Self {
        let (mu_tp, sigma_tp) = stats.tp;
        let (mu_fn, sigma_fn) = stats.fn_;
        let (mu_fp, sigma_fp) = stats.fp;
        Self {
            mu_tp,
            sigma_tp,
            mu_fn,
            sigma_fn,
            mu_fp,
            sigma_fp,
            z,
            h_tp: mu_tp + z * sigma_tp,
            h_fn: mu_fn + z * sigma_fn,
            t_fn: mu_fn - z * sigma_fn,
            t_fp: mu_fp - z * sigma_fp,
        }
    }

    fn cutoffs(&self) -> Cutoffs {
        Cutoffs {
            h_tp: self.h_tp,
            h_fn: self.h_fn,
            t_fn: self.t_fn,
            t_fp: self.t_fp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PoolStats {
    tp: (f64, f64),
    fn_: (f64, f64),
    fp: (f64, f64),
}

impl PoolStats {
    fn of(pools: &PredicatePools) -> Result<Self> {
        let entropies = |rs: &[PredictionRecord]| rs.iter().map(|r| r.entropy).collect::<Vec<_>>();
        Ok(Self {
            tp: mean_std(&entropies(&pools.tp)),
            fn_: mean_std(&entropies(&pools.fn_)),
            fp: mean_std(&fp_similarities(&pools.fp)?),
        })
    }
}

fn fp_similarities(fp: &[PredictionRecord]) -> Result<Vec<f64>> {
    fp.iter()
        .map(|r| {
            r.similarity.ok_or_else(|| {
                Error::InvalidArgument(format!("FP record `{}` has no similarity", r.instance_id))
            })
        })
        .collect()
}

/// Per-predicate thresholds at `z`: population statistics of entropy over
/// TP and FN, of similarity over FP. Empty pools give zero statistics.
pub fn compute_thresholds(pools: &PredicatePools, z: f64) -> Result<ThresholdSet> {
    Ok(ThresholdSet::from_stats(&PoolStats::of(pools)?, z))
}

/// The four cut points a candidate is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoffs {
    pub h_tp: f64,
    pub h_fn: f64,
    pub t_fn: f64,
    pub t_fp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    HighEntropyTp,
    HighEntropyFn,
    LowEntropyFn,
    LowSimilarityFp,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::HighEntropyTp,
        Criterion::HighEntropyFn,
        Criterion::LowEntropyFn,
        Criterion::LowSimilarityFp,
    ];
}

/// Ids qualifying under each criterion, each list ordered most informative
/// first (ties by id).
pub fn candidates(pools: &PredicatePools, cut: &Cutoffs) -> Result<BTreeMap<Criterion, Vec<String>>> {
    let pick = |rs: &[PredictionRecord], key: &dyn Fn(&PredictionRecord) -> f64, keep: &dyn Fn(f64) -> bool, descending: bool| {
        let mut hits: Vec<(f64, &str)> = rs
            .iter()
            .map(|r| (key(r), r.instance_id.as_str()))
            .filter(|(v, _)| keep(*v))
            .collect();
        hits.sort_by(|a, b| rank(a, b, descending));
        hits.into_iter().map(|(_, id)| id.to_string()).collect::<Vec<_>>()
    };
    let entropy = |r: &PredictionRecord| r.entropy;
    let sims = fp_similarities(&pools.fp)?;
    let sim_of: HashMap<&str, f64> = pools
        .fp
        .iter()
        .map(|r| r.instance_id.as_str())
        .zip(sims)
        .collect();
    let sim = |r: &PredictionRecord| sim_of[r.instance_id.as_str()];
    Ok(BTreeMap::from([
        (Criterion::HighEntropyTp, pick(&pools.tp, &entropy, &|h| h > cut.h_tp, true)),
        (Criterion::HighEntropyFn, pick(&pools.fn_, &entropy, &|h| h > cut.h_fn, true)),
        (Criterion::LowEntropyFn, pick(&pools.fn_, &entropy, &|h| h < cut.t_fn, false)),
        (Criterion::LowSimilarityFp, pick(&pools.fp, &sim, &|s| s < cut.t_fp, false)),
    ]))
}

fn rank(a: &(f64, &str), b: &(f64, &str), descending: bool) -> Ordering {
    let by_value = if descending {
        b.0.total_cmp(&a.0)
    } else {
        a.0.total_cmp(&b.0)
    };
    by_value.then_with(|| a.1.cmp(b.1))
}

fn union_size(lists: &BTreeMap<Criterion, Vec<String>>) -> usize {
    lists.values().flatten().collect::<BTreeSet<_>>().len()
}

/// Takes ids round-robin across ranked lists, skipping duplicates, until
/// `limit` ids are taken or the lists run dry.
fn interleave<'a>(lists: impl IntoIterator<Item = &'a [String]>, limit: usize, taken: &mut Vec<String>, seen: &mut BTreeSet<String>) -> usize {
    let lists: Vec<&[String]> = lists.into_iter().collect();
    let mut cursors = vec![0usize; lists.len()];
    let mut added = 0;
    while added < limit {
        let mut progressed = false;
        for (list, cursor) in lists.iter().zip(cursors.iter_mut()) {
            if added == limit {
                break;
            }
            while *cursor < list.len() {
                let id = &list[*cursor];
                *cursor += 1;
                if seen.insert(id.clone()) {
                    taken.push(id.clone());
                    added += 1;
                    progressed = true;
                    break;
                }
            }
        }
        if !progressed {
            break;
        }
    }
    added
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedThresholds {
    pub t_fp: f64,
    pub t_fn: f64,
    pub h_fn: f64,
    pub h_tp: f64,
}

impl Default for FixedThresholds {
    /// The "mid point" setting: 0.95 on similarity, 0.5 on entropy.
    fn default() -> Self {
        Self {
            t_fp: 0.95,
            t_fn: 0.5,
            h_fn: 0.5,
            h_tp: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Adaptive,
    Fixed,
}

impl FromStr for ThresholdMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "adaptive" => Ok(ThresholdMode::Adaptive),
            "fixed" => Ok(ThresholdMode::Fixed),
            other => Err(format!("expected adaptive or fixed, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub z_init: f64,
    pub z_step: f64,
    pub mode: ThresholdMode,
    pub fixed_thresholds: Option<FixedThresholds>,
    pub budget: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            z_init: 1.96,
            z_step: 0.1,
            mode: ThresholdMode::Adaptive,
            fixed_thresholds: None,
            budget: 0,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.z_init.is_finite() || !(self.z_step > 0.0 && self.z_step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "z_init must be finite and z_step positive (got {}, {})",
                self.z_init, self.z_step
            )));
        }
        if self.mode == ThresholdMode::Fixed && self.fixed_thresholds.is_none() {
            return Err(Error::InvalidArgument("fixed mode requires fixed thresholds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CriterionCounts {
    pub high_entropy_tp: usize,
    pub high_entropy_fn: usize,
    pub low_entropy_fn: usize,
    pub low_similarity_fp: usize,
    /// Records added after the thresholds stopped producing candidates.
    pub top_up: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    /// Selected ids in selection order.
    pub ids: Vec<String>,
    /// z at which refinement stopped; `None` in fixed mode.
    pub final_z: Option<f64>,
    pub thresholds: Option<ThresholdSet>,
    pub counts: CriterionCounts,
    pub refinements: usize,
}

/// Selects exactly `budget` record ids from one predicate's pools.
///
/// Statistics are fixed for the whole call; only z moves. Refinement stops
/// once the budget is met or every record that any z can reach already
/// qualifies. Overshoot is trimmed by taking candidates round-robin over
/// the criteria, most informative first; a shortfall is topped up from the
/// remaining records ranked the same way.
pub fn select_for_predicate(pools: &PredicatePools, budget: usize, cfg: &AdaptiveConfig) -> Result<Selection> {
    cfg.validate()?;
    if budget > pools.len() {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} exceeds {} available records",
            pools.len()
        )));
    }
    if budget == 0 {
        return Ok(Selection {
            ids: Vec::new(),
            final_z: (cfg.mode == ThresholdMode::Adaptive).then_some(cfg.z_init),
            thresholds: None,
            counts: CriterionCounts::default(),
            refinements: 0,
        });
    }

    let stats = PoolStats::of(pools)?;
    let (lists, final_z, thresholds, refinements) = match cfg.mode {
        ThresholdMode::Fixed => {
            let f = cfg.fixed_thresholds.expect("validated");
            let cut = Cutoffs {
                h_tp: f.h_tp,
                h_fn: f.h_fn,
                t_fn: f.t_fn,
                t_fp: f.t_fp,
            };
            (candidates(pools, &cut)?, None, None, 0)
        }
        ThresholdMode::Adaptive => {
            // Records any z can reach: all members of pools with spread.
            let reachable = [(&pools.tp, stats.tp.1), (&pools.fn_, stats.fn_.1), (&pools.fp, stats.fp.1)]
                .iter()
                .filter(|(_, sigma)| *sigma > 0.0)
                .map(|(rs, _)| rs.len())
                .sum::<usize>();
            let mut z = cfg.z_init;
            let mut refinements = 0;
            loop {
                let t = ThresholdSet::from_stats(&stats, z);
                let lists = candidates(pools, &t.cutoffs())?;
                let found = union_size(&lists);
                if found >= budget || found >= reachable {
                    break (lists, Some(z), Some(t), refinements);
                }
                z -= cfg.z_step;
                refinements += 1;
            }
        }
    };

    let mut ids = Vec::with_capacity(budget);
    let mut seen = BTreeSet::new();
    let mut counts = CriterionCounts::default();
    {
        // Interleave one criterion at a time so each pick can be attributed.
        let ordered: Vec<(Criterion, &[String])> =
            Criterion::ALL.iter().map(|c| (*c, lists[c].as_slice())).collect();
        let mut cursors = [0usize; 4];
        while ids.len() < budget {
            let mut progressed = false;
            for (k, (criterion, list)) in ordered.iter().enumerate() {
                if ids.len() == budget {
                    break;
                }
                while cursors[k] < list.len() {
                    let id = &list[cursors[k]];
                    cursors[k] += 1;
                    if seen.insert(id.clone()) {
                        ids.push(id.clone());
                        match criterion {
                            Criterion::HighEntropyTp => counts.high_entropy_tp += 1,
                            Criterion::HighEntropyFn => counts.high_entropy_fn += 1,
                            Criterion::LowEntropyFn => counts.low_entropy_fn += 1,
                            Criterion::LowSimilarityFp => counts.low_similarity_fp += 1,
                        }
                        progressed = true;
                        break;
                    }
                }
            }
            if !progressed {
                break;
            }
        }
    }

    if ids.len() < budget {
        let rest = top_up_order(pools, &stats, &seen)?;
        counts.top_up = interleave(rest.iter().map(Vec::as_slice), budget - ids.len(), &mut ids, &mut seen);
    }
    debug_assert_eq!(ids.len(), budget);

    Ok(Selection {
        ids,
        final_z,
        thresholds,
        counts,
        refinements,
    })
}

/// Remaining records ranked per outcome: TPs by descending entropy, FNs by
/// distance from the FN mean, FPs by ascending similarity.
fn top_up_order(pools: &PredicatePools, stats: &PoolStats, seen: &BTreeSet<String>) -> Result<[Vec<String>; 3]> {
    let order = |mut v: Vec<(f64, &str)>, descending: bool| {
        v.sort_by(|a, b| rank(a, b, descending));
        v.into_iter().map(|(_, id)| id.to_string()).collect::<Vec<_>>()
    };
    let fresh = |r: &&PredictionRecord| !seen.contains(&r.instance_id);
    let tp = pools.tp.iter().filter(fresh).map(|r| (r.entropy, r.instance_id.as_str())).collect();
    let fn_ = pools
        .fn_
        .iter()
        .filter(fresh)
        .map(|r| ((r.entropy - stats.fn_.0).abs(), r.instance_id.as_str()))
        .collect();
    let fp = pools
        .fp
        .iter()
        .filter(fresh)
        .map(|r| (r.similarity.unwrap_or(1.0), r.instance_id.as_str()))
        .collect();
    Ok([order(tp, true), order(fn_, true), order(fp, false)])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredicateReport {
    pub predicate: String,
    #[serde(rename = "R_p")]
    pub recall: Option<f64>,
    #[serde(rename = "P_p")]
    pub weight: f64,
    #[serde(rename = "B_p")]
    pub budget: usize,
    #[serde(rename = "N_p")]
    pub available: usize,
    pub final_z: Option<f64>,
    pub selected: usize,
    pub counts: CriterionCounts,
    pub pool_tp: usize,
    pub pool_fn: usize,
    pub pool_fp: usize,
}

#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub partition: DatasetPartition,
    pub selections: BTreeMap<String, Selection>,
    pub report: Vec<PredicateReport>,
}

impl IterationOutcome {
    pub fn selected_ids(&self) -> Vec<String> {
        self.selections.values().flat_map(|s| s.ids.iter().cloned()).collect()
    }
}

/// One adaptive sampling iteration over the current pool.
///
/// `pools` must hold exactly one classified record per pool id; records for
/// ids outside the pool are ignored.
pub fn run_iteration(
    partition: &DatasetPartition,
    pools: &OutcomePools,
    recalls: &BTreeMap<String, f64>,
    cfg: &AdaptiveConfig,
) -> Result<IterationOutcome> {
    cfg.validate()?;
    let mut current = OutcomePools::default();
    let mut covered = BTreeSet::new();
    for (predicate, p) in &pools.per_predicate {
        let mut p = p.clone();
        p.retain(|id| partition.pool().contains(id));
        for r in p.records() {
            if !covered.insert(r.instance_id.clone()) {
                return Err(Error::DuplicateId(r.instance_id.clone()));
            }
            if partition.predicate_of(&r.instance_id) != Some(predicate.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "record `{}` is filed under `{predicate}` but annotated as `{}`",
                    r.instance_id,
                    partition.predicate_of(&r.instance_id).unwrap_or("?")
                )));
            }
        }
        if !p.is_empty() {
            current.per_predicate.insert(predicate.clone(), p);
        }
    }
    if let Some(missing) = partition.pool().iter().find(|id| !covered.contains(*id)) {
        return Err(Error::MissingRecord(missing.clone()));
    }

    let availability: BTreeMap<String, usize> = current
        .per_predicate
        .iter()
        .map(|(p, pools)| (p.clone(), pools.len()))
        .collect();
    let weights = budget_weights(recalls, &availability)?;
    let allocation = allocate_budget(recalls, &availability, cfg.budget)?;

    let mut selections = BTreeMap::new();
    let mut report = Vec::new();
    for (predicate, p) in &current.per_predicate {
        let budget = allocation.per_predicate[predicate];
        let selection = select_for_predicate(p, budget, cfg)?;
        report.push(PredicateReport {
            predicate: predicate.clone(),
            recall: recalls.get(predicate).copied(),
            weight: weights.get(predicate).copied().unwrap_or(0.0),
            budget,
            available: p.len(),
            final_z: selection.final_z,
            selected: selection.ids.len(),
            counts: selection.counts.clone(),
            pool_tp: p.tp.len(),
            pool_fn: p.fn_.len(),
            pool_fp: p.fp.len(),
        });
        selections.insert(predicate.clone(), selection);
    }
    let moved: Vec<String> = selections.values().flat_map(|s| s.ids.iter().cloned()).collect();
    let partition = partition.with_moved_to_train(&moved)?;
    Ok(IterationOutcome {
        partition,
        selections,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RelationCategory;
    use crate::scoring::builtin_provider;

    fn rec(id: &str, outcome: Outcome, entropy: f64, sim: Option<f64>) -> PredictionRecord {
        PredictionRecord {
            instance_id: id.into(),
            predicate: "on".into(),
            predicted_text: String::new(),
            is_negative_prediction: outcome == Outcome::FalseNegative,
            entropy,
            similarity: sim,
            confidence: None,
            embedding: None,
            outcome: Some(outcome),
        }
    }

    fn map<T: Copy>(pairs: &[(&str, T)]) -> BTreeMap<String, T> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn weights_follow_recall_deficit() {
        let a = allocate_budget(
            &map(&[("a", 1.0), ("b", 0.5), ("c", 0.0)]),
            &map(&[("a", 100), ("b", 100), ("c", 100)]),
            9,
        )
        .unwrap();
        assert_eq!(a.per_predicate, map(&[("a", 0), ("b", 3), ("c", 6)]));
    }

    #[test]
    fn equal_recalls_split_uniformly() {
        let a = allocate_budget(
            &map(&[("a", 0.3), ("b", 0.3), ("c", 0.3)]),
            &map(&[("a", 50), ("b", 50), ("c", 50)]),
            12,
        )
        .unwrap();
        assert_eq!(a.per_predicate, map(&[("a", 4), ("b", 4), ("c", 4)]));
        let b = allocate_budget(
            &map(&[("a", 0.3), ("b", 0.3), ("c", 0.3)]),
            &map(&[("a", 50), ("b", 50), ("c", 50)]),
            10,
        )
        .unwrap();
        assert_eq!(b.per_predicate, map(&[("a", 4), ("b", 3), ("c", 3)]));
    }

    #[test]
    fn perfect_recalls_fall_back_to_uniform() {
        let a = allocate_budget(&map(&[("a", 1.0), ("b", 1.0)]), &map(&[("a", 5), ("b", 5)]), 4).unwrap();
        assert_eq!(a.per_predicate, map(&[("a", 2), ("b", 2)]));
    }

    #[test]
    fn cap_at_availability() {
        let a = allocate_budget(&map(&[("a", 0.0), ("b", 0.5)]), &map(&[("a", 2), ("b", 100)]), 9).unwrap();
        // raw: a = 6, b = 3; a capped at 2, excess not redistributed.
        assert_eq!(a.per_predicate, map(&[("a", 2), ("b", 3)]));
    }

    #[test]
    fn missing_recall_is_an_error() {
        assert!(matches!(
            allocate_budget(&map(&[("a", 0.5)]), &map(&[("a", 1), ("b", 1)]), 2),
            Err(Error::MissingRecall(_))
        ));
        // predicates without availability need no recall
        assert!(allocate_budget(&map(&[("a", 0.5)]), &map(&[("a", 1), ("b", 0)]), 2).is_ok());
    }

    #[test]
    fn two_point_thresholds() {
        let pools = PredicatePools {
            tp: vec![
                rec("a", Outcome::TruePositive, 0.2, Some(1.0)),
                rec("b", Outcome::TruePositive, 0.4, Some(1.0)),
            ],
            ..Default::default()
        };
        let t = compute_thresholds(&pools, 1.0).unwrap();
        assert!((t.mu_tp - 0.3).abs() < 1e-12);
        assert!((t.sigma_tp - 0.1).abs() < 1e-12);
        assert!((t.h_tp - 0.4).abs() < 1e-12);
        let zero = compute_thresholds(&pools, 0.0).unwrap();
        assert_eq!(zero.h_tp, zero.mu_tp);
    }

    #[test]
    fn empty_pools_give_zero_thresholds() {
        let t = compute_thresholds(&PredicatePools::default(), 1.96).unwrap();
        assert_eq!([t.h_tp, t.h_fn, t.t_fn, t.t_fp], [0.0; 4]);
        let s = select_for_predicate(&PredicatePools::default(), 0, &AdaptiveConfig::default()).unwrap();
        assert!(s.ids.is_empty());
    }

    #[test]
    fn outlying_fp_selected_without_refinement() {
        let mut fp: Vec<_> = (0..20)
            .map(|i| rec(&format!("f{i:02}"), Outcome::FalsePositive, 0.1, Some(0.9 + 0.001 * i as f64)))
            .collect();
        fp.push(rec("odd", Outcome::FalsePositive, 0.1, Some(0.1)));
        let pools = PredicatePools {
            fp,
            ..Default::default()
        };
        let s = select_for_predicate(&pools, 1, &AdaptiveConfig::default()).unwrap();
        assert_eq!(s.ids, vec!["odd".to_string()]);
        assert_eq!(s.refinements, 0);
        assert_eq!(s.final_z, Some(1.96));
    }

    #[test]
    fn refinement_lowers_z_until_budget_met() {
        let tp: Vec<_> = (0..10)
            .map(|i| rec(&format!("t{i}"), Outcome::TruePositive, i as f64 * 0.1, Some(1.0)))
            .collect();
        let pools = PredicatePools {
            tp,
            ..Default::default()
        };
        let s = select_for_predicate(&pools, 3, &AdaptiveConfig::default()).unwrap();
        assert_eq!(s.ids, vec!["t9", "t8", "t7"]);
        assert!(s.final_z.unwrap() < 1.96);
        assert!(s.refinements > 0);
    }

    #[test]
    fn zero_spread_pool_is_topped_up() {
        let pools = PredicatePools {
            tp: vec![rec("a", Outcome::TruePositive, 0.3, Some(1.0))],
            fp: vec![rec("b", Outcome::FalsePositive, 0.3, Some(0.6))],
            ..Default::default()
        };
        let s = select_for_predicate(&pools, 2, &AdaptiveConfig::default()).unwrap();
        assert_eq!(s.ids.len(), 2);
        assert_eq!(s.counts.top_up, 2);
    }

    #[test]
    fn fixed_mode_uses_given_cut_points() {
        let pools = PredicatePools {
            tp: vec![
                rec("hi", Outcome::TruePositive, 0.9, Some(1.0)),
                rec("lo", Outcome::TruePositive, 0.1, Some(1.0)),
            ],
            fp: vec![rec("fp", Outcome::FalsePositive, 0.2, Some(0.5))],
            ..Default::default()
        };
        let cfg = AdaptiveConfig {
            mode: ThresholdMode::Fixed,
            fixed_thresholds: Some(FixedThresholds::default()),
            ..Default::default()
        };
        let s = select_for_predicate(&pools, 2, &cfg).unwrap();
        assert_eq!(s.ids, vec!["hi", "fp"]);
        assert_eq!(s.final_z, None);
        let s = select_for_predicate(&pools, 3, &cfg).unwrap();
        assert_eq!(s.counts.top_up, 1);
        let bad = AdaptiveConfig {
            mode: ThresholdMode::Fixed,
            ..Default::default()
        };
        assert!(select_for_predicate(&pools, 1, &bad).is_err());
    }

    #[test]
    fn budget_beyond_records_is_an_error() {
        let pools = PredicatePools {
            tp: vec![rec("a", Outcome::TruePositive, 0.3, Some(1.0))],
            ..Default::default()
        };
        assert!(select_for_predicate(&pools, 2, &AdaptiveConfig::default()).is_err());
    }

    fn instance(id: &str, phrase: &str) -> InstructionInstance {
        InstructionInstance {
            instance_id: id.into(),
            triplet_id: id.into(),
            question: String::new(),
            positive_response: format!("Yes, {phrase}."),
            negative_responses: vec![],
            positive_category: RelationCategory::Spatial,
            negative_categories: vec![],
        }
    }

    fn raw(id: &str, text: &str, negative: bool) -> PredictionRecord {
        PredictionRecord {
            instance_id: id.into(),
            predicate: "on".into(),
            predicted_text: text.into(),
            is_negative_prediction: negative,
            entropy: 0.4,
            similarity: None,
            confidence: None,
            embedding: None,
            outcome: None,
        }
    }

    #[test]
    fn classification_rules() {
        let provider = builtin_provider(4096, 1).unwrap();
        let tp = classify(&raw("a", "Yes, girl has hair.", false), &instance("a", "girl has hair"), &provider).unwrap();
        assert_eq!(tp.outcome, Some(Outcome::TruePositive));
        assert_eq!(tp.similarity, Some(1.0));

        let fn_ = classify(
            &raw("b", "No, there is no prominent spatial relation between bag and table.", true),
            &instance("b", "bag on table"),
            &provider,
        )
        .unwrap();
        assert_eq!(fn_.outcome, Some(Outcome::FalseNegative));
        assert_eq!(fn_.similarity, None);

        let fp = classify(&raw("c", "Yes, bag under table.", false), &instance("c", "bag on table"), &provider).unwrap();
        assert_eq!(fp.outcome, Some(Outcome::FalsePositive));
        let expected = similarity("bag under table", "bag on table", &provider).unwrap();
        assert!((fp.similarity.unwrap() - expected).abs() < 1e-12);

        let mut hinted = raw("d", "Yes, bag under table.", false);
        hinted.similarity = Some(0.25);
        let fp = classify(&hinted, &instance("d", "bag on table"), &provider).unwrap();
        assert_eq!(fp.similarity, Some(0.25));
    }

    #[test]
    fn unknown_instance_is_an_error() {
        let provider = builtin_provider(64, 1).unwrap();
        let r = classify_outcomes(&[raw("zz", "Yes, a on b.", false)], &HashMap::new(), &provider);
        assert!(matches!(r, Err(Error::UnknownInstance(id)) if id == "zz"));
    }
}
