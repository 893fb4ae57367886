//! File-level commands behind the CLI: each reads its inputs from disk,
//! runs one stage, and writes its artifacts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::adaptive::{classify_outcomes, run_iteration, PredicateReport};
use crate::balanced::{allocate_round_robin, draw, BudgetAllocation};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::instruction::{generate, is_negative_text, CounterNegativeMap};
use crate::jsonl;
use crate::metrics::{evaluate, per_predicate_recall, MetricsReport};
use crate::mock::{cyclic_confusion, predict, synthesize_pool, LearningCurve, MockModelSpec, MockPrediction};
use crate::model::{
    load_annotations, partition, BeamLogits, DatasetPartition, InstructionInstance, PredicateVocabulary,
    PredictionRecord, RelationCategory, RelationTriplet,
};
use crate::scoring::{entropy, sequence_confidence, BuiltinProvider, EmbeddingProvider, TableProvider};
use crate::seed;

/// One prediction as exchanged with the external model. Either `logits`
/// or `entropy` must be present; when both are, the logits win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordWire {
    pub instance_id: String,
    pub predicted_text: String,
    /// Inferred from the text when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_negative_prediction: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl RecordWire {
    pub fn from_prediction(p: &MockPrediction) -> Self {
        Self {
            instance_id: p.record.instance_id.clone(),
            predicted_text: p.record.predicted_text.clone(),
            is_negative_prediction: Some(p.record.is_negative_prediction),
            logits: Some(p.logits.to_nested()),
            entropy: Some(p.record.entropy),
            confidence: p.record.confidence,
            similarity: None,
            embedding: None,
        }
    }

    pub fn into_record(self, predicate: String) -> Result<PredictionRecord> {
        let logits = self.logits.as_deref().map(BeamLogits::from_nested).transpose()?;
        let entropy = match (&logits, self.entropy) {
            (Some(l), _) => entropy(l),
            (None, Some(h)) if h.is_finite() && h >= 0.0 => h,
            (None, Some(h)) => {
                return Err(Error::InvalidArgument(format!(
                    "record `{}` has invalid entropy {h}",
                    self.instance_id
                )))
            }
            (None, None) => {
                return Err(Error::InvalidArgument(format!(
                    "record `{}` needs logits or entropy",
                    self.instance_id
                )))
            }
        };
        let confidence = self.confidence.or_else(|| logits.as_ref().map(sequence_confidence));
        Ok(PredictionRecord {
            is_negative_prediction: self
                .is_negative_prediction
                .unwrap_or_else(|| is_negative_text(&self.predicted_text)),
            instance_id: self.instance_id,
            predicate,
            predicted_text: self.predicted_text,
            entropy,
            similarity: self.similarity,
            confidence,
            embedding: self.embedding,
            outcome: None,
        })
    }
}

/// Reads wire records, filling each record's predicate from `predicate_of`.
pub fn read_records(path: &Path, predicate_of: impl Fn(&str) -> Option<String>) -> Result<Vec<PredictionRecord>> {
    let mut seen = BTreeSet::new();
    jsonl::read::<RecordWire>(path)?
        .into_iter()
        .map(|(line, wire)| {
            if !seen.insert(wire.instance_id.clone()) {
                return Err(Error::DuplicateId(wire.instance_id));
            }
            let predicate =
                predicate_of(&wire.instance_id).ok_or_else(|| Error::UnknownInstance(wire.instance_id.clone()))?;
            wire.into_record(predicate).map_err(|e| match e {
                Error::LogitsShape(_) | Error::NonFiniteLogits(_) | Error::InvalidArgument(_) => {
                    Error::parse(path, line, e.to_string())
                }
                other => other,
            })
        })
        .collect()
}

pub fn write_predictions(path: &Path, predictions: &[MockPrediction]) -> Result<()> {
    let wire: Vec<RecordWire> = predictions.iter().map(RecordWire::from_prediction).collect();
    jsonl::write(path, &wire)
}

pub fn provider(cfg: &PipelineConfig) -> Result<Box<dyn EmbeddingProvider>> {
    Ok(match &cfg.embedding.table {
        Some(path) => Box::new(TableProvider::load(path)?),
        None => Box::new(BuiltinProvider::new(cfg.embedding.dimension, 0)?),
    })
}

/// `ceil(fraction · (|train| + |pool|))`: the per-loop budget relative to
/// the samples that can ever be trained on.
pub fn loop_budget(partition: &DatasetPartition, fraction: f64) -> usize {
    let n = (partition.train().len() + partition.pool().len()) as f64;
    (n * fraction - 1e-9).ceil().max(0.0) as usize
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn load_inputs(annotations: &Path, vocab: &Path) -> Result<(PredicateVocabulary, Vec<RelationTriplet>)> {
    let vocab = PredicateVocabulary::load(vocab)?;
    let triplets = load_annotations(annotations, &vocab)?;
    Ok((vocab, triplets))
}

pub fn read_recalls(path: &Path) -> Result<BTreeMap<String, f64>> {
    let recalls: BTreeMap<String, f64> = jsonl::read_json(path)?;
    for (p, r) in &recalls {
        if !(0.0..=1.0).contains(r) {
            return Err(Error::InvalidArgument(format!("recall for `{p}` is {r}, outside [0, 1]")));
        }
    }
    Ok(recalls)
}

pub fn cmd_partition(annotations: &Path, vocab: &Path, cfg: &PipelineConfig, out: &Path) -> Result<DatasetPartition> {
    let (_, triplets) = load_inputs(annotations, vocab)?;
    let part = partition(&triplets, cfg.seed, cfg.val_fraction)?;
    part.save(out)?;
    Ok(part)
}

pub fn cmd_gen_instructions(
    annotations: &Path,
    vocab: &Path,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<Vec<InstructionInstance>> {
    let (vocab, triplets) = load_inputs(annotations, vocab)?;
    let instances = generate(&triplets, &vocab, &CounterNegativeMap::default(), &cfg.generation)?;
    jsonl::write(out, &instances)?;
    Ok(instances)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalancedSummary {
    pub budget: usize,
    pub allocation: BTreeMap<String, usize>,
    pub selected: usize,
    /// Budget that could not be placed because the pool ran out.
    pub shortfall: usize,
}

/// Balanced initialization round; writes `partition.json`, `selected.txt`
/// and `report.json` under `out_dir`.
pub fn cmd_sample_balanced(partition_path: &Path, cfg: &PipelineConfig, out_dir: &Path) -> Result<BalancedSummary> {
    let part = DatasetPartition::load(partition_path)?;
    let budget = loop_budget(&part, cfg.budget_fraction_per_loop);
    let (allocation, selected, next) = balanced_round(&part, budget, cfg.seed)?;
    let summary = BalancedSummary {
        budget,
        selected: selected.len(),
        shortfall: budget - allocation.allocated(),
        allocation: allocation.per_predicate,
    };
    create_dir(out_dir)?;
    next.save(&out_dir.join("partition.json"))?;
    write_lines(&out_dir.join("selected.txt"), &selected)?;
    jsonl::write_json(&out_dir.join("report.json"), &summary)?;
    Ok(summary)
}

fn balanced_round(
    part: &DatasetPartition,
    budget: usize,
    seed: u64,
) -> Result<(BudgetAllocation, Vec<String>, DatasetPartition)> {
    let allocation = allocate_round_robin(part.availability(), budget);
    let (selected, next) = draw(part, &allocation, seed)?;
    Ok((allocation, selected, next))
}

pub struct AdaptiveInputs<'a> {
    pub partition: &'a Path,
    pub records: &'a Path,
    pub recalls: &'a Path,
    pub annotations: &'a Path,
    pub vocab: &'a Path,
}

/// One adaptive round; writes `partition.json`, `selected.txt` and a
/// per-predicate `report.jsonl` under `out_dir`.
pub fn cmd_sample_adaptive(
    inputs: &AdaptiveInputs<'_>,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<Vec<PredicateReport>> {
    let part = DatasetPartition::load(inputs.partition)?;
    let (vocab, triplets) = load_inputs(inputs.annotations, inputs.vocab)?;
    let instances = instance_map(&triplets, &vocab, cfg)?;
    let records = read_records(inputs.records, |id| part.predicate_of(id).map(str::to_string))?;
    let recalls = read_recalls(inputs.recalls)?;
    let provider = provider(cfg)?;
    let (selected, next, report) = adaptive_round(&part, &records, &instances, &recalls, provider.as_ref(), cfg)?;
    create_dir(out_dir)?;
    next.save(&out_dir.join("partition.json"))?;
    write_lines(&out_dir.join("selected.txt"), &selected)?;
    jsonl::write(&out_dir.join("report.jsonl"), &report)?;
    Ok(report)
}

fn instance_map(
    triplets: &[RelationTriplet],
    vocab: &PredicateVocabulary,
    cfg: &PipelineConfig,
) -> Result<HashMap<String, InstructionInstance>> {
    Ok(generate(triplets, vocab, &CounterNegativeMap::default(), &cfg.generation)?
        .into_iter()
        .map(|i| (i.instance_id.clone(), i))
        .collect())
}

fn adaptive_round(
    part: &DatasetPartition,
    records: &[PredictionRecord],
    instances: &HashMap<String, InstructionInstance>,
    recalls: &BTreeMap<String, f64>,
    provider: &dyn EmbeddingProvider,
    cfg: &PipelineConfig,
) -> Result<(Vec<String>, DatasetPartition, Vec<PredicateReport>)> {
    let pool_records: Vec<PredictionRecord> =
        records.iter().filter(|r| part.pool().contains(&r.instance_id)).cloned().collect();
    let pools = classify_outcomes(&pool_records, instances, provider)?;
    let mut adaptive = cfg.adaptive;
    adaptive.budget = loop_budget(part, cfg.budget_fraction_per_loop);
    let outcome = run_iteration(part, &pools, recalls, &adaptive)?;
    Ok((outcome.selected_ids(), outcome.partition, outcome.report))
}

pub struct EvalInputs<'a> {
    pub annotations: &'a Path,
    pub vocab: &'a Path,
    pub records: &'a Path,
    /// Restricts ground truth to the validation split and supplies the
    /// training predicates for the unseen count.
    pub partition: Option<&'a Path>,
    /// Where to write per-predicate recall for the next adaptive round.
    pub recalls_out: Option<&'a Path>,
}

/// Scores records against ground truth and writes the metrics JSON. Without
/// a partition, every annotation is ground truth and "unseen" counts
/// predicted predicates that never occur in the annotations.
pub fn cmd_eval(inputs: &EvalInputs<'_>, cfg: &PipelineConfig, out: &Path) -> Result<MetricsReport> {
    let (_, triplets) = load_inputs(inputs.annotations, inputs.vocab)?;
    let predicate_of: HashMap<&str, &str> =
        triplets.iter().map(|t| (t.id.as_str(), t.predicate.as_str())).collect();
    let records = read_records(inputs.records, |id| predicate_of.get(id).map(|p| p.to_string()))?;
    let part = inputs.partition.map(DatasetPartition::load).transpose()?;
    let (gt, train_predicates): (Vec<RelationTriplet>, BTreeSet<String>) = match &part {
        Some(part) => {
            let gt = triplets.iter().filter(|t| part.val().contains(&t.id)).cloned().collect();
            let train = part
                .train()
                .iter()
                .filter_map(|id| part.predicate_of(id))
                .map(str::to_string)
                .collect();
            (gt, train)
        }
        None => (triplets.clone(), triplets.iter().map(|t| t.predicate.clone()).collect()),
    };
    let gt_ids: BTreeSet<&str> = gt.iter().map(|t| t.id.as_str()).collect();
    let records: Vec<PredictionRecord> =
        records.into_iter().filter(|r| gt_ids.contains(r.instance_id.as_str())).collect();
    let provider = provider(cfg)?;
    let report = evaluate(&gt, &records, &cfg.eval, provider.as_ref(), &train_predicates)?;
    jsonl::write_json(out, &report.to_json())?;
    if let Some(path) = inputs.recalls_out {
        let mut recalls = per_predicate_recall(&gt, &records, &cfg.eval, cfg.recall_k)?;
        // Same convention as the simulation: a pool predicate with no
        // validation examples counts as unlearned.
        if let Some(part) = &part {
            for p in part.availability().keys() {
                recalls.entry(p.clone()).or_insert(0.0);
            }
        }
        jsonl::write_json(path, &recalls)?;
    }
    Ok(report)
}

/// Mock predictions for every instance in `instances`, written as wire
/// records with logits.
pub fn cmd_mock_predict(
    instances: &Path,
    annotations: &Path,
    vocab: &Path,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<Vec<MockPrediction>> {
    let (vocab, triplets) = load_inputs(annotations, vocab)?;
    let instances: Vec<InstructionInstance> = jsonl::read(instances)?.into_iter().map(|(_, i)| i).collect();
    let by_id: HashMap<String, RelationTriplet> = triplets.into_iter().map(|t| (t.id.clone(), t)).collect();
    let mut spec = MockModelSpec::uniform(&vocab, cfg.mock.accuracy, cfg.mock.negative_rate)?;
    apply_mock_shape(&mut spec, cfg);
    spec.seed = seed::derive(cfg.seed, seed::MOCK);
    let predictions = predict(&instances, &by_id, &spec)?;
    write_predictions(out, &predictions)?;
    Ok(predictions)
}

fn apply_mock_shape(spec: &mut MockModelSpec, cfg: &PipelineConfig) {
    spec.sharpness = cfg.mock.sharpness;
    spec.beams = cfg.mock.beams;
    spec.length = cfg.mock.length;
    spec.vocab = cfg.mock.vocab;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopSummary {
    pub index: usize,
    pub kind: &'static str,
    pub budget: usize,
    pub selected: usize,
    pub tail_selected: usize,
    pub train_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub loops: Vec<LoopSummary>,
    pub train_size: usize,
    pub tail_in_train: usize,
    pub tail_share: f64,
    pub train_per_predicate: BTreeMap<String, usize>,
    /// Holdout mR per k.
    pub mean_recall: BTreeMap<usize, f64>,
    pub recall: BTreeMap<usize, f64>,
    pub metrics: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub pool_size: usize,
    pub head: Vec<String>,
    pub tail: Vec<String>,
    pub strategies: Vec<StrategySummary>,
}

impl SimulationSummary {
    pub fn strategy(&self, name: &str) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.strategy == name)
    }
}

struct World {
    vocab: PredicateVocabulary,
    head: BTreeSet<String>,
    triplets: HashMap<String, RelationTriplet>,
    instances: HashMap<String, InstructionInstance>,
    holdout: Vec<RelationTriplet>,
    holdout_instances: Vec<InstructionInstance>,
    start: DatasetPartition,
}

impl World {
    fn build(cfg: &PipelineConfig) -> Result<Self> {
        let sim = &cfg.sim;
        let entries = sim
            .predicates
            .iter()
            .map(|(p, c)| {
                let category: RelationCategory = c.parse().map_err(|e: Error| Error::config("sim.predicates", e.to_string()))?;
                Ok((p.as_str(), category))
            })
            .collect::<Result<Vec<_>>>()?;
        let vocab = PredicateVocabulary::new(entries)?;
        let head: BTreeSet<String> = vocab.predicates()[..sim.head_predicates].iter().cloned().collect();
        let freqs: BTreeMap<String, usize> = vocab
            .predicates()
            .iter()
            .map(|p| {
                let n = if head.contains(p) { sim.head_frequency } else { sim.tail_frequency };
                (p.clone(), n)
            })
            .collect();
        let pool = synthesize_pool(&vocab, &freqs, seed::derive(cfg.seed, "sim/pool"))?;
        let holdout_freqs = vocab
            .predicates()
            .iter()
            .map(|p| (p.clone(), sim.holdout_per_predicate))
            .collect();
        let holdout = synthesize_pool(&vocab, &holdout_freqs, seed::derive(cfg.seed, "sim/holdout"))?;
        let start = partition(&pool, cfg.seed, cfg.val_fraction)?;
        let map = CounterNegativeMap::default();
        let instances = generate(&pool, &vocab, &map, &cfg.generation)?
            .into_iter()
            .map(|i| (i.instance_id.clone(), i))
            .collect();
        let holdout_instances = generate(&holdout, &vocab, &map, &cfg.generation)?;
        Ok(Self {
            vocab,
            head,
            triplets: pool.into_iter().chain(holdout.iter().cloned()).map(|t| (t.id.clone(), t)).collect(),
            instances,
            holdout,
            holdout_instances,
            start,
        })
    }

    /// The simulated model after training on `part`'s train split: accuracy
    /// follows the learning curve in each predicate's training count.
    fn model(&self, cfg: &PipelineConfig, part: &DatasetPartition, seed: u64) -> Result<MockModelSpec> {
        let sim = &cfg.sim;
        let curve = LearningCurve {
            cap: sim.learning_cap,
            scale: sim.learning_scale,
        };
        let counts = train_counts(part);
        let mut accuracy = BTreeMap::new();
        let mut negative = BTreeMap::new();
        for p in self.vocab.predicates() {
            let base = if self.head.contains(p) { sim.head_accuracy } else { sim.tail_accuracy };
            let acc = curve.accuracy(base, counts.get(p).copied().unwrap_or(0));
            accuracy.insert(p.clone(), acc);
            negative.insert(p.clone(), (1.0 - acc) * sim.negative_share);
        }
        let mut spec = MockModelSpec {
            per_predicate_accuracy: accuracy,
            confusion: cyclic_confusion(self.vocab.predicates()),
            negative_rate: negative,
            sharpness: 1.0,
            beams: 1,
            length: 1,
            vocab: 2,
            seed,
        };
        apply_mock_shape(&mut spec, cfg);
        spec.validate()?;
        Ok(spec)
    }

    fn predict_ids<'a>(&self, ids: impl IntoIterator<Item = &'a String>, spec: &MockModelSpec) -> Result<Vec<PredictionRecord>> {
        let instances: Vec<InstructionInstance> = ids.into_iter().map(|id| self.instances[id].clone()).collect();
        Ok(predict(&instances, &self.triplets, spec)?.into_iter().map(|p| p.record).collect())
    }

    fn tail_count<'a>(&self, part: &DatasetPartition, ids: impl IntoIterator<Item = &'a String>) -> usize {
        ids.into_iter()
            .filter(|id| part.predicate_of(id).is_some_and(|p| !self.head.contains(p)))
            .count()
    }
}

fn train_counts(part: &DatasetPartition) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for id in part.train() {
        if let Some(p) = part.predicate_of(id) {
            *counts.entry(p.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

/// Closed-loop comparison on a synthetic long-tailed pool: every strategy
/// starts from the same partition, spends the same per-loop budget, and is
/// scored on the same balanced holdout with the same mock noise.
pub fn simulate(cfg: &PipelineConfig, out_dir: Option<&Path>) -> Result<SimulationSummary> {
    let world = World::build(cfg)?;
    let provider = provider(cfg)?;
    let mut strategies = Vec::new();
    for name in &cfg.sim.strategies {
        let dir = out_dir.map(|d| d.join(name));
        strategies.push(run_strategy(&world, cfg, provider.as_ref(), name, dir.as_deref())?);
    }
    let summary = SimulationSummary {
        seed: cfg.seed,
        pool_size: world.start.train().len() + world.start.pool().len() + world.start.val().len(),
        head: world.head.iter().cloned().collect(),
        tail: world
            .vocab
            .predicates()
            .iter()
            .filter(|p| !world.head.contains(*p))
            .cloned()
            .collect(),
        strategies,
    };
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        jsonl::write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

fn run_strategy(
    world: &World,
    cfg: &PipelineConfig,
    provider: &dyn EmbeddingProvider,
    name: &str,
    dir: Option<&Path>,
) -> Result<StrategySummary> {
    let mut part = world.start.clone();
    let val_gt: Vec<RelationTriplet> = part.val().iter().map(|id| world.triplets[id].clone()).collect();
    let mut loops = Vec::new();
    for index in 0..cfg.loop_count() {
        let budget = loop_budget(&part, cfg.budget_fraction_per_loop);
        let loop_seed = seed::derive(cfg.seed, &format!("sim/{name}/loop{index}"));
        let (kind, selected, next, report) = match name {
            "random" => {
                let mut ids: Vec<String> = part.pool().iter().cloned().collect();
                let mut rng = seed::rng(loop_seed, "random");
                let (picked, _) = ids.partial_shuffle(&mut rng, budget.min(part.pool().len()));
                let mut picked = picked.to_vec();
                picked.sort();
                let next = part.with_moved_to_train(&picked)?;
                ("random", picked, next, None)
            }
            _ if index == 0 => {
                let (allocation, selected, next) = balanced_round(&part, budget, loop_seed)?;
                ("balanced", selected, next, Some(serde_json::to_value(&allocation).expect("serializable")))
            }
            _ => {
                let spec = world.model(cfg, &part, loop_seed)?;
                let records = world.predict_ids(part.pool(), &spec)?;
                let val_records = world.predict_ids(part.val(), &spec)?;
                let mut recalls = per_predicate_recall(&val_gt, &val_records, &cfg.eval, cfg.recall_k)?;
                // Predicates without validation examples count as unlearned.
                for p in part.availability().keys() {
                    recalls.entry(p.clone()).or_insert(0.0);
                }
                let (selected, next, report) =
                    adaptive_round(&part, &records, &world.instances, &recalls, provider, cfg)?;
                ("adaptive", selected, next, Some(serde_json::to_value(&report).expect("serializable")))
            }
        };
        loops.push(LoopSummary {
            index,
            kind,
            budget,
            selected: selected.len(),
            tail_selected: world.tail_count(&part, &selected),
            train_size: next.train().len(),
        });
        if let Some(dir) = dir {
            let loop_dir = dir.join(format!("loop_{index}"));
            create_dir(&loop_dir)?;
            next.save(&loop_dir.join("partition.json"))?;
            write_lines(&loop_dir.join("selected.txt"), &selected)?;
            if let Some(report) = report {
                jsonl::write_json(&loop_dir.join("report.json"), &report)?;
            }
        }
        part = next;
    }

    let spec = world.model(cfg, &part, seed::derive(cfg.seed, "sim/holdout-model"))?;
    let records: Vec<PredictionRecord> = predict(&world.holdout_instances, &world.triplets, &spec)?
        .into_iter()
        .map(|p| p.record)
        .collect();
    let train_predicates: BTreeSet<String> = train_counts(&part).into_keys().collect();
    let metrics = evaluate(&world.holdout, &records, &cfg.eval, provider, &train_predicates)?;
    if let Some(dir) = dir {
        jsonl::write_json(&dir.join("metrics.json"), &metrics.to_json())?;
    }
    let train_size = part.train().len();
    let tail_in_train = world.tail_count(&part, part.train());
    Ok(StrategySummary {
        strategy: name.to_string(),
        loops,
        train_size,
        tail_in_train,
        tail_share: if train_size == 0 { 0.0 } else { tail_in_train as f64 / train_size as f64 },
        train_per_predicate: train_counts(&part),
        mean_recall: metrics.at_k.iter().map(|(k, m)| (*k, m.mean_recall)).collect(),
        recall: metrics.at_k.iter().map(|(k, m)| (*k, m.recall)).collect(),
        metrics: metrics.to_json(),
    })
}

pub fn cmd_simulate(cfg: &PipelineConfig, out_dir: &Path) -> Result<SimulationSummary> {
    simulate(cfg, Some(out_dir))
}

