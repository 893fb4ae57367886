//! Reference implementations written from the algorithm descriptions,
//! sharing no code with the library, plus fixture helpers.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use art_core::model::{Outcome, PredictionRecord, RelationTriplet};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Mean over beams and positions of the Shannon entropy of the softmax over
/// the vocabulary, summed term by term without any stabilization.
pub fn brute_entropy(values: &[f64], beams: usize, length: usize, vocab: usize) -> f64 {
    let mut total = 0.0;
    for m in 0..beams {
        for l in 0..length {
            let row = &values[(m * length + l) * vocab..(m * length + l + 1) * vocab];
            let z: f64 = row.iter().map(|x| x.exp()).sum();
            for x in row {
                let p = x.exp() / z;
                if p > 0.0 {
                    total -= p * p.ln();
                }
            }
        }
    }
    total / (beams * length) as f64
}

/// Hands out the budget one slot per turn, visiting predicates by
/// descending availability (ties by name) and skipping exhausted ones.
pub fn literal_round_robin(availability: &BTreeMap<String, usize>, mut budget: usize) -> BTreeMap<String, usize> {
    let mut order: Vec<&String> = availability.keys().collect();
    order.sort_by(|a, b| availability[*b].cmp(&availability[*a]).then(a.cmp(b)));
    let mut given: BTreeMap<String, usize> = availability.keys().map(|p| (p.clone(), 0)).collect();
    loop {
        let mut any = false;
        for p in &order {
            if budget == 0 {
                return given;
            }
            let g = given.get_mut(*p).unwrap();
            if *g < availability[*p] {
                *g += 1;
                budget -= 1;
                any = true;
            }
        }
        if !any {
            return given;
        }
    }
}

/// A pool record reduced to what selection looks at.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub outcome: Outcome,
    pub entropy: f64,
    pub similarity: f64,
}

impl Sample {
    pub fn record(&self, predicate: &str) -> PredictionRecord {
        PredictionRecord {
            instance_id: self.id.clone(),
            predicate: predicate.to_string(),
            predicted_text: String::new(),
            is_negative_prediction: self.outcome == Outcome::FalseNegative,
            entropy: self.entropy,
            similarity: (self.outcome == Outcome::FalsePositive).then_some(self.similarity),
            confidence: None,
            embedding: None,
            outcome: Some(self.outcome),
        }
    }

    fn value(&self) -> f64 {
        match self.outcome {
            Outcome::FalsePositive => self.similarity,
            _ => self.entropy,
        }
    }
}

fn stats(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mut sum = 0.0;
    for x in xs {
        sum += x;
    }
    let mean = sum / xs.len() as f64;
    let mut sq = 0.0;
    for x in xs {
        sq += (x - mean) * (x - mean);
    }
    (mean, (sq / xs.len() as f64).sqrt())
}

fn sorted_ids(mut v: Vec<(f64, String)>, descending: bool) -> Vec<String> {
    v.sort_by(|a, b| {
        let c = if descending { b.0.partial_cmp(&a.0) } else { a.0.partial_cmp(&b.0) };
        c.unwrap().then(a.1.cmp(&b.1))
    });
    v.into_iter().map(|(_, id)| id).collect()
}

fn round_robin(lists: &[Vec<String>], limit: usize, out: &mut Vec<String>) {
    let mut pos = vec![0; lists.len()];
    let target = out.len() + limit;
    loop {
        let before = out.len();
        for (i, list) in lists.iter().enumerate() {
            if out.len() == target {
                return;
            }
            while pos[i] < list.len() {
                let id = &list[pos[i]];
                pos[i] += 1;
                if !out.contains(id) {
                    out.push(id.clone());
                    break;
                }
            }
        }
        if out.len() == before {
            return;
        }
    }
}

/// Per-predicate adaptive selection re-executed naively: relax z by `step`
/// until the union of the four candidate sets covers the budget, or until z
/// is past the point where every record of a pool with spread qualifies.
/// Overshoot is trimmed round-robin over the ranked criteria; a shortfall
/// is filled round-robin from the remaining TPs (entropy high first), FNs
/// (furthest from the FN mean first) and FPs (least similar first).
pub fn naive_select(samples: &[Sample], budget: usize, z_init: f64, step: f64) -> (Vec<String>, f64) {
    let of = |o: Outcome| samples.iter().filter(move |s| s.outcome == o);
    let (mu_tp, sd_tp) = stats(&of(Outcome::TruePositive).map(|s| s.entropy).collect::<Vec<_>>());
    let (mu_fn, sd_fn) = stats(&of(Outcome::FalseNegative).map(|s| s.entropy).collect::<Vec<_>>());
    let (mu_fp, sd_fp) = stats(&of(Outcome::FalsePositive).map(|s| s.similarity).collect::<Vec<_>>());

    // Below this z every record of a pool with nonzero spread qualifies.
    let mut z_floor = 0.0f64;
    for s in samples {
        let (mu, sd) = match s.outcome {
            Outcome::TruePositive => (mu_tp, sd_tp),
            Outcome::FalseNegative => (mu_fn, sd_fn),
            Outcome::FalsePositive => (mu_fp, sd_fp),
        };
        if sd > 0.0 {
            z_floor = z_floor.min(-((s.value() - mu).abs() / sd) - 1.0);
        }
    }

    let mut z = z_init;
    let lists = loop {
        let mut tp_hi = Vec::new();
        let mut fn_hi = Vec::new();
        let mut fn_lo = Vec::new();
        let mut fp_lo = Vec::new();
        for s in samples {
            match s.outcome {
                Outcome::TruePositive if s.entropy > mu_tp + z * sd_tp => tp_hi.push((s.entropy, s.id.clone())),
                Outcome::FalseNegative => {
                    if s.entropy > mu_fn + z * sd_fn {
                        fn_hi.push((s.entropy, s.id.clone()));
                    }
                    if s.entropy < mu_fn - z * sd_fn {
                        fn_lo.push((s.entropy, s.id.clone()));
                    }
                }
                Outcome::FalsePositive if s.similarity < mu_fp - z * sd_fp => {
                    fp_lo.push((s.similarity, s.id.clone()))
                }
                _ => {}
            }
        }
        let union: BTreeSet<String> = tp_hi
            .iter()
            .chain(&fn_hi)
            .chain(&fn_lo)
            .chain(&fp_lo)
            .map(|(_, id)| id.clone())
            .collect();
        if union.len() >= budget || z < z_floor {
            break [
                sorted_ids(tp_hi, true),
                sorted_ids(fn_hi, true),
                sorted_ids(fn_lo, false),
                sorted_ids(fp_lo, false),
            ];
        }
        z -= step;
    };

    let mut chosen = Vec::new();
    round_robin(&lists, budget, &mut chosen);
    if chosen.len() < budget {
        let rest = |o: Outcome| -> Vec<&Sample> {
            samples.iter().filter(|s| s.outcome == o && !chosen.contains(&s.id)).collect()
        };
        let tp = sorted_ids(rest(Outcome::TruePositive).iter().map(|s| (s.entropy, s.id.clone())).collect(), true);
        let fn_ = sorted_ids(
            rest(Outcome::FalseNegative).iter().map(|s| ((s.entropy - mu_fn).abs(), s.id.clone())).collect(),
            true,
        );
        let fp = sorted_ids(rest(Outcome::FalsePositive).iter().map(|s| (s.similarity, s.id.clone())).collect(), false);
        let missing = budget - chosen.len();
        round_robin(&[tp, fn_, fp], missing, &mut chosen);
    }
    (chosen, z)
}

/// `(1 - R_p) / Σ (1 - R_j)` scaled by the budget, floored, capped at the
/// availability, with the leftover going to the largest fractional parts.
pub fn reference_allocation(
    recalls: &BTreeMap<String, f64>,
    availability: &BTreeMap<String, usize>,
    budget: usize,
) -> BTreeMap<String, usize> {
    let live: Vec<&String> = availability.keys().filter(|p| availability[*p] > 0).collect();
    let deficit: f64 = live.iter().map(|p| 1.0 - recalls[*p]).sum();
    let mut out: BTreeMap<String, usize> = availability.keys().map(|p| (p.clone(), 0)).collect();
    let mut parts = Vec::new();
    let mut used = 0;
    for p in &live {
        let w = if deficit > 0.0 { (1.0 - recalls[*p]) / deficit } else { 1.0 / live.len() as f64 };
        let exact = budget as f64 * w;
        let floor = (exact + 1e-9).floor() as usize;
        used += floor;
        out.insert((*p).clone(), floor.min(availability[*p]));
        parts.push((exact - floor as f64, (*p).clone(), w));
    }
    parts.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut left = budget.saturating_sub(used);
    for (_, p, w) in parts {
        if left > 0 && w > 0.0 && out[&p] < availability[&p] {
            *out.get_mut(&p).unwrap() += 1;
            left -= 1;
        }
    }
    out
}

/// Expected instruction strings for one triplet, written out by hand.
pub fn expected_question(t: &RelationTriplet, category: &str) -> String {
    format!(
        "Is there a prominent {category} relation between {} (subject) and {} (object) in the image?",
        t.subject, t.object
    )
}

pub fn expected_positive(t: &RelationTriplet) -> String {
    format!("Yes, {} {} {}.", t.subject, t.predicate, t.object)
}

pub fn expected_negative(t: &RelationTriplet, category: &str) -> String {
    format!("No, there is no prominent {category} relation between {} and {}.", t.subject, t.object)
}

/// Categories a counter negative may use for a positive of `category`.
pub fn exclusive_with(category: &str) -> &'static [&'static str] {
    match category {
        "spatial" => &["possessive"],
        "possessive" => &["spatial", "semantic"],
        "semantic" => &["possessive"],
        other => panic!("unknown category {other}"),
    }
}

pub fn triplet(id: &str, image: &str, s: &str, p: &str, o: &str) -> RelationTriplet {
    RelationTriplet {
        id: id.into(),
        image_id: image.into(),
        subject: s.into(),
        object: o.into(),
        predicate: p.into(),
        subject_box: [0.0, 0.0, 10.0, 10.0],
        object_box: [5.0, 5.0, 20.0, 20.0],
    }
}

pub fn prediction(id: &str, predicate: &str, text: &str, confidence: f64) -> PredictionRecord {
    PredictionRecord {
        instance_id: id.into(),
        predicate: predicate.into(),
        predicted_text: text.into(),
        is_negative_prediction: text.starts_with("No"),
        entropy: -confidence,
        similarity: None,
        confidence: Some(confidence),
        embedding: None,
        outcome: None,
    }
}

/// Six triplets over three images: four recovered exactly, one wrong
/// predicate close to the truth, one refusal.
pub fn metrics_fixture() -> (Vec<RelationTriplet>, Vec<PredictionRecord>) {
    let gt = vec![
        triplet("t1", "A", "man", "on", "horse"),
        triplet("t2", "A", "man", "has", "hat"),
        triplet("t3", "B", "cup", "on", "table"),
        triplet("t4", "B", "woman", "wearing", "shirt"),
        triplet("t5", "C", "boy", "riding", "horse"),
        triplet("t6", "C", "boy", "has", "bag"),
    ];
    let records = vec![
        prediction("t1", "on", "Yes, man on horse.", -0.1),
        prediction("t2", "has", "Yes, man has hat.", -0.5),
        prediction("t3", "on", "Yes, cup on table.", -0.2),
        prediction("t4", "wearing", "Yes, woman has shirt.", -0.3),
        prediction("t5", "riding", "Yes, boy riding horse.", -0.1),
        prediction("t6", "has", "No, there is no prominent possessive relation between boy and bag.", -0.4),
    ];
    (gt, records)
}

pub fn sha256_file(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

/// Digest of every file under `dir`, keyed by relative path.
pub fn digest_tree(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, sha256_file(&path));
            }
        }
    }
    out
}
