//! Uncertainty and dissimilarity scores.
//!
//! Entropy is the mean token-distribution entropy (nats) over every beam and
//! position of a decoded sequence. Similarity is the cosine between phrase
//! embeddings supplied by an [`EmbeddingProvider`].

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{normalize_phrase, BeamLogits};

/// `-(1 / (M·L)) Σ P log P` with the softmax taken over the vocabulary axis.
pub fn entropy(logits: &BeamLogits) -> f64 {
    let slices = logits.beams() * logits.length();
    let total: f64 = logits.slices().map(slice_entropy).sum();
    let h = total / slices as f64;
    h.clamp(0.0, (logits.vocab() as f64).ln())
}

/// Entropy of raw `beams × length × vocab` values, validating shape and
/// finiteness.
pub fn entropy_of(values: &[f64], beams: usize, length: usize, vocab: usize) -> Result<f64> {
    let logits = BeamLogits::new(beams, length, vocab, values.to_vec())?;
    Ok(entropy(&logits))
}

// Shift by the slice max; H = log Z - Σ p·x' with x' = x - max.
fn slice_entropy(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut weighted = 0.0;
    for &x in row {
        let shifted = x - max;
        let e = shifted.exp();
        z += e;
        weighted += e * shifted;
    }
    z.ln() - weighted / z
}

/// Mean log-probability of the arg-max token along the first beam.
pub fn sequence_confidence(logits: &BeamLogits) -> f64 {
    let mut sum = 0.0;
    for row in logits.beam(0) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|x| (x - max).exp()).sum();
        sum -= z.ln();
    }
    sum / logits.length() as f64
}

pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// Unit-norm embedding of `phrase`.
    fn embed(&self, phrase: &str) -> Result<Vec<f64>>;
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub fn similarity(predicted: &str, ground_truth: &str, provider: &dyn EmbeddingProvider) -> Result<f64> {
    if predicted.trim().is_empty() || ground_truth.trim().is_empty() {
        return Err(Error::EmptyPhrase);
    }
    let a = provider.embed(predicted)?;
    let b = provider.embed(ground_truth)?;
    Ok(cosine(&a, &b))
}

/// Bag-of-tokens stand-in for a sentence encoder: each whitespace token
/// hashes to one basis direction, and a phrase is the normalized sum of its
/// tokens' directions. Phrases sharing tokens land closer together.
#[derive(Debug, Clone)]
pub struct BuiltinProvider {
    dimension: usize,
    seed: u64,
}

impl BuiltinProvider {
    pub fn new(dimension: usize, seed: u64) -> Result<Self> {
        if dimension < 8 {
            return Err(Error::InvalidArgument(format!(
                "embedding dimension must be >= 8, got {dimension}"
            )));
        }
        Ok(Self { dimension, seed })
    }

    fn slot(&self, token: &str) -> usize {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(token.as_bytes());
        let d = h.finalize();
        let mut b = [0u8; 8];
        b.copy_from_slice(&d[..8]);
        (u64::from_le_bytes(b) % self.dimension as u64) as usize
    }
}

pub fn builtin_provider(dimension: usize, seed: u64) -> Result<BuiltinProvider> {
    BuiltinProvider::new(dimension, seed)
}

impl EmbeddingProvider for BuiltinProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, phrase: &str) -> Result<Vec<f64>> {
        let phrase = normalize_phrase(phrase);
        if phrase.is_empty() {
            return Err(Error::EmptyPhrase);
        }
        let mut v = vec![0.0; self.dimension];
        for token in phrase.split(' ') {
            v[self.slot(token)] += 1.0;
        }
        normalize(&mut v);
        Ok(v)
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Lookup provider over a precomputed phrase table.
#[derive(Debug, Clone)]
pub struct TableProvider {
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl TableProvider {
    pub fn from_rows<S: AsRef<str>>(rows: impl IntoIterator<Item = (S, Vec<f64>)>) -> Result<Self> {
        let mut dimension = None;
        let mut vectors = BTreeMap::new();
        for (phrase, mut v) in rows {
            let key = normalize_phrase(phrase.as_ref());
            if key.is_empty() {
                return Err(Error::EmbeddingTable("empty phrase".into()));
            }
            match dimension {
                None => dimension = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::EmbeddingTable(format!(
                        "`{key}` has dimension {} but table has {d}",
                        v.len()
                    )))
                }
                Some(_) => {}
            }
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::EmbeddingTable(format!("`{key}` has an invalid vector")));
            }
            if normalize(&mut v) == 0.0 {
                return Err(Error::EmbeddingTable(format!("`{key}` has a zero vector")));
            }
            if vectors.insert(key.clone(), v).is_some() {
                return Err(Error::EmbeddingTable(format!("duplicate phrase `{key}`")));
            }
        }
        let dimension =
            dimension.ok_or_else(|| Error::EmbeddingTable("table has no rows".into()))?;
        Ok(Self { dimension, vectors })
    }

    /// Rows are `phrase<TAB>x1 x2 ... xd`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (phrase, nums) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, idx + 1, "expected `phrase<TAB>values`"))?;
            let v = nums
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(path, idx + 1, format!("bad number: {e}")))?;
            rows.push((phrase.to_string(), v));
        }
        Self::from_rows(rows)
    }
}

pub fn external_provider(path: &Path) -> Result<TableProvider> {
    TableProvider::load(path)
}

impl EmbeddingProvider for TableProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, phrase: &str) -> Result<Vec<f64>> {
        let key = normalize_phrase(phrase);
        if key.is_empty() {
            return Err(Error::EmptyPhrase);
        }
        self.vectors
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::MissingPhrase(phrase.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn logits(m: usize, l: usize, v: usize, values: Vec<f64>) -> BeamLogits {
        BeamLogits::new(m, l, v, values).unwrap()
    }

    #[test]
    fn uniform_pair_is_ln2() {
        let h = entropy(&logits(1, 1, 2, vec![0.0, 0.0]));
        assert!((h - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn near_one_hot_is_zero() {
        let h = entropy(&logits(1, 1, 4, vec![50.0, 0.0, 0.0, 0.0]));
        assert!(h <= 1e-12, "{h}");
    }

    #[test]
    fn huge_logits_stay_finite() {
        let h = entropy(&logits(1, 2, 3, vec![1e300, 1e300, -1e300, 700.0, 710.0, 720.0]));
        assert!(h.is_finite());
    }

    #[test]
    fn entropy_of_rejects_non_finite() {
        assert!(matches!(
            entropy_of(&[0.0, f64::INFINITY], 1, 1, 2),
            Err(Error::NonFiniteLogits(1))
        ));
    }

    #[test]
    fn confidence_of_uniform_is_minus_ln_v() {
        let c = sequence_confidence(&logits(1, 2, 4, vec![0.0; 8]));
        assert!((c + 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn builtin_geometry() {
        let p = builtin_provider(1 << 16, 11).unwrap();
        let s = similarity("a b", "a c", &p).unwrap();
        assert!((s - 0.5).abs() < 1e-9, "{s}");
        assert_eq!(p.embed("girl has hair").unwrap(), p.embed("girl has hair").unwrap());
        let one = p.embed("a").unwrap();
        let two = p.embed("a a").unwrap();
        assert!(one.iter().zip(&two).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!((similarity("x y z", "x y z", &p).unwrap() - 1.0).abs() < 1e-9);
        assert!(builtin_provider(4, 0).is_err());
        assert!(matches!(similarity("", "a", &p), Err(Error::EmptyPhrase)));
    }

    #[test]
    fn table_provider_contract() {
        let p = TableProvider::from_rows([("up", vec![2.0, 0.0]), ("right", vec![0.0, 3.0])]).unwrap();
        assert_eq!(p.embed("up").unwrap(), vec![1.0, 0.0]);
        assert!(similarity("up", "right", &p).unwrap().abs() < 1e-9);
        assert!(matches!(p.embed("down"), Err(Error::MissingPhrase(_))));
        assert!(TableProvider::from_rows([("z", vec![0.0, 0.0])]).is_err());
        assert!(TableProvider::from_rows([("a", vec![1.0]), ("b", vec![1.0, 2.0])]).is_err());
    }

    #[test]
    fn table_orders_close_phrases_above_contradictions() {
        let p = TableProvider::from_rows([
            ("girl with hair", vec![1.0, 0.2, 0.0]),
            ("girl has hair", vec![1.0, 0.25, 0.05]),
            ("bag on table", vec![0.0, 1.0, 0.0]),
            ("bag under table", vec![0.3, 0.6, 0.7]),
        ])
        .unwrap();
        let close = similarity("girl with hair", "girl has hair", &p).unwrap();
        let far = similarity("bag on table", "bag under table", &p).unwrap();
        assert!(close > far);
    }

    fn tensor() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>)> {
        (1usize..=4, 1usize..=8, 1usize..=32).prop_flat_map(|(m, l, v)| {
            prop::collection::vec(-30.0f64..30.0, m * l * v).prop_map(move |vals| (m, l, v, vals))
        })
    }

    proptest! {
        #[test]
        fn entropy_is_bounded((m, l, v, vals) in tensor()) {
            let h = entropy(&logits(m, l, v, vals));
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (v as f64).ln() + 1e-12);
        }

        #[test]
        fn entropy_is_shift_invariant((m, l, v, vals) in tensor(), shift in -100.0f64..100.0, slice in 0usize..32) {
            let base = entropy(&logits(m, l, v, vals.clone()));
            let k = slice % (m * l);
            let mut moved = vals;
            moved[k * v..(k + 1) * v].iter_mut().for_each(|x| *x += shift);
            let shifted = entropy(&logits(m, l, v, moved));
            prop_assert!((base - shifted).abs() < 1e-9);
        }

        #[test]
        fn similarity_symmetric_and_bounded(a in "[a-e]{1,3}( [a-e]{1,3}){0,3}", b in "[a-e]{1,3}( [a-e]{1,3}){0,3}") {
            let p = builtin_provider(64, 5).unwrap();
            let ab = similarity(&a, &b, &p).unwrap();
            let ba = similarity(&b, &a, &p).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
            prop_assert!((similarity(&a, &a, &p).unwrap() - 1.0).abs() < 1e-9);
        }
    }
}
