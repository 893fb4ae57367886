//! Flat `key = value` pipeline configuration. Dotted keys group settings by
//! stage; `#` starts a comment. Every key is optional and unknown keys are
//! rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adaptive::{AdaptiveConfig, FixedThresholds, ThresholdMode};
use crate::error::{Error, Result};
use crate::instruction::{GenerationConfig, NegativeMode};
use crate::metrics::{EvalConfig, RankingKey};

pub const SEED_ENV: &str = "ART_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    pub dimension: usize,
    /// Phrase-to-vector table; the built-in hashed provider is used when absent.
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockConfig {
    pub accuracy: f64,
    pub negative_rate: f64,
    pub sharpness: f64,
    pub beams: usize,
    pub length: usize,
    pub vocab: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Predicates and categories in frequency order; the first
    /// `head_predicates` are head classes.
    pub predicates: Vec<(String, String)>,
    pub head_predicates: usize,
    pub head_frequency: usize,
    pub tail_frequency: usize,
    pub head_accuracy: f64,
    pub tail_accuracy: f64,
    /// Share of wrong answers that are refusals rather than wrong predicates.
    pub negative_share: f64,
    pub learning_cap: f64,
    pub learning_scale: f64,
    pub holdout_per_predicate: usize,
    pub strategies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub budget_fraction_per_loop: f64,
    pub total_fraction: f64,
    /// Explicit loop count; derived from the fractions when `None`.
    pub loops: Option<usize>,
    pub val_fraction: f64,
    pub generation: GenerationConfig,
    pub adaptive: AdaptiveConfig,
    /// Rank cut-off for the recall that drives allocation; `None` uses every
    /// prediction.
    pub recall_k: Option<usize>,
    pub eval: EvalConfig,
    pub embedding: EmbeddingConfig,
    pub mock: MockConfig,
    pub sim: SimConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let predicates = [
            ("on", "spatial"),
            ("has", "possessive"),
            ("wearing", "semantic"),
            ("near", "spatial"),
            ("holding", "semantic"),
            ("behind", "spatial"),
            ("part of", "possessive"),
            ("riding", "semantic"),
            ("under", "spatial"),
            ("carrying", "semantic"),
        ];
        Self {
            seed: 0,
            budget_fraction_per_loop: 0.02,
            total_fraction: 0.12,
            loops: None,
            val_fraction: 0.1,
            generation: GenerationConfig::default(),
            adaptive: AdaptiveConfig {
                fixed_thresholds: Some(FixedThresholds::default()),
                ..AdaptiveConfig::default()
            },
            recall_k: None,
            eval: EvalConfig::default(),
            embedding: EmbeddingConfig {
                dimension: 256,
                table: None,
            },
            mock: MockConfig {
                accuracy: 0.8,
                negative_rate: 0.05,
                sharpness: 4.0,
                beams: 2,
                length: 4,
                vocab: 16,
            },
            sim: SimConfig {
                predicates: predicates.iter().map(|(p, c)| (p.to_string(), c.to_string())).collect(),
                head_predicates: 5,
                head_frequency: 400,
                tail_frequency: 20,
                head_accuracy: 0.9,
                tail_accuracy: 0.2,
                negative_share: 0.3,
                learning_cap: 0.95,
                learning_scale: 10.0,
                holdout_per_predicate: 40,
                strategies: vec!["art".into(), "random".into()],
            },
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse `{raw}`: {e}")))
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value(key, s))
        .collect()
}

fn optional<T: FromStr>(key: &str, raw: &str, none: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if raw == none {
        Ok(None)
    } else {
        value(key, raw).map(Some)
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, format!("line {} is not `key = value`", i + 1)))?;
            let (key, raw) = (key.trim(), raw.trim());
            if seen.insert(key.to_string(), i + 1).is_some() {
                return Err(Error::config(key, "set more than once"));
            }
            cfg.set(key, raw)?;
        }
        cfg.generation.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        match key {
            "seed" => self.seed = value(key, raw)?,
            "budget_fraction_per_loop" => self.budget_fraction_per_loop = value(key, raw)?,
            "total_fraction" => self.total_fraction = value(key, raw)?,
            "loops" => self.loops = optional(key, raw, "auto")?,
            "z_init" => self.adaptive.z_init = value(key, raw)?,
            "similarity_threshold" => self.eval.similarity_threshold = value(key, raw)?,
            "val_fraction" => self.val_fraction = value(key, raw)?,
            "generation.negatives_per_sample" => self.generation.negatives_per_sample = value(key, raw)?,
            "generation.negative_mode" => {
                self.generation.negative_mode = value::<NegativeMode>(key, raw)?
            }
            "adaptive.z_step" => self.adaptive.z_step = value(key, raw)?,
            "adaptive.mode" => self.adaptive.mode = value::<ThresholdMode>(key, raw)?,
            "adaptive.t_fp" => self.fixed().t_fp = value(key, raw)?,
            "adaptive.t_fn" => self.fixed().t_fn = value(key, raw)?,
            "adaptive.h_fn" => self.fixed().h_fn = value(key, raw)?,
            "adaptive.h_tp" => self.fixed().h_tp = value(key, raw)?,
            "adaptive.recall_k" => self.recall_k = optional(key, raw, "all")?,
            "eval.k_values" => self.eval.k_values = list(key, raw)?,
            "eval.ranking_key" => self.eval.ranking_key = value::<RankingKey>(key, raw)?,
            "embedding.dimension" => self.embedding.dimension = value(key, raw)?,
            "embedding.table" => self.embedding.table = Some(PathBuf::from(raw)),
            "mock.accuracy" => self.mock.accuracy = value(key, raw)?,
            "mock.negative_rate" => self.mock.negative_rate = value(key, raw)?,
            "mock.sharpness" => self.mock.sharpness = value(key, raw)?,
            "mock.beams" => self.mock.beams = value(key, raw)?,
            "mock.length" => self.mock.length = value(key, raw)?,
            "mock.vocab" => self.mock.vocab = value(key, raw)?,
            "sim.predicates" => {
                self.sim.predicates = raw
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|entry| {
                        entry
                            .split_once(':')
                            .map(|(p, c)| (p.trim().to_string(), c.trim().to_string()))
                            .ok_or_else(|| Error::config(key, format!("`{entry}` is not predicate:category")))
                    })
                    .collect::<Result<_>>()?
            }
            "sim.head_predicates" => self.sim.head_predicates = value(key, raw)?,
            "sim.head_frequency" => self.sim.head_frequency = value(key, raw)?,
            "sim.tail_frequency" => self.sim.tail_frequency = value(key, raw)?,
            "sim.head_accuracy" => self.sim.head_accuracy = value(key, raw)?,
            "sim.tail_accuracy" => self.sim.tail_accuracy = value(key, raw)?,
            "sim.negative_share" => self.sim.negative_share = value(key, raw)?,
            "sim.learning_cap" => self.sim.learning_cap = value(key, raw)?,
            "sim.learning_scale" => self.sim.learning_scale = value(key, raw)?,
            "sim.holdout_per_predicate" => self.sim.holdout_per_predicate = value(key, raw)?,
            "sim.strategies" => self.sim.strategies = list(key, raw)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    fn fixed(&mut self) -> &mut FixedThresholds {
        self.adaptive.fixed_thresholds.get_or_insert_with(FixedThresholds::default)
    }

    pub fn validate(&self) -> Result<()> {
        let fraction = |key: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be in (0, 1], got {v}")))
            }
        };
        fraction("budget_fraction_per_loop", self.budget_fraction_per_loop)?;
        fraction("total_fraction", self.total_fraction)?;
        if self.budget_fraction_per_loop > self.total_fraction {
            return Err(Error::config(
                "budget_fraction_per_loop",
                "must not exceed total_fraction",
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::config("val_fraction", "must be in (0, 1)"));
        }
        if self.loops == Some(0) {
            return Err(Error::config("loops", "must be positive"));
        }
        if self.recall_k == Some(0) {
            return Err(Error::config("adaptive.recall_k", "must be positive"));
        }
        if self.generation.negative_mode != NegativeMode::None && self.generation.negatives_per_sample == 0 {
            return Err(Error::config(
                "generation.negatives_per_sample",
                "must be positive unless negative_mode is none",
            ));
        }
        self.adaptive
            .validate()
            .map_err(|e| Error::config("adaptive", e.to_string()))?;
        self.eval.validate().map_err(|e| Error::config("eval", e.to_string()))?;
        if self.embedding.dimension < 8 {
            return Err(Error::config("embedding.dimension", "must be at least 8"));
        }
        if !(0.0..=1.0).contains(&self.sim.negative_share) {
            return Err(Error::config("sim.negative_share", "must be in [0, 1]"));
        }
        if self.sim.head_predicates > self.sim.predicates.len() {
            return Err(Error::config("sim.head_predicates", "exceeds the number of predicates"));
        }
        if self.sim.learning_scale.is_nan() || self.sim.learning_scale <= 0.0 {
            return Err(Error::config("sim.learning_scale", "must be positive"));
        }
        for s in &self.sim.strategies {
            if s != "art" && s != "random" {
                return Err(Error::config("sim.strategies", format!("unknown strategy `{s}`")));
            }
        }
        Ok(())
    }

    /// Loop count: explicit, or enough loops of `budget_fraction_per_loop`
    /// to reach `total_fraction`.
    pub fn loop_count(&self) -> usize {
        self.loops
            .unwrap_or_else(|| (self.total_fraction / self.budget_fraction_per_loop - 1e-9).ceil() as usize)
    }

    /// Applies seed precedence: command-line flag, then `ART_SEED`, then
    /// the config file.
    pub fn resolve_seed(&mut self, flag: Option<u64>, env: Option<&str>) -> Result<()> {
        if let Some(s) = flag {
            self.seed = s;
        } else if let Some(raw) = env {
            self.seed = value(SEED_ENV, raw.trim())?;
        }
        self.generation.seed = self.seed;
        Ok(())
    }
}
