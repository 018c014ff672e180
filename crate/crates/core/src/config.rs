//! Pipeline configuration: flat `key = value` text with dotted section
//! names. Unknown keys are rejected so typos fail loudly.
//!
//! ```text
//! paths.graph = graph.tsv
//! paths.kb = kb.tsv
//! paths.kb_format = triple-tsv
//! paths.workdir = work
//! relations = xWant, oEffect
//! seeds.sample = 7
//! seeds.train = 11
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::encoder::EncoderConfig;
use crate::extract::{RuleSet, SubgraphConfig};
use crate::kb::KbFormat;
use crate::model::{Activation, Variant};
use crate::relation::{CategoryMap, CommonsenseRelation};
use crate::sampler::{parse_mixture, validate_mixture, SamplerConfig};
use crate::train::TrainConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{0}` must be set")]
    Missing(String),
    #[error("config key `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("path `{key}` = {path} does not exist")]
    NoSuchPath { key: String, path: String },
}

/// Every accepted key with its default; `None` marks required keys.
const KEYS: &[(&str, Option<&str>)] = &[
    ("paths.graph", None),
    ("paths.kb", None),
    ("paths.kb_format", Some("triple-tsv")),
    ("paths.workdir", Some("work")),
    ("relations", Some("all")),
    ("graph.strict_relations", Some("false")),
    ("mapping.subject_pool", Some("i, he, she, man, woman, person")),
    ("rules.xreact_stative", Some("false")),
    ("rules.symmetric_cause", Some("true")),
    ("subgraph.degree_threshold", Some("20")),
    ("sampler.mixture", Some("O20+I10")),
    ("sampler.eval_mixture", Some("O20+I10+S10")),
    ("sampler.exclude_candidates", Some("true")),
    ("sampler.shuffle_heads_all_relations", Some("true")),
    ("encoder.id", Some("hash-64")),
    ("encoder.fine_tune", Some("false")),
    ("model.variant", Some("sage")),
    ("model.out_dim", Some("64")),
    ("model.activation", Some("relu")),
    ("model.neighbor_size", Some("4")),
    ("train.batch_size", Some("64")),
    ("train.max_epochs", Some("20")),
    ("train.patience", Some("3")),
    ("train.learning_rate", Some("0.001")),
    ("train.min_gain", Some("0.01")),
    ("eval.top_k", Some("10")),
    ("populate.threshold", Some("0.5")),
    ("seeds.sample", None),
    ("seeds.train", None),
];

/// Seeds are set per stage; `--seed` overrides all of them.
pub const SEED_KEYS: &[&str] = &["seeds.sample", "seeds.train"];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Effective key/value pairs after defaults and overrides, used for
    /// digests.
    pub values: BTreeMap<String, String>,
    pub graph_path: PathBuf,
    pub kb_path: PathBuf,
    pub kb_format: KbFormat,
    pub workdir: PathBuf,
    pub relations: Vec<CommonsenseRelation>,
    pub strict_relations: bool,
    pub subject_pool: Vec<String>,
    pub rules: RuleSet,
    pub subgraph: SubgraphConfig,
    pub sampler: SamplerConfig,
    pub eval_sampler: SamplerConfig,
    pub train: TrainConfig,
    pub top_k: usize,
    pub threshold: f64,
}

/// Command-line and environment overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub strict: bool,
    pub workdir: Option<PathBuf>,
}

pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let syntax = |message: &str| ConfigError::Syntax { line: i + 1, message: message.to_string() };
        let (k, v) = line.split_once('=').ok_or_else(|| syntax("expected `key = value`"))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(syntax("empty key"));
        }
        if !KEYS.iter().any(|(name, _)| *name == k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(syntax(&format!("duplicate key `{k}`")));
        }
    }
    Ok(out)
}

fn value_err(key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Value { key: key.to_string(), message: message.to_string() }
}

fn parse_as<T: std::str::FromStr>(values: &BTreeMap<String, String>, key: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    let raw = values.get(key).ok_or_else(|| ConfigError::Missing(key.to_string()))?;
    raw.parse().map_err(|e: T::Err| value_err(key, format!("`{raw}`: {e}")))
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl PipelineConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, base, overrides)
    }

    /// Relative paths resolve against `base`.
    pub fn from_text(text: &str, base: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut values = parse_pairs(text)?;
        for (k, default) in KEYS {
            match (values.contains_key(*k), default) {
                (true, _) => {}
                (false, Some(d)) => {
                    values.insert(k.to_string(), d.to_string());
                }
                (false, None) if overrides.seed.is_some() && SEED_KEYS.contains(k) => {}
                (false, None) => return Err(ConfigError::Missing(k.to_string())),
            }
        }
        if let Some(seed) = overrides.seed {
            for k in SEED_KEYS {
                values.insert(k.to_string(), seed.to_string());
            }
        }
        values.insert("train.strict".into(), overrides.strict.to_string());

        let graph_path = resolve(base, &values["paths.graph"]);
        let kb_path = resolve(base, &values["paths.kb"]);
        for (key, p) in [("paths.graph", &graph_path), ("paths.kb", &kb_path)] {
            if !p.exists() {
                return Err(ConfigError::NoSuchPath { key: key.into(), path: p.display().to_string() });
            }
        }
        let workdir = overrides.workdir.clone().unwrap_or_else(|| resolve(base, &values["paths.workdir"]));
        let kb_format = match values["paths.kb_format"].as_str() {
            "triple-tsv" => KbFormat::TripleTsv,
            "pivoted-csv" => KbFormat::PivotedCsv,
            other => return Err(value_err("paths.kb_format", format!("`{other}` is not triple-tsv or pivoted-csv"))),
        };
        let relations = match values["relations"].as_str() {
            "all" => CommonsenseRelation::ALL.to_vec(),
            list => {
                let mut rels = list
                    .split(',')
                    .map(|r| r.trim().parse::<CommonsenseRelation>().map_err(|e| value_err("relations", e)))
                    .collect::<Result<Vec<_>, _>>()?;
                rels.sort();
                rels.dedup();
                rels
            }
        };
        if relations.is_empty() {
            return Err(value_err("relations", "no relations listed"));
        }
        let subject_pool: Vec<String> =
            values["mapping.subject_pool"].split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        if subject_pool.is_empty() {
            return Err(value_err("mapping.subject_pool", "empty pool"));
        }

        let mut rules = RuleSet { categories: CategoryMap { xreact_stative: parse_as(&values, "rules.xreact_stative")? }, ..RuleSet::default() };
        if !parse_as::<bool>(&values, "rules.symmetric_cause")? {
            rules = rules.without_symmetric_cause();
        }

        let mixture = |key: &str| -> Result<_, ConfigError> {
            let m = parse_mixture(&values[key]).map_err(|e| value_err(key, e))?;
            validate_mixture(&m).map_err(|e| value_err(key, e))?;
            Ok(m)
        };
        let sample_seed: u64 = parse_as(&values, "seeds.sample")?;
        let sampler = SamplerConfig {
            seed: sample_seed,
            mixture: mixture("sampler.mixture")?,
            exclude_candidates: parse_as(&values, "sampler.exclude_candidates")?,
            shuffle_heads_all_relations: parse_as(&values, "sampler.shuffle_heads_all_relations")?,
        };
        let eval_sampler = SamplerConfig { mixture: mixture("sampler.eval_mixture")?, ..sampler.clone() };

        let activation = match values["model.activation"].as_str() {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            "identity" => Activation::Identity,
            other => return Err(value_err("model.activation", format!("`{other}` is not relu, tanh or identity"))),
        };
        let variant = match values["model.variant"].as_str() {
            "sage" => Variant::Sage {
                out_dim: parse_as(&values, "model.out_dim")?,
                activation,
                neighbor_size: parse_as(&values, "model.neighbor_size")?,
            },
            "encoder-only" => Variant::EncoderOnly,
            other => return Err(value_err("model.variant", format!("`{other}` is not sage or encoder-only"))),
        };
        let train = TrainConfig {
            encoder: EncoderConfig { encoder_id: values["encoder.id"].clone(), fine_tune: parse_as(&values, "encoder.fine_tune")? },
            variant,
            batch_size: parse_as(&values, "train.batch_size")?,
            max_epochs: parse_as(&values, "train.max_epochs")?,
            patience: parse_as(&values, "train.patience")?,
            learning_rate: parse_as(&values, "train.learning_rate")?,
            seed: parse_as(&values, "seeds.train")?,
            strict: overrides.strict,
            min_gain: parse_as(&values, "train.min_gain")?,
        };
        if train.batch_size == 0 || train.max_epochs == 0 {
            return Err(value_err("train.batch_size", "batch size and epoch count must be positive"));
        }
        let threshold: f64 = parse_as(&values, "populate.threshold")?;
        if !(0.0..=1.0).contains(&threshold) {
            return Err(value_err("populate.threshold", "must lie in [0, 1]"));
        }
        Ok(PipelineConfig {
            graph_path,
            kb_path,
            kb_format,
            workdir,
            relations,
            strict_relations: parse_as(&values, "graph.strict_relations")?,
            subject_pool,
            rules,
            subgraph: SubgraphConfig { degree_threshold: parse_as(&values, "subgraph.degree_threshold")? },
            sampler,
            eval_sampler,
            train,
            top_k: parse_as(&values, "eval.top_k")?,
            threshold,
            values,
        })
    }

    /// Canonical `key=value` lines for keys under any of `prefixes`.
    pub fn section_text(&self, prefixes: &[&str]) -> String {
        self.values
            .iter()
            .filter(|(k, _)| prefixes.iter().any(|p| k.starts_with(p)))
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}
