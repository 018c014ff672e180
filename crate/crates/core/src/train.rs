//! Training with early stopping on dev accuracy, balanced evaluation, tail
//! ranking for known heads and thresholded population of candidate edges.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{Mapper, Persons};
use crate::encoder::{encoder_from_config, EncoderConfig, NodeEncoder};
use crate::extract::RelationGraph;
use crate::kb::{CommonsenseTuple, Provenance, SeedKb};
use crate::model::{self, Adam, Example, Features, ModelError, ScorerParams, Variant};
use crate::relation::{CommonsenseRelation, Split};
use crate::sampler::Negative;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training positives")]
    EmptyTrain,
    #[error("pair `{u}` -> `{v}` is a positive in both {a} and {b}")]
    SplitOverlap { u: String, v: String, a: Split, b: Split },
    #[error("unbalanced evaluation set: {positives} positives vs {negatives} negatives")]
    Unbalanced { positives: usize, negatives: usize },
    #[error("head `{0}` is not in the relation graph")]
    UnknownHead(String),
    #[error("head `{0}` has no candidate tails")]
    NoCandidates(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Encoder(#[from] crate::encoder::EncoderError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledPair {
    pub u: String,
    pub v: String,
    pub label: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitData {
    pub train: Vec<LabeledPair>,
    pub dev: Vec<LabeledPair>,
    pub test_positives: Vec<LabeledPair>,
    pub test_negatives: Vec<LabeledPair>,
}

fn labeled<'a>(pairs: impl Iterator<Item = (&'a str, &'a str)>, label: bool) -> Vec<LabeledPair> {
    pairs.map(|(u, v)| LabeledPair { u: u.to_string(), v: v.to_string(), label }).collect()
}

/// Combines seed positives with frozen negatives, checking that no pair is
/// a positive in two splits.
pub fn split_data(rg: &RelationGraph, negatives: &BTreeMap<Split, Vec<Negative>>) -> Result<SplitData, TrainError> {
    let mut seen: BTreeMap<(&str, &str), Split> = BTreeMap::new();
    for s in &rg.seed_edges {
        if let Some(prev) = seen.insert((&s.u, &s.v), s.split) {
            return Err(TrainError::SplitOverlap { u: s.u.clone(), v: s.v.clone(), a: prev, b: s.split });
        }
    }
    let pos = |split| labeled(rg.seeds_in(split).map(|s| (s.u.as_str(), s.v.as_str())), true);
    let neg = |split| labeled(negatives.get(&split).into_iter().flatten().map(|n| (n.u.as_str(), n.v.as_str())), false);
    let mut train = pos(Split::Train);
    train.extend(neg(Split::Train));
    let mut dev = pos(Split::Dev);
    dev.extend(neg(Split::Dev));
    Ok(SplitData { train, dev, test_positives: pos(Split::Test), test_negatives: neg(Split::Test) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub encoder: EncoderConfig,
    pub variant: Variant,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Serial computation throughout.
    pub strict: bool,
    /// Dev accuracy at or below `0.5 + min_gain` tags the run with a warning.
    pub min_gain: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            encoder: EncoderConfig::default(),
            variant: Variant::Sage { out_dim: 64, activation: model::Activation::Relu, neighbor_size: 4 },
            batch_size: 64,
            max_epochs: 20,
            patience: 3,
            learning_rate: 1e-3,
            seed: 0,
            strict: false,
            min_gain: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ScorerParams,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_dev_accuracy: f64,
    pub warning: Option<String>,
}

impl TrainOutcome {
    /// Line-delimited `key=value` records.
    pub fn log_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.log {
            out.push_str(&format!("epoch={} train_loss={:.6} dev_accuracy={:.6}\n", e.epoch, e.train_loss, e.dev_accuracy));
        }
        out.push_str(&format!("best_epoch={} best_dev_accuracy={:.6}\n", self.best_epoch, self.best_dev_accuracy));
        if let Some(w) = &self.warning {
            out.push_str(&format!("warning={w}\n"));
        }
        out
    }
}

/// Encoder, parameters and node features bound together for scoring by key.
#[derive(Debug)]
pub struct Scorer {
    pub params: ScorerParams,
    pub encoder: Box<dyn NodeEncoder>,
    pub features: Features,
    pub parallel: bool,
}

impl Scorer {
    pub fn new(params: ScorerParams, rg: &RelationGraph, parallel: bool) -> Result<Self, TrainError> {
        params.validate()?;
        let encoder = encoder_from_config(&params.encoder)?;
        if encoder.dim() != params.dim {
            return Err(ModelError::Shape(format!("encoder dim {} vs params dim {}", encoder.dim(), params.dim)).into());
        }
        let features = Features::from_relation_graph(encoder.as_ref(), rg)?;
        Ok(Scorer { params, encoder, features, parallel })
    }

    /// Scorer over explicit features, for callers that supply their own
    /// node vectors.
    pub fn with_features(params: ScorerParams, features: Features, parallel: bool) -> Result<Self, TrainError> {
        params.validate()?;
        let encoder = encoder_from_config(&params.encoder)?;
        Ok(Scorer { params, encoder, features, parallel })
    }

    fn ids(&mut self, pairs: &[(&str, &str)]) -> Result<Vec<(usize, usize)>, TrainError> {
        pairs
            .iter()
            .map(|(u, v)| Ok((self.features.ensure(self.encoder.as_ref(), u)?, self.features.ensure(self.encoder.as_ref(), v)?)))
            .collect()
    }

    /// Scores in input order; parallel work merges back in order.
    pub fn score_pairs(&mut self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, TrainError> {
        let ids = self.ids(pairs)?;
        let (p, f) = (&self.params, &self.features);
        Ok(if self.parallel {
            ids.par_iter().map(|&(u, v)| model::score(p, f, u, v)).collect()
        } else {
            ids.iter().map(|&(u, v)| model::score(p, f, u, v)).collect()
        })
    }
}

/// Decision rule: plausible iff the score is strictly above 0.5.
pub fn predict(score: f64) -> bool {
    score > 0.5
}

fn accuracy_of(scorer: &mut Scorer, data: &[LabeledPair]) -> Result<f64, TrainError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let pairs: Vec<(&str, &str)> = data.iter().map(|p| (p.u.as_str(), p.v.as_str())).collect();
    let scores = scorer.score_pairs(&pairs)?;
    let correct = scores.iter().zip(data).filter(|(s, p)| predict(**s) == p.label).count();
    Ok(correct as f64 / data.len() as f64)
}

/// Accuracy on a balanced set at threshold 0.5, ties counted negative.
pub fn evaluate_link_prediction(scorer: &mut Scorer, positives: &[LabeledPair], negatives: &[LabeledPair]) -> Result<f64, TrainError> {
    if positives.len() != negatives.len() {
        return Err(TrainError::Unbalanced { positives: positives.len(), negatives: negatives.len() });
    }
    let mut all: Vec<LabeledPair> = positives.iter().map(|p| LabeledPair { label: true, ..p.clone() }).collect();
    all.extend(negatives.iter().map(|p| LabeledPair { label: false, ..p.clone() }));
    accuracy_of(scorer, &all)
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i as u64) as usize;
        items.swap(i, j);
    }
}

/// Trains one relation's scorer and returns the best-dev checkpoint.
pub fn train(rg: &RelationGraph, data: &SplitData, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    if !data.train.iter().any(|p| p.label) {
        return Err(TrainError::EmptyTrain);
    }
    let encoder = encoder_from_config(&config.encoder)?;
    let params = ScorerParams::init(rg.relation, config.encoder.clone(), encoder.dim(), config.variant, config.seed);
    let mut scorer = Scorer::new(params, rg, !config.strict)?;
    let pairs: Vec<(&str, &str)> = data.train.iter().map(|p| (p.u.as_str(), p.v.as_str())).collect();
    let ids = scorer.ids(&pairs)?;
    let mut examples: Vec<Example> = ids.iter().zip(&data.train).map(|(&(u, v), p)| Example { u, v, label: p.label }).collect();

    let mut opt = Adam::new(&scorer.params, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = Vec::new();
    let mut best = (scorer.params.clone(), 0usize, f64::NEG_INFINITY);
    let mut stale = 0;
    for epoch in 1..=config.max_epochs {
        shuffle(&mut examples, &mut rng);
        let mut loss_sum = 0.0;
        for (b, batch) in examples.chunks(config.batch_size.max(1)).enumerate() {
            let round = ((epoch as u64) << 32) | b as u64;
            let (loss, grads) = model::loss_and_gradients(&scorer.params, &scorer.features, batch, round, !config.strict)?;
            loss_sum += loss * batch.len() as f64;
            opt.step(&mut scorer.params, &grads);
        }
        let train_loss = loss_sum / examples.len() as f64;
        let dev_set = if data.dev.is_empty() { &data.train } else { &data.dev };
        let dev_accuracy = accuracy_of(&mut scorer, dev_set)?;
        log::info!("{} epoch {epoch}: loss {train_loss:.4}, dev accuracy {dev_accuracy:.4}", rg.relation);
        log.push(EpochLog { epoch, train_loss, dev_accuracy });
        if dev_accuracy > best.2 {
            best = (scorer.params.clone(), epoch, dev_accuracy);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let (params, best_epoch, best_dev_accuracy) = best;
    let warning = (best_dev_accuracy <= 0.5 + config.min_gain)
        .then(|| format!("dev accuracy {best_dev_accuracy:.4} never cleared chance within the patience window"));
    if let Some(w) = &warning {
        log::warn!("{}: {w}", rg.relation);
    }
    Ok(TrainOutcome { params, log, best_epoch, best_dev_accuracy, warning })
}

/// Top-`k` candidate tails of a head already in the graph, by descending
/// score with ties in tail order.
pub fn rank_tails(scorer: &mut Scorer, rg: &RelationGraph, head: &str, k: usize) -> Result<Vec<(String, f64)>, TrainError> {
    if rg.nodes.binary_search_by(|n| n.as_str().cmp(head)).is_err() {
        return Err(TrainError::UnknownHead(head.to_string()));
    }
    let tails: Vec<&str> = rg.candidate_edges.iter().filter(|e| e.u == head).map(|e| e.v.as_str()).collect();
    if tails.is_empty() {
        return Err(TrainError::NoCandidates(head.to_string()));
    }
    let pairs: Vec<(&str, &str)> = tails.iter().map(|t| (head, *t)).collect();
    let scores = scorer.score_pairs(&pairs)?;
    let mut ranked: Vec<(String, f64)> = tails.iter().map(|t| t.to_string()).zip(scores).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ranked)
}

/// Train-split heads (any relation) and tails (this relation) in
/// placeholder form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NoveltyIndex {
    pub heads: BTreeSet<String>,
    pub tails: BTreeSet<String>,
}

impl NoveltyIndex {
    pub fn from_kb(kb: &SeedKb, relation: CommonsenseRelation, mapper: &Mapper) -> Self {
        let persons = Persons::placeholders();
        let mut index = NoveltyIndex::default();
        for t in kb.tuples.iter().filter(|t| t.split == Split::Train) {
            if let Ok(h) = mapper.map_head(&t.head, &persons) {
                index.heads.insert(h.key());
            }
            if t.relation == relation {
                if let Ok(tl) = mapper.map_tail(relation, &t.tail, &persons) {
                    index.tails.insert(tl.key());
                }
            }
        }
        index
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulatedTuple {
    pub head: String,
    pub relation: CommonsenseRelation,
    pub tail: String,
    pub score: f64,
    pub novel_head: bool,
    pub novel_tail: bool,
    pub provenance: Provenance,
}

impl PopulatedTuple {
    /// One JSON object with the score at six decimals.
    pub fn to_json_line(&self) -> String {
        let s = |x: &str| serde_json::to_string(x).expect("string serializes");
        format!(
            "{{\"head\":{},\"relation\":{},\"tail\":{},\"score\":{:.6},\"novel_head\":{},\"novel_tail\":{},\"provenance\":{{\"source_head\":{},\"source_relation\":{},\"source_tail\":{}}}}}",
            s(&self.head),
            s(self.relation.as_str()),
            s(&self.tail),
            self.score,
            self.novel_head,
            self.novel_tail,
            s(&self.provenance.source_head),
            s(self.provenance.source_relation.as_str()),
            s(&self.provenance.source_tail),
        )
    }

    pub fn to_tuple(&self) -> CommonsenseTuple {
        CommonsenseTuple {
            label: Some(true),
            score: Some(self.score),
            provenance: Some(self.provenance.clone()),
            ..CommonsenseTuple::new(&self.head, self.relation, &self.tail, Split::Populated)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulateStats {
    pub scored: usize,
    pub kept: usize,
}

const POPULATE_CHUNK: usize = 4096;

/// Scores every candidate edge and streams those above `threshold` to
/// `sink` in candidate order, one chunk of scores in memory at a time.
pub fn populate(
    scorer: &mut Scorer,
    rg: &RelationGraph,
    novelty: &NoveltyIndex,
    threshold: f64,
    mut sink: impl FnMut(PopulatedTuple) -> std::io::Result<()>,
) -> Result<PopulateStats, TrainError> {
    let mut stats = PopulateStats::default();
    for chunk in rg.candidate_edges.chunks(POPULATE_CHUNK) {
        let pairs: Vec<(&str, &str)> = chunk.iter().map(|e| (e.u.as_str(), e.v.as_str())).collect();
        let scores = scorer.score_pairs(&pairs)?;
        stats.scored += chunk.len();
        for (e, score) in chunk.iter().zip(scores) {
            if score <= threshold {
                continue;
            }
            let Some(src) = e.sources.first() else { continue };
            stats.kept += 1;
            sink(PopulatedTuple {
                head: e.u.clone(),
                relation: rg.relation,
                tail: e.v.clone(),
                score,
                novel_head: !novelty.heads.contains(&e.u),
                novel_tail: !novelty.tails.contains(&e.v),
                provenance: Provenance { source_head: src.head.clone(), source_relation: src.relation, source_tail: src.tail.clone() },
            })
            .map_err(|e| ModelError::Io { path: "populate sink".into(), message: e.to_string() })?;
        }
    }
    Ok(stats)
}

/// Up to `n` distinct `(head, tail)` tuples drawn without replacement, for
/// manual inspection. Duplicates are removed before drawing.
pub fn sample_for_inspection(tuples: &[PopulatedTuple], n: usize, seed: u64) -> Vec<PopulatedTuple> {
    let mut seen = BTreeSet::new();
    let mut unique: Vec<&PopulatedTuple> = tuples.iter().filter(|t| seen.insert((t.head.clone(), t.tail.clone()))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle(&mut unique, &mut rng);
    unique.into_iter().take(n).cloned().collect()
}
