//! Candidate extraction: temporally consistent discourse edges per
//! commonsense relation, pronoun aggregation into PersonX/Y/Z form, and the
//! per-relation training graph.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{AlignmentTable, Mapper, Persons};
use crate::graph::{DiscourseGraph, Eventuality, NodeId};
use crate::kb::SeedKb;
use crate::lexicon::{Lexicon, PLACEHOLDERS};
use crate::relation::{CategoryMap, CommonsenseRelation, DiscourseRelation, RelationCategory, Split, TemporalOrder};
use crate::snapshot::Snapshot;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("{0} has no seed positives; training is impossible")]
    NoSeeds(CommonsenseRelation),
    #[error("no temporal rule for category {0}")]
    MissingRule(RelationCategory),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PronounConstraint {
    SameSubject,
    DifferentSubject,
}

/// Which discourse relations license a candidate `(u, v)` for a category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalRule {
    /// Accepted as `(u, rel, v)`.
    pub forward: BTreeSet<DiscourseRelation>,
    /// Accepted as `(v, rel, u)`.
    pub backward: BTreeSet<DiscourseRelation>,
    /// Accepted in either direction.
    pub symmetric: BTreeSet<DiscourseRelation>,
    pub pronoun_constraint: PronounConstraint,
    /// Patterns the tail node must have, when set.
    pub tail_pattern_filter: Option<BTreeSet<String>>,
}

fn rels(list: &[DiscourseRelation]) -> BTreeSet<DiscourseRelation> {
    list.iter().copied().collect()
}

impl TemporalRule {
    pub fn effect_agent() -> Self {
        use DiscourseRelation::*;
        TemporalRule {
            forward: rels(&[Precedence, Result]),
            backward: rels(&[Succession, Condition, Reason]),
            symmetric: rels(&[Synchronization, Conjunction]),
            pronoun_constraint: PronounConstraint::SameSubject,
            tail_pattern_filter: None,
        }
    }

    pub fn effect_theme() -> Self {
        TemporalRule { pronoun_constraint: PronounConstraint::DifferentSubject, ..Self::effect_agent() }
    }

    /// Mirror of the effect rule: the tail happens before the head.
    pub fn cause_agent() -> Self {
        let effect = Self::effect_agent();
        TemporalRule { forward: effect.backward, backward: effect.forward, ..effect }
    }

    pub fn stative() -> Self {
        use DiscourseRelation::*;
        TemporalRule {
            forward: BTreeSet::new(),
            backward: rels(&[Precedence, Result]),
            symmetric: rels(&[Synchronization, Conjunction]),
            pronoun_constraint: PronounConstraint::SameSubject,
            tail_pattern_filter: Some(crate::align::STATIVE_TAIL_PATTERNS.iter().map(|s| s.to_string()).collect()),
        }
    }

    fn accepts_forward(&self, r: DiscourseRelation) -> bool {
        self.forward.contains(&r) || self.symmetric.contains(&r)
    }

    fn accepts_backward(&self, r: DiscourseRelation) -> bool {
        self.backward.contains(&r) || self.symmetric.contains(&r)
    }
}

/// Orders of the head relative to the tail that a category tolerates.
pub fn allowed_orders(category: RelationCategory) -> &'static [TemporalOrder] {
    match category {
        RelationCategory::EffectAgent | RelationCategory::EffectTheme => &[TemporalOrder::Before, TemporalOrder::Simultaneous],
        RelationCategory::CauseAgent | RelationCategory::Stative => &[TemporalOrder::After, TemporalOrder::Simultaneous],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub categories: CategoryMap,
    pub rules: BTreeMap<RelationCategory, TemporalRule>,
}

impl Default for RuleSet {
    fn default() -> Self {
        let rules = [
            (RelationCategory::CauseAgent, TemporalRule::cause_agent()),
            (RelationCategory::Stative, TemporalRule::stative()),
            (RelationCategory::EffectAgent, TemporalRule::effect_agent()),
            (RelationCategory::EffectTheme, TemporalRule::effect_theme()),
        ]
        .into_iter()
        .collect();
        RuleSet { categories: CategoryMap::default(), rules }
    }
}

impl RuleSet {
    /// Drops Synchronization/Conjunction from the cause rule.
    pub fn without_symmetric_cause(mut self) -> Self {
        if let Some(rule) = self.rules.get_mut(&RelationCategory::CauseAgent) {
            rule.symmetric.clear();
        }
        self
    }

    pub fn rule_for(&self, relation: CommonsenseRelation) -> Result<(RelationCategory, &TemporalRule), ExtractError> {
        let category = self.categories.category(relation);
        self.rules.get(&category).map(|r| (category, r)).ok_or(ExtractError::MissingRule(category))
    }
}

/// A directed pair licensed by one discourse edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Candidate {
    pub u: NodeId,
    pub v: NodeId,
    /// Index into [`DiscourseGraph::edges`].
    pub edge: usize,
}

fn subject_class(lex: &Lexicon, ev: &Eventuality) -> Option<usize> {
    ev.subject().and_then(|s| lex.pronoun_class(s))
}

/// Whether `(u, v)` satisfies the rule's pronoun and tail-pattern conditions.
pub fn pair_admissible(lex: &Lexicon, rule: &TemporalRule, u: &Eventuality, v: &Eventuality) -> bool {
    if u.tokens == v.tokens {
        return false;
    }
    let (Some(su), Some(sv)) = (subject_class(lex, u), subject_class(lex, v)) else {
        return false;
    };
    let subjects_ok = match rule.pronoun_constraint {
        PronounConstraint::SameSubject => su == sv,
        PronounConstraint::DifferentSubject => su != sv,
    };
    subjects_ok && rule.tail_pattern_filter.as_ref().map_or(true, |f| f.contains(&v.pattern))
}

/// All candidate pairs for `relation`, one per licensing edge, ordered by
/// `(u key, v key, edge)`.
pub fn select_candidates(
    graph: &DiscourseGraph,
    relation: CommonsenseRelation,
    rules: &RuleSet,
    lex: &Lexicon,
) -> Result<Vec<Candidate>, ExtractError> {
    let (_, rule) = rules.rule_for(relation)?;
    let mut out: Vec<Candidate> = graph
        .edges()
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, e)| {
            let mut found = Vec::with_capacity(2);
            if rule.accepts_forward(e.relation) && pair_admissible(lex, rule, graph.node(e.head), graph.node(e.tail)) {
                found.push(Candidate { u: e.head, v: e.tail, edge: i });
            }
            if rule.accepts_backward(e.relation) && pair_admissible(lex, rule, graph.node(e.tail), graph.node(e.head)) {
                found.push(Candidate { u: e.tail, v: e.head, edge: i });
            }
            found
        })
        .collect();
    out.sort_by(|a, b| {
        graph
            .key(a.u)
            .cmp(&graph.key(b.u))
            .then_with(|| graph.key(a.v).cmp(&graph.key(b.v)))
            .then(a.edge.cmp(&b.edge))
    });
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("more than three pronoun classes")]
    TooManyClasses,
    #[error("eventuality has no personal-pronoun subject")]
    NoSubject,
}

/// Rewrites concrete pronouns into PersonX/PersonY/PersonZ.
///
/// Agent categories map the shared subject class to PersonX; theme maps the
/// head subject to PersonX and the tail subject to PersonY. Remaining classes
/// take the next free placeholder in first-occurrence order over `u` then `v`.
pub fn aggregate_pronouns(
    lex: &Lexicon,
    u: &Eventuality,
    v: &Eventuality,
    category: RelationCategory,
) -> Result<(Eventuality, Eventuality), AggregateError> {
    let su = subject_class(lex, u).ok_or(AggregateError::NoSubject)?;
    let sv = subject_class(lex, v).ok_or(AggregateError::NoSubject)?;
    let mut order = vec![su];
    if category.is_theme() && sv != su {
        order.push(sv);
    }
    for t in u.tokens.iter().chain(&v.tokens) {
        if let Some(c) = lex.pronoun_class(t) {
            if !order.contains(&c) {
                order.push(c);
            }
        }
    }
    if order.len() > PLACEHOLDERS.len() {
        return Err(AggregateError::TooManyClasses);
    }
    let rewrite = |ev: &Eventuality| {
        let tokens = ev
            .tokens
            .iter()
            .map(|t| match lex.pronoun_class(t) {
                Some(c) => {
                    let slot = PLACEHOLDERS[order.iter().position(|o| *o == c).expect("class recorded")];
                    let class = &lex.pronoun_classes[c];
                    let possessive = class.possessive.contains(t) && class.name != *t;
                    if possessive {
                        format!("{slot}'s")
                    } else {
                        slot.to_string()
                    }
                }
                None => t.clone(),
            })
            .collect();
        Eventuality { tokens, pattern: ev.pattern.clone(), subject_index: ev.subject_index }
    };
    Ok((rewrite(u), rewrite(v)))
}

/// The concrete discourse edge a candidate came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSource {
    pub head: String,
    pub relation: DiscourseRelation,
    pub tail: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEdge {
    pub u: String,
    pub v: String,
    pub sources: Vec<CandidateSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedEdge {
    pub u: String,
    pub v: String,
    pub split: Split,
}

/// Per-relation graph in placeholder form: candidate edges from discourse,
/// seed positives from the KB. Both edge lists are sorted by `(u, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationGraph {
    pub relation: CommonsenseRelation,
    pub nodes: Vec<String>,
    pub candidate_edges: Vec<CandidateEdge>,
    pub seed_edges: Vec<SeedEdge>,
}

impl Snapshot for RelationGraph {
    const KIND: &'static str = "relation-graph";
}

impl RelationGraph {
    pub fn candidate(&self, u: &str, v: &str) -> Option<&CandidateEdge> {
        self.candidate_edges
            .binary_search_by(|e| (e.u.as_str(), e.v.as_str()).cmp(&(u, v)))
            .ok()
            .map(|i| &self.candidate_edges[i])
    }

    pub fn seed(&self, u: &str, v: &str) -> Option<&SeedEdge> {
        self.seed_edges
            .binary_search_by(|e| (e.u.as_str(), e.v.as_str()).cmp(&(u, v)))
            .ok()
            .map(|i| &self.seed_edges[i])
    }

    pub fn is_candidate(&self, u: &str, v: &str) -> bool {
        self.candidate(u, v).is_some()
    }

    pub fn is_seed(&self, u: &str, v: &str) -> bool {
        self.seed(u, v).is_some()
    }

    pub fn seeds_in(&self, split: Split) -> impl Iterator<Item = &SeedEdge> {
        self.seed_edges.iter().filter(move |s| s.split == split)
    }

    /// `u\tv\tsource_relation\tsource_weight\tis_seed_positive`, one line per
    /// provenance edge; seed-only pairs use `-` and weight 0.
    pub fn to_tsv(&self) -> String {
        let mut lines: Vec<(&str, &str, String)> = Vec::new();
        for e in &self.candidate_edges {
            let seed = self.is_seed(&e.u, &e.v) as u8;
            for s in &e.sources {
                lines.push((&e.u, &e.v, format!("{}\t{}\t{seed}", s.relation, s.weight)));
            }
        }
        for s in &self.seed_edges {
            if !self.is_candidate(&s.u, &s.v) {
                lines.push((&s.u, &s.v, "-\t0\t1".to_string()));
            }
        }
        lines.sort();
        let mut out = String::from("u\tv\tsource_relation\tsource_weight\tis_seed_positive\n");
        for (u, v, rest) in lines {
            out.push_str(&format!("{u}\t{v}\t{rest}\n"));
        }
        out
    }

    /// Undirected neighbor lists over candidate edges, indexed like `nodes`.
    pub fn adjacency(&self) -> NeighborIndex {
        let position: BTreeMap<&str, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut sets = vec![BTreeSet::new(); self.nodes.len()];
        for e in &self.candidate_edges {
            let (a, b) = (position[e.u.as_str()], position[e.v.as_str()]);
            sets[a].insert(b);
            sets[b].insert(a);
        }
        NeighborIndex {
            position: self.nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect(),
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    pub position: BTreeMap<String, usize>,
    pub neighbors: Vec<Vec<usize>>,
}

impl NeighborIndex {
    pub fn of(&self, key: &str) -> Option<&[usize]> {
        self.position.get(key).map(|&i| self.neighbors[i].as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgraphConfig {
    /// Aligned nodes with fewer neighbors than this also keep their two-hop
    /// neighborhood.
    pub degree_threshold: usize,
}

impl Default for SubgraphConfig {
    fn default() -> Self {
        SubgraphConfig { degree_threshold: 20 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractReport {
    pub licensing_edges: usize,
    pub dropped_too_many_classes: usize,
    pub dropped_self_loops: usize,
    pub aggregated_pairs: usize,
    pub kept_pairs: usize,
    pub anchors: usize,
    pub expanded_anchors: usize,
    pub seeds: usize,
    pub seeds_unmappable: usize,
}

/// Selects and aggregates candidates over the whole graph, keyed by the
/// placeholder-form pair.
pub fn aggregated_candidates(
    graph: &DiscourseGraph,
    relation: CommonsenseRelation,
    rules: &RuleSet,
    lex: &Lexicon,
    report: &mut ExtractReport,
) -> Result<BTreeMap<(String, String), Vec<CandidateSource>>, ExtractError> {
    let (category, _) = rules.rule_for(relation)?;
    let candidates = select_candidates(graph, relation, rules, lex)?;
    report.licensing_edges = candidates.len();
    let mut pairs: BTreeMap<(String, String), Vec<CandidateSource>> = BTreeMap::new();
    for c in candidates {
        let (u, v) = match aggregate_pronouns(lex, graph.node(c.u), graph.node(c.v), category) {
            Ok(p) => p,
            Err(AggregateError::TooManyClasses) => {
                report.dropped_too_many_classes += 1;
                log::warn!("{relation}: dropped `{}` -> `{}`: more than three pronoun classes", graph.key(c.u), graph.key(c.v));
                continue;
            }
            Err(AggregateError::NoSubject) => unreachable!("selected pairs have pronoun subjects"),
        };
        let (u, v) = (u.key(), v.key());
        if u == v {
            report.dropped_self_loops += 1;
            continue;
        }
        let e = &graph.edges()[c.edge];
        pairs.entry((u, v)).or_default().push(CandidateSource {
            head: graph.key(e.head),
            relation: e.relation,
            tail: graph.key(e.tail),
            weight: e.weight,
        });
    }
    report.aggregated_pairs = pairs.len();
    Ok(pairs)
}

/// Seed positives of `relation` in placeholder form, with the split each
/// pair belongs to. A pair listed under several splits keeps the most
/// held-out one (test over dev over train) so evaluation never sees a
/// training pair.
pub fn seed_pairs(kb: &SeedKb, relation: CommonsenseRelation, mapper: &Mapper, report: &mut ExtractReport) -> BTreeMap<(String, String), Split> {
    let persons = Persons::placeholders();
    let mut seeds: BTreeMap<(String, String), Split> = BTreeMap::new();
    for t in kb.of_relation(relation) {
        let mapped = mapper.map_head(&t.head, &persons).and_then(|h| Ok((h, mapper.map_tail(relation, &t.tail, &persons)?)));
        match mapped {
            Ok((h, tl)) if h.tokens != tl.tokens => {
                let split = seeds.entry((h.key(), tl.key())).or_insert(t.split);
                *split = (*split).max(t.split);
            }
            _ => report.seeds_unmappable += 1,
        }
    }
    report.seeds = seeds.len();
    seeds
}

/// Placeholder-form nodes of tuples that the alignment found in the graph.
pub fn anchor_nodes(kb: &SeedKb, table: &AlignmentTable, relation: CommonsenseRelation, mapper: &Mapper) -> BTreeSet<String> {
    let persons = Persons::placeholders();
    let mut anchors = BTreeSet::new();
    for row in table.rows.iter().filter(|r| r.relation == relation) {
        let t = &kb.tuples[row.tuple_index];
        if !row.head_hits.is_empty() {
            if let Ok(h) = mapper.map_head(&t.head, &persons) {
                anchors.insert(h.key());
            }
        }
        if !row.tail_hits.is_empty() {
            if let Ok(tl) = mapper.map_tail(relation, &t.tail, &persons) {
                anchors.insert(tl.key());
            }
        }
    }
    anchors
}

/// Keeps the pairs inside the subgraph induced by the anchors' one-hop
/// neighbors, widened to two hops around anchors of degree below the
/// threshold.
pub fn restrict_to_subgraph(
    pairs: BTreeMap<(String, String), Vec<CandidateSource>>,
    anchors: &BTreeSet<String>,
    config: SubgraphConfig,
    report: &mut ExtractReport,
) -> BTreeMap<(String, String), Vec<CandidateSource>> {
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (u, v) in pairs.keys() {
        adj.entry(u).or_default().insert(v);
        adj.entry(v).or_default().insert(u);
    }
    let empty = BTreeSet::new();
    let mut keep: BTreeSet<&str> = BTreeSet::new();
    report.anchors = anchors.len();
    for a in anchors {
        keep.insert(a);
        let first = adj.get(a.as_str()).unwrap_or(&empty);
        keep.extend(first.iter().copied());
        if first.len() < config.degree_threshold {
            report.expanded_anchors += 1;
            for b in first {
                keep.extend(adj.get(b).unwrap_or(&empty).iter().copied());
            }
        }
    }
    let keep: BTreeSet<String> = keep.into_iter().map(String::from).collect();
    let kept: BTreeMap<_, _> = pairs.into_iter().filter(|((u, v), _)| keep.contains(u) && keep.contains(v)).collect();
    report.kept_pairs = kept.len();
    kept
}

/// Builds the training graph for one relation.
pub fn build_relation_graph(
    graph: &DiscourseGraph,
    kb: &SeedKb,
    table: &AlignmentTable,
    relation: CommonsenseRelation,
    rules: &RuleSet,
    mapper: &Mapper,
    config: SubgraphConfig,
) -> Result<(RelationGraph, ExtractReport), ExtractError> {
    let lex = &mapper.normalizer.lexicon;
    let mut report = ExtractReport::default();
    let seeds = seed_pairs(kb, relation, mapper, &mut report);
    if seeds.is_empty() {
        return Err(ExtractError::NoSeeds(relation));
    }
    let pairs = aggregated_candidates(graph, relation, rules, lex, &mut report)?;
    let anchors = anchor_nodes(kb, table, relation, mapper);
    let pairs = restrict_to_subgraph(pairs, &anchors, config, &mut report);

    let mut nodes = BTreeSet::new();
    for (u, v) in pairs.keys().chain(seeds.keys()) {
        nodes.insert(u.clone());
        nodes.insert(v.clone());
    }
    let rg = RelationGraph {
        relation,
        nodes: nodes.into_iter().collect(),
        candidate_edges: pairs.into_iter().map(|((u, v), sources)| CandidateEdge { u, v, sources }).collect(),
        seed_edges: seeds.into_iter().map(|((u, v), split)| SeedEdge { u, v, split }).collect(),
    };
    Ok((rg, report))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SoundnessViolation {
    #[error("provenance edge `{0}` is not in the discourse graph")]
    MissingEdge(String),
    #[error("provenance edge `{0}` does not aggregate to the candidate pair")]
    Orientation(String),
    #[error("provenance edge `{edge}` puts the head {order:?} the tail")]
    Order { edge: String, order: TemporalOrder },
}

/// Replays a candidate's provenance edge against the discourse-relation
/// semantics: the edge must exist, must aggregate to `(u, v)` in one
/// orientation, and the implied order of `u` relative to `v` must suit the
/// relation's category.
pub fn replay_provenance(
    graph: &DiscourseGraph,
    lex: &Lexicon,
    category: RelationCategory,
    u: &str,
    v: &str,
    source: &CandidateSource,
) -> Result<(), SoundnessViolation> {
    let label = format!("{} {} {}", source.head, source.relation, source.tail);
    if graph.find_edge(&source.head, source.relation, &source.tail).is_none() {
        return Err(SoundnessViolation::MissingEdge(label));
    }
    let h = graph.node(graph.lookup(&source.head).expect("edge endpoint"));
    let t = graph.node(graph.lookup(&source.tail).expect("edge endpoint"));
    let matches = |a: &Eventuality, b: &Eventuality| {
        aggregate_pronouns(lex, a, b, category).is_ok_and(|(x, y)| x.key() == u && y.key() == v)
    };
    // Both orientations can aggregate to the same pair (theme categories
    // with two subject-only nodes); the edge licenses the pair if either
    // matching orientation is sound.
    let orders: Vec<TemporalOrder> = [
        matches(h, t).then(|| source.relation.head_order()),
        matches(t, h).then(|| source.relation.head_order().flip()),
    ]
    .into_iter()
    .flatten()
    .collect();
    match orders.iter().find(|o| allowed_orders(category).contains(o)) {
        Some(_) => Ok(()),
        None => match orders.first() {
            Some(&order) => Err(SoundnessViolation::Order { edge: label, order }),
            None => Err(SoundnessViolation::Orientation(label)),
        },
    }
}

/// Replays every provenance edge of the relation graph.
pub fn check_soundness(graph: &DiscourseGraph, lex: &Lexicon, rules: &RuleSet, rg: &RelationGraph) -> Vec<SoundnessViolation> {
    let category = rules.categories.category(rg.relation);
    rg.candidate_edges
        .iter()
        .flat_map(|e| e.sources.iter().filter_map(move |s| replay_provenance(graph, lex, category, &e.u, &e.v, s).err()))
        .collect()
}
