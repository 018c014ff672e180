//! Alignment of the seed KB onto the discourse graph: placeholder
//! substitution and tail completion rules, exact-key lookup, and the
//! coverage and pattern statistics of the result.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::graph::{DiscourseGraph, Eventuality};
use crate::kb::SeedKb;
use crate::lexicon::Lexicon;
use crate::normalize::{NormalizeError, Normalizer, UNMATCHED};
use crate::relation::CommonsenseRelation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("`{text}` mentions {placeholder} but no pronoun was supplied for it")]
    MissingPronoun { text: String, placeholder: &'static str },
    #[error("subject and object pronoun must differ (both `{0}`)")]
    SamePronoun(String),
    #[error("pronoun `{0}` is not in the subject pool")]
    NotInPool(String),
    #[error("tail `{0}` is empty after rewriting")]
    EmptyTail(String),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

/// How a tail is completed into a full eventuality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TailRule {
    /// Prefix the pronoun and drop a leading `to`.
    AddPronounDropTo,
    AddPronoun,
    /// Prefix the pronoun and `be`.
    AddPronounBe,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingRuleSet {
    pub subject_pool: Vec<String>,
    pub tail_rules: BTreeMap<CommonsenseRelation, TailRule>,
}

impl Default for MappingRuleSet {
    fn default() -> Self {
        use CommonsenseRelation::*;
        let mut tail_rules = BTreeMap::new();
        for r in [XWant, OWant, XIntent, XNeed] {
            tail_rules.insert(r, TailRule::AddPronounDropTo);
        }
        for r in [XEffect, OEffect] {
            tail_rules.insert(r, TailRule::AddPronoun);
        }
        for r in [XReact, OReact, XAttr] {
            tail_rules.insert(r, TailRule::AddPronounBe);
        }
        MappingRuleSet {
            subject_pool: ["i", "he", "she", "man", "woman", "person"].iter().map(|s| s.to_string()).collect(),
            tail_rules,
        }
    }
}

impl MappingRuleSet {
    pub fn validate(&self) -> Result<(), String> {
        if self.subject_pool.is_empty() {
            return Err("subject pool is empty".into());
        }
        for r in CommonsenseRelation::ALL {
            if !self.tail_rules.contains_key(&r) {
                return Err(format!("no tail rule for {r}"));
            }
        }
        Ok(())
    }

    pub fn tail_rule(&self, relation: CommonsenseRelation) -> TailRule {
        self.tail_rules[&relation]
    }
}

/// Concrete fillers for the placeholders of one instantiation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Persons {
    pub x: String,
    pub y: Option<String>,
    pub z: Option<String>,
}

impl Persons {
    pub fn one(x: &str) -> Self {
        Persons { x: x.to_string(), y: None, z: None }
    }

    pub fn two(x: &str, y: &str) -> Self {
        Persons { x: x.to_string(), y: Some(y.to_string()), z: None }
    }

    pub fn three(x: &str, y: &str, z: &str) -> Self {
        Persons { x: x.to_string(), y: Some(y.to_string()), z: Some(z.to_string()) }
    }

    /// The placeholders themselves; mapping with these yields the KB-side
    /// node form used inside relation graphs.
    pub fn placeholders() -> Self {
        Persons::three("PersonX", "PersonY", "PersonZ")
    }

    fn filler(&self, placeholder: &'static str, text: &str) -> Result<&str, AlignError> {
        let missing = || AlignError::MissingPronoun { text: text.to_string(), placeholder };
        match placeholder {
            "PersonX" => Ok(&self.x),
            "PersonY" => self.y.as_deref().ok_or_else(missing),
            _ => self.z.as_deref().ok_or_else(missing),
        }
    }
}

/// The mapping function from KB strings to discourse-graph node form.
#[derive(Debug, Clone, Default)]
pub struct Mapper {
    pub normalizer: Normalizer,
    pub rules: MappingRuleSet,
}

impl Mapper {
    pub fn new(normalizer: Normalizer, rules: MappingRuleSet) -> Self {
        Mapper { normalizer, rules }
    }

    fn lexicon(&self) -> &Lexicon {
        &self.normalizer.lexicon
    }

    fn possessive(&self, filler: &str) -> String {
        if Lexicon::is_placeholder(filler) {
            return format!("{filler}'s");
        }
        let lex = self.lexicon();
        match lex.pronoun_class(filler).map(|c| &lex.pronoun_classes[c]) {
            Some(class) if class.name == "she" => "her".to_string(),
            Some(class) if !class.possessive.is_empty() => class.possessive[0].clone(),
            _ => format!("{filler}'s"),
        }
    }

    /// Tokenizes and replaces every placeholder (and its possessive) with
    /// the matching filler.
    fn substitute(&self, text: &str, persons: &Persons) -> Result<Vec<String>, AlignError> {
        let mut out = Vec::new();
        for token in self.normalizer.tokenize(text) {
            let (base, possessive) = match token.strip_suffix("'s") {
                Some(b) if Lexicon::is_placeholder(b) => (b.to_string(), true),
                _ => (token.clone(), false),
            };
            match crate::lexicon::PLACEHOLDERS.iter().find(|p| **p == base) {
                Some(p) => {
                    let filler = persons.filler(p, text)?;
                    out.push(if possessive { self.possessive(filler) } else { filler.to_string() });
                }
                None => out.push(token),
            }
        }
        Ok(out)
    }

    fn check_pool(&self, pronoun: &str) -> Result<(), AlignError> {
        if Lexicon::is_placeholder(pronoun) || self.rules.subject_pool.iter().any(|p| p == pronoun) {
            Ok(())
        } else {
            Err(AlignError::NotInPool(pronoun.to_string()))
        }
    }

    fn check_persons(&self, persons: &Persons) -> Result<(), AlignError> {
        let all: Vec<&String> = std::iter::once(&persons.x).chain(persons.y.iter()).chain(persons.z.iter()).collect();
        for (i, p) in all.iter().enumerate() {
            self.check_pool(p)?;
            if all[..i].contains(p) {
                return Err(AlignError::SamePronoun(p.to_string()));
            }
        }
        Ok(())
    }

    /// Replaces PersonX/PersonY/PersonZ with the supplied pronouns and
    /// normalizes the result.
    pub fn map_head(&self, head: &str, persons: &Persons) -> Result<Eventuality, AlignError> {
        self.check_persons(persons)?;
        let tokens = self.substitute(head, persons)?;
        Ok(self.normalizer.normalize(&tokens.join(" "))?)
    }

    /// Completes a tail into a full eventuality: the subject is PersonX's
    /// filler for agent relations and PersonY's for theme relations.
    pub fn map_tail(&self, relation: CommonsenseRelation, tail: &str, persons: &Persons) -> Result<Eventuality, AlignError> {
        self.check_persons(persons)?;
        let subject = if relation.is_theme() { persons.filler("PersonY", tail)? } else { persons.x.as_str() };
        let raw = self.normalizer.tokenize(tail);
        let explicit_subject = raw.first().is_some_and(|t| Lexicon::is_placeholder(t));
        let mut body = self.substitute(tail, persons)?;
        let rule = self.rules.tail_rule(relation);
        if !explicit_subject {
            if rule == TailRule::AddPronounDropTo && body.first().is_some_and(|t| t == "to") {
                body.remove(0);
            }
            if body.is_empty() {
                return Err(AlignError::EmptyTail(tail.to_string()));
            }
            let mut prefix = vec![subject.to_string()];
            if rule == TailRule::AddPronounBe && !self.lexicon().copulas.contains(&body[0]) {
                prefix.push("be".to_string());
            }
            prefix.append(&mut body);
            body = prefix;
        }
        if body.is_empty() {
            return Err(AlignError::EmptyTail(tail.to_string()));
        }
        Ok(self.normalizer.normalize(&body.join(" "))?)
    }

    /// Ordered instantiations of the subject pool for a tuple. A third
    /// pronoun is only drawn when the text mentions PersonZ.
    pub fn instantiations(&self, needs_z: bool) -> Vec<Persons> {
        let pool = &self.rules.subject_pool;
        let mut out = Vec::new();
        for x in pool {
            for y in pool.iter().filter(|y| *y != x) {
                if needs_z {
                    for z in pool.iter().filter(|z| *z != x && *z != y) {
                        out.push(Persons::three(x, y, z));
                    }
                } else {
                    out.push(Persons::two(x, y));
                }
            }
        }
        out
    }
}

/// Patterns accepted for stative (xAttr) tails.
pub const STATIVE_TAIL_PATTERNS: [&str; 2] = ["s-v-a", "s-v-o"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentRow {
    pub tuple_index: usize,
    pub relation: CommonsenseRelation,
    pub head_hits: Vec<String>,
    pub tail_hits: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentTable {
    pub rows: Vec<AlignmentRow>,
}

impl AlignmentTable {
    /// Graph nodes hit by any head or tail of tuples under `relation`.
    pub fn aligned_nodes(&self, relation: CommonsenseRelation) -> BTreeSet<String> {
        self.rows
            .iter()
            .filter(|r| r.relation == relation)
            .flat_map(|r| r.head_hits.iter().chain(r.tail_hits.iter()).cloned())
            .collect()
    }

    /// `tuple_index\trelation\thead_hits\ttail_hits`, hits joined by `|`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("tuple_index\trelation\thead_hits\ttail_hits\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.tuple_index,
                r.relation,
                r.head_hits.join("|"),
                r.tail_hits.join("|")
            ));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, String> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(format!("alignment line {}: expected 4 fields", i + 1));
            }
            let hits = |s: &str| if s.is_empty() { Vec::new() } else { s.split('|').map(String::from).collect() };
            rows.push(AlignmentRow {
                tuple_index: f[0].parse().map_err(|e| format!("alignment line {}: {e}", i + 1))?,
                relation: f[1].parse().map_err(|e| format!("alignment line {}: {e}", i + 1))?,
                head_hits: hits(f[2]),
                tail_hits: hits(f[3]),
            });
        }
        Ok(AlignmentTable { rows })
    }
}

/// Looks every tuple up in the graph under all subject-pool instantiations.
/// All exact-key hits are kept.
pub fn match_into_graph(kb: &SeedKb, graph: &DiscourseGraph, mapper: &Mapper) -> AlignmentTable {
    let rows = kb
        .tuples
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let needs_z = t.head.contains("PersonZ") || t.tail.contains("PersonZ");
            let mut head_hits = BTreeSet::new();
            let mut tail_hits = BTreeSet::new();
            for persons in mapper.instantiations(needs_z) {
                if let Ok(ev) = mapper.map_head(&t.head, &persons) {
                    let key = ev.key();
                    if graph.lookup(&key).is_some() {
                        head_hits.insert(key);
                    }
                }
                if let Ok(ev) = mapper.map_tail(t.relation, &t.tail, &persons) {
                    let key = ev.key();
                    if let Some(id) = graph.lookup(&key) {
                        let stative_ok = t.relation != CommonsenseRelation::XAttr
                            || STATIVE_TAIL_PATTERNS.contains(&graph.node(id).pattern.as_str());
                        if stative_ok {
                            tail_hits.insert(key);
                        }
                    }
                }
            }
            AlignmentRow {
                tuple_index: i,
                relation: t.relation,
                head_hits: head_hits.into_iter().collect(),
                tail_hits: tail_hits.into_iter().collect(),
            }
        })
        .collect();
    AlignmentTable { rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationCoverage {
    pub tuples: usize,
    pub head_matched: usize,
    pub tail_matched: usize,
    pub both_matched: usize,
}

impl RelationCoverage {
    /// Fraction of tuples with both head and tail found.
    pub fn coverage(&self) -> f64 {
        self.both_matched as f64 / self.tuples as f64
    }

    /// Fraction of tuples whose head alone was found.
    pub fn head_coverage(&self) -> f64 {
        self.head_matched as f64 / self.tuples as f64
    }

    pub fn tail_coverage(&self) -> f64 {
        self.tail_matched as f64 / self.tuples as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub per_relation: BTreeMap<CommonsenseRelation, RelationCoverage>,
    pub unique_heads: usize,
    pub unique_heads_matched: usize,
}

impl CoverageReport {
    pub fn head_coverage(&self) -> f64 {
        self.unique_heads_matched as f64 / self.unique_heads as f64
    }

    pub fn macro_average(&self) -> f64 {
        let n = self.per_relation.len() as f64;
        self.per_relation.values().map(|c| c.coverage()).sum::<f64>() / n
    }

    pub fn macro_average_head_only(&self) -> f64 {
        let n = self.per_relation.len() as f64;
        self.per_relation.values().map(|c| c.head_coverage()).sum::<f64>() / n
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "relation\ttuples\thead_matched\ttail_matched\tboth_matched\tcoverage\thead_only_coverage\n",
        );
        for (r, c) in &self.per_relation {
            out.push_str(&format!(
                "{r}\t{}\t{}\t{}\t{}\t{:.4}\t{:.4}\n",
                c.tuples,
                c.head_matched,
                c.tail_matched,
                c.both_matched,
                c.coverage(),
                c.head_coverage()
            ));
        }
        out.push_str(&format!("head\t{}\t{}\t-\t-\t{:.4}\t-\n", self.unique_heads, self.unique_heads_matched, self.head_coverage()));
        out.push_str(&format!(
            "average\t-\t-\t-\t-\t{:.4}\t{:.4}\n",
            self.macro_average(),
            self.macro_average_head_only()
        ));
        out
    }

    pub fn to_summary(&self) -> String {
        let mut out = String::new();
        for (r, c) in &self.per_relation {
            out.push_str(&format!("coverage.{r}={:.6}\n", c.coverage()));
            out.push_str(&format!("head_only_coverage.{r}={:.6}\n", c.head_coverage()));
        }
        out.push_str(&format!("coverage.head={:.6}\n", self.head_coverage()));
        out.push_str(&format!("coverage.average={:.6}\n", self.macro_average()));
        out.push_str(&format!("head_only_coverage.average={:.6}\n", self.macro_average_head_only()));
        out
    }
}

pub fn coverage_stats(kb: &SeedKb, table: &AlignmentTable) -> Result<CoverageReport, AlignError> {
    if table.rows.is_empty() {
        return Err(AlignError::Empty("alignment table"));
    }
    let mut per_relation: BTreeMap<CommonsenseRelation, RelationCoverage> = BTreeMap::new();
    let mut heads: BTreeMap<&str, bool> = BTreeMap::new();
    for row in &table.rows {
        let c = per_relation.entry(row.relation).or_insert(RelationCoverage {
            tuples: 0,
            head_matched: 0,
            tail_matched: 0,
            both_matched: 0,
        });
        let h = !row.head_hits.is_empty();
        let t = !row.tail_hits.is_empty();
        c.tuples += 1;
        c.head_matched += h as usize;
        c.tail_matched += t as usize;
        c.both_matched += (h && t) as usize;
        let head = kb.tuples[row.tuple_index].head.as_str();
        *heads.entry(head).or_insert(false) |= h;
    }
    Ok(CoverageReport {
        per_relation,
        unique_heads: heads.len(),
        unique_heads_matched: heads.values().filter(|m| **m).count(),
    })
}

/// Normalized pattern frequencies over the configured codes plus the
/// `unmatched` bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternDistribution {
    pub codes: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl PatternDistribution {
    pub fn get(&self, code: &str) -> f64 {
        self.codes.iter().position(|c| c == code).map_or(0.0, |i| self.probabilities[i])
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("pattern\tprobability\n");
        for (c, p) in self.codes.iter().zip(&self.probabilities) {
            out.push_str(&format!("{c}\t{p:.6}\n"));
        }
        out
    }
}

pub fn pattern_distribution(items: &[Eventuality], codes: &[String]) -> Result<PatternDistribution, AlignError> {
    if items.is_empty() {
        return Err(AlignError::Empty("pattern distribution input"));
    }
    let mut all: Vec<String> = codes.to_vec();
    all.push(UNMATCHED.to_string());
    let mut counts = vec![0usize; all.len()];
    for ev in items {
        let i = all.iter().position(|c| *c == ev.pattern).unwrap_or(all.len() - 1);
        counts[i] += 1;
    }
    let total = items.len() as f64;
    Ok(PatternDistribution {
        codes: all,
        probabilities: counts.iter().map(|&c| c as f64 / total).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided p-value; absent when there are no residual degrees of
    /// freedom (two points).
    pub p_value: Option<f64>,
}

/// Pearson product-moment correlation with a two-sided t-test p-value.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<Correlation, AlignError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(AlignError::UndefinedCorrelation("need two equal-length vectors of length >= 2"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AlignError::UndefinedCorrelation("zero variance"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = n - 2.0;
    let p_value = if df < 1.0 {
        None
    } else if r.abs() >= 1.0 {
        Some(0.0)
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
    };
    Ok(Correlation { r, p_value })
}
