//! Novelty, diversity and report assembly.
//!
//! Counts are kept as integer fractions so callers can check them exactly;
//! `value()` gives the float.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::relation::CommonsenseRelation;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no generated tails to score")]
    EmptyPool,
    #[error("every generated tail is empty")]
    AllEmpty,
    #[error("nothing to report")]
    EmptyReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Novelty {
    /// Novel instances over all instances in the pool.
    pub nt: Fraction,
    /// Novel distinct tails over distinct tails in the pool.
    pub nu: Fraction,
}

/// Pools the top-`k` tails of every head and counts those absent from
/// `train_tails`, once per instance and once per distinct string.
pub fn novelty(generated: &BTreeMap<String, Vec<String>>, train_tails: &BTreeSet<String>, k: usize) -> Result<Novelty, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    let pool: Vec<&String> = generated.values().flat_map(|tails| tails.iter().take(k)).collect();
    if pool.is_empty() {
        return Err(MetricsError::EmptyPool);
    }
    let novel_instances = pool.iter().filter(|t| !train_tails.contains(**t)).count();
    let unique: BTreeSet<&String> = pool.iter().copied().collect();
    let novel_unique = unique.iter().filter(|t| !train_tails.contains(**t)).count();
    Ok(Novelty {
        nt: Fraction { num: novel_instances as u64, den: pool.len() as u64 },
        nu: Fraction { num: novel_unique as u64, den: unique.len() as u64 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistN {
    /// Mean of per-head ratios; `None` when every head was excluded.
    pub mean: Option<f64>,
    pub per_head: BTreeMap<String, Fraction>,
    /// Heads with no n-grams of this order.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diversity {
    pub dist1: DistN,
    pub dist2: DistN,
}

fn dist_n(generated: &BTreeMap<String, Vec<String>>, n: usize) -> DistN {
    let mut per_head = BTreeMap::new();
    let mut excluded = 0;
    for (head, tails) in generated {
        let mut total = 0u64;
        let mut distinct = BTreeSet::new();
        for tail in tails {
            let tokens: Vec<&str> = tail.split_whitespace().collect();
            for gram in tokens.windows(n) {
                total += 1;
                distinct.insert(gram.to_vec());
            }
        }
        if total == 0 {
            excluded += 1;
        } else {
            per_head.insert(head.clone(), Fraction { num: distinct.len() as u64, den: total });
        }
    }
    let mean = (!per_head.is_empty()).then(|| per_head.values().map(|f: &Fraction| f.value()).sum::<f64>() / per_head.len() as f64);
    DistN { mean, per_head, excluded }
}

/// Per-head distinct-unigram and distinct-bigram ratios over whitespace
/// tokens, averaged over heads that have any n-gram of that order.
pub fn diversity(generated: &BTreeMap<String, Vec<String>>) -> Result<Diversity, MetricsError> {
    if generated.values().flatten().all(|t| t.split_whitespace().next().is_none()) {
        return Err(MetricsError::AllEmpty);
    }
    Ok(Diversity { dist1: dist_n(generated, 1), dist2: dist_n(generated, 2) })
}

/// Two-sided two-proportion z-test. Returns `(z, p)`; `None` when pooled
/// variance is zero or a sample is empty.
pub fn two_proportion_z(correct_a: u64, n_a: u64, correct_b: u64, n_b: u64) -> Option<(f64, f64)> {
    if n_a == 0 || n_b == 0 {
        return None;
    }
    let (pa, pb) = (correct_a as f64 / n_a as f64, correct_b as f64 / n_b as f64);
    let pooled = (correct_a + correct_b) as f64 / (n_a + n_b) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n_a as f64 + 1.0 / n_b as f64)).sqrt();
    if se == 0.0 {
        return None;
    }
    let z = (pa - pb) / se;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Some((z, 2.0 * (1.0 - normal.cdf(z.abs()))))
}

pub const NOVELTY_KS: [usize; 4] = [1, 2, 5, 10];

/// Metrics of one relation; absent cells are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationMetrics {
    pub accuracy: Option<f64>,
    pub nt: BTreeMap<usize, f64>,
    pub nu: BTreeMap<usize, f64>,
    pub dist1: Option<f64>,
    pub dist2: Option<f64>,
}

impl RelationMetrics {
    /// Fills novelty at every reported `k` and diversity of the top-10 tails.
    pub fn from_generated(
        accuracy: Option<f64>,
        generated: &BTreeMap<String, Vec<String>>,
        train_tails: &BTreeSet<String>,
    ) -> Result<Self, MetricsError> {
        let mut m = RelationMetrics { accuracy, ..Default::default() };
        for k in NOVELTY_KS {
            let nov = novelty(generated, train_tails, k)?;
            m.nt.insert(k, nov.nt.value());
            m.nu.insert(k, nov.nu.value());
        }
        let top: BTreeMap<String, Vec<String>> =
            generated.iter().map(|(h, t)| (h.clone(), t.iter().take(10).cloned().collect())).collect();
        let d = diversity(&top)?;
        m.dist1 = d.dist1.mean;
        m.dist2 = d.dist2.mean;
        Ok(m)
    }

    fn cells(&self) -> Vec<Option<f64>> {
        let mut out = vec![self.accuracy];
        for k in NOVELTY_KS {
            out.push(self.nt.get(&k).copied());
            out.push(self.nu.get(&k).copied());
        }
        out.push(self.dist1);
        out.push(self.dist2);
        out
    }
}

/// Column order of the rendered report.
pub fn report_columns() -> Vec<String> {
    let mut cols = vec!["relation".to_string(), "accuracy".to_string()];
    for k in NOVELTY_KS {
        cols.push(format!("NT@{k}"));
        cols.push(format!("NU@{k}"));
    }
    cols.push("dist1".into());
    cols.push("dist2".into());
    cols
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub relations: BTreeMap<CommonsenseRelation, RelationMetrics>,
    /// Mean over relations that have the cell, in column order after `relation`.
    pub macro_average: Vec<Option<f64>>,
    /// Relations lacking each cell, same order.
    pub missing: Vec<usize>,
}

pub fn assemble_report(relations: BTreeMap<CommonsenseRelation, RelationMetrics>) -> Result<MetricsReport, MetricsError> {
    if relations.is_empty() {
        return Err(MetricsError::EmptyReport);
    }
    let width = report_columns().len() - 1;
    let mut sums = vec![(0.0, 0usize); width];
    for m in relations.values() {
        for (slot, cell) in sums.iter_mut().zip(m.cells()) {
            if let Some(x) = cell {
                slot.0 += x;
                slot.1 += 1;
            }
        }
    }
    let macro_average = sums.iter().map(|&(s, n)| (n > 0).then(|| s / n as f64)).collect();
    let missing = sums.iter().map(|&(_, n)| relations.len() - n).collect();
    Ok(MetricsReport { relations, macro_average, missing })
}

fn fmt_cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

impl MetricsReport {
    /// Header, one row per relation, a macro row and footnotes for cells
    /// averaged over fewer than all relations.
    pub fn to_tsv(&self) -> String {
        let cols = report_columns();
        let mut out = cols.join("\t");
        out.push('\n');
        for (rel, m) in &self.relations {
            let row: Vec<String> = m.cells().into_iter().map(fmt_cell).collect();
            out.push_str(&format!("{}\t{}\n", rel.as_str(), row.join("\t")));
        }
        let row: Vec<String> = self.macro_average.iter().copied().map(fmt_cell).collect();
        out.push_str(&format!("macro\t{}\n", row.join("\t")));
        for (col, n) in cols[1..].iter().zip(&self.missing) {
            if *n > 0 {
                out.push_str(&format!("# {col}: {n} missing\n"));
            }
        }
        out
    }

    /// One object per relation then a macro object.
    pub fn to_jsonl(&self) -> String {
        let cols = report_columns();
        let line = |name: &str, cells: Vec<Option<f64>>, missing: Option<&[usize]>| {
            let mut obj = serde_json::Map::new();
            obj.insert("relation".into(), name.into());
            for (i, (c, v)) in cols[1..].iter().zip(cells).enumerate() {
                obj.insert(c.clone(), v.map_or(serde_json::Value::Null, Into::into));
                if let Some(m) = missing.filter(|m| m[i] > 0) {
                    obj.insert(format!("{c}_missing"), m[i].into());
                }
            }
            serde_json::Value::Object(obj).to_string()
        };
        let mut out = String::new();
        for (rel, m) in &self.relations {
            out.push_str(&line(rel.as_str(), m.cells(), None));
            out.push('\n');
        }
        out.push_str(&line("macro", self.macro_average.clone(), Some(&self.missing)));
        out.push('\n');
        out
    }
}
