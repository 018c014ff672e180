//! Seed commonsense KB: `(head, relation, tail)` tuples and their loaders.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relation::{CommonsenseRelation, DiscourseRelation, Split};

/// The discourse edge a populated tuple was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub source_head: String,
    pub source_relation: DiscourseRelation,
    pub source_tail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonsenseTuple {
    pub head: String,
    pub relation: CommonsenseRelation,
    pub tail: String,
    pub split: Split,
    pub label: Option<bool>,
    pub score: Option<f64>,
    pub provenance: Option<Provenance>,
}

impl CommonsenseTuple {
    pub fn new(head: &str, relation: CommonsenseRelation, tail: &str, split: Split) -> Self {
        CommonsenseTuple {
            head: head.to_string(),
            relation,
            tail: tail.to_string(),
            split,
            label: None,
            score: None,
            provenance: None,
        }
    }

    /// Checks the score range and that populated tuples carry provenance.
    pub fn validate(&self) -> Result<(), KbError> {
        if let Some(s) = self.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(KbError::Invalid(format!("score {s} outside [0,1]")));
            }
        }
        if self.split == Split::Populated && self.provenance.is_none() {
            return Err(KbError::Invalid("populated tuple without provenance".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedKb {
    pub tuples: Vec<CommonsenseTuple>,
}

impl SeedKb {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn of_relation(&self, relation: CommonsenseRelation) -> impl Iterator<Item = &CommonsenseTuple> {
        self.tuples.iter().filter(move |t| t.relation == relation)
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("invalid tuple: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KbFormat {
    /// One row per event with a JSON string array per relation column.
    PivotedCsv,
    /// `head\trelation\ttail\tsplit`.
    TripleTsv,
}

const NONE_TAIL: &str = "none";

pub fn load_seed_kb(path: &Path, format: KbFormat) -> Result<SeedKb, KbError> {
    let io_err = |source| KbError::Io { path: path.display().to_string(), source };
    let file = File::open(path).map_err(io_err)?;
    match format {
        KbFormat::PivotedCsv => read_pivoted_csv(file),
        KbFormat::TripleTsv => read_triple_tsv(BufReader::new(file)).map_err(|e| match e {
            KbError::Io { source, .. } => io_err(source),
            other => other,
        }),
    }
}

fn read_pivoted_csv<R: std::io::Read>(reader: R) -> Result<SeedKb, KbError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| KbError::Row { row: 0, message: e.to_string() })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let event_col = column("event").ok_or(KbError::Row { row: 0, message: "missing `event` column".into() })?;
    let split_col = column("split").ok_or(KbError::Row { row: 0, message: "missing `split` column".into() })?;
    let relation_cols: Vec<(CommonsenseRelation, usize)> = CommonsenseRelation::ALL
        .iter()
        .filter_map(|r| column(r.as_str()).map(|c| (*r, c)))
        .collect();

    let mut kb = SeedKb::default();
    for (i, record) in csv.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| KbError::Row { row, message: e.to_string() })?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let split: Split = field(split_col)
            .trim()
            .parse()
            .map_err(|e: crate::relation::UnknownName| KbError::Row { row, message: e.to_string() })?;
        let event = field(event_col).trim();
        for (relation, col) in &relation_cols {
            let cell = field(*col).trim();
            if cell.is_empty() {
                continue;
            }
            let tails: Vec<String> = serde_json::from_str(cell).map_err(|e| KbError::Row {
                row,
                message: format!("{relation} cell is not a string array: {e}"),
            })?;
            for tail in tails {
                let tail = tail.trim();
                if tail.is_empty() || tail.eq_ignore_ascii_case(NONE_TAIL) {
                    continue;
                }
                kb.tuples.push(CommonsenseTuple::new(event, *relation, tail, split));
            }
        }
    }
    Ok(kb)
}

fn read_triple_tsv<R: BufRead>(reader: R) -> Result<SeedKb, KbError> {
    let mut kb = SeedKb::default();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|source| KbError::Io { path: String::new(), source })?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(KbError::Row { row, message: format!("expected 4 fields, found {}", fields.len()) });
        }
        let relation: CommonsenseRelation = fields[1]
            .trim()
            .parse()
            .map_err(|e: crate::relation::UnknownName| KbError::Row { row, message: e.to_string() })?;
        let split: Split = fields[3]
            .trim()
            .parse()
            .map_err(|e: crate::relation::UnknownName| KbError::Row { row, message: e.to_string() })?;
        let tail = fields[2].trim();
        if tail.eq_ignore_ascii_case(NONE_TAIL) {
            continue;
        }
        kb.tuples.push(CommonsenseTuple::new(fields[0].trim(), relation, tail, split));
    }
    Ok(kb)
}
