//! The discourse graph: eventuality nodes keyed by their canonical string and
//! weighted, typed discourse edges with per-node in/out indices.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::Normalizer;
use crate::relation::DiscourseRelation;

/// A lemmatized, pattern-classified token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Eventuality {
    pub tokens: Vec<String>,
    pub pattern: String,
    pub subject_index: Option<usize>,
}

impl Eventuality {
    /// Canonical node identity: tokens joined by single spaces.
    pub fn key(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn subject(&self) -> Option<&str> {
        self.subject_index.map(|i| self.tokens[i].as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscourseEdge {
    pub head: NodeId,
    pub relation: DiscourseRelation,
    pub tail: NodeId,
    /// Co-occurrence frequency. Stored, not yet consumed downstream.
    pub weight: f64,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    UnknownRelation {
        line: usize,
        #[source]
        source: crate::relation::UnknownName,
    },
    #[error("edge endpoint `{0}` is not a node")]
    DanglingEndpoint(String),
}

/// Accumulates edges during ingestion; [`GraphBuilder::freeze`] produces the
/// immutable graph.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<Eventuality>,
    index: HashMap<String, NodeId>,
    edges: Vec<DiscourseEdge>,
    edge_index: HashMap<(NodeId, DiscourseRelation, NodeId), usize>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, ev: Eventuality) -> NodeId {
        let key = ev.key();
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(ev);
        self.index.insert(key, id);
        id
    }

    /// Adds an edge between two already-normalized eventualities; repeated
    /// `(head, relation, tail)` triples accumulate weight.
    pub fn add_edge(&mut self, head: Eventuality, relation: DiscourseRelation, tail: Eventuality, weight: f64) {
        let h = self.add_node(head);
        let t = self.add_node(tail);
        match self.edge_index.get(&(h, relation, t)) {
            Some(&i) => self.edges[i].weight += weight,
            None => {
                self.edge_index.insert((h, relation, t), self.edges.len());
                self.edges.push(DiscourseEdge { head: h, relation, tail: t, weight });
            }
        }
    }

    pub fn freeze(self) -> DiscourseGraph {
        DiscourseGraph::from_parts(self.nodes, self.edges)
    }
}

/// Directed multi-relation eventuality graph. Immutable once built.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GraphParts", into = "GraphParts")]
pub struct DiscourseGraph {
    nodes: Vec<Eventuality>,
    edges: Vec<DiscourseEdge>,
    index: HashMap<String, NodeId>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphParts {
    nodes: Vec<Eventuality>,
    edges: Vec<DiscourseEdge>,
}

impl TryFrom<GraphParts> for DiscourseGraph {
    type Error = GraphError;

    fn try_from(parts: GraphParts) -> Result<Self, Self::Error> {
        let n = parts.nodes.len() as u32;
        if let Some(e) = parts.edges.iter().find(|e| e.head.0 >= n || e.tail.0 >= n) {
            return Err(GraphError::DanglingEndpoint(format!("{:?}", e)));
        }
        Ok(DiscourseGraph::from_parts(parts.nodes, parts.edges))
    }
}

impl From<DiscourseGraph> for GraphParts {
    fn from(g: DiscourseGraph) -> Self {
        GraphParts { nodes: g.nodes, edges: g.edges }
    }
}

impl PartialEq for DiscourseGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl DiscourseGraph {
    fn from_parts(nodes: Vec<Eventuality>, edges: Vec<DiscourseEdge>) -> Self {
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, ev)| (ev.key(), NodeId(i as u32)))
            .collect();
        let mut out_edges = vec![Vec::new(); nodes.len()];
        let mut in_edges = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            out_edges[e.head.index()].push(i);
            in_edges[e.tail.index()].push(i);
        }
        DiscourseGraph { nodes, edges, index, out_edges, in_edges }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Eventuality] {
        &self.nodes
    }

    pub fn edges(&self) -> &[DiscourseEdge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Eventuality {
        &self.nodes[id.index()]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn lookup(&self, key: &str) -> Option<NodeId> {
        self.index.get(key).copied()
    }

    pub fn key(&self, id: NodeId) -> String {
        self.nodes[id.index()].key()
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &DiscourseEdge> {
        self.out_edges[id.index()].iter().map(|&i| &self.edges[i])
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &DiscourseEdge> {
        self.in_edges[id.index()].iter().map(|&i| &self.edges[i])
    }

    pub fn out_edges_by(&self, id: NodeId, relation: DiscourseRelation) -> impl Iterator<Item = &DiscourseEdge> {
        self.out_edges(id).filter(move |e| e.relation == relation)
    }

    pub fn in_edges_by(&self, id: NodeId, relation: DiscourseRelation) -> impl Iterator<Item = &DiscourseEdge> {
        self.in_edges(id).filter(move |e| e.relation == relation)
    }

    pub fn find_edge(&self, head: &str, relation: DiscourseRelation, tail: &str) -> Option<&DiscourseEdge> {
        let h = self.lookup(head)?;
        let t = self.lookup(tail)?;
        self.out_edges_by(h, relation).find(|e| e.tail == t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphFormat {
    #[default]
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadOptions {
    /// Fail on the first unknown relation instead of skipping the line.
    pub strict: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub lines: usize,
    pub accepted: usize,
    /// `(line number, reason)` for every skipped line.
    pub rejected: Vec<(usize, String)>,
}

/// Reads `head\trelation\ttail[\tweight]` lines. Node strings are normalized
/// to their canonical key; duplicate triples merge by summing weights.
pub fn load_discourse_graph(
    path: &Path,
    format: GraphFormat,
    normalizer: &Normalizer,
    options: LoadOptions,
) -> Result<(DiscourseGraph, LoadReport), GraphError> {
    let GraphFormat::Tsv = format;
    let io_err = |source| GraphError::Io { path: path.display().to_string(), source };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut builder = GraphBuilder::new();
    let mut report = LoadReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        report.lines += 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(GraphError::Parse {
                line: line_no,
                message: format!("expected 3 or 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let relation = match fields[1].trim().parse::<DiscourseRelation>() {
            Ok(r) => r,
            Err(source) if options.strict => {
                return Err(GraphError::UnknownRelation { line: line_no, source })
            }
            Err(e) => {
                report.rejected.push((line_no, e.to_string()));
                continue;
            }
        };
        let weight = match fields.get(3) {
            Some(w) => w.trim().parse::<f64>().ok().filter(|w| w.is_finite() && *w >= 0.0).ok_or_else(|| {
                GraphError::Parse { line: line_no, message: format!("invalid weight `{w}`") }
            })?,
            None => 1.0,
        };
        let parse_node = |text: &str| {
            normalizer.normalize(text).map_err(|e| GraphError::Parse { line: line_no, message: e.to_string() })
        };
        let head = parse_node(fields[0])?;
        let tail = parse_node(fields[2])?;
        builder.add_edge(head, relation, tail, weight);
        report.accepted += 1;
    }
    Ok((builder.freeze(), report))
}
