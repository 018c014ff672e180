//! The link scorer: encoded node vectors, one mean-aggregation neighbor
//! layer, and a two-way softmax head over the concatenated pair.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{EncoderConfig, EncoderError, NodeEncoder};
use crate::extract::RelationGraph;
use crate::relation::CommonsenseRelation;

pub const MODEL_VERSION: &str = "ckgp-model-v1";

/// Index of the "plausible" class in the two-way output.
pub const PLAUSIBLE: usize = 0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite loss at batch example {index}")]
    NonFiniteLoss { index: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("model version `{found}` is not readable by this build (expected `{MODEL_VERSION}`)")]
    Version { found: String },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix { rows: rows.len(), cols, data: rows.iter().flat_map(|r| r.iter().copied()).collect() }
    }

    /// Uniform Xavier initialization.
    pub fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        Matrix { rows, cols, data: (0..rows * cols).map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * limit).collect() }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `selfᵀ · y`.
    pub fn t_matvec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, yr) in y.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += yr * w;
            }
        }
        out
    }

    /// `self += a ⊗ b`.
    fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        for (r, ar) in a.iter().enumerate() {
            for (c, bc) in b.iter().enumerate() {
                self.data[r * self.cols + c] += ar * bc;
            }
        }
    }

    fn add(&mut self, other: &Matrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SageParams {
    /// `out_dim × 2d`.
    pub w: Matrix,
    pub activation: Activation,
    pub neighbor_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    /// `2 × 2·out_dim`.
    pub w: Matrix,
    pub b: [f64; 2],
}

/// One relation's scorer. `sage: None` is the encoder-only baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    pub relation: CommonsenseRelation,
    pub encoder: EncoderConfig,
    pub dim: usize,
    pub sage: Option<SageParams>,
    pub head: HeadParams,
    /// Seeds neighbor sampling at scoring time.
    pub neighbor_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Sage { out_dim: usize, activation: Activation, neighbor_size: usize },
    EncoderOnly,
}

impl ScorerParams {
    pub fn init(relation: CommonsenseRelation, encoder: EncoderConfig, dim: usize, variant: Variant, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (sage, out_dim) = match variant {
            Variant::Sage { out_dim, activation, neighbor_size } => {
                (Some(SageParams { w: Matrix::xavier(out_dim, 2 * dim, &mut rng), activation, neighbor_size }), out_dim)
            }
            Variant::EncoderOnly => (None, dim),
        };
        let head = HeadParams { w: Matrix::xavier(2, 2 * out_dim, &mut rng), b: [0.0; 2] };
        ScorerParams { relation, encoder, dim, sage, head, neighbor_seed: seed }
    }

    pub fn out_dim(&self) -> usize {
        self.sage.as_ref().map_or(self.dim, |s| s.w.rows)
    }

    /// Checks every shape once so scoring never has to.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 {
            return Err(ModelError::Shape("encoder dimension is zero".into()));
        }
        if let Some(s) = &self.sage {
            if s.w.rows == 0 || s.w.cols != 2 * self.dim || s.w.data.len() != s.w.rows * s.w.cols {
                return Err(ModelError::Shape(format!("sage W is {}×{}, expected out×{}", s.w.rows, s.w.cols, 2 * self.dim)));
            }
        }
        let h = &self.head.w;
        if h.rows != 2 || h.cols != 2 * self.out_dim() || h.data.len() != h.rows * h.cols {
            return Err(ModelError::Shape(format!("head W′ is {}×{}, expected 2×{}", h.rows, h.cols, 2 * self.out_dim())));
        }
        Ok(())
    }

    fn param_count(&self) -> usize {
        self.sage.as_ref().map_or(0, |s| s.w.data.len()) + self.head.w.data.len() + 2
    }
}

/// Node vectors and neighbor lists a scorer reads.
#[derive(Debug, Clone, Default)]
pub struct Features {
    pub dim: usize,
    index: HashMap<String, usize>,
    pub embeddings: Vec<Vec<f64>>,
    pub neighbors: Vec<Vec<usize>>,
}

impl Features {
    /// Encodes every node of the relation graph; neighbors come from the
    /// candidate edges.
    pub fn from_relation_graph(encoder: &dyn NodeEncoder, rg: &RelationGraph) -> Result<Self, ModelError> {
        let adj = rg.adjacency();
        let embeddings = rg.nodes.iter().map(|k| encoder.encode_key(k)).collect::<Result<Vec<_>, _>>()?;
        Ok(Features {
            dim: encoder.dim(),
            index: rg.nodes.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect(),
            embeddings,
            neighbors: adj.neighbors,
        })
    }

    /// Features from explicit vectors and neighbor lists.
    pub fn from_parts(keys: Vec<String>, embeddings: Vec<Vec<f64>>, neighbors: Vec<Vec<usize>>) -> Self {
        assert_eq!(keys.len(), embeddings.len());
        assert_eq!(keys.len(), neighbors.len());
        Features {
            dim: embeddings.first().map_or(0, |e| e.len()),
            index: keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect(),
            embeddings,
            neighbors,
        }
    }

    pub fn id(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Index of `key`, encoding it as an isolated node if unseen.
    pub fn ensure(&mut self, encoder: &dyn NodeEncoder, key: &str) -> Result<usize, ModelError> {
        if let Some(i) = self.id(key) {
            return Ok(i);
        }
        let i = self.embeddings.len();
        self.embeddings.push(encoder.encode_key(key)?);
        self.neighbors.push(Vec::new());
        self.index.insert(key.to_string(), i);
        Ok(i)
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG for one node's neighbor draw in one round.
pub fn neighbor_rng(seed: u64, node: usize, round: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(node as u64 ^ splitmix64(round))))
}

/// Exactly `size` neighbors: without replacement when the degree allows,
/// uniformly with replacement below it, none at degree zero.
pub fn sample_neighbors(neighbors: &[usize], size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = neighbors.len();
    if n == 0 {
        return Vec::new();
    }
    if n < size {
        return (0..size).map(|_| neighbors[rng.gen_range(0..n as u64) as usize]).collect();
    }
    let mut pool = neighbors.to_vec();
    for i in 0..size {
        let j = i + rng.gen_range(0..(n - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(size);
    pool
}

/// Intermediate values for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    /// `[e_v ; h_N(v)]`, empty for the encoder-only variant.
    pub input: Vec<f64>,
    pub z: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn node_state(params: &ScorerParams, features: &Features, node: usize, round: u64) -> NodeState {
    let e = &features.embeddings[node];
    let Some(sage) = &params.sage else {
        return NodeState { input: Vec::new(), z: Vec::new(), h: e.clone() };
    };
    let mut rng = neighbor_rng(params.neighbor_seed, node, round);
    let sampled = sample_neighbors(&features.neighbors[node], sage.neighbor_size, &mut rng);
    let mut mean = vec![0.0; features.dim];
    for &s in &sampled {
        for (m, x) in mean.iter_mut().zip(&features.embeddings[s]) {
            *m += x;
        }
    }
    if !sampled.is_empty() {
        let k = sampled.len() as f64;
        mean.iter_mut().for_each(|m| *m /= k);
    }
    let mut input = e.clone();
    input.extend_from_slice(&mean);
    let z = sage.w.matvec(&input);
    let h = z.iter().map(|&x| sage.activation.apply(x)).collect();
    NodeState { input, z, h }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairForward {
    pub u: NodeState,
    pub v: NodeState,
    pub x: Vec<f64>,
    pub logits: [f64; 2],
    pub probs: [f64; 2],
}

pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let a = (logits[0] - m).exp();
    let b = (logits[1] - m).exp();
    [a / (a + b), b / (a + b)]
}

/// Output layer on already-computed node representations.
pub fn head_forward(head: &HeadParams, hu: &[f64], hv: &[f64]) -> ([f64; 2], [f64; 2]) {
    let mut x = hu.to_vec();
    x.extend_from_slice(hv);
    let l = head.w.matvec(&x);
    let logits = [l[0] + head.b[0], l[1] + head.b[1]];
    (logits, softmax2(logits))
}

pub fn forward(params: &ScorerParams, features: &Features, u: usize, v: usize, round: u64) -> PairForward {
    let u = node_state(params, features, u, round);
    let v = node_state(params, features, v, round);
    let mut x = u.h.clone();
    x.extend_from_slice(&v.h);
    let (logits, probs) = head_forward(&params.head, &u.h, &v.h);
    PairForward { u, v, x, logits, probs }
}

/// Probability that `(u, v)` is plausible. Uses the round-0 neighbor draw,
/// so it is a pure function of parameters and features.
pub fn score(params: &ScorerParams, features: &Features, u: usize, v: usize) -> f64 {
    forward(params, features, u, v, 0).probs[PLAUSIBLE]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Example {
    pub u: usize,
    pub v: usize,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub sage_w: Option<Matrix>,
    pub head_w: Matrix,
    pub head_b: [f64; 2],
}

impl Gradients {
    fn zeros(params: &ScorerParams) -> Self {
        Gradients {
            sage_w: params.sage.as_ref().map(|s| Matrix::zeros(s.w.rows, s.w.cols)),
            head_w: Matrix::zeros(params.head.w.rows, params.head.w.cols),
            head_b: [0.0; 2],
        }
    }

    fn add(&mut self, other: &Gradients) {
        if let (Some(a), Some(b)) = (&mut self.sage_w, &other.sage_w) {
            a.add(b);
        }
        self.head_w.add(&other.head_w);
        self.head_b[0] += other.head_b[0];
        self.head_b[1] += other.head_b[1];
    }

    fn scale(&mut self, k: f64) {
        if let Some(a) = &mut self.sage_w {
            a.data.iter_mut().for_each(|x| *x *= k);
        }
        self.head_w.data.iter_mut().for_each(|x| *x *= k);
        self.head_b.iter_mut().for_each(|x| *x *= k);
    }

    fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.sage_w.iter().flat_map(|m| m.data.iter().copied()).chain(self.head_w.data.iter().copied()).chain(self.head_b)
    }
}

fn example_gradients(params: &ScorerParams, features: &Features, ex: &Example, round: u64) -> (f64, Gradients) {
    let f = forward(params, features, ex.u, ex.v, round);
    let target = if ex.label { PLAUSIBLE } else { 1 - PLAUSIBLE };
    let m = f.logits[0].max(f.logits[1]);
    let log_z = m + ((f.logits[0] - m).exp() + (f.logits[1] - m).exp()).ln();
    let loss = log_z - f.logits[target];

    let mut g = Gradients::zeros(params);
    let mut dl = f.probs;
    dl[target] -= 1.0;
    g.head_w.add_outer(&dl, &f.x);
    g.head_b = dl;
    if let (Some(sage), Some(gw)) = (&params.sage, &mut g.sage_w) {
        let dx = params.head.w.t_matvec(&dl);
        let out = sage.w.rows;
        for (state, dh) in [(&f.u, &dx[..out]), (&f.v, &dx[out..])] {
            let dz: Vec<f64> = dh.iter().zip(&state.z).map(|(d, z)| d * sage.activation.derivative(*z)).collect();
            gw.add_outer(&dz, &state.input);
        }
    }
    (loss, g)
}

/// Mean two-class cross-entropy and its exact gradient. Per-example work
/// may run in parallel; the reduction is always serial and in batch order.
pub fn loss_and_gradients(
    params: &ScorerParams,
    features: &Features,
    batch: &[Example],
    round: u64,
    parallel: bool,
) -> Result<(f64, Gradients), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let parts: Vec<(f64, Gradients)> = if parallel {
        batch.par_iter().map(|ex| example_gradients(params, features, ex, round)).collect()
    } else {
        batch.iter().map(|ex| example_gradients(params, features, ex, round)).collect()
    };
    let mut total = Gradients::zeros(params);
    let mut loss = 0.0;
    for (i, (l, g)) in parts.iter().enumerate() {
        if !l.is_finite() {
            return Err(ModelError::NonFiniteLoss { index: i });
        }
        loss += l;
        total.add(g);
    }
    let k = 1.0 / batch.len() as f64;
    total.scale(k);
    Ok((loss * k, total))
}

/// Adaptive-moment optimizer over the flattened trainable parameters.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(params: &ScorerParams, lr: f64) -> Self {
        let n = params.param_count();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut ScorerParams, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let slots = params
            .sage
            .iter_mut()
            .flat_map(|s| s.w.data.iter_mut())
            .chain(params.head.w.data.iter_mut())
            .chain(params.head.b.iter_mut());
        for (i, (p, g)) in slots.zip(grads.flat()).enumerate() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Writes `VERSION`, `params.json`, `encoder_id` and `config.digest`.
pub fn save_model(dir: &Path, params: &ScorerParams, config_digest: &str) -> Result<(), ModelError> {
    let io = |e: std::io::Error| ModelError::Io { path: dir.display().to_string(), message: e.to_string() };
    fs::create_dir_all(dir).map_err(io)?;
    let json = serde_json::to_string(params).map_err(|e| ModelError::Io { path: dir.display().to_string(), message: e.to_string() })?;
    fs::write(dir.join("params.json"), json).map_err(io)?;
    fs::write(dir.join("encoder_id"), format!("{}\n", params.encoder.encoder_id)).map_err(io)?;
    fs::write(dir.join("config.digest"), format!("{config_digest}\n")).map_err(io)?;
    fs::write(dir.join("VERSION"), format!("{MODEL_VERSION}\n")).map_err(io)
}

/// Reads a model directory and checks its version and shapes.
pub fn load_model(dir: &Path) -> Result<(ScorerParams, String), ModelError> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|e| ModelError::Io { path: path.display().to_string(), message: e.to_string() })
    };
    let version = read("VERSION")?;
    if version.trim() != MODEL_VERSION {
        return Err(ModelError::Version { found: version.trim().to_string() });
    }
    let params: ScorerParams = serde_json::from_str(&read("params.json")?)
        .map_err(|e| ModelError::Io { path: dir.join("params.json").display().to_string(), message: e.to_string() })?;
    params.validate()?;
    Ok((params, read("config.digest")?.trim().to_string()))
}
