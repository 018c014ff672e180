//! Negative sampling: random pairs, other-relation positives, inversions and
//! head/tail shuffles, composed into seeded mixtures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::RelationGraph;
use crate::relation::{CommonsenseRelation, Split, UnknownName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "O")]
    Others,
    #[serde(rename = "I")]
    Inversion,
    #[serde(rename = "S")]
    Shuffle,
    #[serde(rename = "RAND")]
    Rand,
}

impl Strategy {
    /// Composition order; RAND last since it takes the remainder.
    pub const ALL: [Strategy; 4] = [Strategy::Others, Strategy::Inversion, Strategy::Shuffle, Strategy::Rand];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Others => "O",
            Strategy::Inversion => "I",
            Strategy::Shuffle => "S",
            Strategy::Rand => "RAND",
        }
    }

    fn stream(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .iter()
            .copied()
            .find(|x| x.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownName::new("sampling strategy", s, &Strategy::ALL))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("{strategy}: {message}")]
    Empty { strategy: Strategy, message: String },
    #[error("{strategy}: attempt cap {attempts} hit after {achieved} of {wanted} negatives")]
    Saturated { strategy: Strategy, wanted: usize, achieved: usize, attempts: u64 },
    #[error("invalid mixture: {0}")]
    Mixture(String),
}

/// Fractions for O, I and S; RAND receives the remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub mixture: BTreeMap<Strategy, f64>,
    /// Keep RAND away from candidate edges as well as seed positives.
    pub exclude_candidates: bool,
    /// S draws heads from every relation rather than only the target.
    pub shuffle_heads_all_relations: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            mixture: parse_mixture("O20+I10").expect("valid default"),
            exclude_candidates: true,
            shuffle_heads_all_relations: true,
        }
    }
}

/// Parses shorthand like `O20+I10+S10` (percentages) or `RAND`/`` for the
/// all-random mixture.
pub fn parse_mixture(text: &str) -> Result<BTreeMap<Strategy, f64>, SampleError> {
    let mut out = BTreeMap::new();
    for part in text.split('+').map(str::trim).filter(|p| !p.is_empty()) {
        if part.eq_ignore_ascii_case("rand") {
            continue;
        }
        let split = part.find(|c: char| c.is_ascii_digit()).ok_or_else(|| SampleError::Mixture(format!("`{part}` has no percentage")))?;
        let (name, pct) = part.split_at(split);
        let strategy: Strategy = name.parse().map_err(|e: UnknownName| SampleError::Mixture(e.to_string()))?;
        let pct: u32 = pct.parse().map_err(|_| SampleError::Mixture(format!("bad percentage in `{part}`")))?;
        if strategy == Strategy::Rand {
            return Err(SampleError::Mixture("RAND takes the remainder and has no percentage".into()));
        }
        out.insert(strategy, pct as f64 / 100.0);
    }
    validate_mixture(&out)?;
    Ok(out)
}

pub fn validate_mixture(mixture: &BTreeMap<Strategy, f64>) -> Result<(), SampleError> {
    let mut total = 0.0;
    for (s, f) in mixture {
        if *s == Strategy::Rand {
            return Err(SampleError::Mixture("RAND takes the remainder and has no fraction".into()));
        }
        if !(0.0..=1.0).contains(f) {
            return Err(SampleError::Mixture(format!("{s} fraction {f} outside [0,1]")));
        }
        total += f;
    }
    if total > 1.0 + 1e-9 {
        return Err(SampleError::Mixture(format!("fractions sum to {total} > 1")));
    }
    Ok(())
}

const PPM: u64 = 1_000_000;

/// Per-strategy counts summing to `n`, by largest remainder over
/// parts-per-million quotas. Ties go to the earlier strategy in
/// [`Strategy::ALL`].
pub fn mixture_counts(mixture: &BTreeMap<Strategy, f64>, n: usize) -> BTreeMap<Strategy, usize> {
    let mut ppm: Vec<(Strategy, u64)> = Strategy::ALL[..3]
        .iter()
        .map(|s| (*s, (mixture.get(s).copied().unwrap_or(0.0) * PPM as f64).round() as u64))
        .collect();
    let used: u64 = ppm.iter().map(|(_, p)| p).sum();
    ppm.push((Strategy::Rand, PPM.saturating_sub(used)));
    let n64 = n as u64;
    let mut counts: Vec<(Strategy, u64, u64)> = ppm.iter().map(|&(s, p)| (s, p * n64 / PPM, p * n64 % PPM)).collect();
    let assigned: u64 = counts.iter().map(|c| c.1).sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].2.cmp(&counts[a].2).then(a.cmp(&b)));
    for &i in order.iter().take((n64 - assigned) as usize) {
        counts[i].1 += 1;
    }
    counts.into_iter().map(|(s, c, _)| (s, c as usize)).collect()
}

pub type Pair = (String, String);

fn index(rng: &mut ChaCha8Rng, len: usize) -> usize {
    rng.gen_range(0..len as u64) as usize
}

/// Uniform node pairs outside the seed positives (and candidates, if asked).
pub fn sample_rand(rg: &RelationGraph, n: usize, exclude_candidates: bool, rng: &mut ChaCha8Rng) -> Result<Vec<Pair>, SampleError> {
    let strategy = Strategy::Rand;
    if n == 0 {
        return Ok(Vec::new());
    }
    if rg.nodes.len() < 2 {
        return Err(SampleError::Empty { strategy, message: "relation graph has fewer than two nodes".into() });
    }
    let cap = 100 * n as u64;
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        if attempts == cap {
            return Err(SampleError::Saturated { strategy, wanted: n, achieved: out.len(), attempts });
        }
        attempts += 1;
        let u = &rg.nodes[index(rng, rg.nodes.len())];
        let v = &rg.nodes[index(rng, rg.nodes.len())];
        if u == v || rg.is_seed(u, v) || (exclude_candidates && rg.is_candidate(u, v)) {
            continue;
        }
        out.push((u.clone(), v.clone()));
    }
    Ok(out)
}

/// The seed positives of other relations that are not positives of the
/// target, deduplicated and sorted.
pub fn others_pool(all: &BTreeMap<CommonsenseRelation, RelationGraph>, target: &RelationGraph) -> Vec<Pair> {
    let pool: BTreeSet<Pair> = all
        .iter()
        .filter(|(r, _)| **r != target.relation)
        .flat_map(|(_, g)| g.seed_edges.iter())
        .filter(|s| !target.is_seed(&s.u, &s.v))
        .map(|s| (s.u.clone(), s.v.clone()))
        .collect();
    pool.into_iter().collect()
}

pub fn sample_others(
    all: &BTreeMap<CommonsenseRelation, RelationGraph>,
    target: &RelationGraph,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Pair>, SampleError> {
    let pool = others_pool(all, target);
    draw_from(Strategy::Others, &pool, n, rng, "no other-relation positives outside the target's")
}

/// Reversed seed positives whose reverse is not itself positive.
pub fn valid_inversions(rg: &RelationGraph) -> Vec<Pair> {
    rg.seed_edges
        .iter()
        .filter(|s| !rg.is_seed(&s.v, &s.u))
        .map(|s| (s.v.clone(), s.u.clone()))
        .collect()
}

pub fn sample_inversion(rg: &RelationGraph, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Pair>, SampleError> {
    draw_from(Strategy::Inversion, &valid_inversions(rg), n, rng, "every positive is symmetric")
}

fn draw_from(strategy: Strategy, pool: &[Pair], n: usize, rng: &mut ChaCha8Rng, empty: &str) -> Result<Vec<Pair>, SampleError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if pool.is_empty() {
        return Err(SampleError::Empty { strategy, message: empty.into() });
    }
    Ok((0..n).map(|_| pool[index(rng, pool.len())].clone()).collect())
}

/// `u` uniform over `heads`, `v` uniform over `tails`, rejected when the
/// pair is positive.
pub fn sample_shuffle(
    heads: &[String],
    tails: &[String],
    positives: &BTreeSet<Pair>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Pair>, SampleError> {
    let strategy = Strategy::Shuffle;
    if n == 0 {
        return Ok(Vec::new());
    }
    if heads.is_empty() || tails.is_empty() {
        return Err(SampleError::Empty { strategy, message: "no heads or no tails to shuffle".into() });
    }
    let tail_set: BTreeSet<&String> = tails.iter().collect();
    let head_set: BTreeSet<&String> = heads.iter().collect();
    let covered = positives.iter().filter(|(u, v)| head_set.contains(u) && tail_set.contains(v)).count();
    if covered == head_set.len() * tail_set.len() {
        return Err(SampleError::Empty { strategy, message: "every head/tail combination is positive".into() });
    }
    let cap = 100 * n as u64;
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        if attempts == cap {
            return Err(SampleError::Saturated { strategy, wanted: n, achieved: out.len(), attempts });
        }
        attempts += 1;
        let pair = (heads[index(rng, heads.len())].clone(), tails[index(rng, tails.len())].clone());
        if !positives.contains(&pair) {
            out.push(pair);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Negative {
    pub u: String,
    pub v: String,
    pub strategy: Strategy,
}

/// RNG for one strategy of one draw: `salt` separates e.g. train from test
/// sets drawn with the same base seed.
pub fn strategy_rng(seed: u64, salt: u64, strategy: Strategy) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(salt * 8 + strategy.stream());
    rng
}

/// Draws exactly `n` negatives for `target` following the mixture.
pub fn compose(
    config: &SamplerConfig,
    target: CommonsenseRelation,
    all: &BTreeMap<CommonsenseRelation, RelationGraph>,
    n: usize,
    salt: u64,
) -> Result<Vec<Negative>, SampleError> {
    validate_mixture(&config.mixture)?;
    let rg = all
        .get(&target)
        .ok_or_else(|| SampleError::Empty { strategy: Strategy::Rand, message: format!("no relation graph for {target}") })?;
    let counts = mixture_counts(&config.mixture, n);
    let mut out = Vec::with_capacity(n);
    for strategy in Strategy::ALL {
        let k = counts[&strategy];
        if k == 0 {
            continue;
        }
        let mut rng = strategy_rng(config.seed, salt, strategy);
        let pairs = match strategy {
            Strategy::Rand => sample_rand(rg, k, config.exclude_candidates, &mut rng)?,
            Strategy::Others => sample_others(all, rg, k, &mut rng)?,
            Strategy::Inversion => sample_inversion(rg, k, &mut rng)?,
            Strategy::Shuffle => {
                let (heads, tails, positives) = shuffle_inputs(all, rg, config.shuffle_heads_all_relations);
                sample_shuffle(&heads, &tails, &positives, k, &mut rng)?
            }
        };
        out.extend(pairs.into_iter().map(|(u, v)| Negative { u, v, strategy }));
    }
    Ok(out)
}

fn shuffle_inputs(
    all: &BTreeMap<CommonsenseRelation, RelationGraph>,
    rg: &RelationGraph,
    all_heads: bool,
) -> (Vec<String>, Vec<String>, BTreeSet<Pair>) {
    let sources: Vec<&RelationGraph> = if all_heads { all.values().collect() } else { vec![rg] };
    let heads: BTreeSet<String> = sources.iter().flat_map(|g| g.seed_edges.iter().map(|s| s.u.clone())).collect();
    let tails: BTreeSet<String> = rg.seed_edges.iter().map(|s| s.v.clone()).collect();
    let positives = rg.seed_edges.iter().map(|s| (s.u.clone(), s.v.clone())).collect();
    (heads.into_iter().collect(), tails.into_iter().collect(), positives)
}

/// `u\tv\tstrategy\tsplit`.
pub fn negatives_to_tsv(sets: &[(Split, &[Negative])]) -> String {
    let mut out = String::from("u\tv\tstrategy\tsplit\n");
    for (split, negs) in sets {
        for n in negs.iter() {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", n.u, n.v, n.strategy, split));
        }
    }
    out
}

pub fn negatives_from_tsv(text: &str) -> Result<BTreeMap<Split, Vec<Negative>>, String> {
    let mut out: BTreeMap<Split, Vec<Negative>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(format!("negatives line {}: expected 4 fields", i + 1));
        }
        let strategy = f[2].parse().map_err(|e| format!("negatives line {}: {e}", i + 1))?;
        let split = f[3].parse().map_err(|e| format!("negatives line {}: {e}", i + 1))?;
        out.entry(split).or_default().push(Negative { u: f[0].into(), v: f[1].into(), strategy });
    }
    Ok(out)
}
