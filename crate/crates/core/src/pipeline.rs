//! Stage commands over a work directory. Every stage directory carries a
//! `manifest.json` of input, config and output digests; a stage whose
//! manifest still matches is reported up to date and not rerun.
//!
//! Layout under the work directory:
//!
//! ```text
//! align/                graph.snap kb.snap alignment.tsv coverage.tsv coverage_summary.txt load_report.txt
//! extract/<relation>/   relation_graph.snap relation_graph.tsv extract_report.json
//! sample/<relation>/    negatives.tsv
//! train/<relation>/     model/ train_log.txt
//! eval/<relation>/      metrics.json ranked.tsv       (eval/report.tsv, eval/report.jsonl across relations)
//! populate/<relation>/  populated.jsonl populate_stats.json
//! ```

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{coverage_stats, match_into_graph, AlignmentTable, Mapper, MappingRuleSet};
use crate::config::{ConfigError, PipelineConfig};
use crate::extract::{build_relation_graph, RelationGraph};
use crate::graph::{load_discourse_graph, DiscourseGraph, GraphFormat, LoadOptions};
use crate::kb::{load_seed_kb, SeedKb};
use crate::metrics::{assemble_report, RelationMetrics};
use crate::model::{load_model, save_model};
use crate::normalize::Normalizer;
use crate::relation::{CommonsenseRelation, Split};
use crate::sampler::{compose, negatives_from_tsv, negatives_to_tsv, Negative};
use crate::snapshot::{self, sha256_hex};
use crate::train::{evaluate_link_prediction, rank_tails, split_data, train, NoveltyIndex, Scorer, TrainError};

pub const TOOL_VERSION: &str = concat!("ckgp ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{what} is missing; run cmd_{command} first")]
    Upstream { what: String, command: &'static str },
}

impl PipelineError {
    /// 1 usage, 2 data, 3 missing upstream artifact.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Usage(_) => 1,
            PipelineError::Data(_) => 2,
            PipelineError::Upstream { .. } => 3,
        }
    }
}

fn data(e: impl Display) -> PipelineError {
    PipelineError::Data(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Align,
    Extract,
    Sample,
    Train,
    Eval,
    Populate,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Align => "align",
            Command::Extract => "extract",
            Command::Sample => "sample",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Populate => "populate",
        }
    }

    /// Config keys whose values feed this stage's digest.
    fn config_sections(self) -> &'static [&'static str] {
        match self {
            Command::Align => &["paths.kb_format", "graph.", "mapping."],
            Command::Extract => &["mapping.", "rules.", "subgraph."],
            Command::Sample => &["sampler.", "seeds.sample"],
            Command::Train => &["encoder.", "model.", "train.", "seeds.train"],
            Command::Eval => &["eval.", "train.strict"],
            Command::Populate => &["populate.", "train.strict"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub relation: Option<String>,
    pub tool_version: String,
    pub config_digest: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ran,
    UpToDate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub status: Status,
    pub dir: PathBuf,
    pub manifest: Manifest,
}

pub fn file_digest(path: &Path) -> Result<String, PipelineError> {
    fs::read(path).map(|b| sha256_hex(&b)).map_err(|e| data(format!("{}: {e}", path.display())))
}

pub fn read_manifest(dir: &Path) -> Option<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST)).ok()?;
    serde_json::from_str(&text).ok()
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).and_then(|_| fs::rename(&tmp, path)).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn outputs_match(dir: &Path, outputs: &BTreeMap<String, String>) -> bool {
    outputs.iter().all(|(name, digest)| file_digest(&dir.join(name)).is_ok_and(|d| &d == digest))
}

/// Skips `body` when the stored manifest matches the current inputs and
/// config and every recorded output is intact; otherwise runs it and
/// records the files it reports writing.
fn run_stage(
    dir: &Path,
    command: Command,
    relation: Option<CommonsenseRelation>,
    config: &PipelineConfig,
    inputs: &[(&str, PathBuf)],
    body: impl FnOnce(&Path) -> Result<Vec<String>, PipelineError>,
) -> Result<StageOutcome, PipelineError> {
    let mut digest_text = config.section_text(command.config_sections());
    if let Some(r) = relation {
        digest_text.push_str(&format!("relation={r}\n"));
    }
    let mut expected = Manifest {
        command: command.as_str().into(),
        relation: relation.map(|r| r.to_string()),
        tool_version: TOOL_VERSION.into(),
        config_digest: sha256_hex(digest_text.as_bytes()),
        inputs: inputs.iter().map(|(n, p)| Ok((n.to_string(), file_digest(p)?))).collect::<Result<_, PipelineError>>()?,
        outputs: BTreeMap::new(),
    };
    if let Some(old) = read_manifest(dir) {
        let same = Manifest { outputs: old.outputs.clone(), ..expected.clone() };
        if old == same && outputs_match(dir, &old.outputs) {
            log::info!("{} {}: up-to-date", command.as_str(), relation.map_or(String::new(), |r| r.to_string()));
            return Ok(StageOutcome { status: Status::UpToDate, dir: dir.to_path_buf(), manifest: old });
        }
    }
    fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    let _ = fs::remove_file(dir.join(MANIFEST));
    let written = body(dir)?;
    for name in written {
        let d = file_digest(&dir.join(&name))?;
        expected.outputs.insert(name, d);
    }
    let json = serde_json::to_string_pretty(&expected).map_err(data)?;
    write_text(&dir.join(MANIFEST), &(json + "\n"))?;
    Ok(StageOutcome { status: Status::Ran, dir: dir.to_path_buf(), manifest: expected })
}

pub struct Pipeline {
    pub config: PipelineConfig,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Pipeline { config }
    }

    fn stage_dir(&self, command: Command, relation: Option<CommonsenseRelation>) -> PathBuf {
        let d = self.config.workdir.join(command.as_str());
        match relation {
            Some(r) => d.join(r.as_str()),
            None => d,
        }
    }

    fn require(&self, command: Command, relation: Option<CommonsenseRelation>, file: &str) -> Result<PathBuf, PipelineError> {
        let dir = self.stage_dir(command, relation);
        let path = dir.join(file);
        if read_manifest(&dir).is_none() || !path.exists() {
            let what = match relation {
                Some(r) => format!("{} output for {r}", command.as_str()),
                None => format!("{} output", command.as_str()),
            };
            return Err(PipelineError::Upstream { what, command: command.as_str() });
        }
        Ok(path)
    }

    pub fn mapper(&self) -> Mapper {
        Mapper::new(Normalizer::default(), MappingRuleSet { subject_pool: self.config.subject_pool.clone(), ..MappingRuleSet::default() })
    }

    /// Runs `command` for one relation or, when `relation` is `None`, for
    /// every configured relation in turn.
    pub fn run(&self, command: Command, relation: Option<CommonsenseRelation>) -> Result<Vec<StageOutcome>, PipelineError> {
        if command == Command::Align {
            return Ok(vec![self.cmd_align()?]);
        }
        let rels = match relation {
            Some(r) if !self.config.relations.contains(&r) => {
                return Err(PipelineError::Usage(format!("relation {r} is not listed in the config")))
            }
            Some(r) => vec![r],
            None => self.config.relations.clone(),
        };
        rels.into_iter()
            .map(|r| match command {
                Command::Extract => self.cmd_extract(r),
                Command::Sample => self.cmd_sample(r),
                Command::Train => self.cmd_train(r),
                Command::Eval => self.cmd_eval(r),
                Command::Populate => self.cmd_populate(r),
                Command::Align => unreachable!("handled above"),
            })
            .collect()
    }

    pub fn cmd_align(&self) -> Result<StageOutcome, PipelineError> {
        let c = &self.config;
        let inputs = [("graph", c.graph_path.clone()), ("kb", c.kb_path.clone())];
        run_stage(&self.stage_dir(Command::Align, None), Command::Align, None, c, &inputs, |dir| {
            let mapper = self.mapper();
            mapper.rules.validate().map_err(data)?;
            let (graph, load) =
                load_discourse_graph(&c.graph_path, GraphFormat::Tsv, &mapper.normalizer, LoadOptions { strict: c.strict_relations }).map_err(data)?;
            let kb = load_seed_kb(&c.kb_path, c.kb_format).map_err(data)?;
            let table = match_into_graph(&kb, &graph, &mapper);
            let coverage = coverage_stats(&kb, &table).map_err(data)?;
            snapshot::store(&graph, &dir.join("graph.snap")).map_err(data)?;
            snapshot::store(&kb, &dir.join("kb.snap")).map_err(data)?;
            write_text(&dir.join("alignment.tsv"), &table.to_tsv())?;
            write_text(&dir.join("coverage.tsv"), &coverage.to_tsv())?;
            write_text(&dir.join("coverage_summary.txt"), &coverage.to_summary())?;
            let mut report = format!("lines\t{}\naccepted\t{}\nrejected\t{}\n", load.lines, load.accepted, load.rejected.len());
            for (line, reason) in &load.rejected {
                report.push_str(&format!("# line {line}: {reason}\n"));
            }
            write_text(&dir.join("load_report.txt"), &report)?;
            log::info!("aligned {} tuples onto {} nodes / {} edges", kb.len(), graph.node_count(), graph.edge_count());
            Ok(["graph.snap", "kb.snap", "alignment.tsv", "coverage.tsv", "coverage_summary.txt", "load_report.txt"]
                .map(String::from)
                .to_vec())
        })
    }

    pub fn cmd_extract(&self, relation: CommonsenseRelation) -> Result<StageOutcome, PipelineError> {
        let graph_path = self.require(Command::Align, None, "graph.snap")?;
        let kb_path = self.require(Command::Align, None, "kb.snap")?;
        let table_path = self.require(Command::Align, None, "alignment.tsv")?;
        let inputs = [("graph", graph_path.clone()), ("kb", kb_path.clone()), ("alignment", table_path.clone())];
        let c = &self.config;
        run_stage(&self.stage_dir(Command::Extract, Some(relation)), Command::Extract, Some(relation), c, &inputs, |dir| {
            let graph: DiscourseGraph = snapshot::load(&graph_path).map_err(data)?;
            let kb: SeedKb = snapshot::load(&kb_path).map_err(data)?;
            let table = AlignmentTable::from_tsv(&fs::read_to_string(&table_path).map_err(data)?).map_err(data)?;
            let (rg, report) = build_relation_graph(&graph, &kb, &table, relation, &c.rules, &self.mapper(), c.subgraph).map_err(data)?;
            snapshot::store(&rg, &dir.join("relation_graph.snap")).map_err(data)?;
            write_text(&dir.join("relation_graph.tsv"), &rg.to_tsv())?;
            write_text(&dir.join("extract_report.json"), &(serde_json::to_string_pretty(&report).map_err(data)? + "\n"))?;
            log::info!("{relation}: {} nodes, {} candidate edges, {} seeds", rg.nodes.len(), rg.candidate_edges.len(), rg.seed_edges.len());
            Ok(["relation_graph.snap", "relation_graph.tsv", "extract_report.json"].map(String::from).to_vec())
        })
    }

    fn load_rg(&self, relation: CommonsenseRelation) -> Result<(PathBuf, RelationGraph), PipelineError> {
        let path = self.require(Command::Extract, Some(relation), "relation_graph.snap")?;
        let rg = snapshot::load(&path).map_err(data)?;
        Ok((path, rg))
    }

    fn load_negatives(&self, relation: CommonsenseRelation) -> Result<(PathBuf, BTreeMap<Split, Vec<Negative>>), PipelineError> {
        let path = self.require(Command::Sample, Some(relation), "negatives.tsv")?;
        let negs = negatives_from_tsv(&fs::read_to_string(&path).map_err(data)?).map_err(data)?;
        Ok((path, negs))
    }

    /// Negatives for each split, one per positive. O and S draw on every
    /// configured relation's graph, so all of them must be extracted.
    pub fn cmd_sample(&self, relation: CommonsenseRelation) -> Result<StageOutcome, PipelineError> {
        let mut all = BTreeMap::new();
        let mut inputs = Vec::new();
        for &r in &self.config.relations {
            let (path, rg) = self.load_rg(r)?;
            inputs.push((r.as_str(), path));
            all.insert(r, rg);
        }
        let c = &self.config;
        run_stage(&self.stage_dir(Command::Sample, Some(relation)), Command::Sample, Some(relation), c, &inputs, |dir| {
            let rg = &all[&relation];
            let mut sets = Vec::new();
            for (salt, split) in [Split::Train, Split::Dev, Split::Test].into_iter().enumerate() {
                let n = rg.seeds_in(split).count();
                let cfg = if split == Split::Test { &c.eval_sampler } else { &c.sampler };
                let negs = compose(cfg, relation, &all, n, salt as u64).map_err(|e| data(format!("{relation} {split}: {e}")))?;
                sets.push((split, negs));
            }
            let view: Vec<(Split, &[Negative])> = sets.iter().map(|(s, n)| (*s, n.as_slice())).collect();
            write_text(&dir.join("negatives.tsv"), &negatives_to_tsv(&view))?;
            Ok(vec!["negatives.tsv".into()])
        })
    }

    pub fn cmd_train(&self, relation: CommonsenseRelation) -> Result<StageOutcome, PipelineError> {
        let (rg_path, rg) = self.load_rg(relation)?;
        let (neg_path, negs) = self.load_negatives(relation)?;
        let inputs = [("relation_graph", rg_path), ("negatives", neg_path)];
        let c = &self.config;
        run_stage(&self.stage_dir(Command::Train, Some(relation)), Command::Train, Some(relation), c, &inputs, |dir| {
            let split = split_data(&rg, &negs).map_err(data)?;
            let outcome = train(&rg, &split, &c.train).map_err(data)?;
            let digest = sha256_hex(c.section_text(Command::Train.config_sections()).as_bytes());
            save_model(&dir.join("model"), &outcome.params, &digest).map_err(data)?;
            write_text(&dir.join("train_log.txt"), &outcome.log_lines())?;
            Ok(["model/VERSION", "model/params.json", "model/encoder_id", "model/config.digest", "train_log.txt"].map(String::from).to_vec())
        })
    }

    fn scorer(&self, relation: CommonsenseRelation, rg: &RelationGraph) -> Result<(PathBuf, Scorer), PipelineError> {
        let path = self.require(Command::Train, Some(relation), "model/params.json")?;
        let (params, _) = load_model(&self.stage_dir(Command::Train, Some(relation)).join("model")).map_err(data)?;
        let scorer = Scorer::new(params, rg, !self.config.train.strict).map_err(data)?;
        Ok((path, scorer))
    }

    /// Test-set accuracy plus novelty and diversity of the top tails ranked
    /// for each test head. Rewrites the cross-relation report afterwards.
    pub fn cmd_eval(&self, relation: CommonsenseRelation) -> Result<StageOutcome, PipelineError> {
        let (rg_path, rg) = self.load_rg(relation)?;
        let (neg_path, negs) = self.load_negatives(relation)?;
        let (model_path, mut scorer) = self.scorer(relation, &rg)?;
        let kb_path = self.require(Command::Align, None, "kb.snap")?;
        let inputs = [("relation_graph", rg_path), ("negatives", neg_path), ("model", model_path), ("kb", kb_path.clone())];
        let c = &self.config;
        let outcome = run_stage(&self.stage_dir(Command::Eval, Some(relation)), Command::Eval, Some(relation), c, &inputs, |dir| {
            let split = split_data(&rg, &negs).map_err(data)?;
            let accuracy = if split.test_positives.is_empty() {
                None
            } else {
                Some(evaluate_link_prediction(&mut scorer, &split.test_positives, &split.test_negatives).map_err(data)?)
            };
            let mut generated = BTreeMap::new();
            let mut ranked_tsv = String::from("head\trank\ttail\tscore\n");
            let heads: std::collections::BTreeSet<&str> = split.test_positives.iter().map(|p| p.u.as_str()).collect();
            for head in heads {
                match rank_tails(&mut scorer, &rg, head, c.top_k) {
                    Ok(ranked) => {
                        for (i, (t, s)) in ranked.iter().enumerate() {
                            ranked_tsv.push_str(&format!("{head}\t{}\t{t}\t{s:.6}\n", i + 1));
                        }
                        generated.insert(head.to_string(), ranked.into_iter().map(|(t, _)| t).collect::<Vec<_>>());
                    }
                    Err(TrainError::NoCandidates(_)) => {}
                    Err(e) => return Err(data(e)),
                }
            }
            let metrics = if generated.is_empty() {
                RelationMetrics { accuracy, ..Default::default() }
            } else {
                let kb: SeedKb = snapshot::load(&kb_path).map_err(data)?;
                let novelty = NoveltyIndex::from_kb(&kb, relation, &self.mapper());
                RelationMetrics::from_generated(accuracy, &generated, &novelty.tails).map_err(data)?
            };
            write_text(&dir.join("metrics.json"), &(serde_json::to_string_pretty(&metrics).map_err(data)? + "\n"))?;
            write_text(&dir.join("ranked.tsv"), &ranked_tsv)?;
            Ok(vec!["metrics.json".into(), "ranked.tsv".into()])
        })?;
        self.write_report()?;
        Ok(outcome)
    }

    /// Assembles `eval/report.tsv` and `eval/report.jsonl` from every
    /// configured relation evaluated so far.
    pub fn write_report(&self) -> Result<(), PipelineError> {
        let mut rels = BTreeMap::new();
        for &r in &self.config.relations {
            let path = self.stage_dir(Command::Eval, Some(r)).join("metrics.json");
            if let Ok(text) = fs::read_to_string(&path) {
                rels.insert(r, serde_json::from_str::<RelationMetrics>(&text).map_err(data)?);
            }
        }
        let report = assemble_report(rels).map_err(data)?;
        let dir = self.stage_dir(Command::Eval, None);
        write_text(&dir.join("report.tsv"), &report.to_tsv())?;
        write_text(&dir.join("report.jsonl"), &report.to_jsonl())
    }

    pub fn cmd_populate(&self, relation: CommonsenseRelation) -> Result<StageOutcome, PipelineError> {
        let (rg_path, rg) = self.load_rg(relation)?;
        let (model_path, mut scorer) = self.scorer(relation, &rg)?;
        let kb_path = self.require(Command::Align, None, "kb.snap")?;
        let inputs = [("relation_graph", rg_path), ("model", model_path), ("kb", kb_path.clone())];
        let c = &self.config;
        run_stage(&self.stage_dir(Command::Populate, Some(relation)), Command::Populate, Some(relation), c, &inputs, |dir| {
            let kb: SeedKb = snapshot::load(&kb_path).map_err(data)?;
            let novelty = NoveltyIndex::from_kb(&kb, relation, &self.mapper());
            let out_path = dir.join("populated.jsonl");
            let file = fs::File::create(&out_path).map_err(|e| data(format!("{}: {e}", out_path.display())))?;
            let mut w = BufWriter::new(file);
            let stats = crate::train::populate(&mut scorer, &rg, &novelty, c.threshold, |t| writeln!(w, "{}", t.to_json_line())).map_err(data)?;
            w.flush().map_err(data)?;
            write_text(&dir.join("populate_stats.json"), &(serde_json::to_string_pretty(&stats).map_err(data)? + "\n"))?;
            log::info!("{relation}: kept {} of {} candidate edges", stats.kept, stats.scored);
            Ok(vec!["populated.jsonl".into(), "populate_stats.json".into()])
        })
    }
}
