use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use ckgp::config::{Overrides, PipelineConfig};
use ckgp::pipeline::{Command, Pipeline, PipelineError, Status};
use ckgp::relation::CommonsenseRelation;

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Align,
    Extract,
    Sample,
    Train,
    Eval,
    Populate,
}

impl From<Stage> for Command {
    fn from(s: Stage) -> Self {
        match s {
            Stage::Align => Command::Align,
            Stage::Extract => Command::Extract,
            Stage::Sample => Command::Sample,
            Stage::Train => Command::Train,
            Stage::Eval => Command::Eval,
            Stage::Populate => Command::Populate,
        }
    }
}

/// Commonsense knowledge graph population from a discourse graph.
///
/// Environment: CKGP_WORKDIR overrides `paths.workdir`; CKGP_STRICT=1 forces
/// serial, bitwise-deterministic computation.
#[derive(Parser)]
#[command(name = "ckgp", version)]
struct Cli {
    /// Stage to run.
    #[arg(value_enum)]
    stage: Stage,
    /// Flat key = value config file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Limit per-relation stages to one relation (e.g. xWant).
    #[arg(long, value_name = "NAME")]
    relation: Option<CommonsenseRelation>,
    /// Override every stage seed.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Serial computation throughout.
    #[arg(long)]
    strict: bool,
}

fn env_strict() -> bool {
    std::env::var("CKGP_STRICT").is_ok_and(|v| !v.is_empty() && v != "0" && !v.eq_ignore_ascii_case("false"))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let overrides = Overrides {
        seed: cli.seed,
        strict: cli.strict || env_strict(),
        workdir: std::env::var_os("CKGP_WORKDIR").map(PathBuf::from),
    };
    let config = PipelineConfig::load(&cli.config, &overrides)?;
    let pipeline = Pipeline::new(config);
    for outcome in pipeline.run(cli.stage.into(), cli.relation)? {
        let status = match outcome.status {
            Status::Ran => "done",
            Status::UpToDate => "up-to-date",
        };
        println!("{}\t{status}", outcome.dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
