//! `disambig`: simulate datasets, ground instructions against recorded
//! episodes and score the pipeline.
//!
//! Exit codes: 0 success, 1 pipeline or simulation failure, 2 bad input
//! (usage, configuration, unparsable instruction), 3 I/O.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use disambig_core::config::{ConfigError, PipelineConfig};
use disambig_core::dataset::{read_dataset, simulate_to, DatasetError, EpisodeData};
use disambig_core::discriminator::OutcomeRecord;
use disambig_core::eval::evaluate;
use disambig_core::phrase::PhraseError;
use disambig_core::pipeline::{Pipeline, PipelineError};
use disambig_core::simulator::NoiseColumn;

#[derive(Parser)]
#[command(name = "disambig", version, about = "Referred-object grounding and disambiguation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset of episodes.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Ground one instruction against a recorded episode and print the query.
    Ground {
        #[command(flatten)]
        common: Common,
        episode: PathBuf,
        text: String,
        #[arg(long, default_value = "none")]
        noise: String,
        /// Write the outcome record here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the aggregation state accumulated over an episode.
    Aggregate {
        #[command(flatten)]
        common: Common,
        episode: PathBuf,
        #[arg(long, default_value = "none")]
        noise: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the pipeline over a dataset and print the report table.
    Eval {
        #[command(flatten)]
        common: Common,
        dataset: PathBuf,
        /// One of none, cs, cs+sd, cs+sd+fn, fp, all.
        #[arg(long, default_value = "all")]
        noise: String,
        /// Directory for report.json and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a phrase into an object graph.
    Parse {
        #[command(flatten)]
        common: Common,
        text: String,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Input(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        if e.line.is_none() && e.key.is_none() {
            // Only an unreadable file produces an error without key or line.
            CliError::Io(format!("config: {e}"))
        } else {
            CliError::Input(format!("config: {e}"))
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => CliError::Io(e.to_string()),
            DatasetError::Format { .. } | DatasetError::Depth { .. } | DatasetError::MissingLabels(_) => {
                CliError::Input(e.to_string())
            }
            DatasetError::Simulation { .. } => CliError::Failed(e.to_string()),
        }
    }
}

impl From<PhraseError> for CliError {
    fn from(e: PhraseError) -> Self {
        match e {
            PhraseError::Io(_) => CliError::Io(e.to_string()),
            PhraseError::Protocol(_) | PhraseError::Timeout => CliError::Failed(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Phrase(p) => p.into(),
            PipelineError::LexiconIo { .. } => CliError::Io(e.to_string()),
            PipelineError::Lexicon { .. } => CliError::Input(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

fn load_config(common: &Common) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn columns(noise: &str) -> Result<Vec<NoiseColumn>, CliError> {
    if noise == "all" {
        return Ok(NoiseColumn::ALL.to_vec());
    }
    Ok(vec![noise.parse().map_err(CliError::Input)?])
}

fn single_column(noise: &str) -> Result<NoiseColumn, CliError> {
    noise.parse().map_err(CliError::Input)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn observe(
    pipeline: &Pipeline,
    episode: &Path,
    noise: &str,
) -> Result<(EpisodeData, disambig_core::aggregation::Session), CliError> {
    let column = single_column(noise)?;
    let data = EpisodeData::read(episode)?;
    let errors = pipeline.config().errors.with_column(column);
    let (session, _) = pipeline.observe(&data, &errors)?;
    Ok((data, session))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common, out } => {
            let cfg = load_config(&common)?;
            let specs = simulate_to(&out, &cfg)?;
            println!("wrote {} episodes to {}", specs.len(), out.display());
        }
        Command::Ground {
            common,
            episode,
            text,
            noise,
            out,
        } => {
            let cfg = load_config(&common)?;
            let seed = cfg.seed;
            let pipeline = Pipeline::new(cfg)?;
            // Parse first: a bad instruction should fail before any frame work.
            let graph = pipeline.parse(&text)?;
            let (_, session) = observe(&pipeline, &episode, &noise)?;
            let outcome = pipeline.ground_graph(&session, &graph, seed)?;
            let record = serde_json::to_string_pretty(&OutcomeRecord::from(&outcome)).expect("serializable") + "\n";
            if let Some(path) = &out {
                write(path, &record)?;
            }
            println!("{}", outcome.query);
            if out.is_none() {
                print!("{record}");
            }
        }
        Command::Aggregate {
            common,
            episode,
            noise,
            out,
        } => {
            let pipeline = Pipeline::new(load_config(&common)?)?;
            let (_, session) = observe(&pipeline, &episode, &noise)?;
            let dump = session.to_dump();
            match out {
                Some(path) => write(&path, &dump)?,
                None => print!("{dump}"),
            }
        }
        Command::Eval {
            common,
            dataset,
            noise,
            out,
        } => {
            let cols = columns(&noise)?;
            let pipeline = Pipeline::new(load_config(&common)?)?;
            let episodes = read_dataset(&dataset)?;
            let report = evaluate(&pipeline, &episodes, &cols)?;
            let table = report.to_table();
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                write(&dir.join("report.json"), &report.to_json())?;
                write(&dir.join("report.txt"), &table)?;
            }
            print!("{table}");
        }
        Command::Parse { common, text } => {
            let pipeline = Pipeline::new(load_config(&common)?)?;
            println!("{}", pipeline.parse(&text)?.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
