mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "tablesim", version, about = "Build and evaluate similar-table retrieval benchmarks")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a short description for every corpus table; resumes a partial run.
    Describe,
    /// Generate similar targets for every anchor in the corpus.
    Generate,
    /// Split anchors (and their pairs) into train, validation and test.
    Split {
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Count test pairs implied by train pairs through transitivity.
    Audit {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// All pairs, for `--repair`.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Re-split `--pairs` by connected component so nothing leaks.
        #[arg(long)]
        repair: bool,
    },
    /// Mine hard negatives for each anchor of a pairs file.
    Mine {
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Train the projection encoder on mined negatives.
    Train {
        #[arg(long)]
        negatives: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Retrieval metrics for the anchors of a pairs file.
    Eval {
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Encode with a trained checkpoint instead of the embedding provider.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Blend in title and description similarity.
        #[arg(long)]
        fused: bool,
    },
    /// Cosine score distribution of pairs against random table pairs.
    Simdist {
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        random_pairs: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Describe => "describe",
            Command::Generate => "generate",
            Command::Split { .. } => "split",
            Command::Audit { .. } => "audit",
            Command::Mine { .. } => "mine",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Simdist { .. } => "simdist",
        }
    }
}

fn run(cmd: &Command, cfg: &RunConfig) -> anyhow::Result<Value> {
    match cmd {
        Command::Describe => commands::describe(cfg),
        Command::Generate => commands::generate_pairs(cfg),
        Command::Split { pairs } => commands::split(cfg, pairs),
        Command::Audit { train, test, pairs, repair } => commands::audit(cfg, train, test, pairs, *repair),
        Command::Mine { pairs } => commands::mine(cfg, pairs),
        Command::Train { negatives, checkpoint } => commands::train_model(cfg, negatives, checkpoint),
        Command::Eval { pairs, checkpoint, fused } => commands::eval(cfg, pairs, checkpoint, *fused),
        Command::Simdist { pairs, random_pairs } => commands::simdist(cfg, pairs, *random_pairs),
    }
}

/// Coarse error class for the failure record.
fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if cause.is::<config::UsageError>() {
            return "usage";
        }
        if cause.is::<std::io::Error>() || cause.is::<tablesim::table::TableError>() || cause.is::<serde_json::Error>() {
            return "input";
        }
        if cause.is::<tablesim::llm::LlmError>() || cause.is::<tablesim::embedding::EmbedError>() {
            return "provider";
        }
        if cause.is::<tablesim::trainer::TrainError>() {
            return "training";
        }
    }
    "invalid"
}

fn fail(command: &str, kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "status": "error", "command": command, "kind": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let command = std::env::args().nth(1).filter(|a| !a.starts_with('-')).unwrap_or_default();
            let message = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            return fail(&command, "usage", message, 2);
        }
    };
    let name = cli.command.name();
    let cfg = match RunConfig::resolve(&cli.overrides) {
        Ok(c) => c,
        Err(e) => return fail(name, "usage", format!("{e:#}"), 2),
    };
    match run(&cli.command, &cfg) {
        Ok(mut summary) => {
            let mut line = json!({ "status": "ok", "command": name });
            if let (Value::Object(l), Value::Object(s)) = (&mut line, &mut summary) {
                l.append(s);
            }
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = error_kind(&e);
            fail(name, kind, format!("{e:#}"), if kind == "usage" { 2 } else { 1 })
        }
    }
}
