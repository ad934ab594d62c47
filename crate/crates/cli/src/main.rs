//! `triad`: build indexes, answer questions, evaluate benchmarks and check
//! transcripts.
//!
//! Exit codes: 0 on success (an abstention is a success), 1 for user or data
//! errors, 2 for infrastructure failures such as an unreachable backend or a
//! missing transcript.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "triad", version, about = "Knowledge-base question answering with three LLM roles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an N-Triples file and snapshot its mention index.
    Load {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Skip malformed lines instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Answer one question.
    Ask {
        #[arg(long)]
        question: String,
        #[arg(long)]
        config: PathBuf,
        /// Record every LLM call to this transcript.
        #[arg(long, conflicts_with = "replay")]
        record: Option<PathBuf>,
        /// Answer from a recorded transcript.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Write the full trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate a benchmark and print macro P/R/F1.
    Eval {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Directory of `<item id>.jsonl` transcripts.
        #[arg(long, conflicts_with = "record")]
        replay: Option<PathBuf>,
        /// Directory to record per-item transcripts into.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Directory for per-item trace JSON.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        repeat: u32,
        /// Overrides the config's concurrency.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        concurrency: Option<u32>,
        /// Pool matches over all items instead of averaging per item.
        #[arg(long)]
        micro: bool,
    },
    /// Validate transcripts, and with a benchmark, check that a strict
    /// replay consumes every record.
    ReplayCheck {
        /// Transcript file or directory.
        #[arg(long)]
        transcripts: PathBuf,
        #[arg(long, requires = "config")]
        benchmark: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    // Usage mistakes are user errors (1), not clap's default of 2, which is
    // reserved for infrastructure failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Load { kb, snapshot, lenient } => commands::load(&kb, snapshot.as_deref(), lenient),
        Command::Ask {
            question,
            config,
            record,
            replay,
            trace,
        } => commands::ask(&question, &config, record, replay, trace),
        Command::Eval {
            benchmark,
            config,
            replay,
            record,
            report,
            trace_dir,
            repeat,
            concurrency,
            micro,
        } => commands::eval(commands::EvalArgs {
            benchmark,
            config,
            replay,
            record,
            report,
            trace_dir,
            repeat: repeat as usize,
            concurrency: concurrency.map(|c| c as usize),
            micro,
        }),
        Command::ReplayCheck {
            transcripts,
            benchmark,
            config,
        } => commands::replay_check(&transcripts, benchmark, config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(f.error()));
            ExitCode::from(f.code())
        }
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}
