//! Command-line front end: batch decoding, evaluation, hyperparameter
//! tuning, keyword extraction, and a toy protocol provider.

mod commands;

use clap::{Parser, Subcommand};

/// Exit code for full success.
pub const EXIT_OK: i32 = 0;
/// Exit code for fatal errors (unreadable files, invalid configuration).
pub const EXIT_FATAL: i32 = 1;
// Exit code 2 is taken by clap for command-line usage errors.
/// Exit code for provider failures (endpoint down, timeout, protocol
/// violation).
pub const EXIT_PROVIDER: i32 = 3;
/// Exit code for partial success: some records were skipped or failed, the
/// rest were written.
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Parser)]
#[command(
    name = "pmidc",
    about = "Decoding with domain-conditional mutual-information scoring",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a corpus to summaries (JSONL in, JSONL out).
    Decode(commands::decode::DecodeArgs),
    /// Score decoded summaries against references and sources.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Random uniform grid search over (lambda, tau).
    Tune(commands::tune::TuneArgs),
    /// Extract tf-idf keywords per record.
    ExtractKeywords(commands::keywords::KeywordArgs),
    /// Serve a built-in model over the line protocol (for providers and
    /// integration tests).
    ServeToy(commands::serve::ServeArgs),
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Decode(args) => commands::decode::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Tune(args) => commands::tune::run(args),
        Command::ExtractKeywords(args) => commands::keywords::run(args),
        Command::ServeToy(args) => commands::serve::run(args),
    };
    let code = code.unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        classify(&err)
    });
    std::process::exit(code);
}

/// Provider failures get their own exit code so callers can tell "the
/// endpoint is down" from "the input is bad".
fn classify(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<pmidc_core::CoreError>() {
            if matches!(core, pmidc_core::CoreError::Provider { .. }) {
                return EXIT_PROVIDER;
            }
        }
    }
    EXIT_FATAL
}
