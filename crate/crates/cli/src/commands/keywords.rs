//! `pmidc extract-keywords`: per-record tf-idf keywords.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use pmidc_core::corpus::read_corpus;
use pmidc_core::prompt::{extract_keywords, DocFrequencyTable};
use serde_json::json;

use crate::{EXIT_OK, EXIT_PARTIAL};

#[derive(Args, Debug)]
pub struct KeywordArgs {
    /// Input corpus (JSONL).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Document-frequency table file; built from the corpus when omitted.
    #[arg(long)]
    pub background: Option<PathBuf>,
    /// Keywords per record.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Output path (JSONL); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: KeywordArgs) -> Result<i32> {
    let (records, issues) = read_corpus(&args.corpus)
        .with_context(|| format!("reading corpus {}", args.corpus.display()))?;
    for issue in &issues {
        eprintln!("skipping line {}: {}", issue.line, issue.message);
    }
    let background = match &args.background {
        Some(path) => DocFrequencyTable::from_file(path)?,
        None => DocFrequencyTable::from_documents(records.iter().map(|r| r.source.as_str())),
    };

    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout()),
    };
    let mut failures = 0usize;
    for record in &records {
        match extract_keywords(&record.source, args.k, &background) {
            Ok(extraction) => {
                let line = json!({
                    "id": record.id,
                    "keywords": extraction.keywords,
                    "shortfall": extraction.shortfall,
                });
                writeln!(out, "{line}")?;
            }
            Err(err) => {
                eprintln!("record {:?} failed: {err}", record.id);
                failures += 1;
            }
        }
    }
    if failures == 0 && issues.is_empty() {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_PARTIAL)
    }
}
