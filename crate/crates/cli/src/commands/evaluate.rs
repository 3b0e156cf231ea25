//! `pmidc evaluate`: score decoded summaries against references and sources.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use pmidc_core::corpus::{read_corpus, read_summaries};
use pmidc_core::eval::{aggregate, evaluate_doc};

use crate::EXIT_OK;

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Corpus the summaries were decoded from (provides sources and
    /// references).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Decode output (JSONL of summary records).
    #[arg(long)]
    pub decoded: PathBuf,
    /// Report output path (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: EvaluateArgs) -> Result<i32> {
    let (records, issues) = read_corpus(&args.corpus)
        .with_context(|| format!("reading corpus {}", args.corpus.display()))?;
    if !issues.is_empty() {
        bail!("corpus has {} invalid records; evaluate needs a clean corpus", issues.len());
    }
    let by_id: HashMap<&str, &pmidc_core::CorpusRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();

    let summaries = read_summaries(&args.decoded)
        .with_context(|| format!("reading decode output {}", args.decoded.display()))?;
    let mut docs = Vec::with_capacity(summaries.len());
    for summary in &summaries {
        let record = by_id.get(summary.id.as_str()).copied().ok_or_else(|| {
            anyhow::anyhow!("decoded record {:?} is not in the corpus", summary.id)
        })?;
        docs.push(evaluate_doc(
            Some(&summary.id),
            &summary.summary,
            &record.source,
            record.reference.as_deref(),
            summary.gate_fire_rate,
            summary.mean_step_entropy,
        ));
    }
    let report = aggregate(docs);
    let mut out = std::fs::File::create(&args.out)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    eprintln!(
        "evaluated {} documents (rouge-l f over {}: {:.4})",
        report.summary.documents, report.summary.rouge_l_f.count, report.summary.rouge_l_f.mean
    );
    Ok(EXIT_OK)
}
