//! `pmidc decode`: batch decoding of a JSONL corpus.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use pmidc_core::beam::decode;
use pmidc_core::corpus::{read_corpus, write_summaries, CorpusRecord, SummaryRecord};
use pmidc_core::prompt::{build_domain_prompt, DocFrequencyTable, DomainPrompt};
use pmidc_core::{ConditionalModel, CoreError, Hypothesis, JobConfig};
use rayon::prelude::*;
use serde_json::json;

use crate::{EXIT_OK, EXIT_PARTIAL};

use super::ConfigOverrides;

#[derive(Args, Debug)]
pub struct DecodeArgs {
    /// Input corpus (JSONL, one {id, source, reference?} per line).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output path (JSONL, one {id, summary, score, ...} per line).
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for per-record decode traces (optional).
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Document-frequency table for keyword extraction; built from the
    /// corpus itself when omitted.
    #[arg(long)]
    pub background: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

pub fn run(args: DecodeArgs) -> Result<i32> {
    let config = args.overrides.load()?;
    config.validate()?;
    let theta = config.resolve_theta()?;
    let phi = config.resolve_phi()?;

    let (records, issues) = read_corpus(&args.corpus)
        .with_context(|| format!("reading corpus {}", args.corpus.display()))?;
    for issue in &issues {
        eprintln!("skipping line {}: {}", issue.line, issue.message);
    }

    let background = match &args.background {
        Some(path) => DocFrequencyTable::from_file(path)
            .with_context(|| format!("reading background table {}", path.display()))?,
        None => DocFrequencyTable::from_documents(records.iter().map(|r| r.source.as_str())),
    };

    if let Some(dir) = &args.traces {
        std::fs::create_dir_all(dir)?;
    }

    let outcomes = decode_records(
        &config,
        theta.as_ref(),
        phi.as_deref(),
        &records,
        &background,
        args.traces.as_deref(),
    )?;

    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for (record, outcome) in records.iter().zip(outcomes) {
        match outcome {
            Ok(summary) => summaries.push(summary),
            Err(err) => {
                if matches!(err, CoreError::Provider { .. }) {
                    // Partial output still gets written before aborting.
                    write_summaries(&summaries, &args.out)?;
                    return Err(err).context(format!("record {:?}", record.id));
                }
                eprintln!("record {:?} failed: {err}", record.id);
                failures.push(record.id.clone());
            }
        }
    }
    write_summaries(&summaries, &args.out)?;
    eprintln!("decoded {}/{} records", summaries.len(), records.len());

    if failures.is_empty() && issues.is_empty() {
        Ok(EXIT_OK)
    } else {
        if !failures.is_empty() {
            eprintln!("failed records: {}", failures.join(", "));
        }
        Ok(EXIT_PARTIAL)
    }
}

/// Decodes every record, preserving input order. Parallelism only changes
/// scheduling, never output order or content.
fn decode_records(
    config: &JobConfig,
    theta: &dyn ConditionalModel,
    phi: Option<&dyn ConditionalModel>,
    records: &[CorpusRecord],
    background: &DocFrequencyTable,
    traces_dir: Option<&std::path::Path>,
) -> Result<Vec<Result<SummaryRecord, CoreError>>> {
    let decode_config = config.decode_config();
    let spec = config.domain_spec();
    let vocab = theta.vocabulary();
    let pool = super::thread_pool(config.jobs)?;
    let outcomes: Vec<Result<SummaryRecord, CoreError>> = pool.install(|| {
        records
            .par_iter()
            .map(|record| {
                let domain: Option<DomainPrompt> = if config.strategy.uses_domain() {
                    Some(build_domain_prompt(&spec, &config.prompt_phrase, &record.source, background)?)
                } else {
                    None
                };
                let result =
                    decode(theta, phi, Some(&record.source), domain.as_ref(), &decode_config)?;
                let best = result.best();
                let trace_path = match traces_dir {
                    Some(dir) => Some(write_trace(dir, &record.id, best, vocab)?),
                    None => None,
                };
                Ok(SummaryRecord {
                    id: record.id.clone(),
                    summary: vocab.detokenize(&best.tokens)?,
                    score: best.cum_score,
                    gate_fire_rate: best.gate_fire_rate(),
                    mean_step_entropy: best.mean_step_entropy(),
                    trace_path,
                })
            })
            .collect()
    });
    Ok(outcomes)
}

fn write_trace(
    dir: &std::path::Path,
    id: &str,
    hyp: &Hypothesis,
    vocab: &pmidc_core::Vocabulary,
) -> Result<String, CoreError> {
    let tokens: Vec<&str> =
        hyp.tokens.iter().map(|&t| vocab.token(t)).collect::<Result<_, _>>()?;
    let trace = json!({
        "id": id,
        "tokens": tokens,
        "finished": hyp.finished,
        "truncated": hyp.truncated,
        "cum_score": hyp.cum_score,
        "steps": hyp.trace,
    });
    let path = dir.join(format!("{id}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&trace).map_err(CoreError::from)?)?;
    Ok(path.display().to_string())
}
