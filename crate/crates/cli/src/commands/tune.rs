//! `pmidc tune`: random uniform grid search over (lambda, tau).

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use pmidc_core::beam::decode;
use pmidc_core::corpus::{read_corpus, CorpusRecord};
use pmidc_core::eval::{evaluate_doc, tokenize_for_eval};
use pmidc_core::prompt::{build_domain_prompt, DocFrequencyTable, DomainPrompt};
use pmidc_core::tuning::{grid_search, write_table_csv, GridSpec, Objective};
use pmidc_core::{ConditionalModel, CoreError};
use rayon::prelude::*;

use crate::EXIT_OK;

use super::ConfigOverrides;

#[derive(Args, Debug)]
pub struct TuneArgs {
    /// Tuning corpus (JSONL; references required for the rouge_l objective).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Score-table output path (CSV: lambda,tau,objective,status).
    #[arg(long)]
    pub out: PathBuf,
    /// Objective: rouge_l | novel_bigram_inverse.
    #[arg(long, default_value = "rouge_l")]
    pub objective: String,
    /// Lambda range as lo:hi.
    #[arg(long, default_value = "0:0.2")]
    pub lambda_range: String,
    /// Tau range as lo:hi.
    #[arg(long, default_value = "0:6")]
    pub tau_range: String,
    /// Grid dimensions as NxM (lambda points x tau points).
    #[arg(long, default_value = "10x10")]
    pub grid: String,
    /// Documents evaluated per grid cell.
    #[arg(long, default_value_t = 3000)]
    pub samples: usize,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

fn parse_range(text: &str, name: &str) -> Result<(f64, f64)> {
    let (lo, hi) = text
        .split_once(':')
        .with_context(|| format!("{name} must be lo:hi, got {text:?}"))?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

fn parse_dims(text: &str) -> Result<(usize, usize)> {
    let (a, b) = text.split_once('x').with_context(|| format!("grid must be NxM, got {text:?}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

pub fn run(args: TuneArgs) -> Result<i32> {
    let config = args.overrides.load()?;
    config.validate()?;
    let objective: Objective = args.objective.parse()?;
    let spec = GridSpec {
        lambda_range: parse_range(&args.lambda_range, "lambda-range")?,
        tau_range: parse_range(&args.tau_range, "tau-range")?,
        grid_dims: parse_dims(&args.grid)?,
        sample_count: args.samples,
        objective,
        seed: config.seed,
    };

    let theta = config.resolve_theta()?;
    let phi = config.resolve_phi()?;
    let (records, issues) = read_corpus(&args.corpus)?;
    if !issues.is_empty() {
        bail!("tuning corpus has {} invalid records", issues.len());
    }
    if objective == Objective::RougeL && records.iter().any(|r| r.reference.is_none()) {
        bail!("the rouge_l objective needs a reference on every record");
    }

    // Domain prompts do not depend on (lambda, tau); build them once.
    let background = DocFrequencyTable::from_documents(records.iter().map(|r| r.source.as_str()));
    let domain_spec = config.domain_spec();
    let domains: Vec<Option<DomainPrompt>> = if config.strategy.uses_domain() {
        records
            .iter()
            .map(|r| build_domain_prompt(&domain_spec, &config.prompt_phrase, &r.source, &background).map(Some))
            .collect::<Result<_, _>>()?
    } else {
        vec![None; records.len()]
    };

    let pool = super::thread_pool(config.jobs)?;
    let result = grid_search(&spec, &records, |lambda, tau, sample| {
        let mut cell_config = config.decode_config();
        cell_config.scoring.lambda = lambda;
        cell_config.scoring.tau = tau;
        let values: Result<Vec<f64>, CoreError> = pool.install(|| {
            sample
                .par_iter()
                .zip(&domains[..sample.len()])
                .map(|(record, domain)| {
                    cell_objective(
                        theta.as_ref(),
                        phi.as_deref(),
                        record,
                        domain.as_ref(),
                        &cell_config,
                        objective,
                    )
                })
                .collect()
        });
        let values = values?;
        Ok(values.iter().sum::<f64>() / values.len() as f64)
    })?;

    write_table_csv(&result.table, &args.out)?;
    println!(
        "best lambda={} tau={} objective={:.6} ({} over {} cells)",
        result.best_lambda,
        result.best_tau,
        result.best_objective,
        objective,
        result.table.len()
    );
    Ok(EXIT_OK)
}

/// Decodes one record at the cell's hyperparameters and scores the chosen
/// objective.
fn cell_objective(
    theta: &dyn ConditionalModel,
    phi: Option<&dyn ConditionalModel>,
    record: &CorpusRecord,
    domain: Option<&DomainPrompt>,
    decode_config: &pmidc_core::DecodeConfig,
    objective: Objective,
) -> Result<f64, CoreError> {
    let result = decode(theta, phi, Some(&record.source), domain, decode_config)?;
    let best = result.best();
    let summary = theta.vocabulary().detokenize(&best.tokens)?;
    let doc = evaluate_doc(
        Some(&record.id),
        &summary,
        &record.source,
        record.reference.as_deref(),
        best.gate_fire_rate(),
        best.mean_step_entropy(),
    );
    match objective {
        Objective::RougeL => doc.rouge_l_f.ok_or_else(|| {
            CoreError::contract(format!(
                "record {:?}: overlap undefined (empty summary of {} tokens?)",
                record.id,
                tokenize_for_eval(&summary).len()
            ))
        }),
        Objective::NovelBigramInverse => {
            // Summaries shorter than a bigram count as fully novel.
            Ok(1.0 - doc.novel_bigram_rate.unwrap_or(1.0))
        }
    }
}
