//! Non-neural evaluation: LCS-based overlap with references, source-overlap
//! novelty diagnostics, and corpus aggregation.
//!
//! Text is compared on lowercase whitespace tokens without stemming, so the
//! numbers are self-contained and deterministic. Neural metrics have no
//! implementation here; the report carries them as explicitly absent fields
//! rather than silently-zero values.

use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::beam::DecodeResult;
use crate::error::{CoreError, Result};
use crate::model::Vocabulary;

/// Precision / recall / F1 triple from the LCS overlap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (m, n) = (a.len(), b.len());
    let mut dp = vec![vec![0usize; n + 1]; m + 1];
    for i in 0..m {
        for j in 0..n {
            dp[i + 1][j + 1] =
                if a[i] == b[j] { dp[i][j] + 1 } else { dp[i + 1][j].max(dp[i][j + 1]) };
        }
    }
    dp[m][n]
}

/// LCS-based overlap: precision = LCS/|candidate|, recall = LCS/|reference|,
/// F1 their harmonic mean (0 when both are 0). Errors on empty input.
pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> Result<RougeScore> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(CoreError::contract("rouge_l requires non-empty token lists"));
    }
    let lcs = lcs_length(candidate, reference) as f64;
    let precision = lcs / candidate.len() as f64;
    let recall = lcs / reference.len() as f64;
    let f1 = if precision == 0.0 && recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(RougeScore { precision, recall, f1 })
}

/// Fraction of the summary's n-gram occurrences that never appear in the
/// source. Errors when the summary is shorter than n.
pub fn novel_ngram_rate<T: Eq + Hash>(summary: &[T], source: &[T], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(CoreError::contract("n must be >= 1"));
    }
    if summary.len() < n {
        return Err(CoreError::contract(format!(
            "summary has {} tokens, needs at least {n}",
            summary.len()
        )));
    }
    let source_grams: HashSet<&[T]> = if source.len() >= n {
        source.windows(n).collect()
    } else {
        HashSet::new()
    };
    let total = summary.len() - n + 1;
    let novel = summary.windows(n).filter(|gram| !source_grams.contains(*gram)).count();
    Ok(novel as f64 / total as f64)
}

/// Lowercase whitespace tokenization used for all text-level metrics.
pub fn tokenize_for_eval(text: &str) -> Vec<String> {
    text.to_lowercase().split_whitespace().map(str::to_string).collect()
}

/// Per-document metric record. Optional fields are absent when the metric
/// is undefined for the document (no reference, summary shorter than the
/// n-gram order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocEval {
    pub id: Option<String>,
    pub rouge_l_p: Option<f64>,
    pub rouge_l_r: Option<f64>,
    pub rouge_l_f: Option<f64>,
    pub novel_unigram_rate: Option<f64>,
    pub novel_bigram_rate: Option<f64>,
    pub gate_fire_rate: f64,
    pub mean_step_entropy: f64,
}

/// Mean and the number of documents it was computed over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanWithCount {
    pub mean: f64,
    pub count: usize,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> MeanWithCount {
    let present: Vec<f64> = values.flatten().collect();
    if present.is_empty() {
        return MeanWithCount::default();
    }
    MeanWithCount {
        mean: present.iter().sum::<f64>() / present.len() as f64,
        count: present.len(),
    }
}

/// Neural metrics are out of scope for this build (they need trained
/// checkpoints); the fields exist so their absence is explicit in reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AbsentNeuralMetrics {
    pub alignscore: Option<f64>,
    pub factcc: Option<f64>,
    pub bartscore: Option<f64>,
    pub bs_fact: Option<f64>,
    pub bertscore: Option<f64>,
}

/// Corpus-level means over the per-document records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub documents: usize,
    pub rouge_l_f: MeanWithCount,
    pub rouge_l_p: MeanWithCount,
    pub rouge_l_r: MeanWithCount,
    pub novel_unigram_rate: MeanWithCount,
    pub novel_bigram_rate: MeanWithCount,
    pub gate_fire_rate: MeanWithCount,
    pub mean_step_entropy: MeanWithCount,
    pub neural_metrics: AbsentNeuralMetrics,
}

/// Full evaluation report: per-document records plus corpus means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<DocEval>,
    pub summary: CorpusSummary,
}

/// Evaluates one document from its text fields and decode diagnostics.
pub fn evaluate_doc(
    id: Option<&str>,
    summary_text: &str,
    source_text: &str,
    reference: Option<&str>,
    gate_fire_rate: f64,
    mean_step_entropy: f64,
) -> DocEval {
    let summary_tokens = tokenize_for_eval(summary_text);
    let source_tokens = tokenize_for_eval(source_text);
    let rouge = reference.and_then(|r| {
        let reference_tokens = tokenize_for_eval(r);
        rouge_l(&summary_tokens, &reference_tokens).ok()
    });
    let novel_unigram = novel_ngram_rate(&summary_tokens, &source_tokens, 1).ok();
    let novel_bigram = novel_ngram_rate(&summary_tokens, &source_tokens, 2).ok();
    DocEval {
        id: id.map(str::to_string),
        rouge_l_p: rouge.map(|r| r.precision),
        rouge_l_r: rouge.map(|r| r.recall),
        rouge_l_f: rouge.map(|r| r.f1),
        novel_unigram_rate: novel_unigram,
        novel_bigram_rate: novel_bigram,
        gate_fire_rate,
        mean_step_entropy,
    }
}

/// Aggregates per-document records into a report. Corpus means are plain
/// arithmetic means over the documents where each metric is defined.
pub fn aggregate(records: Vec<DocEval>) -> EvalReport {
    let summary = CorpusSummary {
        documents: records.len(),
        rouge_l_f: mean_of(records.iter().map(|r| r.rouge_l_f)),
        rouge_l_p: mean_of(records.iter().map(|r| r.rouge_l_p)),
        rouge_l_r: mean_of(records.iter().map(|r| r.rouge_l_r)),
        novel_unigram_rate: mean_of(records.iter().map(|r| r.novel_unigram_rate)),
        novel_bigram_rate: mean_of(records.iter().map(|r| r.novel_bigram_rate)),
        gate_fire_rate: mean_of(records.iter().map(|r| Some(r.gate_fire_rate))),
        mean_step_entropy: mean_of(records.iter().map(|r| Some(r.mean_step_entropy))),
        neural_metrics: AbsentNeuralMetrics::default(),
    };
    EvalReport { records, summary }
}

/// Evaluates aligned decode results against references and sources. The
/// top hypothesis of each result is the evaluated summary.
pub fn evaluate_corpus(
    results: &[DecodeResult],
    references: &[Option<String>],
    sources: &[String],
    vocab: &Vocabulary,
) -> Result<EvalReport> {
    if results.len() != references.len() || results.len() != sources.len() {
        return Err(CoreError::contract(format!(
            "aligned lists required: {} results, {} references, {} sources",
            results.len(),
            references.len(),
            sources.len()
        )));
    }
    let mut records = Vec::with_capacity(results.len());
    for ((result, reference), source) in results.iter().zip(references).zip(sources) {
        let best = result.best();
        let summary_text = vocab.detokenize(&best.tokens)?;
        records.push(evaluate_doc(
            None,
            &summary_text,
            source,
            reference.as_deref(),
            best.gate_fire_rate(),
            best.mean_step_entropy(),
        ));
    }
    Ok(aggregate(records))
}
