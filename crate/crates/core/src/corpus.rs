//! Corpus and decode-output records (JSONL on disk).

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One input document: an id, the source text, and an optional gold
/// reference.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

/// A record that failed to load, with the 1-based line number and the reason.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusIssue {
    pub line: usize,
    pub message: String,
}

/// Reads a JSONL corpus leniently: malformed or invalid records are returned
/// as issues instead of aborting the read. Enforces non-empty unique ids and
/// non-empty sources.
pub fn read_corpus(path: &Path) -> Result<(Vec<CorpusRecord>, Vec<CorpusIssue>)> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    let mut issues = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                issues.push(CorpusIssue { line: line_no, message: format!("unparseable: {e}") });
                continue;
            }
        };
        if record.id.is_empty() {
            issues.push(CorpusIssue { line: line_no, message: "empty id".into() });
            continue;
        }
        if record.source.trim().is_empty() {
            issues.push(CorpusIssue {
                line: line_no,
                message: format!("record {:?} has an empty source", record.id),
            });
            continue;
        }
        if !seen_ids.insert(record.id.clone()) {
            issues.push(CorpusIssue {
                line: line_no,
                message: format!("duplicate id {:?}", record.id),
            });
            continue;
        }
        records.push(record);
    }
    Ok((records, issues))
}

pub fn write_corpus(records: &[CorpusRecord], path: &Path) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    for record in records {
        writeln!(out, "{}", serde_json::to_string(record)?)?;
    }
    Ok(())
}

/// One decode output line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: String,
    pub summary: String,
    pub score: f64,
    pub gate_fire_rate: f64,
    pub mean_step_entropy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
}

pub fn read_summaries(path: &Path) -> Result<Vec<SummaryRecord>> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

pub fn write_summaries(records: &[SummaryRecord], path: &Path) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    for record in records {
        writeln!(out, "{}", serde_json::to_string(record)?)?;
    }
    Ok(())
}
