//! Random uniform grid search over the (lambda, tau) hyperparameter pair.
//!
//! Grid points are drawn uniformly at random within each axis range under a
//! fixed seed, sorted, and crossed into a grid. Every cell is evaluated;
//! failed cells are recorded and excluded from the argmax rather than scored,
//! so a flaky evaluation cannot select a degenerate optimum.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// What the search maximizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Mean LCS-overlap F1 against references.
    RougeL,
    /// `1 - mean novel-bigram rate`: a non-neural groundedness proxy.
    NovelBigramInverse,
}

impl FromStr for Objective {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rouge_l" => Ok(Objective::RougeL),
            "novel_bigram_inverse" => Ok(Objective::NovelBigramInverse),
            other => Err(CoreError::config(format!("unknown objective {other:?}"))),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::RougeL => f.write_str("rouge_l"),
            Objective::NovelBigramInverse => f.write_str("novel_bigram_inverse"),
        }
    }
}

/// Search-space description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda_range: (f64, f64),
    pub tau_range: (f64, f64),
    /// Points per axis (lambda, tau).
    pub grid_dims: (usize, usize),
    /// Documents evaluated per cell (the corpus is truncated to this many).
    pub sample_count: usize,
    pub objective: Objective,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambda_range: (0.0, 0.2),
            tau_range: (0.0, 6.0),
            grid_dims: (10, 10),
            sample_count: 3000,
            objective: Objective::RougeL,
            seed: 0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("lambda", self.lambda_range), ("tau", self.tau_range)] {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(CoreError::contract(format!(
                    "{name}_range requires lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        if self.grid_dims.0 == 0 || self.grid_dims.1 == 0 {
            return Err(CoreError::contract("grid dimensions must be >= 1"));
        }
        if self.sample_count == 0 {
            return Err(CoreError::contract("sample_count must be >= 1"));
        }
        Ok(())
    }

    /// The axis values for this spec: uniform random draws under the seed,
    /// sorted ascending. Deterministic per seed.
    pub fn axes(&self) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut draw = |range: (f64, f64), count: usize| -> Vec<f64> {
            let mut values: Vec<f64> =
                (0..count).map(|_| rng.gen_range(range.0..range.1)).collect();
            values.sort_by(f64::total_cmp);
            values
        };
        let lambdas = draw(self.lambda_range, self.grid_dims.0);
        let taus = draw(self.tau_range, self.grid_dims.1);
        (lambdas, taus)
    }
}

/// Outcome of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lambda: f64,
    pub tau: f64,
    /// Objective value; absent when the evaluation failed.
    pub objective: Option<f64>,
    /// "ok" or the failure message.
    pub status: String,
}

impl GridCell {
    pub fn failed(&self) -> bool {
        self.objective.is_none()
    }
}

/// Search result: the winning pair and the full score table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_lambda: f64,
    pub best_tau: f64,
    pub best_objective: f64,
    pub table: Vec<GridCell>,
}

/// Evaluates every grid pair with `objective_fn(lambda, tau, sample)` and
/// returns the argmax. Ties go to the smaller lambda, then the smaller tau.
/// `sample` is the first `sample_count` documents of the corpus.
pub fn grid_search<D, F>(spec: &GridSpec, corpus: &[D], mut objective_fn: F) -> Result<GridSearchResult>
where
    F: FnMut(f64, f64, &[D]) -> Result<f64>,
{
    spec.validate()?;
    if corpus.is_empty() {
        return Err(CoreError::contract("grid search needs at least one document"));
    }
    let sample = &corpus[..corpus.len().min(spec.sample_count)];
    let (lambdas, taus) = spec.axes();
    let mut table = Vec::with_capacity(lambdas.len() * taus.len());
    let mut best: Option<(f64, f64, f64)> = None;
    for &lambda in &lambdas {
        for &tau in &taus {
            match objective_fn(lambda, tau, sample) {
                Ok(value) if value.is_finite() => {
                    // Strict improvement only: the scan order (lambda asc,
                    // tau asc) makes ties resolve to the smallest pair.
                    if best.is_none_or(|(_, _, b)| value > b) {
                        best = Some((lambda, tau, value));
                    }
                    table.push(GridCell { lambda, tau, objective: Some(value), status: "ok".into() });
                }
                Ok(value) => {
                    table.push(GridCell {
                        lambda,
                        tau,
                        objective: None,
                        status: format!("failed: non-finite objective {value}"),
                    });
                }
                Err(err) => {
                    table.push(GridCell {
                        lambda,
                        tau,
                        objective: None,
                        status: format!("failed: {err}"),
                    });
                }
            }
        }
    }
    let (best_lambda, best_tau, best_objective) =
        best.ok_or_else(|| CoreError::contract("every grid cell failed"))?;
    Ok(GridSearchResult { best_lambda, best_tau, best_objective, table })
}

/// Writes the score table as `lambda,tau,objective,status` CSV.
pub fn write_table_csv(table: &[GridCell], path: &Path) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "lambda,tau,objective,status")?;
    for cell in table {
        let objective = cell.objective.map(|v| v.to_string()).unwrap_or_default();
        let status = if cell.failed() { "failed" } else { "ok" };
        writeln!(out, "{},{},{},{}", cell.lambda, cell.tau, objective, status)?;
    }
    Ok(())
}
