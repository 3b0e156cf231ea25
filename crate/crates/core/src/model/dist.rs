//! Normalized next-token log-probability vectors.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::vocab::TokenId;

/// Probability assigned to impossible tokens. Keeping a finite floor instead
/// of -inf matters because the scoring rules subtract penalty logprobs, and
/// -inf arithmetic would poison every downstream score.
pub const PROB_FLOOR: f64 = 1e-12;

/// Allowed deviation of sum(exp(logprobs)) from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Allowed positive slack on individual logprob entries.
pub const LOGPROB_SLACK: f64 = 1e-9;

/// A next-token distribution as natural-log probabilities over the full
/// vocabulary. Construction enforces normalization, so downstream code can
/// rely on `sum(exp(logprobs))` being 1 within [`NORMALIZATION_TOLERANCE`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenDistribution {
    logprobs: Vec<f64>,
}

impl TokenDistribution {
    /// Builds a distribution from unnormalized probability masses: each mass
    /// is floored at [`PROB_FLOOR`], the vector is renormalized, and logs are
    /// taken. Impossible tokens therefore end up near `ln(1e-12)`, never -inf.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if probs.is_empty() {
            return Err(CoreError::contract("empty probability vector"));
        }
        let mut total = 0.0;
        for &p in probs {
            if !p.is_finite() || p < 0.0 {
                return Err(CoreError::contract(format!("invalid probability mass {p}")));
            }
            total += p.max(PROB_FLOOR);
        }
        if total <= 0.0 || !total.is_finite() {
            return Err(CoreError::contract("probability masses sum to zero"));
        }
        let logprobs = probs.iter().map(|&p| (p.max(PROB_FLOOR) / total).ln()).collect();
        Ok(TokenDistribution { logprobs })
    }

    /// Wraps pre-computed logprobs without altering them, after checking the
    /// distribution invariants. Used where bit-exact passthrough matters
    /// (stored tables, wire responses within tolerance).
    pub fn from_logprobs(logprobs: Vec<f64>) -> Result<Self> {
        let dist = TokenDistribution { logprobs };
        dist.validate()?;
        Ok(dist)
    }

    /// All mass on one token (others floored).
    pub fn one_hot(len: usize, id: TokenId) -> Result<Self> {
        if id as usize >= len {
            return Err(CoreError::contract(format!("one-hot id {id} out of range {len}")));
        }
        let mut probs = vec![0.0; len];
        probs[id as usize] = 1.0;
        TokenDistribution::from_probs(&probs)
    }

    /// Uniform over the whole vocabulary.
    pub fn uniform(len: usize) -> Result<Self> {
        TokenDistribution::from_probs(&vec![1.0; len])
    }

    /// Checks normalization, finiteness, and the per-entry upper bound.
    pub fn validate(&self) -> Result<()> {
        if self.logprobs.is_empty() {
            return Err(CoreError::contract("empty distribution"));
        }
        let mut sum = 0.0;
        for &lp in &self.logprobs {
            if !lp.is_finite() {
                return Err(CoreError::contract(format!("non-finite logprob {lp}")));
            }
            if lp > LOGPROB_SLACK {
                return Err(CoreError::contract(format!("logprob {lp} above zero")));
            }
            sum += lp.exp();
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(CoreError::contract(format!(
                "distribution not normalized: sum(exp) = {sum}"
            )));
        }
        Ok(())
    }

    /// Deviation of sum(exp(logprobs)) from 1, for drift checks on wire data.
    pub fn drift(logprobs: &[f64]) -> f64 {
        let sum: f64 = logprobs.iter().map(|lp| lp.exp()).sum();
        (sum - 1.0).abs()
    }

    /// Rebuilds the distribution through the floor-and-renormalize rule.
    pub fn renormalized(&self) -> Result<Self> {
        let probs: Vec<f64> = self.logprobs.iter().map(|lp| lp.exp()).collect();
        TokenDistribution::from_probs(&probs)
    }

    pub fn len(&self) -> usize {
        self.logprobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logprobs.is_empty()
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn logprob(&self, id: TokenId) -> Result<f64> {
        self.logprobs
            .get(id as usize)
            .copied()
            .ok_or_else(|| CoreError::contract(format!("token id {id} out of range")))
    }
}
