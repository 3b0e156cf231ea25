//! Token-level scoring rules.
//!
//! Four strategies share one shape: a conditional log-probability term minus
//! an optional penalty term.
//!
//! * `Beam` — plain log-likelihood: `score = log p(y | ctx)`.
//! * `Pmi` — mutual-information scoring: `score = log p(y | ctx) - lambda * log p(y | prefix)`,
//!   demoting tokens that are merely common regardless of the input.
//! * `Cpmi` — the same penalty, applied only when the conditional
//!   distribution's predictive entropy exceeds a threshold tau; low-entropy
//!   steps keep the plain likelihood untouched.
//! * `PmiDc` — entropy-gated penalty where both terms are additionally
//!   conditioned on a domain prompt, so the penalty reflects what is likely
//!   *within the source's domain* rather than in general.
//!
//! All scores stay in the log domain; nothing here exponentiates during
//! search.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{TokenDistribution, TokenId};

/// Hyperparameter pair (penalty weight, entropy threshold in nats).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperPair {
    pub lambda: f64,
    pub tau: f64,
}

/// Shipped defaults tuned against a BART-scale summarizer.
pub const BART_DEFAULTS: HyperPair = HyperPair { lambda: 6.5602e-2, tau: 3.5987 };

/// Alternate defaults tuned against a PEGASUS-scale summarizer.
pub const PEGASUS_DEFAULTS: HyperPair = HyperPair { lambda: 7.4534e-2, tau: 3.304358 };

/// Which scoring rule drives the search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Beam,
    Pmi,
    Cpmi,
    PmiDc,
}

impl Strategy {
    /// True when the strategy consumes a penalty-model distribution.
    pub fn needs_penalty_model(self) -> bool {
        !matches!(self, Strategy::Beam)
    }

    /// True when the strategy conditions on a domain prompt.
    pub fn uses_domain(self) -> bool {
        matches!(self, Strategy::PmiDc)
    }
}

impl FromStr for Strategy {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beam" => Ok(Strategy::Beam),
            "pmi" => Ok(Strategy::Pmi),
            "cpmi" => Ok(Strategy::Cpmi),
            "pmi_dc" => Ok(Strategy::PmiDc),
            other => Err(CoreError::config(format!("unknown strategy {other:?}"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Strategy::Beam => "beam",
            Strategy::Pmi => "pmi",
            Strategy::Cpmi => "cpmi",
            Strategy::PmiDc => "pmi_dc",
        };
        f.write_str(s)
    }
}

/// Strategy selector plus the penalty weight and entropy threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub strategy: Strategy,
    /// Penalty weight, >= 0.
    pub lambda: f64,
    /// Entropy threshold in nats, >= 0. Ignored by `Beam` and `Pmi`.
    pub tau: f64,
    /// When false, the entropy gate is removed and the penalty applies at
    /// every step (the ablation of the uncertainty indicator). Ignored by
    /// `Beam` and `Pmi`.
    pub gate_enabled: bool,
}

impl ScoringConfig {
    pub fn beam() -> Self {
        ScoringConfig { strategy: Strategy::Beam, lambda: 0.0, tau: 0.0, gate_enabled: true }
    }

    pub fn pmi(lambda: f64) -> Self {
        ScoringConfig { strategy: Strategy::Pmi, lambda, tau: 0.0, gate_enabled: true }
    }

    pub fn cpmi(lambda: f64, tau: f64) -> Self {
        ScoringConfig { strategy: Strategy::Cpmi, lambda, tau, gate_enabled: true }
    }

    pub fn pmi_dc(lambda: f64, tau: f64) -> Self {
        ScoringConfig { strategy: Strategy::PmiDc, lambda, tau, gate_enabled: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(CoreError::contract(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        // +inf tau is legal: it pins the gate shut.
        if self.tau.is_nan() || self.tau < 0.0 {
            return Err(CoreError::contract(format!("tau must be >= 0, got {}", self.tau)));
        }
        Ok(())
    }
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig::pmi_dc(BART_DEFAULTS.lambda, BART_DEFAULTS.tau)
    }
}

/// Score and diagnostics for one token at one decode step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepScore {
    pub token_id: TokenId,
    /// Log-domain score accumulated by the search.
    pub score: f64,
    pub conditional_logprob: f64,
    /// Penalty-model logprob; absent under the `Beam` strategy.
    pub unconditional_logprob: Option<f64>,
    /// Predictive entropy of the conditional distribution, in nats.
    pub entropy: f64,
    /// Whether the penalty applied at this step.
    pub gate_fired: bool,
}

/// Predictive entropy `H(p) = -sum_y p_y ln p_y` in nats.
///
/// Errors on unnormalized input. The result is clamped into `[0, ln |V|]`:
/// those are the true bounds of entropy for any normalized distribution, and
/// clamping keeps float round-off from pushing a uniform distribution's
/// entropy a few ulps past `ln |V|`, which would leak through the strict
/// gate comparison below.
pub fn entropy(dist: &TokenDistribution) -> Result<f64> {
    dist.validate()?;
    let raw: f64 = -dist.logprobs().iter().map(|&lp| lp.exp() * lp).sum::<f64>();
    let max = (dist.len() as f64).ln();
    Ok(raw.clamp(0.0, max))
}

/// Gate decision for one decode step, shared by every token expanded from
/// the same beam (the indicator depends only on the distribution).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateEval {
    pub entropy: f64,
    pub fired: bool,
}

/// Evaluates the entropy gate once for a step. The comparison is strictly
/// `H > tau`: a tie keeps the gate closed.
pub fn gate_eval(cond: &TokenDistribution, config: &ScoringConfig) -> Result<GateEval> {
    let h = entropy(cond)?;
    let fired = match config.strategy {
        Strategy::Beam => false,
        Strategy::Pmi => true,
        Strategy::Cpmi | Strategy::PmiDc => {
            if config.gate_enabled {
                h > config.tau
            } else {
                true
            }
        }
    };
    Ok(GateEval { entropy: h, fired })
}

/// Scores one token given a precomputed gate decision.
///
/// When the gate is closed or lambda is zero the conditional logprob is
/// returned untouched (the same f64, not a recomputation), which makes the
/// reduction identities to plain beam scoring exact.
pub fn score_token(
    cond: &TokenDistribution,
    uncond: Option<&TokenDistribution>,
    token_id: TokenId,
    config: &ScoringConfig,
    gate: &GateEval,
) -> Result<StepScore> {
    let conditional = cond.logprob(token_id)?;
    let unconditional = match uncond {
        Some(dist) => Some(dist.logprob(token_id)?),
        None => None,
    };
    let score = match unconditional {
        Some(penalty) if gate.fired && config.lambda != 0.0 => {
            conditional - config.lambda * penalty
        }
        _ => conditional,
    };
    Ok(StepScore {
        token_id,
        score,
        conditional_logprob: conditional,
        unconditional_logprob: unconditional,
        entropy: gate.entropy,
        gate_fired: gate.fired,
    })
}

/// Plain beam scoring: `score = log p(y | ctx)`.
pub fn score_beam(cond: &TokenDistribution, token_id: TokenId) -> Result<StepScore> {
    let config = ScoringConfig::beam();
    let gate = gate_eval(cond, &config)?;
    score_token(cond, None, token_id, &config, &gate)
}

/// Mutual-information scoring with weight lambda; the penalty applies at
/// every step.
pub fn score_pmi(
    cond: &TokenDistribution,
    uncond: &TokenDistribution,
    token_id: TokenId,
    lambda: f64,
) -> Result<StepScore> {
    let config = ScoringConfig::pmi(lambda);
    config.validate()?;
    let gate = gate_eval(cond, &config)?;
    score_token(cond, Some(uncond), token_id, &config, &gate)
}

/// Entropy-gated mutual-information scoring.
pub fn score_cpmi(
    cond: &TokenDistribution,
    uncond: &TokenDistribution,
    token_id: TokenId,
    config: &ScoringConfig,
) -> Result<StepScore> {
    expect_strategy(config, Strategy::Cpmi)?;
    config.validate()?;
    let gate = gate_eval(cond, config)?;
    score_token(cond, Some(uncond), token_id, config, &gate)
}

/// Domain-conditional scoring: the same gated algebra, with both
/// distributions conditioned on the domain prompt. The gate entropy comes
/// from `cond_with_domain`, the distribution the model actually predicts
/// from at this step.
pub fn score_pmi_dc(
    cond_with_domain: &TokenDistribution,
    domain_cond: &TokenDistribution,
    token_id: TokenId,
    config: &ScoringConfig,
) -> Result<StepScore> {
    expect_strategy(config, Strategy::PmiDc)?;
    config.validate()?;
    let gate = gate_eval(cond_with_domain, config)?;
    score_token(cond_with_domain, Some(domain_cond), token_id, config, &gate)
}

fn expect_strategy(config: &ScoringConfig, expected: Strategy) -> Result<()> {
    if config.strategy != expected {
        return Err(CoreError::contract(format!(
            "config strategy is {}, expected {}",
            config.strategy, expected
        )));
    }
    Ok(())
}
