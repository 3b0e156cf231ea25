//! Autoregressive beam search parameterized by a scoring strategy.
//!
//! The search accumulates per-step scores (a plain sum, no length
//! normalization) and keeps full step-level traces, so any returned
//! hypothesis can be re-scored and audited. All tie-breaking is total and
//! deterministic: within a candidate set, higher cumulative score wins, then
//! the lexicographically smaller token sequence.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{ConditionalModel, ConditioningContext, TokenId};
use crate::prompt::DomainPrompt;
use crate::scoring::{gate_eval, score_token, ScoringConfig, StepScore};

/// A partial or finished output sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// Token ids, starting with bos.
    pub tokens: Vec<TokenId>,
    /// Sum of the per-step scores in `trace`.
    pub cum_score: f64,
    /// True once eos has been emitted; nothing follows eos.
    pub finished: bool,
    /// True for hypotheses cut off at max_length without emitting eos.
    pub truncated: bool,
    /// One entry per generated token (bos is not scored).
    pub trace: Vec<StepScore>,
}

impl Hypothesis {
    fn seed(bos: TokenId) -> Self {
        Hypothesis {
            tokens: vec![bos],
            cum_score: 0.0,
            finished: false,
            truncated: false,
            trace: Vec::new(),
        }
    }

    fn extend(&self, step: StepScore, eos: TokenId) -> Self {
        let mut tokens = Vec::with_capacity(self.tokens.len() + 1);
        tokens.extend_from_slice(&self.tokens);
        tokens.push(step.token_id);
        let mut trace = Vec::with_capacity(self.trace.len() + 1);
        trace.extend_from_slice(&self.trace);
        trace.push(step);
        Hypothesis {
            tokens,
            cum_score: self.cum_score + step.score,
            finished: step.token_id == eos,
            truncated: false,
            trace,
        }
    }

    /// Fraction of steps at which the penalty gate fired.
    pub fn gate_fire_rate(&self) -> f64 {
        if self.trace.is_empty() {
            return 0.0;
        }
        self.trace.iter().filter(|s| s.gate_fired).count() as f64 / self.trace.len() as f64
    }

    /// Mean per-step predictive entropy in nats.
    pub fn mean_step_entropy(&self) -> f64 {
        if self.trace.is_empty() {
            return 0.0;
        }
        self.trace.iter().map(|s| s.entropy).sum::<f64>() / self.trace.len() as f64
    }
}

/// Search-level configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub beam_width: usize,
    /// Maximum generated tokens after bos (eos included).
    pub max_length: usize,
    pub scoring: ScoringConfig,
    /// How many ranked hypotheses to return, <= beam_width.
    pub num_return: usize,
}

impl DecodeConfig {
    pub fn new(beam_width: usize, max_length: usize, scoring: ScoringConfig) -> Self {
        DecodeConfig { beam_width, max_length, scoring, num_return: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 {
            return Err(CoreError::contract("beam_width must be >= 1"));
        }
        if self.max_length == 0 {
            return Err(CoreError::contract("max_length must be >= 1"));
        }
        if self.num_return == 0 || self.num_return > self.beam_width {
            return Err(CoreError::contract(format!(
                "num_return must be in 1..=beam_width, got {} (beam_width {})",
                self.num_return, self.beam_width
            )));
        }
        self.scoring.validate()
    }
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { beam_width: 6, max_length: 64, scoring: ScoringConfig::default(), num_return: 1 }
    }
}

/// Ranked finished (or truncated) hypotheses plus the inputs they came from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecodeResult {
    pub hypotheses: Vec<Hypothesis>,
    pub source_text: Option<String>,
    pub domain_prompt: Option<DomainPrompt>,
    pub config: DecodeConfig,
}

impl DecodeResult {
    /// The top hypothesis (always present).
    pub fn best(&self) -> &Hypothesis {
        &self.hypotheses[0]
    }
}

/// The models and fixed inputs of one decode call.
struct Searcher<'a> {
    theta: &'a dyn ConditionalModel,
    phi: Option<&'a dyn ConditionalModel>,
    source_text: Option<&'a str>,
    domain_prompt: Option<&'a DomainPrompt>,
    scoring: ScoringConfig,
}

impl<'a> Searcher<'a> {
    /// Context for the generation model. Only the domain-conditional
    /// strategy feeds the domain prompt to it.
    fn theta_context(&self, prefix: Vec<TokenId>) -> ConditioningContext {
        let domain = if self.scoring.strategy.uses_domain() { self.domain_prompt } else { None };
        ConditioningContext::new(self.source_text, domain, prefix)
    }

    /// Context for the penalty model: the decoded prefix, plus the domain
    /// prompt under the domain-conditional strategy. Never the source.
    fn phi_context(&self, prefix: Vec<TokenId>) -> ConditioningContext {
        let domain = if self.scoring.strategy.uses_domain() { self.domain_prompt } else { None };
        ConditioningContext::new(None, domain, prefix)
    }

    /// Expands every unfinished beam over the full vocabulary, passes
    /// finished beams through, and keeps the top `beam_width` candidates.
    fn step(&self, beams: &[Hypothesis], beam_width: usize, step_index: usize) -> Result<Vec<Hypothesis>> {
        let vocab = self.theta.vocabulary();
        let vocab_size = vocab.len() as TokenId;
        let mut candidates: Vec<Hypothesis> = Vec::new();
        for beam in beams {
            if beam.finished {
                candidates.push(beam.clone());
                continue;
            }
            let cond = self
                .theta
                .next_distribution(&self.theta_context(beam.tokens.clone()))
                .map_err(|e| at_step(e, step_index, "generation model"))?;
            let uncond = match self.phi {
                Some(phi) if self.scoring.strategy.needs_penalty_model() => Some(
                    phi.next_distribution(&self.phi_context(beam.tokens.clone()))
                        .map_err(|e| at_step(e, step_index, "penalty model"))?,
                ),
                _ => None,
            };
            // One gate decision per beam per step; every expansion shares it.
            let gate = gate_eval(&cond, &self.scoring)?;
            for token_id in 0..vocab_size {
                let step = score_token(&cond, uncond.as_ref(), token_id, &self.scoring, &gate)?;
                candidates.push(beam.extend(step, vocab.eos()));
            }
        }
        candidates.sort_by(compare_in_step);
        candidates.truncate(beam_width);
        Ok(candidates)
    }
}

/// Within a step: higher cumulative score first, then lexicographically
/// smaller token sequence (which, for siblings, is the lower token id).
fn compare_in_step(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.cum_score.total_cmp(&a.cum_score).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Final ranking: by score, then naturally finished before truncated, then
/// lexicographically smaller sequence.
fn compare_final(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.cum_score
        .total_cmp(&a.cum_score)
        .then_with(|| b.finished.cmp(&a.finished))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

fn at_step(err: CoreError, step: usize, role: &str) -> CoreError {
    match err {
        CoreError::Provider { message, retriable } => CoreError::Provider {
            message: format!("{role} failed at decode step {step}: {message}"),
            retriable,
        },
        other => other,
    }
}

/// One expansion step over a set of beams; exposed for step-level tests.
pub fn step(
    beams: &[Hypothesis],
    theta: &dyn ConditionalModel,
    phi: Option<&dyn ConditionalModel>,
    source_text: Option<&str>,
    domain_prompt: Option<&DomainPrompt>,
    config: &DecodeConfig,
) -> Result<Vec<Hypothesis>> {
    if beams.iter().all(|b| b.finished) {
        return Err(CoreError::contract("step requires at least one unfinished beam"));
    }
    let searcher =
        Searcher { theta, phi, source_text, domain_prompt, scoring: config.scoring };
    searcher.step(beams, config.beam_width, 0)
}

/// Runs beam search and returns `num_return` ranked hypotheses. Hypotheses
/// that hit `max_length` without emitting eos are returned flagged as
/// truncated and rank after naturally finished ones of equal score.
pub fn decode(
    theta: &dyn ConditionalModel,
    phi: Option<&dyn ConditionalModel>,
    source_text: Option<&str>,
    domain_prompt: Option<&DomainPrompt>,
    config: &DecodeConfig,
) -> Result<DecodeResult> {
    config.validate()?;
    let strategy = config.scoring.strategy;
    let phi = match (strategy.needs_penalty_model(), phi) {
        (true, None) => {
            return Err(CoreError::contract(format!(
                "strategy {strategy} requires a penalty model"
            )))
        }
        (true, Some(m)) => Some(m),
        (false, _) => None,
    };
    if strategy.uses_domain() && domain_prompt.is_none() {
        return Err(CoreError::contract(format!(
            "strategy {strategy} requires a domain prompt (an empty one is allowed)"
        )));
    }
    if let Some(phi_model) = phi {
        if phi_model.vocabulary() != theta.vocabulary() {
            return Err(CoreError::VocabMismatch(
                "generation and penalty models must share a vocabulary".to_string(),
            ));
        }
    }

    let searcher = Searcher { theta, phi, source_text, domain_prompt, scoring: config.scoring };
    let vocab = theta.vocabulary();
    let mut beams = vec![Hypothesis::seed(vocab.bos())];
    for step_index in 0..config.max_length {
        if beams.iter().all(|b| b.finished) {
            break;
        }
        beams = searcher.step(&beams, config.beam_width, step_index)?;
    }
    for beam in &mut beams {
        if !beam.finished {
            beam.truncated = true;
        }
    }
    beams.sort_by(compare_final);
    beams.truncate(config.num_return);
    Ok(DecodeResult {
        hypotheses: beams,
        source_text: source_text.map(str::to_string),
        domain_prompt: domain_prompt.cloned(),
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::model::{TableModel, TokenDistribution, Vocabulary};

    /// Chain model: bos deterministically emits the given tokens, then eos.
    fn chain_model(vocab: &Vocabulary, source: Option<&str>, words: &[&str]) -> TableModel {
        let mut model =
            TableModel::new(vocab.clone(), TokenDistribution::uniform(vocab.len()).unwrap())
                .unwrap();
        let mut prefix = vec![vocab.bos()];
        for word in words {
            let id = vocab.id(word).unwrap();
            model
                .insert(
                    source,
                    None,
                    &prefix,
                    TokenDistribution::one_hot(vocab.len(), id).unwrap(),
                )
                .unwrap();
            prefix.push(id);
        }
        model
            .insert(
                source,
                None,
                &prefix,
                TokenDistribution::one_hot(vocab.len(), vocab.eos()).unwrap(),
            )
            .unwrap();
        model
    }

    #[test]
    fn probability_one_chain_decodes_exactly() {
        let vocab = Vocabulary::with_content(&["a", "b", "c"]).unwrap();
        let model = chain_model(&vocab, None, &["a", "b", "c"]);
        let config = DecodeConfig::new(1, 8, ScoringConfig::beam());
        let result = decode(&model, None, None, None, &config).unwrap();
        let best = result.best();
        let expected: Vec<TokenId> = vec![
            vocab.bos(),
            vocab.id("a").unwrap(),
            vocab.id("b").unwrap(),
            vocab.id("c").unwrap(),
            vocab.eos(),
        ];
        assert_eq!(best.tokens, expected);
        assert!(best.finished);
        assert!(!best.truncated);
        assert_abs_diff_eq!(best.cum_score, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn trace_sums_to_cum_score() {
        let vocab = Vocabulary::with_content(&["a", "b"]).unwrap();
        let model = chain_model(&vocab, None, &["a", "b"]);
        let config = DecodeConfig::new(2, 8, ScoringConfig::beam());
        let result = decode(&model, None, None, None, &config).unwrap();
        for hyp in &result.hypotheses {
            let total: f64 = hyp.trace.iter().map(|s| s.score).sum();
            assert_abs_diff_eq!(total, hyp.cum_score, epsilon = 1e-9);
            assert_eq!(hyp.trace.len(), hyp.tokens.len() - 1);
        }
    }

    #[test]
    fn single_beam_one_hot_keeps_one_expansion() {
        let vocab = Vocabulary::with_content(&["a"]).unwrap();
        let model = chain_model(&vocab, None, &["a"]);
        let seed = Hypothesis::seed(vocab.bos());
        let config = DecodeConfig::new(1, 4, ScoringConfig::beam());
        let next = step(&[seed], &model, None, None, None, &config).unwrap();
        assert_eq!(next.len(), 1);
        assert_eq!(next[0].tokens, vec![vocab.bos(), vocab.id("a").unwrap()]);
    }

    #[test]
    fn tied_expansions_prefer_lower_token_id() {
        let vocab = Vocabulary::with_content(&["a", "b"]).unwrap();
        let model =
            TableModel::new(vocab.clone(), TokenDistribution::uniform(vocab.len()).unwrap())
                .unwrap();
        let seed = Hypothesis::seed(vocab.bos());
        let config = DecodeConfig::new(2, 4, ScoringConfig::beam());
        let next = step(&[seed], &model, None, None, None, &config).unwrap();
        // All five expansions tie; ids 0 (bos) and 1 (eos) must win.
        assert_eq!(next[0].tokens, vec![vocab.bos(), 0]);
        assert_eq!(next[1].tokens, vec![vocab.bos(), 1]);
    }

    #[test]
    fn finished_beam_survives_unless_outscored() {
        let vocab = Vocabulary::with_content(&["a", "b"]).unwrap();
        let a = vocab.id("a").unwrap();
        let mut model =
            TableModel::new(vocab.clone(), TokenDistribution::uniform(vocab.len()).unwrap())
                .unwrap();
        // bos: eos gets 0.6, a gets 0.4 -> finished beam at score ln 0.6.
        let mut probs = vec![0.0; vocab.len()];
        probs[vocab.eos() as usize] = 0.6;
        probs[a as usize] = 0.4;
        model
            .insert(None, None, &[vocab.bos()], TokenDistribution::from_probs(&probs).unwrap())
            .unwrap();
        // From [bos, a]: b gets everything.
        let b = vocab.id("b").unwrap();
        model
            .insert(
                None,
                None,
                &[vocab.bos(), a],
                TokenDistribution::one_hot(vocab.len(), b).unwrap(),
            )
            .unwrap();
        let config = DecodeConfig::new(2, 4, ScoringConfig::beam());
        let seed = Hypothesis::seed(vocab.bos());
        let beams = step(&[seed], &model, None, None, None, &config).unwrap();
        assert!(beams[0].finished); // [bos, eos] at ln 0.6
        // Second step: the finished beam competes against [bos, a, b] at
        // ln 0.4 + ~0 and keeps its slot.
        let beams = step(&beams, &model, None, None, None, &config).unwrap();
        assert!(beams.iter().any(|h| h.finished && h.tokens == vec![vocab.bos(), vocab.eos()]));
    }

    #[test]
    fn truncated_hypotheses_are_flagged_and_rank_after_finished_on_ties() {
        let vocab = Vocabulary::with_content(&["a"]).unwrap();
        let a = vocab.id("a").unwrap();
        let mut model =
            TableModel::new(vocab.clone(), TokenDistribution::uniform(vocab.len()).unwrap())
                .unwrap();
        // bos -> a and eos tie at 0.5; a -> a forever.
        let mut probs = vec![0.0; vocab.len()];
        probs[a as usize] = 0.5;
        probs[vocab.eos() as usize] = 0.5;
        model
            .insert(None, None, &[vocab.bos()], TokenDistribution::from_probs(&probs).unwrap())
            .unwrap();
        let mut config = DecodeConfig::new(4, 1, ScoringConfig::beam());
        config.num_return = 2;
        let result = decode(&model, None, None, None, &config).unwrap();
        let finished = &result.hypotheses[0];
        let truncated = &result.hypotheses[1];
        assert!(finished.finished && !finished.truncated);
        assert!(!truncated.finished && truncated.truncated);
        assert_eq!(finished.cum_score.to_bits(), truncated.cum_score.to_bits());
    }

    #[test]
    fn missing_penalty_model_is_an_error() {
        let vocab = Vocabulary::with_content(&["a"]).unwrap();
        let model = chain_model(&vocab, None, &["a"]);
        let config = DecodeConfig::new(2, 4, ScoringConfig::pmi(0.1));
        assert!(decode(&model, None, None, None, &config).is_err());
    }

    #[test]
    fn missing_domain_prompt_is_an_error_for_domain_strategy() {
        let vocab = Vocabulary::with_content(&["a"]).unwrap();
        let model = chain_model(&vocab, None, &["a"]);
        let config = DecodeConfig::new(2, 4, ScoringConfig::pmi_dc(0.1, 1.0));
        assert!(decode(&model, Some(&model), None, None, &config).is_err());
    }

    #[test]
    fn vocabulary_mismatch_is_an_error() {
        let va = Vocabulary::with_content(&["a"]).unwrap();
        let vb = Vocabulary::with_content(&["b"]).unwrap();
        let ma = chain_model(&va, None, &["a"]);
        let mb = chain_model(&vb, None, &["b"]);
        let config = DecodeConfig::new(2, 4, ScoringConfig::pmi(0.1));
        let err = decode(&ma, Some(&mb), None, None, &config).unwrap_err();
        assert!(matches!(err, CoreError::VocabMismatch(_)));
    }

    #[test]
    fn zero_beam_is_an_error() {
        let vocab = Vocabulary::with_content(&["a"]).unwrap();
        let model = chain_model(&vocab, None, &["a"]);
        let config = DecodeConfig::new(0, 4, ScoringConfig::beam());
        assert!(decode(&model, None, None, None, &config).is_err());
    }

    #[test]
    fn provider_failures_name_the_failing_step() {
        /// Serves one step, then fails like a dropped provider connection.
        struct FlakyModel {
            vocab: Vocabulary,
        }

        impl ConditionalModel for FlakyModel {
            fn vocabulary(&self) -> &Vocabulary {
                &self.vocab
            }

            fn next_distribution(
                &self,
                ctx: &ConditioningContext,
            ) -> crate::error::Result<crate::model::TokenDistribution> {
                if ctx.prefix.len() > 1 {
                    return Err(CoreError::provider("connection reset", true));
                }
                TokenDistribution::one_hot(self.vocab.len(), 3)
            }
        }

        let vocab = Vocabulary::with_content(&["a"]).unwrap();
        let model = FlakyModel { vocab };
        let config = DecodeConfig::new(1, 4, ScoringConfig::beam());
        let err = decode(&model, None, None, None, &config).err().unwrap();
        match err {
            CoreError::Provider { message, retriable } => {
                assert!(retriable);
                assert!(message.contains("step 1"), "message was {message:?}");
            }
            other => panic!("expected a provider error, got {other}"),
        }
    }

    #[test]
    fn decode_is_deterministic() {
        let vocab = Vocabulary::with_content(&["a", "b", "c"]).unwrap();
        let model =
            TableModel::new(vocab.clone(), TokenDistribution::uniform(vocab.len()).unwrap())
                .unwrap();
        let mut config = DecodeConfig::new(3, 3, ScoringConfig::beam());
        config.num_return = 3;
        let a = decode(&model, None, Some("x"), None, &config).unwrap();
        let b = decode(&model, None, Some("x"), None, &config).unwrap();
        assert_eq!(a.hypotheses, b.hypotheses);
    }

    #[test]
    fn rescoring_a_trace_reproduces_cum_score() {
        let vocab = Vocabulary::with_content(&["a", "b"]).unwrap();
        let model = chain_model(&vocab, Some("doc"), &["a", "b"]);
        let config = DecodeConfig::new(2, 8, ScoringConfig::beam());
        let result = decode(&model, None, Some("doc"), None, &config).unwrap();
        let hyp = result.best();
        let mut total = 0.0;
        for (i, step) in hyp.trace.iter().enumerate() {
            let ctx = ConditioningContext::new(Some("doc"), None, hyp.tokens[..=i].to_vec());
            let dist = model.next_distribution(&ctx).unwrap();
            total += dist.logprob(step.token_id).unwrap();
        }
        assert_abs_diff_eq!(total, hyp.cum_score, epsilon = 1e-9);
    }
}
