//! Conditional token-probability models.
//!
//! Both model roles in the scoring rules implement the same interface: the
//! large source-conditioned generation model and the small penalty language
//! model differ only in what their conditioning context contains. The
//! built-in implementations (lookup tables and smoothed n-grams) are exact
//! and deterministic so every downstream behavior can be verified against
//! closed-form oracles.

mod context;
mod dist;
mod ngram;
mod table;
mod vocab;

pub use context::{canonical_key_parts, split_context_text, ConditioningContext};
pub use dist::{
    TokenDistribution, LOGPROB_SLACK, NORMALIZATION_TOLERANCE, PROB_FLOOR,
};
pub use ngram::{corpus_to_ids, read_ngram_corpus, train_ngram, NGramModel};
pub use table::{TableModel, TableModelFile, TransitionSpec};
pub use vocab::{TokenId, Vocabulary, VocabularyData, BOS_TOKEN, EOS_TOKEN, PAD_TOKEN};

use crate::error::Result;

/// A conditional next-token model. Implementations are immutable after
/// construction and safe to share across concurrent decode jobs.
///
/// `next_distribution` must be pure: identical contexts yield identical
/// (bitwise-equal) distributions.
pub trait ConditionalModel: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;

    fn next_distribution(&self, ctx: &ConditioningContext) -> Result<TokenDistribution>;
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    /// Independent check of the smoothed relative-frequency definition:
    /// recount the raw corpus for one context and compare.
    fn brute_force_prob(
        corpus: &[Vec<TokenId>],
        bos: TokenId,
        order: usize,
        alpha: f64,
        vocab_size: usize,
        context: &[TokenId],
        token: TokenId,
    ) -> f64 {
        let mut hit = 0u64;
        let mut total = 0u64;
        for seq in corpus {
            let mut padded = vec![bos; order - 1];
            padded.extend(seq);
            for pos in (order - 1)..padded.len() {
                if &padded[pos + 1 - order..pos] == context {
                    total += 1;
                    if padded[pos] == token {
                        hit += 1;
                    }
                }
            }
        }
        (hit as f64 + alpha) / (total as f64 + alpha * vocab_size as f64)
    }

    proptest! {
        #[test]
        fn ngram_matches_brute_force(
            order in 1usize..=3,
            content_size in 1usize..=5,
            seqs in prop::collection::vec(
                prop::collection::vec(0usize..5, 1..6),
                1..4
            ),
            alpha in 0.25f64..2.0,
            prefix in prop::collection::vec(0usize..5, 0..3),
        ) {
            let content: Vec<String> = (0..content_size).map(|i| format!("t{i}")).collect();
            let refs: Vec<&str> = content.iter().map(String::as_str).collect();
            let vocab = Vocabulary::with_content(&refs).unwrap();
            let n = vocab.len();
            let to_id = |raw: usize| (3 + (raw % content_size)) as TokenId;
            let corpus: Vec<Vec<TokenId>> =
                seqs.iter().map(|s| s.iter().map(|&t| to_id(t)).collect()).collect();
            let model = train_ngram(&vocab, &corpus, order, alpha).unwrap();

            let mut ctx_prefix = vec![vocab.bos()];
            ctx_prefix.extend(prefix.iter().map(|&t| to_id(t)));
            let ctx = ConditioningContext::prefix_only(ctx_prefix.clone());
            let dist = model.next_distribution(&ctx).unwrap();

            let width = order - 1;
            let mut window = vec![vocab.bos(); width.saturating_sub(ctx_prefix.len())];
            let start = ctx_prefix.len().saturating_sub(width);
            window.extend(&ctx_prefix[start..]);

            for id in 0..n as TokenId {
                let expected =
                    brute_force_prob(&corpus, vocab.bos(), order, alpha, n, &window, id);
                let got = dist.logprob(id).unwrap().exp();
                prop_assert!((got - expected).abs() < 1e-9,
                    "p({id}|{window:?}) = {got}, expected {expected}");
            }
        }

        #[test]
        fn models_are_deterministic(seed_tokens in prop::collection::vec(0usize..3, 1..5)) {
            let vocab = Vocabulary::with_content(&["a", "b", "c"]).unwrap();
            let corpus: Vec<Vec<TokenId>> =
                vec![seed_tokens.iter().map(|&t| (3 + t) as TokenId).collect()];
            let model = train_ngram(&vocab, &corpus, 2, 1.0).unwrap();
            let ctx = ConditioningContext::prefix_only(vec![vocab.bos()]);
            let first = model.next_distribution(&ctx).unwrap();
            let second = model.next_distribution(&ctx).unwrap();
            for (a, b) in first.logprobs().iter().zip(second.logprobs()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn every_distribution_normalizes(
            seqs in prop::collection::vec(prop::collection::vec(0usize..4, 1..5), 1..3),
            order in 1usize..=3,
        ) {
            let vocab = Vocabulary::with_content(&["a", "b", "c", "d"]).unwrap();
            let corpus: Vec<Vec<TokenId>> =
                seqs.iter().map(|s| s.iter().map(|&t| (3 + t) as TokenId).collect()).collect();
            let model = train_ngram(&vocab, &corpus, order, 1.0).unwrap();
            let ctx = ConditioningContext::prefix_only(vec![vocab.bos()]);
            let dist = model.next_distribution(&ctx).unwrap();
            let sum: f64 = dist.logprobs().iter().map(|lp| lp.exp()).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-6);
        }
    }
}
