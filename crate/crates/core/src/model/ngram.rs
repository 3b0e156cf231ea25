//! Additively smoothed n-gram language model, the built-in stand-in for the
//! small penalty model.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::model::context::ConditioningContext;
use crate::model::dist::TokenDistribution;
use crate::model::vocab::{TokenId, Vocabulary};
use crate::model::ConditionalModel;

/// Per-context token counts.
#[derive(Clone, Debug, Default)]
struct ContextCounts {
    by_token: HashMap<TokenId, u64>,
    total: u64,
}

/// An order-n model with additive smoothing: for a context c,
/// `p(y | c) = (count(c, y) + alpha) / (total(c) + alpha * |V|)`.
///
/// Conditioning text (source or domain prompt) is whitespace-tokenized into
/// vocabulary ids and prepended to the prefix; contexts shorter than n-1 are
/// padded with bos on the left.
#[derive(Clone, Debug)]
pub struct NGramModel {
    vocabulary: Vocabulary,
    order: usize,
    alpha: f64,
    counts: HashMap<Vec<TokenId>, ContextCounts>,
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Conditional distribution for an explicit (n-1)-token context.
    fn distribution_for(&self, context: &[TokenId]) -> Result<TokenDistribution> {
        let empty = ContextCounts::default();
        let counts = self.counts.get(context).unwrap_or(&empty);
        let denom = counts.total as f64 + self.alpha * self.vocabulary.len() as f64;
        let probs: Vec<f64> = (0..self.vocabulary.len() as TokenId)
            .map(|id| {
                let c = counts.by_token.get(&id).copied().unwrap_or(0);
                (c as f64 + self.alpha) / denom
            })
            .collect();
        TokenDistribution::from_probs(&probs)
    }

    /// The last n-1 tokens of the flattened conditioning stream, left-padded
    /// with bos.
    fn context_window(&self, ctx: &ConditioningContext) -> Vec<TokenId> {
        let mut stream: Vec<TokenId> = Vec::new();
        if let Some(source) = &ctx.source_text {
            stream.extend(self.vocabulary.tokenize_known(source));
        }
        stream.extend(self.vocabulary.tokenize_known(ctx.rendered_domain()));
        stream.extend(&ctx.prefix);
        let width = self.order - 1;
        let mut window = vec![self.vocabulary.bos(); width.saturating_sub(stream.len())];
        let start = stream.len().saturating_sub(width);
        window.extend(&stream[start..]);
        window
    }
}

impl ConditionalModel for NGramModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    fn next_distribution(&self, ctx: &ConditioningContext) -> Result<TokenDistribution> {
        ctx.validate(&self.vocabulary)?;
        self.distribution_for(&self.context_window(ctx))
    }
}

/// Trains an n-gram model on token-id sequences. Each sequence is padded on
/// the left with n-1 bos tokens; counts cover exactly the corpus tokens.
pub fn train_ngram(
    vocabulary: &Vocabulary,
    corpus: &[Vec<TokenId>],
    order: usize,
    alpha: f64,
) -> Result<NGramModel> {
    if order < 1 {
        return Err(CoreError::contract("n-gram order must be >= 1"));
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(CoreError::contract(format!("smoothing alpha must be positive, got {alpha}")));
    }
    if corpus.is_empty() {
        return Err(CoreError::contract("empty n-gram corpus"));
    }
    let mut counts: HashMap<Vec<TokenId>, ContextCounts> = HashMap::new();
    for seq in corpus {
        if seq.is_empty() {
            return Err(CoreError::contract("empty sequence in n-gram corpus"));
        }
        vocabulary.check_ids(seq)?;
        let mut padded = vec![vocabulary.bos(); order - 1];
        padded.extend(seq);
        for pos in (order - 1)..padded.len() {
            let context = padded[pos + 1 - order..pos].to_vec();
            let entry = counts.entry(context).or_default();
            *entry.by_token.entry(padded[pos]).or_insert(0) += 1;
            entry.total += 1;
        }
    }
    Ok(NGramModel { vocabulary: vocabulary.clone(), order, alpha, counts })
}

/// Reads an n-gram corpus file: UTF-8 text, one whitespace-tokenized sequence
/// per line. Blank lines are skipped.
pub fn read_ngram_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let file = std::fs::File::open(path)?;
    let mut corpus = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if !tokens.is_empty() {
            corpus.push(tokens);
        }
    }
    if corpus.is_empty() {
        return Err(CoreError::contract("empty n-gram corpus"));
    }
    Ok(corpus)
}

/// Maps token strings to ids, requiring every token to be in the vocabulary.
pub fn corpus_to_ids(vocabulary: &Vocabulary, corpus: &[Vec<String>]) -> Result<Vec<Vec<TokenId>>> {
    corpus
        .iter()
        .map(|seq| {
            seq.iter()
                .map(|t| {
                    vocabulary
                        .id(t)
                        .ok_or_else(|| CoreError::contract(format!("token {t:?} not in vocabulary")))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn vocab_ab() -> Vocabulary {
        Vocabulary::with_content(&["a", "b"]).unwrap()
    }

    #[test]
    fn bigram_hand_count() {
        // Corpus "a b a b": context a -> b twice, total 2; |V| = 5, alpha = 1.
        let v = vocab_ab();
        let a = v.id("a").unwrap();
        let b = v.id("b").unwrap();
        let model = train_ngram(&v, &[vec![a, b, a, b]], 2, 1.0).unwrap();
        let ctx = ConditioningContext::prefix_only(vec![v.bos(), a]);
        let dist = model.next_distribution(&ctx).unwrap();
        assert_abs_diff_eq!(dist.logprob(b).unwrap().exp(), 3.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.logprob(a).unwrap().exp(), 1.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.logprob(v.eos()).unwrap().exp(), 1.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn unigram_hand_count() {
        // Single-token corpus ["a"]: p(a) = (1 + 1) / (1 + 5).
        let v = vocab_ab();
        let a = v.id("a").unwrap();
        let model = train_ngram(&v, &[vec![a]], 1, 1.0).unwrap();
        let ctx = ConditioningContext::prefix_only(vec![v.bos()]);
        let dist = model.next_distribution(&ctx).unwrap();
        assert_abs_diff_eq!(dist.logprob(a).unwrap().exp(), 2.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.logprob(v.pad()).unwrap().exp(), 1.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn large_alpha_approaches_uniform() {
        let v = vocab_ab();
        let a = v.id("a").unwrap();
        let model = train_ngram(&v, &[vec![a; 50]], 1, 1e9).unwrap();
        let ctx = ConditioningContext::prefix_only(vec![v.bos()]);
        let dist = model.next_distribution(&ctx).unwrap();
        let uniform = 1.0 / v.len() as f64;
        for id in 0..v.len() as TokenId {
            assert_abs_diff_eq!(dist.logprob(id).unwrap().exp(), uniform, epsilon = 1e-7);
        }
    }

    #[test]
    fn bos_padding_covers_short_contexts() {
        let v = vocab_ab();
        let a = v.id("a").unwrap();
        // Order 3 on a 1-token sequence: the only counted context is [bos, bos].
        let model = train_ngram(&v, &[vec![a]], 3, 0.5).unwrap();
        let ctx = ConditioningContext::prefix_only(vec![v.bos()]);
        let dist = model.next_distribution(&ctx).unwrap();
        assert_abs_diff_eq!(
            dist.logprob(a).unwrap().exp(),
            (1.0 + 0.5) / (1.0 + 0.5 * 5.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn conditioning_text_shifts_the_window() {
        let v = vocab_ab();
        let a = v.id("a").unwrap();
        let b = v.id("b").unwrap();
        let model = train_ngram(&v, &[vec![a, b], vec![b, b]], 2, 1.0).unwrap();
        // Domain text "b" puts b in the bigram window even with an empty prefix.
        let with_domain = ConditioningContext::new(
            None,
            Some(&crate::prompt::DomainPrompt::render("", "b")),
            vec![],
        );
        let dist = model.next_distribution(&with_domain).unwrap();
        // Context [b]: b seen once (from "b b"), total 1.
        assert_abs_diff_eq!(dist.logprob(b).unwrap().exp(), 2.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn train_rejects_bad_inputs() {
        let v = vocab_ab();
        assert!(train_ngram(&v, &[], 2, 1.0).is_err());
        assert!(train_ngram(&v, &[vec![]], 2, 1.0).is_err());
        assert!(train_ngram(&v, &[vec![3]], 0, 1.0).is_err());
        assert!(train_ngram(&v, &[vec![3]], 2, 0.0).is_err());
    }

    #[test]
    fn disjoint_corpora_share_only_padding_contexts() {
        let v = Vocabulary::with_content(&["a", "b", "c", "d"]).unwrap();
        let a = v.id("a").unwrap();
        let b = v.id("b").unwrap();
        let c = v.id("c").unwrap();
        let d = v.id("d").unwrap();
        let m1 = train_ngram(&v, &[vec![a, b]], 2, 1.0).unwrap();
        let m2 = train_ngram(&v, &[vec![c, d]], 2, 1.0).unwrap();
        let keys1: std::collections::HashSet<_> = m1.counts.keys().cloned().collect();
        let keys2: std::collections::HashSet<_> = m2.counts.keys().cloned().collect();
        let shared: Vec<_> = keys1.intersection(&keys2).collect();
        assert_eq!(shared, vec![&vec![v.bos()]]);
    }
}
