//! Built-in deterministic fixtures: toy models and corpora used by the test
//! suites, the acceptance harness, and the benchmarks.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::CorpusRecord;
use crate::model::{
    ConditionalModel, TableModel, TableModelFile, TokenId, TransitionSpec, Vocabulary,
    VocabularyData,
};
use crate::prompt::{DocFrequencyTable, DomainPrompt};

fn vocab_data(content: &[String]) -> VocabularyData {
    let mut tokens = vec!["<bos>".to_string(), "<eos>".to_string(), "<pad>".to_string()];
    tokens.extend(content.iter().cloned());
    VocabularyData { tokens, bos: 0, eos: 1, pad: 2 }
}

/// A scenario where plain likelihood prefers a domain-template continuation
/// while domain-conditional scoring recovers the source-consistent one.
///
/// The generation model, conditioned on a source that says the outlook is
/// good, is torn at the second step between "warning" (barely ahead, the
/// word the domain template favors) and "successful" (what the source says),
/// with enough spread elsewhere that the step's predictive entropy exceeds
/// the default gate threshold. The penalty model knows "warning" is very
/// likely *given the domain keywords* and "successful" is not, so the
/// domain-conditional penalty flips the choice; the unconditional penalty is
/// too flat to do so.
pub struct ContrastFixture {
    pub theta_file: TableModelFile,
    pub phi_file: TableModelFile,
    pub theta: TableModel,
    pub phi: TableModel,
    pub vocab: Vocabulary,
    pub source: String,
    pub domain: DomainPrompt,
    /// Background document-frequency table under which the fixture source's
    /// top-3 keywords are exactly the domain terms above.
    pub background: DocFrequencyTable,
    /// Summary chosen by plain beam search and by gated scoring without
    /// domain conditioning.
    pub template_summary: String,
    /// Summary chosen by domain-conditional scoring at the shipped defaults.
    pub grounded_summary: String,
}

pub fn contrast_fixture() -> ContrastFixture {
    let mut content: Vec<String> = ["the", "warning", "successful", "economy", "businesses", "gdp"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    // Pad the vocabulary to 64 tokens so a spread step can clear the
    // default entropy threshold (3.5987 nats needs e^3.6 ~ 37 live tokens).
    for i in 0..55 {
        content.push(format!("f{i:02}"));
    }
    let vocabulary = vocab_data(&content);
    let all_tokens: Vec<String> = vocabulary.tokens.clone();
    debug_assert_eq!(all_tokens.len(), 64);

    let source =
        "economy data shows many businesses will have a successful gdp year".to_string();
    // Top-3 tf-idf keywords of the source under the background table below
    // (equal scores, lexicographic ties).
    let domain = DomainPrompt::render("that is to say", "businesses, economy, gdp");
    let background = DocFrequencyTable::new(
        100,
        [
            ("businesses", 1),
            ("economy", 1),
            ("gdp", 1),
            ("data", 80),
            ("shows", 80),
            ("many", 80),
            ("successful", 80),
            ("year", 80),
        ]
        .into_iter()
        .map(|(term, df)| (term.to_string(), df))
        .collect(),
    );

    // Second-step distribution of the generation model: "warning" barely
    // ahead of "successful", the rest spread thin. H ~ 3.96 nats.
    let mut spread: BTreeMap<String, f64> = BTreeMap::new();
    let rest = (1.0 - 0.10 - 0.09) / 62.0;
    for token in &all_tokens {
        spread.insert(token.clone(), rest);
    }
    spread.insert("warning".into(), 0.10);
    spread.insert("successful".into(), 0.09);

    let one_hot = |token: &str| BTreeMap::from([(token.to_string(), 1.0)]);

    let mut theta_transitions = Vec::new();
    for domain_key in [None, Some(domain.rendered.clone())] {
        theta_transitions.push(TransitionSpec {
            source: Some(source.clone()),
            domain: domain_key.clone(),
            prefix: vec!["<bos>".into()],
            next: one_hot("the"),
        });
        theta_transitions.push(TransitionSpec {
            source: Some(source.clone()),
            domain: domain_key.clone(),
            prefix: vec!["<bos>".into(), "the".into()],
            next: spread.clone(),
        });
        for continuation in ["warning", "successful"] {
            theta_transitions.push(TransitionSpec {
                source: Some(source.clone()),
                domain: domain_key.clone(),
                prefix: vec!["<bos>".into(), "the".into(), continuation.into()],
                next: one_hot("<eos>"),
            });
        }
    }
    let theta_file =
        TableModelFile { vocabulary: vocabulary.clone(), default: None, transitions: theta_transitions };

    // Penalty model. Without the domain prompt it is nearly flat between the
    // two candidates; with the domain keywords it strongly favors "warning".
    let mut uncond: BTreeMap<String, f64> = BTreeMap::new();
    let rest = (1.0 - 0.10 - 0.08) / 62.0;
    for token in &all_tokens {
        uncond.insert(token.clone(), rest);
    }
    uncond.insert("warning".into(), 0.10);
    uncond.insert("successful".into(), 0.08);

    let mut domain_cond: BTreeMap<String, f64> = BTreeMap::new();
    let rest = (1.0 - 0.5 - 0.001 - 0.2) / 61.0;
    for token in &all_tokens {
        domain_cond.insert(token.clone(), rest);
    }
    domain_cond.insert("warning".into(), 0.5);
    domain_cond.insert("successful".into(), 0.001);
    domain_cond.insert("economy".into(), 0.2);

    let phi_file = TableModelFile {
        vocabulary: vocabulary.clone(),
        default: None,
        transitions: vec![
            TransitionSpec {
                source: None,
                domain: None,
                prefix: vec!["<bos>".into(), "the".into()],
                next: uncond,
            },
            TransitionSpec {
                source: None,
                domain: Some(domain.rendered.clone()),
                prefix: vec!["<bos>".into(), "the".into()],
                next: domain_cond,
            },
        ],
    };

    let theta = theta_file.build().expect("fixture model is valid");
    let phi = phi_file.build().expect("fixture model is valid");
    let vocab = theta.vocabulary().clone();
    ContrastFixture {
        theta_file,
        phi_file,
        theta,
        phi,
        vocab,
        source,
        domain,
        background,
        template_summary: "the warning".to_string(),
        grounded_summary: "the successful".to_string(),
    }
}

/// A deterministic multi-document corpus with matching table models, used by
/// the command-line tests. Each document decodes to a three-step chain whose
/// first step is spread enough to fire a low gate threshold.
pub struct SyntheticCorpus {
    pub theta_file: TableModelFile,
    pub phi_file: TableModelFile,
    pub records: Vec<CorpusRecord>,
}

pub fn synthetic_corpus(n_docs: usize) -> SyntheticCorpus {
    let content: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
    let vocabulary = vocab_data(&content);
    let word = |i: usize| format!("w{}", i % 12);

    let mut theta_transitions = Vec::new();
    let mut records = Vec::new();
    for doc in 0..n_docs {
        let source = format!("doc{doc} covers {} and {} today", word(doc), word(doc + 3));
        let reference = format!("{} {}", word(doc), word(doc + 3));
        // First step: three-way spread (H ~ ln 3) with a deterministic winner.
        let first = BTreeMap::from([
            (word(doc), 0.34),
            (word(doc + 3), 0.33),
            (word(doc + 6), 0.33),
        ]);
        theta_transitions.push(TransitionSpec {
            source: Some(source.clone()),
            domain: None,
            prefix: vec!["<bos>".into()],
            next: first,
        });
        theta_transitions.push(TransitionSpec {
            source: Some(source.clone()),
            domain: None,
            prefix: vec!["<bos>".into(), word(doc)],
            next: BTreeMap::from([(word(doc + 3), 1.0)]),
        });
        theta_transitions.push(TransitionSpec {
            source: Some(source.clone()),
            domain: None,
            prefix: vec!["<bos>".into(), word(doc), word(doc + 3)],
            next: BTreeMap::from([("<eos>".to_string(), 1.0)]),
        });
        records.push(CorpusRecord { id: format!("doc{doc}"), source, reference: Some(reference) });
    }
    let theta_file =
        TableModelFile { vocabulary: vocabulary.clone(), default: None, transitions: theta_transitions };

    // Penalty model: one non-flat row so penalties vary across tokens.
    let mut phi_first: BTreeMap<String, f64> = BTreeMap::new();
    for (i, token) in content.iter().enumerate() {
        phi_first.insert(token.clone(), 1.0 + i as f64);
    }
    let phi_file = TableModelFile {
        vocabulary,
        default: None,
        transitions: vec![TransitionSpec {
            source: None,
            domain: None,
            prefix: vec!["<bos>".into()],
            next: phi_first,
        }],
    };

    SyntheticCorpus { theta_file, phi_file, records }
}

/// Settings for random table-model generation.
#[derive(Clone, Debug)]
pub struct RandomModelConfig {
    /// Total vocabulary size including the three specials.
    pub vocab_size: usize,
    /// Longest prefix (in generated tokens after bos) that gets an explicit
    /// transition row; deeper contexts fall back to the default row.
    pub max_depth: usize,
    pub source: Option<String>,
    /// Rendered domain string installed alongside the domainless keys.
    pub domain_rendered: Option<String>,
    /// When true, the domain-keyed rows reuse the domainless distributions,
    /// so domain conditioning provably changes nothing. When false they are
    /// independent draws.
    pub mirror_domain: bool,
}

/// A random generation/penalty model pair over the same vocabulary, with
/// transition rows for every prefix up to the configured depth.
pub fn random_model_pair(seed: u64, config: &RandomModelConfig) -> (TableModel, TableModel) {
    assert!(config.vocab_size >= 4, "need at least one content token");
    let content: Vec<String> = (0..config.vocab_size - 3).map(|i| format!("t{i}")).collect();
    let refs: Vec<&str> = content.iter().map(String::as_str).collect();
    let vocab = Vocabulary::with_content(&refs).expect("valid content");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let random_dist = |rng: &mut ChaCha8Rng| {
        let mut probs: Vec<f64> = (0..vocab.len())
            .map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.05..1.0) })
            .collect();
        if probs.iter().all(|&p| p == 0.0) {
            probs[0] = 1.0;
        }
        crate::model::TokenDistribution::from_probs(&probs).expect("valid masses")
    };

    let mut theta = TableModel::new(
        vocab.clone(),
        crate::model::TokenDistribution::uniform(vocab.len()).unwrap(),
    )
    .unwrap();
    let mut phi = TableModel::new(
        vocab.clone(),
        crate::model::TokenDistribution::uniform(vocab.len()).unwrap(),
    )
    .unwrap();

    // Every prefix up to max_depth that does not pass through eos.
    let mut prefixes: Vec<Vec<TokenId>> = vec![vec![vocab.bos()]];
    let mut frontier: Vec<Vec<TokenId>> = prefixes.clone();
    for _ in 0..config.max_depth.saturating_sub(1) {
        let mut next_frontier = Vec::new();
        for prefix in &frontier {
            for id in 0..vocab.len() as TokenId {
                if id == vocab.eos() {
                    continue;
                }
                let mut extended = prefix.clone();
                extended.push(id);
                next_frontier.push(extended);
            }
        }
        prefixes.extend(next_frontier.iter().cloned());
        frontier = next_frontier;
    }

    let source = config.source.as_deref();
    let domain = config.domain_rendered.as_deref();
    for prefix in &prefixes {
        let theta_plain = random_dist(&mut rng);
        let phi_plain = random_dist(&mut rng);
        theta.insert(source, None, prefix, theta_plain.clone()).unwrap();
        phi.insert(None, None, prefix, phi_plain.clone()).unwrap();
        if let Some(domain_rendered) = domain {
            let (theta_dom, phi_dom) = if config.mirror_domain {
                (theta_plain, phi_plain)
            } else {
                (random_dist(&mut rng), random_dist(&mut rng))
            };
            theta.insert(source, Some(domain_rendered), prefix, theta_dom).unwrap();
            phi.insert(None, Some(domain_rendered), prefix, phi_dom).unwrap();
        }
    }
    (theta, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{decode, DecodeConfig};
    use crate::scoring::{ScoringConfig, BART_DEFAULTS};

    #[test]
    fn contrast_fixture_flips_under_domain_conditioning() {
        let fx = contrast_fixture();
        let beam_config = DecodeConfig::new(4, 4, ScoringConfig::beam());
        let beam = decode(&fx.theta, None, Some(&fx.source), None, &beam_config).unwrap();
        assert_eq!(fx.vocab.detokenize(&beam.best().tokens).unwrap(), fx.template_summary);

        let dc_config = DecodeConfig::new(
            4,
            4,
            ScoringConfig::pmi_dc(BART_DEFAULTS.lambda, BART_DEFAULTS.tau),
        );
        let dc =
            decode(&fx.theta, Some(&fx.phi), Some(&fx.source), Some(&fx.domain), &dc_config)
                .unwrap();
        assert_eq!(fx.vocab.detokenize(&dc.best().tokens).unwrap(), fx.grounded_summary);
    }

    #[test]
    fn contrast_fixture_keywords_come_from_the_real_extractor() {
        let fx = contrast_fixture();
        let got = crate::prompt::extract_keywords(&fx.source, 3, &fx.background).unwrap();
        assert_eq!(got.keywords.join(", "), fx.domain.domain_text);
        assert!(!got.shortfall);
        let built = crate::prompt::build_domain_prompt(
            &crate::prompt::DomainSpec::default(),
            "that is to say",
            &fx.source,
            &fx.background,
        )
        .unwrap();
        assert_eq!(built, fx.domain);
    }

    #[test]
    fn synthetic_corpus_chains_decode_deterministically() {
        let fx = synthetic_corpus(3);
        let theta = fx.theta_file.build().unwrap();
        let config = DecodeConfig::new(3, 5, ScoringConfig::beam());
        for (i, record) in fx.records.iter().enumerate() {
            let result = decode(&theta, None, Some(&record.source), None, &config).unwrap();
            let text = theta.vocabulary().detokenize(&result.best().tokens).unwrap();
            assert_eq!(text, format!("w{} w{}", i % 12, (i + 3) % 12));
        }
    }

    #[test]
    fn random_model_pair_is_seed_deterministic() {
        let config = RandomModelConfig {
            vocab_size: 5,
            max_depth: 3,
            source: Some("s".into()),
            domain_rendered: Some("d".into()),
            mirror_domain: false,
        };
        let (t1, p1) = random_model_pair(11, &config);
        let (t2, p2) = random_model_pair(11, &config);
        assert_eq!(t1, t2);
        assert_eq!(p1, p2);
    }
}
