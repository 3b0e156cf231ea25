//! Decode throughput across scoring strategies.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pmidc_core::beam::{decode, DecodeConfig};
use pmidc_core::model::{corpus_to_ids, train_ngram, NGramModel, Vocabulary};
use pmidc_core::prompt::DomainPrompt;
use pmidc_core::scoring::{ScoringConfig, BART_DEFAULTS};

/// N-gram models serve every context, which makes them convenient
/// open-vocabulary stand-ins for benchmarking the search loop.
fn bench_models() -> (NGramModel, NGramModel, Vocabulary) {
    let words: Vec<String> = (0..47).map(|i| format!("w{i}")).collect();
    let mut corpus: Vec<Vec<String>> = Vec::new();
    for start in 0..24usize {
        let seq: Vec<String> =
            (0..12).map(|k| words[(start * 5 + k * 3) % words.len()].clone()).collect();
        corpus.push(seq);
    }
    let vocab = Vocabulary::from_corpus(corpus.iter().map(|s| s.as_slice())).unwrap();
    let ids = corpus_to_ids(&vocab, &corpus).unwrap();
    let theta = train_ngram(&vocab, &ids, 3, 0.05).unwrap();
    let phi = train_ngram(&vocab, &ids, 2, 0.5).unwrap();
    (theta, phi, vocab)
}

fn strategy_benches(c: &mut Criterion) {
    let (theta, phi, _vocab) = bench_models();
    let domain = DomainPrompt::render("that is to say", "w1, w7, w13");
    let mut group = c.benchmark_group("decode");
    for (name, scoring) in [
        ("beam", ScoringConfig::beam()),
        ("pmi", ScoringConfig::pmi(BART_DEFAULTS.lambda)),
        ("cpmi", ScoringConfig::cpmi(BART_DEFAULTS.lambda, 2.0)),
        ("pmi_dc", ScoringConfig::pmi_dc(BART_DEFAULTS.lambda, 2.0)),
    ] {
        let config = DecodeConfig::new(4, 16, scoring);
        let domain_arg = scoring.strategy.uses_domain().then_some(&domain);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                decode(&theta, Some(&phi), Some("w1 w2 w3 source"), domain_arg, &config).unwrap()
            })
        });
    }
    group.finish();
}

fn width_benches(c: &mut Criterion) {
    let (theta, phi, _vocab) = bench_models();
    let mut group = c.benchmark_group("beam_width");
    for width in [1usize, 4, 8, 16] {
        let config = DecodeConfig::new(width, 12, ScoringConfig::cpmi(BART_DEFAULTS.lambda, 2.0));
        group.bench_with_input(BenchmarkId::from_parameter(width), &config, |b, config| {
            b.iter(|| decode(&theta, Some(&phi), Some("w1 w2 w3 source"), None, config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, strategy_benches, width_benches);
criterion_main!(benches);
