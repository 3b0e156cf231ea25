//! Metric and model-primitive throughput: LCS overlap, keyword extraction,
//! entropy, and n-gram lookups.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pmidc_core::eval::rouge_l;
use pmidc_core::model::{corpus_to_ids, train_ngram, ConditionalModel, ConditioningContext, TokenDistribution, Vocabulary};
use pmidc_core::prompt::{extract_keywords, DocFrequencyTable};
use pmidc_core::scoring::entropy;

fn token_seq(seed: u64, len: usize, vocab: usize) -> Vec<String> {
    (0..len).map(|i| format!("w{}", (seed as usize * 31 + i * 17) % vocab)).collect()
}

fn rouge_benches(c: &mut Criterion) {
    let mut group = c.benchmark_group("rouge_l");
    for len in [16usize, 64, 256] {
        let a = token_seq(3, len, 40);
        let b = token_seq(7, len, 40);
        group.bench_with_input(BenchmarkId::from_parameter(len), &len, |bench, _| {
            bench.iter(|| rouge_l(&a, &b).unwrap())
        });
    }
    group.finish();
}

fn keyword_benches(c: &mut Criterion) {
    let docs: Vec<String> =
        (0..64).map(|i| token_seq(i, 120, 200).join(" ")).collect();
    let background = DocFrequencyTable::from_documents(docs.iter().map(String::as_str));
    let text = &docs[0];
    c.bench_function("extract_keywords_120_words", |b| {
        b.iter(|| extract_keywords(text, 3, &background).unwrap())
    });
}

fn entropy_bench(c: &mut Criterion) {
    let dist = TokenDistribution::uniform(50_000).unwrap();
    c.bench_function("entropy_50k", |b| b.iter(|| entropy(&dist).unwrap()));
}

fn ngram_bench(c: &mut Criterion) {
    let corpus: Vec<Vec<String>> = (0..32).map(|i| token_seq(i, 24, 60)).collect();
    let vocab = Vocabulary::from_corpus(corpus.iter().map(|s| s.as_slice())).unwrap();
    let ids = corpus_to_ids(&vocab, &corpus).unwrap();
    let model = train_ngram(&vocab, &ids, 3, 0.1).unwrap();
    let ctx = ConditioningContext::prefix_only(vec![vocab.bos(), 5, 9]);
    c.bench_function("ngram_next_distribution", |b| {
        b.iter(|| model.next_distribution(&ctx).unwrap())
    });
}

criterion_group!(benches, rouge_benches, keyword_benches, entropy_bench, ngram_bench);
criterion_main!(benches);
