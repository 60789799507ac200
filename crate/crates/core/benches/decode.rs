//! Full constrained-decode loop against the mock backend.

use criterion::{criterion_group, criterion_main, Criterion};
use verbatim_core::backend::mock_corpus_from_texts;
use verbatim_core::{
    build_highlight_grammar, decode_constrained, tokenize_words, MockNgramBackend, Recognizer,
    SamplerConfig,
};

fn bench_decode(c: &mut Criterion) {
    let body = "the night felt endless and every thought kept circling back nobody answered \
                when it mattered most quiet rooms hold loud minds";
    let corpus = mock_corpus_from_texts([body]);
    let backend = MockNgramBackend::from_corpus(&corpus, 3, 0.1).unwrap();
    let grammar = build_highlight_grammar(&tokenize_words(body).unwrap()).unwrap();
    let recognizer = Recognizer::compile(&grammar).unwrap();

    let mut group = c.benchmark_group("decode_21_word_post");
    group.bench_function("constrained", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed = seed.wrapping_add(1);
            let cfg = SamplerConfig {
                seed,
                max_tokens: 64,
                ..Default::default()
            };
            decode_constrained(&backend, &[], Some(&recognizer), &cfg).unwrap()
        })
    });
    group.bench_function("unconstrained", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed = seed.wrapping_add(1);
            let cfg = SamplerConfig {
                seed,
                max_tokens: 64,
                ..Default::default()
            };
            decode_constrained(&backend, &[], None, &cfg).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_decode);
criterion_main!(benches);
