use std::hint::black_box;

use chrono::Utc;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pantry_bench::{bundled_corpus, QUERIES};
use pantry_core::assistant::{Assistant, Session};
use pantry_core::retriever::{retrieve, RetrieveRequest};
use pantry_core::vector::{stub_embed, VectorIndex, STUB_DIM};
use pantry_core::{extract_constraints, Gazetteer};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_index(n: usize) -> VectorIndex {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let words: Vec<String> = (0..2000).map(|i| format!("w{i}")).collect();
    let mut index = VectorIndex::new(STUB_DIM, "bench");
    for i in 0..n {
        let text: Vec<&str> = (0..12).map(|_| words.choose(&mut rng).unwrap().as_str()).collect();
        index.insert(format!("d{i:06}"), &stub_embed(&text.join(" "), STUB_DIM)).unwrap();
    }
    index
}

fn search(c: &mut Criterion) {
    let mut group = c.benchmark_group("search_k10");
    for n in [500, 5_000, 50_000] {
        let index = random_index(n);
        let q = stub_embed("w1 w20 w300 w4000", STUB_DIM);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| index.search(black_box(&q), 10, None).unwrap())
        });
    }
    group.finish();
}

fn parse(c: &mut Criterion) {
    let gaz = Gazetteer::kansas();
    c.bench_function("extract_constraints", |b| {
        b.iter(|| {
            for q in QUERIES {
                black_box(extract_constraints(black_box(q), &gaz));
            }
        })
    });
}

fn end_to_end(c: &mut Criterion) {
    let corpus = bundled_corpus();
    let gaz = Gazetteer::kansas();
    let parsed: Vec<_> = QUERIES.iter().map(|q| extract_constraints(q, &gaz)).collect();
    c.bench_function("retrieve_bundled", |b| {
        b.iter(|| {
            for cs in &parsed {
                let req = RetrieveRequest { constraints: cs, query: &cs.raw_query, k: 5 };
                black_box(retrieve(&req, corpus.records(), corpus.index(), corpus.provider()).unwrap());
            }
        })
    });
    let assistant = Assistant::offline();
    c.bench_function("turn_offline", |b| {
        b.iter(|| {
            let mut session = Session::new("bench", Utc::now());
            black_box(assistant.handle_turn(&mut session, QUERIES[1], &corpus).unwrap());
        })
    });
}

criterion_group!(benches, search, parse, end_to_end);
criterion_main!(benches);
