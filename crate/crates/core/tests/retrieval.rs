mod common;

use std::sync::LazyLock;

use common::fixture_corpus;
use pantry_core::PantryCorpus;
use pantry_core::model::{ConstraintSet, Day, IdConstraint, PantryRecord};
use pantry_core::retriever::{apply_hard_filters, exact_recall_lookup, retrieve, RetrieveRequest};
use pantry_core::vector::{record_to_document, stub_embed, STUB_DIM};
use proptest::prelude::*;

static CORPUS: LazyLock<PantryCorpus> = LazyLock::new(fixture_corpus);

/// Brute force: score every survivor, exact recall matches pinned at 1.0.
fn oracle(records: &[PantryRecord], cs: &ConstraintSet, query: &str, k: usize) -> Vec<(String, f32)> {
    let survivors = apply_hard_filters(records, cs).survivors;
    let exact: Vec<String> = if cs.exact_recall {
        exact_recall_lookup(records, cs).into_iter().filter(|id| survivors.contains(id)).collect()
    } else {
        Vec::new()
    };
    let unit = |v: Vec<f32>| -> Vec<f64> {
        let n = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
        v.into_iter().map(|x| if n == 0.0 { 0.0 } else { f64::from(x) / n }).collect()
    };
    let q = unit(stub_embed(query, STUB_DIM));
    let mut scored: Vec<(String, f32)> = exact.iter().map(|id| (id.clone(), 1.0)).collect();
    let mut rest: Vec<(String, f32)> = records
        .iter()
        .filter(|r| survivors.contains(&r.id) && !exact.contains(&r.id))
        .map(|r| {
            let d = unit(stub_embed(&record_to_document(r), STUB_DIM));
            (r.id.clone(), d.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() as f32)
        })
        .collect();
    let by_rank = |a: &(String, f32), b: &(String, f32)| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0));
    rest.sort_by(by_rank);
    rest.truncate(k.saturating_sub(scored.len()));
    scored.extend(rest);
    scored.sort_by(by_rank);
    scored.truncate(k);
    scored
}

fn constraint_set() -> impl Strategy<Value = ConstraintSet> {
    let county = proptest::option::of(prop::sample::select(vec!["Sedgwick", "Harvey", "Shawnee", "Wichita", "Douglas"]));
    let city = proptest::option::of(prop::sample::select(vec!["Wichita", "Derby", "Maize", "Sedgwick", "Topeka", "Leoti"]));
    let zip = proptest::option::of(prop::sample::select(vec!["67214", "67037", "67101", "66604", "67401"]));
    let street = proptest::option::of(prop::sample::select(vec!["21st Street", "Main St", "N Main Street", "Broadway"]));
    let day = proptest::option::of(prop::sample::select(Day::ALL.to_vec()));
    let time = proptest::option::of(360u16..1260);
    (county, city, zip, street, day, time, any::<bool>(), any::<bool>(), "[a-z ]{0,30}").prop_map(
        |(county, city, zip, street, day, time, no_id, recall, raw)| ConstraintSet {
            county: county.map(str::to_string),
            city: city.map(str::to_string),
            zip: zip.map(str::to_string),
            street_fragment: street.map(str::to_string),
            day,
            time_min: time,
            id_constraint: no_id.then_some(IdConstraint::NoIdRequired),
            exact_recall: recall,
            raw_query: raw,
            ..Default::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn retrieval_matches_brute_force(cs in constraint_set(), k in 1usize..12) {
        let corpus = &*CORPUS;
        let req = RetrieveRequest { constraints: &cs, query: &cs.raw_query, k };
        let got = retrieve(&req, corpus.records(), corpus.index(), corpus.provider()).unwrap();
        let want = oracle(corpus.records(), &cs, &cs.raw_query, k);
        let got_ids: Vec<&str> = got.ids().collect();
        let want_ids: Vec<&str> = want.iter().map(|(id, _)| id.as_str()).collect();
        prop_assert_eq!(got_ids, want_ids);
        for (h, (_, s)) in got.hits.iter().zip(&want) {
            prop_assert!((h.score - s).abs() <= 1e-6);
        }
    }
}
