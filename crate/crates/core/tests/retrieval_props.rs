use std::collections::BTreeSet;

use proptest::prelude::*;

use spectraqa::retrieval::{retrieval_accuracy, Index, JudgedQuery, RetrieverKind};
use spectraqa::textproc::tokenize;
use spectraqa::PaperId;

const WORDS: [&str; 8] = ["nir", "raman", "apple", "wheat", "sugar", "pls", "svm", "moisture"];

fn pid(i: usize) -> PaperId {
    PaperId::new(format!("p{i:02}")).unwrap()
}

fn corpus() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::collection::vec(prop::sample::select(&WORDS[..]), 1..12), 1..10)
        .prop_map(|docs| docs.into_iter().map(|d| d.join(" ")).collect())
}

fn query() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(&WORDS[..]), 1..4).prop_map(|q| q.join(" "))
}

fn index(kind: RetrieverKind, docs: &[String]) -> Index {
    Index::from_texts(kind, None, docs.iter().enumerate().map(|(i, d)| (pid(i), d.as_str())), 0).unwrap()
}

proptest! {
    #[test]
    fn cosine_scores_ignore_document_scaling(docs in corpus(), q in query(), target in 0usize..10) {
        let target = target % docs.len();
        let mut doubled = docs.clone();
        doubled[target] = format!("{0} {0}", docs[target]);
        let q = tokenize(&q);
        for kind in [RetrieverKind::TfidfCosine, RetrieverKind::BagOfWords] {
            let a = index(kind, &docs).score(&q, &pid(target)).unwrap();
            let b = index(kind, &doubled).score(&q, &pid(target)).unwrap();
            prop_assert!((a - b).abs() < 1e-9, "{kind:?}: {a} vs {b}");
        }
    }

    #[test]
    fn bm25_penalizes_padding(docs in corpus(), pad in 1usize..20) {
        // same query-term counts, one document padded with an unrelated term
        let mut padded = docs.clone();
        padded.push(format!("{} {}", docs[0], vec!["filler"; pad].join(" ")));
        padded.push(docs[0].clone());
        let idx = index(RetrieverKind::Bm25, &padded);
        let q = tokenize(&docs[0]);
        let long = idx.score(&q, &pid(padded.len() - 2)).unwrap();
        let short = idx.score(&q, &pid(padded.len() - 1)).unwrap();
        prop_assert!(long < short, "{long} !< {short}");
    }

    #[test]
    fn rankings_are_well_formed(docs in corpus(), q in query(), k in 1usize..12) {
        let q = tokenize(&q);
        for kind in RetrieverKind::ALL {
            let idx = index(kind, &docs);
            let all = idx.rank_all(&q);
            let top = idx.retrieve_top_k(&q, k).unwrap();
            prop_assert_eq!(&all[..k.min(all.len())], &top[..]);
            prop_assert!(top.len() <= k);
            let ids: BTreeSet<_> = all.iter().map(|h| &h.paper_id).collect();
            prop_assert_eq!(ids.len(), all.len());
            for (i, h) in all.iter().enumerate() {
                prop_assert_eq!(h.rank, i + 1);
                prop_assert!(h.score > 0.0);
                let direct = idx.score(&q, &h.paper_id).unwrap();
                prop_assert!((direct - h.score).abs() < 1e-12);
            }
            prop_assert!(all.windows(2).all(|w| w[0].score >= w[1].score - 1e-12));
        }
    }

    #[test]
    fn accuracy_ignores_query_order(docs in corpus(), qs in prop::collection::vec((query(), 0usize..10), 1..6)) {
        let judged: Vec<JudgedQuery> = qs
            .iter()
            .map(|(q, r)| JudgedQuery { query: tokenize(q), relevant: [pid(r % docs.len())].into() })
            .collect();
        let mut reversed = judged.clone();
        reversed.reverse();
        for kind in RetrieverKind::ALL {
            let idx = index(kind, &docs);
            let a = retrieval_accuracy(&idx, &judged, 3).unwrap();
            let b = retrieval_accuracy(&idx, &reversed, 3).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}

#[test]
fn exact_duplicates_tie_by_id() {
    let docs = ["sugar apple", "nir wheat", "sugar apple", "apple sugar apple sugar"];
    for kind in [RetrieverKind::TfidfCosine, RetrieverKind::BagOfWords] {
        let idx = Index::from_texts(kind, None, docs.iter().enumerate().map(|(i, d)| (pid(i), *d)), 0).unwrap();
        let ids: Vec<String> = idx.rank_all(&tokenize("sugar apple")).iter().map(|h| h.paper_id.to_string()).collect();
        assert_eq!(ids, ["p00", "p02", "p03"], "{kind:?}");
    }
}
