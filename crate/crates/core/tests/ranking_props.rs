use cmir_core::propagation::{
    propagate, propagate_with, ChainLink, Judgment, PropagationConstants,
};
use cmir_core::ranking::{rank_documents, RankMode};
use proptest::prelude::*;

fn judged(scores: &[u32]) -> Vec<Judgment> {
    let chain: Vec<ChainLink> = scores
        .iter()
        .enumerate()
        .map(|(i, &k)| ChainLink::new(format!("d{i}"), i, f64::from(k) / 20.0))
        .collect();
    propagate(&chain).unwrap()
}

fn scores() -> impl Strategy<Value = Vec<u32>> {
    proptest::collection::vec(0u32..=20, 0..40)
}

proptest! {
    #[test]
    fn input_order_does_not_matter(s in scores(), perm in any::<proptest::sample::Index>()) {
        let js = judged(&s);
        let mut rotated = js.clone();
        if !rotated.is_empty() {
            let k = perm.index(rotated.len());
            rotated.rotate_left(k);
            rotated.reverse();
        }
        for mode in [RankMode::All, RankMode::RelevantOnly] {
            prop_assert_eq!(
                rank_documents("q", &js, mode, None).unwrap(),
                rank_documents("q", &rotated, mode, None).unwrap()
            );
        }
    }

    #[test]
    fn relevant_only_is_subsequence(s in scores()) {
        let js = judged(&s);
        let all: Vec<String> = rank_documents("q", &js, RankMode::All, None).unwrap().doc_ids().map(String::from).collect();
        let rel: Vec<String> = rank_documents("q", &js, RankMode::RelevantOnly, None).unwrap().doc_ids().map(String::from).collect();
        let mut it = all.iter();
        for d in &rel {
            prop_assert!(it.any(|x| x == d), "{} out of order", d);
        }
    }

    #[test]
    fn truncation_is_prefix(s in scores(), k in 1usize..50) {
        let js = judged(&s);
        let full = rank_documents("q", &js, RankMode::All, None).unwrap();
        let cut = rank_documents("q", &js, RankMode::All, Some(k)).unwrap();
        prop_assert_eq!(&cut.items[..], &full.items[..k.min(full.len())]);
    }

    #[test]
    fn sorted_descending_with_unique_ids(s in scores()) {
        let ranked = rank_documents("q", &judged(&s), RankMode::All, None).unwrap();
        for w in ranked.items.windows(2) {
            prop_assert!(w[0].probability >= w[1].probability);
        }
        let mut ids: Vec<_> = ranked.doc_ids().collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), ranked.len());
    }

    #[test]
    fn boost_off_equals_raw_ranking(s in scores()) {
        let chain: Vec<ChainLink> = s
            .iter()
            .enumerate()
            .map(|(i, &k)| ChainLink::new(format!("d{i}"), i, f64::from(k) / 20.0))
            .collect();
        let constants = PropagationConstants { boost: 0.0, ..Default::default() };
        let js = propagate_with(&chain, &constants).unwrap();
        let ranked = rank_documents("q", &js, RankMode::All, None).unwrap();

        let mut raw: Vec<&ChainLink> = chain.iter().collect();
        raw.sort_by(|a, b| b.raw_score.partial_cmp(&a.raw_score).unwrap().then(a.sequence_index.cmp(&b.sequence_index)));
        let expected: Vec<(&str, f64)> = raw.iter().map(|l| (l.doc_id.as_str(), l.raw_score)).collect();
        let got: Vec<(&str, f64)> = ranked.items.iter().map(|i| (i.doc_id.as_str(), i.probability)).collect();
        prop_assert_eq!(got, expected);
    }
}
