use std::fs;

use cmir_core::corpus::{
    load_documents, load_qrels, parse_run_file, write_qrels, write_run_file, CorpusError,
    InputFormat, QrelsTable, RunEntry,
};
use proptest::prelude::*;

fn ident() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9_.-]{1,8}"
}

/// Valid run entries in write order: per query, ranks 1..M with scores on a
/// micro grid, non-increasing.
fn arb_run() -> impl Strategy<Value = Vec<RunEntry>> {
    let group = proptest::collection::vec((ident(), 0u32..=1_200_000), 1..8);
    (
        proptest::collection::btree_map(ident(), group, 0..5),
        ident(),
    )
        .prop_map(|(groups, tag)| {
            let mut entries = Vec::new();
            for (qid, docs) in groups {
                let mut micros: Vec<u32> = docs.iter().map(|(_, m)| *m).collect();
                micros.sort_unstable_by(|a, b| b.cmp(a));
                for (i, ((doc, _), m)) in docs.into_iter().zip(micros).enumerate() {
                    entries.push(RunEntry {
                        query_id: qid.clone(),
                        doc_id: doc,
                        rank: i + 1,
                        score: f64::from(m) / 1e6,
                        run_tag: tag.clone(),
                    });
                }
            }
            entries
        })
}

fn arb_qrels_lines() -> impl Strategy<Value = Vec<(String, String, u32)>> {
    proptest::collection::btree_map((ident(), ident()), 0u32..4, 0..30)
        .prop_map(|m| m.into_iter().map(|((q, d), g)| (q, d, g)).collect())
}

proptest! {
    #[test]
    fn run_file_round_trips(entries in arb_run()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run");
        write_run_file(&entries, &path).unwrap();
        prop_assert_eq!(parse_run_file(&path).unwrap(), entries);
    }

    #[test]
    fn qrels_round_trip(lines in arb_qrels_lines()) {
        let mut table = QrelsTable::new();
        for (q, d, g) in &lines {
            table.insert(q.clone(), d.clone(), *g).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qrels");
        write_qrels(&table, &path).unwrap();
        prop_assert_eq!(load_qrels(&path).unwrap(), table);
    }

    #[test]
    fn qrels_permutation_invariant(
        lines in arb_qrels_lines(),
        dup in proptest::option::of(0usize..30),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut text: Vec<String> = lines.iter().map(|(q, d, g)| format!("{q} 0 {d} {g}")).collect();
        if let Some(i) = dup {
            if !lines.is_empty() {
                let (q, d, _) = &lines[i % lines.len()];
                text.push(format!("{q} 0 {d} 9"));
            }
        }
        let mut shuffled = text.clone();
        shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));

        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        fs::write(&a, text.join("\n")).unwrap();
        fs::write(&b, shuffled.join("\n")).unwrap();
        match (load_qrels(&a), load_qrels(&b)) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (Err(CorpusError::DuplicateKeys(x)), Err(CorpusError::DuplicateKeys(y))) => prop_assert_eq!(x, y),
            (x, y) => prop_assert!(false, "diverged: {:?} vs {:?}", x, y),
        }
    }

    #[test]
    fn ingestion_preserves_order(ids in proptest::collection::btree_set(ident(), 0..40)) {
        // reverse so file order differs from id order
        let mut ids: Vec<String> = ids.into_iter().collect();
        ids.reverse();
        let body: String = ids.iter().map(|id| format!("{id}\ttext of {id}\n")).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.tsv");
        fs::write(&path, body).unwrap();
        let docs = load_documents(&path, InputFormat::Tsv).unwrap();
        for (i, d) in docs.iter().enumerate() {
            prop_assert_eq!(&d.doc_id, &ids[i]);
            prop_assert_eq!(d.sequence_index, i);
        }
    }
}
