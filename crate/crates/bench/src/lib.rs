//! Synthetic inputs for the criterion benchmarks.

use cmir_core::corpus::{QrelsTable, RunEntry};
use cmir_core::propagation::ChainLink;

/// Deterministic pseudo-random scores on a 0.05 grid.
pub fn chain(len: usize, seed: u64) -> Vec<ChainLink> {
    let mut state = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    (0..len)
        .map(|i| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let step = (state >> 33) % 21;
            ChainLink::new(format!("d{i}"), i, step as f64 * 0.05)
        })
        .collect()
}

/// A run over `queries` queries of `depth` documents each, with every third
/// document judged relevant.
pub fn run_and_qrels(queries: usize, depth: usize) -> (Vec<RunEntry>, QrelsTable) {
    let mut run = Vec::with_capacity(queries * depth);
    let mut qrels = QrelsTable::new();
    for q in 0..queries {
        let qid = format!("q{q}");
        for r in 0..depth {
            let doc = format!("d{}", (r * 7 + q) % (depth * 2));
            if (r + q) % 3 == 0 {
                qrels.insert(qid.clone(), doc.clone(), 1).ok();
            }
            run.push(RunEntry {
                query_id: qid.clone(),
                doc_id: doc,
                rank: r + 1,
                score: 1.0 - r as f64 / depth as f64,
                run_tag: "bench".into(),
            });
        }
    }
    (run, qrels)
}
