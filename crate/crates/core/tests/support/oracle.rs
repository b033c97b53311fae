//! Straight-line reference implementations used as test oracles.
//!
//! These deliberately share no code with the library: plain slices and
//! index loops, no sorting of grades, no helper functions from `cmir_core`.

#![allow(dead_code, clippy::if_same_then_else, clippy::needless_range_loop)]

/// Propagated `(probability, relevant)` per position.
pub fn reference_propagate(
    scores: &[f64],
    boost: f64,
    floor: f64,
    threshold: f64,
) -> Vec<(f64, bool)> {
    let mut out: Vec<(f64, bool)> = Vec::new();
    let mut i = 0;
    while i < scores.len() {
        let s = scores[i];
        let p;
        if i == 0 {
            p = s;
        } else if out[i - 1].1 && s < floor {
            p = s;
        } else if out[i - 1].1 && s >= floor {
            p = boost + s;
        } else {
            p = s;
        }
        out.push((p, p > threshold));
        i += 1;
    }
    out
}

/// `ranked[i]` is the grade of the document at rank `i + 1`; `total_relevant`
/// counts relevant documents in the qrels, retrieved or not.
pub fn reference_precision(ranked: &[u32], k: usize) -> f64 {
    let mut hits = 0;
    for pos in 0..k {
        if pos < ranked.len() && ranked[pos] > 0 {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}

pub fn reference_ap(ranked: &[u32], total_relevant: usize) -> f64 {
    if total_relevant == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for r in 0..ranked.len() {
        if ranked[r] > 0 {
            let mut rel_above = 0;
            for j in 0..=r {
                if ranked[j] > 0 {
                    rel_above += 1;
                }
            }
            sum += rel_above as f64 / (r + 1) as f64;
        }
    }
    sum / total_relevant as f64
}

/// Binary-grade NDCG with the closed-form ideal `sum_{i=1..R} 1/log2(i+1)`.
pub fn reference_binary_ndcg(ranked: &[u32], total_relevant: usize) -> f64 {
    let mut idcg = 0.0;
    for i in 1..=total_relevant {
        idcg += 1.0 / ((i + 1) as f64).log2();
    }
    if idcg == 0.0 {
        return 0.0;
    }
    let mut dcg = 0.0;
    for (i, &g) in ranked.iter().enumerate() {
        if g > 0 {
            dcg += 1.0 / ((i + 2) as f64).log2();
        }
    }
    dcg / idcg
}

/// Ideal DCG by trying every ordering of `grades` (small inputs only).
pub fn brute_force_idcg(grades: &[u32]) -> f64 {
    fn permute(rest: &mut Vec<u32>, prefix: &mut Vec<u32>, best: &mut f64) {
        if rest.is_empty() {
            let mut dcg = 0.0;
            for (i, &g) in prefix.iter().enumerate() {
                dcg += (2f64.powi(g as i32) - 1.0) / ((i + 2) as f64).log2();
            }
            if dcg > *best {
                *best = dcg;
            }
            return;
        }
        for i in 0..rest.len() {
            let g = rest.remove(i);
            prefix.push(g);
            permute(rest, prefix, best);
            prefix.pop();
            rest.insert(i, g);
        }
    }
    let mut best = 0.0;
    permute(&mut grades.to_vec(), &mut Vec::new(), &mut best);
    best
}
