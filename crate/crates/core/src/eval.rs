//! MAP, NDCG, P@5 and P@10 against a qrels table.
//!
//! Conventions follow the usual trec_eval behaviour: unjudged documents are
//! non-relevant, P@k divides by `k` even when fewer than `k` documents were
//! retrieved, AP divides by the number of relevant documents in the qrels,
//! and NDCG uses `2^grade - 1` gains with a `log2(rank + 1)` discount over
//! the full list. Queries without any relevant judgment are left out of
//! every average.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{QrelsTable, RunEntry};
use crate::ranking::RankedList;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("run is empty")]
    EmptyRun,
    #[error("run mixes several run tags: {0:?}")]
    MixedRunTags(Vec<String>),
}

fn six_decimals<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round6(*v))
}

fn round6(v: f64) -> f64 {
    format!("{v:.6}").parse().expect("formatted float parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    #[serde(serialize_with = "six_decimals")]
    pub ap: f64,
    #[serde(serialize_with = "six_decimals")]
    pub ndcg: f64,
    #[serde(serialize_with = "six_decimals")]
    pub p5: f64,
    #[serde(serialize_with = "six_decimals")]
    pub p10: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    #[serde(serialize_with = "six_decimals")]
    pub map: f64,
    #[serde(serialize_with = "six_decimals")]
    pub ndcg: f64,
    #[serde(serialize_with = "six_decimals")]
    pub p5: f64,
    #[serde(serialize_with = "six_decimals")]
    pub p10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub run_tag: String,
    pub per_query: BTreeMap<String, QueryMetrics>,
    pub aggregate: AggregateMetrics,
    /// Queries left out of the averages and why.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Fixed-width table: one row per query plus an `all` row.
    pub fn to_table(&self) -> String {
        let width = self
            .per_query
            .keys()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max("query".len());
        let mut out = String::new();
        writeln!(out, "run_tag: {}", self.run_tag).unwrap();
        writeln!(
            out,
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}",
            "query", "AP", "NDCG", "P@5", "P@10"
        )
        .unwrap();
        for (qid, m) in &self.per_query {
            writeln!(
                out,
                "{:<width$}  {:>8.6}  {:>8.6}  {:>8.6}  {:>8.6}",
                qid, m.ap, m.ndcg, m.p5, m.p10
            )
            .unwrap();
        }
        let a = &self.aggregate;
        writeln!(
            out,
            "{:<width$}  {:>8.6}  {:>8.6}  {:>8.6}  {:>8.6}",
            "all", a.map, a.ndcg, a.p5, a.p10
        )
        .unwrap();
        out
    }
}

/// Fraction of the top `k` positions holding a relevant document.
///
/// # Panics
///
/// If `k == 0`.
pub fn precision_at_k(ranked: &RankedList, qrels: &QrelsTable, k: usize) -> f64 {
    assert!(k > 0, "precision cutoff must be positive");
    let hits = ranked
        .doc_ids()
        .take(k)
        .filter(|d| qrels.is_relevant(&ranked.query_id, d))
        .count();
    hits as f64 / k as f64
}

pub fn average_precision(ranked: &RankedList, qrels: &QrelsTable) -> f64 {
    let total_relevant = qrels.num_relevant(&ranked.query_id);
    if total_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, doc) in ranked.doc_ids().enumerate() {
        if qrels.is_relevant(&ranked.query_id, doc) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total_relevant as f64
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn discount(position: usize) -> f64 {
    // position is 0-based; rank is position + 1
    ((position + 2) as f64).log2()
}

fn dcg(grades: impl Iterator<Item = u32>) -> f64 {
    grades.enumerate().map(|(i, g)| gain(g) / discount(i)).sum()
}

pub fn ndcg(ranked: &RankedList, qrels: &QrelsTable) -> f64 {
    let mut ideal: Vec<u32> = qrels
        .judgments(&ranked.query_id)
        .map(|j| j.values().copied().collect())
        .unwrap_or_default();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal.into_iter());
    if idcg == 0.0 {
        return 0.0;
    }
    let actual = dcg(ranked.doc_ids().map(|d| qrels.grade(&ranked.query_id, d)));
    actual / idcg
}

pub fn query_metrics(ranked: &RankedList, qrels: &QrelsTable) -> QueryMetrics {
    QueryMetrics {
        ap: average_precision(ranked, qrels),
        ndcg: ndcg(ranked, qrels),
        p5: precision_at_k(ranked, qrels, 5),
        p10: precision_at_k(ranked, qrels, 10),
    }
}

/// Groups a run by query (ordered by rank) and averages the per-query
/// metrics over queries that have at least one relevant judgment.
pub fn evaluate_run(run: &[RunEntry], qrels: &QrelsTable) -> Result<MetricsReport, EvalError> {
    let first = run.first().ok_or(EvalError::EmptyRun)?;
    let mut tags: Vec<String> = run.iter().map(|e| e.run_tag.clone()).collect();
    tags.sort();
    tags.dedup();
    if tags.len() > 1 {
        return Err(EvalError::MixedRunTags(tags));
    }

    let mut by_query: BTreeMap<&str, Vec<&RunEntry>> = BTreeMap::new();
    for e in run {
        by_query.entry(e.query_id.as_str()).or_default().push(e);
    }

    let mut per_query = BTreeMap::new();
    let mut warnings = Vec::new();
    for (qid, mut entries) in by_query {
        if !qrels.contains_query(qid) {
            log::warn!("query `{qid}` has no qrels; skipped");
            warnings.push(format!("query `{qid}` absent from qrels; skipped"));
            continue;
        }
        if qrels.num_relevant(qid) == 0 {
            log::warn!("query `{qid}` has no relevant documents; skipped");
            warnings.push(format!("query `{qid}` has no relevant documents; skipped"));
            continue;
        }
        entries.sort_by_key(|e| e.rank);
        let ranked =
            RankedList::from_ordered(qid, entries.iter().map(|e| (e.doc_id.clone(), e.score)));
        per_query.insert(qid.to_string(), query_metrics(&ranked, qrels));
    }

    let aggregate = if per_query.is_empty() {
        AggregateMetrics::default()
    } else {
        let n = per_query.len() as f64;
        let mean = |f: fn(&QueryMetrics) -> f64| per_query.values().map(f).sum::<f64>() / n;
        AggregateMetrics {
            map: mean(|m| m.ap),
            ndcg: mean(|m| m.ndcg),
            p5: mean(|m| m.p5),
            p10: mean(|m| m.p10),
        }
    };

    Ok(MetricsReport {
        run_tag: first.run_tag.clone(),
        per_query,
        aggregate,
        warnings,
    })
}
