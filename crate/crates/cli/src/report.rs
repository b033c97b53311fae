//! Temperature sweep summary.

use std::fmt::Write as _;

use cmir_core::eval::MetricsReport;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub run_tag: String,
    pub temperature: f64,
    pub map: f64,
    pub ndcg: f64,
    pub p5: f64,
    pub p10: f64,
}

impl SweepRow {
    pub fn new(temperature: f64, report: &MetricsReport) -> Self {
        let a = &report.aggregate;
        Self {
            run_tag: report.run_tag.clone(),
            temperature,
            map: round6(a.map),
            ndcg: round6(a.ndcg),
            p5: round6(a.p5),
            p10: round6(a.p10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub run_tag: String,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serializes") + "\n"
    }

    /// One row per temperature with MAP, NDCG, P@5 and P@10.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "run_tag: {}", self.run_tag).unwrap();
        writeln!(
            out,
            "{:>11}  {:>8}  {:>8}  {:>8}  {:>8}",
            "temperature", "MAP", "NDCG", "P@5", "P@10"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{:>11}  {:>8.6}  {:>8.6}  {:>8.6}  {:>8.6}",
                r.temperature, r.map, r.ndcg, r.p5, r.p10
            )
            .unwrap();
        }
        out
    }
}

fn round6(v: f64) -> f64 {
    format!("{v:.6}").parse().expect("formatted float parses")
}
