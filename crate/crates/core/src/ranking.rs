//! Per-query ordering of judged documents.

use std::collections::HashSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::RunEntry;
use crate::propagation::Judgment;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RankingError {
    #[error("duplicate doc id `{doc_id}` in judgments for query `{query_id}`")]
    DuplicateDoc { query_id: String, doc_id: String },
    #[error("depth must be positive")]
    ZeroDepth,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    /// Rank every judged document.
    #[default]
    All,
    /// Keep only documents judged relevant.
    RelevantOnly,
}

impl FromStr for RankMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(RankMode::All),
            "relevant_only" | "relevant-only" => Ok(RankMode::RelevantOnly),
            other => Err(format!(
                "unknown rank mode `{other}` (expected all or relevant_only)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub doc_id: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub items: Vec<RankedItem>,
}

impl RankedList {
    /// Builds a list from already-ordered doc ids, e.g. a parsed run.
    pub fn from_ordered(
        query_id: impl Into<String>,
        items: impl IntoIterator<Item = (String, f64)>,
    ) -> Self {
        Self {
            query_id: query_id.into(),
            items: items
                .into_iter()
                .map(|(doc_id, probability)| RankedItem {
                    doc_id,
                    probability,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.doc_id.as_str())
    }

    /// Run-file lines for this list, ranks starting at 1.
    pub fn to_run_entries(&self, run_tag: &str) -> Vec<RunEntry> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, item)| RunEntry {
                query_id: self.query_id.clone(),
                doc_id: item.doc_id.clone(),
                rank: i + 1,
                score: item.probability,
                run_tag: run_tag.to_string(),
            })
            .collect()
    }
}

/// Sorts by probability descending, ties by ascending sequence index, so the
/// result does not depend on the order of `judgments`.
pub fn rank_documents(
    query_id: &str,
    judgments: &[Judgment],
    mode: RankMode,
    depth: Option<usize>,
) -> Result<RankedList, RankingError> {
    if depth == Some(0) {
        return Err(RankingError::ZeroDepth);
    }
    let mut seen = HashSet::with_capacity(judgments.len());
    for j in judgments {
        if !seen.insert(j.doc_id.as_str()) {
            return Err(RankingError::DuplicateDoc {
                query_id: query_id.to_string(),
                doc_id: j.doc_id.clone(),
            });
        }
    }
    let mut kept: Vec<&Judgment> = judgments
        .iter()
        .filter(|j| mode == RankMode::All || j.relevant)
        .collect();
    kept.sort_by(|a, b| {
        b.probability
            .total_cmp(&a.probability)
            .then_with(|| a.sequence_index.cmp(&b.sequence_index))
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    if let Some(k) = depth {
        kept.truncate(k);
    }
    Ok(RankedList {
        query_id: query_id.to_string(),
        items: kept
            .into_iter()
            .map(|j| RankedItem {
                doc_id: j.doc_id.clone(),
                probability: j.probability,
            })
            .collect(),
    })
}
