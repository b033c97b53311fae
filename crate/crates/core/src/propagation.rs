//! Sequential relevance propagation.
//!
//! Documents arrive in conversation order. A document whose predecessor was
//! judged relevant gets a fixed boost added to its raw score, provided the
//! raw score clears a floor; the first document and every document after an
//! irrelevant one keep their raw score. A document is relevant when its
//! propagated value is strictly above the threshold.
//!
//! "Predecessor was relevant" uses the predecessor's *propagated* judgment,
//! so a run of moderately scored documents can keep each other above the
//! threshold. Propagated values are not clamped and may reach `1 + boost`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PropagationError {
    #[error("score {score} for `{doc_id}` is outside [0, 1]")]
    OutOfRange { doc_id: String, score: f64 },
    #[error("chain is not in sequence order at `{doc_id}` (index {sequence_index})")]
    OutOfOrder {
        doc_id: String,
        sequence_index: usize,
    },
    #[error("invalid propagation constants: {0}")]
    InvalidConstants(String),
}

/// Boost, floor and threshold of the propagation rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConstants {
    pub boost: f64,
    pub boost_floor: f64,
    pub relevance_threshold: f64,
}

impl Default for PropagationConstants {
    fn default() -> Self {
        Self {
            boost: 0.2,
            boost_floor: 0.3,
            relevance_threshold: 0.5,
        }
    }
}

impl PropagationConstants {
    pub fn validate(&self) -> Result<(), PropagationError> {
        let invalid = |m: String| Err(PropagationError::InvalidConstants(m));
        if !(self.boost.is_finite() && self.boost >= 0.0) {
            return invalid(format!(
                "boost {} must be a finite non-negative number",
                self.boost
            ));
        }
        if !(0.0..=1.0).contains(&self.boost_floor) {
            return invalid(format!(
                "boost floor {} must lie in [0, 1]",
                self.boost_floor
            ));
        }
        if !(self.relevance_threshold > 0.0 && self.relevance_threshold < 1.0 + self.boost) {
            return invalid(format!(
                "threshold {} must lie in (0, {})",
                self.relevance_threshold,
                1.0 + self.boost
            ));
        }
        Ok(())
    }

    /// Strictly-greater-than threshold test.
    pub fn judge(&self, probability: f64) -> bool {
        probability > self.relevance_threshold
    }
}

/// Relevance decision with the default threshold of 0.5.
pub fn judge(probability: f64) -> bool {
    PropagationConstants::default().judge(probability)
}

/// One scored document in a query's chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLink {
    pub doc_id: String,
    pub sequence_index: usize,
    pub raw_score: f64,
}

impl ChainLink {
    pub fn new(doc_id: impl Into<String>, sequence_index: usize, raw_score: f64) -> Self {
        Self {
            doc_id: doc_id.into(),
            sequence_index,
            raw_score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub doc_id: String,
    pub sequence_index: usize,
    pub raw_score: f64,
    /// Propagated relevance weight; either `raw_score` or `raw_score + boost`.
    pub probability: f64,
    pub relevant: bool,
}

/// Propagates with the default constants.
pub fn propagate(chain: &[ChainLink]) -> Result<Vec<Judgment>, PropagationError> {
    propagate_with(chain, &PropagationConstants::default())
}

/// Runs the propagation rule left to right over `chain`, which must be in
/// strictly increasing `sequence_index` order with scores in `[0, 1]`.
pub fn propagate_with(
    chain: &[ChainLink],
    constants: &PropagationConstants,
) -> Result<Vec<Judgment>, PropagationError> {
    constants.validate()?;
    let mut out: Vec<Judgment> = Vec::with_capacity(chain.len());
    for link in chain {
        if !(0.0..=1.0).contains(&link.raw_score) {
            return Err(PropagationError::OutOfRange {
                doc_id: link.doc_id.clone(),
                score: link.raw_score,
            });
        }
        let previous = out.last();
        if previous.is_some_and(|p| p.sequence_index >= link.sequence_index) {
            return Err(PropagationError::OutOfOrder {
                doc_id: link.doc_id.clone(),
                sequence_index: link.sequence_index,
            });
        }
        let boosted =
            previous.is_some_and(|p| p.relevant) && link.raw_score >= constants.boost_floor;
        let probability = if boosted {
            constants.boost + link.raw_score
        } else {
            link.raw_score
        };
        out.push(Judgment {
            doc_id: link.doc_id.clone(),
            sequence_index: link.sequence_index,
            raw_score: link.raw_score,
            probability,
            relevant: constants.judge(probability),
        });
    }
    Ok(out)
}
