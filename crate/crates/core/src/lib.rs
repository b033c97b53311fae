//! Core algorithms for LLM-assisted retrieval over code-mixed conversations.
//!
//! The pipeline is split into five stages, each in its own module:
//!
//! - [`corpus`]: document, query, qrels and run-file I/O.
//! - [`scorer`]: prompt construction, provider abstraction, response parsing
//!   and the on-disk response cache.
//! - [`propagation`]: the sequential relevance model that boosts a document
//!   when its predecessor in conversation order was judged relevant.
//! - [`ranking`]: per-query ordering of judged documents.
//! - [`eval`]: MAP, NDCG, P@5 and P@10.

pub mod corpus;
pub mod eval;
pub mod propagation;
pub mod ranking;
pub mod scorer;

pub use corpus::{
    Document, DocumentCollection, InputFormat, QrelsTable, Query, QueryCollection, RunEntry,
};
pub use eval::{MetricsReport, QueryMetrics};
pub use propagation::{ChainLink, Judgment, PropagationConstants};
pub use ranking::{RankMode, RankedItem, RankedList};
pub use scorer::{
    Provider, ProviderConfig, ProviderError, RelevanceScore, ResponseCache, ScorerError,
};
