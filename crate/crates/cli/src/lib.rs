//! Pipeline driver behind the `cmir` binary.

pub mod config;
pub mod error;
pub mod layout;
pub mod pipeline;
pub mod report;

pub use config::{PipelineConfig, ProviderKind, TranslateScope};
pub use error::CliError;
pub use layout::Layout;
pub use pipeline::{
    cmd_eval, cmd_pipeline, cmd_rank, cmd_score, cmd_sweep, cmd_translate, JudgmentRecord,
    Pipeline, RankSummary, ScoreSummary, TranslateSummary,
};
pub use report::{SweepReport, SweepRow};
