//! Datasets, batch runs, metrics and ablation comparisons.

pub mod batch;
pub mod compare;
pub mod dataset;
pub mod metrics;
pub mod par;
pub mod report;

use thiserror::Error;

pub use batch::{run_batch, BatchOptions, BatchRunner, RunConfig};
pub use compare::{
    ablation_compare, compare_many, CompareError, Comparison, ComparisonRow, ToolCallDelta,
};
pub use dataset::{load_dataset, stratified_sample, DatasetError, DatasetRecord, LabelScheme};
pub use metrics::{macro_f1, F1Scores, MetricsError};
pub use report::{Aggregate, ClaimRecord, RunReport};

use crate::gateway::GatewayError;
use crate::memory::MemoryError;
use crate::provider::ProviderError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl HarnessError {
    /// True for failures reading or writing files, as opposed to bad
    /// configuration.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            HarnessError::Io(_)
                | HarnessError::Dataset(DatasetError::Io { .. })
                | HarnessError::Memory(MemoryError::Io { .. })
        )
    }
}
