//! Claim verification engine.
//!
//! A claim is decomposed into knowledge triplets and topics, then verified by
//! a reason-act loop that queries tools over the Model Context Protocol.
//! Evidence fetched for one claim is kept in an entity-keyed memory and
//! offered to later claims that share entities. The [`eval`] module runs
//! datasets through the pipeline and scores the results.

pub mod clock;
pub mod decomposer;
pub mod eval;
pub mod executor;
pub mod gateway;
pub mod memory;
pub mod model;
pub mod provider;
pub mod text;

pub use clock::{Clock, FixedClock, SystemClock};
pub use decomposer::{parse_decomposition, DecomposeError, Decomposer};
pub use executor::{
    parse_agent_output, Executor, ExecutorConfig, ExecutorError, MemoryPolicy, SessionOutcome,
};
pub use gateway::{Gateway, GatewayError, ToolCallCounter, ToolResult, ToolSpec};
pub use memory::{MemoryError, MemoryStore};
pub use model::{
    entities_of, Action, Claim, Decomposition, EvidenceRecord, Step, Trajectory, Triplet,
    VeracityLabel, Verdict,
};
pub use provider::{ChatMessage, ChatProvider, ProviderConfig, ProviderError, ScriptedProvider};
