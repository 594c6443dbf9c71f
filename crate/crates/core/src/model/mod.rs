//! Task graph, platform description, and analysis results — the data that
//! flows between the analysers, the scheduler, and the contract checker.

mod graph;
pub(crate) mod platform;
mod results;

pub use graph::{build_task_graph, topological_order, Task, TaskGraph};
pub use platform::{Core, CoreType, PlatformModel};
pub use results::{
    merge_results, AnalysisResults, Provenance, ResultEntry, ResultKey, Units, Variant,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid platform model: {0}")]
    InvalidPlatform(String),
    #[error("no program supplied for impl reference '{impl_ref}'")]
    MissingProgram { impl_ref: String },
    #[error("cyclic dependency: {}", .cycle.join(" -> "))]
    CyclicDependency { cycle: Vec<String> },
    #[error("conflicting units: {left} vs {right}")]
    ConflictingUnits { left: String, right: String },
    #[error("invalid analysis results: {0}")]
    InvalidResults(String),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
