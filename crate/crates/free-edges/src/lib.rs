//! IO and orchestration around `free-edges-core`: model file parsing,
//! run reports, and the threaded Monte Carlo driver used by the CLI.

pub mod report;
pub mod run;
pub mod schema;

pub use report::{McSection, RunReport};
pub use run::{mc_edges_parallel, run_edges, thread_budget};
pub use schema::{parse_model, ModelInput, SchemaError};
