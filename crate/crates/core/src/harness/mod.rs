//! Benchmark harness: workload generation, execution, scenario replay,
//! and report emission.

pub mod program;
pub mod replay;
pub mod report;
pub mod runner;
pub mod workload;

pub use program::{Ending, ProgramModel, TxnProgram};
pub use runner::{EngineKind, RunMetrics, RunOutput};
pub use workload::{generate, generate_stress, StressSpec, WorkloadSpec};
