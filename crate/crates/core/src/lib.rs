//! Pessimistic software transactional memory built on supremum versioning,
//! together with the machinery to check that it behaves: an execution-trace
//! recorder, a trace-harmony checker, a brute-force last-use-opacity checker,
//! and a benchmark harness comparing the optimized engine against its
//! baseline.

pub mod asynctask;
pub mod engine;
pub mod harmony;
pub mod harness;
pub mod runtime;
pub mod sim;
pub mod trace;
pub mod types;

pub use engine::optsva::OptSva;
pub use engine::sva::Sva;
pub use engine::{
    Change, CounterKind, EngineConfig, OpResult, Outcome, TxnOp, UsageError, VersionedTm,
    WaitCondition, WakeCondition,
};
pub use trace::{History, Record, RecordKind, Timing, Trace, TraceBuffer, TraceSink};
pub use types::{TaskId, TxnDescriptor, TxnId, TxnStatus, Value, VarBounds, VariableId};
