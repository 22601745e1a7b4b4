//! Concurrency-control engines.
//!
//! Both algorithms are implemented as resumable state machines: an API call
//! is advanced by repeatedly invoking `step` until it yields `Ready`. A
//! `Blocked` outcome names the condition the call is waiting on, so the same
//! core can be driven by real threads (parking on condition variables), by
//! the deterministic interleaving explorer, or by the virtual-time
//! simulator. All transitions are atomic with respect to the caller; a
//! blocked re-step with an unsatisfied condition leaves the state untouched.

use crate::types::{TaskId, TxnId, Value, VariableId};
use serde::{Deserialize, Serialize};

pub mod optsva;
pub mod sva;

/// Which version counter a wake condition inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CounterKind {
    Lv,
    Ltv,
    Cv,
}

/// `counter(var) == target` — the shape of every wait in the algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WakeCondition {
    pub var: VariableId,
    pub counter: CounterKind,
    pub target: u64,
}

/// What a blocked step is waiting for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaitCondition {
    Counter(WakeCondition),
    /// Waiting for an asynchronous task to reach a terminal state.
    Task(TaskId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome<T> {
    Ready(T),
    Blocked(WaitCondition),
}

impl<T> Outcome<T> {
    pub fn unwrap_ready(self) -> T {
        match self {
            Outcome::Ready(t) => t,
            Outcome::Blocked(c) => panic!("expected Ready, blocked on {c:?}"),
        }
    }
}

/// Transactional operations, as issued by application code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TxnOp {
    Read(VariableId),
    Write(VariableId, Value),
    TryCommit,
    TryAbort,
}

impl TxnOp {
    pub fn var(&self) -> Option<VariableId> {
        match self {
            TxnOp::Read(x) | TxnOp::Write(x, _) => Some(*x),
            _ => None,
        }
    }
}

/// Result of a completed operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpResult {
    Value(Value),
    Ok,
    Committed,
    /// The transaction was (force- or manually) aborted; the full abort
    /// procedure has already run.
    Aborted,
}

/// Programmer errors, distinct from the abort constant.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UsageError {
    #[error("variable {0} is not in the transaction's access set")]
    AccessSetViolation(VariableId),
    #[error("{kind} upper bound for {var} exceeded")]
    UpperBoundExceeded { var: VariableId, kind: &'static str },
    #[error("operation on a completed transaction")]
    TxnCompleted,
    #[error("unknown transaction")]
    UnknownTxn,
    #[error("a different operation is still in flight")]
    OperationInFlight,
}

/// State transitions of interest to drivers, drained after each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Change {
    Counter {
        var: VariableId,
        kind: CounterKind,
        value: u64,
    },
    TaskSpawned {
        task: TaskId,
        cond: WakeCondition,
    },
    TaskFinished {
        task: TaskId,
        failed: bool,
    },
}

/// Engine-wide switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EngineConfig {
    /// Unique-writes test mode: writing the initial value (0) is a domain
    /// violation and force-aborts the writer.
    pub reject_zero_writes: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            reject_zero_writes: true,
        }
    }
}

/// Lifecycle state machine of an asynchronous task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskState {
    Waiting,
    Done,
    Failed,
    /// Claimed by abort before it ran; its duties were taken over.
    Cancelled,
}

impl TaskState {
    pub fn is_terminal(self) -> bool {
        !matches!(self, TaskState::Waiting)
    }
}

/// The driver-facing surface shared by both engines.
///
/// `Clone + Hash + Eq` covers the deterministic explorer's needs: state can
/// be forked at a choice point and deduplicated across interleavings. The
/// trace sink is excluded from equality and hashing.
pub trait VersionedTm: Clone {
    fn begin(&mut self, desc: &crate::types::TxnDescriptor) -> Result<TxnId, crate::types::DescriptorError>;

    /// Advances (or resumes) the in-flight operation of `t`.
    fn step(&mut self, t: TxnId, op: TxnOp) -> Result<Outcome<OpResult>, UsageError>;

    /// Tasks whose wake condition currently holds.
    fn ready_tasks(&self, out: &mut Vec<TaskId>);

    /// Runs one task body to completion. No-op for cancelled tasks.
    fn run_task(&mut self, id: TaskId);

    fn task_state(&self, id: TaskId) -> Option<TaskState>;

    fn task_condition(&self, id: TaskId) -> Option<WakeCondition>;

    /// Drains counter/task transitions since the previous call.
    fn drain_changes(&mut self, out: &mut Vec<Change>);

    /// Sets the virtual timestamp applied to subsequently emitted records.
    fn set_now(&mut self, vtime: Option<u64>);

    fn value_of(&self, x: VariableId) -> Value;

    fn txn_status(&self, t: TxnId) -> crate::types::TxnStatus;

    /// True when no transaction is mid-operation and no task is pending.
    fn quiescent(&self) -> bool;

    fn counter_value(&self, var: VariableId, kind: CounterKind) -> u64;

    fn wait_satisfied(&self, cond: &WaitCondition) -> bool {
        match cond {
            WaitCondition::Counter(c) => self.counter_value(c.var, c.counter) == c.target,
            WaitCondition::Task(id) => self
                .task_state(*id)
                .map(|s| s.is_terminal())
                .unwrap_or(true),
        }
    }
}
