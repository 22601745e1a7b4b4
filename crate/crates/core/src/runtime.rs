//! Real-thread driver.
//!
//! Wraps an engine core in a mutex, parks blocked API calls on per-variable
//! condition variables, and hands asynchronous task bodies to the
//! [`TaskScheduler`](crate::asynctask::TaskScheduler). Many application
//! threads drive distinct transaction handles against the shared engine;
//! a handle belongs to one thread at a time.

use crate::asynctask::{TaskOutcome, TaskScheduler};
use crate::engine::{Change, OpResult, Outcome, TxnOp, UsageError, VersionedTm, WaitCondition};
use crate::sim::{ScriptStep, ThreadScript};
use crate::types::{DescriptorError, TaskId, TxnDescriptor, TxnId, VariableId};
use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard, Weak};
use std::time::{Duration, Instant};

struct Shared<E: VersionedTm> {
    core: Mutex<E>,
    /// One condition variable per shared variable; waiters on any of x's
    /// counters (or x's tasks) park here.
    cvs: Vec<Condvar>,
    tasks: TaskScheduler,
    /// Wait conditions of currently blocked API calls, for deadlock reports.
    blocked: Mutex<HashMap<TxnId, WaitCondition>>,
    /// Watchdog tripped: all waiters bail out.
    poisoned: AtomicBool,
    forced_aborts: AtomicU64,
}

/// Thread-safe engine front end.
pub struct Runtime<E: VersionedTm> {
    shared: Arc<Shared<E>>,
}

impl<E: VersionedTm> Clone for Runtime<E> {
    fn clone(&self) -> Self {
        Runtime {
            shared: Arc::clone(&self.shared),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error("{0}")]
    Usage(#[from] UsageError),
    #[error("{0}")]
    Descriptor(#[from] DescriptorError),
    #[error("watchdog fired while waiting on {0:?}")]
    Poisoned(Option<WaitCondition>),
}

impl<E: VersionedTm + Send + 'static> Runtime<E> {
    pub fn new(engine: E, num_vars: usize, workers: usize) -> Self {
        Runtime {
            shared: Arc::new(Shared {
                core: Mutex::new(engine),
                cvs: (0..num_vars).map(|_| Condvar::new()).collect(),
                tasks: TaskScheduler::new(workers),
                blocked: Mutex::new(HashMap::new()),
                poisoned: AtomicBool::new(false),
                forced_aborts: AtomicU64::new(0),
            }),
        }
    }

    pub fn begin(&self, desc: &TxnDescriptor) -> Result<TxnHandle<E>, RuntimeError> {
        let mut core = self.shared.core.lock().expect("engine lock poisoned");
        let id = core.begin(desc)?;
        dispatch_changes(&self.shared, &mut core);
        Ok(TxnHandle {
            shared: Arc::clone(&self.shared),
            id,
        })
    }

    /// Runs the engine-agnostic closure against the sealed core.
    pub fn with_core<R>(&self, f: impl FnOnce(&mut E) -> R) -> R {
        let mut core = self.shared.core.lock().expect("engine lock poisoned");
        f(&mut core)
    }

    pub fn forced_aborts(&self) -> u64 {
        self.shared.forced_aborts.load(Ordering::SeqCst)
    }

    /// Trips the watchdog: blocked calls return `Poisoned` and report what
    /// they were waiting on.
    pub fn poison(&self) {
        self.shared.poisoned.store(true, Ordering::SeqCst);
        for cv in &self.shared.cvs {
            cv.notify_all();
        }
    }

    /// Conditions currently blocking API calls, for deadlock dumps.
    pub fn blocked_conditions(&self) -> Vec<(TxnId, WaitCondition)> {
        let blocked = self.shared.blocked.lock().expect("blocked lock poisoned");
        let mut v: Vec<_> = blocked.iter().map(|(t, c)| (*t, *c)).collect();
        v.sort_by_key(|(t, _)| *t);
        v
    }
}

/// Routes counter updates to parked API calls and the task scheduler, and
/// registers newly scheduled task bodies. Must run after every core
/// transition, while still holding the core lock.
fn dispatch_changes<E: VersionedTm + Send + 'static>(
    shared: &Arc<Shared<E>>,
    core: &mut MutexGuard<'_, E>,
) {
    let mut changes = Vec::new();
    core.drain_changes(&mut changes);
    for ch in changes {
        match ch {
            Change::Counter { var, kind, value } => {
                shared.cvs[var.0 as usize].notify_all();
                shared.tasks.notify(var, kind, value);
            }
            Change::TaskSpawned { task, cond } => {
                let weak: Weak<Shared<E>> = Arc::downgrade(shared);
                shared.tasks.spawn_when(cond, move || run_task_body(weak, task));
            }
            Change::TaskFinished { task, .. } => {
                if let Some(cond) = core.task_condition(task) {
                    shared.cvs[cond.var.0 as usize].notify_all();
                }
            }
        }
    }
}

fn run_task_body<E: VersionedTm + Send + 'static>(
    weak: Weak<Shared<E>>,
    task: TaskId,
) -> TaskOutcome {
    let shared = match weak.upgrade() {
        Some(s) => s,
        None => return TaskOutcome::Cancelled,
    };
    let mut core = shared.core.lock().expect("engine lock poisoned");
    core.set_now(None);
    core.run_task(task);
    let failed = matches!(
        core.task_state(task),
        Some(crate::engine::TaskState::Failed)
    );
    dispatch_changes(&shared, &mut core);
    if failed {
        TaskOutcome::Failed
    } else {
        TaskOutcome::Done
    }
}

/// One transaction, driven by its owning thread.
pub struct TxnHandle<E: VersionedTm> {
    shared: Arc<Shared<E>>,
    id: TxnId,
}

impl<E: VersionedTm + Send + 'static> TxnHandle<E> {
    pub fn id(&self) -> TxnId {
        self.id
    }

    pub fn read(&self, x: VariableId) -> Result<OpResult, RuntimeError> {
        self.drive(TxnOp::Read(x))
    }

    pub fn write(&self, x: VariableId, v: crate::types::Value) -> Result<OpResult, RuntimeError> {
        self.drive(TxnOp::Write(x, v))
    }

    pub fn commit(&self) -> Result<OpResult, RuntimeError> {
        self.drive(TxnOp::TryCommit)
    }

    pub fn abort(&self) -> Result<OpResult, RuntimeError> {
        self.drive(TxnOp::TryAbort)
    }

    fn drive(&self, op: TxnOp) -> Result<OpResult, RuntimeError> {
        let shared = &self.shared;
        let mut core = shared.core.lock().expect("engine lock poisoned");
        loop {
            let out = core.step(self.id, op);
            dispatch_changes(shared, &mut core);
            match out? {
                Outcome::Ready(res) => {
                    shared
                        .blocked
                        .lock()
                        .expect("blocked lock poisoned")
                        .remove(&self.id);
                    if res == OpResult::Aborted && op != TxnOp::TryAbort {
                        shared.forced_aborts.fetch_add(1, Ordering::SeqCst);
                    }
                    return Ok(res);
                }
                Outcome::Blocked(cond) => {
                    if shared.poisoned.load(Ordering::SeqCst) {
                        return Err(RuntimeError::Poisoned(Some(cond)));
                    }
                    shared
                        .blocked
                        .lock()
                        .expect("blocked lock poisoned")
                        .insert(self.id, cond);
                    let var = match cond {
                        WaitCondition::Counter(c) => c.var,
                        WaitCondition::Task(id) => match core.task_condition(id) {
                            Some(c) => c.var,
                            None => continue,
                        },
                    };
                    // Re-check under the lock before sleeping; wakeups are
                    // broadcast on the variable's condvar.
                    if core.wait_satisfied(&cond) {
                        continue;
                    }
                    let (guard, _timeout) = shared.cvs[var.0 as usize]
                        .wait_timeout(core, Duration::from_millis(50))
                        .expect("engine lock poisoned");
                    core = guard;
                }
            }
        }
    }
}

/// Outcome of running a set of per-thread programs on real threads.
#[derive(Debug)]
pub struct ThreadedOutcome<E> {
    pub engine: E,
    pub txns: Vec<Vec<TxnId>>,
    pub forced_aborts: u64,
    pub wall: Duration,
}

#[derive(Debug, thiserror::Error)]
#[error("watchdog timeout after {elapsed:?}; blocked: {report}")]
pub struct DeadlockReport {
    pub elapsed: Duration,
    pub report: String,
}

/// Spawns one OS thread per script and runs them against a fresh runtime.
/// `timeout` arms a watchdog that poisons the runtime and produces a dump
/// of every blocked condition.
pub fn run_threaded<E: VersionedTm + Send + 'static>(
    engine: E,
    num_vars: usize,
    scripts: Vec<ThreadScript>,
    workers: usize,
    timeout: Duration,
) -> Result<ThreadedOutcome<E>, DeadlockReport> {
    let start = Instant::now();
    let rt = Runtime::new(engine, num_vars, workers);
    let txns: Arc<Mutex<Vec<Vec<TxnId>>>> =
        Arc::new(Mutex::new(vec![Vec::new(); scripts.len()]));
    let mut joins = Vec::new();
    for (i, script) in scripts.into_iter().enumerate() {
        let rt = rt.clone();
        let txns = Arc::clone(&txns);
        joins.push(std::thread::spawn(move || run_script_thread(rt, i, script, txns)));
    }
    let deadline = start + timeout;
    let mut failed = None;
    for j in joins {
        // Poll for completion with the watchdog deadline.
        loop {
            if j.is_finished() {
                break;
            }
            if Instant::now() > deadline {
                rt.poison();
                let blocked = rt.blocked_conditions();
                return Err(DeadlockReport {
                    elapsed: start.elapsed(),
                    report: format!("{blocked:?}"),
                });
            }
            std::thread::sleep(Duration::from_millis(1));
        }
        if let Err(e) = j.join().expect("worker thread panicked") {
            failed = Some(e);
        }
    }
    if let Some(e) = failed {
        panic!("thread program failed: {e}");
    }
    let forced_aborts = rt.forced_aborts();
    let engine = rt.with_core(|core| core.clone());
    let txns = Arc::try_unwrap(txns).unwrap().into_inner().unwrap();
    Ok(ThreadedOutcome {
        engine,
        txns,
        forced_aborts,
        wall: start.elapsed(),
    })
}

fn run_script_thread<E: VersionedTm + Send + 'static>(
    rt: Runtime<E>,
    index: usize,
    script: ThreadScript,
    txns: Arc<Mutex<Vec<Vec<TxnId>>>>,
) -> Result<(), RuntimeError> {
    let mut handle: Option<TxnHandle<E>> = None;
    let mut steps = script.steps.into_iter().peekable();
    while let Some(step) = steps.next() {
        match step {
            ScriptStep::Barrier(_) => {
                panic!("barriers are only supported by the replay driver")
            }
            ScriptStep::Begin(desc) => {
                let h = rt.begin(&desc)?;
                txns.lock().unwrap()[index].push(h.id());
                handle = Some(h);
            }
            ScriptStep::Op(op) => {
                let h = handle.as_ref().expect("op before begin");
                let res = match op {
                    TxnOp::Read(x) => h.read(x)?,
                    TxnOp::Write(x, v) => h.write(x, v)?,
                    TxnOp::TryCommit => h.commit()?,
                    TxnOp::TryAbort => h.abort()?,
                };
                if res == OpResult::Aborted {
                    // Transaction is gone; skip to this thread's next Begin.
                    while let Some(next) = steps.peek() {
                        if matches!(next, ScriptStep::Begin(_)) {
                            break;
                        }
                        steps.next();
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;
    use crate::trace::TraceSink;
    use crate::types::VarBounds;
    use crate::OptSva;

    fn desc(bounds: &[(u32, u32, u32)]) -> TxnDescriptor {
        TxnDescriptor::new(
            bounds
                .iter()
                .map(|&(v, r, w)| VarBounds::new(VariableId(v), r, w))
                .collect(),
        )
    }

    #[test]
    fn two_threads_pipeline_through_shared_variable() {
        let (sink, buf) = TraceSink::shared();
        let engine = OptSva::new(1, EngineConfig::default(), sink);
        let rt = Runtime::new(engine, 1, 2);
        let rt2 = rt.clone();
        let writer = std::thread::spawn(move || {
            let h = rt2.begin(&desc(&[(0, 0, 1)])).unwrap();
            h.write(VariableId(0), 42).unwrap();
            std::thread::sleep(Duration::from_millis(5));
            assert_eq!(h.commit().unwrap(), OpResult::Committed);
        });
        let rt3 = rt.clone();
        let reader = std::thread::spawn(move || {
            let h = rt3.begin(&desc(&[(0, 1, 0)])).unwrap();
            let v = h.read(VariableId(0)).unwrap();
            assert_eq!(v, OpResult::Value(42));
            assert_eq!(h.commit().unwrap(), OpResult::Committed);
        });
        writer.join().unwrap();
        reader.join().unwrap();
        assert_eq!(rt.forced_aborts(), 0);
        drop(rt);
        let trace = Arc::try_unwrap(buf).unwrap().into_inner().unwrap().seal();
        assert!(trace.to_history().well_formed());
    }

    #[test]
    fn threaded_run_helper_reports_no_forced_aborts() {
        let scripts = vec![
            ThreadScript {
                steps: vec![
                    ScriptStep::Begin(desc(&[(0, 0, 1), (1, 1, 0)])),
                    ScriptStep::Op(TxnOp::Write(VariableId(0), 7)),
                    ScriptStep::Op(TxnOp::Read(VariableId(1))),
                    ScriptStep::Op(TxnOp::TryCommit),
                ],
            },
            ThreadScript {
                steps: vec![
                    ScriptStep::Begin(desc(&[(0, 2, 0), (1, 0, 1)])),
                    ScriptStep::Op(TxnOp::Write(VariableId(1), 8)),
                    ScriptStep::Op(TxnOp::Read(VariableId(0))),
                    ScriptStep::Op(TxnOp::Read(VariableId(0))),
                    ScriptStep::Op(TxnOp::TryCommit),
                ],
            },
        ];
        let engine = OptSva::new(2, EngineConfig::default(), TraceSink::Null);
        let out = run_threaded(engine, 2, scripts, 2, Duration::from_secs(10)).unwrap();
        assert_eq!(out.forced_aborts, 0);
        use crate::engine::VersionedTm as _;
        assert_eq!(out.engine.value_of(VariableId(0)), 7);
        assert_eq!(out.engine.value_of(VariableId(1)), 8);
    }
}
