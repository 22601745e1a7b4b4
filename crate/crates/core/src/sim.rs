//! Deterministic drivers for the engine cores.
//!
//! Three ways to schedule the same resumable state machines:
//!
//! * [`explore`] — exhaustive interleaving exploration with state
//!   deduplication, for small-scope oracles (final-memory serialization,
//!   abort cascades).
//! * [`run_det`] — a single run under a pluggable scheduling policy
//!   (seeded random, or the replay policy that gives byte-identical traces
//!   for scenario scripts).
//! * [`simulate`] — virtual-time execution: operations on shared variables
//!   cost a fixed number of ticks of thread-local work, synchronization
//!   waits resolve at the virtual instant their condition becomes true, and
//!   concurrency-control bookkeeping is free. Used for execution-time
//!   comparisons between the two engines.

use crate::engine::{Change, OpResult, Outcome, TxnOp, VersionedTm, WaitCondition};
use crate::types::{TaskId, TxnDescriptor, TxnId};
use rand::Rng;
use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// One scheduling unit of a thread's program.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ScriptStep {
    /// Start the thread's next transaction.
    Begin(TxnDescriptor),
    Op(TxnOp),
    /// Rendezvous with every other thread whose script names the same id.
    Barrier(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ThreadScript {
    pub steps: Vec<ScriptStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Cursor {
    pc: usize,
    cur: Option<TxnId>,
    blocked: Option<WaitCondition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Entity {
    Thread(usize),
    Task(TaskId),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error("deadlock: no runnable thread or task; blocked: {0}")]
    Deadlock(String),
    #[error("state budget of {0} exceeded")]
    BudgetExceeded(usize),
    #[error("engine rejected step: {0}")]
    Step(String),
}

struct Machine<E: VersionedTm> {
    engine: E,
    scripts: Arc<[ThreadScript]>,
    cursors: Vec<Cursor>,
    /// Transactions begun by each thread, in order.
    txns: Vec<Vec<TxnId>>,
    /// Aborted results observed for ops other than TryAbort.
    forced_aborts: u64,
    changes: Vec<Change>,
}

impl<E: VersionedTm> Machine<E> {
    fn new(engine: E, scripts: Vec<ThreadScript>) -> Self {
        let n = scripts.len();
        Machine {
            engine,
            scripts: scripts.into(),
            cursors: vec![
                Cursor {
                    pc: 0,
                    cur: None,
                    blocked: None
                };
                n
            ],
            txns: vec![Vec::new(); n],
            forced_aborts: 0,
            changes: Vec::new(),
        }
    }

    fn thread_done(&self, i: usize) -> bool {
        self.cursors[i].pc >= self.scripts[i].steps.len()
    }

    fn all_done(&self) -> bool {
        (0..self.scripts.len()).all(|i| self.thread_done(i))
    }

    fn barrier_count(&self, id: u32) -> usize {
        self.scripts
            .iter()
            .filter(|s| s.steps.contains(&ScriptStep::Barrier(id)))
            .count()
    }

    fn barrier_arrived(&self, id: u32) -> usize {
        (0..self.scripts.len())
            .filter(|&i| {
                self.scripts[i].steps[..self.cursors[i].pc.min(self.scripts[i].steps.len())]
                    .contains(&ScriptStep::Barrier(id))
                    || matches!(
                        self.scripts[i].steps.get(self.cursors[i].pc),
                        Some(ScriptStep::Barrier(b)) if *b == id
                    )
            })
            .count()
    }

    fn thread_runnable(&self, i: usize) -> bool {
        if self.thread_done(i) {
            return false;
        }
        let cur = &self.cursors[i];
        if let Some(cond) = &cur.blocked {
            return self.engine.wait_satisfied(cond);
        }
        match &self.scripts[i].steps[cur.pc] {
            ScriptStep::Barrier(b) => self.barrier_arrived(*b) == self.barrier_count(*b),
            _ => true,
        }
    }

    fn runnable(&self, out: &mut Vec<Entity>) {
        out.clear();
        let mut tasks = Vec::new();
        self.engine.ready_tasks(&mut tasks);
        for id in tasks {
            out.push(Entity::Task(id));
        }
        for i in 0..self.scripts.len() {
            if self.thread_runnable(i) {
                out.push(Entity::Thread(i));
            }
        }
    }

    /// Performs one transition. Returns false if the thread blocked.
    fn step(&mut self, ent: Entity) -> Result<bool, RunError> {
        match ent {
            Entity::Task(id) => {
                self.engine.run_task(id);
                self.engine.drain_changes(&mut self.changes);
                Ok(true)
            }
            Entity::Thread(i) => {
                let pc = self.cursors[i].pc;
                let step = self.scripts[i].steps[pc].clone();
                let progressed = match step {
                    ScriptStep::Begin(desc) => {
                        let t = self
                            .engine
                            .begin(&desc)
                            .map_err(|e| RunError::Step(e.to_string()))?;
                        self.cursors[i].cur = Some(t);
                        self.txns[i].push(t);
                        self.cursors[i].pc += 1;
                        true
                    }
                    ScriptStep::Barrier(_) => {
                        self.cursors[i].pc += 1;
                        true
                    }
                    ScriptStep::Op(op) => {
                        let t = self.cursors[i].cur.expect("op before begin");
                        match self
                            .engine
                            .step(t, op)
                            .map_err(|e| RunError::Step(e.to_string()))?
                        {
                            Outcome::Ready(res) => {
                                if res == OpResult::Aborted && op != TxnOp::TryAbort {
                                    self.forced_aborts += 1;
                                }
                                self.cursors[i].blocked = None;
                                // An abort ends the transaction: skip the
                                // rest of its ops up to the next Begin.
                                if res == OpResult::Aborted {
                                    self.skip_to_next_begin(i);
                                } else {
                                    self.cursors[i].pc += 1;
                                }
                                true
                            }
                            Outcome::Blocked(cond) => {
                                self.cursors[i].blocked = Some(cond);
                                false
                            }
                        }
                    }
                };
                self.engine.drain_changes(&mut self.changes);
                Ok(progressed)
            }
        }
    }

    fn skip_to_next_begin(&mut self, i: usize) {
        let steps = &self.scripts[i].steps;
        let mut pc = self.cursors[i].pc + 1;
        while pc < steps.len() && !matches!(steps[pc], ScriptStep::Begin(_)) {
            pc += 1;
        }
        self.cursors[i].pc = pc;
    }

    fn blocked_report(&self) -> String {
        let mut parts = Vec::new();
        for (i, c) in self.cursors.iter().enumerate() {
            if !self.thread_done(i) {
                parts.push(format!("thread {i} at pc {} blocked on {:?}", c.pc, c.blocked));
            }
        }
        parts.join("; ")
    }
}

/// Result of a single deterministic run.
#[derive(Debug)]
pub struct RunOutcome<E> {
    pub engine: E,
    pub txns: Vec<Vec<TxnId>>,
    pub forced_aborts: u64,
}

/// Scheduling policies for [`run_det`].
pub enum Policy<'a> {
    /// Seeded uniform choice among runnable entities.
    Random(&'a mut dyn FnMut(usize) -> usize),
    /// Replay discipline: drain ready tasks (lowest id first), then run the
    /// lowest-index runnable thread. Yields byte-identical traces.
    Replay,
}

pub fn run_det<E: VersionedTm>(
    engine: E,
    scripts: Vec<ThreadScript>,
    mut policy: Policy<'_>,
) -> Result<RunOutcome<E>, RunError> {
    let mut m = Machine::new(engine, scripts);
    let mut runnable = Vec::new();
    loop {
        m.runnable(&mut runnable);
        if runnable.is_empty() {
            if m.all_done() {
                debug_assert!(m.engine.quiescent(), "waiting task at quiescence");
                return Ok(RunOutcome {
                    engine: m.engine,
                    txns: m.txns,
                    forced_aborts: m.forced_aborts,
                });
            }
            return Err(RunError::Deadlock(m.blocked_report()));
        }
        let ent = match &mut policy {
            Policy::Random(choose) => runnable[choose(runnable.len())],
            Policy::Replay => runnable[0],
        };
        m.step(ent)?;
    }
}

/// Convenience wrapper for seeded random scheduling.
pub fn run_seeded<E: VersionedTm>(
    engine: E,
    scripts: Vec<ThreadScript>,
    seed: u64,
) -> Result<RunOutcome<E>, RunError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut choose = move |n: usize| rng.gen_range(0..n);
    run_det(engine, scripts, Policy::Random(&mut choose))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExploreReport {
    pub states_expanded: usize,
    pub terminals: usize,
}

/// 128-bit state fingerprint; the collision probability over the state
/// counts reachable at desk scale is negligible.
fn fingerprint<T: Hash>(value: &T) -> (u64, u64) {
    let mut h1 = std::collections::hash_map::DefaultHasher::new();
    value.hash(&mut h1);
    let mut h2 = std::collections::hash_map::DefaultHasher::new();
    0xa5a5_5a5a_u64.hash(&mut h2);
    value.hash(&mut h2);
    h2.write_u64(h1.finish());
    (h1.finish(), h2.finish())
}

/// Exhaustively explores every reachable interleaving of `scripts`,
/// deduplicating identical intermediate states, and calls `on_terminal`
/// for each distinct terminal state.
pub fn explore<E, F>(
    initial: E,
    scripts: Vec<ThreadScript>,
    budget: usize,
    mut on_terminal: F,
) -> Result<ExploreReport, RunError>
where
    E: VersionedTm + Hash + Eq,
    F: FnMut(&E, &[Vec<TxnId>]),
{
    assert!(
        !scripts
            .iter()
            .any(|s| s.steps.iter().any(|st| matches!(st, ScriptStep::Barrier(_)))),
        "barriers are not supported under exploration"
    );
    let mut report = ExploreReport::default();
    let mut seen: HashSet<(u64, u64)> = HashSet::new();
    let mut terminal_seen: HashSet<(u64, u64)> = HashSet::new();
    let mut stack: Vec<Machine<E>> = vec![Machine::new(initial, scripts)];
    let mut runnable = Vec::new();

    while let Some(m) = stack.pop() {
        let key = fingerprint(&(&m.engine, &m.cursors, &m.txns));
        if !seen.insert(key) {
            continue;
        }
        report.states_expanded += 1;
        if report.states_expanded > budget {
            return Err(RunError::BudgetExceeded(budget));
        }
        m.runnable(&mut runnable);
        if runnable.is_empty() {
            if m.all_done() {
                debug_assert!(m.engine.quiescent(), "waiting task at quiescence");
                if terminal_seen.insert(key) {
                    report.terminals += 1;
                    on_terminal(&m.engine, &m.txns);
                }
                continue;
            }
            return Err(RunError::Deadlock(m.blocked_report()));
        }
        let mut choices = runnable.clone();
        let last = choices.pop().unwrap();
        for ent in choices {
            let mut next = Machine {
                engine: m.engine.clone(),
                scripts: Arc::clone(&m.scripts),
                cursors: m.cursors.clone(),
                txns: m.txns.clone(),
                forced_aborts: m.forced_aborts,
                changes: Vec::new(),
            };
            next.step(ent)?;
            stack.push(next);
        }
        // Reuse the expanded state for its final successor.
        let mut m = m;
        m.step(last)?;
        stack.push(m);
    }
    Ok(report)
}

/// Virtual-time execution parameters.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    /// Ticks of thread-local work charged per shared-variable operation.
    pub op_latency: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { op_latency: 100 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimOutcome {
    /// Largest virtual completion time across all threads.
    pub makespan: u64,
    pub txns: Vec<Vec<TxnId>>,
    pub forced_aborts: u64,
    pub ops: u64,
}

type SatKey = (crate::types::VariableId, crate::engine::CounterKind, u64);

/// Runs `scripts` to completion under virtual time.
///
/// Threads advance a private clock; a blocked operation resumes at the
/// instant its wake condition became true; ready tasks execute at their
/// wake instant with zero cost. Records emitted by the engine carry the
/// acting entity's clock as `vtime`. One engine/script step per scheduling
/// decision keeps timestamps coherent.
pub fn simulate<E: VersionedTm>(
    engine: E,
    scripts: Vec<ThreadScript>,
    config: SimConfig,
) -> Result<(SimOutcome, E), RunError> {
    struct Pending {
        entity: Entity,
        ready_at: u64,
    }

    // Earliest time the condition is known to hold, if ever reached.
    fn cond_time(
        cond: &WaitCondition,
        sat: &HashMap<SatKey, u64>,
        done: &HashMap<TaskId, u64>,
    ) -> Option<u64> {
        match cond {
            WaitCondition::Counter(c) => {
                if c.target == 0 {
                    Some(0)
                } else {
                    sat.get(&(c.var, c.counter, c.target)).copied()
                }
            }
            WaitCondition::Task(id) => done.get(id).copied(),
        }
    }

    let nthreads = scripts.len();
    let mut m = Machine::new(engine, scripts);
    let mut clocks = vec![0u64; nthreads];
    let mut sat_time: HashMap<SatKey, u64> = HashMap::new();
    let mut task_done_time: HashMap<TaskId, u64> = HashMap::new();
    let mut task_spawn_time: HashMap<TaskId, u64> = HashMap::new();
    let mut queued_tasks: HashSet<TaskId> = HashSet::new();
    let mut ready: Vec<Pending> = (0..nthreads)
        .map(|i| Pending {
            entity: Entity::Thread(i),
            ready_at: 0,
        })
        .collect();
    let mut waiting: Vec<(usize, WaitCondition, u64)> = Vec::new();
    let mut out = SimOutcome::default();

    while !ready.is_empty() {
        let idx = ready
            .iter()
            .enumerate()
            .min_by_key(|(_, p)| {
                let ord = match p.entity {
                    Entity::Task(id) => (0u8, id.0 as usize),
                    Entity::Thread(i) => (1u8, i),
                };
                (p.ready_at, ord)
            })
            .map(|(i, _)| i)
            .unwrap();
        let Pending { entity, ready_at } = ready.swap_remove(idx);
        let step_time;
        match entity {
            Entity::Task(id) => {
                queued_tasks.remove(&id);
                step_time = ready_at;
                m.engine.set_now(Some(step_time));
                m.engine.run_task(id);
                m.engine.drain_changes(&mut m.changes);
            }
            Entity::Thread(i) => {
                if m.thread_done(i) {
                    continue;
                }
                clocks[i] = clocks[i].max(ready_at);
                step_time = clocks[i];
                let pc = m.cursors[i].pc;
                if matches!(m.scripts[i].steps[pc], ScriptStep::Barrier(_)) {
                    return Err(RunError::Step(
                        "barriers are not supported under simulation".into(),
                    ));
                }
                let is_shared_op = matches!(
                    m.scripts[i].steps[pc],
                    ScriptStep::Op(TxnOp::Read(_) | TxnOp::Write(..))
                );
                m.engine.set_now(Some(step_time));
                let progressed = m.step(Entity::Thread(i))?;
                if progressed {
                    if is_shared_op {
                        clocks[i] += config.op_latency;
                        out.ops += 1;
                    }
                    if !m.thread_done(i) {
                        ready.push(Pending {
                            entity: Entity::Thread(i),
                            ready_at: clocks[i],
                        });
                    }
                } else {
                    let cond = m.cursors[i].blocked.unwrap();
                    waiting.push((i, cond, clocks[i]));
                }
            }
        }
        // Fold this step's counter/task transitions into the timing maps.
        let changes = std::mem::take(&mut m.changes);
        for ch in changes {
            match ch {
                Change::Counter { var, kind, value } => {
                    sat_time.entry((var, kind, value)).or_insert(step_time);
                }
                Change::TaskFinished { task, .. } => {
                    task_done_time.entry(task).or_insert(step_time);
                }
                Change::TaskSpawned { task, .. } => {
                    task_spawn_time.entry(task).or_insert(step_time);
                }
            }
        }
        // Wake blocked threads whose condition time is now known.
        let mut i = 0;
        while i < waiting.len() {
            let (tid, cond, since) = waiting[i];
            if let Some(t) = cond_time(&cond, &sat_time, &task_done_time) {
                ready.push(Pending {
                    entity: Entity::Thread(tid),
                    ready_at: t.max(since),
                });
                waiting.swap_remove(i);
            } else {
                i += 1;
            }
        }
        // Queue tasks whose wake condition holds.
        let mut tasks = Vec::new();
        m.engine.ready_tasks(&mut tasks);
        for id in tasks {
            if !queued_tasks.insert(id) {
                continue;
            }
            let cond = m.engine.task_condition(id).unwrap();
            let sat = cond_time(
                &WaitCondition::Counter(cond),
                &sat_time,
                &task_done_time,
            )
            .unwrap_or(step_time);
            let spawn = task_spawn_time.get(&id).copied().unwrap_or(step_time);
            ready.push(Pending {
                entity: Entity::Task(id),
                ready_at: sat.max(spawn),
            });
        }
        if ready.is_empty() && !m.all_done() {
            return Err(RunError::Deadlock(m.blocked_report()));
        }
    }
    debug_assert!(m.engine.quiescent(), "waiting task at quiescence");
    out.makespan = clocks.iter().copied().max().unwrap_or(0);
    out.txns = m.txns;
    out.forced_aborts = m.forced_aborts;
    Ok((out, m.engine))
}
