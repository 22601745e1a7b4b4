//! The optimized supremum-versioning engine.
//!
//! Concurrency control is by four version counters per variable. A starting
//! transaction atomically draws a private version pv(x) from gv(x) for every
//! declared variable. Access to x is granted when pv(x)-1 = lv(x); completion
//! is serialized by pv(x)-1 = ltv(x); cv(x)/rv(x) track the last consistent
//! version and drive forced aborts when rv > cv.
//!
//! Reads and writes are buffered. A variable that will only be read is
//! buffered and released by an asynchronous `read_buffer` task as soon as the
//! access condition holds, and committed early by `read_commit`. Writes never
//! wait: they go to the buffer, and the closing write (write counter reaching
//! the declared bound) schedules `write_buffer`, which applies the buffer to
//! memory and releases the variable while the transaction keeps running.
//! Writers that stop short of their bound catch up during commit.

use super::*;
use crate::trace::{OutcomeTag, Record, RecordKind, TraceSink};
use crate::types::*;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct VarState {
    value: Value,
    gv: u64,
    lv: u64,
    ltv: u64,
    cv: u64,
}

impl VarState {
    fn new() -> Self {
        VarState {
            value: INITIAL_VALUE,
            gv: 0,
            lv: 0,
            ltv: 0,
            cv: 0,
        }
    }

    fn counter(&self, kind: CounterKind) -> u64 {
        match kind {
            CounterKind::Lv => self.lv,
            CounterKind::Ltv => self.ltv,
            CounterKind::Cv => self.cv,
        }
    }
}

/// Transaction-local bookkeeping for one declared variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct PerVar {
    rub: u32,
    wub: u32,
    pv: u64,
    rv: Option<u64>,
    rc: u32,
    wc: u32,
    buf: Option<Value>,
    /// Checkpoint copy used by the recovery update.
    st: Option<Value>,
    checkpointed: bool,
    released: bool,
    terminated: bool,
    /// A routine update for this variable was issued by this transaction.
    updated: bool,
    /// The recovery version this transaction checkpointed against was rolled
    /// back by another transaction's recovery update: the checkpoint copy is
    /// dead and must not be restored.
    doomed: bool,
    rb_task: Option<TaskId>,
    wb_task: Option<TaskId>,
    rc_task: Option<TaskId>,
}

impl PerVar {
    fn new(b: &VarBounds, pv: u64) -> Self {
        PerVar {
            rub: b.rub,
            wub: b.wub,
            pv,
            rv: None,
            rc: 0,
            wc: 0,
            buf: None,
            st: None,
            checkpointed: false,
            released: false,
            terminated: false,
            updated: false,
            doomed: false,
            rb_task: None,
            wb_task: None,
            rc_task: None,
        }
    }

    fn read_only(&self) -> bool {
        self.rub > 0 && self.wub == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum AbortStage {
    Access,
    Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Phase {
    ReadJoinRb,
    ReadAccess,
    CommitCatchUp { idx: usize },
    CommitTermination { idx: usize },
    CommitJoinRc { idx: usize },
    AbortVars { idx: usize, stage: AbortStage },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Inflight {
    op: TxnOp,
    phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct TxnState {
    status: TxnStatus,
    /// Set by asynchronous tasks on consistency failure; the next API call
    /// performs the abort.
    abort_pending: bool,
    vars: BTreeMap<VariableId, PerVar>,
    inflight: Option<Inflight>,
}

impl TxnState {
    fn pv(&self, x: VariableId) -> u64 {
        self.vars[&x].pv
    }

    fn var_at(&self, idx: usize) -> Option<VariableId> {
        self.vars.keys().nth(idx).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum TaskKind {
    ReadBuffer,
    WriteBuffer,
    ReadCommit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Task {
    txn: TxnId,
    var: VariableId,
    kind: TaskKind,
    cond: WakeCondition,
    state: TaskState,
}

/// The engine core. All methods are single atomic transitions; drivers
/// provide mutual exclusion and wakeups.
#[derive(Debug, Clone)]
pub struct OptSva {
    config: EngineConfig,
    vars: Vec<VarState>,
    txns: Vec<TxnState>,
    tasks: Vec<Task>,
    changes: Vec<Change>,
    sink: TraceSink,
    now: Option<u64>,
}

impl PartialEq for OptSva {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.vars == other.vars
            && self.txns == other.txns
            && self.tasks == other.tasks
    }
}

impl Eq for OptSva {}

impl Hash for OptSva {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.config.hash(state);
        self.vars.hash(state);
        self.txns.hash(state);
        self.tasks.hash(state);
    }
}

impl OptSva {
    pub fn new(num_vars: usize, config: EngineConfig, sink: TraceSink) -> Self {
        OptSva {
            config,
            vars: (0..num_vars).map(|_| VarState::new()).collect(),
            txns: Vec::new(),
            tasks: Vec::new(),
            changes: Vec::new(),
            sink,
            now: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn take_sink(&mut self) -> TraceSink {
        std::mem::take(&mut self.sink)
    }

    pub fn counters(&self, x: VariableId) -> (u64, u64, u64, u64) {
        let v = &self.vars[x.0 as usize];
        (v.gv, v.lv, v.ltv, v.cv)
    }

    pub fn private_version(&self, t: TxnId, x: VariableId) -> Option<u64> {
        self.txns
            .get(t.0 as usize)
            .and_then(|tx| tx.vars.get(&x))
            .map(|pv| pv.pv)
    }

    pub fn abort_pending(&self, t: TxnId) -> bool {
        self.txns[t.0 as usize].abort_pending
    }

    fn emit(
        &mut self,
        txn: TxnId,
        kind: RecordKind,
        var: Option<VariableId>,
        value: Option<Value>,
        outcome: Option<OutcomeTag>,
    ) {
        self.sink.record(Record {
            seq: 0,
            txn,
            kind,
            var,
            value,
            outcome,
            vtime: self.now,
            vars: None,
        });
    }

    fn set_counter(&mut self, t: TxnId, x: VariableId, kind: CounterKind, value: u64) {
        let v = &mut self.vars[x.0 as usize];
        let rec = match kind {
            CounterKind::Lv => {
                v.lv = value;
                RecordKind::LvUpdate
            }
            CounterKind::Ltv => {
                v.ltv = value;
                RecordKind::LtvUpdate
            }
            CounterKind::Cv => {
                v.cv = value;
                RecordKind::CvUpdate
            }
        };
        self.emit(t, rec, Some(x), Some(value as Value), None);
        self.changes.push(Change::Counter { var: x, kind, value });
    }

    fn spawn_task(&mut self, t: TxnId, x: VariableId, kind: TaskKind, cond: WakeCondition) -> TaskId {
        let id = TaskId(self.tasks.len() as u32);
        self.tasks.push(Task {
            txn: t,
            var: x,
            kind,
            cond,
            state: TaskState::Waiting,
        });
        self.changes.push(Change::TaskSpawned { task: id, cond });
        id
    }

    fn finish_task(&mut self, id: TaskId, failed: bool) {
        self.tasks[id.0 as usize].state = if failed {
            TaskState::Failed
        } else {
            TaskState::Done
        };
        self.changes.push(Change::TaskFinished { task: id, failed });
    }

    fn cancel_task(&mut self, id: TaskId) {
        let task = &mut self.tasks[id.0 as usize];
        if task.state == TaskState::Waiting {
            task.state = TaskState::Cancelled;
            self.changes.push(Change::TaskFinished {
                task: id,
                failed: false,
            });
        }
    }

    fn cond_holds(&self, cond: WakeCondition) -> bool {
        self.vars[cond.var.0 as usize].counter(cond.counter) == cond.target
    }

    /// View of x's state plus recovery bookkeeping: st gets the current
    /// value, rv the current version.
    fn do_checkpoint(&mut self, t: TxnId, x: VariableId) {
        let value = self.vars[x.0 as usize].value;
        let cv = self.vars[x.0 as usize].cv;
        let pv = self.txns[t.0 as usize].vars.get_mut(&x).unwrap();
        assert!(!pv.checkpointed, "checkpoint invoked twice for {t}/{x}");
        pv.st = Some(value);
        pv.rv = Some(cv);
        pv.checkpointed = true;
        self.emit(t, RecordKind::View, Some(x), Some(value), None);
    }

    /// Makes x available to the version successor: cv and lv advance to pv.
    fn do_release(&mut self, t: TxnId, x: VariableId) {
        let pv = {
            let pervar = &self.txns[t.0 as usize].vars[&x];
            assert!(!pervar.released, "double release for {t}/{x}");
            pervar.pv
        };
        self.set_counter(t, x, CounterKind::Cv, pv);
        self.set_counter(t, x, CounterKind::Lv, pv);
        self.txns[t.0 as usize].vars.get_mut(&x).unwrap().released = true;
    }

    /// Forced-abort test. A recovery update is the only transition that can
    /// invalidate a checkpointed state, and it marks every affected live
    /// transaction at that instant, so the per-access consistency check
    /// reduces to reading the flag.
    fn inconsistent(&self, t: TxnId) -> bool {
        self.txns[t.0 as usize].abort_pending
    }

    /// A recovery rolled x back to `baseline`: every live transaction whose
    /// recovery version for x is newer checkpointed state that just died.
    fn push_doom(&mut self, aborter: TxnId, x: VariableId, baseline: u64) {
        for i in 0..self.txns.len() {
            if i == aborter.0 as usize || self.txns[i].status != TxnStatus::Active {
                continue;
            }
            if let Some(pervar) = self.txns[i].vars.get_mut(&x) {
                if pervar.rv.map(|rv| rv > baseline).unwrap_or(false) {
                    pervar.doomed = true;
                    self.txns[i].abort_pending = true;
                }
            }
        }
    }

    fn enter_abort(&mut self, t: TxnId) {
        let infl = self.txns[t.0 as usize].inflight.as_mut().unwrap();
        infl.phase = Phase::AbortVars {
            idx: 0,
            stage: AbortStage::Access,
        };
    }

    /// Dispatches one resumable step of the in-flight operation.
    fn advance(&mut self, t: TxnId) -> Outcome<OpResult> {
        loop {
            let infl = *self.txns[t.0 as usize].inflight.as_ref().unwrap();
            match infl.phase {
                Phase::ReadJoinRb => {
                    let x = infl.op.var().unwrap();
                    let rb = self.txns[t.0 as usize].vars[&x].rb_task.unwrap();
                    match self.tasks[rb.0 as usize].state {
                        TaskState::Waiting => return Outcome::Blocked(WaitCondition::Task(rb)),
                        TaskState::Failed => {
                            self.txns[t.0 as usize].abort_pending = true;
                            self.enter_abort(t);
                        }
                        TaskState::Done => {
                            let pervar = self.txns[t.0 as usize].vars.get_mut(&x).unwrap();
                            pervar.rc += 1;
                            let v = pervar.buf.unwrap();
                            self.emit(
                                t,
                                RecordKind::RespRead,
                                Some(x),
                                Some(v),
                                Some(OutcomeTag::Ok),
                            );
                            self.txns[t.0 as usize].inflight = None;
                            return Outcome::Ready(OpResult::Value(v));
                        }
                        TaskState::Cancelled => unreachable!("rb cancelled while txn active"),
                    }
                }
                Phase::ReadAccess => {
                    let x = infl.op.var().unwrap();
                    let pv = self.txns[t.0 as usize].pv(x);
                    if self.vars[x.0 as usize].lv != pv - 1 {
                        return Outcome::Blocked(WaitCondition::Counter(WakeCondition {
                            var: x,
                            counter: CounterKind::Lv,
                            target: pv - 1,
                        }));
                    }
                    if !self.txns[t.0 as usize].vars[&x].checkpointed {
                        self.do_checkpoint(t, x);
                        let pervar = self.txns[t.0 as usize].vars.get_mut(&x).unwrap();
                        if pervar.buf.is_none() {
                            pervar.buf = pervar.st;
                        }
                    }
                    if self.inconsistent(t) {
                        self.enter_abort(t);
                        continue;
                    }
                    let pervar = self.txns[t.0 as usize].vars.get_mut(&x).unwrap();
                    pervar.rc += 1;
                    let v = pervar.buf.unwrap();
                    self.emit(
                        t,
                        RecordKind::RespRead,
                        Some(x),
                        Some(v),
                        Some(OutcomeTag::Ok),
                    );
                    self.txns[t.0 as usize].inflight = None;
                    return Outcome::Ready(OpResult::Value(v));
                }
                Phase::CommitCatchUp { idx } => {
                    match self.commit_access(t, idx) {
                        Some(out) => return out,
                        None => continue,
                    }
                }
                Phase::CommitTermination { idx } => {
                    match self.commit_termination(t, idx) {
                        Some(out) => return out,
                        None => continue,
                    }
                }
                Phase::CommitJoinRc { idx } => {
                    match self.commit_join_rc(t, idx) {
                        Some(out) => return out,
                        None => continue,
                    }
                }
                Phase::AbortVars { idx, stage } => {
                    match self.abort_step(t, idx, stage) {
                        Some(out) => return out,
                        None => continue,
                    }
                }
            }
        }
    }

    fn set_phase(&mut self, t: TxnId, phase: Phase) {
        self.txns[t.0 as usize].inflight.as_mut().unwrap().phase = phase;
    }

    /// Commit step: secure the access right for every variable this
    /// transaction still holds (joining pending write_buffer tasks), and
    /// checkpoint catch-up variables. Memory updates and releases are
    /// deferred to the final commit transition so that no other transaction
    /// can view a non-closing write before our commit response.
    fn commit_access(&mut self, t: TxnId, mut idx: usize) -> Option<Outcome<OpResult>> {
        while let Some(x) = self.txns[t.0 as usize].var_at(idx) {
            let pervar = &self.txns[t.0 as usize].vars[&x];
            if pervar.read_only() || pervar.released {
                idx += 1;
                continue;
            }
            // A closing write was issued but its write_buffer task has not
            // run yet: wait for it rather than double-releasing.
            if pervar.wub > 0 && pervar.wc == pervar.wub {
                let wb = pervar.wb_task.unwrap();
                match self.tasks[wb.0 as usize].state {
                    TaskState::Waiting => {
                        self.set_phase(t, Phase::CommitCatchUp { idx });
                        return Some(Outcome::Blocked(WaitCondition::Task(wb)));
                    }
                    TaskState::Failed => {
                        self.enter_abort(t);
                        return None;
                    }
                    _ => {
                        idx += 1;
                        continue;
                    }
                }
            }
            let pv = pervar.pv;
            if !pervar.checkpointed && self.vars[x.0 as usize].lv != pv - 1 {
                self.set_phase(t, Phase::CommitCatchUp { idx });
                return Some(Outcome::Blocked(WaitCondition::Counter(WakeCondition {
                    var: x,
                    counter: CounterKind::Lv,
                    target: pv - 1,
                })));
            }
            let pervar = &self.txns[t.0 as usize].vars[&x];
            if pervar.wc > 0 && !pervar.checkpointed {
                // Catch-up variable: checkpoint now, update at the end.
                self.do_checkpoint(t, x);
            }
            if self.inconsistent(t) {
                self.enter_abort(t);
                return None;
            }
            idx += 1;
        }
        self.set_phase(t, Phase::CommitTermination { idx: 0 });
        None
    }

    fn commit_termination(&mut self, t: TxnId, mut idx: usize) -> Option<Outcome<OpResult>> {
        while let Some(x) = self.txns[t.0 as usize].var_at(idx) {
            let pervar = &self.txns[t.0 as usize].vars[&x];
            if pervar.read_only() {
                idx += 1;
                continue;
            }
            let pv = pervar.pv;
            if self.vars[x.0 as usize].ltv != pv - 1 {
                self.set_phase(t, Phase::CommitTermination { idx });
                return Some(Outcome::Blocked(WaitCondition::Counter(WakeCondition {
                    var: x,
                    counter: CounterKind::Ltv,
                    target: pv - 1,
                })));
            }
            idx += 1;
        }
        if self.inconsistent(t) {
            self.enter_abort(t);
            return None;
        }
        self.set_phase(t, Phase::CommitJoinRc { idx: 0 });
        None
    }

    fn commit_join_rc(&mut self, t: TxnId, mut idx: usize) -> Option<Outcome<OpResult>> {
        while let Some(x) = self.txns[t.0 as usize].var_at(idx) {
            let pervar = &self.txns[t.0 as usize].vars[&x];
            if !pervar.read_only() {
                idx += 1;
                continue;
            }
            let rb = pervar.rb_task.unwrap();
            match self.tasks[rb.0 as usize].state {
                TaskState::Waiting => {
                    self.set_phase(t, Phase::CommitJoinRc { idx });
                    return Some(Outcome::Blocked(WaitCondition::Task(rb)));
                }
                TaskState::Failed => {
                    self.enter_abort(t);
                    return None;
                }
                _ => {}
            }
            match pervar.rc_task {
                None => {
                    // rb finished without scheduling read_commit; only
                    // possible if it failed, handled above.
                    unreachable!("read_buffer done without read_commit")
                }
                Some(rc) => match self.tasks[rc.0 as usize].state {
                    TaskState::Waiting => {
                        self.set_phase(t, Phase::CommitJoinRc { idx });
                        return Some(Outcome::Blocked(WaitCondition::Task(rc)));
                    }
                    TaskState::Failed => {
                        self.enter_abort(t);
                        return None;
                    }
                    _ => {
                        idx += 1;
                    }
                },
            }
        }
        // Everything checked. Apply deferred catch-up updates, release the
        // variables this transaction still holds, and terminate — all in one
        // atomic transition with the commit response, so no successor can
        // act on these updates before the response exists.
        let vars: Vec<VariableId> = self.txns[t.0 as usize].vars.keys().copied().collect();
        for x in &vars {
            let x = *x;
            let pervar = self.txns[t.0 as usize].vars[&x].clone();
            if pervar.read_only() {
                continue;
            }
            if pervar.wc > 0 && !pervar.updated {
                let buf = pervar.buf.unwrap();
                self.vars[x.0 as usize].value = buf;
                self.emit(t, RecordKind::RoutineUpdate, Some(x), Some(buf), None);
                self.txns[t.0 as usize].vars.get_mut(&x).unwrap().updated = true;
            }
            if !pervar.released {
                self.do_release(t, x);
            }
        }
        for x in vars {
            let pervar = &self.txns[t.0 as usize].vars[&x];
            if pervar.read_only() || pervar.terminated {
                continue;
            }
            let pv = pervar.pv;
            self.set_counter(t, x, CounterKind::Ltv, pv);
            self.txns[t.0 as usize].vars.get_mut(&x).unwrap().terminated = true;
        }
        self.txns[t.0 as usize].status = TxnStatus::Committed;
        self.txns[t.0 as usize].inflight = None;
        self.emit(
            t,
            RecordKind::RespTryCommit,
            None,
            None,
            Some(OutcomeTag::Committed),
        );
        Some(Outcome::Ready(OpResult::Committed))
    }

    /// One step of the abort procedure: per variable in canonical order,
    /// wait out the access/termination conditions, roll back memory when our
    /// routine update is still the live lineage (cv has not been reset below
    /// our recovery version by an earlier transaction), and advance lv/ltv.
    fn abort_step(&mut self, t: TxnId, mut idx: usize, stage: AbortStage) -> Option<Outcome<OpResult>> {
        let mut stage = Some(stage);
        while let Some(x) = self.txns[t.0 as usize].var_at(idx) {
            let cur = stage.take().unwrap_or(AbortStage::Access);
            let pervar = self.txns[t.0 as usize].vars[&x].clone();
            let pv = pervar.pv;
            if cur == AbortStage::Access {
                // Claim duties of tasks that have not run yet.
                if let Some(rb) = pervar.rb_task {
                    self.cancel_task(rb);
                }
                if let Some(wb) = pervar.wb_task {
                    self.cancel_task(wb);
                }
                if let Some(rc) = pervar.rc_task {
                    self.cancel_task(rc);
                }
                if !pervar.released && !pervar.checkpointed {
                    if self.vars[x.0 as usize].lv != pv - 1 {
                        self.set_phase(
                            t,
                            Phase::AbortVars {
                                idx,
                                stage: AbortStage::Access,
                            },
                        );
                        return Some(Outcome::Blocked(WaitCondition::Counter(WakeCondition {
                            var: x,
                            counter: CounterKind::Lv,
                            target: pv - 1,
                        })));
                    }
                }
            }
            // Termination condition, unless read_commit already advanced it.
            if !pervar.terminated {
                if self.vars[x.0 as usize].ltv != pv - 1 {
                    self.set_phase(
                        t,
                        Phase::AbortVars {
                            idx,
                            stage: AbortStage::Termination,
                        },
                    );
                    return Some(Outcome::Blocked(WaitCondition::Counter(WakeCondition {
                        var: x,
                        counter: CounterKind::Ltv,
                        target: pv - 1,
                    })));
                }
            }
            let pervar = self.txns[t.0 as usize].vars[&x].clone();
            if pervar.wc > 0 && pervar.updated && !pervar.doomed {
                let rv = pervar.rv.unwrap();
                let st = pervar.st.unwrap();
                self.vars[x.0 as usize].value = st;
                self.emit(t, RecordKind::RecoveryUpdate, Some(x), Some(st), None);
                self.set_counter(t, x, CounterKind::Cv, rv);
                self.push_doom(t, x, rv);
            }
            if !pervar.released {
                self.set_counter(t, x, CounterKind::Lv, pv);
                self.txns[t.0 as usize].vars.get_mut(&x).unwrap().released = true;
            }
            if !pervar.terminated {
                self.set_counter(t, x, CounterKind::Ltv, pv);
                self.txns[t.0 as usize].vars.get_mut(&x).unwrap().terminated = true;
            }
            idx += 1;
        }
        // All variables handled: finalize and answer the pending operation.
        let op = self.txns[t.0 as usize].inflight.unwrap().op;
        self.txns[t.0 as usize].status = TxnStatus::Aborted;
        self.txns[t.0 as usize].abort_pending = false;
        self.txns[t.0 as usize].inflight = None;
        match op {
            TxnOp::Read(x) => self.emit(
                t,
                RecordKind::RespRead,
                Some(x),
                None,
                Some(OutcomeTag::Aborted),
            ),
            TxnOp::Write(x, _) => self.emit(
                t,
                RecordKind::RespWrite,
                Some(x),
                None,
                Some(OutcomeTag::Aborted),
            ),
            TxnOp::TryCommit => self.emit(
                t,
                RecordKind::RespTryCommit,
                None,
                None,
                Some(OutcomeTag::Aborted),
            ),
            TxnOp::TryAbort => self.emit(
                t,
                RecordKind::RespTryAbort,
                None,
                None,
                Some(OutcomeTag::Aborted),
            ),
        }
        Some(Outcome::Ready(OpResult::Aborted))
    }

    fn run_read_buffer(&mut self, id: TaskId, t: TxnId, x: VariableId) {
        if self.txns[t.0 as usize].status != TxnStatus::Active
            || self.txns[t.0 as usize].abort_pending
        {
            self.finish_task(id, true);
            return;
        }
        if self.inconsistent(t) {
            self.txns[t.0 as usize].abort_pending = true;
            self.finish_task(id, true);
            return;
        }
        let value = self.vars[x.0 as usize].value;
        let cv = self.vars[x.0 as usize].cv;
        self.emit(t, RecordKind::View, Some(x), Some(value), None);
        {
            let pervar = self.txns[t.0 as usize].vars.get_mut(&x).unwrap();
            pervar.buf = Some(value);
            pervar.rv = Some(cv);
        }
        self.do_release(t, x);
        let pv = self.txns[t.0 as usize].pv(x);
        let rc = self.spawn_task(
            t,
            x,
            TaskKind::ReadCommit,
            WakeCondition {
                var: x,
                counter: CounterKind::Ltv,
                target: pv - 1,
            },
        );
        self.txns[t.0 as usize].vars.get_mut(&x).unwrap().rc_task = Some(rc);
        self.finish_task(id, false);
    }

    fn run_write_buffer(&mut self, id: TaskId, t: TxnId, x: VariableId) {
        if self.txns[t.0 as usize].status != TxnStatus::Active
            || self.txns[t.0 as usize].abort_pending
        {
            self.finish_task(id, true);
            return;
        }
        if !self.txns[t.0 as usize].vars[&x].checkpointed {
            self.do_checkpoint(t, x);
        }
        if self.inconsistent(t) {
            self.txns[t.0 as usize].abort_pending = true;
            self.finish_task(id, true);
            return;
        }
        let buf = self.txns[t.0 as usize].vars[&x].buf.unwrap();
        self.vars[x.0 as usize].value = buf;
        self.emit(t, RecordKind::RoutineUpdate, Some(x), Some(buf), None);
        self.txns[t.0 as usize].vars.get_mut(&x).unwrap().updated = true;
        self.do_release(t, x);
        self.finish_task(id, false);
    }

    fn run_read_commit(&mut self, id: TaskId, t: TxnId, x: VariableId) {
        if self.txns[t.0 as usize].status != TxnStatus::Active
            || self.txns[t.0 as usize].abort_pending
        {
            self.finish_task(id, true);
            return;
        }
        let pervar = &self.txns[t.0 as usize].vars[&x];
        let pv = pervar.pv;
        if pervar.doomed {
            self.txns[t.0 as usize].abort_pending = true;
            self.finish_task(id, true);
            return;
        }
        self.set_counter(t, x, CounterKind::Ltv, pv);
        self.txns[t.0 as usize].vars.get_mut(&x).unwrap().terminated = true;
        self.finish_task(id, false);
    }
}

impl VersionedTm for OptSva {
    fn begin(&mut self, desc: &TxnDescriptor) -> Result<TxnId, DescriptorError> {
        desc.validate(self.vars.len())?;
        let t = TxnId(self.txns.len() as u32);
        self.sink.record(Record {
            seq: 0,
            txn: t,
            kind: RecordKind::Descriptor,
            var: None,
            value: None,
            outcome: None,
            vtime: self.now,
            vars: Some(desc.aset.clone()),
        });
        self.emit(t, RecordKind::InvStart, None, None, None);
        let mut vars = BTreeMap::new();
        for b in &desc.aset {
            let vs = &mut self.vars[b.var.0 as usize];
            vs.gv += 1;
            vars.insert(b.var, PerVar::new(b, vs.gv));
        }
        self.txns.push(TxnState {
            status: TxnStatus::Active,
            abort_pending: false,
            vars,
            inflight: None,
        });
        // Read-only variables are buffered asynchronously from the start.
        let ro: Vec<(VariableId, u64)> = self.txns[t.0 as usize]
            .vars
            .iter()
            .filter(|(_, p)| p.read_only())
            .map(|(x, p)| (*x, p.pv))
            .collect();
        for (x, pv) in ro {
            let id = self.spawn_task(
                t,
                x,
                TaskKind::ReadBuffer,
                WakeCondition {
                    var: x,
                    counter: CounterKind::Lv,
                    target: pv - 1,
                },
            );
            self.txns[t.0 as usize].vars.get_mut(&x).unwrap().rb_task = Some(id);
        }
        self.emit(t, RecordKind::RespStart, None, None, Some(OutcomeTag::Ok));
        Ok(t)
    }

    fn step(&mut self, t: TxnId, op: TxnOp) -> Result<Outcome<OpResult>, UsageError> {
        let tx = self
            .txns
            .get(t.0 as usize)
            .ok_or(UsageError::UnknownTxn)?;
        if tx.status != TxnStatus::Active {
            return Err(UsageError::TxnCompleted);
        }
        if let Some(infl) = tx.inflight {
            if infl.op != op {
                return Err(UsageError::OperationInFlight);
            }
            // A consistency failure flagged while we were blocked diverts
            // the rest of this operation into the abort procedure.
            if tx.abort_pending && !matches!(infl.phase, Phase::AbortVars { .. }) {
                self.enter_abort(t);
            }
            return Ok(self.advance(t));
        }
        // Fresh operation: validate before any event is recorded.
        match op {
            TxnOp::Read(x) => {
                let pervar = tx.vars.get(&x).ok_or(UsageError::AccessSetViolation(x))?;
                if pervar.rc >= pervar.rub {
                    return Err(UsageError::UpperBoundExceeded {
                        var: x,
                        kind: "read",
                    });
                }
            }
            TxnOp::Write(x, _) => {
                let pervar = tx.vars.get(&x).ok_or(UsageError::AccessSetViolation(x))?;
                if pervar.wc >= pervar.wub {
                    return Err(UsageError::UpperBoundExceeded {
                        var: x,
                        kind: "write",
                    });
                }
            }
            _ => {}
        }
        let inv = match op {
            TxnOp::Read(x) => (RecordKind::InvRead, Some(x), None),
            TxnOp::Write(x, v) => (RecordKind::InvWrite, Some(x), Some(v)),
            TxnOp::TryCommit => (RecordKind::InvTryCommit, None, None),
            TxnOp::TryAbort => (RecordKind::InvTryAbort, None, None),
        };
        self.emit(t, inv.0, inv.1, inv.2, None);
        let abort_pending = self.txns[t.0 as usize].abort_pending;
        let phase = if abort_pending {
            Phase::AbortVars {
                idx: 0,
                stage: AbortStage::Access,
            }
        } else {
            match op {
                TxnOp::Read(x) => {
                    let pervar = &self.txns[t.0 as usize].vars[&x];
                    if pervar.read_only() {
                        Phase::ReadJoinRb
                    } else if pervar.wc > 0 {
                        // Local read: the buffer holds our own latest write.
                        let pervar = self.txns[t.0 as usize].vars.get_mut(&x).unwrap();
                        pervar.rc += 1;
                        let v = pervar.buf.unwrap();
                        self.emit(
                            t,
                            RecordKind::RespRead,
                            Some(x),
                            Some(v),
                            Some(OutcomeTag::Ok),
                        );
                        return Ok(Outcome::Ready(OpResult::Value(v)));
                    } else {
                        Phase::ReadAccess
                    }
                }
                TxnOp::Write(x, v) => {
                    if self.config.reject_zero_writes && v == INITIAL_VALUE {
                        // Domain violation: abort instead of writing.
                        self.txns[t.0 as usize].inflight = Some(Inflight {
                            op,
                            phase: Phase::AbortVars {
                                idx: 0,
                                stage: AbortStage::Access,
                            },
                        });
                        return Ok(self.advance(t));
                    }
                    let pv = self.txns[t.0 as usize].pv(x);
                    let pervar = self.txns[t.0 as usize].vars.get_mut(&x).unwrap();
                    pervar.buf = Some(v);
                    pervar.wc += 1;
                    let closing = pervar.wc == pervar.wub;
                    if closing {
                        let id = self.spawn_task(
                            t,
                            x,
                            TaskKind::WriteBuffer,
                            WakeCondition {
                                var: x,
                                counter: CounterKind::Lv,
                                target: pv - 1,
                            },
                        );
                        self.txns[t.0 as usize].vars.get_mut(&x).unwrap().wb_task = Some(id);
                    }
                    self.emit(
                        t,
                        RecordKind::RespWrite,
                        Some(x),
                        None,
                        Some(OutcomeTag::Ok),
                    );
                    return Ok(Outcome::Ready(OpResult::Ok));
                }
                TxnOp::TryCommit => Phase::CommitCatchUp { idx: 0 },
                TxnOp::TryAbort => Phase::AbortVars {
                    idx: 0,
                    stage: AbortStage::Access,
                },
            }
        };
        self.txns[t.0 as usize].inflight = Some(Inflight { op, phase });
        Ok(self.advance(t))
    }

    fn ready_tasks(&self, out: &mut Vec<TaskId>) {
        for (i, task) in self.tasks.iter().enumerate() {
            if task.state == TaskState::Waiting && self.cond_holds(task.cond) {
                out.push(TaskId(i as u32));
            }
        }
    }

    fn run_task(&mut self, id: TaskId) {
        let task = self.tasks[id.0 as usize];
        if task.state != TaskState::Waiting {
            return;
        }
        debug_assert!(self.cond_holds(task.cond), "task run before wake condition");
        match task.kind {
            TaskKind::ReadBuffer => self.run_read_buffer(id, task.txn, task.var),
            TaskKind::WriteBuffer => self.run_write_buffer(id, task.txn, task.var),
            TaskKind::ReadCommit => self.run_read_commit(id, task.txn, task.var),
        }
    }

    fn task_state(&self, id: TaskId) -> Option<TaskState> {
        self.tasks.get(id.0 as usize).map(|t| t.state)
    }

    fn task_condition(&self, id: TaskId) -> Option<WakeCondition> {
        self.tasks.get(id.0 as usize).map(|t| t.cond)
    }

    fn drain_changes(&mut self, out: &mut Vec<Change>) {
        out.append(&mut self.changes);
    }

    fn set_now(&mut self, vtime: Option<u64>) {
        self.now = vtime;
    }

    fn value_of(&self, x: VariableId) -> Value {
        self.vars[x.0 as usize].value
    }

    fn txn_status(&self, t: TxnId) -> TxnStatus {
        self.txns[t.0 as usize].status
    }


    fn counter_value(&self, var: VariableId, kind: CounterKind) -> u64 {
        self.vars[var.0 as usize].counter(kind)
    }

    fn quiescent(&self) -> bool {
        self.txns.iter().all(|t| t.inflight.is_none())
            && self
                .tasks
                .iter()
                .all(|task| task.state != TaskState::Waiting)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceSink;

    fn engine(num_vars: usize) -> OptSva {
        OptSva::new(
            num_vars,
            EngineConfig::default(),
            TraceSink::Buffer(crate::trace::TraceBuffer::new()),
        )
    }

    fn desc(bounds: &[(u32, u32, u32)]) -> TxnDescriptor {
        TxnDescriptor::new(
            bounds
                .iter()
                .map(|&(v, r, w)| VarBounds::new(VariableId(v), r, w))
                .collect(),
        )
    }

    /// Runs all currently ready tasks to quiescence, in id order.
    fn drain_tasks(e: &mut OptSva) {
        loop {
            let mut ready = Vec::new();
            e.ready_tasks(&mut ready);
            if ready.is_empty() {
                break;
            }
            for id in ready {
                e.run_task(id);
            }
        }
    }

    #[test]
    fn first_txn_gets_private_version_one() {
        let mut e = engine(1);
        let t = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        assert_eq!(e.private_version(t, VariableId(0)), Some(1));
        assert_eq!(e.counters(VariableId(0)).0, 1);
    }

    #[test]
    fn second_concurrent_txn_gets_version_two() {
        let mut e = engine(1);
        let _t1 = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        let t2 = e.begin(&desc(&[(0, 1, 0)])).unwrap();
        assert_eq!(e.private_version(t2, VariableId(0)), Some(2));
    }

    #[test]
    fn read_only_declaration_schedules_blocked_buffer_task() {
        let mut e = engine(1);
        let _writer = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        let _reader = e.begin(&desc(&[(0, 2, 0)])).unwrap();
        // The reader's task waits for lv(x) = 1.
        let mut ready = Vec::new();
        e.ready_tasks(&mut ready);
        assert!(ready.is_empty());
        assert_eq!(
            e.task_condition(TaskId(0)),
            Some(WakeCondition {
                var: VariableId(0),
                counter: CounterKind::Lv,
                target: 1
            })
        );
    }

    #[test]
    fn empty_access_set_commits_immediately() {
        let mut e = engine(1);
        let t = e.begin(&TxnDescriptor::default()).unwrap();
        let out = e.step(t, TxnOp::TryCommit).unwrap();
        assert_eq!(out, Outcome::Ready(OpResult::Committed));
    }

    #[test]
    fn unknown_variable_is_a_configuration_error() {
        let mut e = engine(1);
        assert_eq!(
            e.begin(&desc(&[(3, 1, 0)])),
            Err(DescriptorError::UnknownVariable(VariableId(3)))
        );
    }

    #[test]
    fn local_read_returns_own_write_without_waiting() {
        let mut e = engine(1);
        let _holder = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        let t = e.begin(&desc(&[(0, 1, 2)])).unwrap();
        // Holder owns x; t's write must not block.
        let out = e.step(t, TxnOp::Write(VariableId(0), 7)).unwrap();
        assert_eq!(out, Outcome::Ready(OpResult::Ok));
        let out = e.step(t, TxnOp::Read(VariableId(0))).unwrap();
        assert_eq!(out, Outcome::Ready(OpResult::Value(7)));
    }

    #[test]
    fn write_of_zero_in_unique_mode_aborts() {
        let mut e = engine(1);
        let t = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        let out = e.step(t, TxnOp::Write(VariableId(0), 0)).unwrap();
        assert_eq!(out, Outcome::Ready(OpResult::Aborted));
        assert_eq!(e.txn_status(t), TxnStatus::Aborted);
    }

    #[test]
    fn upper_bound_violation_is_an_error_not_an_abort() {
        let mut e = engine(1);
        let t = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        e.step(t, TxnOp::Write(VariableId(0), 5)).unwrap();
        drain_tasks(&mut e);
        let err = e.step(t, TxnOp::Write(VariableId(0), 6)).unwrap_err();
        assert!(matches!(err, UsageError::UpperBoundExceeded { .. }));
        assert_eq!(e.txn_status(t), TxnStatus::Active);
    }

    #[test]
    fn access_set_violation_is_an_error() {
        let mut e = engine(2);
        let t = e.begin(&desc(&[(0, 1, 0)])).unwrap();
        let err = e.step(t, TxnOp::Read(VariableId(1))).unwrap_err();
        assert_eq!(err, UsageError::AccessSetViolation(VariableId(1)));
    }

    #[test]
    fn closing_write_releases_before_commit() {
        let mut e = engine(1);
        let t = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        e.step(t, TxnOp::Write(VariableId(0), 1)).unwrap();
        drain_tasks(&mut e);
        let (_, lv, _, cv) = e.counters(VariableId(0));
        assert_eq!((lv, cv), (1, 1));
        assert_eq!(e.value_of(VariableId(0)), 1);
        assert_eq!(e.txn_status(t), TxnStatus::Active);
    }

    #[test]
    fn successor_read_blocks_until_release() {
        let mut e = engine(1);
        let t1 = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        let t2 = e.begin(&desc(&[(0, 1, 1)])).unwrap();
        let out = e.step(t2, TxnOp::Read(VariableId(0))).unwrap();
        assert!(matches!(out, Outcome::Blocked(_)));
        e.step(t1, TxnOp::Write(VariableId(0), 1)).unwrap();
        drain_tasks(&mut e);
        let out = e.step(t2, TxnOp::Read(VariableId(0))).unwrap();
        assert_eq!(out, Outcome::Ready(OpResult::Value(1)));
    }

    #[test]
    fn commit_blocks_until_predecessor_commits() {
        let mut e = engine(1);
        let t1 = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        let t2 = e.begin(&desc(&[(0, 1, 0)])).unwrap();
        e.step(t1, TxnOp::Write(VariableId(0), 1)).unwrap();
        drain_tasks(&mut e);
        // t2 buffers x = 1 via read_buffer, reads it, then tries to commit.
        let out = e.step(t2, TxnOp::Read(VariableId(0))).unwrap();
        assert_eq!(out, Outcome::Ready(OpResult::Value(1)));
        let out = e.step(t2, TxnOp::TryCommit).unwrap();
        assert!(matches!(out, Outcome::Blocked(_)));
        // Predecessor commits; its ltv advance unblocks t2's read_commit.
        assert_eq!(
            e.step(t1, TxnOp::TryCommit).unwrap(),
            Outcome::Ready(OpResult::Committed)
        );
        drain_tasks(&mut e);
        let out = e.step(t2, TxnOp::TryCommit).unwrap();
        assert_eq!(out, Outcome::Ready(OpResult::Committed));
    }

    #[test]
    fn forced_abort_after_supplier_aborts() {
        // Fig. forced-abort: T1 writes and releases x, T2 reads it; T1 then
        // aborts, so T2's commit must return the abort constant.
        let mut e = engine(1);
        let t1 = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        let t2 = e.begin(&desc(&[(0, 1, 1)])).unwrap();
        e.step(t1, TxnOp::Write(VariableId(0), 1)).unwrap();
        drain_tasks(&mut e);
        assert_eq!(
            e.step(t2, TxnOp::Read(VariableId(0))).unwrap(),
            Outcome::Ready(OpResult::Value(1))
        );
        let blocked = e.step(t2, TxnOp::TryCommit).unwrap();
        assert!(matches!(blocked, Outcome::Blocked(_)));
        assert_eq!(
            e.step(t1, TxnOp::TryAbort).unwrap(),
            Outcome::Ready(OpResult::Aborted)
        );
        // x rolled back to 0, cv reset to 0.
        assert_eq!(e.value_of(VariableId(0)), 0);
        assert_eq!(e.counters(VariableId(0)).3, 0);
        drain_tasks(&mut e);
        let out = e.step(t2, TxnOp::TryCommit).unwrap();
        assert_eq!(out, Outcome::Ready(OpResult::Aborted));
    }

    #[test]
    fn reader_only_abort_issues_no_recovery() {
        let mut e = engine(1);
        let t = e.begin(&desc(&[(0, 1, 1)])).unwrap();
        assert_eq!(
            e.step(t, TxnOp::Read(VariableId(0))).unwrap(),
            Outcome::Ready(OpResult::Value(0))
        );
        assert_eq!(
            e.step(t, TxnOp::TryAbort).unwrap(),
            Outcome::Ready(OpResult::Aborted)
        );
        let trace = e.take_sink().into_trace().unwrap();
        assert!(!trace
            .records()
            .iter()
            .any(|r| r.kind == RecordKind::RecoveryUpdate));
    }

    #[test]
    fn catch_up_applies_buffered_write_at_commit() {
        let mut e = engine(1);
        let t = e.begin(&desc(&[(0, 0, 2)])).unwrap();
        e.step(t, TxnOp::Write(VariableId(0), 9)).unwrap();
        drain_tasks(&mut e);
        // Bound not reached: memory untouched until commit.
        assert_eq!(e.value_of(VariableId(0)), 0);
        assert_eq!(
            e.step(t, TxnOp::TryCommit).unwrap(),
            Outcome::Ready(OpResult::Committed)
        );
        assert_eq!(e.value_of(VariableId(0)), 9);
    }

    #[test]
    fn checkpoint_after_released_predecessor_records_its_version() {
        let mut e = engine(1);
        let t1 = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        let t2 = e.begin(&desc(&[(0, 1, 1)])).unwrap();
        e.step(t1, TxnOp::Write(VariableId(0), 1)).unwrap();
        drain_tasks(&mut e);
        e.step(t2, TxnOp::Read(VariableId(0))).unwrap();
        // t2's recovery version equals t1's private version.
        let tx = &e.txns[t2.0 as usize].vars[&VariableId(0)];
        assert_eq!(tx.rv, Some(1));
        assert_eq!(tx.st, Some(1));
    }
}
