//! The supremum-versioning baseline.
//!
//! Operation-type agnostic: every access counts against a single supremum
//! sup(x) = rub(x) + wub(x), every access waits at the access condition, and
//! reads and writes act on the variable in place. Release happens after the
//! last access (access counter reaching the supremum) or at commit/abort.
//! No buffering, no asynchronous tasks.
//!
//! Recorded traces keep the one-view/one-update shape: the view is emitted
//! by the first-access checkpoint, the routine update is emitted when the
//! variable is released (carrying the final written value), and in-place
//! writes that were never released are rolled back silently — under the
//! access condition no other transaction can have observed them.

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

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct PerVar {
    sup: u32,
    ac: u32,
    pv: u64,
    rv: Option<u64>,
    st: Option<Value>,
    checkpointed: bool,
    /// At least one write was performed (in place).
    wrote: bool,
    /// The deferred routine-update record was emitted.
    updated: bool,
    /// Checkpointed baseline rolled back by another transaction's recovery.
    doomed: bool,
    released: bool,
    terminated: bool,
}

impl PerVar {
    fn new(b: &VarBounds, pv: u64) -> Self {
        PerVar {
            sup: b.rub + b.wub,
            ac: 0,
            pv,
            rv: None,
            st: None,
            checkpointed: false,
            wrote: false,
            updated: false,
            doomed: false,
            released: false,
            terminated: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Phase {
    Access,
    CommitRelease { idx: usize },
    CommitTermination { idx: usize },
    AbortVars { idx: usize, access_stage: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Inflight {
    op: TxnOp,
    phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct TxnState {
    status: TxnStatus,
    /// Set when another transaction's recovery killed a checkpointed
    /// baseline; the next step performs the abort.
    abort_pending: bool,
    vars: BTreeMap<VariableId, PerVar>,
    inflight: Option<Inflight>,
}

impl TxnState {
    fn var_at(&self, idx: usize) -> Option<VariableId> {
        self.vars.keys().nth(idx).copied()
    }
}

#[derive(Debug, Clone)]
pub struct Sva {
    config: EngineConfig,
    vars: Vec<VarState>,
    txns: Vec<TxnState>,
    changes: Vec<Change>,
    sink: TraceSink,
    now: Option<u64>,
}

impl PartialEq for Sva {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.vars == other.vars && self.txns == other.txns
    }
}

impl Eq for Sva {}

impl Hash for Sva {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.config.hash(state);
        self.vars.hash(state);
        self.txns.hash(state);
    }
}

impl Sva {
    pub fn new(num_vars: usize, config: EngineConfig, sink: TraceSink) -> Self {
        Sva {
            config,
            vars: (0..num_vars).map(|_| VarState::new()).collect(),
            txns: Vec::new(),
            changes: Vec::new(),
            sink,
            now: None,
        }
    }

    pub fn take_sink(&mut self) -> TraceSink {
        std::mem::take(&mut self.sink)
    }

    pub fn counters(&self, x: VariableId) -> (u64, u64, u64, u64) {
        let v = &self.vars[x.0 as usize];
        (v.gv, v.lv, v.ltv, v.cv)
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

    fn inconsistent(&self, t: TxnId) -> bool {
        self.txns[t.0 as usize].abort_pending
    }

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

    fn do_checkpoint(&mut self, t: TxnId, x: VariableId) {
        let value = self.vars[x.0 as usize].value;
        let cv = self.vars[x.0 as usize].cv;
        let pervar = self.txns[t.0 as usize].vars.get_mut(&x).unwrap();
        assert!(!pervar.checkpointed);
        pervar.st = Some(value);
        pervar.rv = Some(cv);
        pervar.checkpointed = true;
        self.emit(t, RecordKind::View, Some(x), Some(value), None);
    }

    /// Emits the deferred routine update (if this transaction wrote) and
    /// releases the variable.
    fn emit_update_and_release(&mut self, t: TxnId, x: VariableId) {
        let wrote = self.txns[t.0 as usize].vars[&x].wrote;
        if wrote && !self.txns[t.0 as usize].vars[&x].updated {
            let value = self.vars[x.0 as usize].value;
            self.emit(t, RecordKind::RoutineUpdate, Some(x), Some(value), None);
            self.txns[t.0 as usize].vars.get_mut(&x).unwrap().updated = true;
        }
        let pv = self.txns[t.0 as usize].vars[&x].pv;
        self.set_counter(t, x, CounterKind::Cv, pv);
        self.set_counter(t, x, CounterKind::Lv, pv);
        self.txns[t.0 as usize].vars.get_mut(&x).unwrap().released = true;
    }

    fn enter_abort(&mut self, t: TxnId) {
        let infl = self.txns[t.0 as usize].inflight.as_mut().unwrap();
        infl.phase = Phase::AbortVars {
            idx: 0,
            access_stage: true,
        };
    }

    fn advance(&mut self, t: TxnId) -> Outcome<OpResult> {
        loop {
            let infl = *self.txns[t.0 as usize].inflight.as_ref().unwrap();
            match infl.phase {
                Phase::Access => {
                    let x = infl.op.var().unwrap();
                    let pv = self.txns[t.0 as usize].vars[&x].pv;
                    if self.vars[x.0 as usize].lv != pv - 1 {
                        return Outcome::Blocked(WaitCondition::Counter(WakeCondition {
                            var: x,
                            counter: CounterKind::Lv,
                            target: pv - 1,
                        }));
                    }
                    if !self.txns[t.0 as usize].vars[&x].checkpointed {
                        self.do_checkpoint(t, x);
                    }
                    if self.inconsistent(t) {
                        self.enter_abort(t);
                        continue;
                    }
                    let result = match infl.op {
                        TxnOp::Read(_) => {
                            let v = self.vars[x.0 as usize].value;
                            self.emit(
                                t,
                                RecordKind::RespRead,
                                Some(x),
                                Some(v),
                                Some(OutcomeTag::Ok),
                            );
                            OpResult::Value(v)
                        }
                        TxnOp::Write(_, v) => {
                            self.vars[x.0 as usize].value = v;
                            self.txns[t.0 as usize].vars.get_mut(&x).unwrap().wrote = true;
                            self.emit(
                                t,
                                RecordKind::RespWrite,
                                Some(x),
                                None,
                                Some(OutcomeTag::Ok),
                            );
                            OpResult::Ok
                        }
                        _ => unreachable!(),
                    };
                    let pervar = self.txns[t.0 as usize].vars.get_mut(&x).unwrap();
                    pervar.ac += 1;
                    let last_access = pervar.ac == pervar.sup;
                    if last_access {
                        self.emit_update_and_release(t, x);
                    }
                    self.txns[t.0 as usize].inflight = None;
                    return Outcome::Ready(result);
                }
                Phase::CommitRelease { idx } => match self.commit_access(t, idx) {
                    Some(out) => return out,
                    None => continue,
                },
                Phase::CommitTermination { idx } => match self.commit_termination(t, idx) {
                    Some(out) => return out,
                    None => continue,
                },
                Phase::AbortVars { idx, access_stage } => {
                    match self.abort_step(t, idx, access_stage) {
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

    /// Secures the access right for every variable still held; the deferred
    /// updates and releases happen in the final commit transition.
    fn commit_access(&mut self, t: TxnId, mut idx: usize) -> Option<Outcome<OpResult>> {
        while let Some(x) = self.txns[t.0 as usize].var_at(idx) {
            let pervar = &self.txns[t.0 as usize].vars[&x];
            if pervar.released {
                idx += 1;
                continue;
            }
            let pv = pervar.pv;
            if !pervar.checkpointed && self.vars[x.0 as usize].lv != pv - 1 {
                self.set_phase(t, Phase::CommitRelease { idx });
                return Some(Outcome::Blocked(WaitCondition::Counter(WakeCondition {
                    var: x,
                    counter: CounterKind::Lv,
                    target: pv - 1,
                })));
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
            let pv = self.txns[t.0 as usize].vars[&x].pv;
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
        // Deferred updates and releases happen atomically with the commit
        // response, keeping non-closing writes invisible until committed.
        let vars: Vec<VariableId> = self.txns[t.0 as usize].vars.keys().copied().collect();
        for x in &vars {
            if !self.txns[t.0 as usize].vars[x].released {
                self.emit_update_and_release(t, *x);
            }
        }
        for x in vars {
            let pv = self.txns[t.0 as usize].vars[&x].pv;
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

    fn abort_step(
        &mut self,
        t: TxnId,
        mut idx: usize,
        access_stage: bool,
    ) -> Option<Outcome<OpResult>> {
        let mut first_stage = Some(access_stage);
        while let Some(x) = self.txns[t.0 as usize].var_at(idx) {
            let at_access = first_stage.take().unwrap_or(true);
            let pervar = self.txns[t.0 as usize].vars[&x].clone();
            let pv = pervar.pv;
            if at_access && !pervar.released && !pervar.checkpointed {
                if self.vars[x.0 as usize].lv != pv - 1 {
                    self.set_phase(
                        t,
                        Phase::AbortVars {
                            idx,
                            access_stage: true,
                        },
                    );
                    return Some(Outcome::Blocked(WaitCondition::Counter(WakeCondition {
                        var: x,
                        counter: CounterKind::Lv,
                        target: pv - 1,
                    })));
                }
            }
            if self.vars[x.0 as usize].ltv != pv - 1 {
                self.set_phase(
                    t,
                    Phase::AbortVars {
                        idx,
                        access_stage: false,
                    },
                );
                return Some(Outcome::Blocked(WaitCondition::Counter(WakeCondition {
                    var: x,
                    counter: CounterKind::Ltv,
                    target: pv - 1,
                })));
            }
            let pervar = self.txns[t.0 as usize].vars[&x].clone();
            if pervar.wrote && !pervar.doomed {
                if pervar.updated {
                    let rv = pervar.rv.unwrap();
                    let st = pervar.st.unwrap();
                    self.vars[x.0 as usize].value = st;
                    self.emit(t, RecordKind::RecoveryUpdate, Some(x), Some(st), None);
                    self.set_counter(t, x, CounterKind::Cv, rv);
                    self.push_doom(t, x, rv);
                } else {
                    // In-place writes nobody could have seen: roll back
                    // silently. A doomed checkpoint means an earlier
                    // recovery already overwrote them.
                    self.vars[x.0 as usize].value = pervar.st.unwrap();
                }
            }
            if !pervar.released {
                self.set_counter(t, x, CounterKind::Lv, pv);
                self.txns[t.0 as usize].vars.get_mut(&x).unwrap().released = true;
            }
            self.set_counter(t, x, CounterKind::Ltv, pv);
            self.txns[t.0 as usize].vars.get_mut(&x).unwrap().terminated = true;
            idx += 1;
        }
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
}

impl VersionedTm for Sva {
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
        self.emit(t, RecordKind::RespStart, None, None, Some(OutcomeTag::Ok));
        Ok(t)
    }

    fn step(&mut self, t: TxnId, op: TxnOp) -> Result<Outcome<OpResult>, UsageError> {
        let tx = self.txns.get(t.0 as usize).ok_or(UsageError::UnknownTxn)?;
        if tx.status != TxnStatus::Active {
            return Err(UsageError::TxnCompleted);
        }
        if let Some(infl) = tx.inflight {
            if infl.op != op {
                return Err(UsageError::OperationInFlight);
            }
            if tx.abort_pending && !matches!(infl.phase, Phase::AbortVars { .. }) {
                self.enter_abort(t);
            }
            return Ok(self.advance(t));
        }
        if let Some(x) = op.var() {
            let pervar = tx.vars.get(&x).ok_or(UsageError::AccessSetViolation(x))?;
            if pervar.ac >= pervar.sup {
                return Err(UsageError::UpperBoundExceeded {
                    var: x,
                    kind: "access",
                });
            }
        }
        let inv = match op {
            TxnOp::Read(x) => (RecordKind::InvRead, Some(x), None),
            TxnOp::Write(x, v) => (RecordKind::InvWrite, Some(x), Some(v)),
            TxnOp::TryCommit => (RecordKind::InvTryCommit, None, None),
            TxnOp::TryAbort => (RecordKind::InvTryAbort, None, None),
        };
        self.emit(t, inv.0, inv.1, inv.2, None);
        let phase = if self.txns[t.0 as usize].abort_pending {
            Phase::AbortVars {
                idx: 0,
                access_stage: true,
            }
        } else {
            match op {
            TxnOp::Read(_) => Phase::Access,
            TxnOp::Write(_, v) => {
                if self.config.reject_zero_writes && v == INITIAL_VALUE {
                    Phase::AbortVars {
                        idx: 0,
                        access_stage: true,
                    }
                } else {
                    Phase::Access
                }
            }
            TxnOp::TryCommit => Phase::CommitRelease { idx: 0 },
            TxnOp::TryAbort => Phase::AbortVars {
                idx: 0,
                access_stage: true,
            },
            }
        };
        self.txns[t.0 as usize].inflight = Some(Inflight { op, phase });
        Ok(self.advance(t))
    }

    fn ready_tasks(&self, _out: &mut Vec<TaskId>) {}

    fn run_task(&mut self, _id: TaskId) {}

    fn task_state(&self, _id: TaskId) -> Option<TaskState> {
        None
    }

    fn task_condition(&self, _id: TaskId) -> Option<WakeCondition> {
        None
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
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceBuffer;

    fn engine(num_vars: usize) -> Sva {
        Sva::new(
            num_vars,
            EngineConfig::default(),
            TraceSink::Buffer(TraceBuffer::new()),
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

    #[test]
    fn lone_txn_reads_initial_value() {
        let mut e = engine(1);
        let t = e.begin(&desc(&[(0, 1, 0)])).unwrap();
        assert_eq!(
            e.step(t, TxnOp::Read(VariableId(0))).unwrap(),
            Outcome::Ready(OpResult::Value(0))
        );
    }

    #[test]
    fn later_version_blocks_until_last_access_of_earlier() {
        let mut e = engine(1);
        let t1 = e.begin(&desc(&[(0, 0, 2)])).unwrap();
        let t2 = e.begin(&desc(&[(0, 1, 0)])).unwrap();
        assert!(matches!(
            e.step(t2, TxnOp::Read(VariableId(0))).unwrap(),
            Outcome::Blocked(_)
        ));
        e.step(t1, TxnOp::Write(VariableId(0), 1)).unwrap();
        // sup not reached yet; t2 still blocked.
        assert!(matches!(
            e.step(t2, TxnOp::Read(VariableId(0))).unwrap(),
            Outcome::Blocked(_)
        ));
        e.step(t1, TxnOp::Write(VariableId(0), 2)).unwrap();
        assert_eq!(
            e.step(t2, TxnOp::Read(VariableId(0))).unwrap(),
            Outcome::Ready(OpResult::Value(2))
        );
        assert_eq!(e.txn_status(t1), TxnStatus::Active);
    }

    #[test]
    fn every_write_waits_at_access_condition() {
        // Unlike the optimized engine, a first write blocks while a
        // predecessor holds the variable.
        let mut e = engine(1);
        let _t1 = e.begin(&desc(&[(0, 1, 1)])).unwrap();
        let t2 = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        assert!(matches!(
            e.step(t2, TxnOp::Write(VariableId(0), 5)).unwrap(),
            Outcome::Blocked(_)
        ));
    }

    #[test]
    fn no_contention_commit_is_immediate() {
        let mut e = engine(2);
        let t = e.begin(&desc(&[(0, 1, 1), (1, 1, 0)])).unwrap();
        e.step(t, TxnOp::Write(VariableId(0), 3)).unwrap();
        assert_eq!(
            e.step(t, TxnOp::TryCommit).unwrap(),
            Outcome::Ready(OpResult::Committed)
        );
    }

    #[test]
    fn abort_restores_checkpoint_and_resets_cv() {
        let mut e = engine(1);
        let t = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        e.step(t, TxnOp::Write(VariableId(0), 4)).unwrap();
        // sup reached: released, update emitted, cv = 1.
        assert_eq!(e.counters(VariableId(0)).3, 1);
        assert_eq!(
            e.step(t, TxnOp::TryAbort).unwrap(),
            Outcome::Ready(OpResult::Aborted)
        );
        assert_eq!(e.value_of(VariableId(0)), 0);
        assert_eq!(e.counters(VariableId(0)).3, 0);
    }

    #[test]
    fn trace_has_single_routine_update_for_multi_write_txn() {
        let mut e = engine(1);
        let t = e.begin(&desc(&[(0, 0, 2)])).unwrap();
        e.step(t, TxnOp::Write(VariableId(0), 4)).unwrap();
        e.step(t, TxnOp::Write(VariableId(0), 5)).unwrap();
        e.step(t, TxnOp::TryCommit).unwrap();
        let trace = e.take_sink().into_trace().unwrap();
        let updates: Vec<_> = trace
            .records()
            .iter()
            .filter(|r| r.kind == RecordKind::RoutineUpdate)
            .collect();
        assert_eq!(updates.len(), 1);
        assert_eq!(updates[0].value, Some(5));
    }

    #[test]
    fn commit_order_follows_version_order() {
        let mut e = engine(1);
        let t1 = e.begin(&desc(&[(0, 0, 1)])).unwrap();
        let t2 = e.begin(&desc(&[(0, 1, 0)])).unwrap();
        e.step(t1, TxnOp::Write(VariableId(0), 1)).unwrap();
        e.step(t2, TxnOp::Read(VariableId(0))).unwrap();
        assert!(matches!(
            e.step(t2, TxnOp::TryCommit).unwrap(),
            Outcome::Blocked(_)
        ));
        assert_eq!(
            e.step(t1, TxnOp::TryCommit).unwrap(),
            Outcome::Ready(OpResult::Committed)
        );
        assert_eq!(
            e.step(t2, TxnOp::TryCommit).unwrap(),
            Outcome::Ready(OpResult::Committed)
        );
    }
}
