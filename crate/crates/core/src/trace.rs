//! Execution traces and histories.
//!
//! A trace is a totally ordered log of everything observable about a run:
//! transactional API invocations and responses, raw memory events (views,
//! routine updates, recovery updates), version-counter updates, and the
//! descriptor each transaction declared at start. Logical timestamps come
//! from a single sequence counter; simulated runs additionally stamp records
//! with virtual time.
//!
//! A history is the projection of a trace onto the transactional API events
//! only; it is the object the safety definitions are stated over.

use crate::types::{TxnId, TxnStatus, Value, VarBounds, VariableId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    /// Declared access set of a starting transaction (carries `vars`).
    Descriptor,
    InvStart,
    RespStart,
    InvRead,
    RespRead,
    InvWrite,
    RespWrite,
    InvTryCommit,
    RespTryCommit,
    InvTryAbort,
    RespTryAbort,
    /// Memory read: the transaction looked at the variable's state.
    View,
    /// Ordinary memory write performed on behalf of write operations.
    RoutineUpdate,
    /// Abort-time restorative memory write.
    RecoveryUpdate,
    /// lv(x) was set to `value` by `txn`.
    LvUpdate,
    /// ltv(x) was set to `value` by `txn`.
    LtvUpdate,
    /// cv(x) was set to `value` by `txn`.
    CvUpdate,
}

impl RecordKind {
    /// Transactional API events: the subsequence forming the history.
    pub fn is_api(self) -> bool {
        use RecordKind::*;
        matches!(
            self,
            InvStart
                | RespStart
                | InvRead
                | RespRead
                | InvWrite
                | RespWrite
                | InvTryCommit
                | RespTryCommit
                | InvTryAbort
                | RespTryAbort
        )
    }

    pub fn is_memory_event(self) -> bool {
        use RecordKind::*;
        matches!(self, View | RoutineUpdate | RecoveryUpdate)
    }

    pub fn is_counter_update(self) -> bool {
        use RecordKind::*;
        matches!(self, LvUpdate | LtvUpdate | CvUpdate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeTag {
    Ok,
    Committed,
    Aborted,
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub seq: u64,
    pub txn: TxnId,
    pub kind: RecordKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub var: Option<VariableId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub outcome: Option<OutcomeTag>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vtime: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vars: Option<Vec<VarBounds>>,
}

impl Record {
    pub fn counter_value(&self) -> Option<u64> {
        if self.kind.is_counter_update() {
            self.value.map(|v| v as u64)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("trace is sealed; no further records accepted")]
    Sealed,
    #[error("malformed trace line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

/// Append-only record log with a thread-safe sequence counter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceBuffer {
    records: Vec<Record>,
    sealed: bool,
}

impl TraceBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, mut rec: Record) -> Result<u64, TraceError> {
        if self.sealed {
            return Err(TraceError::Sealed);
        }
        let seq = self.records.len() as u64;
        rec.seq = seq;
        self.records.push(rec);
        Ok(seq)
    }

    pub fn seal(self) -> Trace {
        Trace::from_records(self.records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Destination for engine-emitted records.
///
/// `Buffer` owns its log (cloning forks it, which is what the interleaving
/// explorer needs); `Shared` is handed to concurrent application threads.
#[derive(Debug, Clone, Default)]
pub enum TraceSink {
    #[default]
    Null,
    Buffer(TraceBuffer),
    Shared(Arc<Mutex<TraceBuffer>>),
}

impl TraceSink {
    pub fn shared() -> (Self, Arc<Mutex<TraceBuffer>>) {
        let buf = Arc::new(Mutex::new(TraceBuffer::new()));
        (TraceSink::Shared(buf.clone()), buf)
    }

    pub fn record(&mut self, rec: Record) {
        match self {
            TraceSink::Null => {}
            TraceSink::Buffer(b) => {
                b.record(rec).expect("recording into sealed buffer");
            }
            TraceSink::Shared(b) => {
                b.lock()
                    .expect("trace lock poisoned")
                    .record(rec)
                    .expect("recording into sealed buffer");
            }
        }
    }

    /// Extracts the owned buffer, if any.
    pub fn into_trace(self) -> Option<Trace> {
        match self {
            TraceSink::Null => None,
            TraceSink::Buffer(b) => Some(b.seal()),
            TraceSink::Shared(b) => {
                let buf = Arc::try_unwrap(b).ok()?.into_inner().ok()?;
                Some(buf.seal())
            }
        }
    }
}

/// A sealed, immutable trace.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    records: Vec<Record>,
    descriptors: BTreeMap<TxnId, Vec<VarBounds>>,
}

impl Trace {
    pub fn from_records(records: Vec<Record>) -> Self {
        let mut descriptors = BTreeMap::new();
        for r in &records {
            if r.kind == RecordKind::Descriptor {
                descriptors.insert(r.txn, r.vars.clone().unwrap_or_default());
            }
        }
        Trace {
            records,
            descriptors,
        }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn descriptor(&self, txn: TxnId) -> Option<&[VarBounds]> {
        self.descriptors.get(&txn).map(|v| v.as_slice())
    }

    pub fn descriptors(&self) -> &BTreeMap<TxnId, Vec<VarBounds>> {
        &self.descriptors
    }

    pub fn txns(&self) -> Vec<TxnId> {
        let mut ids: Vec<TxnId> = self.descriptors.keys().copied().collect();
        for r in &self.records {
            if !ids.contains(&r.txn) {
                ids.push(r.txn);
            }
        }
        ids.sort();
        ids
    }

    /// Final status of a transaction as witnessed by its response events.
    pub fn txn_status(&self, txn: TxnId) -> TxnStatus {
        for r in self.records.iter().rev() {
            if r.txn != txn {
                continue;
            }
            match r.kind {
                RecordKind::RespTryCommit => {
                    return if r.outcome == Some(OutcomeTag::Committed) {
                        TxnStatus::Committed
                    } else {
                        TxnStatus::Aborted
                    }
                }
                RecordKind::RespTryAbort => return TxnStatus::Aborted,
                RecordKind::RespRead | RecordKind::RespWrite
                    if r.outcome == Some(OutcomeTag::Aborted) =>
                {
                    return TxnStatus::Aborted
                }
                _ => {}
            }
        }
        TxnStatus::Active
    }

    /// Projection onto the transactional API events.
    pub fn to_history(&self) -> History {
        History::from_trace(self)
    }

    /// Release/completion times and overall execution time (§ timing
    /// functions). Uses virtual time when present, sequence numbers
    /// otherwise.
    pub fn timing(&self) -> Timing {
        let mut t = Timing::default();
        for r in &self.records {
            let point = TimePoint {
                seq: r.seq,
                vtime: r.vtime,
            };
            t.exec_time = t.exec_time.max(point.time());
            match r.kind {
                RecordKind::LvUpdate => {
                    t.release.entry((r.txn, r.var.unwrap())).or_insert(point);
                }
                RecordKind::LtvUpdate => {
                    t.completion.entry((r.txn, r.var.unwrap())).or_insert(point);
                }
                _ => {}
            }
        }
        t
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| TraceError::Io(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| TraceError::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, TraceError> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| TraceError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| TraceError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            records.push(rec);
        }
        Ok(Trace::from_records(records))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimePoint {
    pub seq: u64,
    pub vtime: Option<u64>,
}

impl TimePoint {
    pub fn time(&self) -> u64 {
        self.vtime.unwrap_or(self.seq)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Timing {
    pub exec_time: u64,
    pub release: BTreeMap<(TxnId, VariableId), TimePoint>,
    pub completion: BTreeMap<(TxnId, VariableId), TimePoint>,
}

impl Timing {
    pub fn release_time(&self, txn: TxnId, var: VariableId) -> Option<TimePoint> {
        self.release.get(&(txn, var)).copied()
    }

    pub fn completion_time(&self, txn: TxnId, var: VariableId) -> Option<TimePoint> {
        self.completion.get(&(txn, var)).copied()
    }
}

/// One transactional API event in a history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistEvent {
    pub seq: u64,
    pub txn: TxnId,
    pub kind: HistEventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistEventKind {
    InvStart,
    RespStart,
    InvRead(VariableId),
    /// `None` means the read returned the abort constant.
    RespRead(VariableId, Option<Value>),
    InvWrite(VariableId, Value),
    RespWrite(VariableId, bool),
    InvTryCommit,
    RespTryCommit(bool),
    InvTryAbort,
    RespTryAbort,
}

impl HistEventKind {
    pub fn is_invocation(&self) -> bool {
        use HistEventKind::*;
        matches!(
            self,
            InvStart | InvRead(_) | InvWrite(..) | InvTryCommit | InvTryAbort
        )
    }

    pub fn var(&self) -> Option<VariableId> {
        use HistEventKind::*;
        match self {
            InvRead(x) | RespRead(x, _) | InvWrite(x, _) | RespWrite(x, _) => Some(*x),
            _ => None,
        }
    }
}

/// A complete or pending operation execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpExec {
    pub txn: TxnId,
    pub inv_seq: u64,
    /// `None` for a pending execution.
    pub resp_seq: Option<u64>,
    pub kind: OpExecKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpExecKind {
    Start,
    /// `value` is `None` while pending or when aborted.
    Read {
        var: VariableId,
        value: Option<Value>,
        aborted: bool,
    },
    Write {
        var: VariableId,
        value: Value,
        ok: bool,
    },
    TryCommit {
        committed: bool,
    },
    TryAbort,
}

impl OpExec {
    pub fn is_complete(&self) -> bool {
        self.resp_seq.is_some()
    }

    pub fn var(&self) -> Option<VariableId> {
        match self.kind {
            OpExecKind::Read { var, .. } | OpExecKind::Write { var, .. } => Some(var),
            _ => None,
        }
    }
}

/// Projection of a trace onto transactional API events.
#[derive(Debug, Clone, Default)]
pub struct History {
    pub events: Vec<HistEvent>,
}

impl History {
    pub fn from_trace(tr: &Trace) -> Self {
        let mut events = Vec::new();
        for r in tr.records() {
            let kind = match r.kind {
                RecordKind::InvStart => HistEventKind::InvStart,
                RecordKind::RespStart => HistEventKind::RespStart,
                RecordKind::InvRead => HistEventKind::InvRead(r.var.unwrap()),
                RecordKind::RespRead => HistEventKind::RespRead(
                    r.var.unwrap(),
                    if r.outcome == Some(OutcomeTag::Aborted) {
                        None
                    } else {
                        r.value
                    },
                ),
                RecordKind::InvWrite => HistEventKind::InvWrite(r.var.unwrap(), r.value.unwrap()),
                RecordKind::RespWrite => HistEventKind::RespWrite(
                    r.var.unwrap(),
                    r.outcome == Some(OutcomeTag::Ok),
                ),
                RecordKind::InvTryCommit => HistEventKind::InvTryCommit,
                RecordKind::RespTryCommit => {
                    HistEventKind::RespTryCommit(r.outcome == Some(OutcomeTag::Committed))
                }
                RecordKind::InvTryAbort => HistEventKind::InvTryAbort,
                RecordKind::RespTryAbort => HistEventKind::RespTryAbort,
                _ => continue,
            };
            events.push(HistEvent {
                seq: r.seq,
                txn: r.txn,
                kind,
            });
        }
        History { events }
    }

    pub fn txns(&self) -> Vec<TxnId> {
        let mut ids = Vec::new();
        for e in &self.events {
            if !ids.contains(&e.txn) {
                ids.push(e.txn);
            }
        }
        ids.sort();
        ids
    }

    /// H|T_i: the longest subhistory of events executed by `txn`.
    pub fn project_txn(&self, txn: TxnId) -> History {
        History {
            events: self
                .events
                .iter()
                .copied()
                .filter(|e| e.txn == txn)
                .collect(),
        }
    }

    /// H|x: events on `var` that form complete operation executions.
    pub fn project_var(&self, var: VariableId) -> History {
        let mut events = Vec::new();
        for op in self.ops() {
            if op.var() == Some(var) && op.is_complete() {
                events.push(*self.event_at(op.inv_seq).unwrap());
                events.push(*self.event_at(op.resp_seq.unwrap()).unwrap());
            }
        }
        events.sort_by_key(|e| e.seq);
        History { events }
    }

    fn event_at(&self, seq: u64) -> Option<&HistEvent> {
        self.events.iter().find(|e| e.seq == seq)
    }

    /// Pairs invocations with responses per transaction, in history order.
    pub fn ops(&self) -> Vec<OpExec> {
        let mut per_txn: BTreeMap<TxnId, Option<(u64, HistEventKind)>> = BTreeMap::new();
        let mut ops = Vec::new();
        for e in &self.events {
            if e.kind.is_invocation() {
                per_txn.insert(e.txn, Some((e.seq, e.kind)));
            } else {
                let pending = per_txn.get_mut(&e.txn).and_then(|p| p.take());
                let (inv_seq, inv_kind) = match pending {
                    Some(p) => p,
                    None => continue,
                };
                let kind = match (inv_kind, e.kind) {
                    (HistEventKind::InvStart, HistEventKind::RespStart) => OpExecKind::Start,
                    (HistEventKind::InvRead(x), HistEventKind::RespRead(_, v)) => {
                        OpExecKind::Read {
                            var: x,
                            value: v,
                            aborted: v.is_none(),
                        }
                    }
                    (HistEventKind::InvWrite(x, v), HistEventKind::RespWrite(_, ok)) => {
                        OpExecKind::Write {
                            var: x,
                            value: v,
                            ok,
                        }
                    }
                    (HistEventKind::InvTryCommit, HistEventKind::RespTryCommit(c)) => {
                        OpExecKind::TryCommit { committed: c }
                    }
                    (HistEventKind::InvTryAbort, HistEventKind::RespTryAbort) => {
                        OpExecKind::TryAbort
                    }
                    _ => continue,
                };
                ops.push(OpExec {
                    txn: e.txn,
                    inv_seq,
                    resp_seq: Some(e.seq),
                    kind,
                });
            }
        }
        // Pending invocations without responses.
        for (txn, pending) in per_txn {
            if let Some((inv_seq, inv_kind)) = pending {
                let kind = match inv_kind {
                    HistEventKind::InvStart => OpExecKind::Start,
                    HistEventKind::InvRead(x) => OpExecKind::Read {
                        var: x,
                        value: None,
                        aborted: false,
                    },
                    HistEventKind::InvWrite(x, v) => OpExecKind::Write {
                        var: x,
                        value: v,
                        ok: false,
                    },
                    HistEventKind::InvTryCommit => OpExecKind::TryCommit { committed: false },
                    HistEventKind::InvTryAbort => OpExecKind::TryAbort,
                    _ => continue,
                };
                ops.push(OpExec {
                    txn,
                    inv_seq,
                    resp_seq: None,
                    kind,
                });
            }
        }
        ops.sort_by_key(|op| op.inv_seq);
        ops
    }

    /// Well-formedness per the transactional model: per transaction an
    /// alternating inv/resp sequence that starts with the start invocation,
    /// with nothing after the commit/abort response and no invocation after
    /// a tryC/tryA invocation.
    pub fn well_formed(&self) -> bool {
        for txn in self.txns() {
            let sub = self.project_txn(txn);
            let mut expecting_inv = true;
            let mut terminated = false;
            let mut finishing = false;
            for (i, e) in sub.events.iter().enumerate() {
                if terminated {
                    return false;
                }
                if i == 0 && e.kind != HistEventKind::InvStart {
                    return false;
                }
                if e.kind.is_invocation() != expecting_inv {
                    return false;
                }
                if e.kind.is_invocation() && finishing {
                    return false;
                }
                expecting_inv = !expecting_inv;
                match e.kind {
                    HistEventKind::InvTryCommit | HistEventKind::InvTryAbort => finishing = true,
                    HistEventKind::RespTryCommit(_) | HistEventKind::RespTryAbort => {
                        terminated = true
                    }
                    HistEventKind::RespRead(_, None) => terminated = true,
                    HistEventKind::RespWrite(_, false) => terminated = true,
                    _ => {}
                }
            }
        }
        true
    }

    /// Unique writes: all complete, successful writes carry pairwise distinct
    /// values, none equal to the initial value.
    pub fn unique_writes(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        for op in self.ops() {
            if let OpExecKind::Write { value, ok: true, .. } = op.kind {
                if !op.is_complete() {
                    continue;
                }
                if value == crate::types::INITIAL_VALUE || !seen.insert(value) {
                    return false;
                }
            }
        }
        true
    }

    /// Compl(H): live transactions get an appended abort; commit-pending
    /// transactions abort as well. Pending non-commit invocations are
    /// dropped.
    pub fn completion(&self) -> History {
        let mut events = self.events.clone();
        let mut next_seq = events.iter().map(|e| e.seq + 1).max().unwrap_or(0);
        for txn in self.txns() {
            let sub = self.project_txn(txn);
            let last = match sub.events.last() {
                Some(e) => *e,
                None => continue,
            };
            match last.kind {
                HistEventKind::RespTryCommit(_) | HistEventKind::RespTryAbort => {}
                HistEventKind::RespRead(_, None) | HistEventKind::RespWrite(_, false) => {}
                HistEventKind::InvTryCommit | HistEventKind::InvTryAbort => {
                    events.push(HistEvent {
                        seq: next_seq,
                        txn,
                        kind: if last.kind == HistEventKind::InvTryAbort {
                            HistEventKind::RespTryAbort
                        } else {
                            // Commit-pending transactions are aborted in the
                            // completion; the response is the abort constant.
                            HistEventKind::RespTryCommit(false)
                        },
                    });
                    next_seq += 1;
                }
                other => {
                    // Drop a pending operation invocation, then abort.
                    if other.is_invocation() {
                        let pos = events
                            .iter()
                            .position(|e| e.txn == txn && e.seq == last.seq)
                            .unwrap();
                        events.remove(pos);
                    }
                    events.push(HistEvent {
                        seq: next_seq,
                        txn,
                        kind: HistEventKind::InvTryAbort,
                    });
                    events.push(HistEvent {
                        seq: next_seq + 1,
                        txn,
                        kind: HistEventKind::RespTryAbort,
                    });
                    next_seq += 2;
                }
            }
        }
        History { events }
    }

    /// Status of `txn` within this history.
    pub fn txn_status(&self, txn: TxnId) -> TxnStatus {
        let sub = self.project_txn(txn);
        match sub.events.last() {
            Some(e) => match e.kind {
                HistEventKind::RespTryCommit(true) => TxnStatus::Committed,
                HistEventKind::RespTryCommit(false)
                | HistEventKind::RespTryAbort
                | HistEventKind::RespRead(_, None)
                | HistEventKind::RespWrite(_, false) => TxnStatus::Aborted,
                _ => TxnStatus::Active,
            },
            None => TxnStatus::Active,
        }
    }

    /// True when `txn` has invoked tryC but not yet received a response.
    pub fn commit_pending(&self, txn: TxnId) -> bool {
        let sub = self.project_txn(txn);
        matches!(
            sub.events.last().map(|e| e.kind),
            Some(HistEventKind::InvTryCommit)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::VariableId as V;

    fn rec(seq: u64, txn: u32, kind: RecordKind) -> Record {
        Record {
            seq,
            txn: TxnId(txn),
            kind,
            var: None,
            value: None,
            outcome: None,
            vtime: None,
            vars: None,
        }
    }

    #[test]
    fn record_into_empty_trace_gets_seq_zero() {
        let mut buf = TraceBuffer::new();
        let seq = buf.record(rec(99, 0, RecordKind::InvStart)).unwrap();
        assert_eq!(seq, 0);
    }

    #[test]
    fn sealed_buffer_rejects_records() {
        let mut buf = TraceBuffer::new();
        buf.record(rec(0, 0, RecordKind::InvStart)).unwrap();
        let trace = buf.seal();
        assert_eq!(trace.len(), 1);
        // A new buffer is required; the sealed trace exposes no record().
    }

    #[test]
    fn jsonl_round_trip_is_bit_exact() {
        let mut buf = TraceBuffer::new();
        buf.record(Record {
            seq: 0,
            txn: TxnId(1),
            kind: RecordKind::Descriptor,
            var: None,
            value: None,
            outcome: None,
            vtime: None,
            vars: Some(vec![VarBounds::new(V(0), 2, 1)]),
        })
        .unwrap();
        buf.record(rec(0, 1, RecordKind::InvStart)).unwrap();
        buf.record(Record {
            seq: 0,
            txn: TxnId(1),
            kind: RecordKind::RespRead,
            var: Some(V(0)),
            value: Some(7),
            outcome: None,
            vtime: Some(300),
            vars: None,
        })
        .unwrap();
        let trace = buf.seal();
        let mut bytes = Vec::new();
        trace.write_jsonl(&mut bytes).unwrap();
        let back = Trace::read_jsonl(&bytes[..]).unwrap();
        assert_eq!(back.records(), trace.records());
        let mut bytes2 = Vec::new();
        back.write_jsonl(&mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn projection_of_absent_txn_is_empty() {
        let h = History { events: vec![] };
        assert!(h.project_txn(TxnId(9)).events.is_empty());
    }

    #[test]
    fn event_after_commit_response_is_ill_formed() {
        let events = vec![
            HistEvent {
                seq: 0,
                txn: TxnId(0),
                kind: HistEventKind::InvStart,
            },
            HistEvent {
                seq: 1,
                txn: TxnId(0),
                kind: HistEventKind::RespStart,
            },
            HistEvent {
                seq: 2,
                txn: TxnId(0),
                kind: HistEventKind::InvTryCommit,
            },
            HistEvent {
                seq: 3,
                txn: TxnId(0),
                kind: HistEventKind::RespTryCommit(true),
            },
            HistEvent {
                seq: 4,
                txn: TxnId(0),
                kind: HistEventKind::InvRead(V(0)),
            },
        ];
        assert!(!History { events }.well_formed());
    }

    #[test]
    fn duplicate_write_values_break_uniqueness() {
        let events = vec![
            HistEvent {
                seq: 0,
                txn: TxnId(0),
                kind: HistEventKind::InvWrite(V(0), 5),
            },
            HistEvent {
                seq: 1,
                txn: TxnId(0),
                kind: HistEventKind::RespWrite(V(0), true),
            },
            HistEvent {
                seq: 2,
                txn: TxnId(1),
                kind: HistEventKind::InvWrite(V(1), 5),
            },
            HistEvent {
                seq: 3,
                txn: TxnId(1),
                kind: HistEventKind::RespWrite(V(1), true),
            },
        ];
        assert!(!History { events }.unique_writes());
    }

    #[test]
    fn completion_aborts_live_txn() {
        let events = vec![
            HistEvent {
                seq: 0,
                txn: TxnId(0),
                kind: HistEventKind::InvStart,
            },
            HistEvent {
                seq: 1,
                txn: TxnId(0),
                kind: HistEventKind::RespStart,
            },
        ];
        let h = History { events };
        let c = h.completion();
        assert_eq!(c.txn_status(TxnId(0)), TxnStatus::Aborted);
    }
}
