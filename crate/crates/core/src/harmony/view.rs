//! Precomputed indexes over a sealed trace for rule evaluation.

use crate::trace::{History, OpExec, OpExecKind, RecordKind, Trace};
use crate::types::{TxnId, TxnStatus, Value, VariableId};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemKind {
    View,
    Routine,
    Recovery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemEvent {
    pub seq: u64,
    pub txn: TxnId,
    pub var: VariableId,
    pub value: Value,
    pub kind: MemKind,
}

impl MemEvent {
    pub fn is_update(&self) -> bool {
        matches!(self.kind, MemKind::Routine | MemKind::Recovery)
    }
}

pub struct TraceView<'a> {
    pub trace: &'a Trace,
    pub history: History,
    pub ops: Vec<OpExec>,
    pub txns: Vec<TxnId>,
    pub mem: Vec<MemEvent>,
    /// Indices into `mem` of update events, per variable, in seq order.
    pub updates_by_var: BTreeMap<VariableId, Vec<usize>>,
    /// Memory events per transaction per variable, in seq order.
    pub mem_by_txn_var: BTreeMap<(TxnId, VariableId), Vec<usize>>,
    /// Event access set: variables with a view or routine update.
    pub eset: BTreeMap<TxnId, BTreeSet<VariableId>>,
    pub status: BTreeMap<TxnId, TxnStatus>,
    /// Sequence of the commit (committed) response, if any.
    pub commit_resp: BTreeMap<TxnId, u64>,
    /// Sequence of the response that completed an aborting transaction.
    pub abort_resp: BTreeMap<TxnId, u64>,
    /// Declared write upper bounds, for closing-write identification.
    pub wub: BTreeMap<(TxnId, VariableId), u32>,
}

impl<'a> TraceView<'a> {
    pub fn new(trace: &'a Trace) -> Self {
        let history = trace.to_history();
        let ops = history.ops();
        let mut mem = Vec::new();
        for r in trace.records() {
            let kind = match r.kind {
                RecordKind::View => MemKind::View,
                RecordKind::RoutineUpdate => MemKind::Routine,
                RecordKind::RecoveryUpdate => MemKind::Recovery,
                _ => continue,
            };
            mem.push(MemEvent {
                seq: r.seq,
                txn: r.txn,
                var: r.var.expect("memory event without variable"),
                value: r.value.expect("memory event without value"),
                kind,
            });
        }
        let mut updates_by_var: BTreeMap<VariableId, Vec<usize>> = BTreeMap::new();
        let mut mem_by_txn_var: BTreeMap<(TxnId, VariableId), Vec<usize>> = BTreeMap::new();
        let mut eset: BTreeMap<TxnId, BTreeSet<VariableId>> = BTreeMap::new();
        for (i, e) in mem.iter().enumerate() {
            if e.is_update() {
                updates_by_var.entry(e.var).or_default().push(i);
            }
            mem_by_txn_var.entry((e.txn, e.var)).or_default().push(i);
            if matches!(e.kind, MemKind::View | MemKind::Routine) {
                eset.entry(e.txn).or_default().insert(e.var);
            }
        }
        let mut status = BTreeMap::new();
        let mut commit_resp = BTreeMap::new();
        let mut abort_resp = BTreeMap::new();
        for txn in history.txns() {
            status.insert(txn, history.txn_status(txn));
        }
        for r in trace.records() {
            match r.kind {
                RecordKind::RespTryCommit => {
                    if r.outcome == Some(crate::trace::OutcomeTag::Committed) {
                        commit_resp.insert(r.txn, r.seq);
                    } else {
                        abort_resp.insert(r.txn, r.seq);
                    }
                }
                RecordKind::RespTryAbort => {
                    abort_resp.insert(r.txn, r.seq);
                }
                RecordKind::RespRead | RecordKind::RespWrite => {
                    if r.outcome == Some(crate::trace::OutcomeTag::Aborted) {
                        abort_resp.insert(r.txn, r.seq);
                    }
                }
                _ => {}
            }
        }
        let mut wub = BTreeMap::new();
        for (txn, bounds) in trace.descriptors() {
            for b in bounds {
                wub.insert((*txn, b.var), b.wub);
            }
        }
        TraceView {
            trace,
            history,
            ops,
            txns: trace.txns(),
            mem,
            updates_by_var,
            mem_by_txn_var,
            eset,
            status,
            commit_resp,
            abort_resp,
            wub,
        }
    }

    pub fn mem_events(&self, txn: TxnId, var: VariableId) -> &[usize] {
        self.mem_by_txn_var
            .get(&(txn, var))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// The update event on `var` immediately preceding `seq`, if any.
    pub fn prefacing_update(&self, var: VariableId, seq: u64) -> Option<&MemEvent> {
        let ups = self.updates_by_var.get(&var)?;
        let mut found = None;
        for &i in ups {
            if self.mem[i].seq < seq {
                found = Some(&self.mem[i]);
            } else {
                break;
            }
        }
        found
    }

    pub fn any_update_before(&self, var: VariableId, seq: u64) -> bool {
        self.updates_by_var
            .get(&var)
            .map(|ups| ups.first().map(|&i| self.mem[i].seq < seq).unwrap_or(false))
            .unwrap_or(false)
    }

    /// The last routine update by `txn` on `var` anywhere in the trace.
    pub fn ultimate_routine_update(&self, txn: TxnId, var: VariableId) -> Option<&MemEvent> {
        self.mem_events(txn, var)
            .iter()
            .rev()
            .map(|&i| &self.mem[i])
            .find(|e| e.kind == MemKind::Routine)
    }

    pub fn views_of(&self, txn: TxnId) -> impl Iterator<Item = &MemEvent> {
        self.mem
            .iter()
            .filter(move |e| e.txn == txn && e.kind == MemKind::View)
    }

    /// Write operation executions of `txn` on `var`, in invocation order.
    pub fn writes_of(&self, txn: TxnId, var: VariableId) -> Vec<&OpExec> {
        self.ops
            .iter()
            .filter(|op| {
                op.txn == txn && matches!(op.kind, OpExecKind::Write { var: v, .. } if v == var)
            })
            .collect()
    }

    /// A read is local when a write on the same variable was invoked
    /// earlier in the same transaction.
    pub fn read_is_local(&self, read: &OpExec) -> bool {
        let var = read.var().unwrap();
        self.ops.iter().any(|op| {
            op.txn == read.txn
                && op.inv_seq < read.inv_seq
                && matches!(op.kind, OpExecKind::Write { var: v, .. } if v == var)
        })
    }

    /// A write is non-local when no later write on the same variable exists
    /// in the same transaction.
    pub fn write_is_nonlocal(&self, write: &OpExec) -> bool {
        let var = write.var().unwrap();
        !self.ops.iter().any(|op| {
            op.txn == write.txn
                && op.inv_seq > write.inv_seq
                && matches!(op.kind, OpExecKind::Write { var: v, .. } if v == var)
        })
    }

    /// Closing write: the k-th complete successful write on `var`, where k
    /// is the declared write bound.
    pub fn is_closing_write(&self, write: &OpExec) -> bool {
        let var = write.var().unwrap();
        let bound = match self.wub.get(&(write.txn, var)) {
            Some(&w) if w > 0 => w,
            _ => return false,
        };
        let mut count = 0u32;
        for op in &self.ops {
            if op.txn == write.txn
                && matches!(op.kind, OpExecKind::Write { var: v, ok: true, .. } if v == var)
                && op.is_complete()
            {
                count += 1;
                if op.inv_seq == write.inv_seq {
                    return count == bound;
                }
            }
        }
        false
    }

    /// Decided on `var`: executed a complete, successful closing write.
    pub fn decided_on(&self, txn: TxnId, var: VariableId) -> bool {
        self.ops.iter().any(|op| {
            op.txn == txn
                && op.is_complete()
                && matches!(op.kind, OpExecKind::Write { var: v, ok: true, .. } if v == var)
                && self.is_closing_write(op)
        })
    }

    /// T_i views T_j: a routine update of T_j prefaces a same-valued view
    /// of T_i.
    pub fn views(&self, i: TxnId, j: TxnId) -> bool {
        self.views_of(i).any(|e_v| {
            self.prefacing_update(e_v.var, e_v.seq)
                .map(|e_u| e_u.txn == j && e_u.kind == MemKind::Routine && e_u.value == e_v.value)
                .unwrap_or(false)
        })
    }

    /// T_i virtually views T_j: some routine update of T_j on x with the
    /// value T_i's view on x retrieved, anywhere earlier in the trace.
    pub fn vviews(&self, i: TxnId, j: TxnId) -> bool {
        if i == j {
            return false;
        }
        self.views_of(i).any(|e_v| {
            self.mem_events(j, e_v.var).iter().any(|&u| {
                let e_u = &self.mem[u];
                e_u.kind == MemKind::Routine && e_u.value == e_v.value && e_u.seq < e_v.seq
            })
        })
    }

    /// Per-variable isolation order: all of T_i's views/routine updates on
    /// `var` precede all of T_j's. Defined only when both have such events.
    pub fn iso_var(&self, i: TxnId, j: TxnId, var: VariableId) -> bool {
        let evs = |t: TxnId| -> Vec<u64> {
            self.mem_events(t, var)
                .iter()
                .map(|&k| &self.mem[k])
                .filter(|e| matches!(e.kind, MemKind::View | MemKind::Routine))
                .map(|e| e.seq)
                .collect()
        };
        let ei = evs(i);
        let ej = evs(j);
        if ei.is_empty() || ej.is_empty() {
            return false;
        }
        ei.iter().max() < ej.iter().min()
    }

    /// Direct isolation order: isolation-ordered on every shared variable
    /// of the event access sets.
    pub fn iso_direct(&self, i: TxnId, j: TxnId) -> bool {
        let (Some(ei), Some(ej)) = (self.eset.get(&i), self.eset.get(&j)) else {
            return false;
        };
        let shared: Vec<_> = ei.intersection(ej).copied().collect();
        !shared.is_empty() && shared.iter().all(|&x| self.iso_var(i, j, x))
    }

    /// Transitive closure of the direct isolation order.
    pub fn iso_order(&self) -> BTreeMap<TxnId, BTreeSet<TxnId>> {
        let mut succ: BTreeMap<TxnId, BTreeSet<TxnId>> = BTreeMap::new();
        for &i in &self.txns {
            for &j in &self.txns {
                if i != j && self.iso_direct(i, j) {
                    succ.entry(i).or_default().insert(j);
                }
            }
        }
        // Small transaction counts: naive closure is fine.
        loop {
            let mut grew = false;
            let snapshot = succ.clone();
            for (_, outs) in succ.iter_mut() {
                let direct: Vec<TxnId> = outs.iter().copied().collect();
                for mid in direct {
                    if let Some(further) = snapshot.get(&mid) {
                        for &far in further {
                            if outs.insert(far) {
                                grew = true;
                            }
                        }
                    }
                }
            }
            if !grew {
                break;
            }
        }
        succ
    }

    /// Edges of the virtual-view graph: j -> i when T_i virtually views T_j.
    pub fn vview_edges(&self) -> BTreeMap<TxnId, BTreeSet<TxnId>> {
        let mut out: BTreeMap<TxnId, BTreeSet<TxnId>> = BTreeMap::new();
        for &j in &self.txns {
            for &i in &self.txns {
                if self.vviews(i, j) {
                    out.entry(j).or_default().insert(i);
                }
            }
        }
        out
    }

    /// All trace records of `txn` (API and memory), as sequence numbers.
    pub fn all_seqs_of(&self, txn: TxnId) -> Vec<u64> {
        self.trace
            .records()
            .iter()
            .filter(|r| r.txn == txn && (r.kind.is_api() || r.kind.is_memory_event()))
            .map(|r| r.seq)
            .collect()
    }
}
