//! The individual harmony predicates.

use super::view::{MemEvent, MemKind, TraceView};
use super::{Rule, ViolationReport};
use crate::trace::OpExecKind;
use crate::types::{TxnId, TxnStatus, VariableId};
use std::collections::{BTreeMap, BTreeSet};

/// At most one view, one routine update, and one recovery update per
/// transaction and variable.
pub fn minimalism(v: &TraceView<'_>, report: &mut ViolationReport) {
    for ((txn, var), events) in &v.mem_by_txn_var {
        for kind in [MemKind::View, MemKind::Routine, MemKind::Recovery] {
            let hits: Vec<u64> = events
                .iter()
                .map(|&i| &v.mem[i])
                .filter(|e| e.kind == kind)
                .map(|e| e.seq)
                .collect();
            if hits.len() > 1 {
                report.push(
                    Rule::Minimalism,
                    hits,
                    format!("{txn} has multiple {kind:?} events on {var}"),
                );
            }
        }
    }
}

/// No interleaving of two transactions' views/routine updates on a shared
/// variable, and a single orientation across all shared variables.
pub fn trace_isolation(v: &TraceView<'_>, report: &mut ViolationReport) {
    let txns = &v.txns;
    for (a, &i) in txns.iter().enumerate() {
        for &j in &txns[a + 1..] {
            let (Some(ei), Some(ej)) = (v.eset.get(&i), v.eset.get(&j)) else {
                continue;
            };
            let mut orientation: Option<bool> = None; // true: i before j
            for &x in ei.intersection(ej) {
                let i_first = v.iso_var(i, j, x);
                let j_first = v.iso_var(j, i, x);
                if !i_first && !j_first {
                    let seqs: Vec<u64> = v
                        .mem_events(i, x)
                        .iter()
                        .chain(v.mem_events(j, x))
                        .map(|&k| v.mem[k].seq)
                        .collect();
                    report.push(
                        Rule::TraceIsolation,
                        seqs,
                        format!("{i} and {j} interleave memory events on {x}"),
                    );
                    continue;
                }
                match orientation {
                    None => orientation = Some(i_first),
                    Some(o) if o != i_first => {
                        report.push(
                            Rule::TraceIsolation,
                            vec![],
                            format!("{i} and {j} are ordered differently on different variables"),
                        );
                    }
                    _ => {}
                }
            }
        }
    }
}

/// A view retrieves the initial value (with no earlier update), the value
/// of the prefacing routine update of another transaction, or the value of
/// a prefacing recovery update.
pub fn view_consonance(v: &TraceView<'_>, report: &mut ViolationReport) {
    for e_v in v.mem.iter().filter(|e| e.kind == MemKind::View) {
        let ok = match v.prefacing_update(e_v.var, e_v.seq) {
            None => e_v.value == 0 && !v.any_update_before(e_v.var, e_v.seq),
            Some(e_u) => match e_u.kind {
                MemKind::Routine => {
                    e_v.value != 0
                        && e_u.txn != e_v.txn
                        && e_u.value == e_v.value
                        && v.ultimate_routine_update(e_u.txn, e_v.var)
                            .map(|u| u.seq == e_u.seq)
                            .unwrap_or(false)
                }
                MemKind::Recovery => e_u.txn != e_v.txn && e_u.value == e_v.value,
                MemKind::View => unreachable!(),
            },
        };
        if !ok {
            report.push(
                Rule::ViewConsonance,
                vec![e_v.seq],
                format!(
                    "{}'s view of {} retrieved {} which no prefacing update justifies",
                    e_v.txn, e_v.var, e_v.value
                ),
            );
        }
    }
}

/// Every routine update is instigated by a consonant write operation: the
/// transaction's most recent own write on the variable before the update
/// carries the same (in-domain) value. Updates by other transactions can
/// legitimately interleave — buffered writes apply late.
pub fn routine_update_consonance(v: &TraceView<'_>, report: &mut ViolationReport) {
    for e_u in v.mem.iter().filter(|e| e.kind == MemKind::Routine) {
        let latest_own_write = v
            .writes_of(e_u.txn, e_u.var)
            .into_iter()
            .filter(|w| w.inv_seq < e_u.seq)
            .last()
            .cloned();
        let instigated = matches!(
            latest_own_write.map(|w| w.kind),
            Some(OpExecKind::Write { value, ok: true, .. }) if value == e_u.value && value != 0
        );
        if !instigated {
            report.push(
                Rule::RoutineUpdateConsonance,
                vec![e_u.seq],
                format!(
                    "routine update of {} to {} by {} lacks an instigating write",
                    e_u.var, e_u.value, e_u.txn
                ),
            );
        }
    }
}

/// Recovery updates must be conservative, needed, dooming, ending, and
/// clean.
pub fn recovery_update_consonance(v: &TraceView<'_>, report: &mut ViolationReport) {
    for e_a in v.mem.iter().filter(|e| e.kind == MemKind::Recovery) {
        let own = v.mem_events(e_a.txn, e_a.var);
        // Conservative: a same-valued view that is the transaction's first
        // memory event on the variable.
        let justifying_view: Option<&MemEvent> = own
            .first()
            .map(|&k| &v.mem[k])
            .filter(|e| e.kind == MemKind::View && e.value == e_a.value && e.seq < e_a.seq);
        if justifying_view.is_none() {
            report.push(
                Rule::RecoveryUpdateConsonance,
                vec![e_a.seq],
                format!(
                    "recovery of {} by {} is not conservative: no initial view of value {}",
                    e_a.var, e_a.txn, e_a.value
                ),
            );
        }
        // Needed: preceded by an own routine update on the variable.
        let needed = own
            .iter()
            .map(|&k| &v.mem[k])
            .any(|e| e.kind == MemKind::Routine && e.seq < e_a.seq);
        if !needed {
            report.push(
                Rule::RecoveryUpdateConsonance,
                vec![e_a.seq],
                format!(
                    "recovery of {} by {} is not needed: no prior routine update",
                    e_a.var, e_a.txn
                ),
            );
        }
        // Dooming: the transaction does not commit.
        if let Some(&co) = v.commit_resp.get(&e_a.txn) {
            if e_a.seq < co {
                report.push(
                    Rule::RecoveryUpdateConsonance,
                    vec![e_a.seq, co],
                    format!("recovery of {} by {} is not dooming: commit follows", e_a.var, e_a.txn),
                );
            }
        }
        // Ending: no further own event on the variable.
        if let Some(after) = own
            .iter()
            .map(|&k| &v.mem[k])
            .find(|e| e.seq > e_a.seq)
        {
            report.push(
                Rule::RecoveryUpdateConsonance,
                vec![e_a.seq, after.seq],
                format!("recovery of {} by {} is not ending", e_a.var, e_a.txn),
            );
        }
        // Clean: no recovery by an isolation-earlier transaction between
        // the justifying view and this recovery.
        if let Some(e_v) = justifying_view {
            for other in v.mem.iter().filter(|e| {
                e.kind == MemKind::Recovery
                    && e.var == e_a.var
                    && e.txn != e_a.txn
                    && e.seq > e_v.seq
                    && e.seq < e_a.seq
            }) {
                if v.iso_var(other.txn, e_a.txn, e_a.var) {
                    report.push(
                        Rule::RecoveryUpdateConsonance,
                        vec![e_a.seq, other.seq],
                        format!(
                            "recovery of {} by {} is not clean: {} recovered in between",
                            e_a.var, e_a.txn, other.txn
                        ),
                    );
                }
            }
        }
    }
}

/// Non-local reads depend on a consonant non-local own view; local reads
/// return the latest preceding own write.
pub fn read_consonance(v: &TraceView<'_>, report: &mut ViolationReport) {
    for op in &v.ops {
        let OpExecKind::Read {
            var,
            value: Some(value),
            ..
        } = op.kind
        else {
            continue;
        };
        if !op.is_complete() {
            continue;
        }
        if v.read_is_local(op) {
            let latest_write = v
                .writes_of(op.txn, var)
                .into_iter()
                .filter(|w| w.inv_seq < op.inv_seq)
                .last()
                .cloned();
            let ok = matches!(
                latest_write.map(|w| w.kind),
                Some(OpExecKind::Write { value: wv, ok: true, .. }) if wv == value && wv != 0
            );
            if !ok {
                report.push(
                    Rule::LocalReadConsonance,
                    vec![op.inv_seq],
                    format!(
                        "{}'s local read of {} returned {} instead of its own latest write",
                        op.txn, var, value
                    ),
                );
            }
        } else {
            // Depends on an own, non-local view with the same value that
            // precedes the response.
            let resp = op.resp_seq.unwrap();
            let ok = v
                .mem_events(op.txn, var)
                .iter()
                .map(|&k| &v.mem[k])
                .any(|e| {
                    e.kind == MemKind::View
                        && e.value == value
                        && e.seq < resp
                        && !v
                            .mem_events(op.txn, var)
                            .iter()
                            .map(|&k| &v.mem[k])
                            .any(|u| u.is_update() && u.seq < e.seq)
                });
            if !ok {
                report.push(
                    Rule::NonLocalReadConsonance,
                    vec![op.inv_seq],
                    format!(
                        "{}'s non-local read of {} returned {} without a justifying view",
                        op.txn, var, value
                    ),
                );
            }
        }
    }
}

/// Written values stay within the domain: never the reserved initial value.
pub fn write_consonance(v: &TraceView<'_>, report: &mut ViolationReport) {
    for op in &v.ops {
        if let OpExecKind::Write { var, value, ok: true } = op.kind {
            if op.is_complete() && value == 0 {
                report.push(
                    Rule::WriteConsonance,
                    vec![op.inv_seq],
                    format!("{} wrote the out-of-domain value 0 to {}", op.txn, var),
                );
            }
        }
    }
}

pub fn unique_writes(v: &TraceView<'_>, report: &mut ViolationReport) {
    if !v.history.unique_writes() {
        report.push(
            Rule::UniqueWrites,
            vec![],
            "two successful writes carry the same value (or the initial value)",
        );
    }
}

/// The three write obbligatos.
pub fn obbligato(v: &TraceView<'_>, report: &mut ViolationReport) {
    let iso = v.iso_order();
    for &i in &v.txns {
        let vars: BTreeSet<VariableId> = v
            .ops
            .iter()
            .filter(|op| op.txn == i)
            .filter_map(|op| match op.kind {
                OpExecKind::Write { var, ok: true, .. } if op.is_complete() => Some(var),
                _ => None,
            })
            .collect();
        for var in vars {
            let writes = v.writes_of(i, var);
            let complete_ok: Vec<_> = writes
                .iter()
                .filter(|w| w.is_complete() && matches!(w.kind, OpExecKind::Write { ok: true, .. }))
                .collect();
            let Some(last_write) = complete_ok.last() else {
                continue;
            };
            let wv = match last_write.kind {
                OpExecKind::Write { value, .. } => value,
                _ => unreachable!(),
            };
            let instigated_update = v
                .mem_events(i, var)
                .iter()
                .map(|&k| &v.mem[k])
                .find(|e| e.kind == MemKind::Routine && e.value == wv && e.seq > last_write.inv_seq);
            // Committed write obbligato: the non-local write of a committed
            // transaction must have its update before the commit response.
            if let Some(&co) = v.commit_resp.get(&i) {
                let ok = instigated_update.map(|e| e.seq < co).unwrap_or(false);
                if !ok {
                    report.push(
                        Rule::CommittedWriteObbligato,
                        vec![last_write.inv_seq, co],
                        format!(
                            "{} committed but its write of {} to {} was never applied",
                            i, wv, var
                        ),
                    );
                }
            }
            // Views by isolation-later transactions.
            let later_views: Vec<&MemEvent> = v
                .mem
                .iter()
                .filter(|e| {
                    e.kind == MemKind::View
                        && e.var == var
                        && e.txn != i
                        && iso.get(&i).map(|s| s.contains(&e.txn)).unwrap_or(false)
                })
                .collect();
            if let Some(first_view) = later_views.iter().min_by_key(|e| e.seq) {
                // Closing write obbligato.
                if v.is_closing_write(last_write) {
                    let ok = instigated_update.map(|e| e.seq < first_view.seq).unwrap_or(false);
                    if !ok {
                        report.push(
                            Rule::ClosingWriteObbligato,
                            vec![last_write.inv_seq, first_view.seq],
                            format!(
                                "closing write of {} to {} by {} not applied before {}'s view",
                                wv, var, i, first_view.txn
                            ),
                        );
                    }
                }
                // View write obbligato: some own update (routine or
                // recovery) or the abort response precedes the view.
                let any_update = v
                    .mem_events(i, var)
                    .iter()
                    .map(|&k| &v.mem[k])
                    .any(|e| e.is_update() && e.seq < first_view.seq);
                let aborted_before = v
                    .abort_resp
                    .get(&i)
                    .map(|&ab| ab < first_view.seq)
                    .unwrap_or(false);
                if !any_update && !aborted_before {
                    report.push(
                        Rule::ViewWriteObbligato,
                        vec![last_write.inv_seq, first_view.seq],
                        format!(
                            "{} wrote {} but neither updated it nor aborted before {}'s view",
                            i, var, first_view.txn
                        ),
                    );
                }
            }
        }
    }
}

/// A viewed routine update comes from a transaction that was decided on the
/// variable, or the supplier's commit response separates update and view.
pub fn decisiveness(v: &TraceView<'_>, report: &mut ViolationReport) {
    for e_v in v.mem.iter().filter(|e| e.kind == MemKind::View) {
        let Some(e_u) = v.prefacing_update(e_v.var, e_v.seq) else {
            continue;
        };
        if e_u.kind != MemKind::Routine || e_u.txn == e_v.txn || e_u.value != e_v.value {
            continue;
        }
        let supplier = e_u.txn;
        if v.decided_on(supplier, e_u.var) {
            continue;
        }
        let committed_between = v
            .commit_resp
            .get(&supplier)
            .map(|&co| e_u.seq < co && co < e_v.seq)
            .unwrap_or(false);
        if !committed_between {
            report.push(
                Rule::Decisiveness,
                vec![e_u.seq, e_v.seq],
                format!(
                    "{} viewed {}'s non-closing write to {} before its commit",
                    e_v.txn, supplier, e_u.var
                ),
            );
        }
    }
}

/// Viewing an aborted supplier, or acting between its update and recovery,
/// bars commitment.
pub fn abort_accord(v: &TraceView<'_>, report: &mut ViolationReport) {
    for &i in &v.txns {
        if v.status.get(&i) != Some(&TxnStatus::Aborted) {
            continue;
        }
        for &j in &v.txns {
            if i == j || v.status.get(&j) != Some(&TxnStatus::Committed) {
                continue;
            }
            if v.views(j, i) {
                report.push(
                    Rule::AbortAccord,
                    vec![],
                    format!("{j} committed although it views aborted {i}"),
                );
                continue;
            }
            // Case (b): j has an event on x between i's routine update and
            // i's recovery update.
            let sandwiched = v.mem.iter().any(|e_u| {
                e_u.txn == i
                    && e_u.kind == MemKind::Routine
                    && v.mem.iter().any(|e_a| {
                        e_a.txn == i
                            && e_a.kind == MemKind::Recovery
                            && e_a.var == e_u.var
                            && v.mem.iter().any(|e| {
                                e.txn == j
                                    && e.var == e_u.var
                                    && matches!(e.kind, MemKind::View | MemKind::Routine)
                                    && e_u.seq < e.seq
                                    && e.seq < e_a.seq
                            })
                    })
            });
            if sandwiched {
                report.push(
                    Rule::AbortAccord,
                    vec![],
                    format!("{j} committed although it acted between {i}'s update and recovery"),
                );
            }
        }
    }
}

/// A committed viewer implies a committed supplier.
pub fn commit_accord(v: &TraceView<'_>, report: &mut ViolationReport) {
    for &j in &v.txns {
        if v.status.get(&j) != Some(&TxnStatus::Committed) {
            continue;
        }
        for &i in &v.txns {
            if i != j
                && v.views(j, i)
                && v.status.get(&i) != Some(&TxnStatus::Committed)
            {
                report.push(
                    Rule::CommitAccord,
                    vec![],
                    format!("{j} committed but its supplier {i} did not"),
                );
            }
        }
    }
}

/// Commit responses respect the per-variable isolation order.
pub fn coherence(v: &TraceView<'_>, report: &mut ViolationReport) {
    for &i in &v.txns {
        for &j in &v.txns {
            if i == j {
                continue;
            }
            let shared: Vec<VariableId> = match (v.eset.get(&i), v.eset.get(&j)) {
                (Some(a), Some(b)) => a.intersection(b).copied().collect(),
                _ => continue,
            };
            if !shared.iter().any(|&x| v.iso_var(i, j, x)) {
                continue;
            }
            let Some(&co_j) = v.commit_resp.get(&j) else {
                continue;
            };
            let i_done = v
                .commit_resp
                .get(&i)
                .or_else(|| v.abort_resp.get(&i))
                .copied();
            if i_done.map(|seq| seq < co_j) != Some(true) {
                report.push(
                    Rule::Coherence,
                    vec![co_j],
                    format!("{j} committed before isolation-earlier {i} completed"),
                );
            }
        }
    }
}

/// An aborted updater's update is cleaned (by itself or an isolation-earlier
/// transaction) before its abort response; a committed transaction's viewed
/// or updated state is never reverted under it before its commit response.
pub fn abort_coda(v: &TraceView<'_>, report: &mut ViolationReport) {
    for &i in &v.txns {
        match v.status.get(&i) {
            Some(&TxnStatus::Aborted) => {
                let Some(&ab) = v.abort_resp.get(&i) else {
                    continue;
                };
                for e_u in v
                    .mem
                    .iter()
                    .filter(|e| e.txn == i && e.kind == MemKind::Routine)
                {
                    let cleaned = v.mem.iter().any(|e_a| {
                        e_a.kind == MemKind::Recovery
                            && e_a.var == e_u.var
                            && e_u.seq < e_a.seq
                            && e_a.seq < ab
                            && (e_a.txn == i || v.iso_var(e_a.txn, i, e_u.var))
                    });
                    if !cleaned {
                        report.push(
                            Rule::AbortCoda,
                            vec![e_u.seq, ab],
                            format!(
                                "{}'s routine update of {} was not cleaned before its abort",
                                i, e_u.var
                            ),
                        );
                    }
                }
            }
            Some(&TxnStatus::Committed) => {
                let Some(&co) = v.commit_resp.get(&i) else {
                    continue;
                };
                let vars: BTreeSet<VariableId> = v
                    .mem
                    .iter()
                    .filter(|e| e.txn == i && matches!(e.kind, MemKind::View | MemKind::Routine))
                    .map(|e| e.var)
                    .collect();
                for var in vars {
                    let first = v
                        .mem_events(i, var)
                        .iter()
                        .map(|&k| &v.mem[k])
                        .find(|e| matches!(e.kind, MemKind::View | MemKind::Routine))
                        .unwrap();
                    let reverted = v.mem.iter().find(|e_a| {
                        e_a.kind == MemKind::Recovery
                            && e_a.var == var
                            && e_a.seq > first.seq
                            && e_a.seq < co
                            && (e_a.txn == i || v.iso_var(e_a.txn, i, var))
                    });
                    if let Some(e_a) = reverted {
                        report.push(
                            Rule::AbortCoda,
                            vec![first.seq, e_a.seq, co],
                            format!(
                                "{} committed although {} reverted {} under it",
                                i, e_a.txn, var
                            ),
                        );
                    }
                }
            }
            _ => {}
        }
    }
}

/// Chain isolation and self-containment over the virtual-view graph,
/// evaluated pairwise via reachability (equivalent to quantifying over all
/// chains, but polynomial).
pub fn chain_consistency(v: &TraceView<'_>, report: &mut ViolationReport, max_nodes: usize) {
    let n = v.txns.len();
    if n.saturating_mul(n) > max_nodes {
        report.bound_exceeded = true;
        return;
    }
    let edges = v.vview_edges();
    let reach = reachability(&v.txns, &edges);
    let co_chained = |a: TxnId, b: TxnId| -> bool {
        a == b
            || reach.get(&a).map(|s| s.contains(&b)).unwrap_or(false)
            || reach.get(&b).map(|s| s.contains(&a)).unwrap_or(false)
    };

    // Chain isolation: no recovery carrying the same value interposed
    // between a member's routine update and any later event of a co-chained
    // member.
    for e_u in v.mem.iter().filter(|e| e.kind == MemKind::Routine) {
        for e_a in v.mem.iter().filter(|e| {
            e.kind == MemKind::Recovery
                && e.var == e_u.var
                && e.value == e_u.value
                && e.seq > e_u.seq
        }) {
            for &m in &v.txns {
                if !co_chained(e_u.txn, m) {
                    continue;
                }
                if let Some(&after) = v.all_seqs_of(m).iter().find(|&&s| s > e_a.seq) {
                    report.push(
                        Rule::ChainIsolation,
                        vec![e_u.seq, e_a.seq, after],
                        format!(
                            "recovery restoring {} on {} interposes between {}'s update and {}'s event",
                            e_a.value, e_a.var, e_u.txn, m
                        ),
                    );
                    break;
                }
            }
        }
    }

    // Chain self-containment: along every chain from k to l, a view by l of
    // a different value than k's update is justified by an intermediate
    // member's update between the two.
    for &k in &v.txns {
        for &l in &v.txns {
            if k == l || !reach.get(&k).map(|s| s.contains(&l)).unwrap_or(false) {
                continue;
            }
            for &ku in v.mem_by_txn_var.keys().filter(|(t, _)| *t == k).flat_map(|key| &v.mem_by_txn_var[key]) {
                let e_u = &v.mem[ku];
                if e_u.kind != MemKind::Routine {
                    continue;
                }
                for e_v in v
                    .mem
                    .iter()
                    .filter(|e| e.txn == l && e.kind == MemKind::View && e.var == e_u.var)
                {
                    if e_u.seq >= e_v.seq || e_u.value == e_v.value {
                        continue;
                    }
                    // Qualifying repair nodes: on some path strictly between
                    // k and l, carrying an update to the viewed value inside
                    // the window.
                    let repairs: BTreeSet<TxnId> = v
                        .mem
                        .iter()
                        .filter(|e| {
                            e.kind == MemKind::Routine
                                && e.var == e_u.var
                                && e.value == e_v.value
                                && e.seq > e_u.seq
                                && e.seq < e_v.seq
                                && e.txn != k
                                && e.txn != l
                        })
                        .map(|e| e.txn)
                        .collect();
                    if path_avoiding(&v.txns, &edges, k, l, &repairs) {
                        report.push(
                            Rule::ChainSelfContainment,
                            vec![e_u.seq, e_v.seq],
                            format!(
                                "{}'s view of {} = {} is not justified within its chain from {}",
                                l, e_u.var, e_v.value, k
                            ),
                        );
                    }
                }
            }
        }
    }
}

fn reachability(
    txns: &[TxnId],
    edges: &BTreeMap<TxnId, BTreeSet<TxnId>>,
) -> BTreeMap<TxnId, BTreeSet<TxnId>> {
    let mut reach: BTreeMap<TxnId, BTreeSet<TxnId>> = BTreeMap::new();
    for &start in txns {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<TxnId> = edges
            .get(&start)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        while let Some(t) = stack.pop() {
            if seen.insert(t) {
                if let Some(next) = edges.get(&t) {
                    stack.extend(next.iter().copied());
                }
            }
        }
        reach.insert(start, seen);
    }
    reach
}

/// Is there a path from `from` to `to` that avoids every node in `avoid`?
fn path_avoiding(
    txns: &[TxnId],
    edges: &BTreeMap<TxnId, BTreeSet<TxnId>>,
    from: TxnId,
    to: TxnId,
    avoid: &BTreeSet<TxnId>,
) -> bool {
    let _ = txns;
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(t) = stack.pop() {
        if t == to {
            return true;
        }
        if !seen.insert(t) {
            continue;
        }
        if let Some(next) = edges.get(&t) {
            for &n in next {
                if n == to || !avoid.contains(&n) {
                    stack.push(n);
                }
            }
        }
    }
    false
}
