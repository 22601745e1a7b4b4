//! Small-scope interleaving oracles.
//!
//! Every test here explores all reachable schedules of a small program via
//! the deterministic scheduler and checks each terminal state against an
//! independently computed expectation (serial execution for final memory,
//! structural facts for aborts). These are the ground-truth checks the
//! engines must satisfy before the trace-level checkers mean anything.

use optsva::engine::{EngineConfig, TxnOp, VersionedTm};
use optsva::sim::{explore, ScriptStep, ThreadScript};
use optsva::trace::TraceSink;
use optsva::types::{TxnDescriptor, TxnStatus, Value, VarBounds, VariableId};
use optsva::{OptSva, Sva};

const X: VariableId = VariableId(0);
const Y: VariableId = VariableId(1);

fn script(bounds: &[(VariableId, u32, u32)], ops: &[TxnOp]) -> ThreadScript {
    let desc = TxnDescriptor::new(
        bounds
            .iter()
            .map(|&(v, r, w)| VarBounds::new(v, r, w))
            .collect(),
    );
    let mut steps = vec![ScriptStep::Begin(desc)];
    steps.extend(ops.iter().map(|&op| ScriptStep::Op(op)));
    ThreadScript { steps }
}

/// Exact read/write counts become the declared bounds.
fn script_from_ops(ops: &[TxnOp], commit: bool) -> ThreadScript {
    let mut counts: std::collections::BTreeMap<VariableId, (u32, u32)> =
        std::collections::BTreeMap::new();
    for op in ops {
        match op {
            TxnOp::Read(x) => counts.entry(*x).or_default().0 += 1,
            TxnOp::Write(x, _) => counts.entry(*x).or_default().1 += 1,
            _ => {}
        }
    }
    let desc = TxnDescriptor::new(
        counts
            .iter()
            .map(|(&v, &(r, w))| VarBounds::new(v, r, w))
            .collect(),
    );
    let mut steps = vec![ScriptStep::Begin(desc)];
    steps.extend(ops.iter().map(|&op| ScriptStep::Op(op)));
    steps.push(ScriptStep::Op(if commit {
        TxnOp::TryCommit
    } else {
        TxnOp::TryAbort
    }));
    ThreadScript { steps }
}

/// Independent oracle: apply each transaction's writes in the given order
/// against fresh memory.
fn serial_memory(num_vars: usize, ordered_ops: &[&[TxnOp]]) -> Vec<Value> {
    let mut mem = vec![0i64; num_vars];
    for ops in ordered_ops {
        for op in *ops {
            if let TxnOp::Write(x, v) = op {
                mem[x.0 as usize] = *v;
            }
        }
    }
    mem
}

fn optsva(num_vars: usize) -> OptSva {
    OptSva::new(num_vars, EngineConfig::default(), TraceSink::Null)
}

fn sva(num_vars: usize) -> Sva {
    Sva::new(num_vars, EngineConfig::default(), TraceSink::Null)
}

/// Explores all interleavings of per-thread op lists (one txn per thread,
/// all committing) and asserts the final memory matches serial execution in
/// private-version order, on both engines.
fn check_serialization(num_vars: usize, programs: &[&[TxnOp]]) {
    let scripts: Vec<ThreadScript> = programs.iter().map(|ops| script_from_ops(ops, true)).collect();
    let mut terminals = 0usize;
    explore(optsva(num_vars), scripts.clone(), 2_000_000, |e, txns| {
        terminals += 1;
        // Private versions are drawn in begin order, so transaction ids give
        // the serialization order for every variable.
        let mut order: Vec<(optsva::types::TxnId, usize)> = txns
            .iter()
            .enumerate()
            .map(|(thread, ts)| (ts[0], thread))
            .collect();
        order.sort();
        let ordered: Vec<&[TxnOp]> = order.iter().map(|&(_, th)| programs[th]).collect();
        let expect = serial_memory(num_vars, &ordered);
        for (t, _) in &order {
            assert_eq!(e.txn_status(*t), TxnStatus::Committed, "pessimism violated");
        }
        let got: Vec<Value> = (0..num_vars).map(|i| e.value_of(VariableId(i as u32))).collect();
        assert_eq!(got, expect, "final memory differs from serial order");
    })
    .unwrap();
    assert!(terminals > 0);
    explore(sva(num_vars), scripts, 2_000_000, |e, txns| {
        let mut order: Vec<(optsva::types::TxnId, usize)> = txns
            .iter()
            .enumerate()
            .map(|(thread, ts)| (ts[0], thread))
            .collect();
        order.sort();
        let ordered: Vec<&[TxnOp]> = order.iter().map(|&(_, th)| programs[th]).collect();
        let expect = serial_memory(num_vars, &ordered);
        let got: Vec<Value> = (0..num_vars).map(|i| e.value_of(VariableId(i as u32))).collect();
        assert_eq!(got, expect);
    })
    .unwrap();
}

#[test]
fn two_writer_serialization_over_one_var() {
    check_serialization(1, &[&[TxnOp::Write(X, 1)], &[TxnOp::Write(X, 2)]]);
}

#[test]
fn write_read_mix_over_two_vars() {
    check_serialization(
        2,
        &[
            &[TxnOp::Write(X, 1), TxnOp::Read(Y)],
            &[TxnOp::Write(Y, 2), TxnOp::Write(X, 3)],
        ],
    );
}

#[test]
fn three_txn_chain_over_shared_var() {
    check_serialization(
        2,
        &[
            &[TxnOp::Write(X, 1)],
            &[TxnOp::Read(X), TxnOp::Write(Y, 2)],
            &[TxnOp::Write(X, 3)],
        ],
    );
}

/// Released-but-aborted supplier: every schedule force-aborts the reader at
/// its next access or commit.
#[test]
fn aborted_supplier_dooms_reader_in_every_schedule() {
    let supplier = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 0, 1)])),
            ScriptStep::Op(TxnOp::Write(X, 1)),
            ScriptStep::Op(TxnOp::TryAbort),
        ],
    };
    let reader = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 1, 1)])),
            ScriptStep::Op(TxnOp::Read(X)),
            ScriptStep::Op(TxnOp::TryCommit),
        ],
    };
    let mut terminals = 0usize;
    let mut doomed = 0usize;
    explore(
        optsva(1),
        vec![supplier, reader],
        1_000_000,
        |e, txns| {
            terminals += 1;
            let supplier_txn = txns[0][0];
            let reader_txn = txns[1][0];
            assert_eq!(e.txn_status(supplier_txn), TxnStatus::Aborted);
            // The reader either never saw the value (read 0 from before the
            // supplier's release is impossible: versions order access), or
            // it saw 1 and must be aborted. It can only commit if it read
            // the rolled-back state written before the supplier started...
            // which cannot exist here, so any committed reader must have
            // read after the recovery, observing 0. Both outcomes keep
            // memory at 0.
            if e.txn_status(reader_txn) == TxnStatus::Aborted {
                doomed += 1;
            }
            assert_eq!(e.value_of(X), 0, "memory must be restored");
        },
    )
    .unwrap();
    assert!(terminals > 0);
    // In schedules where the reader read the supplier's value, it aborted.
    assert!(doomed > 0);
}

/// Reader that got its value before the supplier aborted can never commit.
#[test]
fn reader_of_aborted_value_never_commits_with_it() {
    let supplier = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 0, 1)])),
            ScriptStep::Op(TxnOp::Write(X, 1)),
            ScriptStep::Op(TxnOp::TryAbort),
        ],
    };
    let reader = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 1, 1)])),
            ScriptStep::Op(TxnOp::Read(X)),
            ScriptStep::Op(TxnOp::TryCommit),
        ],
    };
    explore(
        optsva(1),
        vec![supplier, reader],
        1_000_000,
        |e, txns| {
            let reader_txn = txns[1][0];
            // A committed reader implies it read consistent state; since the
            // supplier wrote 1 and aborted, a reader that returned 1 must
            // abort. The engine does not expose read values here, but a
            // committed reader with memory intact implies it read 0 only if
            // it accessed after recovery; either way memory is 0.
            if e.txn_status(reader_txn) == TxnStatus::Committed {
                assert_eq!(e.value_of(X), 0);
            }
        },
    )
    .unwrap();
}

/// Two writers in a cascade both abort: recovery restores the initial value
/// in every schedule.
#[test]
fn all_writers_abort_restores_initial_memory() {
    let w1 = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 0, 1)])),
            ScriptStep::Op(TxnOp::Write(X, 1)),
            ScriptStep::Op(TxnOp::TryAbort),
        ],
    };
    let w2 = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 1, 1)])),
            ScriptStep::Op(TxnOp::Read(X)),
            ScriptStep::Op(TxnOp::Write(X, 2)),
            ScriptStep::Op(TxnOp::TryAbort),
        ],
    };
    let mut terminals = 0usize;
    explore(optsva(1), vec![w1.clone(), w2.clone()], 1_000_000, |e, txns| {
        terminals += 1;
        for ts in txns {
            for t in ts {
                assert_eq!(e.txn_status(*t), TxnStatus::Aborted);
            }
        }
        assert_eq!(e.value_of(X), 0, "recovery must restore initial memory");
    })
    .unwrap();
    assert!(terminals > 0);
    explore(sva(1), vec![w1, w2], 1_000_000, |e, _| {
        assert_eq!(e.value_of(X), 0);
    })
    .unwrap();
}

/// An invalidated writer's catch-up or write-buffer aborts the transaction
/// rather than publishing the update (3-transaction cascade).
#[test]
fn invalidated_writer_aborts_instead_of_updating() {
    let t1 = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 0, 1)])),
            ScriptStep::Op(TxnOp::Write(X, 1)),
            ScriptStep::Op(TxnOp::TryAbort),
        ],
    };
    // Reads x (possibly the doomed 1), then writes; must never commit when
    // it built on the aborted value.
    let t2 = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 1, 1)])),
            ScriptStep::Op(TxnOp::Read(X)),
            ScriptStep::Op(TxnOp::Write(X, 2)),
            ScriptStep::Op(TxnOp::TryCommit),
        ],
    };
    let t3 = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 1, 0)])),
            ScriptStep::Op(TxnOp::Read(X)),
            ScriptStep::Op(TxnOp::TryCommit),
        ],
    };
    explore(optsva(1), vec![t1, t2, t3], 4_000_000, |e, txns| {
        let t2_txn = txns[1][0];
        if e.txn_status(t2_txn) == TxnStatus::Aborted {
            // Cascade: nothing of t2's write may survive unless a later
            // recovery was not needed. Memory is either 0 (all rolled back)
            // or... nothing else: t2 aborted means its update was reverted
            // or never issued.
            assert_eq!(e.value_of(X), 0);
        } else {
            // t2 committed: it must have read the restored 0-state, and its
            // write survives.
            assert_eq!(e.value_of(X), 2);
        }
    })
    .unwrap();
}

/// Two catch-up writers (declared bounds above executed writes) serialize
/// their commit-time updates in version order.
#[test]
fn catch_up_writers_serialize_in_version_order() {
    let w1 = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 0, 2)])),
            ScriptStep::Op(TxnOp::Write(X, 1)),
            ScriptStep::Op(TxnOp::TryCommit),
        ],
    };
    let w2 = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 0, 2)])),
            ScriptStep::Op(TxnOp::Write(X, 2)),
            ScriptStep::Op(TxnOp::TryCommit),
        ],
    };
    explore(optsva(1), vec![w1, w2], 1_000_000, |e, txns| {
        let (a, b) = (txns[0][0], txns[1][0]);
        let last = if a > b { 1 } else { 2 };
        assert_eq!(e.txn_status(a), TxnStatus::Committed);
        assert_eq!(e.txn_status(b), TxnStatus::Committed);
        assert_eq!(e.value_of(X), last, "last committer's buffer must win");
    })
    .unwrap();
}

/// Read-only consumer of an aborted supplier gets aborted at commit.
#[test]
fn read_only_consumer_of_aborted_supplier_aborts() {
    let supplier = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 0, 1)])),
            ScriptStep::Op(TxnOp::Write(X, 1)),
            ScriptStep::Op(TxnOp::TryAbort),
        ],
    };
    let consumer = ThreadScript {
        steps: vec![
            ScriptStep::Begin(TxnDescriptor::new(vec![VarBounds::new(X, 2, 0)])),
            ScriptStep::Op(TxnOp::Read(X)),
            ScriptStep::Op(TxnOp::Read(X)),
            ScriptStep::Op(TxnOp::TryCommit),
        ],
    };
    let mut aborted_consumers = 0usize;
    explore(optsva(1), vec![supplier, consumer], 1_000_000, |e, txns| {
        let consumer_txn = txns[1][0];
        if e.txn_status(consumer_txn) == TxnStatus::Aborted {
            aborted_consumers += 1;
        }
        assert_eq!(e.value_of(X), 0);
    })
    .unwrap();
    assert!(aborted_consumers > 0, "some schedule must doom the consumer");
}

/// Tasks scheduled on successive versions run in version order: a reader
/// between two writers always observes the first writer's value, never a
/// stale or reordered state.
#[test]
fn successive_version_tasks_fire_in_order() {
    let w1 = script(&[(X, 0, 1)], &[TxnOp::Write(X, 1), TxnOp::TryCommit]);
    let r = script(&[(X, 1, 0)], &[TxnOp::Read(X), TxnOp::TryCommit]);
    let w2 = script(&[(X, 0, 1)], &[TxnOp::Write(X, 2), TxnOp::TryCommit]);
    explore(optsva(1), vec![w1, r, w2], 4_000_000, |e, txns| {
        let flat: Vec<_> = txns.iter().map(|t| t[0]).collect();
        for t in &flat {
            assert_eq!(e.txn_status(*t), TxnStatus::Committed);
        }
        // Memory ends at whichever writer drew the larger version.
        let last_writer_value = if flat[0] > flat[2] { 1 } else { 2 };
        assert_eq!(e.value_of(X), last_writer_value);
    })
    .unwrap();
}
