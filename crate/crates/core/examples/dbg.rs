use optsva::engine::{EngineConfig, TxnOp, VersionedTm};
use optsva::sim::{explore, ScriptStep, ThreadScript};
use optsva::trace::TraceSink;
use optsva::types::{TxnDescriptor, VarBounds, VariableId};
use optsva::OptSva;
use std::time::Instant;

const X: VariableId = VariableId(0);
const Y: VariableId = VariableId(1);

fn script_from_ops(ops: &[TxnOp]) -> ThreadScript {
    let mut counts: std::collections::BTreeMap<VariableId, (u32, u32)> = Default::default();
    for op in ops {
        match op {
            TxnOp::Read(x) => counts.entry(*x).or_default().0 += 1,
            TxnOp::Write(x, _) => counts.entry(*x).or_default().1 += 1,
            _ => {}
        }
    }
    let desc = TxnDescriptor::new(counts.iter().map(|(&v, &(r, w))| VarBounds::new(v, r, w)).collect());
    let mut steps = vec![ScriptStep::Begin(desc)];
    steps.extend(ops.iter().map(|&op| ScriptStep::Op(op)));
    steps.push(ScriptStep::Op(TxnOp::TryCommit));
    ThreadScript { steps }
}

fn main() {
    // Worst case for 3 txns x 2 ops: all on one variable.
    let mut next = 1i64;
    let mut mk = |ops: &[(bool, VariableId)]| -> Vec<TxnOp> {
        ops.iter().map(|&(w, v)| if w { let val = next; next += 1; TxnOp::Write(v, val) } else { TxnOp::Read(v) }).collect()
    };
    let p1 = mk(&[(true, X), (false, X)]);
    let p2 = mk(&[(false, X), (true, X)]);
    let p3 = mk(&[(true, X), (true, X)]);
    let start = Instant::now();
    let r = explore(
        OptSva::new(2, EngineConfig::default(), TraceSink::Null),
        vec![script_from_ops(&p1), script_from_ops(&p2), script_from_ops(&p3)],
        10_000_000,
        |_, _| {},
    )
    .unwrap();
    println!("3txn/1var: states={} terminals={} in {:?}", r.states_expanded, r.terminals, start.elapsed());
    let p1 = mk(&[(true, X), (false, Y)]);
    let p2 = mk(&[(false, Y), (true, X)]);
    let p3 = mk(&[(true, Y), (true, X)]);
    let start = Instant::now();
    let r = explore(
        OptSva::new(2, EngineConfig::default(), TraceSink::Null),
        vec![script_from_ops(&p1), script_from_ops(&p2), script_from_ops(&p3)],
        10_000_000,
        |_, _| {},
    )
    .unwrap();
    println!("3txn/2var: states={} terminals={} in {:?}", r.states_expanded, r.terminals, start.elapsed());
}
