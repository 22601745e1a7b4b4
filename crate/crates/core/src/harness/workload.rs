//! Workload generation.
//!
//! Two generators: the parameterized benchmark generator (threads drawing
//! reads and writes over a hot array with a locality window), and a
//! small-scope stress generator that additionally exercises inflated
//! bounds, declared-but-unused variables, read-only declarations, and
//! manual aborts.

use super::program::{Ending, ProgramModel, TxnProgram};
use crate::engine::TxnOp;
use crate::types::{TxnDescriptor, VarBounds, VariableId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub threads: usize,
    pub txns_per_thread: usize,
    /// Long transactions run 10 operations, short ones 5.
    pub ops_per_txn: usize,
    /// reads : writes, e.g. (5, 1) or (1, 5).
    pub rw_ratio: (u32, u32),
    /// High contention: 20 shared variables; low: 80.
    pub hot_array_size: usize,
    pub mild_array_size: usize,
    pub cold_array_size: usize,
    /// Fraction of accesses drawn from the recent-access window.
    pub locality: f64,
    pub locality_history: usize,
    /// Simulated ticks per shared-variable operation.
    pub op_latency: u64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            threads: 8,
            txns_per_thread: 10,
            ops_per_txn: 5,
            rw_ratio: (5, 1),
            hot_array_size: 20,
            mild_array_size: 0,
            cold_array_size: 0,
            locality: 0.5,
            locality_history: 5,
            op_latency: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerateError {
    #[error("read/write ratio must not be 0:0")]
    EmptyRatio,
    #[error("hot array must not be empty")]
    EmptyHotArray,
}

/// Deterministically generates the per-thread transaction programs for a
/// spec. Only hot-array variables are contended; mild-array variables get a
/// per-thread partition.
pub fn generate(spec: &WorkloadSpec) -> Result<ProgramModel, GenerateError> {
    if spec.rw_ratio == (0, 0) {
        return Err(GenerateError::EmptyRatio);
    }
    if spec.hot_array_size == 0 {
        return Err(GenerateError::EmptyHotArray);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let num_vars = spec.hot_array_size + spec.mild_array_size * spec.threads;
    let mut next_value: i64 = 1;
    let mut threads = Vec::with_capacity(spec.threads);
    for thread in 0..spec.threads {
        let mut history: Vec<VariableId> = Vec::new();
        let mut txns = Vec::with_capacity(spec.txns_per_thread);
        for _ in 0..spec.txns_per_thread {
            let mut ops = Vec::with_capacity(spec.ops_per_txn);
            let mut counts: BTreeMap<VariableId, (u32, u32)> = BTreeMap::new();
            for _ in 0..spec.ops_per_txn {
                let from_mild = spec.mild_array_size > 0 && rng.gen_bool(0.2);
                let var = if from_mild {
                    let base = spec.hot_array_size + thread * spec.mild_array_size;
                    VariableId((base + rng.gen_range(0..spec.mild_array_size)) as u32)
                } else if !history.is_empty() && rng.gen_bool(spec.locality) {
                    history[rng.gen_range(0..history.len())]
                } else {
                    VariableId(rng.gen_range(0..spec.hot_array_size) as u32)
                };
                history.push(var);
                if history.len() > spec.locality_history {
                    history.remove(0);
                }
                let (r, w) = spec.rw_ratio;
                let is_read = rng.gen_range(0..r + w) < r;
                if is_read {
                    counts.entry(var).or_default().0 += 1;
                    ops.push(TxnOp::Read(var));
                } else {
                    counts.entry(var).or_default().1 += 1;
                    ops.push(TxnOp::Write(var, next_value));
                    next_value += 1;
                }
            }
            let bounds = TxnDescriptor::new(
                counts
                    .iter()
                    .map(|(&v, &(r, w))| VarBounds::new(v, r, w))
                    .collect(),
            );
            txns.push(TxnProgram {
                bounds,
                ops,
                ending: Ending::Commit,
            });
        }
        threads.push(txns);
    }
    Ok(ProgramModel { num_vars, threads })
}

#[derive(Debug, Clone, Copy)]
pub struct StressSpec {
    pub min_txns: usize,
    pub max_txns: usize,
    pub min_vars: usize,
    pub max_vars: usize,
    pub max_ops: usize,
    /// Probability a transaction ends in a manual abort.
    pub abort_p: f64,
    pub seed: u64,
}

impl Default for StressSpec {
    fn default() -> Self {
        StressSpec {
            min_txns: 2,
            max_txns: 5,
            min_vars: 1,
            max_vars: 3,
            max_ops: 6,
            abort_p: 0.2,
            seed: 0,
        }
    }
}

/// Small randomized programs: one transaction per thread, covering read-only
/// declarations, inflated bounds (commit-time catch-up), declared-but-unused
/// variables, and manual aborts.
pub fn generate_stress(spec: &StressSpec) -> ProgramModel {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let num_vars = rng.gen_range(spec.min_vars..=spec.max_vars);
    let n_txns = rng.gen_range(spec.min_txns..=spec.max_txns);
    let mut next_value: i64 = 1;
    let mut threads = Vec::with_capacity(n_txns);
    for _ in 0..n_txns {
        let n_ops = rng.gen_range(1..=spec.max_ops);
        let mut ops = Vec::with_capacity(n_ops);
        let mut counts: BTreeMap<VariableId, (u32, u32)> = BTreeMap::new();
        for _ in 0..n_ops {
            let var = VariableId(rng.gen_range(0..num_vars) as u32);
            if rng.gen_bool(0.5) {
                counts.entry(var).or_default().0 += 1;
                ops.push(TxnOp::Read(var));
            } else {
                counts.entry(var).or_default().1 += 1;
                ops.push(TxnOp::Write(var, next_value));
                next_value += 1;
            }
        }
        // Inflate bounds occasionally: extra declared writes exercise the
        // commit-time catch-up, extra reads a buffered-but-unread variable.
        for (_, (r, w)) in counts.iter_mut() {
            if *w > 0 && rng.gen_bool(0.2) {
                *w += 1;
            }
            if rng.gen_bool(0.1) {
                *r += 1;
            }
        }
        // Occasionally declare a variable that is never accessed.
        if rng.gen_bool(0.15) {
            let var = VariableId(rng.gen_range(0..num_vars) as u32);
            let entry = counts.entry(var).or_default();
            if entry.0 == 0 && entry.1 == 0 {
                if rng.gen_bool(0.5) {
                    entry.0 = 1;
                } else {
                    entry.1 = 1;
                }
            }
        }
        let bounds = TxnDescriptor::new(
            counts
                .iter()
                .map(|(&v, &(r, w))| VarBounds::new(v, r, w))
                .collect(),
        );
        let ending = if rng.gen_bool(spec.abort_p) {
            Ending::Abort
        } else {
            Ending::Commit
        };
        threads.push(vec![TxnProgram { bounds, ops, ending }]);
    }
    ProgramModel { num_vars, threads }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_program() {
        let spec = WorkloadSpec::default();
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn different_seed_different_program() {
        let a = generate(&WorkloadSpec::default()).unwrap();
        let b = generate(&WorkloadSpec {
            seed: 1,
            ..WorkloadSpec::default()
        })
        .unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn short_high_contention_shape() {
        let spec = WorkloadSpec {
            ops_per_txn: 5,
            rw_ratio: (5, 1),
            hot_array_size: 20,
            ..WorkloadSpec::default()
        };
        let p = generate(&spec).unwrap();
        assert_eq!(p.num_vars, 20);
        let mut reads = 0usize;
        let mut writes = 0usize;
        for t in p.threads.iter().flatten() {
            assert_eq!(t.ops.len(), 5);
            for op in &t.ops {
                match op {
                    TxnOp::Read(_) => reads += 1,
                    TxnOp::Write(..) => writes += 1,
                    _ => {}
                }
            }
        }
        let ratio = reads as f64 / (reads + writes) as f64;
        assert!((0.75..0.92).contains(&ratio), "read share {ratio}");
    }

    #[test]
    fn infeasible_ratio_is_an_error() {
        let spec = WorkloadSpec {
            rw_ratio: (0, 0),
            ..WorkloadSpec::default()
        };
        assert_eq!(generate(&spec), Err(GenerateError::EmptyRatio));
    }

    #[test]
    fn locality_revisits_recent_variables() {
        let spec = WorkloadSpec {
            threads: 4,
            txns_per_thread: 50,
            ops_per_txn: 10,
            hot_array_size: 80,
            locality: 0.5,
            ..WorkloadSpec::default()
        };
        let p = generate(&spec).unwrap();
        let mut revisits = 0usize;
        let mut total = 0usize;
        for txns in &p.threads {
            let mut history: Vec<VariableId> = Vec::new();
            for t in txns {
                for op in &t.ops {
                    let var = match op {
                        TxnOp::Read(x) | TxnOp::Write(x, _) => *x,
                        _ => continue,
                    };
                    total += 1;
                    if history.contains(&var) {
                        revisits += 1;
                    }
                    history.push(var);
                    if history.len() > spec.locality_history {
                        history.remove(0);
                    }
                }
            }
        }
        let share = revisits as f64 / total as f64;
        assert!(share >= 0.4, "revisit share {share}");
    }

    #[test]
    fn bounds_match_operation_counts() {
        let p = generate(&WorkloadSpec::default()).unwrap();
        for t in p.threads.iter().flatten() {
            let mut counts: BTreeMap<VariableId, (u32, u32)> = BTreeMap::new();
            for op in &t.ops {
                match op {
                    TxnOp::Read(x) => counts.entry(*x).or_default().0 += 1,
                    TxnOp::Write(x, _) => counts.entry(*x).or_default().1 += 1,
                    _ => {}
                }
            }
            for b in &t.bounds.aset {
                assert_eq!(counts[&b.var], (b.rub, b.wub));
            }
        }
    }
}
