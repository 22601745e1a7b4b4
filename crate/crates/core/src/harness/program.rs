//! Transaction programs: declared bounds plus operation scripts.
//!
//! The same program drives both engines and feeds the checkers, which need
//! the declared bounds to identify closing writes.

use crate::engine::TxnOp;
use crate::sim::{ScriptStep, ThreadScript};
use crate::types::{TxnDescriptor, TxnId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ending {
    Commit,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxnProgram {
    pub bounds: TxnDescriptor,
    pub ops: Vec<TxnOp>,
    pub ending: Ending,
}

impl TxnProgram {
    pub fn manual_abort(&self) -> bool {
        self.ending == Ending::Abort
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramModel {
    pub num_vars: usize,
    /// Per thread, the transactions it runs in order.
    pub threads: Vec<Vec<TxnProgram>>,
}

impl ProgramModel {
    pub fn scripts(&self) -> Vec<ThreadScript> {
        self.threads
            .iter()
            .map(|txns| {
                let mut steps = Vec::new();
                for t in txns {
                    steps.push(ScriptStep::Begin(t.bounds.clone()));
                    steps.extend(t.ops.iter().map(|&op| ScriptStep::Op(op)));
                    steps.push(ScriptStep::Op(match t.ending {
                        Ending::Commit => TxnOp::TryCommit,
                        Ending::Abort => TxnOp::TryAbort,
                    }));
                }
                ThreadScript { steps }
            })
            .collect()
    }

    pub fn txn_count(&self) -> usize {
        self.threads.iter().map(|t| t.len()).sum()
    }

    pub fn total_ops(&self) -> usize {
        self.threads
            .iter()
            .flat_map(|t| t.iter())
            .map(|t| t.ops.len())
            .sum()
    }

    pub fn has_manual_aborts(&self) -> bool {
        self.threads
            .iter()
            .flat_map(|t| t.iter())
            .any(|t| t.manual_abort())
    }

    /// Maps engine-assigned transaction ids (from a run's begin order) back
    /// to their programs.
    pub fn resolve<'a>(&'a self, txns_per_thread: &[Vec<TxnId>]) -> Vec<(TxnId, &'a TxnProgram)> {
        let mut out = Vec::new();
        for (thread, ids) in txns_per_thread.iter().enumerate() {
            for (k, &id) in ids.iter().enumerate() {
                out.push((id, &self.threads[thread][k]));
            }
        }
        out.sort_by_key(|(id, _)| *id);
        out
    }
}
