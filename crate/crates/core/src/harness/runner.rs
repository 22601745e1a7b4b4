//! Executes programs against either engine, on real threads or under the
//! virtual-time simulator, and collects metrics.

use super::program::ProgramModel;
use crate::engine::EngineConfig;
use crate::runtime::{run_threaded, DeadlockReport};
use crate::sim::{simulate, RunError, SimConfig};
use crate::trace::{Trace, TraceSink};
use crate::types::TxnId;
use crate::{OptSva, Sva};
use serde::{Deserialize, Serialize};
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Optsva,
    Sva,
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EngineKind::Optsva => "optsva",
            EngineKind::Sva => "sva",
        })
    }
}

impl std::str::FromStr for EngineKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optsva" => Ok(EngineKind::Optsva),
            "sva" => Ok(EngineKind::Sva),
            other => Err(format!("unknown engine {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub engine: EngineKind,
    pub threads: usize,
    pub txns: usize,
    pub ops: u64,
    pub wall_micros: u128,
    /// Virtual-time makespan (simulated runs only).
    pub makespan: Option<u64>,
    pub throughput_ops_per_sec: f64,
    pub forced_aborts: u64,
    pub manual_aborts: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum RunFailure {
    #[error(transparent)]
    Deadlock(#[from] DeadlockReport),
    #[error("simulation failed: {0}")]
    Sim(#[from] RunError),
}

pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trace: Option<Trace>,
    /// Engine-assigned transaction ids per thread, in begin order.
    pub txns: Vec<Vec<TxnId>>,
}

/// Runs the program on real OS threads (one per program thread).
pub fn run_on_threads(
    program: &ProgramModel,
    engine: EngineKind,
    record: bool,
    timeout: Duration,
) -> Result<RunOutput, RunFailure> {
    let scripts = program.scripts();
    let sink = if record {
        TraceSink::Shared(std::sync::Arc::new(std::sync::Mutex::new(
            crate::trace::TraceBuffer::new(),
        )))
    } else {
        TraceSink::Null
    };
    let workers = 2.max(program.threads.len() / 2);
    let (wall, forced, txns, trace) = match engine {
        EngineKind::Optsva => {
            let core = OptSva::new(program.num_vars, EngineConfig::default(), sink);
            let mut out = run_threaded(core, program.num_vars, scripts, workers, timeout)?;
            let trace = out.engine.take_sink().into_trace();
            (out.wall, out.forced_aborts, out.txns, trace)
        }
        EngineKind::Sva => {
            let core = Sva::new(program.num_vars, EngineConfig::default(), sink);
            let mut out = run_threaded(core, program.num_vars, scripts, workers, timeout)?;
            let trace = out.engine.take_sink().into_trace();
            (out.wall, out.forced_aborts, out.txns, trace)
        }
    };
    let ops = program.total_ops() as u64;
    let metrics = RunMetrics {
        engine,
        threads: program.threads.len(),
        txns: program.txn_count(),
        ops,
        wall_micros: wall.as_micros(),
        makespan: None,
        throughput_ops_per_sec: ops as f64 / wall.as_secs_f64().max(1e-9),
        forced_aborts: forced,
        manual_aborts: program
            .threads
            .iter()
            .flatten()
            .filter(|t| t.manual_abort())
            .count() as u64,
    };
    Ok(RunOutput {
        metrics,
        trace,
        txns,
    })
}

/// Runs the program under virtual time; every shared-variable operation
/// costs `op_latency` ticks of thread-local work.
pub fn run_simulated(
    program: &ProgramModel,
    engine: EngineKind,
    op_latency: u64,
    record: bool,
) -> Result<RunOutput, RunFailure> {
    let scripts = program.scripts();
    let sink = if record {
        TraceSink::Buffer(crate::trace::TraceBuffer::new())
    } else {
        TraceSink::Null
    };
    let config = SimConfig { op_latency };
    let start = std::time::Instant::now();
    let (out, trace, txns) = match engine {
        EngineKind::Optsva => {
            let core = OptSva::new(program.num_vars, EngineConfig::default(), sink);
            let (out, mut core) = simulate(core, scripts, config)?;
            let trace = core.take_sink().into_trace();
            let txns = out.txns.clone();
            (out, trace, txns)
        }
        EngineKind::Sva => {
            let core = Sva::new(program.num_vars, EngineConfig::default(), sink);
            let (out, mut core) = simulate(core, scripts, config)?;
            let trace = core.take_sink().into_trace();
            let txns = out.txns.clone();
            (out, trace, txns)
        }
    };
    let wall = start.elapsed();
    let metrics = RunMetrics {
        engine,
        threads: program.threads.len(),
        txns: program.txn_count(),
        ops: out.ops,
        wall_micros: wall.as_micros(),
        makespan: Some(out.makespan),
        throughput_ops_per_sec: out.ops as f64 / wall.as_secs_f64().max(1e-9),
        forced_aborts: out.forced_aborts,
        manual_aborts: program
            .threads
            .iter()
            .flatten()
            .filter(|t| t.manual_abort())
            .count() as u64,
    };
    Ok(RunOutput {
        metrics,
        trace,
        txns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::workload::{generate, WorkloadSpec};

    #[test]
    fn abort_free_program_has_zero_forced_aborts() {
        let program = generate(&WorkloadSpec {
            threads: 4,
            txns_per_thread: 3,
            ..WorkloadSpec::default()
        })
        .unwrap();
        let out = run_on_threads(
            &program,
            EngineKind::Optsva,
            false,
            Duration::from_secs(30),
        )
        .unwrap();
        assert_eq!(out.metrics.forced_aborts, 0);
    }

    #[test]
    fn empty_program_runs_in_zero_time() {
        let program = ProgramModel {
            num_vars: 1,
            threads: vec![],
        };
        let out = run_simulated(&program, EngineKind::Sva, 100, false).unwrap();
        assert_eq!(out.metrics.ops, 0);
        assert_eq!(out.metrics.makespan, Some(0));
    }

    #[test]
    fn simulated_makespan_dominance_on_a_seeded_program() {
        let program = generate(&WorkloadSpec {
            threads: 4,
            txns_per_thread: 4,
            seed: 42,
            ..WorkloadSpec::default()
        })
        .unwrap();
        let opt = run_simulated(&program, EngineKind::Optsva, 100, false).unwrap();
        let sva = run_simulated(&program, EngineKind::Sva, 100, false).unwrap();
        assert!(
            opt.metrics.makespan.unwrap() <= sva.metrics.makespan.unwrap(),
            "optsva {} vs sva {}",
            opt.metrics.makespan.unwrap(),
            sva.metrics.makespan.unwrap()
        );
    }
}
