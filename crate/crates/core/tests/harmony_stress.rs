//! Randomized engine runs must produce harmonious traces.
//!
//! These runs mix manual aborts, inflated bounds, read-only declarations,
//! and declared-but-unused variables; every recorded trace is put through
//! the full harmony conjunction. The acceptance suite scales the counts up.

use optsva::engine::EngineConfig;
use optsva::harmony::check_harmony;
use optsva::harness::{generate_stress, StressSpec};
use optsva::sim::run_seeded;
use optsva::trace::{TraceBuffer, TraceSink};
use optsva::{OptSva, Sva};

fn check_seed(seed: u64) {
    let program = generate_stress(&StressSpec {
        seed,
        ..StressSpec::default()
    });
    let scripts = program.scripts();

    let engine = OptSva::new(
        program.num_vars,
        EngineConfig::default(),
        TraceSink::Buffer(TraceBuffer::new()),
    );
    let out = run_seeded(engine, scripts.clone(), seed.wrapping_mul(31)).unwrap();
    let mut engine = out.engine;
    let trace = engine.take_sink().into_trace().unwrap();
    let report = check_harmony(&trace);
    if !report.harmonious() {
        let mut dump = Vec::new();
        trace.write_jsonl(&mut dump).unwrap();
        panic!(
            "optsva seed {seed} violates harmony: {:#?}\ntrace:\n{}",
            report.violations,
            String::from_utf8(dump).unwrap()
        );
    }

    let engine = Sva::new(
        program.num_vars,
        EngineConfig::default(),
        TraceSink::Buffer(TraceBuffer::new()),
    );
    let out = run_seeded(engine, scripts, seed.wrapping_mul(37)).unwrap();
    let mut engine = out.engine;
    let trace = engine.take_sink().into_trace().unwrap();
    let report = check_harmony(&trace);
    if !report.harmonious() {
        let mut dump = Vec::new();
        trace.write_jsonl(&mut dump).unwrap();
        panic!(
            "sva seed {seed} violates harmony: {:#?}\ntrace:\n{}",
            report.violations,
            String::from_utf8(dump).unwrap()
        );
    }
}

#[test]
fn random_small_runs_are_harmonious() {
    for seed in 0..400 {
        check_seed(seed);
    }
}

#[test]
fn threaded_runs_are_harmonious() {
    use optsva::harness::runner::{run_on_threads, EngineKind};
    for seed in 0..60 {
        let program = generate_stress(&StressSpec {
            seed: 10_000 + seed,
            ..StressSpec::default()
        });
        for engine in [EngineKind::Optsva, EngineKind::Sva] {
            let out = run_on_threads(
                &program,
                engine,
                true,
                std::time::Duration::from_secs(20),
            )
            .unwrap();
            let trace = out.trace.unwrap();
            let report = check_harmony(&trace);
            if !report.harmonious() {
                let mut dump = Vec::new();
                trace.write_jsonl(&mut dump).unwrap();
                panic!(
                    "{engine} threaded seed {seed} violates harmony: {:#?}\ntrace:\n{}",
                    report.violations,
                    String::from_utf8(dump).unwrap()
                );
            }
        }
    }
}
