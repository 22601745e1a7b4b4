//! Trace harmony checking.
//!
//! Executable predicates over sealed traces: per-event consonance rules,
//! commit/abort agreement rules, and view-chain consistency, with located
//! counterexamples. [`check_harmony`] is the conjunction; an empty report
//! means the trace is harmonious.

mod rules;
mod view;

pub use view::TraceView;

use crate::trace::Trace;
use serde::{Deserialize, Serialize};

/// Identifies which definition a violation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Minimalism,
    TraceIsolation,
    ViewConsonance,
    RoutineUpdateConsonance,
    RecoveryUpdateConsonance,
    NonLocalReadConsonance,
    LocalReadConsonance,
    WriteConsonance,
    CommittedWriteObbligato,
    ClosingWriteObbligato,
    ViewWriteObbligato,
    Decisiveness,
    AbortAccord,
    CommitAccord,
    Coherence,
    AbortCoda,
    ChainIsolation,
    ChainSelfContainment,
    UniqueWrites,
}

impl Rule {
    pub const ALL: [Rule; 19] = [
        Rule::Minimalism,
        Rule::TraceIsolation,
        Rule::ViewConsonance,
        Rule::RoutineUpdateConsonance,
        Rule::RecoveryUpdateConsonance,
        Rule::NonLocalReadConsonance,
        Rule::LocalReadConsonance,
        Rule::WriteConsonance,
        Rule::CommittedWriteObbligato,
        Rule::ClosingWriteObbligato,
        Rule::ViewWriteObbligato,
        Rule::Decisiveness,
        Rule::AbortAccord,
        Rule::CommitAccord,
        Rule::Coherence,
        Rule::AbortCoda,
        Rule::ChainIsolation,
        Rule::ChainSelfContainment,
        Rule::UniqueWrites,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Minimalism => "minimalism",
            Rule::TraceIsolation => "trace-isolation",
            Rule::ViewConsonance => "view-consonance",
            Rule::RoutineUpdateConsonance => "routine-update-consonance",
            Rule::RecoveryUpdateConsonance => "recovery-update-consonance",
            Rule::NonLocalReadConsonance => "nonlocal-read-consonance",
            Rule::LocalReadConsonance => "local-read-consonance",
            Rule::WriteConsonance => "write-consonance",
            Rule::CommittedWriteObbligato => "committed-write-obbligato",
            Rule::ClosingWriteObbligato => "closing-write-obbligato",
            Rule::ViewWriteObbligato => "view-write-obbligato",
            Rule::Decisiveness => "decisiveness",
            Rule::AbortAccord => "abort-accord",
            Rule::CommitAccord => "commit-accord",
            Rule::Coherence => "coherence",
            Rule::AbortCoda => "abort-coda",
            Rule::ChainIsolation => "chain-isolation",
            Rule::ChainSelfContainment => "chain-self-containment",
            Rule::UniqueWrites => "unique-writes",
        }
    }

    pub fn from_name(name: &str) -> Option<Rule> {
        Rule::ALL.iter().copied().find(|r| r.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    /// Sequence numbers of the offending events.
    pub seqs: Vec<u64>,
    pub explanation: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
    /// Chain analysis was cut off; the verdict is not a silent pass.
    pub bound_exceeded: bool,
    /// Trace failed structural well-formedness; rules were not evaluated.
    pub malformed: Option<String>,
}

impl ViolationReport {
    pub fn harmonious(&self) -> bool {
        self.violations.is_empty() && !self.bound_exceeded && self.malformed.is_none()
    }

    pub fn rules_violated(&self) -> Vec<Rule> {
        let mut rules: Vec<Rule> = self.violations.iter().map(|v| v.rule).collect();
        rules.sort();
        rules.dedup();
        rules
    }

    fn push(&mut self, rule: Rule, seqs: Vec<u64>, explanation: impl Into<String>) {
        self.violations.push(Violation {
            rule,
            seqs,
            explanation: explanation.into(),
        });
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckConfig {
    /// Bound on the virtual-view graph work for chain analysis
    /// (transactions squared must stay below it).
    pub max_chain_nodes: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            max_chain_nodes: 100_000,
        }
    }
}

/// Event-level rules: minimalism, isolation, all consonance predicates,
/// unique writes.
pub fn check_event_rules(trace: &Trace) -> ViolationReport {
    with_view(trace, |view, report| {
        rules::minimalism(view, report);
        rules::trace_isolation(view, report);
        rules::view_consonance(view, report);
        rules::routine_update_consonance(view, report);
        rules::recovery_update_consonance(view, report);
        rules::read_consonance(view, report);
        rules::write_consonance(view, report);
        rules::unique_writes(view, report);
    })
}

/// Commit/abort agreement rules: the obbligatos, decisiveness, accords,
/// coherence, coda.
pub fn check_commit_rules(trace: &Trace) -> ViolationReport {
    with_view(trace, |view, report| {
        rules::obbligato(view, report);
        rules::decisiveness(view, report);
        rules::abort_accord(view, report);
        rules::commit_accord(view, report);
        rules::coherence(view, report);
        rules::abort_coda(view, report);
    })
}

/// View-chain rules: chain isolation and self-containment.
pub fn check_chain_consistency(trace: &Trace, config: CheckConfig) -> ViolationReport {
    with_view(trace, |view, report| {
        rules::chain_consistency(view, report, config.max_chain_nodes);
    })
}

/// The full conjunction.
pub fn check_harmony(trace: &Trace) -> ViolationReport {
    check_harmony_with(trace, CheckConfig::default())
}

pub fn check_harmony_with(trace: &Trace, config: CheckConfig) -> ViolationReport {
    with_view(trace, |view, report| {
        rules::minimalism(view, report);
        rules::trace_isolation(view, report);
        rules::view_consonance(view, report);
        rules::routine_update_consonance(view, report);
        rules::recovery_update_consonance(view, report);
        rules::read_consonance(view, report);
        rules::write_consonance(view, report);
        rules::unique_writes(view, report);
        rules::obbligato(view, report);
        rules::decisiveness(view, report);
        rules::abort_accord(view, report);
        rules::commit_accord(view, report);
        rules::coherence(view, report);
        rules::abort_coda(view, report);
        rules::chain_consistency(view, report, config.max_chain_nodes);
    })
}

fn with_view(
    trace: &Trace,
    f: impl FnOnce(&TraceView<'_>, &mut ViolationReport),
) -> ViolationReport {
    let mut report = ViolationReport::default();
    let history = trace.to_history();
    if !history.well_formed() {
        report.malformed = Some("history is not well-formed".into());
        return report;
    }
    let view = TraceView::new(trace);
    f(&view, &mut report);
    report
}
