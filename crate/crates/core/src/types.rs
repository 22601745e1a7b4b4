//! Shared identifiers and transaction descriptors.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Index of a shared variable in the engine's registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VariableId(pub u32);

/// Engine-assigned transaction identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxnId(pub u32);

/// Identifier for an asynchronous concurrency-control task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId(pub u32);

/// Domain values are opaque integers; every variable starts at 0.
pub type Value = i64;

/// The initial value of every shared variable.
pub const INITIAL_VALUE: Value = 0;

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

impl fmt::Display for TxnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TxnStatus {
    Active,
    Committed,
    Aborted,
}

/// Declared access bounds for one variable of one transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarBounds {
    pub var: VariableId,
    /// Upper bound on the number of reads.
    pub rub: u32,
    /// Upper bound on the number of writes.
    pub wub: u32,
}

impl VarBounds {
    pub fn new(var: VariableId, rub: u32, wub: u32) -> Self {
        VarBounds { var, rub, wub }
    }

    /// A variable that is read but never written is buffered and released
    /// at the first opportunity.
    pub fn is_read_only(&self) -> bool {
        self.rub > 0 && self.wub == 0
    }
}

/// A priori knowledge a transaction declares at start: its access set with
/// per-variable read/write upper bounds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct TxnDescriptor {
    pub aset: Vec<VarBounds>,
}

impl TxnDescriptor {
    pub fn new(mut aset: Vec<VarBounds>) -> Self {
        aset.sort_by_key(|b| b.var);
        TxnDescriptor { aset }
    }

    pub fn bounds(&self, var: VariableId) -> Option<&VarBounds> {
        self.aset.iter().find(|b| b.var == var)
    }

    /// Checks structural invariants: each variable listed once, no variable
    /// with both bounds zero.
    pub fn validate(&self, num_vars: usize) -> Result<(), DescriptorError> {
        for (i, b) in self.aset.iter().enumerate() {
            if b.var.0 as usize >= num_vars {
                return Err(DescriptorError::UnknownVariable(b.var));
            }
            if b.rub == 0 && b.wub == 0 {
                return Err(DescriptorError::EmptyBounds(b.var));
            }
            if self.aset[..i].iter().any(|p| p.var == b.var) {
                return Err(DescriptorError::DuplicateVariable(b.var));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DescriptorError {
    #[error("variable {0} is not in the engine's registry")]
    UnknownVariable(VariableId),
    #[error("variable {0} declared more than once")]
    DuplicateVariable(VariableId),
    #[error("variable {0} declared with rub = wub = 0")]
    EmptyBounds(VariableId),
}
