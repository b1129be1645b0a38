//! Verdicts, deadlock witnesses and the error type shared by the checkers.

use alloc::vec::Vec;

use thiserror::Error;

use crate::l2::FppSnapshot;
use crate::model::{CountError, EventQueues, LoopCount, NodeId, Symbol, UnrollError};
use crate::ratio::{Inconsistency, RegError};
use crate::smodel::MatchedPair;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    DeadlockFree,
    Deadlock(DeadlockWitness),
}

impl Verdict {
    pub fn is_deadlock(&self) -> bool {
        matches!(self, Verdict::Deadlock(_))
    }

    pub fn witness(&self) -> Option<&DeadlockWitness> {
        match self {
            Verdict::Deadlock(w) => Some(w),
            Verdict::DeadlockFree => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeadlockWitness {
    /// Queue contents left when no further match was possible.
    StuckQueues(EventQueues),
    /// Directed cycle of matched pairs in the message dependence graph.
    MdgCycle(Vec<MatchedPair>),
    /// A symbol whose sends and receives can never all be matched.
    UnmatchedTotals { symbol: Symbol, sends: u64, recvs: u64 },
    RatioInconsistency(RatioConflict),
    /// The first power pool could no longer be reduced.
    FppStuck(FppSnapshot),
}

/// Why a ratio check failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RatioConflict {
    /// The ratio equation group has no solution.
    Unsolvable {
        inconsistency: Inconsistency,
        /// Symbol behind each equation of the witness (path, then conflicting).
        symbols: Vec<Symbol>,
    },
    /// `p_i * t_i != p_j * t_j` inside one component (infinite counts as 0).
    LoopTimes {
        first: LoopTimeTerm,
        second: LoopTimeTerm,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopTimeTerm {
    pub node: NodeId,
    pub ratio: u128,
    pub times: LoopCount,
}

impl LoopTimeTerm {
    /// The product compared by the consistency check.
    pub fn product(&self) -> Option<u128> {
        match self.times {
            LoopCount::Infinite => Some(0),
            LoopCount::Finite(t) => self.ratio.checked_mul(t as u128),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    Unroll(#[from] UnrollError),
    #[error("{0}")]
    Count(#[from] CountError),
    #[error("ratio solver: {0}")]
    Reg(RegError),
    #[error("method `{method}` does not apply: {reason}")]
    NotApplicable {
        method: &'static str,
        reason: &'static str,
    },
    #[error("analysis exceeded its budget of {limit} steps")]
    SizeExceeded { limit: usize },
    #[error("queue matching and the dependence-graph test disagree (queues: {queues_deadlock}, graph: {graph_deadlock})")]
    InternalDisagreement {
        queues_deadlock: bool,
        graph_deadlock: bool,
    },
}
