//! Static deadlock detection for programs that communicate by synchronous
//! rendezvous.
//!
//! A program is a set of nodes, each a list of `send`, `recv` and `for`
//! statements. Programs without loops are checked by queue matching
//! ([`smodel`]); programs whose nodes are single loops by ratio analysis
//! and slicing ([`l0`]); anything with nested loops by reducing strings of
//! loop powers ([`l2`]). [`oracle`] explores the state space directly and
//! serves as the reference.
//!
//! ```
//! use mpicheck_core::{check, syntax, model, CheckOptions, Via};
//!
//! let text = "node P0 { for 2 { send a to P1 } }\nnode P1 { for 2 { recv a from P0 } }";
//! let program = model::validate(syntax::parse(text).unwrap()).unwrap();
//! let analysis = check(&program, Via::Auto, &CheckOptions::default()).unwrap();
//! assert!(!analysis.verdict.is_deadlock());
//! ```

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod l0;
pub mod l2;
pub mod model;
pub mod oracle;
pub mod ratio;
pub mod smodel;
pub mod syntax;
pub mod verdict;

use model::{classify, unroll, EventQueues, ModelClass, Program, UnrollError};
pub use verdict::{AnalysisError, DeadlockWitness, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    /// Cap on unrolled events (and on reduction steps).
    pub max_events: usize,
    /// Run both S-Model methods and fail if they disagree.
    pub verify: bool,
    /// Keep the pool trace of the nested-loop checker.
    pub trace: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            max_events: model::DEFAULT_MAX_EVENTS,
            verify: false,
            trace: false,
        }
    }
}

/// Which checker to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Via {
    /// Chosen from the shape of the program.
    #[default]
    Auto,
    SModel,
    L0,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    SModel,
    L0,
    L2,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::SModel => "smodel",
            Phase::L0 => "l0",
            Phase::L2 => "l2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Details {
    SModel(EventQueues),
    L0(l0::L0Analysis),
    L2(l2::L2Analysis),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Analysis {
    pub class: ModelClass,
    pub phase: Phase,
    pub verdict: Verdict,
    pub details: Details,
}

/// Checks a validated program.
pub fn check(program: &Program, via: Via, options: &CheckOptions) -> Result<Analysis, AnalysisError> {
    let class = classify(program);
    let phase = match via {
        Via::SModel => Phase::SModel,
        Via::L0 => Phase::L0,
        Via::L2 => Phase::L2,
        Via::Auto => match class {
            ModelClass::SModel => Phase::SModel,
            ModelClass::L0 if l0::L0View::from_program(program).is_some_and(|v| v.is_canonical()) => {
                Phase::L0
            }
            _ => Phase::L2,
        },
    };
    let (verdict, details) = match phase {
        Phase::SModel => {
            let queues = unroll(program, options.max_events).map_err(|e| match e {
                UnrollError::InfiniteLoop { .. } => AnalysisError::NotApplicable {
                    method: "smodel",
                    reason: "the program has an infinite loop",
                },
                other => AnalysisError::Unroll(other),
            })?;
            let v = smodel::check_smodel(&queues, options.verify)?;
            (v, Details::SModel(queues))
        }
        Phase::L0 => {
            let a = l0::check_l0(program, options)?;
            (a.verdict.clone(), Details::L0(a))
        }
        Phase::L2 => {
            let a = l2::check_l2(program, options)?;
            (a.verdict.clone(), Details::L2(a))
        }
    };
    Ok(Analysis {
        class,
        phase,
        verdict,
        details,
    })
}

/// Every symbol is sent exactly as often as it is received.
pub fn balanced(queues: &EventQueues) -> bool {
    let mut diff: alloc::collections::BTreeMap<model::Symbol, i64> = Default::default();
    for (i, q) in queues.queues().iter().enumerate() {
        for s in q {
            *diff.entry(*s).or_default() += if s.src.index() == i { 1 } else { -1 };
        }
    }
    diff.values().all(|d| *d == 0)
}
