//! Bounded, executable stable-failures semantics over finite domains.

pub mod domain;
pub mod sim;

use thiserror::Error;

pub use domain::{ConstValuation, DomainSpec, FunTable, Valuation};
pub use sim::{
    alphabet, equiv, equiv_with, failures, find_deadlock, replay_trace, Deadlock, Distinction, Event, Observation,
    Outcome, ReplayTrace, SearchResult,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("domain configuration: {0}")]
    Config(String),
    #[error("evaluation failed: {0}")]
    Eval(String),
}
