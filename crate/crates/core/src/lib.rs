//! Verification toolkit for flat state machines.
//!
//! The pipeline is `parser` → `wf` → `semantics` (compiling to the reactive
//! IR in `ir`) → `rewrite` → `verify`, with `oracle` as an independent
//! bounded operational semantics used to cross-check the rest.

pub mod ast;
pub mod cli;
pub mod ir;
pub mod model;
pub mod oracle;
pub mod parser;
pub mod printer;
pub mod rewrite;
pub mod semantics;
pub mod value;
pub mod verify;
pub mod wf;

pub use ast::{constant_fold, subst_apply, subst_compose, Expr, QualName, Subst, Type, TypeEnv};
pub use model::{ActionSyn, EventSyn, NodeDecl, StMach, TransDecl};
pub use parser::{parse, parse_expr, ParseError};
pub use printer::pretty_print;
