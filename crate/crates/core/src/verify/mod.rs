//! Proof obligations for deadlock freedom and state invariants, a small
//! decision procedure, and SMT-LIB export of what it cannot settle.
//!
//! Each obligation is one clause of iteration induction over the compiled
//! `do … od`: the initial node establishes the property, and every
//! intermediate node preserves it.

pub mod decide;
pub mod smt;
pub mod wp;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{constant_fold, Expr, QualName, Type, TypeEnv};
use crate::model::StMach;
use crate::parser::{parse, parse_expr, ParseError};
use crate::rewrite::{normalize_node, RewriteError};
use crate::semantics::{machine_sem, CompiledMachine, SemError};
use crate::wf::{check_wf, WfReport};

pub use decide::{check_witness, decide, Assignment, Procedure, Verdict};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Property {
    DeadlockFreedom,
    StateInvariant { invariant: Expr },
}

impl Property {
    /// Parses `deadlock` or `invariant:<expr>` against the machine's declarations.
    pub fn parse(selector: &str, env: &TypeEnv) -> Result<Property, VerifyError> {
        if selector == "deadlock" || selector == "dlockf" {
            return Ok(Property::DeadlockFreedom);
        }
        let Some(src) = selector.strip_prefix("invariant:") else {
            return Err(VerifyError::Property(format!(
                "unknown property `{selector}`; expected `deadlock` or `invariant:<expr>`"
            )));
        };
        let invariant = parse_expr(env, src).map_err(VerifyError::Parse)?;
        let p = Property::StateInvariant { invariant };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<(), VerifyError> {
        if let Property::StateInvariant { invariant } = self {
            if invariant.free_vars().iter().any(|v| v.is_actv()) {
                return Err(VerifyError::Property("an invariant may not mention `actv`".into()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::DeadlockFreedom => write!(f, "deadlock freedom"),
            Property::StateInvariant { invariant } => write!(f, "invariant {invariant}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObligationKind {
    InitEstablishes,
    NodePreserves,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binder {
    pub name: String,
    pub ty: Type,
    /// Constants are quantified like variables but declared separately.
    #[serde(default)]
    pub constant: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obligation {
    pub kind: ObligationKind,
    pub node: String,
    /// Universally quantified prefix of `formula`.
    pub quantified: Vec<Binder>,
    pub formula: Expr,
    pub provenance: String,
}

impl Obligation {
    fn new(
        env: &TypeEnv,
        kind: ObligationKind,
        node: &str,
        formula: Expr,
        inputs: &[(String, Type)],
        provenance: String,
    ) -> Self {
        let formula = constant_fold(&formula);
        let mut quantified = Vec::new();
        for v in formula.free_vars() {
            let ty = env
                .vars
                .get(&v.name)
                .or_else(|| inputs.iter().find(|(n, _)| *n == v.name).map(|(_, t)| t))
                .cloned()
                .expect("obligation variables are declared");
            quantified.push(Binder {
                name: v.name.clone(),
                ty,
                constant: false,
            });
        }
        for c in formula.consts() {
            quantified.push(Binder {
                name: c.clone(),
                ty: env.consts[&c].clone(),
                constant: true,
            });
        }
        Obligation {
            kind,
            node: node.to_string(),
            quantified,
            formula,
            provenance,
        }
    }

    /// The machine environment extended with the obligation's input binders.
    pub fn env(&self, base: &TypeEnv) -> TypeEnv {
        let mut env = base.clone();
        for b in &self.quantified {
            if !b.constant {
                env.vars.entry(b.name.clone()).or_insert_with(|| b.ty.clone());
            }
        }
        env
    }

    pub fn label(&self) -> String {
        match self.kind {
            ObligationKind::InitEstablishes => format!("InitEstablishes({})", self.node),
            ObligationKind::NodePreserves => format!("NodePreserves({})", self.node),
        }
    }
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.quantified.is_empty() {
            let vs: Vec<String> = self
                .quantified
                .iter()
                .map(|b| format!("{} : {}", b.name, b.ty))
                .collect();
            write!(f, "∀{} • ", vs.join(", "))?;
        }
        write!(f, "{}", self.formula)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("parse: {0}")]
    Parse(ParseError),
    #[error("well-formedness:\n{0}")]
    IllFormed(WfReport),
    #[error("semantics: {0}")]
    Semantics(SemError),
    #[error("normalization of node {node}: {source}")]
    Normalize { node: String, source: RewriteError },
    #[error("property: {0}")]
    Property(String),
}

fn unframe(e: &Expr) -> Expr {
    e.rename_vars(&|q: &QualName| QualName::plain(q.name.clone()))
}

/// Input binders introduced by a node body, with their types.
type Inputs = Vec<(String, Type)>;

/// The deadlock-freedom formula of one node: on every entry path, some
/// outgoing transition is enabled. Also returns the number of paths.
fn dlockf_formula(cm: &CompiledMachine, node: &str) -> Result<(Expr, Inputs, usize), VerifyError> {
    let body = &cm.per_node[node];
    let nf = normalize_node(&cm.env, body).map_err(|source| VerifyError::Normalize {
        node: node.to_string(),
        source,
    })?;
    let mut inputs = Vec::new();
    let mut parts = Vec::new();
    for path in &nf.paths {
        inputs.extend(path.binders.iter().map(|(q, t)| (q.name.clone(), t.clone())));
        let enabled = Expr::disj(path.alternatives.iter().map(|a| a.guard.clone()));
        parts.push(Expr::implies(path.cond.clone(), enabled));
    }
    Ok((unframe(&Expr::conj(parts)), inputs, nf.paths.len()))
}

/// One obligation for the initial node and one per intermediate node, in
/// declaration order.
pub fn gen_obligations(cm: &CompiledMachine, prop: &Property) -> Result<Vec<Obligation>, VerifyError> {
    prop.check()?;
    let init = cm.views.ninit.nname.clone();
    let mut out = Vec::new();
    match prop {
        Property::DeadlockFreedom => {
            // From an unconstrained start the initial node's clause is its
            // own coverage condition.
            let (f, inputs, paths) = dlockf_formula(cm, &init)?;
            out.push(Obligation::new(
                &cm.env,
                ObligationKind::InitEstablishes,
                &init,
                f,
                &inputs,
                format!("initial node {init} establishes dlockf; {paths} entry path(s)"),
            ));
            for n in &cm.views.inters {
                let (f, inputs, paths) = dlockf_formula(cm, &n.nname)?;
                out.push(Obligation::new(
                    &cm.env,
                    ObligationKind::NodePreserves,
                    &n.nname,
                    f,
                    &inputs,
                    format!("node {} preserves dlockf; {paths} entry path(s)", n.nname),
                ));
            }
        }
        Property::StateInvariant { invariant } => {
            let mut fresh = wp::Fresh::default();
            let init_node = &cm.views.nmap[&init];
            let f = wp::node_wp(init_node, &cm.views.tmap[&init], invariant, &cm.env, &mut fresh);
            out.push(Obligation::new(
                &cm.env,
                ObligationKind::InitEstablishes,
                &init,
                f,
                &fresh.take(),
                format!("every transition of initial node {init} establishes the invariant"),
            ));
            for n in &cm.views.inters {
                let f = Expr::implies(
                    invariant.clone(),
                    wp::node_wp(n, &cm.views.tmap[&n.nname], invariant, &cm.env, &mut fresh),
                );
                out.push(Obligation::new(
                    &cm.env,
                    ObligationKind::NodePreserves,
                    &n.nname,
                    f,
                    &fresh.take(),
                    format!("every transition of node {} preserves the invariant", n.nname),
                ));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Verified,
    Refuted,
    Residual,
}

/// Full result of a verification run.
#[derive(Clone, Debug)]
pub struct Verification {
    pub compiled: CompiledMachine,
    pub property: Property,
    pub obligations: Vec<Obligation>,
    pub verdicts: Vec<Verdict>,
}

impl Verification {
    pub fn status(&self) -> Status {
        if self.verdicts.iter().all(|v| matches!(v, Verdict::Valid { .. })) {
            Status::Verified
        } else if self.verdicts.iter().any(|v| matches!(v, Verdict::Invalid { .. })) {
            Status::Refuted
        } else {
            Status::Residual
        }
    }

    pub fn report(&self) -> Report {
        let obligations = self
            .obligations
            .iter()
            .zip(&self.verdicts)
            .map(|(ob, v)| ObligationReport {
                kind: ob.kind,
                node: ob.node.clone(),
                formula: ob.to_string(),
                verdict: v.label().to_string(),
                procedure: match v {
                    Verdict::Valid { procedure } => Some(*procedure),
                    _ => None,
                },
                witness: match v {
                    Verdict::Invalid { counterexample } => Some(
                        counterexample
                            .iter()
                            .map(|a| (a.term.clone(), a.value.to_string()))
                            .collect(),
                    ),
                    _ => None,
                },
            })
            .collect();
        Report {
            machine: self.compiled.name.clone(),
            property: self.property.to_string(),
            obligations,
            status: self.status(),
        }
    }

    /// SMT-LIB scripts for every obligation, keyed by file name.
    pub fn smt_scripts(&self) -> Vec<(String, String)> {
        self.obligations
            .iter()
            .map(|ob| {
                (
                    smt::file_name(&self.compiled.name, ob),
                    smt::emit_smt(&self.compiled.env, ob),
                )
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObligationReport {
    pub kind: ObligationKind,
    pub node: String,
    pub formula: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub procedure: Option<Procedure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<BTreeMap<String, String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub machine: String,
    pub property: String,
    pub obligations: Vec<ObligationReport>,
    pub status: Status,
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let valid = self.obligations.iter().filter(|o| o.verdict == "valid").count();
        writeln!(f, "machine {}: {}", self.machine, self.property)?;
        for o in &self.obligations {
            let label = match o.kind {
                ObligationKind::InitEstablishes => format!("InitEstablishes({})", o.node),
                ObligationKind::NodePreserves => format!("NodePreserves({})", o.node),
            };
            write!(f, "  {label}: {}", o.verdict)?;
            if let Some(p) = o.procedure {
                write!(f, " by {p}")?;
            }
            writeln!(f)?;
            writeln!(f, "    {}", o.formula)?;
            if let Some(w) = &o.witness {
                if w.is_empty() {
                    writeln!(f, "    counterexample: any valuation")?;
                    continue;
                }
                let items: Vec<String> = w.iter().map(|(k, v)| format!("{k} ↦ {v}")).collect();
                writeln!(f, "    counterexample: {}", items.join(", "))?;
            }
        }
        write!(
            f,
            "{:?}: {valid}/{} obligations valid",
            self.status,
            self.obligations.len()
        )
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Procedure::Folding => "folding",
            Procedure::BooleanAbstraction => "boolean-abstraction",
            Procedure::EnumEnumeration => "enum-enumeration",
        })
    }
}

pub fn verify_machine(m: &StMach, prop: &Property) -> Result<Verification, VerifyError> {
    let wf = check_wf(m);
    if !wf.is_ok() {
        return Err(VerifyError::IllFormed(wf));
    }
    let compiled = machine_sem(m).map_err(VerifyError::Semantics)?;
    let obligations = gen_obligations(&compiled, prop)?;
    let verdicts = obligations.par_iter().map(|ob| decide(&compiled.env, ob)).collect();
    Ok(Verification {
        compiled,
        property: prop.clone(),
        obligations,
        verdicts,
    })
}

/// Parses `src`, then checks the property selected by `selector`.
pub fn verify(src: &str, selector: &str) -> Result<Verification, VerifyError> {
    let m = parse(src).map_err(VerifyError::Parse)?;
    let prop = Property::parse(selector, &m.env)?;
    verify_machine(&m, &prop)
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUNTER: &str = "statemachine Counter vars x : int events tick states Loop Done initial Loop finals Done \
        transitions t from Loop to Loop trigger tick condition x < 5 action x := x + 1";

    #[test]
    fn counter_deadlock_is_refuted_at_five() {
        let v = verify(COUNTER, "deadlock").unwrap();
        assert_eq!(v.obligations.len(), 2);
        assert_eq!(v.status(), Status::Refuted);
        let Verdict::Invalid { counterexample } = &v.verdicts[1] else {
            panic!("{:?}", v.verdicts)
        };
        assert_eq!(counterexample[0].term, "x");
        assert!(counterexample[0].value.as_int().unwrap() >= 5);
    }

    #[test]
    fn trivial_invariant_holds_everywhere() {
        let v = verify(COUNTER, "invariant:true").unwrap();
        assert_eq!(v.status(), Status::Verified);
    }

    #[test]
    fn arithmetic_invariant_is_residual() {
        let v = verify(COUNTER, "invariant:x <= 5").unwrap();
        assert_eq!(v.status(), Status::Residual);
        assert!(
            v.obligations[1].to_string().contains("x + 1 ≤ 5"),
            "{}",
            v.obligations[1]
        );
    }

    #[test]
    fn actv_is_rejected_in_invariants() {
        assert!(matches!(
            verify(COUNTER, "invariant:actv = Loop"),
            Err(VerifyError::Parse(_))
        ));
        let m = parse(COUNTER).unwrap();
        let cm = machine_sem(&m).unwrap();
        let bad = Property::StateInvariant {
            invariant: Expr::eq(Expr::qvar(QualName::actv()), cm.node_lit("Loop")),
        };
        assert!(matches!(gen_obligations(&cm, &bad), Err(VerifyError::Property(_))));
    }
}
