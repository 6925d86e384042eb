//! Compilation of well-formed machines into guarded-iteration programs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{Expr, QualName, Type, TypeEnv, ACTV};
use crate::ir::{do_iter, frame_extend, IrError, RProg};
use crate::model::{ActionSyn, EventSyn, NodeDecl, StMach, TransDecl};
use crate::wf::{views, IllFormed, MachineViews};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemError {
    #[error(transparent)]
    IllFormed(#[from] IllFormed),
    #[error(transparent)]
    Ir(#[from] IrError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledMachine {
    pub name: String,
    pub program: RProg,
    /// The machine environment extended with `actv` over the node identifiers.
    pub env: TypeEnv,
    pub per_node: BTreeMap<String, RProg>,
    pub views: MachineViews,
}

impl CompiledMachine {
    pub fn node_type(&self) -> &Type {
        &self.env.vars[ACTV]
    }

    pub fn node_lit(&self, node: &str) -> Expr {
        node_lit(self.node_type(), node)
    }
}

fn node_lit(node_type: &Type, node: &str) -> Expr {
    match node_type {
        Type::Enum { name, .. } => Expr::enum_lit(name, node),
        _ => unreachable!("actv is always an enumeration"),
    }
}

/// Translates a meta-model action into an (unframed) program.
pub fn action_sem(a: &ActionSyn) -> RProg {
    match a {
        ActionSyn::Event { event } => event_sem(event),
        ActionSyn::Skip => RProg::SkipR,
        ActionSyn::Assign { var, value } => RProg::assign(QualName::plain(var.clone()), value.clone()),
        ActionSyn::Seq { first, second } => RProg::seq(action_sem(first), action_sem(second)),
        ActionSyn::If {
            cond,
            then_branch,
            else_branch,
        } => RProg::cond(action_sem(then_branch), cond.clone(), action_sem(else_branch)),
    }
}

pub fn event_sem(e: &EventSyn) -> RProg {
    match e {
        EventSyn::Simple { chan } => RProg::simple(chan),
        EventSyn::Input { chan, var } => RProg::input(chan, QualName::plain(var.clone())),
        EventSyn::Output { chan, value } => RProg::out(chan, value.clone()),
    }
}

fn node_type_of(m: &StMach) -> Type {
    let mut name = "NodeId".to_string();
    while m.env.is_declared(&name) {
        name.push('_');
    }
    Type::Enum {
        name,
        ctors: m.nodes.iter().map(|n| n.nname.clone()).collect(),
    }
}

/// `r:(cond ▷ trig ; exit ; act) ; actv := tgt`, with `ε` for a missing trigger.
/// A true condition and skip actions are left out.
pub fn trans_sem(node_type: &Type, n: &NodeDecl, t: &TransDecl) -> Result<RProg, IrError> {
    let trig = t.trig.as_ref().map(event_sem).unwrap_or_else(RProg::eps);
    let mut items = vec![trig];
    for a in [&n.nexit, &t.act] {
        if !a.is_skip() {
            items.push(action_sem(a));
        }
    }
    let mut body = RProg::seq_all(items);
    if !t.cond.is_true() {
        body = RProg::guard(t.cond.clone(), body);
    }
    Ok(RProg::seq(
        frame_extend(&body)?,
        RProg::assign(QualName::actv(), node_lit(node_type, &t.tgt)),
    ))
}

/// `r:entry ; □ t ∈ tmap(N) • T⟦t⟧`. The external choice is kept even for
/// zero or one alternative so the entry stays separable from the choice.
pub fn node_sem(v: &MachineViews, node_type: &Type, n: &NodeDecl) -> Result<RProg, IrError> {
    let alts = v.tmap[&n.nname]
        .iter()
        .map(|t| trans_sem(node_type, n, t))
        .collect::<Result<Vec<_>, _>>()?;
    let choice = RProg::ext(alts);
    if n.nentry.is_skip() {
        Ok(choice)
    } else {
        Ok(RProg::seq(frame_extend(&action_sem(&n.nentry))?, choice))
    }
}

pub fn machine_sem(m: &StMach) -> Result<CompiledMachine, SemError> {
    let v = views(m)?;
    let node_type = node_type_of(m);
    let mut env = m.env.clone();
    if let Type::Enum { name, .. } = &node_type {
        env.types.insert(name.clone(), node_type.clone());
    }
    env.vars.insert(ACTV.to_string(), node_type.clone());

    let mut per_node = BTreeMap::new();
    let mut branches = Vec::new();
    for n in &v.inters {
        let body = node_sem(&v, &node_type, n)?;
        per_node.insert(n.nname.clone(), body.clone());
        branches.push((
            Expr::eq(Expr::qvar(QualName::actv()), node_lit(&node_type, &n.nname)),
            body,
        ));
    }
    let program = RProg::seq(
        RProg::assign(QualName::actv(), node_lit(&node_type, &m.init)),
        do_iter(branches)?,
    );
    Ok(CompiledMachine {
        name: m.name.clone(),
        program,
        env,
        per_node,
        views: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    #[test]
    fn trigger_less_transition_gets_eps() {
        let m = parse("statemachine M vars events states A B initial A finals B transitions t from A to B").unwrap();
        let cm = machine_sem(&m).unwrap();
        assert_eq!(cm.per_node["A"].to_string(), "ε ; actv := B");
        assert_eq!(cm.program.to_string(), "actv := A ; do actv = A → ε ; actv := B od");
    }

    #[test]
    fn node_without_transitions_stops() {
        let m = parse("statemachine M vars x : int events states A entry x := 1 initial A finals transitions").unwrap();
        let cm = machine_sem(&m).unwrap();
        assert_eq!(
            cm.per_node["A"],
            RProg::seq(RProg::assign(QualName::framed("x"), Expr::int(1)), RProg::ext(vec![]))
        );
    }

    #[test]
    fn ill_formed_is_rejected() {
        let m = parse("statemachine M vars events states A initial B finals transitions").unwrap();
        assert!(matches!(machine_sem(&m), Err(SemError::IllFormed(_))));
    }
}
