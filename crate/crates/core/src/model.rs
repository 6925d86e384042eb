//! Static meta-model of a flat state machine, as produced by the parser.

use serde::{Deserialize, Serialize};

use crate::ast::{Expr, QualName, TypeEnv};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventSyn {
    Simple { chan: String },
    Input { chan: String, var: String },
    Output { chan: String, value: Expr },
}

impl EventSyn {
    pub fn chan(&self) -> &str {
        match self {
            EventSyn::Simple { chan } | EventSyn::Input { chan, .. } | EventSyn::Output { chan, .. } => chan,
        }
    }

    pub fn to_source(&self) -> String {
        match self {
            EventSyn::Simple { chan } => chan.clone(),
            EventSyn::Input { chan, var } => format!("{chan}?{var}"),
            EventSyn::Output { chan, value } => format!("{chan}!{}", output_operand(value)),
        }
    }
}

/// Output payloads are parsed as full expressions; parenthesize anything
/// that is not atomic so the text stays readable.
fn output_operand(e: &Expr) -> String {
    match e {
        Expr::Bin { .. } | Expr::Not { .. } => format!("({})", e.to_source()),
        _ => e.to_source(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionSyn {
    Event {
        event: EventSyn,
    },
    Skip,
    Assign {
        var: String,
        value: Expr,
    },
    Seq {
        first: Box<ActionSyn>,
        second: Box<ActionSyn>,
    },
    If {
        cond: Expr,
        then_branch: Box<ActionSyn>,
        else_branch: Box<ActionSyn>,
    },
}

impl ActionSyn {
    pub fn seq(first: ActionSyn, second: ActionSyn) -> ActionSyn {
        ActionSyn::Seq {
            first: Box::new(first),
            second: Box::new(second),
        }
    }

    pub fn is_skip(&self) -> bool {
        matches!(self, ActionSyn::Skip)
    }

    pub fn to_source(&self) -> String {
        match self {
            ActionSyn::Event { event } => event.to_source(),
            ActionSyn::Skip => "skip".into(),
            ActionSyn::Assign { var, value } => format!("{var} := {}", value.to_source()),
            ActionSyn::Seq { first, second } => format!("{} ; {}", first.to_source(), second.to_source()),
            ActionSyn::If {
                cond,
                then_branch,
                else_branch,
            } => format!(
                "if {} then {} else {} end",
                cond.to_source(),
                then_branch.to_source(),
                else_branch.to_source()
            ),
        }
    }

    /// Variables written by the action (assignments and input targets).
    pub fn assigned(&self) -> Vec<QualName> {
        let mut out = Vec::new();
        self.collect_assigned(&mut out);
        out
    }

    fn collect_assigned(&self, out: &mut Vec<QualName>) {
        match self {
            ActionSyn::Event {
                event: EventSyn::Input { var, .. },
            }
            | ActionSyn::Assign { var, .. } => out.push(QualName::plain(var.clone())),
            ActionSyn::Seq { first, second } => {
                first.collect_assigned(out);
                second.collect_assigned(out);
            }
            ActionSyn::If {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.collect_assigned(out);
                else_branch.collect_assigned(out);
            }
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeDecl {
    pub nname: String,
    pub nentry: ActionSyn,
    pub nexit: ActionSyn,
}

impl NodeDecl {
    pub fn plain(name: &str) -> Self {
        NodeDecl {
            nname: name.to_string(),
            nentry: ActionSyn::Skip,
            nexit: ActionSyn::Skip,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransDecl {
    pub tid: String,
    pub src: String,
    pub tgt: String,
    pub trig: Option<EventSyn>,
    pub cond: Expr,
    pub act: ActionSyn,
}

impl TransDecl {
    pub fn plain(tid: &str, src: &str, tgt: &str) -> Self {
        TransDecl {
            tid: tid.to_string(),
            src: src.to_string(),
            tgt: tgt.to_string(),
            trig: None,
            cond: Expr::bool(true),
            act: ActionSyn::Skip,
        }
    }
}

/// The meta-model record. Well-formedness is checked separately, so
/// ill-formed machines are representable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StMach {
    pub name: String,
    pub env: TypeEnv,
    pub init: String,
    pub finals: Vec<String>,
    pub nodes: Vec<NodeDecl>,
    pub transs: Vec<TransDecl>,
}
