//! Reactive-program terms and their smart constructors.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{mk_not, Expr, QualName, Subst, ACTV};

/// The distinguished event standing in for an absent trigger.
pub const EPS: &str = "ε";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub guard: Expr,
    pub body: RProg,
}

impl Branch {
    pub fn new(guard: Expr, body: RProg) -> Self {
        Branch { guard, body }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RProg {
    Miracle,
    Chaos,
    SkipR,
    StopR,
    AssignS {
        subst: Subst,
    },
    DoSimple {
        chan: String,
    },
    DoOut {
        chan: String,
        value: Expr,
    },
    DoIn {
        chan: String,
        var: QualName,
    },
    /// `b ▷ P`: behaves as `P` when `b` holds, otherwise as `Stop`.
    Guard {
        cond: Expr,
        body: Box<RProg>,
    },
    SeqR {
        first: Box<RProg>,
        second: Box<RProg>,
    },
    /// `P ◁ b ▷ Q`.
    CondR {
        then_branch: Box<RProg>,
        cond: Expr,
        else_branch: Box<RProg>,
    },
    ExtChoice {
        alts: Vec<RProg>,
    },
    NdChoice {
        alts: Vec<RProg>,
    },
    Assume {
        cond: Expr,
    },
    Alternation {
        branches: Vec<Branch>,
    },
    DoIter {
        branches: Vec<Branch>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("iteration branch guarded by `{guard}` is not productive: {body}")]
    NotProductive { guard: String, body: String },
    #[error("`actv` may not occur inside a frame-extended program: {0}")]
    ActvInFrame(String),
}

impl RProg {
    pub fn assign(var: QualName, value: Expr) -> RProg {
        RProg::AssignS {
            subst: Subst::single(var, value),
        }
    }

    pub fn assigns(subst: Subst) -> RProg {
        RProg::AssignS { subst }
    }

    pub fn simple(chan: &str) -> RProg {
        RProg::DoSimple { chan: chan.to_string() }
    }

    pub fn eps() -> RProg {
        RProg::simple(EPS)
    }

    pub fn out(chan: &str, value: Expr) -> RProg {
        RProg::DoOut {
            chan: chan.to_string(),
            value,
        }
    }

    pub fn input(chan: &str, var: QualName) -> RProg {
        RProg::DoIn {
            chan: chan.to_string(),
            var,
        }
    }

    pub fn guard(cond: Expr, body: RProg) -> RProg {
        RProg::Guard {
            cond,
            body: Box::new(body),
        }
    }

    pub fn seq(first: RProg, second: RProg) -> RProg {
        RProg::SeqR {
            first: Box::new(first),
            second: Box::new(second),
        }
    }

    /// Right-nested sequence of `items`; `Skip` when empty.
    pub fn seq_all(items: impl IntoIterator<Item = RProg>) -> RProg {
        let items: Vec<RProg> = items.into_iter().collect();
        let mut it = items.into_iter().rev();
        match it.next() {
            None => RProg::SkipR,
            Some(last) => it.fold(last, |acc, p| RProg::seq(p, acc)),
        }
    }

    pub fn cond(then_branch: RProg, cond: Expr, else_branch: RProg) -> RProg {
        RProg::CondR {
            then_branch: Box::new(then_branch),
            cond,
            else_branch: Box::new(else_branch),
        }
    }

    pub fn ext(alts: Vec<RProg>) -> RProg {
        RProg::ExtChoice { alts }
    }

    pub fn nd(alts: Vec<RProg>) -> RProg {
        RProg::NdChoice { alts }
    }

    pub fn is_skip(&self) -> bool {
        matches!(self, RProg::SkipR) || matches!(self, RProg::AssignS { subst } if subst.is_identity())
    }

    /// Immediate sub-programs.
    pub fn children(&self) -> Vec<&RProg> {
        match self {
            RProg::Guard { body, .. } => vec![body],
            RProg::SeqR { first, second } => vec![first, second],
            RProg::CondR {
                then_branch,
                else_branch,
                ..
            } => vec![then_branch, else_branch],
            RProg::ExtChoice { alts } | RProg::NdChoice { alts } => alts.iter().collect(),
            RProg::Alternation { branches } | RProg::DoIter { branches } => branches.iter().map(|b| &b.body).collect(),
            _ => vec![],
        }
    }

    /// Number of constructors in the term, a size measure for generators and budgets.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Channels mentioned by the program.
    pub fn channels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_channels(&mut out);
        out
    }

    fn collect_channels(&self, out: &mut BTreeSet<String>) {
        match self {
            RProg::DoSimple { chan } | RProg::DoOut { chan, .. } | RProg::DoIn { chan, .. } => {
                out.insert(chan.clone());
            }
            _ => self.children().iter().for_each(|c| c.collect_channels(out)),
        }
    }

    /// Every variable read or written, including `actv`.
    pub fn variables(&self) -> BTreeSet<QualName> {
        let mut out = BTreeSet::new();
        self.visit_exprs(&mut |e| out.extend(e.free_vars()));
        self.visit(&mut |p| match p {
            RProg::AssignS { subst } => out.extend(subst.0.keys().cloned()),
            RProg::DoIn { var, .. } => {
                out.insert(var.clone());
            }
            _ => {}
        });
        out
    }

    /// Pre-order traversal of all sub-programs.
    pub fn visit(&self, f: &mut impl FnMut(&RProg)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    /// Visits every expression embedded in the program.
    pub fn visit_exprs(&self, f: &mut impl FnMut(&Expr)) {
        self.visit(&mut |p| match p {
            RProg::AssignS { subst } => subst.0.values().for_each(&mut *f),
            RProg::DoOut { value, .. } => f(value),
            RProg::Guard { cond, .. } | RProg::CondR { cond, .. } | RProg::Assume { cond } => f(cond),
            RProg::Alternation { branches } | RProg::DoIter { branches } => branches.iter().for_each(|b| f(&b.guard)),
            _ => {}
        });
    }

    /// Rebuilds the program with every embedded expression and variable
    /// reference renamed by `ren`.
    pub fn rename(&self, ren: &impl Fn(&QualName) -> QualName) -> RProg {
        let re = |e: &Expr| e.rename_vars(ren);
        let branches = |bs: &[Branch]| {
            bs.iter()
                .map(|b| Branch::new(re(&b.guard), b.body.rename(ren)))
                .collect()
        };
        match self {
            RProg::AssignS { subst } => RProg::AssignS {
                subst: Subst(subst.0.iter().map(|(k, v)| (ren(k), re(v))).collect()),
            },
            RProg::DoOut { chan, value } => RProg::out(chan, re(value)),
            RProg::DoIn { chan, var } => RProg::input(chan, ren(var)),
            RProg::Guard { cond, body } => RProg::guard(re(cond), body.rename(ren)),
            RProg::SeqR { first, second } => RProg::seq(first.rename(ren), second.rename(ren)),
            RProg::CondR {
                then_branch,
                cond,
                else_branch,
            } => RProg::cond(then_branch.rename(ren), re(cond), else_branch.rename(ren)),
            RProg::ExtChoice { alts } => RProg::ext(alts.iter().map(|a| a.rename(ren)).collect()),
            RProg::NdChoice { alts } => RProg::nd(alts.iter().map(|a| a.rename(ren)).collect()),
            RProg::Assume { cond } => RProg::Assume { cond: re(cond) },
            RProg::Alternation { branches: bs } => RProg::Alternation { branches: branches(bs) },
            RProg::DoIter { branches: bs } => RProg::DoIter { branches: branches(bs) },
            leaf => leaf.clone(),
        }
    }
}

/// `b ⟶ P ≜ P ◁ b ▷ Miracle`.
pub fn gcmd(b: Expr, p: RProg) -> RProg {
    RProg::cond(p, b, RProg::Miracle)
}

/// `[b] ≜ b ⟶ Skip`.
pub fn assume(b: Expr) -> RProg {
    gcmd(b, RProg::SkipR)
}

/// Nondeterministic choice over the guarded branches, chaotic when no
/// guard holds.
pub fn alternation(branches: Vec<(Expr, RProg)>) -> RProg {
    if branches.is_empty() {
        return RProg::Chaos;
    }
    let none = mk_not(Expr::disj(branches.iter().map(|(b, _)| b.clone())));
    let mut alts: Vec<RProg> = branches.into_iter().map(|(b, p)| gcmd(b, p)).collect();
    alts.push(gcmd(none, RProg::Chaos));
    RProg::nd(alts)
}

/// Guarded iteration. Every branch body must be productive.
pub fn do_iter(branches: Vec<(Expr, RProg)>) -> Result<RProg, IrError> {
    for (g, p) in &branches {
        if !productive(p) {
            return Err(IrError::NotProductive {
                guard: g.to_string(),
                body: p.to_string(),
            });
        }
    }
    Ok(RProg::DoIter {
        branches: branches.into_iter().map(|(g, p)| Branch::new(g, p)).collect(),
    })
}

/// Syntactic productivity: every terminating path performs an event.
pub fn productive(p: &RProg) -> bool {
    match p {
        RProg::DoSimple { .. } | RProg::DoOut { .. } | RProg::DoIn { .. } => true,
        RProg::StopR | RProg::Miracle => true,
        RProg::SkipR | RProg::AssignS { .. } | RProg::Assume { .. } | RProg::Chaos => false,
        RProg::Alternation { .. } | RProg::DoIter { .. } => false,
        RProg::Guard { body, .. } => productive(body),
        RProg::SeqR { first, second } => productive(first) || productive(second),
        RProg::CondR {
            then_branch,
            else_branch,
            ..
        } => productive(then_branch) && productive(else_branch),
        RProg::ExtChoice { alts } | RProg::NdChoice { alts } => alts.iter().all(productive),
    }
}

/// `r:P`: qualifies every state variable of `P` with the machine namespace.
pub fn frame_extend(p: &RProg) -> Result<RProg, IrError> {
    if p.variables().iter().any(|v| v.is_actv()) {
        return Err(IrError::ActvInFrame(p.to_string()));
    }
    Ok(p.rename(&|q: &QualName| QualName::framed(q.name.clone())))
}

fn payload(e: &Expr) -> String {
    match e {
        Expr::Int { .. } | Expr::Bool { .. } | Expr::EnumLit { .. } | Expr::EmptySeq | Expr::Const { .. } => {
            e.to_string()
        }
        _ => format!("({e})"),
    }
}

fn seq_items<'a>(p: &'a RProg, out: &mut Vec<&'a RProg>) {
    match p {
        RProg::SeqR { first, second } => {
            seq_items(first, out);
            seq_items(second, out);
        }
        other => out.push(other),
    }
}

fn render(p: &RProg) -> String {
    match p {
        RProg::Miracle => "Miracle".into(),
        RProg::Chaos => "Chaos".into(),
        RProg::SkipR => "Skip".into(),
        RProg::StopR => "Stop".into(),
        RProg::AssignS { subst } if subst.0.len() == 1 => {
            let (k, v) = subst.0.iter().next().unwrap();
            format!("{k} := {v}")
        }
        RProg::AssignS { subst } => subst.to_string(),
        RProg::DoSimple { chan } => chan.clone(),
        RProg::DoOut { chan, value } => format!("{chan}!{}", payload(value)),
        RProg::DoIn { chan, var } if var.framed => format!("{chan}?({var})"),
        RProg::DoIn { chan, var } => format!("{chan}?{var}"),
        RProg::Guard { cond, body } => format!("{cond} ▷ {}", render(body)),
        RProg::SeqR { .. } => {
            let mut items = Vec::new();
            seq_items(p, &mut items);
            items.iter().map(|i| render_operand(i)).collect::<Vec<_>>().join(" ; ")
        }
        RProg::CondR {
            then_branch,
            cond,
            else_branch,
        } => {
            format!(
                "({} ◁ {cond} ▷ {})",
                render_operand(then_branch),
                render_operand(else_branch)
            )
        }
        RProg::ExtChoice { alts } => match alts.len() {
            0 => "(□)".into(),
            1 => render(&alts[0]),
            _ => format!("({})", alts.iter().map(render).collect::<Vec<_>>().join(" □ ")),
        },
        RProg::NdChoice { alts } => match alts.len() {
            0 => "(⊓)".into(),
            _ => format!("({})", alts.iter().map(render).collect::<Vec<_>>().join(" ⊓ ")),
        },
        RProg::Assume { cond } => format!("[{cond}]"),
        RProg::Alternation { branches } => format!("if {} fi", render_branches(branches)),
        RProg::DoIter { branches } => format!("do {} od", render_branches(branches)),
    }
}

/// Sequence operands that would otherwise read ambiguously are bracketed.
fn render_operand(p: &RProg) -> String {
    match p {
        RProg::SeqR { .. } | RProg::Guard { .. } => format!("({})", render(p)),
        _ => render(p),
    }
}

fn render_branches(branches: &[Branch]) -> String {
    branches
        .iter()
        .map(|b| format!("{} → {}", b.guard, render(&b.body)))
        .collect::<Vec<_>>()
        .join(" | ")
}

impl fmt::Display for RProg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", render(self))
    }
}

/// Multi-line do-notation for a compiled machine program
/// (`actv := init ; do … od`); other programs render on one line.
pub fn pretty_program(p: &RProg) -> String {
    let mut items = Vec::new();
    seq_items(p, &mut items);
    let mut out = String::new();
    for (i, item) in items.iter().enumerate() {
        if let RProg::DoIter { branches } = item {
            out.push_str("do\n");
            for (j, b) in branches.iter().enumerate() {
                let lead = if j == 0 { "    " } else { "  | " };
                out.push_str(&format!("{lead}{} → {}\n", b.guard, render_node_body(&b.body)));
            }
            out.push_str("od");
        } else {
            out.push_str(&render_operand(item));
        }
        if i + 1 < items.len() {
            out.push_str(" ;\n");
        }
    }
    out.push('\n');
    out
}

/// Node bodies print their sequence without bracketing a leading guard, as
/// in `b ▷ ε ; resume ; actv := NoGas`.
fn render_node_body(p: &RProg) -> String {
    let mut items = Vec::new();
    seq_items(p, &mut items);
    items
        .iter()
        .map(|i| match i {
            RProg::ExtChoice { alts } if alts.len() > 1 => {
                format!(
                    "({})",
                    alts.iter().map(render_node_body).collect::<Vec<_>>().join(" □ ")
                )
            }
            RProg::Guard { cond, body } => format!("{cond} ▷ {}", render_node_body(body)),
            other => render_operand(other),
        })
        .collect::<Vec<_>>()
        .join(" ; ")
}

pub fn is_actv_free(p: &RProg) -> bool {
    !p.variables().iter().any(|v| v.name == ACTV)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::BinOp;

    fn x() -> QualName {
        QualName::plain("x")
    }

    #[test]
    fn gcmd_and_assume() {
        let p = RProg::simple("a");
        assert_eq!(
            gcmd(Expr::bool(true), p.clone()),
            RProg::cond(p, Expr::bool(true), RProg::Miracle)
        );
        let b = Expr::eq(Expr::var("x"), Expr::int(1));
        assert_eq!(gcmd(b.clone(), RProg::SkipR), assume(b));
    }

    #[test]
    fn alternation_shapes() {
        assert_eq!(alternation(vec![]), RProg::Chaos);
        let b = Expr::var("b");
        let p = RProg::simple("a");
        let RProg::NdChoice { alts } = alternation(vec![(b.clone(), p.clone())]) else {
            panic!()
        };
        assert_eq!(alts, vec![gcmd(b.clone(), p), gcmd(Expr::not(b), RProg::Chaos)]);
    }

    #[test]
    fn productivity() {
        assert_eq!(do_iter(vec![]).unwrap(), RProg::DoIter { branches: vec![] });
        let bad = RProg::assign(x(), Expr::int(1));
        assert!(matches!(
            do_iter(vec![(Expr::bool(true), bad.clone())]),
            Err(IrError::NotProductive { .. })
        ));
        let good = RProg::seq(bad, RProg::simple("a"));
        assert!(do_iter(vec![(Expr::bool(true), good)]).is_ok());
        let half = RProg::cond(RProg::simple("a"), Expr::var("b"), RProg::SkipR);
        assert!(!productive(&half));
    }

    #[test]
    fn frame_extension() {
        let p = RProg::seq(
            RProg::assign(QualName::plain("gs"), Expr::EmptySeq),
            RProg::assign(QualName::plain("anl"), Expr::int(0)),
        );
        let f = frame_extend(&p).unwrap();
        assert_eq!(f.to_string(), "r:gs := ⟨⟩ ; r:anl := 0");
        assert_eq!(frame_extend(&RProg::SkipR).unwrap(), RProg::SkipR);
        let inp = frame_extend(&RProg::input("gas", QualName::plain("gs"))).unwrap();
        assert_eq!(inp, RProg::input("gas", QualName::framed("gs")));
        assert_eq!(inp.to_string(), "gas?(r:gs)");
        assert!(frame_extend(&RProg::assign(QualName::actv(), Expr::int(0))).is_err());
    }

    #[test]
    fn rendering() {
        let p = RProg::seq(
            RProg::out("e", Expr::int(8)),
            RProg::assigns(Subst::from_pairs([
                (x(), Expr::int(2)),
                (QualName::plain("y"), Expr::int(6)),
            ])),
        );
        assert_eq!(p.to_string(), "e!8 ; ⟨x ↦ 2, y ↦ 6⟩");
        let g = RProg::guard(Expr::bin(BinOp::Lt, Expr::var("x"), Expr::int(5)), RProg::simple("a"));
        assert_eq!(g.to_string(), "x < 5 ▷ a");
    }

    #[test]
    fn json_round_trip() {
        let p = alternation(vec![(Expr::var("b"), RProg::input("c", x()))]);
        let js = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<RProg>(&js).unwrap(), p);
    }
}
