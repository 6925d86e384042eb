//! Law-driven simplification of reactive programs and per-node symbolic
//! evaluation.
//!
//! `simplify` rewrites outermost-leftmost to a fixed point with a step
//! budget. Pushing an assignment into its successor (`⟨σ⟩ ; P = σ†P`)
//! delegates to `apply_subst`, which follows the substitution laws one
//! constructor at a time and records which law fired.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{constant_fold, subst_compose, Expr, QualName, Subst, Type, TypeEnv};
use crate::ir::{gcmd, Branch, RProg};

pub const DEFAULT_BUDGET: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[allow(non_camel_case_types)]
pub enum RuleId {
    MIRACLE_LEFT_ANNIHIL,
    ASSIGN_PUSH,
    EXTCHOICE_LEFT_DIST,
    SUBST_SEQ,
    SUBST_GUARD,
    SUBST_OUT,
    SUBST_ASSUME,
    SUBST_ASSIGN_COMPOSE,
    SUBST_EXTCHOICE,
    ALT_EMPTY,
    ALT_SINGLE,
    ALT_ASSUME,
    FRAME_SEQ,
    FRAME_INPUT,
    FRAME_ASSIGN,
    GUARD_TRUE,
    GUARD_FALSE,
    SKIP_UNIT,
    SEQ_ASSOC,
    ASSIGN_IDENTITY,
    STOP_LEFT_ZERO,
    CHAOS_LEFT_ZERO,
    EXTCHOICE_EMPTY,
    EXTCHOICE_UNIT,
    COND_SEQ_DIST,
    GUARD_SEQ,
    COND_TRUE,
    COND_FALSE,
    ASSUME_TRUE,
    ASSUME_FALSE,
    EXPR_FOLD,
    SUBST_SIMPLE,
    SUBST_INPUT,
    SUBST_COND,
    SUBST_NDCHOICE,
    SUBST_SKIP,
    SUBST_ZERO,
    SUBST_MATERIALIZE,
}

impl RuleId {
    pub const ALL: &'static [RuleId] = &[
        RuleId::MIRACLE_LEFT_ANNIHIL,
        RuleId::ASSIGN_PUSH,
        RuleId::EXTCHOICE_LEFT_DIST,
        RuleId::SUBST_SEQ,
        RuleId::SUBST_GUARD,
        RuleId::SUBST_OUT,
        RuleId::SUBST_ASSUME,
        RuleId::SUBST_ASSIGN_COMPOSE,
        RuleId::SUBST_EXTCHOICE,
        RuleId::ALT_EMPTY,
        RuleId::ALT_SINGLE,
        RuleId::ALT_ASSUME,
        RuleId::FRAME_SEQ,
        RuleId::FRAME_INPUT,
        RuleId::FRAME_ASSIGN,
        RuleId::GUARD_TRUE,
        RuleId::GUARD_FALSE,
        RuleId::SKIP_UNIT,
        RuleId::SEQ_ASSOC,
        RuleId::ASSIGN_IDENTITY,
        RuleId::STOP_LEFT_ZERO,
        RuleId::CHAOS_LEFT_ZERO,
        RuleId::EXTCHOICE_EMPTY,
        RuleId::EXTCHOICE_UNIT,
        RuleId::COND_SEQ_DIST,
        RuleId::GUARD_SEQ,
        RuleId::COND_TRUE,
        RuleId::COND_FALSE,
        RuleId::ASSUME_TRUE,
        RuleId::ASSUME_FALSE,
        RuleId::EXPR_FOLD,
        RuleId::SUBST_SIMPLE,
        RuleId::SUBST_INPUT,
        RuleId::SUBST_COND,
        RuleId::SUBST_NDCHOICE,
        RuleId::SUBST_SKIP,
        RuleId::SUBST_ZERO,
        RuleId::SUBST_MATERIALIZE,
    ];

    /// The equation the rule orients left to right.
    pub fn law(self) -> &'static str {
        use RuleId::*;
        match self {
            MIRACLE_LEFT_ANNIHIL => "Miracle ; P = Miracle",
            ASSIGN_PUSH => "⟨σ⟩ ; P = σ†P",
            EXTCHOICE_LEFT_DIST => "(P □ Q) ; R = (P ; R) □ (Q ; R), P and Q event-initial",
            SUBST_SEQ => "σ†(P ; Q) = σ†P ; Q",
            SUBST_GUARD => "σ†(b ▷ P) = σ†b ▷ σ†P",
            SUBST_OUT => "σ†(e!v) = e!(σ†v) ; ⟨σ⟩",
            SUBST_ASSUME => "σ†[b] = [σ†b] ; ⟨σ⟩",
            SUBST_ASSIGN_COMPOSE => "σ†⟨ρ⟩ = ⟨ρ ∘ σ⟩",
            SUBST_EXTCHOICE => "σ†(P □ Q) = σ†P □ σ†Q",
            ALT_EMPTY => "if fi = Chaos",
            ALT_SINGLE => "if b → P fi = P ◁ b ▷ Chaos",
            ALT_ASSUME => "[⋁b] ; if b → P fi = ⊓ (b → P)",
            FRAME_SEQ => "a:(P ; Q) = a:P ; a:Q",
            FRAME_INPUT => "a:(e?x) = e?(a:x)",
            FRAME_ASSIGN => "a:(x := v) = a:x := a:v",
            GUARD_TRUE => "true ▷ P = P",
            GUARD_FALSE => "false ▷ P = Stop",
            SKIP_UNIT => "Skip ; P = P = P ; Skip",
            SEQ_ASSOC => "(P ; Q) ; R = P ; (Q ; R)",
            ASSIGN_IDENTITY => "⟨id⟩ = Skip",
            STOP_LEFT_ZERO => "Stop ; P = Stop",
            CHAOS_LEFT_ZERO => "Chaos ; P = Chaos",
            EXTCHOICE_EMPTY => "□ ∅ = Stop",
            EXTCHOICE_UNIT => "□ {P} = P",
            COND_SEQ_DIST => "(P ◁ b ▷ Q) ; R = (P ; R) ◁ b ▷ (Q ; R)",
            GUARD_SEQ => "(b ▷ P) ; Q = b ▷ (P ; Q)",
            COND_TRUE => "P ◁ true ▷ Q = P",
            COND_FALSE => "P ◁ false ▷ Q = Q",
            ASSUME_TRUE => "[true] = Skip",
            ASSUME_FALSE => "[false] = Miracle",
            EXPR_FOLD => "ground subterms are evaluated",
            SUBST_SIMPLE => "σ†e = e ; ⟨σ⟩",
            SUBST_INPUT => "σ†(e?x) = e?x ; ⟨σ∖x⟩, x not read by σ∖x",
            SUBST_COND => "σ†(P ◁ b ▷ Q) = σ†P ◁ σ†b ▷ σ†Q",
            SUBST_NDCHOICE => "σ†(P ⊓ Q) = σ†P ⊓ σ†Q",
            SUBST_SKIP => "σ†Skip = ⟨σ⟩",
            SUBST_ZERO => "σ†Z = Z for Z ∈ {Miracle, Chaos, Stop}",
            SUBST_MATERIALIZE => "σ†P = ⟨σ⟩ ; P",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Position of a subterm: child indices from the root.
pub type Path = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub rule: RuleId,
    pub path: Path,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("rewrite budget of {0} steps exhausted")]
    BudgetExhausted(usize),
    #[error("node body is not in the generated shape: {0}")]
    Unnormalizable(String),
}

/// `σ†P` per the substitution laws.
pub fn apply_subst(sigma: &Subst, p: &RProg) -> RProg {
    apply_subst_traced(sigma, p, &mut Vec::new())
}

pub fn apply_subst_traced(sigma: &Subst, p: &RProg, used: &mut Vec<RuleId>) -> RProg {
    let fold = |e: &Expr| constant_fold(&sigma.apply(e));
    let after = |q: RProg| {
        if sigma.is_identity() {
            q
        } else {
            RProg::seq(q, RProg::assigns(sigma.clone()))
        }
    };
    match p {
        RProg::SkipR => {
            used.push(RuleId::SUBST_SKIP);
            if sigma.is_identity() {
                RProg::SkipR
            } else {
                RProg::assigns(sigma.clone())
            }
        }
        RProg::Miracle | RProg::Chaos | RProg::StopR => {
            used.push(RuleId::SUBST_ZERO);
            p.clone()
        }
        RProg::AssignS { subst } => {
            used.push(RuleId::SUBST_ASSIGN_COMPOSE);
            RProg::assigns(subst_compose(subst, sigma))
        }
        RProg::Assume { cond } => {
            used.push(RuleId::SUBST_ASSUME);
            after(RProg::Assume { cond: fold(cond) })
        }
        RProg::DoSimple { .. } => {
            used.push(RuleId::SUBST_SIMPLE);
            after(p.clone())
        }
        RProg::DoOut { chan, value } => {
            used.push(RuleId::SUBST_OUT);
            after(RProg::out(chan, fold(value)))
        }
        RProg::DoIn { var, .. } => {
            let rest = Subst(
                sigma
                    .0
                    .iter()
                    .filter(|(k, _)| *k != var)
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
            );
            if rest.range_vars().contains(var) {
                used.push(RuleId::SUBST_MATERIALIZE);
                RProg::seq(RProg::assigns(sigma.clone()), p.clone())
            } else {
                used.push(RuleId::SUBST_INPUT);
                if rest.is_identity() {
                    p.clone()
                } else {
                    RProg::seq(p.clone(), RProg::assigns(rest))
                }
            }
        }
        RProg::Guard { cond, body } => {
            used.push(RuleId::SUBST_GUARD);
            RProg::guard(fold(cond), apply_subst_traced(sigma, body, used))
        }
        RProg::SeqR { first, second } => {
            used.push(RuleId::SUBST_SEQ);
            RProg::seq(apply_subst_traced(sigma, first, used), (**second).clone())
        }
        RProg::CondR {
            then_branch,
            cond,
            else_branch,
        } => {
            used.push(RuleId::SUBST_COND);
            RProg::cond(
                apply_subst_traced(sigma, then_branch, used),
                fold(cond),
                apply_subst_traced(sigma, else_branch, used),
            )
        }
        RProg::ExtChoice { alts } => {
            used.push(RuleId::SUBST_EXTCHOICE);
            RProg::ext(alts.iter().map(|a| apply_subst_traced(sigma, a, used)).collect())
        }
        RProg::NdChoice { alts } => {
            used.push(RuleId::SUBST_NDCHOICE);
            RProg::nd(alts.iter().map(|a| apply_subst_traced(sigma, a, used)).collect())
        }
        RProg::Alternation { .. } | RProg::DoIter { .. } => {
            used.push(RuleId::SUBST_MATERIALIZE);
            RProg::seq(RProg::assigns(sigma.clone()), p.clone())
        }
    }
}

/// Whether pushing `σ` into `p` makes progress rather than materializing
/// `⟨σ⟩` in front of `p` again.
fn pushable(sigma: &Subst, p: &RProg) -> bool {
    match p {
        RProg::DoIn { var, .. } => !sigma.0.iter().any(|(k, v)| k != var && v.free_vars().contains(var)),
        RProg::Alternation { .. } | RProg::DoIter { .. } => false,
        RProg::SeqR { first, .. } => pushable(sigma, first),
        _ => true,
    }
}

/// Programs whose first observable action is an event: external choice
/// over them is resolved before any of them can terminate.
fn event_initial(p: &RProg) -> bool {
    match p {
        RProg::DoSimple { .. } | RProg::DoOut { .. } | RProg::DoIn { .. } | RProg::StopR => true,
        RProg::Guard { body, .. } => event_initial(body),
        RProg::SeqR { first, .. } => event_initial(first),
        RProg::CondR {
            then_branch,
            else_branch,
            ..
        } => event_initial(then_branch) && event_initial(else_branch),
        RProg::ExtChoice { alts } => alts.iter().all(event_initial),
        _ => false,
    }
}

fn fold_prog_exprs(p: &RProg) -> Option<RProg> {
    let f = |e: &Expr| {
        let g = constant_fold(e);
        (g != *e).then_some(g)
    };
    match p {
        RProg::AssignS { subst } => {
            let folded = Subst(subst.0.iter().map(|(k, v)| (k.clone(), constant_fold(v))).collect());
            (folded != *subst).then(|| RProg::assigns(folded))
        }
        RProg::DoOut { chan, value } => f(value).map(|v| RProg::out(chan, v)),
        RProg::Guard { cond, body } => f(cond).map(|c| RProg::guard(c, (**body).clone())),
        RProg::CondR {
            then_branch,
            cond,
            else_branch,
        } => f(cond).map(|c| RProg::cond((**then_branch).clone(), c, (**else_branch).clone())),
        RProg::Assume { cond } => f(cond).map(|c| RProg::Assume { cond: c }),
        RProg::Alternation { branches } | RProg::DoIter { branches } => {
            let nb: Vec<Branch> = branches
                .iter()
                .map(|b| Branch::new(constant_fold(&b.guard), b.body.clone()))
                .collect();
            if nb == *branches {
                None
            } else if matches!(p, RProg::Alternation { .. }) {
                Some(RProg::Alternation { branches: nb })
            } else {
                Some(RProg::DoIter { branches: nb })
            }
        }
        _ => None,
    }
}

/// Tries every rule at the root of `p`. Returns the rule, the rewritten
/// term and any substitution laws used along the way.
fn rewrite_root(p: &RProg) -> Option<(RuleId, RProg, Vec<RuleId>)> {
    use RProg::*;
    if let Some(q) = fold_prog_exprs(p) {
        return Some((RuleId::EXPR_FOLD, q, vec![]));
    }
    let one = |r: RuleId, q: RProg| Some((r, q, vec![]));
    match p {
        AssignS { subst } if subst.is_identity() => one(RuleId::ASSIGN_IDENTITY, SkipR),
        Guard { cond, body } if cond.is_true() => one(RuleId::GUARD_TRUE, (**body).clone()),
        Guard { cond, .. } if cond.is_false() => one(RuleId::GUARD_FALSE, StopR),
        CondR { then_branch, cond, .. } if cond.is_true() => one(RuleId::COND_TRUE, (**then_branch).clone()),
        CondR { cond, else_branch, .. } if cond.is_false() => one(RuleId::COND_FALSE, (**else_branch).clone()),
        Assume { cond } if cond.is_true() => one(RuleId::ASSUME_TRUE, SkipR),
        Assume { cond } if cond.is_false() => one(RuleId::ASSUME_FALSE, Miracle),
        ExtChoice { alts } if alts.is_empty() => one(RuleId::EXTCHOICE_EMPTY, StopR),
        ExtChoice { alts } if alts.len() == 1 => one(RuleId::EXTCHOICE_UNIT, alts[0].clone()),
        Alternation { branches } if branches.is_empty() => one(RuleId::ALT_EMPTY, Chaos),
        Alternation { branches } if branches.len() == 1 => one(
            RuleId::ALT_SINGLE,
            RProg::cond(branches[0].body.clone(), branches[0].guard.clone(), Chaos),
        ),
        SeqR { first, second } => rewrite_seq(first, second),
        _ => None,
    }
}

fn rewrite_seq(first: &RProg, second: &RProg) -> Option<(RuleId, RProg, Vec<RuleId>)> {
    use RProg::*;
    let one = |r: RuleId, q: RProg| Some((r, q, vec![]));
    match (first, second) {
        (Miracle, _) => one(RuleId::MIRACLE_LEFT_ANNIHIL, Miracle),
        (StopR, _) => one(RuleId::STOP_LEFT_ZERO, StopR),
        (Chaos, _) => one(RuleId::CHAOS_LEFT_ZERO, Chaos),
        (SkipR, q) => one(RuleId::SKIP_UNIT, q.clone()),
        (p, SkipR) => one(RuleId::SKIP_UNIT, p.clone()),
        (SeqR { first: a, second: b }, c) => one(
            RuleId::SEQ_ASSOC,
            RProg::seq((**a).clone(), RProg::seq((**b).clone(), c.clone())),
        ),
        (Assume { cond }, Alternation { branches }) if *cond == alt_disjunction(branches) => {
            one(RuleId::ALT_ASSUME, alt_as_choice(branches))
        }
        (
            Assume { cond },
            SeqR {
                first: alt,
                second: rest,
            },
        ) => match &**alt {
            Alternation { branches } if *cond == alt_disjunction(branches) => one(
                RuleId::ALT_ASSUME,
                RProg::seq(alt_as_choice(branches), (**rest).clone()),
            ),
            _ => None,
        },
        (AssignS { subst }, q) if pushable(subst, q) => {
            let mut used = Vec::new();
            let r = apply_subst_traced(subst, q, &mut used);
            Some((RuleId::ASSIGN_PUSH, r, used))
        }
        (Guard { cond, body }, q) => one(
            RuleId::GUARD_SEQ,
            RProg::guard(cond.clone(), RProg::seq((**body).clone(), q.clone())),
        ),
        (
            CondR {
                then_branch,
                cond,
                else_branch,
            },
            q,
        ) => one(
            RuleId::COND_SEQ_DIST,
            RProg::cond(
                RProg::seq((**then_branch).clone(), q.clone()),
                cond.clone(),
                RProg::seq((**else_branch).clone(), q.clone()),
            ),
        ),
        (ExtChoice { alts }, q) if !alts.is_empty() && alts.iter().all(event_initial) => one(
            RuleId::EXTCHOICE_LEFT_DIST,
            RProg::ext(alts.iter().map(|a| RProg::seq(a.clone(), q.clone())).collect()),
        ),
        _ => None,
    }
}

fn alt_disjunction(branches: &[Branch]) -> Expr {
    Expr::disj(branches.iter().map(|b| b.guard.clone()))
}

fn alt_as_choice(branches: &[Branch]) -> RProg {
    RProg::nd(branches.iter().map(|b| gcmd(b.guard.clone(), b.body.clone())).collect())
}

fn child_mut(p: &mut RProg, i: usize) -> &mut RProg {
    match p {
        RProg::Guard { body, .. } => body,
        RProg::SeqR { first, second } => {
            if i == 0 {
                first
            } else {
                second
            }
        }
        RProg::CondR {
            then_branch,
            else_branch,
            ..
        } => {
            if i == 0 {
                then_branch
            } else {
                else_branch
            }
        }
        RProg::ExtChoice { alts } | RProg::NdChoice { alts } => &mut alts[i],
        RProg::Alternation { branches } | RProg::DoIter { branches } => &mut branches[i].body,
        _ => unreachable!("leaf has no children"),
    }
}

/// Finds the outermost-leftmost redex. Iteration bodies are left alone.
fn find_redex(p: &RProg, path: &mut Path) -> Option<(RuleId, RProg, Vec<RuleId>)> {
    if let Some(r) = rewrite_root(p) {
        return Some(r);
    }
    if matches!(p, RProg::DoIter { .. }) {
        return None;
    }
    for (i, c) in p.children().into_iter().enumerate() {
        path.push(i);
        if let Some(r) = find_redex(c, path) {
            return Some(r);
        }
        path.pop();
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Simplified {
    pub result: RProg,
    pub trace: Vec<TraceStep>,
}

pub fn simplify(p: &RProg) -> Result<RProg, RewriteError> {
    Ok(simplify_traced(p, DEFAULT_BUDGET)?.result)
}

pub fn simplify_traced(p: &RProg, budget: usize) -> Result<Simplified, RewriteError> {
    let mut cur = p.clone();
    let mut trace = Vec::new();
    let mut steps = 0;
    loop {
        let mut path = Vec::new();
        let Some((rule, replacement, used)) = find_redex(&cur, &mut path) else {
            return Ok(Simplified { result: cur, trace });
        };
        steps += 1;
        if steps > budget {
            return Err(RewriteError::BudgetExhausted(budget));
        }
        let mut slot = &mut cur;
        for &i in &path {
            slot = child_mut(slot, i);
        }
        *slot = replacement;
        trace.push(TraceStep {
            rule,
            path: path.clone(),
        });
        trace.extend(used.into_iter().map(|rule| TraceStep {
            rule,
            path: path.clone(),
        }));
    }
}

/// One transition alternative of a node after the entry has been pushed in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alternative {
    /// Transition condition with the entry update applied.
    pub guard: Expr,
    /// The trigger event, with output payloads evaluated in the entry state.
    pub trigger: RProg,
    /// State update pending when the trigger occurs.
    pub pre: Subst,
    /// Everything after the trigger, simplified.
    pub cont: RProg,
}

/// One path through a node's entry action.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryPath {
    pub cond: Expr,
    pub subst: Subst,
    /// Fresh names standing for values received by inputs in the entry.
    pub binders: Vec<(QualName, Type)>,
    pub alternatives: Vec<Alternative>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeNormalForm {
    pub paths: Vec<EntryPath>,
}

struct Reader<'a> {
    env: &'a TypeEnv,
    fresh: usize,
}

#[derive(Clone)]
struct PartialPath {
    cond: Expr,
    subst: Subst,
    binders: Vec<(QualName, Type)>,
}

impl Reader<'_> {
    /// Symbolically executes an entry action from every partial path.
    fn run(&mut self, p: &RProg, paths: Vec<PartialPath>) -> Result<Vec<PartialPath>, RewriteError> {
        match p {
            RProg::SkipR | RProg::DoSimple { .. } | RProg::DoOut { .. } => Ok(paths),
            RProg::AssignS { subst } => Ok(paths
                .into_iter()
                .map(|mut pp| {
                    pp.subst = subst_compose(subst, &pp.subst);
                    pp
                })
                .collect()),
            RProg::DoIn { chan, var } => {
                let ty = self
                    .env
                    .events
                    .get(chan)
                    .cloned()
                    .flatten()
                    .ok_or_else(|| RewriteError::Unnormalizable(format!("input on untyped channel `{chan}`")))?;
                Ok(paths
                    .into_iter()
                    .map(|mut pp| {
                        self.fresh += 1;
                        let b = QualName::plain(format!("{}#{}", var.name, self.fresh));
                        pp.subst = subst_compose(&Subst::single(var.clone(), Expr::qvar(b.clone())), &pp.subst);
                        pp.binders.push((b, ty.clone()));
                        pp
                    })
                    .collect())
            }
            RProg::SeqR { first, second } => {
                let mid = self.run(first, paths)?;
                self.run(second, mid)
            }
            RProg::CondR {
                then_branch,
                cond,
                else_branch,
            } => {
                let mut out = Vec::new();
                for pp in paths {
                    let c = constant_fold(&pp.subst.apply(cond));
                    let mut yes = pp.clone();
                    yes.cond = constant_fold(&Expr::and(pp.cond.clone(), c.clone()));
                    let mut no = pp;
                    no.cond = constant_fold(&Expr::and(no.cond.clone(), crate::ast::mk_not(c)));
                    for (branch, start) in [(then_branch, yes), (else_branch, no)] {
                        if !start.cond.is_false() {
                            out.extend(self.run(branch, vec![start])?);
                        }
                    }
                }
                Ok(out)
            }
            other => Err(RewriteError::Unnormalizable(format!(
                "unsupported entry construct: {other}"
            ))),
        }
    }
}

/// Splits one alternative into (guard, trigger, continuation).
fn split_alt(p: &RProg) -> Result<(Expr, RProg, RProg), RewriteError> {
    match p {
        RProg::Guard { cond, body } => {
            let (g, t, k) = split_alt(body)?;
            Ok((constant_fold(&Expr::and(cond.clone(), g)), t, k))
        }
        RProg::SeqR { first, second } => {
            let (g, t, k) = split_alt(first)?;
            let k = if k.is_skip() {
                (**second).clone()
            } else {
                RProg::seq(k, (**second).clone())
            };
            Ok((g, t, k))
        }
        RProg::DoSimple { .. } | RProg::DoOut { .. } | RProg::DoIn { .. } => {
            Ok((Expr::bool(true), p.clone(), RProg::SkipR))
        }
        other => Err(RewriteError::Unnormalizable(format!(
            "alternative without a leading trigger: {other}"
        ))),
    }
}

/// Pushes the entry action of a generated node body through its external
/// choice of transitions. Conditional entries give one path per branch.
pub fn normalize_node(env: &TypeEnv, body: &RProg) -> Result<NodeNormalForm, RewriteError> {
    let (entry, alts) = match body {
        RProg::ExtChoice { alts } => (RProg::SkipR, alts),
        RProg::SeqR { first, second } => match &**second {
            RProg::ExtChoice { alts } => ((**first).clone(), alts),
            _ => return Err(RewriteError::Unnormalizable(body.to_string())),
        },
        _ => return Err(RewriteError::Unnormalizable(body.to_string())),
    };
    let mut reader = Reader { env, fresh: 0 };
    let start = PartialPath {
        cond: Expr::bool(true),
        subst: Subst::identity(),
        binders: vec![],
    };
    let paths = reader.run(&entry, vec![start])?;
    let split: Vec<_> = alts.iter().map(split_alt).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for pp in paths {
        let mut alternatives = Vec::new();
        for (g, t, k) in &split {
            let sigma = &pp.subst;
            let guard = constant_fold(&sigma.apply(g));
            let (trigger, cont) = match t {
                RProg::DoOut { chan, value } => (
                    RProg::out(chan, constant_fold(&sigma.apply(value))),
                    RProg::seq(RProg::assigns(sigma.clone()), k.clone()),
                ),
                RProg::DoIn { var, .. } => {
                    let rest = Subst(
                        sigma
                            .0
                            .iter()
                            .filter(|(x, _)| *x != var)
                            .map(|(a, b)| (a.clone(), b.clone()))
                            .collect(),
                    );
                    if rest.range_vars().contains(var) {
                        (t.clone(), k.clone())
                    } else {
                        (t.clone(), RProg::seq(RProg::assigns(rest), k.clone()))
                    }
                }
                _ => (t.clone(), RProg::seq(RProg::assigns(sigma.clone()), k.clone())),
            };
            alternatives.push(Alternative {
                guard,
                trigger,
                pre: sigma.clone(),
                cont: simplify(&cont)?,
            });
        }
        out.push(EntryPath {
            cond: pp.cond,
            subst: pp.subst,
            binders: pp.binders,
            alternatives,
        });
    }
    Ok(NodeNormalForm { paths: out })
}
