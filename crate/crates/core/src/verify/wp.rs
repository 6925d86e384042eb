//! Weakest preconditions over the straight-line action language.
//!
//! Inputs are universally quantified; the quantifier is pulled into the
//! obligation's prefix under a fresh name, which is sound because wp only
//! places it in positive positions.

use crate::ast::{Expr, QualName, Subst, Type, TypeEnv};
use crate::model::{ActionSyn, EventSyn, NodeDecl, TransDecl};

/// Source of fresh input binders, shared by all obligations of a run.
#[derive(Default)]
pub struct Fresh {
    counter: usize,
    binders: Vec<(String, Type)>,
}

impl Fresh {
    fn bind(&mut self, var: &str, ty: Type) -> String {
        self.counter += 1;
        let name = format!("{var}#{}", self.counter);
        self.binders.push((name.clone(), ty));
        name
    }

    /// Binders introduced since the last call.
    pub fn take(&mut self) -> Vec<(String, Type)> {
        std::mem::take(&mut self.binders)
    }
}

fn subst(var: &str, value: Expr, q: &Expr) -> Expr {
    Subst::single(QualName::plain(var), value).apply(q)
}

pub fn wp_event(e: &EventSyn, q: Expr, env: &TypeEnv, fresh: &mut Fresh) -> Expr {
    match e {
        EventSyn::Simple { .. } | EventSyn::Output { .. } => q,
        EventSyn::Input { chan, var } => {
            let ty = env
                .events
                .get(chan)
                .cloned()
                .flatten()
                .expect("input channels carry a type");
            let b = fresh.bind(var, ty);
            subst(var, Expr::var(&b), &q)
        }
    }
}

pub fn wp(a: &ActionSyn, q: Expr, env: &TypeEnv, fresh: &mut Fresh) -> Expr {
    match a {
        ActionSyn::Skip => q,
        ActionSyn::Event { event } => wp_event(event, q, env, fresh),
        ActionSyn::Assign { var, value } => subst(var, value.clone(), &q),
        ActionSyn::Seq { first, second } => {
            let mid = wp(second, q, env, fresh);
            wp(first, mid, env, fresh)
        }
        ActionSyn::If {
            cond,
            then_branch,
            else_branch,
        } => Expr::and(
            Expr::implies(cond.clone(), wp(then_branch, q.clone(), env, fresh)),
            Expr::implies(Expr::not(cond.clone()), wp(else_branch, q, env, fresh)),
        ),
    }
}

/// `wp(entry ; [cond] ; trig ; exit ; act, q)`.
pub fn transition_wp(n: &NodeDecl, t: &TransDecl, q: &Expr, env: &TypeEnv, fresh: &mut Fresh) -> Expr {
    let mut f = wp(&t.act, q.clone(), env, fresh);
    f = wp(&n.nexit, f, env, fresh);
    if let Some(trig) = &t.trig {
        f = wp_event(trig, f, env, fresh);
    }
    f = Expr::implies(t.cond.clone(), f);
    wp(&n.nentry, f, env, fresh)
}

/// Conjunction of `transition_wp` over the node's outgoing transitions.
pub fn node_wp(n: &NodeDecl, ts: &[TransDecl], q: &Expr, env: &TypeEnv, fresh: &mut Fresh) -> Expr {
    Expr::conj(ts.iter().map(|t| transition_wp(n, t, q, env, fresh)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{constant_fold, BinOp};

    fn env() -> TypeEnv {
        let mut env = TypeEnv::default();
        env.vars.insert("x".into(), Type::Int);
        env.vars.insert("gs".into(), Type::seq(Type::Int));
        env.vars.insert("anl".into(), Type::Int);
        env.events.insert("e".into(), Some(Type::Int));
        env
    }

    #[test]
    fn assignment_substitutes() {
        let a = ActionSyn::Assign {
            var: "x".into(),
            value: Expr::bin(BinOp::Add, Expr::var("x"), Expr::int(1)),
        };
        let q = Expr::bin(BinOp::Le, Expr::var("x"), Expr::int(5));
        assert_eq!(wp(&a, q, &env(), &mut Fresh::default()).to_string(), "x + 1 ≤ 5");
    }

    #[test]
    fn input_havocs() {
        let a = ActionSyn::Event {
            event: EventSyn::Input {
                chan: "e".into(),
                var: "x".into(),
            },
        };
        let q = Expr::bin(BinOp::Le, Expr::int(0), Expr::var("x"));
        let mut fresh = Fresh::default();
        assert_eq!(wp(&a, q, &env(), &mut fresh).to_string(), "0 ≤ x#1");
        assert_eq!(fresh.take(), vec![("x#1".to_string(), Type::Int)]);
    }

    #[test]
    fn reset_then_fold() {
        let a = ActionSyn::seq(
            ActionSyn::Assign {
                var: "gs".into(),
                value: Expr::EmptySeq,
            },
            ActionSyn::Assign {
                var: "anl".into(),
                value: Expr::int(0),
            },
        );
        let q = Expr::eq(Expr::var("anl"), Expr::int(0));
        assert!(constant_fold(&wp(&a, q, &env(), &mut Fresh::default())).is_true());
    }
}
