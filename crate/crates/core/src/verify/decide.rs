//! Decision procedure: fold, abstract maximal non-logical atoms to typed
//! unknowns, enumerate.
//!
//! Integer unknowns range over every literal they are compared with, each
//! widened by the number of integer unknowns on both sides. For constraints
//! built from `=`, `≠`, `<`, `≤` between unknowns and literals this set
//! realizes every ordering, so enumeration over it is complete. Sequence and
//! abstract unknowns only meet `=`/`≠`; their literals plus one fresh value
//! per unknown suffice. Arithmetic on integer unknowns is out of reach and
//! yields `Unknown`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ast::{constant_fold, BinOp, Expr, Type, TypeEnv};
use crate::oracle::domain::literal_value;
use crate::value::Value;
use crate::verify::{smt, Obligation};

/// Upper bound on enumerated valuations before giving up.
const MAX_VALUATIONS: u128 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Procedure {
    Folding,
    BooleanAbstraction,
    EnumEnumeration,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// Source text of the abstracted atom.
    pub term: String,
    pub atom: Expr,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Verdict {
    Valid { procedure: Procedure },
    Invalid { counterexample: Vec<Assignment> },
    Unknown { reason: String, residual: String },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Valid { .. } => "valid",
            Verdict::Invalid { .. } => "invalid",
            Verdict::Unknown { .. } => "unknown",
        }
    }
}

#[derive(Clone, Debug)]
enum Term {
    Lit(Value),
    Atom(usize),
}

#[derive(Clone, Debug)]
enum Skel {
    Lit(bool),
    Atom(usize),
    Not(Box<Skel>),
    Logic(BinOp, Box<Skel>, Box<Skel>),
    Cmp(BinOp, Term, Term),
}

struct Atom {
    expr: Expr,
    ty: Type,
}

#[derive(Default)]
struct Abstraction {
    atoms: Vec<Atom>,
    int_lits: BTreeSet<i64>,
    /// Literal values compared with equality-only unknowns, per type.
    eq_lits: BTreeMap<Type, BTreeSet<Value>>,
    arithmetic: Option<String>,
}

impl Abstraction {
    fn atom(&mut self, e: &Expr, ty: Type) -> usize {
        if let Some(i) = self.atoms.iter().position(|a| a.expr == *e) {
            return i;
        }
        self.atoms.push(Atom { expr: e.clone(), ty });
        self.atoms.len() - 1
    }

    fn skel(&mut self, env: &TypeEnv, e: &Expr) -> Result<Skel, String> {
        Ok(match e {
            Expr::Bool { value } => Skel::Lit(*value),
            Expr::Not { arg } => Skel::Not(Box::new(self.skel(env, arg)?)),
            Expr::Bin { bop, lhs, rhs } if bop.is_logic() => {
                Skel::Logic(*bop, Box::new(self.skel(env, lhs)?), Box::new(self.skel(env, rhs)?))
            }
            Expr::Bin {
                bop: bop @ (BinOp::Eq | BinOp::Ne),
                lhs,
                rhs,
            } => {
                let ty = match (&**lhs, &**rhs) {
                    (Expr::EmptySeq, other) => env.type_check(other),
                    (other, _) => env.type_check(other),
                }
                .map_err(|e| e.to_string())?;
                if ty == Type::Bool {
                    let iff = Skel::Logic(
                        BinOp::Eq,
                        Box::new(self.skel(env, lhs)?),
                        Box::new(self.skel(env, rhs)?),
                    );
                    if *bop == BinOp::Eq {
                        iff
                    } else {
                        Skel::Not(Box::new(iff))
                    }
                } else {
                    Skel::Cmp(*bop, self.term(lhs, &ty), self.term(rhs, &ty))
                }
            }
            Expr::Bin {
                bop: bop @ (BinOp::Lt | BinOp::Le),
                lhs,
                rhs,
            } => Skel::Cmp(*bop, self.term(lhs, &Type::Int), self.term(rhs, &Type::Int)),
            other => Skel::Atom(self.atom(other, Type::Bool)),
        })
    }

    fn term(&mut self, e: &Expr, ty: &Type) -> Term {
        if let Some(v) = literal_value(e) {
            match v {
                Value::Int(i) => {
                    self.int_lits.insert(i);
                }
                ref other => {
                    if !matches!(ty, Type::Enum { .. }) {
                        self.eq_lits.entry(ty.clone()).or_default().insert(other.clone());
                    }
                }
            }
            return Term::Lit(v);
        }
        if let Expr::Bin { bop, .. } = e {
            if bop.is_arith() && self.arithmetic.is_none() {
                self.arithmetic = Some(format!("integer arithmetic in `{e}`"));
            }
        }
        Term::Atom(self.atom(e, ty.clone()))
    }

    fn domain(&self, a: &Atom) -> Vec<Value> {
        let count = |pred: &dyn Fn(&Type) -> bool| self.atoms.iter().filter(|b| pred(&b.ty)).count();
        match &a.ty {
            Type::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Type::Enum { ctors, .. } => ctors.iter().map(|c| Value::Sym(c.clone())).collect(),
            Type::Int => {
                let n = count(&|t| *t == Type::Int) as i64;
                let mut reps = BTreeSet::new();
                if self.int_lits.is_empty() {
                    reps.extend(0..=n);
                }
                for l in &self.int_lits {
                    reps.extend(l.saturating_sub(n)..=l.saturating_add(n));
                }
                reps.into_iter().map(Value::Int).collect()
            }
            ty => {
                let n = count(&|t| t == ty);
                let mut vals: Vec<Value> = self.eq_lits.get(ty).into_iter().flatten().cloned().collect();
                vals.extend((0..n).map(|i| Value::Sym(format!("{ty}'{i}"))));
                vals
            }
        }
    }

    /// True when a falsifying valuation of independent unknowns may not be
    /// realizable because two atoms share a variable, constant or function.
    fn atoms_interact(&self) -> bool {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for a in &self.atoms {
            let mut mine = BTreeSet::new();
            a.expr.walk(&mut |e| match e {
                Expr::Var { var } => {
                    mine.insert(format!("v:{}", var.name));
                }
                Expr::Const { name } => {
                    mine.insert(format!("c:{name}"));
                }
                Expr::App { fun, .. } => {
                    mine.insert(format!("f:{fun}"));
                }
                _ => {}
            });
            if mine.iter().any(|k| seen.contains(k)) {
                return true;
            }
            seen.extend(mine);
        }
        false
    }
}

fn eval(s: &Skel, vals: &[Value]) -> bool {
    match s {
        Skel::Lit(b) => *b,
        Skel::Atom(i) => vals[*i].as_bool().expect("boolean unknown"),
        Skel::Not(a) => !eval(a, vals),
        Skel::Logic(op, l, r) => {
            let (a, b) = (eval(l, vals), eval(r, vals));
            match op {
                BinOp::And => a && b,
                BinOp::Or => a || b,
                BinOp::Implies => !a || b,
                BinOp::Eq => a == b,
                _ => unreachable!("logical connective"),
            }
        }
        Skel::Cmp(op, l, r) => {
            let get = |t: &Term| match t {
                Term::Lit(v) => v.clone(),
                Term::Atom(i) => vals[*i].clone(),
            };
            let (a, b) = (get(l), get(r));
            match op {
                BinOp::Eq => a == b,
                BinOp::Ne => a != b,
                BinOp::Lt => a.as_int() < b.as_int(),
                BinOp::Le => a.as_int() <= b.as_int(),
                _ => unreachable!("comparison"),
            }
        }
    }
}

/// Replaces constants that have initializers by their values.
fn inline_consts(env: &TypeEnv, e: &Expr) -> Expr {
    e.map_bottom_up(&mut |x| match &x {
        Expr::Const { name } => env.const_values.get(name).cloned().unwrap_or(x),
        _ => x,
    })
}

fn prepare(env: &TypeEnv, ob: &Obligation) -> Result<(Expr, Abstraction, Skel), String> {
    let env = ob.env(env);
    let f = constant_fold(&inline_consts(&env, &ob.formula));
    let mut abs = Abstraction::default();
    let skel = abs.skel(&env, &f)?;
    Ok((f, abs, skel))
}

pub fn decide(env: &TypeEnv, ob: &Obligation) -> Verdict {
    let unknown = |reason: String| Verdict::Unknown {
        reason,
        residual: smt::emit_smt(env, ob),
    };
    let (f, abs, skel) = match prepare(env, ob) {
        Ok(x) => x,
        Err(e) => return unknown(e),
    };
    if f.is_true() {
        return Verdict::Valid {
            procedure: Procedure::Folding,
        };
    }
    if f.is_false() {
        return Verdict::Invalid { counterexample: vec![] };
    }
    if let Some(reason) = &abs.arithmetic {
        return unknown(reason.clone());
    }
    let domains: Vec<Vec<Value>> = abs.atoms.iter().map(|a| abs.domain(a)).collect();
    let total = domains.iter().map(|d| d.len() as u128).product::<u128>();
    if total > MAX_VALUATIONS {
        return unknown(format!("{total} valuations exceed the enumeration bound"));
    }
    if domains.iter().any(|d| d.is_empty()) {
        return Verdict::Valid {
            procedure: Procedure::EnumEnumeration,
        };
    }
    let mut idx = vec![0usize; domains.len()];
    loop {
        let vals: Vec<Value> = idx.iter().zip(&domains).map(|(i, d)| d[*i].clone()).collect();
        if !eval(&skel, &vals) {
            if abs.atoms_interact() {
                return unknown("falsified only under an abstraction that ignores shared subterms".into());
            }
            let counterexample = abs
                .atoms
                .iter()
                .zip(vals)
                .map(|(a, value)| Assignment {
                    term: a.expr.to_string(),
                    atom: a.expr.clone(),
                    value,
                })
                .collect();
            return Verdict::Invalid { counterexample };
        }
        // Mixed-radix increment, last unknown fastest.
        let mut k = idx.len();
        loop {
            if k == 0 {
                let procedure = if abs.atoms.iter().all(|a| a.ty == Type::Bool) {
                    Procedure::BooleanAbstraction
                } else {
                    Procedure::EnumEnumeration
                };
                return Verdict::Valid { procedure };
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < domains[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Re-evaluates the obligation under `witness`; true iff it is falsified.
pub fn check_witness(env: &TypeEnv, ob: &Obligation, witness: &[Assignment]) -> bool {
    let Ok((f, abs, skel)) = prepare(env, ob) else {
        return false;
    };
    if f.is_false() {
        return true;
    }
    let vals: Option<Vec<Value>> = abs
        .atoms
        .iter()
        .map(|a| witness.iter().find(|w| w.atom == a.expr).map(|w| w.value.clone()))
        .collect();
    vals.is_some_and(|v| !eval(&skel, &v))
}
