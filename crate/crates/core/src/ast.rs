//! Typed expressions, type environments and state-update substitutions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the control variable that records the active node.
pub const ACTV: &str = "actv";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Type {
    Bool,
    Int,
    Enum { name: String, ctors: Vec<String> },
    Seq { elem: Box<Type> },
    Abstract { name: String },
}

impl Type {
    pub fn seq(elem: Type) -> Type {
        Type::Seq { elem: Box::new(elem) }
    }

    pub fn enumeration(name: &str, ctors: &[&str]) -> Type {
        Type::Enum {
            name: name.to_string(),
            ctors: ctors.iter().map(|c| c.to_string()).collect(),
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Bool => write!(f, "bool"),
            Type::Int => write!(f, "int"),
            Type::Enum { name, .. } | Type::Abstract { name } => write!(f, "{name}"),
            Type::Seq { elem } => write!(f, "seq({elem})"),
        }
    }
}

/// A state variable reference, optionally qualified by the machine-state
/// namespace `r` introduced by frame extension. Serializes as `x` or `r:x`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub struct QualName {
    pub name: String,
    pub framed: bool,
}

impl From<QualName> for String {
    fn from(q: QualName) -> String {
        q.to_string()
    }
}

impl From<String> for QualName {
    fn from(s: String) -> QualName {
        match s.strip_prefix("r:") {
            Some(rest) => QualName::framed(rest),
            None => QualName::plain(s),
        }
    }
}

impl QualName {
    pub fn plain(name: impl Into<String>) -> Self {
        QualName {
            name: name.into(),
            framed: false,
        }
    }

    pub fn framed(name: impl Into<String>) -> Self {
        QualName {
            name: name.into(),
            framed: true,
        }
    }

    pub fn actv() -> Self {
        QualName::plain(ACTV)
    }

    pub fn is_actv(&self) -> bool {
        !self.framed && self.name == ACTV
    }
}

impl fmt::Display for QualName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.framed {
            write!(f, "r:{}", self.name)
        } else {
            write!(f, "{}", self.name)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinOp {
    And,
    Or,
    Implies,
    Eq,
    Ne,
    Lt,
    Le,
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn is_arith(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul)
    }

    pub fn is_logic(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Implies)
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le)
    }

    /// Binding strength used by both printers; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Implies => 1,
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul => 7,
        }
    }

    pub fn source_symbol(self) -> &'static str {
        match self {
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Implies => "=>",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }

    pub fn math_symbol(self) -> &'static str {
        match self {
            BinOp::And => "∧",
            BinOp::Or => "∨",
            BinOp::Implies => "⇒",
            BinOp::Eq => "=",
            BinOp::Ne => "≠",
            BinOp::Lt => "<",
            BinOp::Le => "≤",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Expr {
    Var {
        var: QualName,
    },
    /// Rigid machine constant; never assigned.
    Const {
        name: String,
    },
    Int {
        value: i64,
    },
    Bool {
        value: bool,
    },
    EnumLit {
        ty: String,
        ctor: String,
    },
    EmptySeq,
    App {
        fun: String,
        args: Vec<Expr>,
    },
    Not {
        arg: Box<Expr>,
    },
    Bin {
        bop: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var {
            var: QualName::plain(name),
        }
    }

    pub fn qvar(var: QualName) -> Expr {
        Expr::Var { var }
    }

    pub fn constant(name: &str) -> Expr {
        Expr::Const { name: name.to_string() }
    }

    pub fn int(value: i64) -> Expr {
        Expr::Int { value }
    }

    pub fn bool(value: bool) -> Expr {
        Expr::Bool { value }
    }

    pub fn enum_lit(ty: &str, ctor: &str) -> Expr {
        Expr::EnumLit {
            ty: ty.to_string(),
            ctor: ctor.to_string(),
        }
    }

    pub fn app(fun: &str, args: Vec<Expr>) -> Expr {
        Expr::App {
            fun: fun.to_string(),
            args,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(arg: Expr) -> Expr {
        Expr::Not { arg: Box::new(arg) }
    }

    pub fn bin(bop: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin {
            bop,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn and(lhs: Expr, rhs: Expr) -> Expr {
        Expr::bin(BinOp::And, lhs, rhs)
    }

    pub fn or(lhs: Expr, rhs: Expr) -> Expr {
        Expr::bin(BinOp::Or, lhs, rhs)
    }

    pub fn implies(lhs: Expr, rhs: Expr) -> Expr {
        Expr::bin(BinOp::Implies, lhs, rhs)
    }

    pub fn eq(lhs: Expr, rhs: Expr) -> Expr {
        Expr::bin(BinOp::Eq, lhs, rhs)
    }

    /// Left-nested disjunction; the empty disjunction is `false`.
    pub fn disj(items: impl IntoIterator<Item = Expr>) -> Expr {
        items.into_iter().reduce(Expr::or).unwrap_or(Expr::bool(false))
    }

    /// Left-nested conjunction; the empty conjunction is `true`.
    pub fn conj(items: impl IntoIterator<Item = Expr>) -> Expr {
        items.into_iter().reduce(Expr::and).unwrap_or(Expr::bool(true))
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Expr::Bool { value: true })
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Expr::Bool { value: false })
    }

    pub fn is_literal(&self) -> bool {
        matches!(
            self,
            Expr::Int { .. } | Expr::Bool { .. } | Expr::EnumLit { .. } | Expr::EmptySeq
        )
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::App { args, .. } => args.iter().collect(),
            Expr::Not { arg } => vec![arg],
            Expr::Bin { lhs, rhs, .. } => vec![lhs, rhs],
            _ => Vec::new(),
        }
    }

    /// Rebuilds the term bottom-up, applying `f` to every node after its
    /// children have been rebuilt.
    pub fn map_bottom_up(&self, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
        let rebuilt = match self {
            Expr::App { fun, args } => Expr::App {
                fun: fun.clone(),
                args: args.iter().map(|a| a.map_bottom_up(f)).collect(),
            },
            Expr::Not { arg } => Expr::Not {
                arg: Box::new(arg.map_bottom_up(f)),
            },
            Expr::Bin { bop, lhs, rhs } => Expr::Bin {
                bop: *bop,
                lhs: Box::new(lhs.map_bottom_up(f)),
                rhs: Box::new(rhs.map_bottom_up(f)),
            },
            leaf => leaf.clone(),
        };
        f(rebuilt)
    }

    pub fn free_vars(&self) -> BTreeSet<QualName> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<QualName>) {
        if let Expr::Var { var } = self {
            out.insert(var.clone());
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    pub fn consts(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Const { name } = e {
                out.insert(name.clone());
            }
        });
        out
    }

    pub fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Renames variables through `f`; used by frame extension.
    pub fn rename_vars(&self, f: &impl Fn(&QualName) -> QualName) -> Expr {
        self.map_bottom_up(&mut |e| match e {
            Expr::Var { var } => Expr::Var { var: f(&var) },
            other => other,
        })
    }

    /// Source-syntax rendering accepted by the machine parser.
    pub fn to_source(&self) -> String {
        let mut s = String::new();
        write_expr(&mut s, self, 0, Style::Source);
        s
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Style {
    Source,
    Math,
}

const NOT_PREC: u8 = 4;

fn write_expr(out: &mut String, e: &Expr, ctx: u8, style: Style) {
    match e {
        Expr::Var { var } => out.push_str(&var.to_string()),
        Expr::Const { name } => out.push_str(name),
        Expr::Int { value } => out.push_str(&value.to_string()),
        Expr::Bool { value } => out.push_str(if *value { "true" } else { "false" }),
        Expr::EnumLit { ctor, .. } => out.push_str(ctor),
        Expr::EmptySeq => out.push_str(if style == Style::Math { "⟨⟩" } else { "<>" }),
        Expr::App { fun, args } => {
            out.push_str(fun);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, 0, style);
            }
            out.push(')');
        }
        Expr::Not { arg } => {
            let paren = ctx > NOT_PREC;
            if paren {
                out.push('(');
            }
            out.push_str(if style == Style::Math { "¬" } else { "not " });
            write_expr(out, arg, NOT_PREC, style);
            if paren {
                out.push(')');
            }
        }
        Expr::Bin { bop, lhs, rhs } => {
            let p = bop.precedence();
            let paren = ctx > p;
            if paren {
                out.push('(');
            }
            // Implication is right-associative, everything else left-associative;
            // comparisons never chain.
            let (lp, rp) = match bop {
                BinOp::Implies => (p + 1, p),
                _ if bop.is_comparison() => (p + 1, p + 1),
                _ => (p, p + 1),
            };
            write_expr(out, lhs, lp, style);
            out.push(' ');
            out.push_str(if style == Style::Math {
                bop.math_symbol()
            } else {
                bop.source_symbol()
            });
            out.push(' ');
            write_expr(out, rhs, rp, style);
            if paren {
                out.push(')');
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self, 0, Style::Math);
        f.write_str(&s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunSig {
    pub args: Vec<Type>,
    pub ret: Type,
}

/// Declarations visible to expressions of one machine.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeEnv {
    /// Declared enumeration and abstract types, by name.
    pub types: BTreeMap<String, Type>,
    pub vars: BTreeMap<String, Type>,
    pub consts: BTreeMap<String, Type>,
    /// Literal initializers of constants that have one.
    pub const_values: BTreeMap<String, Expr>,
    pub funs: BTreeMap<String, FunSig>,
    pub events: BTreeMap<String, Option<Type>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("type error in `{subterm}`: {message}")]
pub struct TypeError {
    pub subterm: String,
    pub message: String,
}

impl TypeError {
    fn at(e: &Expr, message: impl Into<String>) -> Self {
        TypeError {
            subterm: e.to_string(),
            message: message.into(),
        }
    }
}

impl TypeEnv {
    pub fn var_type(&self, var: &QualName) -> Option<&Type> {
        self.vars.get(&var.name)
    }

    /// Finds the enumeration declaring `ctor`, if any.
    pub fn enum_of_ctor(&self, ctor: &str) -> Option<&Type> {
        self.types
            .values()
            .find(|t| matches!(t, Type::Enum { ctors, .. } if ctors.iter().any(|c| c == ctor)))
    }

    /// Every name declared in one of the four name spaces or as a type or constructor.
    pub fn is_declared(&self, name: &str) -> bool {
        self.vars.contains_key(name)
            || self.consts.contains_key(name)
            || self.funs.contains_key(name)
            || self.events.contains_key(name)
            || self.types.contains_key(name)
            || self.enum_of_ctor(name).is_some()
    }

    pub fn type_check(&self, e: &Expr) -> Result<Type, TypeError> {
        self.infer(e)
    }

    fn infer(&self, e: &Expr) -> Result<Type, TypeError> {
        match e {
            Expr::Var { var } => self
                .var_type(var)
                .cloned()
                .ok_or_else(|| TypeError::at(e, format!("unknown variable `{var}`"))),
            Expr::Const { name } => self
                .consts
                .get(name)
                .cloned()
                .ok_or_else(|| TypeError::at(e, format!("unknown constant `{name}`"))),
            Expr::Int { .. } => Ok(Type::Int),
            Expr::Bool { .. } => Ok(Type::Bool),
            Expr::EnumLit { ty, ctor } => match self.types.get(ty) {
                Some(t @ Type::Enum { ctors, .. }) if ctors.contains(ctor) => Ok(t.clone()),
                _ => Err(TypeError::at(e, format!("unknown constructor `{ctor}` of `{ty}`"))),
            },
            Expr::EmptySeq => Err(TypeError::at(
                e,
                "cannot infer the element type of an empty sequence here",
            )),
            Expr::App { fun, args } => {
                let sig = self
                    .funs
                    .get(fun)
                    .ok_or_else(|| TypeError::at(e, format!("unknown function `{fun}`")))?;
                if sig.args.len() != args.len() {
                    return Err(TypeError::at(
                        e,
                        format!("`{fun}` expects {} argument(s), got {}", sig.args.len(), args.len()),
                    ));
                }
                for (a, t) in args.iter().zip(&sig.args) {
                    self.check_against(a, t)?;
                }
                Ok(sig.ret.clone())
            }
            Expr::Not { arg } => {
                self.check_against(arg, &Type::Bool)?;
                Ok(Type::Bool)
            }
            Expr::Bin { bop, lhs, rhs } => {
                if bop.is_logic() {
                    self.check_against(lhs, &Type::Bool)?;
                    self.check_against(rhs, &Type::Bool)?;
                    Ok(Type::Bool)
                } else if bop.is_arith() {
                    self.check_against(lhs, &Type::Int)?;
                    self.check_against(rhs, &Type::Int)?;
                    Ok(Type::Int)
                } else if matches!(bop, BinOp::Lt | BinOp::Le) {
                    self.check_against(lhs, &Type::Int)?;
                    self.check_against(rhs, &Type::Int)?;
                    Ok(Type::Bool)
                } else {
                    let t = match (&**lhs, &**rhs) {
                        (Expr::EmptySeq, other) | (other, Expr::EmptySeq) if !matches!(other, Expr::EmptySeq) => {
                            self.infer(other)?
                        }
                        _ => self.infer(lhs)?,
                    };
                    self.check_against(lhs, &t)?;
                    self.check_against(rhs, &t)?;
                    Ok(Type::Bool)
                }
            }
        }
    }

    /// Checks `e` against an expected type; the only place an empty
    /// sequence literal gets its element type.
    pub fn check_against(&self, e: &Expr, expected: &Type) -> Result<(), TypeError> {
        if let Expr::EmptySeq = e {
            return match expected {
                Type::Seq { .. } => Ok(()),
                other => Err(TypeError::at(e, format!("expected {other}, found a sequence"))),
            };
        }
        let found = self.infer(e)?;
        if &found == expected {
            Ok(())
        } else {
            Err(TypeError::at(e, format!("expected {expected}, found {found}")))
        }
    }
}

/// A finite state update: variables outside the domain are unchanged.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subst(pub BTreeMap<QualName, Expr>);

impl Subst {
    pub fn identity() -> Self {
        Subst(BTreeMap::new())
    }

    pub fn single(var: QualName, value: Expr) -> Self {
        let mut m = BTreeMap::new();
        m.insert(var, value);
        Subst(m)
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (QualName, Expr)>) -> Self {
        Subst(pairs.into_iter().collect())
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|(k, v)| matches!(v, Expr::Var { var } if var == k))
    }

    pub fn get(&self, var: &QualName) -> Option<&Expr> {
        self.0.get(var)
    }

    /// Drops entries of the form `x ↦ x`.
    pub fn without_identities(&self) -> Subst {
        Subst(
            self.0
                .iter()
                .filter(|(k, v)| !matches!(v, Expr::Var { var } if var == *k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }

    pub fn apply(&self, e: &Expr) -> Expr {
        subst_apply(self, e)
    }

    pub fn check(&self, env: &TypeEnv) -> Result<(), TypeError> {
        for (x, v) in &self.0 {
            let t = env.var_type(x).ok_or_else(|| TypeError {
                subterm: x.to_string(),
                message: "not a state variable".into(),
            })?;
            env.check_against(v, t)?;
        }
        Ok(())
    }

    pub fn range_vars(&self) -> BTreeSet<QualName> {
        self.0.values().flat_map(|v| v.free_vars()).collect()
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k} ↦ {v}")?;
        }
        write!(f, "⟩")
    }
}

/// Homomorphic replacement of each variable by its image under `sigma`.
pub fn subst_apply(sigma: &Subst, e: &Expr) -> Expr {
    if sigma.0.is_empty() {
        return e.clone();
    }
    match e {
        Expr::Var { var } => sigma.get(var).cloned().unwrap_or_else(|| e.clone()),
        Expr::App { fun, args } => Expr::App {
            fun: fun.clone(),
            args: args.iter().map(|a| subst_apply(sigma, a)).collect(),
        },
        Expr::Not { arg } => Expr::not(subst_apply(sigma, arg)),
        Expr::Bin { bop, lhs, rhs } => Expr::bin(*bop, subst_apply(sigma, lhs), subst_apply(sigma, rhs)),
        leaf => leaf.clone(),
    }
}

/// `rho ∘ sigma`: the update that runs `sigma` first and then `rho`.
/// Images are constant-folded.
pub fn subst_compose(rho: &Subst, sigma: &Subst) -> Subst {
    let mut out = BTreeMap::new();
    for (x, v) in &sigma.0 {
        out.insert(x.clone(), v.clone());
    }
    for (x, v) in &rho.0 {
        out.insert(x.clone(), constant_fold(&subst_apply(sigma, v)));
    }
    Subst(out).without_identities()
}

/// Evaluates ground subterms and applies unit/zero laws of the boolean
/// connectives. Idempotent.
pub fn constant_fold(e: &Expr) -> Expr {
    e.map_bottom_up(&mut fold_node)
}

fn fold_node(e: Expr) -> Expr {
    match e {
        Expr::Not { arg } => mk_not(*arg),
        Expr::Bin { bop, lhs, rhs } => fold_bin(bop, *lhs, *rhs),
        other => other,
    }
}

pub(crate) fn mk_not(arg: Expr) -> Expr {
    match arg {
        Expr::Bool { value } => Expr::bool(!value),
        Expr::Not { arg } => *arg,
        other => Expr::not(other),
    }
}

fn fold_bin(bop: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    use Expr::{Bool, Int};
    match bop {
        BinOp::And => match (lhs, rhs) {
            (Bool { value: true }, x) | (x, Bool { value: true }) => x,
            (Bool { value: false }, _) | (_, Bool { value: false }) => Expr::bool(false),
            (l, r) if l == r => l,
            (l, r) => Expr::and(l, r),
        },
        BinOp::Or => match (lhs, rhs) {
            (Bool { value: false }, x) | (x, Bool { value: false }) => x,
            (Bool { value: true }, _) | (_, Bool { value: true }) => Expr::bool(true),
            (l, r) if l == r => l,
            (l, r) => Expr::or(l, r),
        },
        BinOp::Implies => match (lhs, rhs) {
            (Bool { value: true }, x) => x,
            (Bool { value: false }, _) | (_, Bool { value: true }) => Expr::bool(true),
            (l, Bool { value: false }) => mk_not(l),
            (l, r) if l == r => Expr::bool(true),
            (l, r) => Expr::implies(l, r),
        },
        BinOp::Eq | BinOp::Ne => {
            let positive = bop == BinOp::Eq;
            match literal_equality(&lhs, &rhs) {
                Some(v) => Expr::bool(v == positive),
                None => Expr::bin(bop, lhs, rhs),
            }
        }
        BinOp::Lt | BinOp::Le => match (&lhs, &rhs) {
            (Int { value: a }, Int { value: b }) => Expr::bool(if bop == BinOp::Lt { a < b } else { a <= b }),
            _ if lhs == rhs => Expr::bool(bop == BinOp::Le),
            _ => Expr::bin(bop, lhs, rhs),
        },
        BinOp::Add | BinOp::Sub | BinOp::Mul => match (&lhs, &rhs) {
            (Int { value: a }, Int { value: b }) => {
                let r = match bop {
                    BinOp::Add => a.checked_add(*b),
                    BinOp::Sub => a.checked_sub(*b),
                    _ => a.checked_mul(*b),
                };
                match r {
                    Some(v) => Expr::int(v),
                    None => Expr::bin(bop, lhs, rhs),
                }
            }
            _ => Expr::bin(bop, lhs, rhs),
        },
    }
}

/// Decides `lhs = rhs` when both sides are literals or syntactically equal.
fn literal_equality(lhs: &Expr, rhs: &Expr) -> Option<bool> {
    if lhs == rhs {
        return Some(true);
    }
    if lhs.is_literal() && rhs.is_literal() {
        return Some(false);
    }
    None
}
