//! SMT-LIB 2.6 export and a structural validator for the emitted scripts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::ast::{BinOp, Expr, Type, TypeEnv};
use crate::verify::{Obligation, ObligationKind};

const RESERVED: &[&str] = &[
    "true", "false", "not", "and", "or", "xor", "=>", "=", "distinct", "ite", "let", "forall", "exists", "match",
    "par", "as", "_", "!", "assert", "Bool", "Int", "div", "mod", "abs", "+", "-", "*", "<", "<=", ">", ">=",
];

fn is_simple(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with(|c: char| c.is_ascii_digit())
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c))
}

/// Renders a user identifier as an SMT-LIB symbol, quoting when needed.
pub fn symbol(name: &str) -> String {
    if is_simple(name) && !RESERVED.contains(&name) {
        name.to_string()
    } else {
        format!("|{}|", name.replace('|', "_"))
    }
}

pub fn sort(ty: &Type) -> String {
    match ty {
        Type::Bool => "Bool".into(),
        Type::Int => "Int".into(),
        Type::Enum { name, .. } | Type::Abstract { name } => symbol(name),
        Type::Seq { elem } => symbol(&seq_sort_name(elem)),
    }
}

fn seq_sort_name(elem: &Type) -> String {
    match elem {
        Type::Bool => "Seq_Bool".into(),
        Type::Int => "Seq_Int".into(),
        Type::Enum { name, .. } | Type::Abstract { name } => format!("Seq_{name}"),
        Type::Seq { elem } => format!("Seq_{}", seq_sort_name(elem)),
    }
}

fn empty_name(seq: &Type) -> String {
    match seq {
        Type::Seq { elem } => symbol(&format!("empty_{}", seq_sort_name(elem))),
        _ => unreachable!("empty sequences have sequence type"),
    }
}

#[derive(Default)]
struct Decls {
    sorts: BTreeSet<Type>,
    empties: BTreeSet<Type>,
    funs: BTreeSet<String>,
}

impl Decls {
    fn sort(&mut self, ty: &Type) {
        if let Type::Seq { elem } = ty {
            self.sort(elem);
        }
        if !matches!(ty, Type::Bool | Type::Int) {
            self.sorts.insert(ty.clone());
        }
    }
}

struct Emitter<'a> {
    env: &'a TypeEnv,
    decls: Decls,
}

impl Emitter<'_> {
    fn ty(&self, e: &Expr) -> Option<Type> {
        self.env.type_check(e).ok()
    }

    fn term(&mut self, e: &Expr, expected: Option<&Type>) -> String {
        match e {
            Expr::Var { var } => symbol(&var.name),
            Expr::Const { name } => symbol(name),
            Expr::Int { value } if *value < 0 => format!("(- {})", value.unsigned_abs()),
            Expr::Int { value } => value.to_string(),
            Expr::Bool { value } => value.to_string(),
            Expr::EnumLit { ctor, .. } => symbol(ctor),
            Expr::EmptySeq => {
                let ty = expected.cloned().unwrap_or_else(|| Type::seq(Type::Int));
                self.decls.sort(&ty);
                self.decls.empties.insert(ty.clone());
                empty_name(&ty)
            }
            Expr::App { fun, args } => {
                self.decls.funs.insert(fun.clone());
                if args.is_empty() {
                    return symbol(fun);
                }
                let sig = self.env.funs.get(fun).cloned();
                let parts: Vec<String> = args
                    .iter()
                    .enumerate()
                    .map(|(i, a)| self.term(a, sig.as_ref().map(|s| &s.args[i])))
                    .collect();
                format!("({} {})", symbol(fun), parts.join(" "))
            }
            Expr::Not { arg } => format!("(not {})", self.term(arg, Some(&Type::Bool))),
            Expr::Bin { bop, lhs, rhs } => {
                let op = match bop {
                    BinOp::And => "and",
                    BinOp::Or => "or",
                    BinOp::Implies => "=>",
                    BinOp::Eq => "=",
                    BinOp::Ne => "distinct",
                    BinOp::Lt => "<",
                    BinOp::Le => "<=",
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                };
                let operand_ty = if matches!(bop, BinOp::Eq | BinOp::Ne) {
                    match (&**lhs, &**rhs) {
                        (Expr::EmptySeq, other) | (other, _) => self.ty(other),
                    }
                } else if bop.is_logic() {
                    Some(Type::Bool)
                } else {
                    Some(Type::Int)
                };
                let l = self.term(lhs, operand_ty.as_ref());
                let r = self.term(rhs, operand_ty.as_ref());
                format!("({op} {l} {r})")
            }
        }
    }
}

/// File name for an obligation's script: `<machine>_<node>.smt2`, with
/// `_init` marking the initial-node clause.
pub fn file_name(machine: &str, ob: &Obligation) -> String {
    match ob.kind {
        ObligationKind::InitEstablishes => format!("{machine}_init_{}.smt2", ob.node),
        ObligationKind::NodePreserves => format!("{machine}_{}.smt2", ob.node),
    }
}

/// The negated obligation over free constants; `unsat` means valid.
pub fn emit_smt(env: &TypeEnv, ob: &Obligation) -> String {
    let local = ob.env(env);
    let mut em = Emitter {
        env: &local,
        decls: Decls::default(),
    };
    let body = em.term(&ob.formula, Some(&Type::Bool));
    for b in &ob.quantified {
        em.decls.sort(&b.ty);
    }
    let funs: Vec<(String, Vec<Type>, Type)> = em
        .decls
        .funs
        .iter()
        .map(|f| {
            let sig = &local.funs[f];
            (f.clone(), sig.args.clone(), sig.ret.clone())
        })
        .collect();
    for (_, args, ret) in &funs {
        for t in args.iter().chain([ret]) {
            em.decls.sort(t);
        }
    }
    let mut s = String::new();
    writeln!(s, "; {}", ob.label()).unwrap();
    writeln!(s, "(set-logic ALL)").unwrap();
    // Element sorts before the sequence sorts built on them.
    let mut sorts: Vec<&Type> = em.decls.sorts.iter().collect();
    sorts.sort_by_key(|t| depth(t));
    for t in sorts {
        match t {
            Type::Enum { name, ctors } => {
                let cs: Vec<String> = ctors.iter().map(|c| format!("({})", symbol(c))).collect();
                writeln!(s, "(declare-datatype {} ({}))", symbol(name), cs.join(" ")).unwrap();
            }
            other => writeln!(s, "(declare-sort {} 0)", sort(other)).unwrap(),
        }
    }
    for t in &em.decls.empties {
        writeln!(s, "(declare-const {} {})", empty_name(t), sort(t)).unwrap();
    }
    for (f, args, ret) in &funs {
        let a: Vec<String> = args.iter().map(sort).collect();
        writeln!(s, "(declare-fun {} ({}) {})", symbol(f), a.join(" "), sort(ret)).unwrap();
    }
    for b in &ob.quantified {
        writeln!(s, "(declare-const {} {})", symbol(&b.name), sort(&b.ty)).unwrap();
    }
    writeln!(s, "(assert (not {body}))").unwrap();
    writeln!(s, "(check-sat)").unwrap();
    writeln!(s, "(exit)").unwrap();
    s
}

fn depth(t: &Type) -> usize {
    match t {
        Type::Seq { elem } => 1 + depth(elem),
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(src: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ';' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    chars.next();
                }
            }
            '(' | ')' => {
                out.push(c.to_string());
                chars.next();
            }
            '|' => {
                let mut tok = String::from("|");
                chars.next();
                loop {
                    match chars.next() {
                        Some('|') => break,
                        Some('\\') => return Err("backslash in quoted symbol".into()),
                        Some(ch) => tok.push(ch),
                        None => return Err("unterminated quoted symbol".into()),
                    }
                }
                tok.push('|');
                out.push(tok);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut tok = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_whitespace() || "();|".contains(ch) {
                        break;
                    }
                    tok.push(ch);
                    chars.next();
                }
                out.push(tok);
            }
        }
    }
    Ok(out)
}

fn parse_sexps(toks: &[String]) -> Result<Vec<Sexp>, String> {
    let mut stack: Vec<Vec<Sexp>> = vec![vec![]];
    for t in toks {
        match t.as_str() {
            "(" => stack.push(vec![]),
            ")" => {
                let done = stack.pop().ok_or("unbalanced `)`")?;
                stack.last_mut().ok_or("unbalanced `)`")?.push(Sexp::List(done));
            }
            _ => {
                let ok = t.starts_with('|')
                    || t.chars().all(|c| c.is_ascii_digit())
                    || is_simple(t.strip_prefix(':').unwrap_or(t));
                if !ok {
                    return Err(format!("malformed token `{t}`"));
                }
                stack
                    .last_mut()
                    .expect("stack is never empty")
                    .push(Sexp::Atom(t.clone()));
            }
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced `(`".into());
    }
    Ok(stack.pop().unwrap())
}

const BUILTIN_FUNS: &[&str] = &[
    "true", "false", "not", "and", "or", "xor", "=>", "=", "distinct", "ite", "+", "-", "*", "<", "<=", ">", ">=",
];

struct Scope {
    sorts: BTreeSet<String>,
    funs: BTreeMap<String, usize>,
}

fn atom(s: &Sexp) -> Result<&str, String> {
    match s {
        Sexp::Atom(a) => Ok(a),
        Sexp::List(_) => Err("expected a symbol".into()),
    }
}

impl Scope {
    fn check_sort(&self, s: &Sexp) -> Result<(), String> {
        let a = atom(s)?;
        if self.sorts.contains(a) {
            Ok(())
        } else {
            Err(format!("undeclared sort `{a}`"))
        }
    }

    fn check_term(&self, s: &Sexp) -> Result<(), String> {
        match s {
            Sexp::Atom(a) if a.chars().all(|c| c.is_ascii_digit()) => Ok(()),
            Sexp::Atom(a) if BUILTIN_FUNS.contains(&a.as_str()) => Ok(()),
            Sexp::Atom(a) => match self.funs.get(a.as_str()) {
                Some(0) => Ok(()),
                Some(_) => Err(format!("`{a}` used without arguments")),
                None => Err(format!("undeclared symbol `{a}`")),
            },
            Sexp::List(items) => {
                let (head, args) = items.split_first().ok_or("empty application")?;
                let h = atom(head)?;
                if !BUILTIN_FUNS.contains(&h) {
                    match self.funs.get(h) {
                        Some(n) if *n == args.len() => {}
                        Some(n) => return Err(format!("`{h}` expects {n} argument(s)")),
                        None => return Err(format!("undeclared function `{h}`")),
                    }
                } else if args.is_empty() {
                    return Err(format!("`{h}` applied to nothing"));
                }
                args.iter().try_for_each(|a| self.check_term(a))
            }
        }
    }
}

/// Checks that `script` is a well-formed SMT-LIB 2.6 script over the
/// command subset `emit_smt` produces, with every symbol declared before use.
pub fn validate(script: &str) -> Result<(), String> {
    let cmds = parse_sexps(&tokenize(script)?)?;
    let mut scope = Scope {
        sorts: ["Bool", "Int"].iter().map(|s| s.to_string()).collect(),
        funs: BTreeMap::new(),
    };
    let mut saw_check = false;
    for c in &cmds {
        let Sexp::List(items) = c else {
            return Err("top-level atom".into());
        };
        let (head, rest) = items.split_first().ok_or("empty command")?;
        match (atom(head)?, rest) {
            ("set-logic", [Sexp::Atom(_)]) => {}
            ("set-info" | "set-option", [Sexp::Atom(k), ..]) if k.starts_with(':') => {}
            ("declare-sort", [name, Sexp::Atom(n)]) if n == "0" => {
                scope.sorts.insert(atom(name)?.to_string());
            }
            ("declare-datatype", [name, Sexp::List(ctors)]) if !ctors.is_empty() => {
                scope.sorts.insert(atom(name)?.to_string());
                for ctor in ctors {
                    let Sexp::List(parts) = ctor else {
                        return Err("constructor must be a list".into());
                    };
                    if parts.len() != 1 {
                        return Err("only nullary constructors are emitted".into());
                    }
                    scope.funs.insert(atom(&parts[0])?.to_string(), 0);
                }
            }
            ("declare-const", [name, s]) => {
                scope.check_sort(s)?;
                scope.funs.insert(atom(name)?.to_string(), 0);
            }
            ("declare-fun", [name, Sexp::List(args), ret]) => {
                args.iter().try_for_each(|a| scope.check_sort(a))?;
                scope.check_sort(ret)?;
                scope.funs.insert(atom(name)?.to_string(), args.len());
            }
            ("assert", [t]) => scope.check_term(t)?,
            ("check-sat", []) => saw_check = true,
            ("exit", []) => {}
            (other, _) => return Err(format!("unexpected command `{other}`")),
        }
    }
    if saw_check {
        Ok(())
    } else {
        Err("missing (check-sat)".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::FunSig;
    use crate::verify::Binder;

    #[test]
    fn analysis_script() {
        let mut env = TypeEnv::default();
        let st = Type::enumeration("Status", &["gasD", "noGas"]);
        env.types.insert("Status".into(), st.clone());
        env.vars.insert("gs".into(), Type::seq(Type::Int));
        env.funs.insert(
            "analysis".into(),
            FunSig {
                args: vec![Type::seq(Type::Int)],
                ret: st,
            },
        );
        let a = Expr::app("analysis", vec![Expr::var("gs")]);
        let ob = Obligation {
            kind: ObligationKind::NodePreserves,
            node: "Analysis".into(),
            quantified: vec![Binder {
                name: "gs".into(),
                ty: Type::seq(Type::Int),
                constant: false,
            }],
            formula: Expr::or(
                Expr::eq(a.clone(), Expr::enum_lit("Status", "noGas")),
                Expr::eq(a, Expr::enum_lit("Status", "gasD")),
            ),
            provenance: String::new(),
        };
        let s = emit_smt(&env, &ob);
        assert!(s.contains("(declare-datatype Status ((gasD) (noGas)))"), "{s}");
        assert!(s.contains("(declare-fun analysis (Seq_Int) Status)"), "{s}");
        assert!(
            s.contains("(assert (not (or (= (analysis gs) noGas) (= (analysis gs) gasD))))"),
            "{s}"
        );
        validate(&s).unwrap();
    }

    #[test]
    fn validator_rejects_garbage() {
        assert!(validate("(assert (and p q))\n(check-sat)").is_err());
        assert!(validate("(declare-const p Bool)\n(assert p").is_err());
        assert!(validate("(declare-const p Bool)\n(assert (not p))").is_err());
        validate("(declare-const |p#1| Bool)\n(assert (not |p#1|))\n(check-sat)").unwrap();
    }

    #[test]
    fn quoting() {
        assert_eq!(symbol("x#1"), "|x#1|");
        assert_eq!(symbol("distinct"), "|distinct|");
        assert_eq!(symbol("gs"), "gs");
    }
}
