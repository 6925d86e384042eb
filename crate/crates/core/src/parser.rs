//! Lexer and recursive-descent parser for the `.rcsm` machine language.
//!
//! ```text
//! file       := typedecl* 'statemachine' ID ['consts' constdecl*]
//!               'vars' vardecl* 'events' eventdecl* 'states' nodedecl*
//!               'initial' ID 'finals' ID* 'transitions' transdecl*
//! typedecl   := 'enum' ID '=' ID ('|' ID)* | 'abstract' ID
//!             | 'function' ID '(' [type (',' type)*] ')' ':' type
//! nodedecl   := ID ['entry' action] ['exit' action]
//! transdecl  := ID 'from' ID 'to' ID ['trigger' event] ['condition' expr] ['action' action]
//! action     := item (';' item)*
//! item       := 'skip' | ID ':=' expr | event | 'if' expr 'then' action 'else' action 'end'
//! event      := ID | ID '?' ID | ID '!' expr
//! ```
//! Comments run from `--` to the end of the line.

use thiserror::Error;

use crate::ast::{BinOp, Expr, FunSig, Type, TypeEnv, TypeError, ACTV};
use crate::model::{ActionSyn, EventSyn, NodeDecl, StMach, TransDecl};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: {source}")]
    Type { line: usize, col: usize, source: TypeError },
    #[error("{line}:{col}: duplicate declaration of `{name}`")]
    Duplicate { line: usize, col: usize, name: String },
}

const KEYWORDS: &[&str] = &[
    "statemachine",
    "consts",
    "vars",
    "events",
    "states",
    "initial",
    "finals",
    "transitions",
    "entry",
    "exit",
    "from",
    "to",
    "trigger",
    "condition",
    "action",
    "skip",
    "if",
    "then",
    "else",
    "end",
    "true",
    "false",
    "not",
    "and",
    "or",
    "enum",
    "abstract",
    "function",
    "int",
    "bool",
    "seq",
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

// Longest symbols first.
const SYMBOLS: &[&str] = &[
    ":=", "!=", "<=", ">=", "=>", "<>", ":", ";", "?", "!", "(", ")", ",", "=", "<", ">", "+", "-", "*", "|",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Token {
                tok: Tok::Ident(s),
                line,
                col: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            let v = s.parse::<i64>().map_err(|_| ParseError::Syntax {
                line,
                col: start_col,
                message: format!("integer literal `{s}` out of range"),
            })?;
            out.push(Token {
                tok: Tok::Int(v),
                line,
                col: start_col,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                i += sym.len();
                col += sym.len();
                out.push(Token {
                    tok: Tok::Sym(sym),
                    line,
                    col: start_col,
                });
            }
            None => {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    message: format!("unexpected character `{c}`"),
                });
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    env: TypeEnv,
}

/// Parses machine text into the meta-model record. Performs type checking
/// but no well-formedness checks.
pub fn parse(src: &str) -> Result<StMach, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        env: TypeEnv::default(),
    };
    p.file()
}

/// Parses and type checks a standalone boolean expression over `env`.
pub fn parse_expr(env: &TypeEnv, src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        env: env.clone(),
    };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("unexpected {} after expression", p.describe()));
    }
    if let Err(err) = env.check_against(&e, &Type::Bool) {
        return p.type_err((1, 1), err);
    }
    Ok(e)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::Syntax {
            line,
            col,
            message: message.into(),
        })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.describe()))
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), ParseError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.err(format!("expected `{sym}`, found {}", self.describe()))
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    /// True when the next token is a non-keyword identifier.
    fn at_ident(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()))
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        if self.at_ident() {
            match self.bump() {
                Tok::Ident(s) => Ok(s),
                _ => unreachable!(),
            }
        } else {
            self.err(format!("expected an identifier, found {}", self.describe()))
        }
    }

    fn declare(&mut self, name: &str, at: (usize, usize)) -> Result<(), ParseError> {
        if self.env.is_declared(name) {
            return Err(ParseError::Duplicate {
                line: at.0,
                col: at.1,
                name: name.to_string(),
            });
        }
        Ok(())
    }

    fn type_err<T>(&self, at: (usize, usize), source: TypeError) -> Result<T, ParseError> {
        Err(ParseError::Type {
            line: at.0,
            col: at.1,
            source,
        })
    }

    fn file(&mut self) -> Result<StMach, ParseError> {
        loop {
            if self.eat_kw("enum") {
                let at = self.here();
                let name = self.ident()?;
                self.declare(&name, at)?;
                self.expect_sym("=")?;
                let mut ctors: Vec<String> = Vec::new();
                loop {
                    let at = self.here();
                    let c = self.ident()?;
                    if ctors.contains(&c) {
                        return Err(ParseError::Duplicate {
                            line: at.0,
                            col: at.1,
                            name: c,
                        });
                    }
                    self.declare(&c, at)?;
                    ctors.push(c);
                    if !self.eat_sym("|") {
                        break;
                    }
                }
                self.env.types.insert(name.clone(), Type::Enum { name, ctors });
            } else if self.eat_kw("abstract") {
                let at = self.here();
                let name = self.ident()?;
                self.declare(&name, at)?;
                self.env.types.insert(name.clone(), Type::Abstract { name });
            } else if self.eat_kw("function") {
                let at = self.here();
                let name = self.ident()?;
                self.declare(&name, at)?;
                self.expect_sym("(")?;
                let mut args = Vec::new();
                if !self.is_sym(")") {
                    loop {
                        args.push(self.ty()?);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.expect_sym(")")?;
                self.expect_sym(":")?;
                let ret = self.ty()?;
                self.env.funs.insert(name, FunSig { args, ret });
            } else {
                break;
            }
        }
        self.expect_kw("statemachine")?;
        let name = self.ident()?;

        if self.eat_kw("consts") {
            while self.at_ident() {
                let at = self.here();
                let c = self.ident()?;
                self.declare(&c, at)?;
                self.expect_sym(":")?;
                let t = self.ty()?;
                if self.eat_sym("=") {
                    let at = self.here();
                    let v = self.expr()?;
                    if !v.is_literal() && !matches!(v, Expr::Int { .. }) {
                        return self.err("constant initializers must be literals");
                    }
                    if let Err(e) = self.env.check_against(&v, &t) {
                        return self.type_err(at, e);
                    }
                    self.env.const_values.insert(c.clone(), v);
                }
                self.env.consts.insert(c, t);
            }
        }

        self.expect_kw("vars")?;
        while self.at_ident() {
            let at = self.here();
            let v = self.ident()?;
            if v == ACTV {
                return Err(ParseError::Syntax {
                    line: at.0,
                    col: at.1,
                    message: "`actv` is reserved".into(),
                });
            }
            self.declare(&v, at)?;
            self.expect_sym(":")?;
            let t = self.ty()?;
            self.env.vars.insert(v, t);
        }

        self.expect_kw("events")?;
        while self.at_ident() {
            let at = self.here();
            let e = self.ident()?;
            self.declare(&e, at)?;
            let t = if self.eat_sym(":") { Some(self.ty()?) } else { None };
            self.env.events.insert(e, t);
        }

        self.expect_kw("states")?;
        let mut nodes = Vec::new();
        while self.at_ident() {
            let nname = self.ident()?;
            let nentry = if self.eat_kw("entry") {
                self.action()?
            } else {
                ActionSyn::Skip
            };
            let nexit = if self.eat_kw("exit") {
                self.action()?
            } else {
                ActionSyn::Skip
            };
            nodes.push(NodeDecl { nname, nentry, nexit });
        }

        self.expect_kw("initial")?;
        let init = self.ident()?;
        self.expect_kw("finals")?;
        let mut finals = Vec::new();
        while self.at_ident() {
            finals.push(self.ident()?);
        }

        self.expect_kw("transitions")?;
        let mut transs = Vec::new();
        while self.at_ident() {
            let tid = self.ident()?;
            self.expect_kw("from")?;
            let src = self.ident()?;
            self.expect_kw("to")?;
            let tgt = self.ident()?;
            let trig = if self.eat_kw("trigger") {
                Some(self.event()?)
            } else {
                None
            };
            let cond = if self.eat_kw("condition") {
                let at = self.here();
                let c = self.expr()?;
                if let Err(e) = self.env.check_against(&c, &Type::Bool) {
                    return self.type_err(at, e);
                }
                c
            } else {
                Expr::bool(true)
            };
            let act = if self.eat_kw("action") {
                self.action()?
            } else {
                ActionSyn::Skip
            };
            transs.push(TransDecl {
                tid,
                src,
                tgt,
                trig,
                cond,
                act,
            });
        }
        if *self.peek() != Tok::Eof {
            return self.err(format!("unexpected {}", self.describe()));
        }
        Ok(StMach {
            name,
            env: std::mem::take(&mut self.env),
            init,
            finals,
            nodes,
            transs,
        })
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        if self.eat_kw("int") {
            return Ok(Type::Int);
        }
        if self.eat_kw("bool") {
            return Ok(Type::Bool);
        }
        if self.eat_kw("seq") {
            self.expect_sym("(")?;
            let elem = self.ty()?;
            self.expect_sym(")")?;
            return Ok(Type::seq(elem));
        }
        let at = self.here();
        let name = self.ident()?;
        match self.env.types.get(&name) {
            Some(t) => Ok(t.clone()),
            None => Err(ParseError::Syntax {
                line: at.0,
                col: at.1,
                message: format!("unknown type `{name}`"),
            }),
        }
    }

    fn action(&mut self) -> Result<ActionSyn, ParseError> {
        let first = self.action_item()?;
        if self.eat_sym(";") {
            let rest = self.action()?;
            Ok(ActionSyn::seq(first, rest))
        } else {
            Ok(first)
        }
    }

    fn action_item(&mut self) -> Result<ActionSyn, ParseError> {
        if self.eat_kw("skip") {
            return Ok(ActionSyn::Skip);
        }
        if self.eat_kw("if") {
            let at = self.here();
            let cond = self.expr()?;
            if let Err(e) = self.env.check_against(&cond, &Type::Bool) {
                return self.type_err(at, e);
            }
            self.expect_kw("then")?;
            let then_branch = self.action()?;
            self.expect_kw("else")?;
            let else_branch = self.action()?;
            self.expect_kw("end")?;
            return Ok(ActionSyn::If {
                cond,
                then_branch: Box::new(then_branch),
                else_branch: Box::new(else_branch),
            });
        }
        if self.at_ident() && matches!(self.peek_at(1), Tok::Sym(":=")) {
            let at = self.here();
            let var = self.ident()?;
            self.bump();
            let vat = self.here();
            let value = self.expr()?;
            let Some(t) = self.env.vars.get(&var).cloned() else {
                return self.type_err(
                    at,
                    TypeError {
                        subterm: var.clone(),
                        message: "assignment target is not a state variable".into(),
                    },
                );
            };
            if let Err(e) = self.env.check_against(&value, &t) {
                return self.type_err(vat, e);
            }
            return Ok(ActionSyn::Assign { var, value });
        }
        Ok(ActionSyn::Event { event: self.event()? })
    }

    fn event(&mut self) -> Result<EventSyn, ParseError> {
        let at = self.here();
        let chan = self.ident()?;
        let payload = match self.env.events.get(&chan) {
            Some(p) => p.clone(),
            None => {
                return self.type_err(
                    at,
                    TypeError {
                        subterm: chan,
                        message: "unknown event".into(),
                    },
                );
            }
        };
        let mismatch = |msg: &str| TypeError {
            subterm: chan.clone(),
            message: msg.to_string(),
        };
        if self.eat_sym("?") {
            let vat = self.here();
            let var = self.ident()?;
            let Some(pt) = payload else {
                return self.type_err(at, mismatch("event carries no value"));
            };
            match self.env.vars.get(&var) {
                Some(vt) if *vt == pt => Ok(EventSyn::Input { chan, var }),
                Some(vt) => self.type_err(
                    vat,
                    TypeError {
                        subterm: var.clone(),
                        message: format!("expected {pt}, found {vt}"),
                    },
                ),
                None => self.type_err(
                    vat,
                    TypeError {
                        subterm: var.clone(),
                        message: "input target is not a state variable".into(),
                    },
                ),
            }
        } else if self.eat_sym("!") {
            let vat = self.here();
            let value = self.expr()?;
            let Some(pt) = payload else {
                return self.type_err(at, mismatch("event carries no value"));
            };
            if let Err(e) = self.env.check_against(&value, &pt) {
                return self.type_err(vat, e);
            }
            Ok(EventSyn::Output { chan, value })
        } else {
            if payload.is_some() {
                return self.type_err(at, mismatch("event carries a value; use `?` or `!`"));
            }
            Ok(EventSyn::Simple { chan })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.implication()
    }

    fn implication(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.disjunction()?;
        if self.eat_sym("=>") {
            let rhs = self.implication()?;
            return Ok(Expr::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.eat_kw("or") {
            lhs = Expr::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.negation()?;
        while self.eat_kw("and") {
            lhs = Expr::and(lhs, self.negation()?);
        }
        Ok(lhs)
    }

    fn negation(&mut self) -> Result<Expr, ParseError> {
        if self.eat_kw("not") {
            return Ok(Expr::not(self.negation()?));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Sym("=") => Some((BinOp::Eq, false)),
            Tok::Sym("!=") => Some((BinOp::Ne, false)),
            Tok::Sym("<") => Some((BinOp::Lt, false)),
            Tok::Sym("<=") => Some((BinOp::Le, false)),
            Tok::Sym(">") => Some((BinOp::Lt, true)),
            Tok::Sym(">=") => Some((BinOp::Le, true)),
            _ => None,
        };
        match op {
            Some((bop, swap)) => {
                self.bump();
                let rhs = self.additive()?;
                Ok(if swap {
                    Expr::bin(bop, rhs, lhs)
                } else {
                    Expr::bin(bop, lhs, rhs)
                })
            }
            None => Ok(lhs),
        }
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            if self.eat_sym("+") {
                lhs = Expr::bin(BinOp::Add, lhs, self.multiplicative()?);
            } else if self.eat_sym("-") {
                lhs = Expr::bin(BinOp::Sub, lhs, self.multiplicative()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.atom()?;
        while self.eat_sym("*") {
            lhs = Expr::bin(BinOp::Mul, lhs, self.atom()?);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::int(v))
            }
            Tok::Sym("-") => {
                self.bump();
                match self.peek().clone() {
                    Tok::Int(v) => {
                        self.bump();
                        Ok(Expr::int(-v))
                    }
                    _ => Ok(Expr::bin(BinOp::Sub, Expr::int(0), self.atom()?)),
                }
            }
            Tok::Sym("<>") => {
                self.bump();
                Ok(Expr::EmptySeq)
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::bool(s == "true"))
            }
            Tok::Ident(_) if self.at_ident() => {
                let name = self.ident()?;
                if self.eat_sym("(") {
                    let mut args = Vec::new();
                    if !self.is_sym(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_sym(",") {
                                break;
                            }
                        }
                    }
                    self.expect_sym(")")?;
                    let e = Expr::app(&name, args);
                    if let Err(err) = self.env.type_check(&e) {
                        return self.type_err(at, err);
                    }
                    return Ok(e);
                }
                if self.env.vars.contains_key(&name) {
                    Ok(Expr::var(&name))
                } else if self.env.consts.contains_key(&name) {
                    Ok(Expr::constant(&name))
                } else if let Some(Type::Enum { name: ty, .. }) = self.env.enum_of_ctor(&name) {
                    Ok(Expr::enum_lit(ty, &name))
                } else {
                    self.type_err(
                        at,
                        TypeError {
                            subterm: name,
                            message: "unknown identifier".into(),
                        },
                    )
                }
            }
            _ => self.err(format!("expected an expression, found {}", self.describe())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_machine() {
        let m = parse("statemachine M vars events states s initial s finals transitions").unwrap();
        assert_eq!(m.name, "M");
        assert_eq!(m.nodes, vec![NodeDecl::plain("s")]);
        assert_eq!(m.init, "s");
        assert!(m.finals.is_empty() && m.transs.is_empty());
    }

    #[test]
    fn undeclared_target_still_parses() {
        let m = parse("statemachine M vars events states A initial A finals transitions t1 from A to B").unwrap();
        assert_eq!(m.transs, vec![TransDecl::plain("t1", "A", "B")]);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse("statemachine M\nvars x int").unwrap_err();
        match err {
            ParseError::Syntax { line, col, .. } => assert_eq!((line, col), (2, 8)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_errors_are_reported() {
        let src = "statemachine M vars x : int events states A initial A finals transitions t from A to A condition x";
        assert!(matches!(parse(src), Err(ParseError::Type { .. })));
        let src = "statemachine M vars x : int events e states A entry e?x initial A finals transitions";
        assert!(matches!(parse(src), Err(ParseError::Type { .. })));
    }

    #[test]
    fn duplicates_and_reserved_names() {
        assert!(matches!(
            parse("statemachine M vars x : int x : bool events states A initial A finals transitions"),
            Err(ParseError::Duplicate { .. })
        ));
        assert!(matches!(
            parse("statemachine M vars actv : int events states A initial A finals transitions"),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn expressions_and_actions() {
        let src = "enum C = red | green\n\
                   statemachine M consts k : int = 3 vars x : int c : C events e : int go\n\
                   states A entry if x >= k then x := x - 1 else e!(x * 2) ; go end\n\
                   initial A finals transitions t from A to A condition not c = red and -1 < x";
        let m = parse(src).unwrap();
        assert_eq!(m.env.const_values.get("k"), Some(&Expr::int(3)));
        let ActionSyn::If { cond, .. } = &m.nodes[0].nentry else {
            panic!()
        };
        assert_eq!(*cond, Expr::bin(BinOp::Le, Expr::constant("k"), Expr::var("x")));
        let c = &m.transs[0].cond;
        assert_eq!(c.to_source(), "not c = red and -1 < x");
    }
}
