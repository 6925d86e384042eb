//! Canonical `.rcsm` text for a machine record. Default transition and node
//! fields are omitted, so `parse(&pretty_print(m)) == m`.

use std::fmt::Write;

use crate::ast::Type;
use crate::model::StMach;

pub fn pretty_print(m: &StMach) -> String {
    let mut out = String::new();
    let env = &m.env;
    for t in env.types.values() {
        match t {
            Type::Enum { name, ctors } => writeln!(out, "enum {name} = {}", ctors.join(" | ")).unwrap(),
            Type::Abstract { name } => writeln!(out, "abstract {name}").unwrap(),
            _ => {}
        }
    }
    for (f, sig) in &env.funs {
        let args: Vec<String> = sig.args.iter().map(|t| t.to_string()).collect();
        writeln!(out, "function {f}({}) : {}", args.join(", "), sig.ret).unwrap();
    }
    if !out.is_empty() {
        out.push('\n');
    }
    writeln!(out, "statemachine {}", m.name).unwrap();
    if !env.consts.is_empty() {
        out.push_str("consts\n");
        for (c, t) in &env.consts {
            match env.const_values.get(c) {
                Some(v) => writeln!(out, "  {c} : {t} = {}", v.to_source()).unwrap(),
                None => writeln!(out, "  {c} : {t}").unwrap(),
            }
        }
    }
    out.push_str("vars\n");
    for (v, t) in &env.vars {
        writeln!(out, "  {v} : {t}").unwrap();
    }
    out.push_str("events\n");
    for (e, t) in &env.events {
        match t {
            Some(t) => writeln!(out, "  {e} : {t}").unwrap(),
            None => writeln!(out, "  {e}").unwrap(),
        }
    }
    out.push_str("states\n");
    for n in &m.nodes {
        write!(out, "  {}", n.nname).unwrap();
        if !n.nentry.is_skip() {
            write!(out, " entry {}", n.nentry.to_source()).unwrap();
        }
        if !n.nexit.is_skip() {
            write!(out, " exit {}", n.nexit.to_source()).unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "initial {}", m.init).unwrap();
    out.push_str("finals");
    for f in &m.finals {
        write!(out, " {f}").unwrap();
    }
    out.push_str("\ntransitions\n");
    for t in &m.transs {
        write!(out, "  {} from {} to {}", t.tid, t.src, t.tgt).unwrap();
        if let Some(trig) = &t.trig {
            write!(out, " trigger {}", trig.to_source()).unwrap();
        }
        if !t.cond.is_true() {
            write!(out, " condition {}", t.cond.to_source()).unwrap();
        }
        if !t.act.is_skip() {
            write!(out, " action {}", t.act.to_source()).unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    #[test]
    fn minimal_machine_is_canonical() {
        let m = parse("statemachine M vars events states s initial s finals transitions").unwrap();
        assert_eq!(
            pretty_print(&m),
            "statemachine M\nvars\nevents\nstates\n  s\ninitial s\nfinals\ntransitions\n"
        );
    }

    #[test]
    fn defaults_are_omitted() {
        let src = "statemachine M vars events e states A B initial A finals B \
                   transitions t from A to B condition true action skip";
        let m = parse(src).unwrap();
        let text = pretty_print(&m);
        assert!(text.contains("  t from A to B\n"));
        assert_eq!(parse(&text).unwrap(), m);
    }
}
