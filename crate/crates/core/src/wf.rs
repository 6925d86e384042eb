//! Well-formedness of machine records and the derived node/transition maps.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NodeDecl, StMach, TransDecl};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Which of the five constraints is broken (1 to 5).
    pub constraint: u8,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "violation ({}) at `{}`: {}",
            self.constraint, self.subject, self.message
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WfReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl WfReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn constraints(&self) -> BTreeSet<u8> {
        self.violations.iter().map(|v| v.constraint).collect()
    }
}

impl fmt::Display for WfReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "well-formed")?;
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("machine is not well-formed: {}", .0.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct IllFormed(pub WfReport);

pub fn check_wf(m: &StMach) -> WfReport {
    let mut report = WfReport::default();
    let mut seen = BTreeSet::new();
    for n in &m.nodes {
        if !seen.insert(n.nname.as_str()) {
            report.violations.push(Violation {
                constraint: 1,
                subject: n.nname.clone(),
                message: "node identifier declared more than once".into(),
            });
        }
    }
    let nnames: BTreeSet<&str> = m.nodes.iter().map(|n| n.nname.as_str()).collect();
    let fnames: BTreeSet<&str> = m.finals.iter().map(String::as_str).collect();
    if !nnames.contains(m.init.as_str()) {
        report.violations.push(Violation {
            constraint: 2,
            subject: m.init.clone(),
            message: "initial node is not declared".into(),
        });
    }
    if fnames.contains(m.init.as_str()) {
        report.violations.push(Violation {
            constraint: 3,
            subject: m.init.clone(),
            message: "initial node is final".into(),
        });
    }
    for t in &m.transs {
        if !nnames.contains(t.src.as_str()) {
            report.violations.push(Violation {
                constraint: 4,
                subject: t.tid.clone(),
                message: format!("source `{}` is not declared", t.src),
            });
        } else if fnames.contains(t.src.as_str()) {
            report.violations.push(Violation {
                constraint: 4,
                subject: t.tid.clone(),
                message: format!("source `{}` is a final node", t.src),
            });
        }
        if !nnames.contains(t.tgt.as_str()) {
            report.violations.push(Violation {
                constraint: 5,
                subject: t.tid.clone(),
                message: format!("target `{}` is not declared", t.tgt),
            });
        }
    }

    let mut tids = BTreeSet::new();
    for t in &m.transs {
        if !tids.insert(t.tid.as_str()) {
            report
                .warnings
                .push(format!("transition identifier `{}` is used more than once", t.tid));
        }
    }
    for f in &m.finals {
        if !nnames.contains(f.as_str()) {
            report.warnings.push(format!("final `{f}` names no declared node"));
        }
    }
    if report.violations.is_empty() {
        let reachable = reachable_nodes(m);
        for n in &m.nodes {
            if !reachable.contains(n.nname.as_str()) {
                report
                    .warnings
                    .push(format!("node `{}` is unreachable from `{}`", n.nname, m.init));
            }
        }
    }
    report
}

fn reachable_nodes(m: &StMach) -> BTreeSet<&str> {
    let mut seen = BTreeSet::from([m.init.as_str()]);
    let mut queue = VecDeque::from([m.init.as_str()]);
    while let Some(n) = queue.pop_front() {
        for t in m.transs.iter().filter(|t| t.src == n) {
            if seen.insert(t.tgt.as_str()) {
                queue.push_back(t.tgt.as_str());
            }
        }
    }
    seen
}

/// Total views over a well-formed machine.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineViews {
    pub nnames: BTreeSet<String>,
    pub fnames: BTreeSet<String>,
    pub nmap: BTreeMap<String, NodeDecl>,
    /// Outgoing transitions per node, in declaration order.
    pub tmap: BTreeMap<String, Vec<TransDecl>>,
    pub ninit: NodeDecl,
    /// Non-final nodes in declaration order.
    pub inters: Vec<NodeDecl>,
    /// All node names in declaration order.
    pub order: Vec<String>,
}

pub fn views(m: &StMach) -> Result<MachineViews, IllFormed> {
    let report = check_wf(m);
    if !report.is_ok() {
        return Err(IllFormed(report));
    }
    let nnames: BTreeSet<String> = m.nodes.iter().map(|n| n.nname.clone()).collect();
    let fnames: BTreeSet<String> = m.finals.iter().filter(|f| nnames.contains(*f)).cloned().collect();
    let nmap: BTreeMap<String, NodeDecl> = m.nodes.iter().map(|n| (n.nname.clone(), n.clone())).collect();
    let tmap = m
        .nodes
        .iter()
        .map(|n| {
            (
                n.nname.clone(),
                m.transs.iter().filter(|t| t.src == n.nname).cloned().collect(),
            )
        })
        .collect();
    let ninit = nmap[&m.init].clone();
    let inters = m.nodes.iter().filter(|n| !fnames.contains(&n.nname)).cloned().collect();
    Ok(MachineViews {
        nnames,
        fnames,
        nmap,
        tmap,
        ninit,
        inters,
        order: m.nodes.iter().map(|n| n.nname.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn machine(body: &str) -> StMach {
        parse(&format!("statemachine M vars events e {body}")).unwrap()
    }

    #[test]
    fn one_node_views() {
        let m = machine("states s initial s finals transitions");
        assert!(check_wf(&m).is_ok());
        let v = views(&m).unwrap();
        assert_eq!(v.inters.len(), 1);
        assert_eq!(v.tmap["s"], Vec::<TransDecl>::new());
        assert_eq!(v.ninit.nname, "s");
    }

    #[test]
    fn each_constraint_is_detected() {
        let cases = [
            ("states A A initial A finals transitions", 1),
            ("states A initial B finals transitions", 2),
            ("states A initial A finals A transitions", 3),
            ("states A F initial A finals F transitions t from F to A", 4),
            ("states A initial A finals transitions t from A to Z", 5),
        ];
        for (body, c) in cases {
            let r = check_wf(&machine(body));
            assert!(r.constraints().contains(&c), "{body}: {r}");
            assert!(views(&machine(body)).is_err());
        }
    }

    #[test]
    fn warnings_do_not_reject() {
        let m = machine("states A B initial A finals transitions t from A to A trigger e t from A to A");
        let r = check_wf(&m);
        assert!(r.is_ok());
        assert_eq!(r.warnings.len(), 2);
    }
}
