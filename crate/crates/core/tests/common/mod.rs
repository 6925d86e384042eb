//! Generators and checks shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use rcverify::ast::{subst_compose, BinOp, Expr, QualName, Subst, Type, TypeEnv};
use rcverify::ir::{alternation, assume, do_iter, frame_extend, gcmd, Branch, RProg};
use rcverify::model::{ActionSyn, EventSyn, NodeDecl, StMach, TransDecl};
use rcverify::oracle::domain::{DomainSpec, Valuation};
use rcverify::oracle::equiv;
use rcverify::oracle::sim::{alphabet, Sim};
use rcverify::rewrite::{apply_subst, simplify_traced, RuleId, DEFAULT_BUDGET};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn models_dir() -> PathBuf {
    repo_root().join("models")
}

/// Well-formed machines of the regression corpus, sorted by file name.
pub fn corpus() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(models_dir())
        .expect("models directory")
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "rcsm"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

/// Domain files shipped with the corpus.
pub fn shipped_domains() -> Vec<(String, DomainSpec)> {
    let dir = models_dir().join("domains");
    let mut out: Vec<(String, DomainSpec)> = std::fs::read_dir(&dir)
        .expect("domains directory")
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| {
            let d: DomainSpec = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
            (p.file_name().unwrap().to_string_lossy().into_owned(), d)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

/// Draws `n` values from `strategy` deterministically.
pub fn sample<S: Strategy>(strategy: &S, n: usize, runner: &mut TestRunner) -> Vec<S::Value> {
    (0..n)
        .map(|_| strategy.new_tree(runner).expect("strategy").current())
        .collect()
}

// ---- reactive programs --------------------------------------------------

/// Variables `x, y : int`, `b : bool`; channels `a`, `c`, `o : int`, `i : int`.
pub fn law_env() -> TypeEnv {
    let mut env = TypeEnv::default();
    env.vars.insert("x".into(), Type::Int);
    env.vars.insert("y".into(), Type::Int);
    env.vars.insert("b".into(), Type::Bool);
    env.events.insert("a".into(), None);
    env.events.insert("c".into(), None);
    env.events.insert("o".into(), Some(Type::Int));
    env.events.insert("i".into(), Some(Type::Int));
    env
}

/// Three values per carrier.
pub fn law_domain() -> DomainSpec {
    DomainSpec::default().with_ints(0, 2)
}

fn q(n: &str) -> QualName {
    QualName::plain(n)
}

pub fn int_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0i64..=2).prop_map(Expr::int),
        Just(Expr::var("x")),
        Just(Expr::var("y"))
    ];
    leaf.prop_recursive(2, 4, 2, |inner| {
        (inner.clone(), inner).prop_map(|(l, r)| Expr::bin(BinOp::Add, l, r))
    })
}

pub fn bool_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(Expr::bool),
        Just(Expr::var("b")),
        (int_expr(), int_expr()).prop_map(|(l, r)| Expr::eq(l, r)),
        (int_expr(), int_expr()).prop_map(|(l, r)| Expr::bin(BinOp::Lt, l, r)),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::not),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::and(l, r)),
            (inner.clone(), inner).prop_map(|(l, r)| Expr::or(l, r)),
        ]
    })
}

pub fn subst() -> impl Strategy<Value = Subst> {
    (
        proptest::option::of(int_expr()),
        proptest::option::of(int_expr()),
        proptest::option::of(bool_expr()),
    )
        .prop_map(|(x, y, b)| {
            let mut pairs = Vec::new();
            if let Some(e) = x {
                pairs.push((q("x"), e));
            }
            if let Some(e) = y {
                pairs.push((q("y"), e));
            }
            if let Some(e) = b {
                pairs.push((q("b"), e));
            }
            Subst::from_pairs(pairs)
        })
}

/// A single communication.
pub fn event_prog() -> impl Strategy<Value = RProg> {
    prop_oneof![
        Just(RProg::simple("a")),
        Just(RProg::simple("c")),
        int_expr().prop_map(|v| RProg::out("o", v)),
        prop_oneof![Just("x"), Just("y")].prop_map(|v| RProg::input("i", q(v))),
    ]
}

pub fn prog() -> impl Strategy<Value = RProg> {
    let leaf = prop_oneof![
        4 => event_prog(),
        2 => subst().prop_map(RProg::assigns),
        1 => Just(RProg::SkipR),
        1 => Just(RProg::StopR),
        1 => Just(RProg::Miracle),
        1 => Just(RProg::Chaos),
    ];
    // Depth at most 6 including the leaves.
    leaf.prop_recursive(5, 24, 3, |inner| {
        prop_oneof![
            4 => (inner.clone(), inner.clone()).prop_map(|(p, r)| RProg::seq(p, r)),
            2 => (bool_expr(), inner.clone()).prop_map(|(b, p)| RProg::guard(b, p)),
            2 => (inner.clone(), bool_expr(), inner.clone()).prop_map(|(p, b, r)| RProg::cond(p, b, r)),
            3 => proptest::collection::vec(inner.clone(), 0..3).prop_map(RProg::ext),
            1 => proptest::collection::vec(inner.clone(), 1..3).prop_map(RProg::nd),
            1 => bool_expr().prop_map(assume),
            1 => proptest::collection::vec((bool_expr(), inner.clone()), 0..3).prop_map(alternation),
            1 => proptest::collection::vec((bool_expr(), event_prog(), inner.clone()), 1..3).prop_map(|bs| {
                do_iter(bs.into_iter().map(|(g, e, p)| (g, RProg::seq(e, p))).collect()).expect("event-led bodies are productive")
            }),
        ]
    })
    .prop_filter("nesting depth at most 6", |p| nesting(p) <= 6)
}

/// Nesting depth of a program; leaves have depth 1.
pub fn nesting(p: &RProg) -> usize {
    1 + p.children().into_iter().map(nesting).max().unwrap_or(0)
}

/// Inputs for one round of law instances.
#[derive(Clone, Debug)]
pub struct LawSample {
    pub p: RProg,
    pub q: RProg,
    pub sigma: Subst,
    pub rho: Subst,
    pub b1: Expr,
    pub b2: Expr,
    pub e1: RProg,
    pub e2: RProg,
    pub v: Expr,
}

pub fn law_sample() -> impl Strategy<Value = LawSample> {
    (
        prog(),
        prog(),
        subst(),
        subst(),
        bool_expr(),
        bool_expr(),
        event_prog(),
        event_prog(),
        int_expr(),
    )
        .prop_map(|(p, q, sigma, rho, b1, b2, e1, e2, v)| LawSample {
            p,
            q,
            sigma,
            rho,
            b1,
            b2,
            e1,
            e2,
            v,
        })
}

#[derive(Clone, Debug)]
pub struct LawFailure {
    pub law: String,
    pub lhs: RProg,
    pub rhs: RProg,
    pub witness: String,
}

/// Checks every catalogued law on one sample. Returns the failed
/// instances and the rewrite rules exercised by simplification.
pub fn check_laws(s: &LawSample, depth: usize) -> (Vec<LawFailure>, BTreeSet<RuleId>, usize) {
    let env = law_env();
    let dom = law_domain();
    let asg = |sig: &Subst| RProg::assigns(sig.clone());
    let sig = &s.sigma;
    let mut instances: Vec<(&str, RProg, RProg)> = vec![
        (
            "Miracle ; P = Miracle",
            RProg::seq(RProg::Miracle, s.p.clone()),
            RProg::Miracle,
        ),
        (
            "⟨σ⟩ ; P = σ†P",
            RProg::seq(asg(sig), s.p.clone()),
            apply_subst(sig, &s.p),
        ),
        (
            "(e1 □ e2) ; P = (e1 ; P) □ (e2 ; P)",
            RProg::seq(RProg::ext(vec![s.e1.clone(), s.e2.clone()]), s.p.clone()),
            RProg::ext(vec![
                RProg::seq(s.e1.clone(), s.p.clone()),
                RProg::seq(s.e2.clone(), s.p.clone()),
            ]),
        ),
        ("if fi = Chaos", alternation(vec![]), RProg::Chaos),
        (
            "if b → P fi = P ◁ b ▷ Chaos",
            RProg::Alternation {
                branches: vec![Branch::new(s.b1.clone(), s.p.clone())],
            },
            RProg::cond(s.p.clone(), s.b1.clone(), RProg::Chaos),
        ),
        (
            "[b1 ∨ b2] ; if b1 → P | b2 → Q fi = (b1 → P) ⊓ (b2 → Q)",
            RProg::seq(
                assume(Expr::or(s.b1.clone(), s.b2.clone())),
                RProg::Alternation {
                    branches: vec![
                        Branch::new(s.b1.clone(), s.p.clone()),
                        Branch::new(s.b2.clone(), s.q.clone()),
                    ],
                },
            ),
            RProg::nd(vec![gcmd(s.b1.clone(), s.p.clone()), gcmd(s.b2.clone(), s.q.clone())]),
        ),
        (
            "σ†[b] = [σ†b] ; ⟨σ⟩",
            RProg::seq(asg(sig), assume(s.b1.clone())),
            RProg::seq(assume(sig.apply(&s.b1)), asg(sig)),
        ),
        (
            "σ†(P ; Q) = σ†P ; Q",
            RProg::seq(asg(sig), RProg::seq(s.p.clone(), s.q.clone())),
            RProg::seq(apply_subst(sig, &s.p), s.q.clone()),
        ),
        (
            "σ†⟨ρ⟩ = ⟨ρ ∘ σ⟩",
            RProg::seq(asg(sig), asg(&s.rho)),
            asg(&subst_compose(&s.rho, sig)),
        ),
        (
            "σ†(P □ Q) = σ†P □ σ†Q",
            RProg::seq(asg(sig), RProg::ext(vec![s.p.clone(), s.q.clone()])),
            RProg::ext(vec![apply_subst(sig, &s.p), apply_subst(sig, &s.q)]),
        ),
        (
            "σ†(b ▷ P) = σ†b ▷ σ†P",
            RProg::seq(asg(sig), RProg::guard(s.b1.clone(), s.p.clone())),
            RProg::guard(sig.apply(&s.b1), apply_subst(sig, &s.p)),
        ),
        (
            "σ†(e!v) = e!(σ†v) ; ⟨σ⟩",
            RProg::seq(asg(sig), RProg::out("o", s.v.clone())),
            RProg::seq(RProg::out("o", sig.apply(&s.v)), asg(sig)),
        ),
        (
            "σ†(P ◁ b ▷ Q) = σ†P ◁ σ†b ▷ σ†Q",
            RProg::seq(asg(sig), RProg::cond(s.p.clone(), s.b1.clone(), s.q.clone())),
            RProg::cond(apply_subst(sig, &s.p), sig.apply(&s.b1), apply_subst(sig, &s.q)),
        ),
        (
            "σ†(e?x) per the input law",
            RProg::seq(asg(sig), RProg::input("i", q("x"))),
            apply_subst(sig, &RProg::input("i", q("x"))),
        ),
    ];
    let simplified = simplify_traced(&s.p, DEFAULT_BUDGET).expect("simplification terminates");
    let rules: BTreeSet<RuleId> = simplified.trace.iter().map(|t| t.rule).collect();
    instances.push(("simplify(P) = P", s.p.clone(), simplified.result));

    let mut failures = Vec::new();
    let checked = instances.len() + 3;
    for (law, lhs, rhs) in instances {
        match equiv(&lhs, &rhs, &env, &dom, depth) {
            Ok(None) => {}
            Ok(Some(d)) => failures.push(LawFailure {
                law: law.into(),
                lhs,
                rhs,
                witness: format!("{d:?}"),
            }),
            Err(e) => failures.push(LawFailure {
                law: law.into(),
                lhs,
                rhs,
                witness: format!("oracle error: {e}"),
            }),
        }
    }

    // Frame extension: structural distribution plus semantic agreement
    // with the unframed program under the namespace bijection.
    let fr = |p: &RProg| frame_extend(p).expect("law programs never mention actv");
    let seq_pq = RProg::seq(s.p.clone(), s.q.clone());
    if fr(&seq_pq) != RProg::seq(fr(&s.p), fr(&s.q)) {
        failures.push(LawFailure {
            law: "r:(P ; Q) = r:P ; r:Q".into(),
            lhs: fr(&seq_pq),
            rhs: RProg::seq(fr(&s.p), fr(&s.q)),
            witness: "structural".into(),
        });
    }
    let inp = RProg::input("i", q("x"));
    if fr(&inp) != RProg::input("i", QualName::framed("x")) {
        failures.push(LawFailure {
            law: "r:(e?x) = e?(r:x)".into(),
            lhs: fr(&inp),
            rhs: inp,
            witness: "structural".into(),
        });
    }
    let a = RProg::assign(q("x"), s.v.clone());
    let lifted = s.v.rename_vars(&|v: &QualName| QualName::framed(v.name.clone()));
    if fr(&a) != RProg::assign(QualName::framed("x"), lifted.clone()) {
        failures.push(LawFailure {
            law: "r:(x := v) = r:x := r:v".into(),
            lhs: fr(&a),
            rhs: RProg::assign(QualName::framed("x"), lifted),
            witness: "structural".into(),
        });
    }
    if let Some(w) = frame_mismatch(&s.p, &env, &dom, depth) {
        failures.push(LawFailure {
            law: "r:P behaves as P on the r namespace".into(),
            lhs: fr(&s.p),
            rhs: s.p.clone(),
            witness: w,
        });
    }
    (failures, rules, checked)
}

/// `r:P` followed by swapping each variable with its framed copy ends in
/// the same state as `P`, when both start from a state holding both copies
/// with equal values; events and refusals must agree throughout.
fn frame_mismatch(p: &RProg, env: &TypeEnv, dom: &DomainSpec, depth: usize) -> Option<String> {
    let framed = frame_extend(p).ok()?;
    let vars: Vec<QualName> = p.variables().into_iter().collect();
    let swap = Subst::from_pairs(vars.iter().flat_map(|v| {
        let f = QualName::framed(v.name.clone());
        [(v.clone(), Expr::qvar(f.clone())), (f, Expr::qvar(v.clone()))]
    }));
    let lhs = RProg::seq(framed, RProg::assigns(swap));
    let sigma = alphabet(env, dom, &[p]);
    for c in dom.const_valuations(env) {
        let sim = Sim::new(env, dom, c.clone());
        for s in dom.valuations(env, &vars).ok()? {
            let mut both: Valuation = s.clone();
            both.extend(s.iter().map(|(k, v)| (QualName::framed(k.name.clone()), v.clone())));
            match sim.distinguish_from(p, &lhs, &both, &sigma, depth) {
                Ok(None) => {}
                Ok(Some((o, _))) => return Some(format!("from {s:?}: {o}")),
                Err(e) => return Some(format!("oracle error: {e}")),
            }
        }
    }
    None
}

// ---- machines -----------------------------------------------------------

pub fn machine_env() -> TypeEnv {
    let mut env = TypeEnv::default();
    env.vars.insert("v".into(), Type::Int);
    env.vars.insert("flag".into(), Type::Bool);
    env.events.insert("go".into(), None);
    env.events.insert("inp".into(), Some(Type::Int));
    env.events.insert("out".into(), Some(Type::Int));
    env
}

fn m_action() -> impl Strategy<Value = ActionSyn> {
    let item = prop_oneof![
        3 => Just(ActionSyn::Skip),
        1 => (0i64..3).prop_map(|k| ActionSyn::Assign { var: "v".into(), value: Expr::int(k) }),
        1 => Just(ActionSyn::Assign { var: "v".into(), value: Expr::bin(BinOp::Add, Expr::var("v"), Expr::int(1)) }),
        1 => Just(ActionSyn::Assign { var: "flag".into(), value: Expr::not(Expr::var("flag")) }),
        1 => Just(ActionSyn::Event { event: EventSyn::Output { chan: "out".into(), value: Expr::var("v") } }),
        1 => Just(ActionSyn::If {
            cond: Expr::var("flag"),
            then_branch: Box::new(ActionSyn::Assign { var: "v".into(), value: Expr::int(0) }),
            else_branch: Box::new(ActionSyn::Skip),
        }),
    ];
    proptest::collection::vec(item, 1..3).prop_map(|items| {
        items
            .into_iter()
            .filter(|a| !a.is_skip())
            .reduce(ActionSyn::seq)
            .unwrap_or(ActionSyn::Skip)
    })
}

fn m_trigger() -> impl Strategy<Value = Option<EventSyn>> {
    prop_oneof![
        Just(None),
        Just(Some(EventSyn::Simple { chan: "go".into() })),
        Just(Some(EventSyn::Input {
            chan: "inp".into(),
            var: "v".into()
        })),
        Just(Some(EventSyn::Output {
            chan: "out".into(),
            value: Expr::bin(BinOp::Add, Expr::var("v"), Expr::int(1))
        })),
    ]
}

fn m_cond() -> impl Strategy<Value = Expr> {
    prop_oneof![
        3 => Just(Expr::bool(true)),
        1 => (0i64..4).prop_map(|k| Expr::bin(BinOp::Lt, Expr::var("v"), Expr::int(k))),
        1 => Just(Expr::var("flag")),
        1 => Just(Expr::not(Expr::var("flag"))),
    ]
}

/// Random well-formed machines: distinct node names, a non-final initial
/// node, and transitions from non-final to declared nodes.
pub fn wf_machine() -> impl Strategy<Value = StMach> {
    (1usize..6).prop_flat_map(|k| {
        let nodes = proptest::collection::vec((m_action(), m_action()), k);
        let init = 0..k;
        let finals = proptest::collection::vec(any::<bool>(), k);
        let transs = proptest::collection::vec((0..k, 0..k, m_trigger(), m_cond(), m_action()), 0..8);
        (nodes, init, finals, transs).prop_map(move |(nodes, init, finals, transs)| {
            let name = |i: usize| format!("N{i}");
            let finals: Vec<String> = (0..k).filter(|i| finals[*i] && *i != init).map(name).collect();
            let nodes: Vec<NodeDecl> = nodes
                .into_iter()
                .enumerate()
                .map(|(i, (nentry, nexit))| NodeDecl {
                    nname: name(i),
                    nentry,
                    nexit,
                })
                .collect();
            let transs = transs
                .into_iter()
                .enumerate()
                .filter(|(_, (src, ..))| !finals.contains(&name(*src)))
                .map(|(j, (src, tgt, trig, cond, act))| TransDecl {
                    tid: format!("t{j}"),
                    src: name(src),
                    tgt: name(tgt),
                    trig,
                    cond,
                    act,
                })
                .collect();
            StMach {
                name: "Gen".into(),
                env: machine_env(),
                init: name(init),
                finals,
                nodes,
                transs,
            }
        })
    })
}
