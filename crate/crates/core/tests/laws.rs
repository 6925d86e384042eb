mod common;

use rcverify::ast::{subst_compose, Expr, QualName};
use rcverify::ir::RProg;
use rcverify::oracle::sim::{alphabet, Sim};
use rcverify::oracle::{equiv, ConstValuation};

#[test]
fn law_instances_preserve_failures() {
    let mut runner = common::runner(64);
    for s in common::sample(&common::law_sample(), 64, &mut runner) {
        let (failures, _, _) = common::check_laws(&s, 6);
        assert!(failures.is_empty(), "{:?}", failures.first());
    }
}

#[test]
fn generated_programs_respect_the_depth_bound() {
    let mut runner = common::runner(200);
    for p in common::sample(&common::prog(), 200, &mut runner) {
        assert!(common::nesting(&p) <= 6);
    }
}

#[test]
fn oracle_separates_basic_programs() {
    let env = common::law_env();
    let dom = common::law_domain();
    let x = QualName::plain("x");
    let y = QualName::plain("y");
    let pairs = [
        (RProg::simple("a"), RProg::simple("c")),
        (RProg::Miracle, RProg::StopR),
        (RProg::Chaos, RProg::StopR),
        (RProg::input("i", x.clone()), RProg::input("i", y)),
        (RProg::assign(x.clone(), Expr::int(1)), RProg::assign(x, Expr::int(2))),
        (
            RProg::ext(vec![RProg::simple("a"), RProg::simple("c")]),
            RProg::nd(vec![RProg::simple("a"), RProg::simple("c")]),
        ),
    ];
    for (p, q) in pairs {
        assert!(equiv(&p, &q, &env, &dom, 4).unwrap().is_some(), "{p:?} vs {q:?}");
    }
}

#[test]
fn wrong_composition_order_is_caught() {
    // ⟨σ⟩ ; ⟨ρ⟩ is ⟨ρ ∘ σ⟩; composing the other way round must be
    // distinguishable on some sample.
    let env = common::law_env();
    let dom = common::law_domain();
    let mut runner = common::runner(100);
    let caught = common::sample(&common::law_sample(), 100, &mut runner)
        .into_iter()
        .any(|s| {
            let lhs = RProg::seq(RProg::assigns(s.sigma.clone()), RProg::assigns(s.rho.clone()));
            let wrong = RProg::assigns(subst_compose(&s.sigma, &s.rho));
            equiv(&lhs, &wrong, &env, &dom, 2).unwrap().is_some()
        });
    assert!(caught);
}

#[test]
fn pairwise_comparison_agrees_with_failure_sets() {
    let env = common::law_env();
    let dom = common::law_domain();
    let mut runner = common::runner(80);
    let mut differing = 0;
    for s in common::sample(&common::law_sample(), 80, &mut runner) {
        let sigma = alphabet(&env, &dom, &[&s.p, &s.q]);
        let vars: Vec<QualName> = s.p.variables().union(&s.q.variables()).cloned().collect();
        let sim = Sim::new(&env, &dom, ConstValuation::new());
        for init in dom.valuations(&env, &vars).unwrap().into_iter().take(4) {
            let fp = sim.failures_from(&s.p, &init, &sigma, 4).unwrap();
            let fq = sim.failures_from(&s.q, &init, &sigma, 4).unwrap();
            let found = sim.distinguish_from(&s.p, &s.q, &init, &sigma, 4).unwrap();
            assert_eq!(fp == fq, found.is_none());
            if let Some((o, left_only)) = found {
                differing += 1;
                assert_eq!(fp.contains(&o), left_only);
                assert_ne!(fp.contains(&o), fq.contains(&o));
            }
        }
    }
    assert!(differing > 0);
}
