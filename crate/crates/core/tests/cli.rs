mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use rcverify::cli::{run, EXIT_ILL_FORMED, EXIT_OK, EXIT_REFUTED, EXIT_RESIDUAL, EXIT_USAGE};
use rcverify::oracle::ReplayTrace;
use rcverify::verify::smt;

fn model(name: &str) -> PathBuf {
    common::models_dir().join(name)
}

fn rc(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("rcverify").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn check_accepts_the_corpus() {
    for (name, _) in common::corpus() {
        let (code, out, _) = rc(&["check", p(&model(&name))]);
        assert_eq!(code, EXIT_OK, "{name}: {out}");
    }
}

#[test]
fn check_reports_each_constraint() {
    for (file, k) in [
        ("bad_duplicate_node.rcsm", 1),
        ("bad_init.rcsm", 2),
        ("bad_init_final.rcsm", 3),
        ("bad_source.rcsm", 4),
        ("bad_target.rcsm", 5),
    ] {
        let (code, out, _) = rc(&["check", p(&model("bad").join(file))]);
        assert_eq!(code, EXIT_ILL_FORMED, "{file}");
        assert!(out.contains(&format!("violation ({k})")), "{file}: {out}");
    }
}

#[test]
fn usage_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let garbage = dir.path().join("garbage.rcsm");
    std::fs::write(&garbage, "statemachine {").unwrap();
    assert_eq!(rc(&["check", p(&garbage)]).0, EXIT_ILL_FORMED);
    assert_eq!(rc(&["check", p(&dir.path().join("missing.rcsm"))]).0, EXIT_USAGE);
    assert_eq!(rc(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(rc(&["verify", p(&model("counter.rcsm"))]).0, EXIT_USAGE);
    assert_eq!(
        rc(&["verify", "--property", "liveness", p(&model("counter.rcsm"))]).0,
        EXIT_USAGE
    );
    assert_eq!(
        rc(&["simulate", "--int-range", "3..1", p(&model("counter.rcsm"))]).0,
        EXIT_USAGE
    );
    let (code, out, _) = rc(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("simulate"));
}

#[test]
fn compile_matches_golden_program() {
    let (code, out, _) = rc(&["compile", p(&model("gas_analysis.rcsm"))]);
    assert_eq!(code, EXIT_OK);
    let golden =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/gas_analysis.program.txt"))
            .unwrap();
    assert_eq!(out.trim_end(), golden.trim_end());
    let (code, json, _) = rc(&["--format", "json", "compile", p(&model("gas_analysis.rcsm"))]);
    assert_eq!(code, EXIT_OK);
    let _: rcverify::ir::RProg = serde_json::from_str(&json).unwrap();
}

#[test]
fn simplify_lists_every_intermediate_node() {
    let (code, out, _) = rc(&["simplify", p(&model("gas_analysis.rcsm"))]);
    assert_eq!(code, EXIT_OK);
    for node in ["InitState", "NoGas", "Analysis", "GasDetected", "Reading"] {
        assert!(
            out.lines().any(|l| l.starts_with(&format!("{node}:"))),
            "{node} missing from\n{out}"
        );
    }
    let (_, json, _) = rc(&["--format", "json", "simplify", p(&model("gas_analysis.rcsm"))]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 5);
}

#[test]
fn verify_exit_codes() {
    assert_eq!(
        rc(&["verify", "--property", "deadlock", p(&model("gas_analysis.rcsm"))]).0,
        EXIT_OK
    );
    assert_eq!(
        rc(&["verify", "--property", "deadlock", p(&model("counter.rcsm"))]).0,
        EXIT_REFUTED
    );
    assert_eq!(
        rc(&["verify", "--property", "invariant:x <= 5", p(&model("counter.rcsm"))]).0,
        EXIT_RESIDUAL
    );
    assert_eq!(
        rc(&["verify", "--property", "deadlock", p(&model("bad/bad_target.rcsm"))]).0,
        EXIT_ILL_FORMED
    );
}

#[test]
fn verify_json_report() {
    let (code, json, _) = rc(&[
        "--format",
        "json",
        "verify",
        "--property",
        "deadlock",
        p(&model("gas_analysis_3status.rcsm")),
    ]);
    assert_eq!(code, EXIT_REFUTED);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["status"], "Refuted");
    let obs = v["obligations"].as_array().unwrap();
    assert_eq!(obs.len(), 6);
    let analysis = obs
        .iter()
        .find(|o| o["node"] == "Analysis" && o["kind"] == "node_preserves")
        .unwrap();
    assert_eq!(analysis["verdict"], "invalid");
    assert!(analysis["witness"].as_object().unwrap().values().any(|v| v == "gasU"));
}

#[test]
fn verify_writes_scripts_for_open_obligations() {
    let dir = tempfile::tempdir().unwrap();
    let (code, ..) = rc(&[
        "verify",
        "--property",
        "deadlock",
        "--smt-dir",
        p(dir.path()),
        p(&model("thermostat.rcsm")),
    ]);
    assert_eq!(code, EXIT_REFUTED);
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);
}

#[test]
fn emit_smt_writes_valid_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let (code, ..) = rc(&[
        "emit-smt",
        "--property",
        "deadlock",
        "--out",
        p(dir.path()),
        p(&model("gas_analysis.rcsm")),
    ]);
    assert_eq!(code, EXIT_OK);
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        smt::validate(&std::fs::read_to_string(&path).unwrap()).unwrap();
        names.push(path.file_name().unwrap().to_string_lossy().into_owned());
    }
    names.sort();
    assert_eq!(names.len(), 6);
    assert!(
        names.contains(&"GasAnalysis_init_InitState.smt2".to_string()),
        "{names:?}"
    );
    assert!(names.contains(&"GasAnalysis_Analysis.smt2".to_string()), "{names:?}");
}

#[test]
fn simulate_saves_and_replays_deadlocks() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let input = model("gas_analysis_3status.rcsm");
    let (code, out, _) = rc(&["simulate", "--trace-out", p(&trace), p(&input)]);
    assert_eq!(code, EXIT_REFUTED);
    assert!(out.starts_with("deadlock in Analysis"), "{out}");
    let (code, out, _) = rc(&["simulate", "--replay", p(&trace), p(&input)]);
    assert_eq!(code, EXIT_REFUTED);
    assert_eq!(out.trim(), "replayed trace reaches a deadlock");
    let (code, out, _) = rc(&["simulate", "--replay", p(&trace), p(&model("gas_analysis.rcsm"))]);
    assert_eq!(code, EXIT_OK, "{out}");
}

#[test]
fn simulate_with_shipped_domains() {
    for (name, _) in common::shipped_domains() {
        let domain = common::models_dir().join("domains").join(&name);
        let (code, out, _) = rc(&["simulate", "--domain", p(&domain), p(&model("handshake.rcsm"))]);
        assert_eq!(code, EXIT_OK, "{name}: {out}");
        let (code, ..) = rc(&["simulate", "--domain", p(&domain), p(&model("stuck.rcsm"))]);
        assert_eq!(code, EXIT_REFUTED, "{name}");
    }
    let small = common::models_dir().join("domains/small.json");
    assert_eq!(
        rc(&[
            "simulate",
            "--domain",
            p(&small),
            "--seq-max",
            "3",
            p(&model("stuck.rcsm"))
        ])
        .0,
        EXIT_USAGE
    );
}

#[test]
fn output_is_deterministic() {
    for args in [
        vec!["--format", "json", "verify", "--property", "deadlock"],
        vec!["--format", "json", "simulate", "--depth", "6"],
        vec!["emit-smt", "--property", "deadlock"],
    ] {
        let mut a = args.clone();
        let input = model("gas_analysis_3status.rcsm");
        a.push(p(&input));
        assert_eq!(rc(&a), rc(&a), "{args:?}");
    }
}

#[test]
fn seed_comes_from_environment_unless_given() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let bin = env!("CARGO_BIN_EXE_rcverify");
    let seed_of = |extra: &[&str]| -> u64 {
        let status = Command::new(bin)
            .env("RCVERIFY_SEED", "5")
            .args(extra)
            .args(["simulate", "--trace-out", p(&trace), p(&model("stuck.rcsm"))])
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(EXIT_REFUTED));
        let rt: ReplayTrace = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
        rt.domain.seed
    };
    assert_eq!(seed_of(&[]), 5);
    assert_eq!(seed_of(&["--seed", "6"]), 6);
}
