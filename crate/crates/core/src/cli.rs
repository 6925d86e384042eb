//! Command-line driver. Exit codes: 0 success or verified, 1 refuted or
//! deadlock found, 2 ill-formed or ill-typed input, 3 residual
//! obligations, 4 usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::ir::pretty_program;
use crate::model::StMach;
use crate::oracle::{find_deadlock, replay_trace, DomainSpec, FunTable, ReplayTrace};
use crate::parser::parse;
use crate::rewrite::{normalize_node, simplify_traced, DEFAULT_BUDGET};
use crate::semantics::{machine_sem, CompiledMachine};
use crate::verify::{verify_machine, Property, Status, VerifyError};
use crate::wf::check_wf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_REFUTED: i32 = 1;
pub const EXIT_ILL_FORMED: i32 = 2;
pub const EXIT_RESIDUAL: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "rcverify", version, about = "Compile and verify flat state machines")]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, value_enum, default_value = "text", global = true)]
    pub format: Format,
    /// Seed for sampled function tables [default: 0, or the domain file's].
    #[arg(long, env = "RCVERIFY_SEED", global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, clap::Args)]
pub struct Bounds {
    /// Domain description as JSON; replaces the carrier flags below.
    #[arg(long, conflicts_with_all = ["int_range", "seq_max", "abstract_tokens"])]
    pub domain: Option<PathBuf>,
    /// Maximum number of events per explored run.
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    /// Integer carrier, as LO..HI.
    #[arg(long, default_value = "0..3", value_parser = parse_range)]
    pub int_range: (i64, i64),
    #[arg(long, default_value_t = 2)]
    pub seq_max: usize,
    #[arg(long, default_value_t = 2)]
    pub abstract_tokens: usize,
    /// Function table from a JSON file, as NAME=FILE. Repeatable.
    #[arg(long = "fun", value_parser = parse_fun)]
    pub funs: Vec<(String, PathBuf)>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, type check and check well-formedness.
    Check { input: PathBuf },
    /// Print the guarded-iteration program of a machine.
    Compile { input: PathBuf },
    /// Simplify each node body and show its entry-normalized form.
    Simplify { input: PathBuf },
    /// Generate and decide proof obligations.
    Verify {
        /// `deadlock` or `invariant:<expr>`.
        #[arg(long)]
        property: String,
        /// Also write one SMT-LIB script per non-valid obligation here.
        #[arg(long)]
        smt_dir: Option<PathBuf>,
        input: PathBuf,
    },
    /// Search for a reachable deadlock with the bounded oracle.
    Simulate {
        #[command(flatten)]
        bounds: Bounds,
        /// Where to write the replayable trace when a deadlock is found.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Replay a saved trace instead of searching.
        #[arg(long, conflicts_with = "trace_out")]
        replay: Option<PathBuf>,
        input: PathBuf,
    },
    /// Write SMT-LIB scripts for every obligation.
    EmitSmt {
        #[arg(long)]
        property: String,
        /// Output directory; scripts go to standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        input: PathBuf,
    },
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s.split_once("..").ok_or("expected LO..HI")?;
    let lo: i64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: i64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo > hi {
        return Err("empty range".into());
    }
    Ok((lo, hi))
}

fn parse_fun(s: &str) -> Result<(String, PathBuf), String> {
    let (name, file) = s.split_once('=').ok_or("expected NAME=FILE")?;
    Ok((name.to_string(), PathBuf::from(file)))
}

struct Failure(i32, String);

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        let code = match e {
            VerifyError::Property(_) => EXIT_USAGE,
            _ => EXIT_ILL_FORMED,
        };
        Failure(code, e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<StMach, Failure> {
    parse(&read(path)?).map_err(|e| Failure(EXIT_ILL_FORMED, format!("{}:{e}", path.display())))
}

fn compile(path: &Path) -> Result<CompiledMachine, Failure> {
    let m = load(path)?;
    let wf = check_wf(&m);
    if !wf.is_ok() {
        return Err(Failure(EXIT_ILL_FORMED, wf.to_string()));
    }
    machine_sem(&m).map_err(|e| Failure(EXIT_ILL_FORMED, e.to_string()))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn domain(bounds: &Bounds, seed: Option<u64>) -> Result<DomainSpec, Failure> {
    let mut dom = match &bounds.domain {
        Some(file) => {
            serde_json::from_str(&read(file)?).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", file.display())))?
        }
        None => {
            let mut dom = DomainSpec::default().with_ints(bounds.int_range.0, bounds.int_range.1);
            dom.seq_max = bounds.seq_max;
            dom.abstract_tokens = bounds.abstract_tokens;
            dom
        }
    };
    if let Some(seed) = seed {
        dom.seed = seed;
    }
    for (name, file) in &bounds.funs {
        let table: FunTable =
            serde_json::from_str(&read(file)?).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", file.display())))?;
        dom.tables.insert(name.clone(), table);
    }
    Ok(dom)
}

fn execute(cfg: &CliConfig, out: &mut dyn Write) -> Result<i32, Failure> {
    let w = |out: &mut dyn Write, s: &str| {
        writeln!(out, "{}", s.trim_end()).map_err(|e| Failure(EXIT_USAGE, format!("cannot write output: {e}")))
    };
    match &cfg.command {
        Command::Check { input } => {
            let m = load(input)?;
            let report = check_wf(&m);
            match cfg.format {
                Format::Json => w(out, &json(&report))?,
                Format::Text => w(out, &report.to_string())?,
            }
            Ok(if report.is_ok() { EXIT_OK } else { EXIT_ILL_FORMED })
        }
        Command::Compile { input } => {
            let cm = compile(input)?;
            match cfg.format {
                Format::Json => w(out, &json(&cm.program))?,
                Format::Text => w(out, pretty_program(&cm.program).trim_end())?,
            }
            Ok(EXIT_OK)
        }
        Command::Simplify { input } => {
            let cm = compile(input)?;
            let mut nodes = Vec::new();
            for n in &cm.views.inters {
                let body = &cm.per_node[&n.nname];
                let s = simplify_traced(body, DEFAULT_BUDGET).map_err(|e| Failure(EXIT_ILL_FORMED, e.to_string()))?;
                let nf = normalize_node(&cm.env, body).map_err(|e| Failure(EXIT_ILL_FORMED, e.to_string()))?;
                nodes.push((n.nname.clone(), s, nf));
            }
            match cfg.format {
                Format::Json => {
                    let v: Vec<_> = nodes
                        .iter()
                        .map(|(n, s, nf)| serde_json::json!({"node": n, "simplified": s.result, "steps": s.trace.len(), "normal_form": nf}))
                        .collect();
                    w(out, &json(&v))?
                }
                Format::Text => {
                    for (n, s, nf) in &nodes {
                        w(out, &format!("{n}: {} ({} steps)", s.result, s.trace.len()))?;
                        for p in &nf.paths {
                            let guards: Vec<String> = p.alternatives.iter().map(|a| a.guard.to_string()).collect();
                            w(
                                out,
                                &format!("  when {} after {}: guards [{}]", p.cond, p.subst, guards.join(", ")),
                            )?;
                        }
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Verify {
            property,
            smt_dir,
            input,
        } => {
            let m = load(input)?;
            let prop = Property::parse(property, &m.env)?;
            let v = verify_machine(&m, &prop)?;
            let report = v.report();
            match cfg.format {
                Format::Json => w(out, &json(&report))?,
                Format::Text => w(out, &report.to_string())?,
            }
            if let Some(dir) = smt_dir {
                let scripts = v.smt_scripts();
                let pending = v
                    .verdicts
                    .iter()
                    .map(|x| !matches!(x, crate::verify::Verdict::Valid { .. }));
                let chosen: Vec<_> = scripts
                    .into_iter()
                    .zip(pending)
                    .filter(|(_, p)| *p)
                    .map(|(s, _)| s)
                    .collect();
                write_scripts(dir, &chosen)?;
            }
            Ok(match v.status() {
                Status::Verified => EXIT_OK,
                Status::Refuted => EXIT_REFUTED,
                Status::Residual => EXIT_RESIDUAL,
            })
        }
        Command::Simulate {
            bounds,
            trace_out,
            replay,
            input,
        } => {
            let cm = compile(input)?;
            if let Some(file) = replay {
                let rt: ReplayTrace = serde_json::from_str(&read(file)?)
                    .map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", file.display())))?;
                let dead = replay_trace(&cm, &rt).map_err(|e| Failure(EXIT_USAGE, e.to_string()))?;
                w(
                    out,
                    if dead {
                        "replayed trace reaches a deadlock"
                    } else {
                        "replayed trace does not deadlock"
                    },
                )?;
                return Ok(if dead { EXIT_REFUTED } else { EXIT_OK });
            }
            let dom = domain(bounds, cfg.seed)?;
            let res = find_deadlock(&cm, &dom, bounds.depth).map_err(|e| Failure(EXIT_USAGE, e.to_string()))?;
            match cfg.format {
                Format::Json => w(out, &json(&res))?,
                Format::Text => match &res.deadlock {
                    Some(d) => {
                        let tr: Vec<String> = d.trace.iter().map(|e| e.to_string()).collect();
                        let node = d.node.as_ref().map(|n| n.to_string()).unwrap_or_default();
                        w(out, &format!("deadlock in {node} after ⟨{}⟩", tr.join(", ")))?;
                        let init: Vec<String> = d.initial.iter().map(|(k, v)| format!("{k}={v}")).collect();
                        w(out, &format!("  initial state {{{}}}", init.join(", ")))?;
                    }
                    None => w(
                        out,
                        &format!(
                            "no deadlock within depth {} ({} configurations{})",
                            bounds.depth,
                            res.explored,
                            if res.truncated {
                                ", search cut at the depth bound"
                            } else {
                                ""
                            }
                        ),
                    )?,
                },
            }
            if let (Some(d), Some(path)) = (&res.deadlock, trace_out) {
                let rt = ReplayTrace {
                    machine: cm.name.clone(),
                    domain: dom,
                    consts: d.consts.clone(),
                    initial: d.initial.clone(),
                    trace: d.trace.clone(),
                };
                fs::write(path, json(&rt)).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", path.display())))?;
            }
            Ok(if res.deadlock.is_some() { EXIT_REFUTED } else { EXIT_OK })
        }
        Command::EmitSmt {
            property,
            out: dir,
            input,
        } => {
            let m = load(input)?;
            let prop = Property::parse(property, &m.env)?;
            let v = verify_machine(&m, &prop)?;
            let scripts = v.smt_scripts();
            match dir {
                Some(dir) => write_scripts(dir, &scripts)?,
                None => {
                    for (name, s) in &scripts {
                        w(out, &format!(";; {name}\n{s}"))?;
                    }
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn write_scripts(dir: &Path, scripts: &[(String, String)]) -> Result<(), Failure> {
    let fail = |e: std::io::Error| Failure(EXIT_USAGE, format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(fail)?;
    for (name, s) in scripts {
        fs::write(dir.join(name), s).map_err(fail)?;
    }
    Ok(())
}

/// Runs one invocation. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match CliConfig::try_parse_from(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return EXIT_OK;
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    match execute(&cfg, out) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}
