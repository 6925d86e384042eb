//! Small-step execution of reactive programs over finite domains.
//!
//! A running program is a tree of threads. External choice keeps one
//! thread per alternative, each with its own copy of the state, until an
//! event or termination resolves it; silent moves inside an alternative
//! leave the choice open.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ast::{QualName, TypeEnv};
use crate::ir::{Branch, RProg};
use crate::oracle::domain::{ConstValuation, DomainSpec, EvalCtx, Valuation};
use crate::oracle::OracleError;
use crate::semantics::CompiledMachine;
use crate::value::Value;

/// Silent steps allowed between two events before a run is cut.
pub const TAU_BOUND: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub chan: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

impl Event {
    pub fn simple(chan: &str) -> Event {
        Event {
            chan: chan.to_string(),
            value: None,
        }
    }

    pub fn with(chan: &str, value: Value) -> Event {
        Event {
            chan: chan.to_string(),
            value: Some(value),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            None => write!(f, "{}", self.chan),
            Some(v) => write!(f, "{}.{v}", self.chan),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Proc {
    Prog(RProg),
    Seq(Box<Proc>, RProg),
    Choice(Vec<Thread>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Thread {
    pub proc: Proc,
    pub state: Valuation,
}

#[derive(Clone, Debug)]
enum Move {
    Tau(Thread),
    Event(Event, Thread),
    Tick(Valuation),
    Chaos,
}

#[derive(Clone, Debug)]
struct Moves {
    moves: Vec<Move>,
    /// False when some part of the configuration is miraculous and so
    /// contributes no quiescent observation.
    stable_ok: bool,
}

impl Moves {
    fn none() -> Moves {
        Moves {
            moves: vec![],
            stable_ok: true,
        }
    }

    fn miracle() -> Moves {
        Moves {
            moves: vec![],
            stable_ok: false,
        }
    }

    fn one(m: Move) -> Moves {
        Moves {
            moves: vec![m],
            stable_ok: true,
        }
    }

    fn chaotic(&self) -> bool {
        self.moves.iter().any(|m| matches!(m, Move::Chaos))
    }

    fn quiescent(&self) -> bool {
        self.stable_ok && self.moves.iter().all(|m| matches!(m, Move::Event(..)))
    }

    fn offered(&self) -> BTreeSet<Event> {
        self.moves
            .iter()
            .filter_map(|m| match m {
                Move::Event(e, _) => Some(e.clone()),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Quiescent {
        refusal: BTreeSet<Event>,
        offered: BTreeSet<Event>,
    },
    Terminated {
        state: Valuation,
    },
    Chaotic,
    DivergentBound,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub trace: Vec<Event>,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tr: Vec<String> = self.trace.iter().map(|e| e.to_string()).collect();
        write!(f, "⟨{}⟩ ", tr.join(", "))?;
        match &self.outcome {
            Outcome::Quiescent { offered, .. } => {
                let o: Vec<String> = offered.iter().map(|e| e.to_string()).collect();
                write!(f, "offers {{{}}}", o.join(", "))
            }
            Outcome::Terminated { state } => {
                let s: Vec<String> = state.iter().map(|(k, v)| format!("{k}={v}")).collect();
                write!(f, "terminates in {{{}}}", s.join(", "))
            }
            Outcome::Chaotic => write!(f, "chaotic"),
            Outcome::DivergentBound => write!(f, "cut at the silent-step bound"),
        }
    }
}

/// The finite event alphabet: declared channels plus any channel the
/// programs mention, each with every payload in its carrier.
pub fn alphabet(env: &TypeEnv, dom: &DomainSpec, progs: &[&RProg]) -> BTreeSet<Event> {
    let mut chans: BTreeSet<String> = env.events.keys().cloned().collect();
    for p in progs {
        chans.extend(p.channels());
    }
    let mut out = BTreeSet::new();
    for c in chans {
        match env.events.get(&c).cloned().flatten() {
            Some(t) => out.extend(dom.carrier(&t).into_iter().map(|v| Event::with(&c, v))),
            None => {
                out.insert(Event::simple(&c));
            }
        }
    }
    out
}

/// Executes programs under one valuation of the constants.
pub struct Sim<'a> {
    pub env: &'a TypeEnv,
    pub dom: &'a DomainSpec,
    pub consts: ConstValuation,
}

impl<'a> Sim<'a> {
    pub fn new(env: &'a TypeEnv, dom: &'a DomainSpec, consts: ConstValuation) -> Self {
        Sim { env, dom, consts }
    }

    fn ctx(&self) -> EvalCtx<'_> {
        EvalCtx {
            env: self.env,
            dom: self.dom,
            consts: &self.consts,
        }
    }

    fn moves(&self, t: &Thread) -> Result<Moves, OracleError> {
        self.moves_proc(&t.proc, &t.state)
    }

    fn moves_proc(&self, proc: &Proc, state: &Valuation) -> Result<Moves, OracleError> {
        match proc {
            Proc::Prog(p) => self.moves_prog(p, state),
            Proc::Seq(inner, next) => {
                let m = self.moves_proc(inner, state)?;
                let moves = m
                    .moves
                    .into_iter()
                    .map(|mv| match mv {
                        Move::Tau(t) => Move::Tau(Thread {
                            proc: Proc::Seq(Box::new(t.proc), next.clone()),
                            state: t.state,
                        }),
                        Move::Event(e, t) => Move::Event(
                            e,
                            Thread {
                                proc: Proc::Seq(Box::new(t.proc), next.clone()),
                                state: t.state,
                            },
                        ),
                        Move::Tick(s) => Move::Tau(Thread {
                            proc: Proc::Prog(next.clone()),
                            state: s,
                        }),
                        Move::Chaos => Move::Chaos,
                    })
                    .collect();
                Ok(Moves {
                    moves,
                    stable_ok: m.stable_ok,
                })
            }
            Proc::Choice(threads) => {
                let mut out = Moves::none();
                for (i, t) in threads.iter().enumerate() {
                    let m = self.moves(t)?;
                    out.stable_ok &= m.stable_ok;
                    for mv in m.moves {
                        out.moves.push(match mv {
                            Move::Tau(nt) => {
                                let mut ts = threads.clone();
                                ts[i] = nt;
                                Move::Tau(Thread {
                                    proc: Proc::Choice(ts),
                                    state: state.clone(),
                                })
                            }
                            other => other,
                        });
                    }
                }
                Ok(out)
            }
        }
    }

    fn moves_prog(&self, p: &RProg, state: &Valuation) -> Result<Moves, OracleError> {
        let ctx = self.ctx();
        let done = |s: Valuation| Thread {
            proc: Proc::Prog(RProg::SkipR),
            state: s,
        };
        Ok(match p {
            RProg::Miracle => Moves::miracle(),
            RProg::Chaos => Moves::one(Move::Chaos),
            RProg::SkipR => Moves::one(Move::Tick(state.clone())),
            RProg::StopR => Moves::none(),
            RProg::AssignS { subst } => {
                let mut s = state.clone();
                for (x, e) in &subst.0 {
                    s.insert(x.clone(), ctx.eval(e, state)?);
                }
                Moves::one(Move::Tick(s))
            }
            RProg::DoSimple { chan } => Moves::one(Move::Event(Event::simple(chan), done(state.clone()))),
            RProg::DoOut { chan, value } => Moves::one(Move::Event(
                Event::with(chan, ctx.eval(value, state)?),
                done(state.clone()),
            )),
            RProg::DoIn { chan, var } => {
                let ty =
                    self.env.events.get(chan).cloned().flatten().ok_or_else(|| {
                        OracleError::Config(format!("input on channel `{chan}` without a payload type"))
                    })?;
                let carrier = self.dom.carrier(&ty);
                if carrier.is_empty() {
                    return Err(OracleError::Config(format!("empty carrier for channel `{chan}`")));
                }
                let moves = carrier
                    .into_iter()
                    .map(|v| {
                        let mut s = state.clone();
                        s.insert(var.clone(), v.clone());
                        Move::Event(Event::with(chan, v), done(s))
                    })
                    .collect();
                Moves { moves, stable_ok: true }
            }
            RProg::Guard { cond, body } => {
                if ctx.eval_bool(cond, state)? {
                    self.moves_prog(body, state)?
                } else {
                    Moves::none()
                }
            }
            RProg::SeqR { first, second } => self.moves_proc(
                &Proc::Seq(Box::new(Proc::Prog((**first).clone())), (**second).clone()),
                state,
            )?,
            RProg::CondR {
                then_branch,
                cond,
                else_branch,
            } => {
                if ctx.eval_bool(cond, state)? {
                    self.moves_prog(then_branch, state)?
                } else {
                    self.moves_prog(else_branch, state)?
                }
            }
            RProg::ExtChoice { alts } => {
                let threads = alts
                    .iter()
                    .map(|a| Thread {
                        proc: Proc::Prog(a.clone()),
                        state: state.clone(),
                    })
                    .collect();
                self.moves_proc(&Proc::Choice(threads), state)?
            }
            RProg::NdChoice { alts } => {
                if alts.is_empty() {
                    Moves::miracle()
                } else {
                    let moves = alts
                        .iter()
                        .map(|a| {
                            Move::Tau(Thread {
                                proc: Proc::Prog(a.clone()),
                                state: state.clone(),
                            })
                        })
                        .collect();
                    Moves { moves, stable_ok: true }
                }
            }
            RProg::Assume { cond } => {
                if ctx.eval_bool(cond, state)? {
                    Moves::one(Move::Tick(state.clone()))
                } else {
                    Moves::miracle()
                }
            }
            RProg::Alternation { branches } => {
                let enabled = self.enabled(branches, state)?;
                if enabled.is_empty() {
                    Moves::one(Move::Chaos)
                } else {
                    let moves = enabled
                        .into_iter()
                        .map(|b| {
                            Move::Tau(Thread {
                                proc: Proc::Prog(b.body.clone()),
                                state: state.clone(),
                            })
                        })
                        .collect();
                    Moves { moves, stable_ok: true }
                }
            }
            RProg::DoIter { branches } => {
                let enabled = self.enabled(branches, state)?;
                if enabled.is_empty() {
                    Moves::one(Move::Tick(state.clone()))
                } else {
                    let moves = enabled
                        .into_iter()
                        .map(|b| {
                            Move::Tau(Thread {
                                proc: Proc::Seq(Box::new(Proc::Prog(b.body.clone())), p.clone()),
                                state: state.clone(),
                            })
                        })
                        .collect();
                    Moves { moves, stable_ok: true }
                }
            }
        })
    }

    fn enabled<'b>(&self, branches: &'b [Branch], state: &Valuation) -> Result<Vec<&'b Branch>, OracleError> {
        let ctx = self.ctx();
        let mut out = Vec::new();
        for b in branches {
            if ctx.eval_bool(&b.guard, state)? {
                out.push(b);
            }
        }
        Ok(out)
    }

    /// All configurations reachable by silent steps, with their moves.
    /// `None` when the silent-step bound is exceeded.
    fn closure(&self, start: Vec<Thread>) -> Result<Option<Vec<(Thread, Moves)>>, OracleError> {
        let mut seen: HashSet<Thread> = HashSet::new();
        let mut queue: VecDeque<Thread> = VecDeque::new();
        for t in start {
            if seen.insert(t.clone()) {
                queue.push_back(t);
            }
        }
        let mut out = Vec::new();
        while let Some(t) = queue.pop_front() {
            if out.len() > TAU_BOUND {
                return Ok(None);
            }
            let m = self.moves(&t)?;
            for mv in &m.moves {
                if let Move::Tau(n) = mv {
                    if seen.insert(n.clone()) {
                        queue.push_back(n.clone());
                    }
                }
            }
            out.push((t, m));
        }
        Ok(Some(out))
    }

    /// Observations of `p` from one initial state, up to `depth` events.
    pub fn failures_from(
        &self,
        p: &RProg,
        init: &Valuation,
        sigma: &BTreeSet<Event>,
        depth: usize,
    ) -> Result<BTreeSet<Observation>, OracleError> {
        let mut out = BTreeSet::new();
        let start = vec![Thread {
            proc: Proc::Prog(p.clone()),
            state: init.clone(),
        }];
        self.explore(start, &mut Vec::new(), sigma, depth, &mut out)?;
        Ok(out)
    }

    fn explore(
        &self,
        start: Vec<Thread>,
        trace: &mut Vec<Event>,
        sigma: &BTreeSet<Event>,
        depth: usize,
        out: &mut BTreeSet<Observation>,
    ) -> Result<(), OracleError> {
        let node = self.det_node(start, sigma)?;
        for outcome in node.outcomes {
            out.insert(Observation {
                trace: trace.clone(),
                outcome,
            });
        }
        if trace.len() < depth {
            for (e, threads) in node.next {
                trace.push(e);
                self.explore(threads, trace, sigma, depth, out)?;
                trace.pop();
            }
        }
        Ok(())
    }

    /// One state of the subset construction: the outcomes observable
    /// after the current trace and the configurations after each event.
    fn det_node(&self, start: Vec<Thread>, sigma: &BTreeSet<Event>) -> Result<DetNode, OracleError> {
        let mut node = DetNode::default();
        if start.is_empty() {
            return Ok(node);
        }
        let Some(closure) = self.closure(start)? else {
            node.outcomes.insert(Outcome::DivergentBound);
            return Ok(node);
        };
        if closure.iter().any(|(_, m)| m.chaotic()) {
            node.outcomes.insert(Outcome::Chaotic);
            return Ok(node);
        }
        let mut seen: HashSet<(Event, Thread)> = HashSet::new();
        for (_, m) in closure {
            if m.quiescent() {
                let offered = m.offered();
                let refusal = sigma.difference(&offered).cloned().collect();
                node.outcomes.insert(Outcome::Quiescent { refusal, offered });
            }
            for mv in m.moves {
                match mv {
                    Move::Tick(state) => {
                        node.outcomes.insert(Outcome::Terminated { state });
                    }
                    Move::Event(e, t) if seen.insert((e.clone(), t.clone())) => {
                        node.next.entry(e).or_default().push(t);
                    }
                    _ => {}
                }
            }
        }
        Ok(node)
    }

    /// First observation (shortest trace) of exactly one of `p` and `q`
    /// from `init`, and whether it belongs to `p`. Explores pairs of
    /// subset-construction states, so shared suffixes are compared once.
    pub fn distinguish_from(
        &self,
        p: &RProg,
        q: &RProg,
        init: &Valuation,
        sigma: &BTreeSet<Event>,
        depth: usize,
    ) -> Result<Option<(Observation, bool)>, OracleError> {
        let thread = |r: &RProg| {
            vec![Thread {
                proc: Proc::Prog(r.clone()),
                state: init.clone(),
            }]
        };
        let mut nodes = Interner::default();
        let root = (
            nodes.intern(self, thread(p), sigma)?,
            nodes.intern(self, thread(q), sigma)?,
        );
        // Arena of (pair, parent, event) for trace reconstruction; pairs
        // are visited breadth-first, so the first visit has the most depth left.
        let mut arena: Vec<PairEntry> = vec![(root, None, None)];
        let mut visited: HashSet<(usize, usize)> = HashSet::from([root]);
        let mut layer = vec![0usize];
        for level in 0..=depth {
            let mut next_layer = Vec::new();
            for &idx in &layer {
                let ((a, b), ..) = arena[idx].clone();
                let (oa, ob) = (&nodes.table[a].outcomes, &nodes.table[b].outcomes);
                if let Some(o) = oa.symmetric_difference(ob).next() {
                    let left_only = oa.contains(o);
                    let mut trace = Vec::new();
                    let mut cur = Some(idx);
                    while let Some(i) = cur {
                        if let Some(e) = &arena[i].2 {
                            trace.push(e.clone());
                        }
                        cur = arena[i].1;
                    }
                    trace.reverse();
                    return Ok(Some((
                        Observation {
                            trace,
                            outcome: o.clone(),
                        },
                        left_only,
                    )));
                }
                if level == depth {
                    continue;
                }
                let events: BTreeSet<Event> = nodes.table[a]
                    .next
                    .keys()
                    .chain(nodes.table[b].next.keys())
                    .cloned()
                    .collect();
                for e in events {
                    let ta = nodes.table[a].next.get(&e).cloned().unwrap_or_default();
                    let tb = nodes.table[b].next.get(&e).cloned().unwrap_or_default();
                    let pair = (nodes.intern(self, ta, sigma)?, nodes.intern(self, tb, sigma)?);
                    if visited.insert(pair) {
                        arena.push((pair, Some(idx), Some(e)));
                        next_layer.push(arena.len() - 1);
                    }
                }
            }
            layer = next_layer;
        }
        Ok(None)
    }
}

/// A pair of subset states, its parent entry and the event leading to it.
type PairEntry = ((usize, usize), Option<usize>, Option<Event>);

#[derive(Debug, Default)]
struct DetNode {
    outcomes: BTreeSet<Outcome>,
    next: BTreeMap<Event, Vec<Thread>>,
}

/// Subset-construction states numbered by their configuration sets.
#[derive(Default)]
struct Interner {
    ids: HashMap<Vec<Thread>, usize>,
    table: Vec<DetNode>,
}

impl Interner {
    fn intern(&mut self, sim: &Sim<'_>, threads: Vec<Thread>, sigma: &BTreeSet<Event>) -> Result<usize, OracleError> {
        if let Some(&i) = self.ids.get(&threads) {
            return Ok(i);
        }
        self.table.push(sim.det_node(threads.clone(), sigma)?);
        self.ids.insert(threads, self.table.len() - 1);
        Ok(self.table.len() - 1)
    }
}

/// Every pair of constant valuation and initial state over `vars`.
pub fn initial_configs(
    env: &TypeEnv,
    dom: &DomainSpec,
    vars: &[QualName],
) -> Result<Vec<(ConstValuation, Valuation)>, OracleError> {
    let states = dom.valuations(env, vars)?;
    let mut out = Vec::new();
    for c in dom.const_valuations(env) {
        for s in &states {
            out.push((c.clone(), s.clone()));
        }
    }
    Ok(out)
}

/// The union of observations over all initial states.
pub fn failures(
    p: &RProg,
    env: &TypeEnv,
    dom: &DomainSpec,
    depth: usize,
) -> Result<BTreeSet<Observation>, OracleError> {
    let vars: Vec<QualName> = p.variables().into_iter().collect();
    let sigma = alphabet(env, dom, &[p]);
    let per: Vec<BTreeSet<Observation>> = initial_configs(env, dom, &vars)?
        .into_par_iter()
        .map(|(c, s)| Sim::new(env, dom, c).failures_from(p, &s, &sigma, depth))
        .collect::<Result<_, _>>()?;
    Ok(per.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distinction {
    pub consts: ConstValuation,
    pub initial: Valuation,
    pub observation: Observation,
    /// True when only the left program has the observation.
    pub left_only: bool,
}

/// Compares failures from every initial state; returns the first
/// distinguishing observation, if any.
pub fn equiv(
    p: &RProg,
    q: &RProg,
    env: &TypeEnv,
    dom: &DomainSpec,
    depth: usize,
) -> Result<Option<Distinction>, OracleError> {
    let vars: Vec<QualName> = p.variables().union(&q.variables()).cloned().collect();
    equiv_with(p, q, env, dom, depth, &vars)
}

/// As `equiv`, enumerating initial states over `vars` only.
pub fn equiv_with(
    p: &RProg,
    q: &RProg,
    env: &TypeEnv,
    dom: &DomainSpec,
    depth: usize,
    vars: &[QualName],
) -> Result<Option<Distinction>, OracleError> {
    let sigma = alphabet(env, dom, &[p, q]);
    let results: Vec<Option<Distinction>> = initial_configs(env, dom, vars)?
        .into_par_iter()
        .map(|(c, s)| -> Result<Option<Distinction>, OracleError> {
            let sim = Sim::new(env, dom, c.clone());
            Ok(sim
                .distinguish_from(p, q, &s, &sigma, depth)?
                .map(|(observation, left_only)| Distinction {
                    consts: c,
                    initial: s,
                    observation,
                    left_only,
                }))
        })
        .collect::<Result<_, _>>()?;
    Ok(results.into_iter().flatten().next())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deadlock {
    pub consts: ConstValuation,
    pub initial: Valuation,
    pub trace: Vec<Event>,
    /// State of the deadlocked configuration.
    pub state: Valuation,
    /// Active node at the deadlock.
    pub node: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub deadlock: Option<Deadlock>,
    /// Distinct configurations visited.
    pub explored: usize,
    /// True when some run was cut by the depth or silent-step bound.
    pub truncated: bool,
}

fn machine_vars(cm: &CompiledMachine) -> Vec<QualName> {
    cm.program.variables().into_iter().filter(|v| !v.is_actv()).collect()
}

/// Breadth-first search (by number of events) for a quiescent,
/// non-terminated configuration that offers no event.
pub fn find_deadlock(cm: &CompiledMachine, dom: &DomainSpec, depth: usize) -> Result<SearchResult, OracleError> {
    let starts = initial_configs(&cm.env, dom, &machine_vars(cm))?;
    let mut consts_ids: Vec<ConstValuation> = Vec::new();
    // Arena of (constants index, thread, parent, label, initial state index).
    let mut arena: Vec<(usize, Thread, Option<usize>, Option<Event>)> = Vec::new();
    let mut visited: HashSet<(usize, Thread)> = HashSet::new();
    let mut layer: Vec<usize> = Vec::new();
    let mut initial_of: Vec<usize> = Vec::new();
    let mut inits: Vec<Valuation> = Vec::new();
    for (c, s) in starts {
        let ci = match consts_ids.iter().position(|x| *x == c) {
            Some(i) => i,
            None => {
                consts_ids.push(c);
                consts_ids.len() - 1
            }
        };
        let t = Thread {
            proc: Proc::Prog(cm.program.clone()),
            state: s.clone(),
        };
        if visited.insert((ci, t.clone())) {
            inits.push(s);
            initial_of.push(inits.len() - 1);
            arena.push((ci, t, None, None));
            layer.push(arena.len() - 1);
        }
    }
    let sims: Vec<Sim> = consts_ids.iter().map(|c| Sim::new(&cm.env, dom, c.clone())).collect();
    let mut truncated = false;
    for k in 0..=depth {
        let mut queue: VecDeque<usize> = layer.drain(..).collect();
        let mut next = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (ci, thread) = (arena[i].0, arena[i].1.clone());
            let m = sims[ci].moves(&thread)?;
            if m.quiescent() && m.moves.is_empty() {
                let mut trace = Vec::new();
                let mut j = i;
                while let Some(p) = arena[j].2 {
                    if let Some(e) = &arena[j].3 {
                        trace.push(e.clone());
                    }
                    j = p;
                }
                trace.reverse();
                let root = j;
                let init = inits[initial_of[root]].clone();
                return Ok(SearchResult {
                    deadlock: Some(Deadlock {
                        consts: consts_ids[ci].clone(),
                        initial: init,
                        trace,
                        node: thread.state.get(&QualName::actv()).cloned(),
                        state: thread.state,
                    }),
                    explored: arena.len(),
                    truncated,
                });
            }
            for mv in m.moves {
                match mv {
                    Move::Tau(t) => {
                        if visited.insert((ci, t.clone())) {
                            arena.push((ci, t, Some(i), None));
                            initial_of.push(initial_of[i]);
                            queue.push_back(arena.len() - 1);
                        }
                    }
                    Move::Event(e, t) => {
                        if k == depth {
                            truncated = true;
                        } else if visited.insert((ci, t.clone())) {
                            arena.push((ci, t, Some(i), Some(e)));
                            initial_of.push(initial_of[i]);
                            next.push(arena.len() - 1);
                        }
                    }
                    Move::Tick(_) | Move::Chaos => {}
                }
            }
            if arena.len() > 50 * TAU_BOUND {
                return Err(OracleError::Config("state space exceeds the exploration limit".into()));
            }
        }
        layer = next;
    }
    Ok(SearchResult {
        deadlock: None,
        explored: arena.len(),
        truncated,
    })
}

/// A deadlock trace that can be saved and checked again later.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayTrace {
    pub machine: String,
    pub domain: DomainSpec,
    pub consts: ConstValuation,
    pub initial: Valuation,
    pub trace: Vec<Event>,
}

/// Follows `trace` from its initial state and reports whether some
/// configuration reached by it is deadlocked.
pub fn replay_trace(cm: &CompiledMachine, rt: &ReplayTrace) -> Result<bool, OracleError> {
    let sim = Sim::new(&cm.env, &rt.domain, rt.consts.clone());
    let mut current = vec![Thread {
        proc: Proc::Prog(cm.program.clone()),
        state: rt.initial.clone(),
    }];
    for e in &rt.trace {
        let Some(closure) = sim.closure(current)? else {
            return Ok(false);
        };
        current = closure
            .into_iter()
            .flat_map(|(_, m)| m.moves)
            .filter_map(|mv| match mv {
                Move::Event(ev, t) if ev == *e => Some(t),
                _ => None,
            })
            .collect();
        if current.is_empty() {
            return Ok(false);
        }
    }
    let Some(closure) = sim.closure(current)? else {
        return Ok(false);
    };
    Ok(closure.iter().any(|(_, m)| m.quiescent() && m.moves.is_empty()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{Expr, Type};

    fn env() -> TypeEnv {
        let mut env = TypeEnv::default();
        env.vars.insert("x".into(), Type::Int);
        env.events.insert("a".into(), None);
        env.events.insert("b".into(), None);
        env.events.insert("c".into(), Some(Type::Bool));
        env
    }

    #[test]
    fn stop_refuses_everything() {
        let env = env();
        let f = failures(&RProg::StopR, &env, &DomainSpec::default(), 3).unwrap();
        let sigma = alphabet(&env, &DomainSpec::default(), &[]);
        assert_eq!(f.len(), 1);
        let o = f.into_iter().next().unwrap();
        assert!(o.trace.is_empty());
        assert_eq!(
            o.outcome,
            Outcome::Quiescent {
                refusal: sigma,
                offered: BTreeSet::new()
            }
        );
    }

    #[test]
    fn external_choice_offers_both() {
        let env = env();
        let p = RProg::ext(vec![RProg::simple("a"), RProg::simple("b")]);
        let f = failures(&p, &env, &DomainSpec::default(), 1).unwrap();
        let root: Vec<_> = f.iter().filter(|o| o.trace.is_empty()).collect();
        assert_eq!(root.len(), 1);
        let Outcome::Quiescent { offered, .. } = &root[0].outcome else {
            panic!()
        };
        assert_eq!(offered.len(), 2);
        assert!(f.iter().any(|o| o.trace == vec![Event::simple("a")]));
        assert!(f.iter().any(|o| o.trace == vec![Event::simple("b")]));
    }

    #[test]
    fn input_branches_over_the_carrier() {
        let mut env = env();
        env.vars.insert("y".into(), Type::Bool);
        let p = RProg::input("c", QualName::plain("y"));
        let f = failures(&p, &env, &DomainSpec::default(), 1).unwrap();
        assert_eq!(
            f.iter()
                .filter(|o| o.trace.len() == 1)
                .map(|o| o.trace.clone())
                .collect::<BTreeSet<_>>()
                .len(),
            2
        );
    }

    #[test]
    fn equivalences() {
        let env = env();
        let dom = DomainSpec::default();
        let p = RProg::seq(RProg::Miracle, RProg::simple("a"));
        assert_eq!(equiv(&p, &RProg::Miracle, &env, &dom, 4).unwrap(), None);
        assert_eq!(equiv(&p, &p, &env, &dom, 4).unwrap(), None);
        let d = equiv(&RProg::simple("a"), &RProg::simple("b"), &env, &dom, 2)
            .unwrap()
            .unwrap();
        assert!(d.observation.trace.is_empty() || d.observation.trace.len() == 1);
    }

    #[test]
    fn false_guard_blocks() {
        let env = env();
        let p = RProg::guard(Expr::bool(false), RProg::simple("a"));
        assert_eq!(equiv(&p, &RProg::StopR, &env, &DomainSpec::default(), 3).unwrap(), None);
    }
}
