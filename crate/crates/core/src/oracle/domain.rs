//! Finite carriers, function tables and expression evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ast::{BinOp, Expr, QualName, Type, TypeEnv};
use crate::oracle::OracleError;
use crate::value::Value;

pub type Valuation = BTreeMap<QualName, Value>;
pub type ConstValuation = BTreeMap<String, Value>;

/// An explicit function table. Arguments missing from `entries` use
/// `default`, or the sampled table when there is no default.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunTable {
    pub entries: Vec<(Vec<Value>, Value)>,
    #[serde(default)]
    pub default: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub int_lo: i64,
    pub int_hi: i64,
    /// Maximum length of sequence values.
    pub seq_max: usize,
    pub abstract_tokens: usize,
    /// Seed for sampled function tables.
    pub seed: u64,
    #[serde(default)]
    pub tables: BTreeMap<String, FunTable>,
    /// Fixed constant values. Constants without one range over their carrier.
    #[serde(default)]
    pub consts: ConstValuation,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec {
            int_lo: 0,
            int_hi: 3,
            seq_max: 2,
            abstract_tokens: 2,
            seed: 0,
            tables: BTreeMap::new(),
            consts: BTreeMap::new(),
        }
    }
}

impl DomainSpec {
    pub fn with_ints(mut self, lo: i64, hi: i64) -> Self {
        self.int_lo = lo;
        self.int_hi = hi;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn carrier(&self, ty: &Type) -> Vec<Value> {
        match ty {
            Type::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Type::Int => (self.int_lo..=self.int_hi).map(Value::Int).collect(),
            Type::Enum { ctors, .. } => ctors.iter().map(|c| Value::Sym(c.clone())).collect(),
            Type::Abstract { name } => (0..self.abstract_tokens).map(|i| Value::token(name, i)).collect(),
            Type::Seq { elem } => {
                let elems = self.carrier(elem);
                let mut layer: Vec<Vec<Value>> = vec![vec![]];
                let mut out = vec![Value::Seq(vec![])];
                for _ in 0..self.seq_max {
                    let next: Vec<Vec<Value>> = layer
                        .iter()
                        .flat_map(|s| {
                            elems.iter().map(move |e| {
                                let mut t = s.clone();
                                t.push(e.clone());
                                t
                            })
                        })
                        .collect();
                    out.extend(next.iter().cloned().map(Value::Seq));
                    layer = next;
                }
                out
            }
        }
    }

    /// Deterministic pseudo-random table: SHA-256 of seed, function name
    /// and arguments, reduced modulo the result carrier.
    pub fn sampled(&self, fun: &str, args: &[Value], ret: &Type) -> Result<Value, OracleError> {
        let carrier = self.carrier(ret);
        if carrier.is_empty() {
            return Err(OracleError::Config(format!("empty carrier for the result of `{fun}`")));
        }
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(fun.as_bytes());
        h.update(serde_json::to_vec(args).expect("values serialize"));
        let digest = h.finalize();
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        Ok(carrier[(u64::from_le_bytes(word) % carrier.len() as u64) as usize].clone())
    }

    pub fn apply(&self, env: &TypeEnv, fun: &str, args: &[Value]) -> Result<Value, OracleError> {
        let sig = env
            .funs
            .get(fun)
            .ok_or_else(|| OracleError::Eval(format!("unknown function `{fun}`")))?;
        if let Some(table) = self.tables.get(fun) {
            if let Some((_, v)) = table.entries.iter().find(|(a, _)| a.as_slice() == args) {
                return Ok(v.clone());
            }
            if let Some(v) = &table.default {
                return Ok(v.clone());
            }
        }
        self.sampled(fun, args, &sig.ret)
    }

    /// All constant valuations: fixed values where given, carriers otherwise.
    pub fn const_valuations(&self, env: &TypeEnv) -> Vec<ConstValuation> {
        let mut out = vec![ConstValuation::new()];
        for (c, t) in &env.consts {
            let choices = match (self.consts.get(c), env.const_values.get(c)) {
                (Some(v), _) => vec![v.clone()],
                (None, Some(lit)) => vec![literal_value(lit).expect("constant initializers are literals")],
                (None, None) => self.carrier(t),
            };
            out = out
                .into_iter()
                .flat_map(|m| {
                    choices.iter().map(move |v| {
                        let mut m = m.clone();
                        m.insert(c.clone(), v.clone());
                        m
                    })
                })
                .collect();
        }
        out
    }

    /// Every valuation of `vars` over their carriers, in lexicographic order.
    pub fn valuations(&self, env: &TypeEnv, vars: &[QualName]) -> Result<Vec<Valuation>, OracleError> {
        let mut out = vec![Valuation::new()];
        for v in vars {
            let t = env
                .var_type(v)
                .ok_or_else(|| OracleError::Config(format!("untyped variable `{v}`")))?;
            let choices = self.carrier(t);
            out = out
                .into_iter()
                .flat_map(|m| {
                    choices.iter().map(move |c| {
                        let mut m = m.clone();
                        m.insert(v.clone(), c.clone());
                        m
                    })
                })
                .collect();
        }
        Ok(out)
    }
}

pub fn literal_value(e: &Expr) -> Option<Value> {
    match e {
        Expr::Int { value } => Some(Value::Int(*value)),
        Expr::Bool { value } => Some(Value::Bool(*value)),
        Expr::EnumLit { ctor, .. } => Some(Value::Sym(ctor.clone())),
        Expr::EmptySeq => Some(Value::Seq(vec![])),
        _ => None,
    }
}

/// Evaluation context: environment, domain, and the current constants.
pub struct EvalCtx<'a> {
    pub env: &'a TypeEnv,
    pub dom: &'a DomainSpec,
    pub consts: &'a ConstValuation,
}

impl EvalCtx<'_> {
    pub fn eval(&self, e: &Expr, state: &Valuation) -> Result<Value, OracleError> {
        Ok(match e {
            Expr::Var { var } => state
                .get(var)
                .cloned()
                .ok_or_else(|| OracleError::Eval(format!("unbound variable `{var}`")))?,
            Expr::Const { name } => self
                .consts
                .get(name)
                .cloned()
                .ok_or_else(|| OracleError::Eval(format!("unbound constant `{name}`")))?,
            Expr::App { fun, args } => {
                let vals = args
                    .iter()
                    .map(|a| self.eval(a, state))
                    .collect::<Result<Vec<_>, _>>()?;
                self.dom.apply(self.env, fun, &vals)?
            }
            Expr::Not { arg } => Value::Bool(!self.eval_bool(arg, state)?),
            Expr::Bin { bop, lhs, rhs } => {
                let l = self.eval(lhs, state)?;
                let r = self.eval(rhs, state)?;
                binop(*bop, &l, &r)?
            }
            lit => literal_value(lit).expect("remaining expressions are literals"),
        })
    }

    pub fn eval_bool(&self, e: &Expr, state: &Valuation) -> Result<bool, OracleError> {
        self.eval(e, state)?
            .as_bool()
            .ok_or_else(|| OracleError::Eval(format!("`{e}` is not boolean")))
    }
}

fn binop(bop: BinOp, l: &Value, r: &Value) -> Result<Value, OracleError> {
    let bools = || match (l.as_bool(), r.as_bool()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(OracleError::Eval(format!("`{bop:?}` expects booleans"))),
    };
    let ints = || match (l.as_int(), r.as_int()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(OracleError::Eval(format!("`{bop:?}` expects integers"))),
    };
    let overflow = || OracleError::Eval("integer overflow".into());
    Ok(match bop {
        BinOp::And => {
            let (a, b) = bools()?;
            Value::Bool(a && b)
        }
        BinOp::Or => {
            let (a, b) = bools()?;
            Value::Bool(a || b)
        }
        BinOp::Implies => {
            let (a, b) = bools()?;
            Value::Bool(!a || b)
        }
        BinOp::Eq => Value::Bool(l == r),
        BinOp::Ne => Value::Bool(l != r),
        BinOp::Lt => {
            let (a, b) = ints()?;
            Value::Bool(a < b)
        }
        BinOp::Le => {
            let (a, b) = ints()?;
            Value::Bool(a <= b)
        }
        BinOp::Add => {
            let (a, b) = ints()?;
            Value::Int(a.checked_add(b).ok_or_else(overflow)?)
        }
        BinOp::Sub => {
            let (a, b) = ints()?;
            Value::Int(a.checked_sub(b).ok_or_else(overflow)?)
        }
        BinOp::Mul => {
            let (a, b) = ints()?;
            Value::Int(a.checked_mul(b).ok_or_else(overflow)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn carriers() {
        let d = DomainSpec::default();
        assert_eq!(d.carrier(&Type::Int).len(), 4);
        assert_eq!(d.carrier(&Type::seq(Type::Bool)).len(), 1 + 2 + 4);
        assert_eq!(
            d.carrier(&Type::Abstract { name: "Chem".into() })[1],
            Value::Sym("Chem#1".into())
        );
    }

    #[test]
    fn sampled_tables_are_reproducible() {
        let d = DomainSpec::default().with_seed(7);
        let args = [Value::Seq(vec![Value::Int(1)])];
        let a = d
            .sampled("analysis", &args, &Type::enumeration("S", &["a", "b", "c"]))
            .unwrap();
        let b = d
            .sampled("analysis", &args, &Type::enumeration("S", &["a", "b", "c"]))
            .unwrap();
        assert_eq!(a, b);
    }
}
