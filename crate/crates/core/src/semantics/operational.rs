//! Big-step operational semantics by substitution.
//!
//! Independent of the environment machine: functions are applied by
//! substituting the argument value into the body, and each draw multiplies
//! the weight by its density.

use crate::syntax::{BaseType, BinOp, Program, Term, UnOp};

use super::EvalError;

#[derive(Clone, Debug, PartialEq)]
pub struct OperationalResult {
    /// A value form: `Const` or `Lam`.
    pub value: Term,
    /// Sum of the log densities of all draws.
    pub log_weight: f64,
}

impl OperationalResult {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    pub fn real(&self) -> Option<f64> {
        match self.value {
            Term::Const(r) => Some(r),
            _ => None,
        }
    }
}

struct Reducer<'a> {
    theta: &'a [f64],
    trace: &'a [f64],
    pos: usize,
    log_weight: f64,
}

fn constant(v: Term, what: &str) -> Result<f64, EvalError> {
    match v {
        Term::Const(r) => Ok(r),
        _ => Err(EvalError::Type(format!("{what} must be a real number"))),
    }
}

impl Reducer<'_> {
    fn draw(&mut self, d: crate::syntax::Dist) -> Result<f64, EvalError> {
        let s = *self.trace.get(self.pos).ok_or(EvalError::TraceExhausted(self.trace.len()))?;
        self.pos += 1;
        self.log_weight += d.log_pdf(s);
        Ok(s)
    }

    fn reduce(&mut self, t: &Term) -> Result<Term, EvalError> {
        match t {
            Term::Const(_) | Term::Lam(..) => Ok(t.clone()),
            Term::Param(i) => {
                self.theta.get(*i).map(|r| Term::Const(*r)).ok_or_else(|| EvalError::Type(format!("no parameter #{i}")))
            }
            Term::Var(x) => Err(EvalError::Type(format!("free variable `{x}`"))),
            Term::Unary(op, a) => {
                let x = constant(self.reduce(a)?, op.keyword())?;
                let r = match op {
                    UnOp::Neg => -x,
                    UnOp::Exp => x.exp(),
                    UnOp::Inv if x == 0.0 => return Err(EvalError::Domain("inv of 0".into())),
                    UnOp::Inv => 1.0 / x,
                    UnOp::Log if x <= 0.0 || x.is_nan() => return Err(EvalError::Domain(format!("log of {x}"))),
                    UnOp::Log => x.ln(),
                    UnOp::Sigma => return Err(EvalError::MissingAccuracy),
                };
                Ok(Term::Const(r))
            }
            Term::Binary(op, l, r) => {
                let x = constant(self.reduce(l)?, op.keyword())?;
                let y = constant(self.reduce(r)?, op.keyword())?;
                Ok(Term::Const(op.apply(x, y)))
            }
            Term::If(g, m, n) => {
                let g = constant(self.reduce(g)?, "guard")?;
                let vm = self.reduce(m)?;
                let vn = self.reduce(n)?;
                Ok(if g < 0.0 { vm } else { vn })
            }
            Term::Sample(d) => Ok(Term::Const(self.draw(*d)?)),
            Term::Transform(d, tf) => {
                let f = self.reduce(tf)?;
                let s = self.draw(*d)?;
                self.beta(f, Term::Const(s))
            }
            Term::App(f, a) => {
                let f = self.reduce(f)?;
                let a = self.reduce(a)?;
                self.beta(f, a)
            }
            Term::Repeat(op, k, m) => {
                let mut vals = Vec::with_capacity(*k as usize);
                for _ in 0..*k {
                    vals.push(constant(self.reduce(m)?, op.keyword())?);
                }
                let mut acc = vals.pop().expect("k >= 1");
                while let Some(v) = vals.pop() {
                    acc = BinOp::apply(*op, v, acc);
                }
                Ok(Term::Const(acc))
            }
        }
    }

    fn beta(&mut self, f: Term, arg: Term) -> Result<Term, EvalError> {
        match f {
            Term::Lam(x, _, body) => {
                let body = body.substitute(&x, &arg)?;
                self.reduce(&body)
            }
            _ => Err(EvalError::Type("applying a real number".into())),
        }
    }
}

/// Reduces the program to a value, returning the value and the trace weight.
pub fn eval_operational(p: &Program, theta: &[f64], trace: &[f64]) -> Result<OperationalResult, EvalError> {
    if theta.len() != p.params.len() {
        return Err(EvalError::ParamCount { expected: p.params.len(), got: theta.len() });
    }
    for (decl, v) in p.params.iter().zip(theta) {
        if decl.base == BaseType::PosReal && (v.is_nan() || *v <= 0.0) {
            return Err(EvalError::ParamDomain { name: decl.name.clone(), value: *v });
        }
    }
    let mut r = Reducer { theta, trace, pos: 0, log_weight: 0.0 };
    let value = r.reduce(&p.body)?;
    if r.pos != trace.len() {
        return Err(EvalError::TraceNotConsumed { used: r.pos, len: trace.len() });
    }
    Ok(OperationalResult { value, log_weight: r.log_weight })
}
