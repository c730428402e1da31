//! Environment-based evaluator, generic over the scalar type.

use std::rc::Rc;

use crate::syntax::{BaseType, BinOp, Dist, Program, Term, UnOp};
use crate::types::affine_parts;

use super::value::{combine_safe, lookup, Closure, Env, Frame, Value};
use super::{EvalError, Scalar, SmoothingConfig};

/// How conditionals are interpreted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Branching {
    /// Negative guards select the first branch, others the second.
    Measurable,
    /// `sigma(-g) * then + sigma(g) * else`.
    Smoothed(SmoothingConfig),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub branching: Branching,
    /// Accuracy used by `sigma` nodes of compiled programs.
    pub sigma: Option<SmoothingConfig>,
}

impl EvalOptions {
    pub fn measurable() -> EvalOptions {
        EvalOptions { branching: Branching::Measurable, sigma: None }
    }

    pub fn smoothed(cfg: SmoothingConfig) -> EvalOptions {
        EvalOptions { branching: Branching::Smoothed(cfg), sigma: None }
    }
}

struct Machine<'a, S> {
    params: &'a [S],
    trace: &'a [f64],
    pos: usize,
    opts: EvalOptions,
    /// When set, transformed values are treated as constants and their log
    /// density is accumulated here.
    log_q: Option<S>,
    guards: Option<Vec<bool>>,
}

fn real<'p, S: Scalar>(v: Value<'p, S>, what: &str) -> Result<S, EvalError> {
    match v {
        Value::Real(x) => Ok(x),
        _ => Err(EvalError::Type(format!("{what} must be a real number"))),
    }
}

fn log_density<S: Scalar>(d: Dist, x: &S) -> Result<S, EvalError> {
    match d {
        Dist::Normal => Ok(S::constant(-0.5).mul(&x.mul(x)).add(&S::constant(-0.918_938_533_204_672_8))),
        Dist::Logistic => {
            // Symmetric density, so work with |x| for stability.
            let a = if x.value() < 0.0 { x.neg() } else { x.clone() };
            Ok(a.neg().add(&S::constant(-2.0).mul(&S::constant(1.0).add(&a.neg().exp()).ln())))
        }
        Dist::Exponential => Ok(x.neg()),
        Dist::Cauchy => Err(EvalError::NotAffine),
    }
}

impl<'a, 'p, S: Scalar> Machine<'a, S> {
    fn draw(&mut self) -> Result<f64, EvalError> {
        let s = *self.trace.get(self.pos).ok_or(EvalError::TraceExhausted(self.trace.len()))?;
        self.pos += 1;
        Ok(s)
    }

    fn eval(&mut self, t: &'p Term, env: &Env<'p, S>) -> Result<Value<'p, S>, EvalError> {
        match t {
            Term::Var(x) => lookup(env, x).cloned().ok_or_else(|| EvalError::Type(format!("unbound variable `{x}`"))),
            Term::Param(i) => self
                .params
                .get(*i)
                .map(|p| Value::Real(p.clone()))
                .ok_or_else(|| EvalError::Type(format!("no parameter #{i}"))),
            Term::Const(r) => Ok(Value::Real(S::constant(*r))),
            Term::Unary(op, a) => {
                let x = real(self.eval(a, env)?, op.keyword())?;
                self.unary(*op, &x).map(Value::Real)
            }
            Term::Binary(op, l, r) => {
                let x = real(self.eval(l, env)?, op.keyword())?;
                let y = real(self.eval(r, env)?, op.keyword())?;
                Ok(Value::Real(binary(*op, &x, &y)))
            }
            Term::If(g, m, n) => {
                let g = real(self.eval(g, env)?, "guard")?;
                let vm = self.eval(m, env)?;
                let vn = self.eval(n, env)?;
                match self.opts.branching {
                    Branching::Measurable => {
                        if self.log_q.is_some() && !g.is_constant() {
                            return Err(EvalError::ParameterGuard);
                        }
                        let first = g.value() < 0.0;
                        if let Some(log) = &mut self.guards {
                            log.push(first);
                        }
                        Ok(if first { vm } else { vn })
                    }
                    Branching::Smoothed(cfg) => {
                        let w1 = g.neg().sigma(cfg.eta());
                        let w2 = g.sigma(cfg.eta());
                        combine_safe(w1, vm, w2, vn)
                    }
                }
            }
            Term::Sample(_) => Ok(Value::Real(S::constant(self.draw()?))),
            Term::Transform(d, tf) => {
                if self.log_q.is_some() {
                    return self.fixed_transform(*d, tf, env);
                }
                let f = self.eval(tf, env)?;
                let s = self.draw()?;
                self.apply(&f, Value::Real(S::constant(s)))
            }
            Term::Lam(x, _, body) => Ok(Value::Closure(Rc::new(Closure { binder: x, body, env: env.clone() }))),
            Term::App(f, a) => {
                let f = self.eval(f, env)?;
                let a = self.eval(a, env)?;
                self.apply(&f, a)
            }
            Term::Repeat(op, k, m) => {
                let mut vals = Vec::with_capacity(*k as usize);
                for _ in 0..*k {
                    vals.push(real(self.eval(m, env)?, op.keyword())?);
                }
                let mut acc = vals.pop().expect("k >= 1");
                while let Some(v) = vals.pop() {
                    acc = binary(*op, &v, &acc);
                }
                Ok(Value::Real(acc))
            }
        }
    }

    fn unary(&self, op: UnOp, x: &S) -> Result<S, EvalError> {
        let v = x.value();
        match op {
            UnOp::Neg => Ok(x.neg()),
            UnOp::Exp => Ok(x.exp()),
            UnOp::Inv if v == 0.0 => Err(EvalError::Domain("inv of 0".into())),
            UnOp::Inv => Ok(x.inv()),
            UnOp::Log if v <= 0.0 || v.is_nan() => Err(EvalError::Domain(format!("log of {v}"))),
            UnOp::Log => Ok(x.ln()),
            UnOp::Sigma => {
                let cfg = self.opts.sigma.ok_or(EvalError::MissingAccuracy)?;
                Ok(x.sigma(cfg.eta()))
            }
        }
    }

    fn apply(&mut self, f: &Value<'p, S>, arg: Value<'p, S>) -> Result<Value<'p, S>, EvalError> {
        match f {
            Value::Closure(c) => {
                let env = Some(Rc::new(Frame { name: c.binder, value: arg, next: c.env.clone() }));
                self.eval(c.body, &env)
            }
            Value::Combo(c) => {
                let before = self.pos;
                let r1 = self.apply(&c.v1, arg.clone())?;
                let r2 = self.apply(&c.v2, arg)?;
                if self.pos != before {
                    return Err(EvalError::UnsafeCombination);
                }
                combine_safe(c.w1.clone(), r1, c.w2.clone(), r2)
            }
            Value::Real(_) => Err(EvalError::Type("applying a real number".into())),
        }
    }

    fn fixed_transform(&mut self, d: Dist, tf: &'p Term, env: &Env<'p, S>) -> Result<Value<'p, S>, EvalError> {
        let aff = affine_parts(tf).ok_or(EvalError::NotAffine)?;
        let scale = match aff.scale {
            Some(a) => Some(real(self.eval(a, env)?, "transform scale")?),
            None => None,
        };
        let shift = match aff.shift {
            Some(b) => Some(real(self.eval(b, env)?, "transform shift")?),
            None => None,
        };
        let s = self.draw()?;
        // Same floating-point operations as applying the transform.
        let mut z = s;
        if let Some(a) = &scale {
            z *= a.value();
        }
        if let Some(b) = &shift {
            z += b.value();
        }
        let zc = S::constant(z);
        let mut base = match &shift {
            Some(b) => zc.add(&b.neg()),
            None => zc.clone(),
        };
        let mut lq = match &scale {
            Some(a) => {
                if a.value() <= 0.0 {
                    return Err(EvalError::Domain("transform scale must be positive".into()));
                }
                base = base.mul(&a.inv());
                a.ln().neg()
            }
            None => S::constant(0.0),
        };
        lq = lq.add(&log_density(d, &base)?);
        let acc = self.log_q.take().expect("fixed-transform mode");
        self.log_q = Some(acc.add(&lq));
        Ok(Value::Real(zc))
    }
}

fn binary<S: Scalar>(op: BinOp, x: &S, y: &S) -> S {
    match op {
        BinOp::Add => x.add(y),
        BinOp::Mul => x.mul(y),
    }
}

fn check_params<S: Scalar>(p: &Program, theta: &[S]) -> Result<(), EvalError> {
    if theta.len() != p.params.len() {
        return Err(EvalError::ParamCount { expected: p.params.len(), got: theta.len() });
    }
    for (decl, v) in p.params.iter().zip(theta) {
        let v = v.value();
        if decl.base == BaseType::PosReal && (v.is_nan() || v <= 0.0) {
            return Err(EvalError::ParamDomain { name: decl.name.clone(), value: v });
        }
    }
    Ok(())
}

/// Value, accumulated log-density and guard signature.
type RunOutput<'p, S> = (Value<'p, S>, Option<S>, Option<Vec<bool>>);

fn run<'p, S: Scalar>(
    p: &'p Program,
    theta: &[S],
    trace: &[f64],
    opts: EvalOptions,
    log_q: Option<S>,
    guards: Option<Vec<bool>>,
) -> Result<RunOutput<'p, S>, EvalError> {
    check_params(p, theta)?;
    let mut m = Machine { params: theta, trace, pos: 0, opts, log_q, guards };
    let v = m.eval(&p.body, &None)?;
    if m.pos != trace.len() {
        return Err(EvalError::TraceNotConsumed { used: m.pos, len: trace.len() });
    }
    Ok((v, m.log_q, m.guards))
}

/// Evaluates the program under the given interpretation of conditionals.
pub fn eval_with<'p, S: Scalar>(
    p: &'p Program,
    theta: &[S],
    trace: &[f64],
    opts: EvalOptions,
) -> Result<Value<'p, S>, EvalError> {
    run(p, theta, trace, opts, None, None).map(|r| r.0)
}

/// Like [`eval_with`] but requires a real result.
pub fn eval_real<S: Scalar>(p: &Program, theta: &[S], trace: &[f64], opts: EvalOptions) -> Result<S, EvalError> {
    real(eval_with(p, theta, trace, opts)?, "program result")
}

pub fn eval_measurable<'p>(p: &'p Program, theta: &[f64], trace: &[f64]) -> Result<Value<'p, f64>, EvalError> {
    eval_with(p, theta, trace, EvalOptions::measurable())
}

pub fn eval_smoothed<'p>(
    p: &'p Program,
    theta: &[f64],
    trace: &[f64],
    cfg: SmoothingConfig,
) -> Result<Value<'p, f64>, EvalError> {
    eval_with(p, theta, trace, EvalOptions::smoothed(cfg))
}

/// Evaluates an output of the smoothing compiler, whose `sigma` nodes use `cfg`.
pub fn eval_compiled<'p>(
    p: &'p Program,
    theta: &[f64],
    trace: &[f64],
    cfg: SmoothingConfig,
) -> Result<Value<'p, f64>, EvalError> {
    eval_with(p, theta, trace, EvalOptions { branching: Branching::Measurable, sigma: Some(cfg) })
}

/// Measurable value together with the sign of every guard in evaluation order
/// (`true` when the first branch was taken).
pub fn guard_signature(p: &Program, theta: &[f64], trace: &[f64]) -> Result<(f64, Vec<bool>), EvalError> {
    let (v, _, guards) = run(p, theta, trace, EvalOptions::measurable(), None, Some(Vec::new()))?;
    Ok((real(v, "program result")?, guards.unwrap_or_default()))
}

/// Measurable evaluation where the value `z` of every `transform` is held
/// constant (it is computed from the draw, but no derivative flows through
/// it). Returns the result and `log q(z)`, the log density of all
/// transformed values under the current parameters. Transforms must be
/// affine.
pub fn eval_with_fixed_transforms<S: Scalar>(p: &Program, theta: &[S], trace: &[f64]) -> Result<(S, S), EvalError> {
    let (v, lq, _) = run(p, theta, trace, EvalOptions::measurable(), Some(S::constant(0.0)), None)?;
    Ok((real(v, "program result")?, lq.expect("fixed-transform mode")))
}
