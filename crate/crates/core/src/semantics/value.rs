//! Runtime values.

use std::fmt;
use std::rc::Rc;

use crate::syntax::Term;

use super::{EvalError, Scalar};

pub struct Closure<'p, S> {
    pub binder: &'p str,
    pub body: &'p Term,
    pub(crate) env: Env<'p, S>,
}

/// A weighted blend of two functions produced by a smoothed conditional.
/// Applying it applies both members and blends the results.
pub struct Combo<'p, S> {
    pub w1: S,
    pub v1: Value<'p, S>,
    pub w2: S,
    pub v2: Value<'p, S>,
}

pub enum Value<'p, S> {
    Real(S),
    Closure(Rc<Closure<'p, S>>),
    Combo(Rc<Combo<'p, S>>),
}

impl<S: Clone> Clone for Value<'_, S> {
    fn clone(&self) -> Self {
        match self {
            Value::Real(x) => Value::Real(x.clone()),
            Value::Closure(c) => Value::Closure(Rc::clone(c)),
            Value::Combo(c) => Value::Combo(Rc::clone(c)),
        }
    }
}

impl<S: Scalar> Value<'_, S> {
    pub fn as_real(&self) -> Option<&S> {
        match self {
            Value::Real(x) => Some(x),
            _ => None,
        }
    }
}

impl<S: Scalar> fmt::Debug for Value<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) => write!(f, "Real({x:?})"),
            Value::Closure(c) => write!(f, "Closure({})", c.binder),
            Value::Combo(_) => f.write_str("Combo"),
        }
    }
}

impl<S: Scalar> fmt::Display for Value<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) => write!(f, "{}", x.value()),
            Value::Closure(c) => write!(f, "<function of {}>", c.binder),
            Value::Combo(_) => f.write_str("<blended function>"),
        }
    }
}

#[derive(Clone)]
pub(crate) struct Frame<'p, S> {
    pub(crate) name: &'p str,
    pub(crate) value: Value<'p, S>,
    pub(crate) next: Env<'p, S>,
}

pub(crate) type Env<'p, S> = Option<Rc<Frame<'p, S>>>;

pub(crate) fn lookup<'e, 'p, S>(env: &'e Env<'p, S>, x: &str) -> Option<&'e Value<'p, S>> {
    let mut cur = env.as_deref();
    while let Some(frame) = cur {
        if frame.name == x {
            return Some(&frame.value);
        }
        cur = frame.next.as_deref();
    }
    None
}

/// `w1 * v1 + w2 * v2` for reals; a lazily applied blend for functions.
pub fn combine_safe<'p, S: Scalar>(
    w1: S,
    v1: Value<'p, S>,
    w2: S,
    v2: Value<'p, S>,
) -> Result<Value<'p, S>, EvalError> {
    match (&v1, &v2) {
        (Value::Real(a), Value::Real(b)) => Ok(Value::Real(w1.mul(a).add(&w2.mul(b)))),
        (Value::Real(_), _) | (_, Value::Real(_)) => Err(EvalError::CombinationMismatch),
        _ => Ok(Value::Combo(Rc::new(Combo { w1, v1, w2, v2 }))),
    }
}
