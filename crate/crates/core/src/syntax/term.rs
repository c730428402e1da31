//! Abstract syntax of programs.

use std::collections::BTreeSet;

use thiserror::Error;

use super::Dist;

/// Base types of the language. `PosReal` is a subtype of `Real`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaseType {
    Real,
    PosReal,
}

impl BaseType {
    pub fn is_sub(self, other: BaseType) -> bool {
        self == other || (self == BaseType::PosReal && other == BaseType::Real)
    }

    pub fn join(self, other: BaseType) -> BaseType {
        if self == BaseType::PosReal && other == BaseType::PosReal {
            BaseType::PosReal
        } else {
            BaseType::Real
        }
    }

    pub fn meet(self, other: BaseType) -> BaseType {
        if self == BaseType::Real && other == BaseType::Real {
            BaseType::Real
        } else {
            BaseType::PosReal
        }
    }

    /// Smallest base type containing the constant.
    pub fn of_constant(r: f64) -> BaseType {
        if r > 0.0 {
            BaseType::PosReal
        } else {
            BaseType::Real
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            BaseType::Real => "real",
            BaseType::PosReal => "preal",
        }
    }
}

/// Optional annotation fields written after `@` in a binder type.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SurfaceAnn {
    pub e: Option<u8>,
    pub g: Option<bool>,
    /// 1-based trace positions (`s1`, `s2`, ...).
    pub deps: Option<Vec<usize>>,
}

impl SurfaceAnn {
    pub fn is_empty(&self) -> bool {
        self.e.is_none() && self.g.is_none() && self.deps.is_none()
    }
}

/// A binder type hint as written in source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SurfaceType {
    Base(BaseType, SurfaceAnn),
    Fun(Box<SurfaceType>, Vec<Dist>, Box<SurfaceType>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Inv,
    Exp,
    Log,
    /// Logistic sigmoid at the configured accuracy; only produced by the smoothing compiler.
    Sigma,
}

impl UnOp {
    pub fn keyword(self) -> &'static str {
        match self {
            UnOp::Neg => "neg",
            UnOp::Inv => "inv",
            UnOp::Exp => "exp",
            UnOp::Log => "log",
            UnOp::Sigma => "sigma",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Mul,
}

impl BinOp {
    pub fn keyword(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Mul => "mul",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Mul => a * b,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Var(String),
    /// Index into the program's parameter list.
    Param(usize),
    Const(f64),
    Unary(UnOp, Box<Term>),
    Binary(BinOp, Box<Term>, Box<Term>),
    If(Box<Term>, Box<Term>, Box<Term>),
    Sample(Dist),
    Transform(Dist, Box<Term>),
    Lam(String, Option<SurfaceType>, Box<Term>),
    App(Box<Term>, Box<Term>),
    /// `times k M` (op = Add) and `pow M k` (op = Mul): k copies of M folded to the right.
    Repeat(BinOp, u32, Box<Term>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubstError {
    #[error("substituting sampling term for `{0}`")]
    SamplingTerm(String),
}

#[allow(clippy::should_implement_trait)]
impl Term {
    pub fn var(x: &str) -> Term {
        Term::Var(x.to_string())
    }
    pub fn add(a: Term, b: Term) -> Term {
        Term::Binary(BinOp::Add, Box::new(a), Box::new(b))
    }
    pub fn mul(a: Term, b: Term) -> Term {
        Term::Binary(BinOp::Mul, Box::new(a), Box::new(b))
    }
    pub fn unary(op: UnOp, a: Term) -> Term {
        Term::Unary(op, Box::new(a))
    }
    pub fn neg(a: Term) -> Term {
        Term::unary(UnOp::Neg, a)
    }
    pub fn if_(g: Term, m: Term, n: Term) -> Term {
        Term::If(Box::new(g), Box::new(m), Box::new(n))
    }
    pub fn lam(x: &str, body: Term) -> Term {
        Term::Lam(x.to_string(), None, Box::new(body))
    }
    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }
    pub fn transform(d: Dist, t: Term) -> Term {
        Term::Transform(d, Box::new(t))
    }

    /// Immediate subterms in evaluation order.
    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Param(_) | Term::Const(_) | Term::Sample(_) => vec![],
            Term::Unary(_, a) | Term::Transform(_, a) | Term::Lam(_, _, a) | Term::Repeat(_, _, a) => {
                vec![a]
            }
            Term::Binary(_, a, b) | Term::App(a, b) => vec![a, b],
            Term::If(g, m, n) => vec![g, m, n],
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().into_iter().map(Term::node_count).sum::<usize>()
    }

    pub fn count_ifs(&self) -> usize {
        let own = usize::from(matches!(self, Term::If(..)));
        own + self.children().into_iter().map(Term::count_ifs).sum::<usize>()
    }

    pub fn any(&self, pred: &dyn Fn(&Term) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any(pred))
    }

    pub fn contains_sigma(&self) -> bool {
        self.any(&|t| matches!(t, Term::Unary(UnOp::Sigma, _)))
    }

    pub fn contains_sampling(&self) -> bool {
        self.any(&|t| matches!(t, Term::Sample(_) | Term::Transform(..)))
    }

    pub fn contains_if(&self) -> bool {
        self.any(&|t| matches!(t, Term::If(..)))
    }

    /// Whether evaluating the term itself (not later applications of the
    /// functions it returns) draws from the trace.
    pub fn draws_samples(&self) -> bool {
        match self {
            Term::Sample(_) | Term::Transform(..) => true,
            Term::Lam(..) => false,
            _ => self.children().into_iter().any(Term::draws_samples),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Term::Lam(x, _, body) => {
                bound.push(x.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            _ => {
                for c in self.children() {
                    c.collect_free(bound, out);
                }
            }
        }
    }

    fn binders(&self, out: &mut BTreeSet<String>) {
        if let Term::Lam(x, _, _) = self {
            out.insert(x.clone());
        }
        for c in self.children() {
            c.binders(out);
        }
    }

    /// Capture-avoiding substitution of `value` for the free variable `x`.
    ///
    /// Fails if `value` would draw samples when evaluated.
    pub fn substitute(&self, x: &str, value: &Term) -> Result<Term, SubstError> {
        if value.draws_samples() {
            return Err(SubstError::SamplingTerm(x.to_string()));
        }
        let fv = value.free_vars();
        Ok(self.subst_inner(x, value, &fv))
    }

    fn subst_inner(&self, x: &str, v: &Term, fv: &BTreeSet<String>) -> Term {
        match self {
            Term::Var(y) if y == x => v.clone(),
            Term::Lam(y, _, _) if y == x => self.clone(),
            Term::Lam(y, hint, body) => {
                if fv.contains(y) && body.free_vars().contains(x) {
                    let mut taken = fv.clone();
                    taken.extend(body.free_vars());
                    body.binders(&mut taken);
                    let fresh = fresh_name(y, &taken);
                    let renamed = body.subst_inner(y, &Term::Var(fresh.clone()), &BTreeSet::new());
                    Term::Lam(fresh, hint.clone(), Box::new(renamed.subst_inner(x, v, fv)))
                } else {
                    Term::Lam(y.clone(), hint.clone(), Box::new(body.subst_inner(x, v, fv)))
                }
            }
            _ => self.map_children(|c| c.subst_inner(x, v, fv)),
        }
    }

    /// Rebuilds the node with each child replaced by `f(child)`.
    pub fn map_children(&self, mut f: impl FnMut(&Term) -> Term) -> Term {
        let b = |t: Term| Box::new(t);
        match self {
            Term::Var(_) | Term::Param(_) | Term::Const(_) | Term::Sample(_) => self.clone(),
            Term::Unary(op, a) => Term::Unary(*op, b(f(a))),
            Term::Binary(op, l, r) => {
                let l = f(l);
                Term::Binary(*op, b(l), b(f(r)))
            }
            Term::If(g, m, n) => {
                let g = f(g);
                let m = f(m);
                Term::If(b(g), b(m), b(f(n)))
            }
            Term::Transform(d, t) => Term::Transform(*d, b(f(t))),
            Term::Lam(x, h, body) => Term::Lam(x.clone(), h.clone(), b(f(body))),
            Term::App(g, a) => {
                let g = f(g);
                Term::App(b(g), b(f(a)))
            }
            Term::Repeat(op, k, a) => Term::Repeat(*op, *k, b(f(a))),
        }
    }

    /// Expands `times` and `pow` into right-nested `add` / `mul` chains.
    pub fn desugar_arith(&self) -> Term {
        match self {
            Term::Repeat(op, k, m) => {
                let m = m.desugar_arith();
                let mut acc = m.clone();
                for _ in 1..*k {
                    acc = Term::Binary(*op, Box::new(m.clone()), Box::new(acc));
                }
                acc
            }
            _ => self.map_children(Term::desugar_arith),
        }
    }

    /// Equality up to renaming of bound variables.
    pub fn alpha_eq(&self, other: &Term) -> bool {
        alpha_eq_in(self, other, &mut Vec::new())
    }
}

fn alpha_eq_in(a: &Term, b: &Term, env: &mut Vec<(String, String)>) -> bool {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => match env.iter().rev().find(|(l, r)| l == x || r == y) {
            Some((l, r)) => l == x && r == y,
            None => x == y,
        },
        (Term::Param(i), Term::Param(j)) => i == j,
        (Term::Const(r), Term::Const(s)) => r.to_bits() == s.to_bits(),
        (Term::Sample(d), Term::Sample(e)) => d == e,
        (Term::Unary(o, x), Term::Unary(p, y)) => o == p && alpha_eq_in(x, y, env),
        (Term::Binary(o, x1, x2), Term::Binary(p, y1, y2)) => {
            o == p && alpha_eq_in(x1, y1, env) && alpha_eq_in(x2, y2, env)
        }
        (Term::If(a1, a2, a3), Term::If(b1, b2, b3)) => {
            alpha_eq_in(a1, b1, env) && alpha_eq_in(a2, b2, env) && alpha_eq_in(a3, b3, env)
        }
        (Term::Transform(d, x), Term::Transform(e, y)) => d == e && alpha_eq_in(x, y, env),
        (Term::Lam(x, hx, bx), Term::Lam(y, hy, by)) => {
            if hx != hy {
                return false;
            }
            env.push((x.clone(), y.clone()));
            let r = alpha_eq_in(bx, by, env);
            env.pop();
            r
        }
        (Term::App(f1, a1), Term::App(f2, a2)) => alpha_eq_in(f1, f2, env) && alpha_eq_in(a1, a2, env),
        (Term::Repeat(o, k, x), Term::Repeat(p, j, y)) => o == p && k == j && alpha_eq_in(x, y, env),
        _ => false,
    }
}

/// First of `base`, `base_1`, `base_2`, ... not in `taken`.
pub fn fresh_name(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..).map(|i| format!("{base}_{i}")).find(|n| !taken.contains(n)).expect("unbounded counter")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub base: BaseType,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub params: Vec<ParamDecl>,
    pub body: Term,
}

impl Program {
    pub fn alpha_eq(&self, other: &Program) -> bool {
        self.params == other.params && self.body.alpha_eq(&other.body)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_avoids_capture() {
        // (lam y (add x y))[y/x] must not capture.
        let t = Term::lam("y", Term::add(Term::var("x"), Term::var("y")));
        let r = t.substitute("x", &Term::var("y")).unwrap();
        match &r {
            Term::Lam(z, _, body) => {
                assert_ne!(z, "y");
                assert_eq!(**body, Term::add(Term::var("y"), Term::var(z)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn substitution_respects_shadowing() {
        let t = Term::lam("x", Term::var("x"));
        assert_eq!(t.substitute("x", &Term::Const(3.0)).unwrap(), t);
    }

    #[test]
    fn substitution_rejects_sampling_values() {
        let t = Term::var("x");
        assert!(matches!(t.substitute("x", &Term::Sample(Dist::Normal)), Err(SubstError::SamplingTerm(_))));
        // A lambda whose body samples draws nothing when evaluated.
        let v = Term::lam("z", Term::Sample(Dist::Normal));
        assert_eq!(t.substitute("x", &v).unwrap(), v);
    }

    #[test]
    fn desugar_is_right_nested() {
        let t = Term::Repeat(BinOp::Add, 3, Box::new(Term::Sample(Dist::Normal)));
        let s = || Term::Sample(Dist::Normal);
        assert_eq!(t.desugar_arith(), Term::add(s(), Term::add(s(), s())));
        let p = Term::Repeat(BinOp::Mul, 1, Box::new(Term::Param(0)));
        assert_eq!(p.desugar_arith(), Term::Param(0));
    }

    #[test]
    fn alpha_equivalence() {
        let a = Term::lam("x", Term::lam("y", Term::var("x")));
        let b = Term::lam("u", Term::lam("v", Term::var("u")));
        let c = Term::lam("u", Term::lam("v", Term::var("v")));
        assert!(a.alpha_eq(&b));
        assert!(!a.alpha_eq(&c));
        assert!(!Term::var("x").alpha_eq(&Term::var("y")));
    }

    #[test]
    fn counts() {
        let t = Term::if_(Term::Const(0.0), Term::Const(1.0), Term::Const(2.0));
        assert_eq!(t.node_count(), 4);
        assert_eq!(t.count_ifs(), 1);
    }
}
