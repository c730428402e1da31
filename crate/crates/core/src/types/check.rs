//! The checker shared by all systems.
//!
//! Terms are typed in evaluation order so that every `sample` gets the next
//! trace position. A function body typed as a value numbers its draws
//! locally; applying the function renames those to fresh positions.
//!
//! Unannotated binders of a lambda in function position (possibly under a
//! spine of applications) take the type of the argument. Any other
//! unannotated binder defaults to the real base type.

use std::marker::PhantomData;

use crate::syntax::{BaseType, BinOp, Dist, ParamDecl, Program, SurfaceType, Term};

use super::diffeo::is_diffeomorphic_transform;
use super::system::{Basic, Poly, RuleError, Sgd, System, Unif};
use super::{Annotation, CoreType, Judgement, Slot, TraceSlot, TraceType, Ty, TypeError, TypeErrorKind};

type Trace = Vec<TraceSlot>;

#[derive(Clone)]
pub(crate) struct Binding<A> {
    name: String,
    ty: Ty<A>,
    defaulted: bool,
}

enum Head<'t, A> {
    Done(Ty<A>),
    Pending { binder: &'t str, body: &'t Term, ctx: Vec<Binding<A>> },
}

enum Arg<'t> {
    Term(&'t Term),
    Sample(Dist),
}

enum Alloc {
    Global(usize),
    Local { uid: u32, next: usize },
}

pub(crate) struct Checker<'p, S: System> {
    params: &'p [ParamDecl],
    path: Vec<&'static str>,
    allocs: Vec<Alloc>,
    next_uid: u32,
    /// Cleared when a binder, an argument or a conditional has function type.
    pub(crate) first_order: bool,
    _system: PhantomData<S>,
}

fn concat(mut a: Trace, b: Trace) -> Trace {
    a.extend(b);
    a
}

/// `l <: r` in system `S`.
pub fn subtype<S: System>(l: &Ty<S::Ann>, r: &Ty<S::Ann>) -> bool {
    match (l, r) {
        (Ty::Base(b1, a1), Ty::Base(b2, a2)) => S::sub((*b1, a1), (*b2, a2)),
        (Ty::Fun(a1, s1, r1), Ty::Fun(a2, s2, r2)) => match align(s1, s2) {
            Some(rn) => subtype::<S>(a2, a1) && subtype::<S>(r1, &r2.rename(&rn)),
            None => false,
        },
        _ => false,
    }
}

pub fn subtype_core(l: &CoreType, r: &CoreType) -> bool {
    subtype::<Basic>(l, r)
}

/// Renaming that maps the slots of `from` onto those of `onto`, if the traces agree.
fn align(onto: &Trace, from: &Trace) -> Option<impl Fn(Slot) -> Slot> {
    if onto.len() != from.len() || onto.iter().zip(from).any(|(a, b)| a.dist != b.dist) {
        return None;
    }
    let map: Vec<(Slot, Slot)> = from.iter().zip(onto).map(|(f, o)| (f.slot, o.slot)).collect();
    Some(move |s: Slot| map.iter().find(|(f, _)| *f == s).map_or(s, |(_, o)| *o))
}

/// Least upper bound, if one exists.
pub fn join<S: System>(l: &Ty<S::Ann>, r: &Ty<S::Ann>) -> Option<Ty<S::Ann>> {
    match (l, r) {
        (Ty::Base(b1, a1), Ty::Base(b2, a2)) => S::join((*b1, a1), (*b2, a2)).map(|(b, a)| Ty::Base(b, a)),
        (Ty::Fun(a1, s1, r1), Ty::Fun(a2, s2, r2)) => {
            let rn = align(s1, s2)?;
            Some(Ty::fun(meet::<S>(a1, a2)?, s1.clone(), join::<S>(r1, &r2.rename(&rn))?))
        }
        _ => None,
    }
}

/// Greatest lower bound, if one exists.
pub fn meet<S: System>(l: &Ty<S::Ann>, r: &Ty<S::Ann>) -> Option<Ty<S::Ann>> {
    match (l, r) {
        (Ty::Base(b1, a1), Ty::Base(b2, a2)) => S::meet((*b1, a1), (*b2, a2)).map(|(b, a)| Ty::Base(b, a)),
        (Ty::Fun(a1, s1, r1), Ty::Fun(a2, s2, r2)) => {
            let rn = align(s1, s2)?;
            Some(Ty::fun(join::<S>(a1, a2)?, s1.clone(), meet::<S>(r1, &r2.rename(&rn))?))
        }
        _ => None,
    }
}

/// Safe types: those a conditional may return.
pub fn is_safe<S: System>(t: &Ty<S::Ann>) -> bool {
    match t {
        Ty::Base(b, a) => S::safe(*b, a),
        Ty::Fun(a, trace, r) => trace.is_empty() && is_safe::<S>(a) && is_safe::<S>(r),
    }
}

impl<'p, S: System> Checker<'p, S> {
    pub(crate) fn new(params: &'p [ParamDecl]) -> Self {
        Checker {
            params,
            path: vec!["body"],
            allocs: vec![Alloc::Global(0)],
            next_uid: 0,
            first_order: true,
            _system: PhantomData,
        }
    }

    fn err(&self, kind: TypeErrorKind, rule: &'static str, detail: impl Into<String>) -> TypeError {
        TypeError { kind, rule, path: self.path.join("/"), detail: detail.into() }
    }

    fn lift<T>(&self, rule: &'static str, r: Result<T, RuleError>) -> Result<T, TypeError> {
        r.map_err(|e| self.err(e.kind, rule, e.detail))
    }

    fn within<T>(&mut self, seg: &'static str, f: impl FnOnce(&mut Self) -> T) -> T {
        self.path.push(seg);
        let r = f(self);
        self.path.pop();
        r
    }

    fn fresh_slot(&mut self) -> Slot {
        match self.allocs.last_mut().expect("allocator stack is never empty") {
            Alloc::Global(n) => {
                *n += 1;
                Slot::Pos(*n - 1)
            }
            Alloc::Local { uid, next } => {
                *next += 1;
                Slot::Local(*uid, *next - 1)
            }
        }
    }

    fn fresh_uid(&mut self) -> u32 {
        self.next_uid += 1;
        self.next_uid
    }

    fn lower_surface(&mut self, t: &SurfaceType) -> Ty<S::Ann> {
        match t {
            SurfaceType::Base(b, ann) => Ty::Base(*b, S::from_surface(*b, ann)),
            SurfaceType::Fun(a, dists, r) => {
                let uid = self.fresh_uid();
                let trace =
                    dists.iter().enumerate().map(|(k, d)| TraceSlot { slot: Slot::Local(uid, k), dist: *d }).collect();
                Ty::fun(self.lower_surface(a), trace, self.lower_surface(r))
            }
        }
    }

    pub(crate) fn infer(&mut self, ctx: &[Binding<S::Ann>], t: &Term) -> Result<(Trace, Ty<S::Ann>), TypeError> {
        let (trace, head) = self.infer_head(ctx, t)?;
        let ty = match head {
            Head::Done(ty) => ty,
            Head::Pending { binder, body, ctx } => self.lambda(&ctx, binder, None, body)?,
        };
        Ok((trace, ty))
    }

    fn lambda(
        &mut self,
        ctx: &[Binding<S::Ann>],
        binder: &str,
        hint: Option<&SurfaceType>,
        body: &Term,
    ) -> Result<Ty<S::Ann>, TypeError> {
        let (arg, defaulted) = match hint {
            Some(h) => (self.lower_surface(h), false),
            None => (Ty::Base(BaseType::Real, S::default_binder()), true),
        };
        if !arg.is_base() {
            self.first_order = false;
        }
        let uid = self.fresh_uid();
        self.allocs.push(Alloc::Local { uid, next: 0 });
        let mut inner = ctx.to_vec();
        inner.push(Binding { name: binder.to_string(), ty: arg.clone(), defaulted });
        let r = self.within("lam.body", |c| c.infer(&inner, body));
        self.allocs.pop();
        let (trace, res) = r?;
        Ok(Ty::fun(arg, trace, res))
    }

    fn infer_head<'t>(&mut self, ctx: &[Binding<S::Ann>], t: &'t Term) -> Result<(Trace, Head<'t, S::Ann>), TypeError> {
        match t {
            Term::Lam(x, None, body) => Ok((vec![], Head::Pending { binder: x, body, ctx: ctx.to_vec() })),
            Term::Lam(x, Some(hint), body) => Ok((vec![], Head::Done(self.lambda(ctx, x, Some(hint), body)?))),
            Term::App(f, a) => self.app(ctx, f, Arg::Term(a)),
            Term::Transform(d, tf) if !S::TRANSFORM_RULE => {
                self.within("transform", |c| c.app(ctx, tf, Arg::Sample(*d)))
            }
            _ => self.infer_simple(ctx, t).map(|(trace, ty)| (trace, Head::Done(ty))),
        }
    }

    fn app<'t>(
        &mut self,
        ctx: &[Binding<S::Ann>],
        f: &'t Term,
        arg: Arg<'_>,
    ) -> Result<(Trace, Head<'t, S::Ann>), TypeError> {
        let (t1, head) = self.within("app.fn", |c| c.infer_head(ctx, f))?;
        let (t2, arg_ty) = match arg {
            Arg::Term(a) => self.within("app.arg", |c| c.infer(ctx, a))?,
            Arg::Sample(d) => self.sample(d)?,
        };
        if !arg_ty.is_base() {
            self.first_order = false;
        }
        match head {
            Head::Pending { binder, body, ctx: mut inner } => {
                inner.push(Binding { name: binder.to_string(), ty: arg_ty, defaulted: false });
                self.path.extend(["app.fn", "lam.body"]);
                let r = self.infer_head(&inner, body);
                self.path.truncate(self.path.len() - 2);
                let (t3, h) = r?;
                Ok((concat(concat(t1, t2), t3), h))
            }
            Head::Done(Ty::Fun(param, sig, res)) => {
                if !subtype::<S>(&arg_ty, &param) {
                    return Err(self.err(
                        TypeErrorKind::IllTyped,
                        "app",
                        format!("argument of type {arg_ty} does not fit parameter type {param}"),
                    ));
                }
                let fresh: Vec<(Slot, TraceSlot)> =
                    sig.iter().map(|ts| (ts.slot, TraceSlot { slot: self.fresh_slot(), dist: ts.dist })).collect();
                let rn = |s: Slot| fresh.iter().find(|(old, _)| *old == s).map_or(s, |(_, n)| n.slot);
                let res = res.rename(&rn);
                let t3 = fresh.iter().map(|(_, n)| *n).collect();
                Ok((concat(concat(t1, t2), t3), Head::Done(res)))
            }
            Head::Done(ty @ Ty::Base(..)) => {
                let defaulted_var = match f {
                    Term::Var(x) => ctx.iter().rev().find(|b| &b.name == x).is_some_and(|b| b.defaulted),
                    _ => false,
                };
                if defaulted_var {
                    Err(self.err(
                        TypeErrorKind::UnannotatedHigherOrderBinder,
                        "app",
                        "binder is used as a function; annotate it with a `(fun ...)` type",
                    ))
                } else {
                    Err(self.err(TypeErrorKind::IllTyped, "app", format!("applying a value of type {ty}")))
                }
            }
        }
    }

    fn sample(&mut self, d: Dist) -> Result<(Trace, Ty<S::Ann>), TypeError> {
        let slot = self.fresh_slot();
        let ann = self.lift("sample", S::sample(d, slot))?;
        Ok((vec![TraceSlot { slot, dist: d }], Ty::Base(BaseType::Real, ann)))
    }

    fn base_of(&self, rule: &'static str, ty: Ty<S::Ann>) -> Result<(BaseType, S::Ann), TypeError> {
        match ty {
            Ty::Base(b, a) => Ok((b, a)),
            other => Err(self.err(TypeErrorKind::IllTyped, rule, format!("expected a base type, found {other}"))),
        }
    }

    fn infer_simple(&mut self, ctx: &[Binding<S::Ann>], t: &Term) -> Result<(Trace, Ty<S::Ann>), TypeError> {
        match t {
            Term::Var(x) => match ctx.iter().rev().find(|b| &b.name == x) {
                Some(b) => Ok((vec![], b.ty.clone())),
                None => Err(self.err(TypeErrorKind::UnboundVariable, "var", format!("`{x}`"))),
            },
            Term::Param(i) => match self.params.get(*i) {
                Some(p) => Ok((vec![], Ty::Base(p.base, S::param(p.base)))),
                None => Err(self.err(TypeErrorKind::UnboundVariable, "param", format!("parameter #{i}"))),
            },
            Term::Const(r) => {
                let (b, a) = S::constant(*r);
                Ok((vec![], Ty::Base(b, a)))
            }
            Term::Unary(op, a) => {
                let (tr, ty) = self.within(op.keyword(), |c| c.infer(ctx, a))?;
                let (b, ann) = self.base_of(op.keyword(), ty)?;
                let (rb, ra) = self.lift(op.keyword(), S::unary(*op, b, &ann))?;
                Ok((tr, Ty::Base(rb, ra)))
            }
            Term::Binary(op, l, r) => {
                let (t1, lt) = self.within(op.keyword(), |c| c.infer(ctx, l))?;
                let (t2, rt) = self.within(op.keyword(), |c| c.infer(ctx, r))?;
                let lb = self.base_of(op.keyword(), lt)?;
                let rb = self.base_of(op.keyword(), rt)?;
                let (b, a) = self.lift(op.keyword(), S::binary(*op, (lb.0, &lb.1), (rb.0, &rb.1)))?;
                Ok((concat(t1, t2), Ty::Base(b, a)))
            }
            Term::If(g, m, n) => {
                let (tg, gt) = self.within("if.guard", |c| c.infer(ctx, g))?;
                let (gb, ga) = self.base_of("if", gt)?;
                self.within("if.guard", |c| {
                    let r = S::guard(gb, &ga);
                    c.lift("if", r)
                })?;
                let (tm, mt) = self.within("if.then", |c| c.infer(ctx, m))?;
                let (tn, nt) = self.within("if.else", |c| c.infer(ctx, n))?;
                let joined = join::<S>(&mt, &nt).filter(is_safe::<S>).ok_or_else(|| {
                    self.err(
                        TypeErrorKind::BranchNotSafe,
                        "if",
                        format!("branches have types {mt} and {nt}, which have no common safe supertype"),
                    )
                })?;
                if !joined.is_base() {
                    self.first_order = false;
                }
                Ok((concat(concat(tg, tm), tn), joined))
            }
            Term::Sample(d) => self.sample(*d),
            Term::Transform(d, tf) => self.transform(ctx, *d, tf),
            Term::Repeat(op, k, m) => self.repeat(ctx, *op, *k, m),
            Term::Lam(..) | Term::App(..) => self.infer(ctx, t),
        }
    }

    fn transform(&mut self, ctx: &[Binding<S::Ann>], d: Dist, tf: &Term) -> Result<(Trace, Ty<S::Ann>), TypeError> {
        let core_ctx: Vec<(String, CoreType)> = ctx.iter().map(|b| (b.name.clone(), b.ty.erase())).collect();
        let (binder, body) = match tf {
            Term::Lam(x, _, body) if is_diffeomorphic_transform(tf, self.params, &core_ctx) => (x, body),
            _ => {
                return Err(self.err(
                    TypeErrorKind::TransformNotDiffeomorphic,
                    "transform",
                    "the transform is not one of the recognised invertible affine maps",
                ))
            }
        };
        let slot = self.fresh_slot();
        let bound = Ty::Base(BaseType::Real, S::transform_binder(slot));
        let mut inner = ctx.to_vec();
        inner.push(Binding { name: binder.clone(), ty: bound.clone(), defaulted: false });
        let (tb, bt) = self.within("transform", |c| c.infer(&inner, body))?;
        if !tb.is_empty() || !subtype::<S>(&bt, &bound) {
            return Err(self.err(
                TypeErrorKind::TransformNotDiffeomorphic,
                "transform",
                format!("the transform body has type {bt}, expected a subtype of {bound} drawing nothing"),
            ));
        }
        Ok((vec![TraceSlot { slot, dist: d }], Ty::Base(BaseType::Real, S::transform_result(slot))))
    }

    fn repeat(
        &mut self,
        ctx: &[Binding<S::Ann>],
        op: BinOp,
        k: u32,
        m: &Term,
    ) -> Result<(Trace, Ty<S::Ann>), TypeError> {
        let rule = if op == BinOp::Add { "times" } else { "pow" };
        let (t0, ty0) = self.within(rule, |c| c.infer(ctx, m))?;
        let first = self.base_of(rule, ty0)?;
        if t0.is_empty() {
            if let Some((b, a)) = S::repeat(op, first.0, &first.1) {
                return Ok((vec![], Ty::Base(b, a)));
            }
        }
        let mut trace = t0;
        let mut copies = vec![first];
        for _ in 1..k {
            let (tr, ty) = self.within(rule, |c| c.infer(ctx, m))?;
            trace.extend(tr);
            copies.push(self.base_of(rule, ty)?);
        }
        let mut acc = copies.pop().expect("k >= 1");
        while let Some(l) = copies.pop() {
            acc = self.lift(rule, S::binary(op, (l.0, &l.1), (acc.0, &acc.1)))?;
        }
        Ok((trace, Ty::Base(acc.0, acc.1)))
    }
}

fn run<S: System>(
    params: &[ParamDecl],
    ctx: &[(String, Ty<S::Ann>)],
    term: &Term,
) -> Result<(Judgement<S::Ann>, bool), TypeError> {
    let mut checker = Checker::<S>::new(params);
    let bindings: Vec<Binding<S::Ann>> =
        ctx.iter().map(|(n, t)| Binding { name: n.clone(), ty: t.clone(), defaulted: false }).collect();
    let (trace, ty) = checker.infer(&bindings, term)?;
    debug_assert!(trace.iter().enumerate().all(|(k, t)| t.slot == Slot::Pos(k)));
    let trace = TraceType(trace.iter().map(|t| t.dist).collect());
    Ok((Judgement { trace, ty }, checker.first_order))
}

/// Types `term` in system `S` under the parameters and typed free variables.
pub fn infer_term<S: System>(
    params: &[ParamDecl],
    ctx: &[(String, Ty<S::Ann>)],
    term: &Term,
) -> Result<Judgement<S::Ann>, TypeError> {
    run::<S>(params, ctx, term).map(|(j, _)| j)
}

pub fn check_program<S: System>(p: &Program) -> Result<Judgement<S::Ann>, TypeError> {
    infer_term::<S>(&p.params, &[], &p.body)
}

/// Basic trace typing of an open term without parameters.
pub fn infer_basic(ctx: &[(String, CoreType)], term: &Term) -> Result<Judgement<()>, TypeError> {
    infer_term::<Basic>(&[], ctx, term)
}

pub fn infer_program_basic(p: &Program) -> Result<Judgement<()>, TypeError> {
    check_program::<Basic>(p)
}

/// Whether the program types and no binder, argument or conditional has function type.
pub(crate) fn first_order(p: &Program) -> bool {
    run::<Basic>(&p.params, &[], &p.body).is_ok_and(|(_, fo)| fo)
}

fn publish<S: System>(j: Judgement<S::Ann>) -> Judgement<Annotation> {
    Judgement { trace: j.trace, ty: j.ty.map_ann(&S::public) }
}

pub fn check_poly(p: &Program) -> Result<Judgement<Annotation>, TypeError> {
    check_program::<Poly>(p).map(publish::<Poly>)
}

pub fn check_sgd(p: &Program) -> Result<Judgement<Annotation>, TypeError> {
    check_program::<Sgd>(p).map(publish::<Sgd>)
}

pub fn check_unif(p: &Program) -> Result<Judgement<Annotation>, TypeError> {
    check_program::<Unif>(p).map(publish::<Unif>)
}
