//! Per-system typing rules for base types, primitives, samples and guards.

use std::collections::BTreeSet;

use crate::syntax::{BaseType, BinOp, Dist, SurfaceAnn, UnOp};

use super::{Ann, Annotation, Slot, TypeErrorKind};

/// A rule failure before the checker attaches the node path.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleError {
    pub kind: TypeErrorKind,
    pub detail: String,
}

impl RuleError {
    pub fn new(kind: TypeErrorKind, detail: impl Into<String>) -> RuleError {
        RuleError { kind, detail: detail.into() }
    }
}

type Rule<A> = Result<(BaseType, A), RuleError>;

/// The parts of a type system that differ between the four systems.
pub trait System {
    type Ann: Ann;
    const NAME: &'static str;
    /// Whether `transform` has its own rule; otherwise it is typed as the
    /// application of the transform to a sample.
    const TRANSFORM_RULE: bool = false;

    fn constant(r: f64) -> (BaseType, Self::Ann);
    fn param(base: BaseType) -> Self::Ann;
    fn sample(dist: Dist, slot: Slot) -> Result<Self::Ann, RuleError>;
    fn unary(op: UnOp, base: BaseType, ann: &Self::Ann) -> Rule<Self::Ann>;
    fn binary(op: BinOp, l: (BaseType, &Self::Ann), r: (BaseType, &Self::Ann)) -> Rule<Self::Ann>;
    /// Direct rule for `times`/`pow` of a sample-free term; `None` means the
    /// desugared chain is typed instead.
    fn repeat(_op: BinOp, _base: BaseType, _ann: &Self::Ann) -> Option<(BaseType, Self::Ann)> {
        None
    }
    fn guard(base: BaseType, ann: &Self::Ann) -> Result<(), RuleError>;
    fn sub(l: (BaseType, &Self::Ann), r: (BaseType, &Self::Ann)) -> bool;
    fn join(l: (BaseType, &Self::Ann), r: (BaseType, &Self::Ann)) -> Option<(BaseType, Self::Ann)>;
    fn meet(l: (BaseType, &Self::Ann), r: (BaseType, &Self::Ann)) -> Option<(BaseType, Self::Ann)>;
    fn safe(base: BaseType, ann: &Self::Ann) -> bool;
    fn from_surface(base: BaseType, ann: &SurfaceAnn) -> Self::Ann;
    /// Annotation given to an unannotated binder that is not in function position.
    fn default_binder() -> Self::Ann;
    fn transform_binder(_slot: Slot) -> Self::Ann {
        Self::default_binder()
    }
    fn transform_result(_slot: Slot) -> Self::Ann {
        Self::default_binder()
    }
    fn public(ann: &Self::Ann) -> Annotation;
}

fn not_positive(op: UnOp) -> RuleError {
    RuleError::new(TypeErrorKind::IllTyped, format!("`{}` needs a positive argument", op.keyword()))
}

fn basic_unary(op: UnOp, base: BaseType) -> Result<BaseType, RuleError> {
    match op {
        UnOp::Neg | UnOp::Sigma => Ok(BaseType::Real),
        UnOp::Exp => Ok(BaseType::PosReal),
        UnOp::Inv if base == BaseType::PosReal => Ok(BaseType::PosReal),
        UnOp::Log if base == BaseType::PosReal => Ok(BaseType::Real),
        UnOp::Inv | UnOp::Log => Err(not_positive(op)),
    }
}

/// The unannotated system.
pub struct Basic;

impl System for Basic {
    type Ann = ();
    const NAME: &'static str = "basic";

    fn constant(r: f64) -> (BaseType, ()) {
        (BaseType::of_constant(r), ())
    }
    fn param(_: BaseType) {}
    fn sample(_: Dist, _: Slot) -> Result<(), RuleError> {
        Ok(())
    }
    fn unary(op: UnOp, base: BaseType, _: &()) -> Rule<()> {
        Ok((basic_unary(op, base)?, ()))
    }
    fn binary(_: BinOp, l: (BaseType, &()), r: (BaseType, &())) -> Rule<()> {
        Ok((l.0.join(r.0), ()))
    }
    fn guard(_: BaseType, _: &()) -> Result<(), RuleError> {
        Ok(())
    }
    fn sub(l: (BaseType, &()), r: (BaseType, &())) -> bool {
        l.0.is_sub(r.0)
    }
    fn join(l: (BaseType, &()), r: (BaseType, &())) -> Option<(BaseType, ())> {
        Some((l.0.join(r.0), ()))
    }
    fn meet(l: (BaseType, &()), r: (BaseType, &())) -> Option<(BaseType, ())> {
        Some((l.0.meet(r.0), ()))
    }
    fn safe(_: BaseType, _: &()) -> bool {
        true
    }
    fn from_surface(_: BaseType, _: &SurfaceAnn) {}
    fn default_binder() {}
    fn public(_: &()) -> Annotation {
        Annotation::Plain
    }
}

/// Polynomial fragment: no `inv`/`exp`/`log`, samples with finite moments.
pub struct Poly;

impl System for Poly {
    type Ann = ();
    const NAME: &'static str = "poly";

    fn constant(r: f64) -> (BaseType, ()) {
        Basic::constant(r)
    }
    fn param(_: BaseType) {}
    fn sample(dist: Dist, _: Slot) -> Result<(), RuleError> {
        if dist.has_finite_moments() {
            Ok(())
        } else {
            Err(RuleError::new(TypeErrorKind::NoFiniteMoments, format!("`{dist}`")))
        }
    }
    fn unary(op: UnOp, _: BaseType, _: &()) -> Rule<()> {
        match op {
            UnOp::Neg => Ok((BaseType::Real, ())),
            _ => Err(RuleError::new(TypeErrorKind::NotInPolyFragment, format!("`{}`", op.keyword()))),
        }
    }
    fn binary(op: BinOp, l: (BaseType, &()), r: (BaseType, &())) -> Rule<()> {
        Basic::binary(op, l, r)
    }
    fn guard(_: BaseType, _: &()) -> Result<(), RuleError> {
        Ok(())
    }
    fn sub(l: (BaseType, &()), r: (BaseType, &())) -> bool {
        Basic::sub(l, r)
    }
    fn join(l: (BaseType, &()), r: (BaseType, &())) -> Option<(BaseType, ())> {
        Basic::join(l, r)
    }
    fn meet(l: (BaseType, &()), r: (BaseType, &())) -> Option<(BaseType, ())> {
        Basic::meet(l, r)
    }
    fn safe(_: BaseType, _: &()) -> bool {
        true
    }
    fn from_surface(_: BaseType, _: &SurfaceAnn) {}
    fn default_binder() {}
    fn public(_: &()) -> Annotation {
        Annotation::Plain
    }
}

/// Growth annotation: `e = 0` for polynomially bounded, `e = 1` for values
/// that may grow exponentially.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SgdAnn(pub u8);

impl Ann for SgdAnn {
    fn rename(&self, _: &dyn Fn(Slot) -> Slot) -> Self {
        *self
    }
    fn suffix(&self) -> String {
        format!("@{{e={}}}", self.0)
    }
}

pub struct Sgd;

impl Sgd {
    const CANDIDATES: [(BaseType, u8); 4] =
        [(BaseType::PosReal, 0), (BaseType::PosReal, 1), (BaseType::Real, 0), (BaseType::Real, 1)];

    fn le(l: (BaseType, u8), r: (BaseType, u8)) -> bool {
        // Transitive closure of: same e with base subtyping, and Rpos^0 <= Rpos^1.
        l.0.is_sub(r.0) && (l.1 == r.1 || (l.0 == BaseType::PosReal && l.1 <= r.1))
    }

    fn mismatch(op: &str, found: &[(BaseType, &SgdAnn)]) -> RuleError {
        let args: Vec<String> = found.iter().map(|(b, a)| format!("{}{}", b.keyword(), a.suffix())).collect();
        RuleError::new(TypeErrorKind::AnnotationMismatch, format!("`{op}` does not accept {}", args.join(", ")))
    }
}

impl System for Sgd {
    type Ann = SgdAnn;
    const NAME: &'static str = "sgd";

    fn constant(r: f64) -> (BaseType, SgdAnn) {
        (BaseType::of_constant(r), SgdAnn(0))
    }
    fn param(_: BaseType) -> SgdAnn {
        SgdAnn(0)
    }
    fn sample(dist: Dist, slot: Slot) -> Result<SgdAnn, RuleError> {
        Poly::sample(dist, slot).map(|_| SgdAnn(0))
    }
    fn unary(op: UnOp, base: BaseType, ann: &SgdAnn) -> Rule<SgdAnn> {
        let at_zero = Sgd::le((base, ann.0), (BaseType::Real, 0));
        match op {
            UnOp::Neg | UnOp::Sigma if at_zero => Ok((BaseType::Real, SgdAnn(0))),
            UnOp::Exp if at_zero => Ok((BaseType::PosReal, SgdAnn(1))),
            UnOp::Inv if base == BaseType::PosReal => Ok((BaseType::PosReal, *ann)),
            UnOp::Log if base == BaseType::PosReal => Ok((BaseType::Real, SgdAnn(0))),
            UnOp::Inv | UnOp::Log if base != BaseType::PosReal => Err(not_positive(op)),
            _ => Err(Sgd::mismatch(op.keyword(), &[(base, ann)])),
        }
    }
    fn binary(op: BinOp, l: (BaseType, &SgdAnn), r: (BaseType, &SgdAnn)) -> Rule<SgdAnn> {
        let fits = |c: (BaseType, u8)| Sgd::le((l.0, l.1 .0), c) && Sgd::le((r.0, r.1 .0), c);
        let allowed = |c: &(BaseType, u8)| op == BinOp::Mul || c.1 == 0;
        Sgd::CANDIDATES
            .into_iter()
            .find(|c| allowed(c) && fits(*c))
            .map(|(b, e)| (b, SgdAnn(e)))
            .ok_or_else(|| Sgd::mismatch(op.keyword(), &[l, r]))
    }
    fn guard(base: BaseType, ann: &SgdAnn) -> Result<(), RuleError> {
        if ann.0 == 0 {
            Ok(())
        } else {
            Err(RuleError::new(
                TypeErrorKind::AnnotationMismatch,
                format!("guard must be annotated e=0, found {}{}", base.keyword(), ann.suffix()),
            ))
        }
    }
    fn sub(l: (BaseType, &SgdAnn), r: (BaseType, &SgdAnn)) -> bool {
        Sgd::le((l.0, l.1 .0), (r.0, r.1 .0))
    }
    fn join(l: (BaseType, &SgdAnn), r: (BaseType, &SgdAnn)) -> Option<(BaseType, SgdAnn)> {
        Sgd::CANDIDATES
            .into_iter()
            .find(|c| Sgd::le((l.0, l.1 .0), *c) && Sgd::le((r.0, r.1 .0), *c))
            .map(|(b, e)| (b, SgdAnn(e)))
    }
    fn meet(l: (BaseType, &SgdAnn), r: (BaseType, &SgdAnn)) -> Option<(BaseType, SgdAnn)> {
        Sgd::CANDIDATES
            .into_iter()
            .rev()
            .find(|c| Sgd::le(*c, (l.0, l.1 .0)) && Sgd::le(*c, (r.0, r.1 .0)))
            .map(|(b, e)| (b, SgdAnn(e)))
    }
    fn safe(_: BaseType, ann: &SgdAnn) -> bool {
        ann.0 == 0
    }
    fn from_surface(_: BaseType, ann: &SurfaceAnn) -> SgdAnn {
        SgdAnn(ann.e.unwrap_or(0))
    }
    fn default_binder() -> SgdAnn {
        SgdAnn(0)
    }
    fn public(ann: &SgdAnn) -> Annotation {
        Annotation::Sgd(ann.0)
    }
}

/// Dependency annotation: `deps` are the trace slots the value may depend
/// on; `g` says it is a guard-safe (invertible, affine-like) function of
/// exactly those slots.
#[derive(Clone, Debug)]
pub struct UnifAnn {
    pub g: bool,
    pub deps: BTreeSet<Slot>,
    /// Diagnostic only: `g` was lost by combining overlapping dependencies.
    overlap: bool,
}

impl UnifAnn {
    pub fn new(g: bool, deps: BTreeSet<Slot>) -> UnifAnn {
        UnifAnn { g, deps, overlap: false }
    }
}

impl PartialEq for UnifAnn {
    fn eq(&self, other: &Self) -> bool {
        self.g == other.g && self.deps == other.deps
    }
}

impl Ann for UnifAnn {
    fn rename(&self, f: &dyn Fn(Slot) -> Slot) -> Self {
        UnifAnn { g: self.g, deps: self.deps.iter().map(|s| f(*s)).collect(), overlap: self.overlap }
    }
    fn suffix(&self) -> String {
        let deps: Vec<String> = self.deps.iter().map(Slot::to_string).collect();
        format!("@{{g={},deps={{{}}}}}", self.g, deps.join(","))
    }
}

pub struct Unif;

impl System for Unif {
    type Ann = UnifAnn;
    const NAME: &'static str = "unif";
    const TRANSFORM_RULE: bool = true;

    fn constant(r: f64) -> (BaseType, UnifAnn) {
        (BaseType::of_constant(r), UnifAnn::new(false, BTreeSet::new()))
    }
    fn param(_: BaseType) -> UnifAnn {
        UnifAnn::new(false, BTreeSet::new())
    }
    fn sample(_: Dist, slot: Slot) -> Result<UnifAnn, RuleError> {
        Ok(UnifAnn::new(true, BTreeSet::from([slot])))
    }
    fn unary(op: UnOp, base: BaseType, ann: &UnifAnn) -> Rule<UnifAnn> {
        Ok((basic_unary(op, base)?, ann.clone()))
    }
    fn binary(_: BinOp, l: (BaseType, &UnifAnn), r: (BaseType, &UnifAnn)) -> Rule<UnifAnn> {
        let base = l.0.join(r.0);
        let deps: BTreeSet<Slot> = l.1.deps.union(&r.1.deps).copied().collect();
        let both = l.1.g && r.1.g;
        let disjoint = l.1.deps.is_disjoint(&r.1.deps);
        Ok((base, UnifAnn { g: both && disjoint, deps, overlap: (both && !disjoint) || l.1.overlap || r.1.overlap }))
    }
    fn repeat(_: BinOp, base: BaseType, ann: &UnifAnn) -> Option<(BaseType, UnifAnn)> {
        ann.g.then(|| (base, ann.clone()))
    }
    fn guard(base: BaseType, ann: &UnifAnn) -> Result<(), RuleError> {
        if ann.g {
            Ok(())
        } else if ann.overlap {
            Err(RuleError::new(
                TypeErrorKind::OverlappingDependencies,
                format!("guard has type {}{}", base.keyword(), ann.suffix()),
            ))
        } else {
            Err(RuleError::new(
                TypeErrorKind::GuardNotSafe,
                format!("guard has type {}{}", base.keyword(), ann.suffix()),
            ))
        }
    }
    fn sub(l: (BaseType, &UnifAnn), r: (BaseType, &UnifAnn)) -> bool {
        l.0.is_sub(r.0) && l.1.deps.is_subset(&r.1.deps) && (l.1.g || !r.1.g)
    }
    fn join(l: (BaseType, &UnifAnn), r: (BaseType, &UnifAnn)) -> Option<(BaseType, UnifAnn)> {
        let deps = l.1.deps.union(&r.1.deps).copied().collect();
        Some((l.0.join(r.0), UnifAnn::new(l.1.g && r.1.g, deps)))
    }
    fn meet(l: (BaseType, &UnifAnn), r: (BaseType, &UnifAnn)) -> Option<(BaseType, UnifAnn)> {
        let deps = l.1.deps.intersection(&r.1.deps).copied().collect();
        Some((l.0.meet(r.0), UnifAnn::new(l.1.g || r.1.g, deps)))
    }
    fn safe(_: BaseType, _: &UnifAnn) -> bool {
        true
    }
    fn from_surface(_: BaseType, ann: &SurfaceAnn) -> UnifAnn {
        let deps = ann.deps.iter().flatten().map(|k| Slot::Pos(k - 1)).collect();
        UnifAnn::new(ann.g.unwrap_or(false), deps)
    }
    fn default_binder() -> UnifAnn {
        UnifAnn::new(false, BTreeSet::new())
    }
    fn transform_binder(slot: Slot) -> UnifAnn {
        UnifAnn::new(false, BTreeSet::from([slot]))
    }
    fn transform_result(slot: Slot) -> UnifAnn {
        UnifAnn::new(true, BTreeSet::from([slot]))
    }
    fn public(ann: &UnifAnn) -> Annotation {
        Annotation::Unif { g: ann.g, deps: ann.deps.clone() }
    }
}
