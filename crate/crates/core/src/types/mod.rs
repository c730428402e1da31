//! Trace types and the four type systems over them.
//!
//! The basic system assigns every term a trace type (the ordered list of
//! distributions it draws from) and a core type. The annotated systems
//! refine base types with extra information:
//!
//! * `Poly` restricts primitives to polynomials and samples to distributions
//!   with finite moments.
//! * `Sgd` tracks whether a value may grow super-polynomially (e = 1), which
//!   certifies that SGD on the smoothed objective is sound.
//! * `Unif` tracks which trace slots a value depends on and whether it is an
//!   invertible function of them, which certifies uniform convergence of the
//!   smoothing.

mod check;
mod diffeo;
mod system;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::syntax::{BaseType, Dist};

pub(crate) use check::first_order;
pub use check::{
    check_poly, check_program, check_sgd, check_unif, infer_basic, infer_program_basic, infer_term, is_safe, join,
    meet, subtype, subtype_core,
};
pub use diffeo::{affine_parts, is_diffeomorphic_transform, Affine};
pub use system::{Basic, Poly, RuleError, Sgd, SgdAnn, System, Unif, UnifAnn};

/// Identity of a trace slot.
///
/// `Pos(k)` is the k-th draw (0-based) of the whole program. `Local(f, k)`
/// is the k-th draw of a function body typed as a value, numbered within
/// that function; it is renamed to fresh positions when the function is
/// applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Pos(usize),
    Local(u32, usize),
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Pos(k) => write!(f, "s{}", k + 1),
            Slot::Local(_, k) => write!(f, "t{}", k + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceSlot {
    pub slot: Slot,
    pub dist: Dist,
}

/// Per-system refinement carried by base types.
pub trait Ann: Clone + fmt::Debug + PartialEq {
    fn rename(&self, f: &dyn Fn(Slot) -> Slot) -> Self;
    /// Suffix written after the base keyword, e.g. `@{e=1}`.
    fn suffix(&self) -> String;
}

impl Ann for () {
    fn rename(&self, _: &dyn Fn(Slot) -> Slot) -> Self {}
    fn suffix(&self) -> String {
        String::new()
    }
}

#[derive(Clone, Debug)]
pub enum Ty<A> {
    Base(BaseType, A),
    Fun(Box<Ty<A>>, Vec<TraceSlot>, Box<Ty<A>>),
}

/// Unannotated types.
pub type CoreType = Ty<()>;

impl<A: Ann> Ty<A> {
    pub fn real(ann: A) -> Ty<A> {
        Ty::Base(BaseType::Real, ann)
    }

    pub fn fun(arg: Ty<A>, trace: Vec<TraceSlot>, res: Ty<A>) -> Ty<A> {
        Ty::Fun(Box::new(arg), trace, Box::new(res))
    }

    pub fn is_base(&self) -> bool {
        matches!(self, Ty::Base(..))
    }

    pub fn rename(&self, f: &dyn Fn(Slot) -> Slot) -> Ty<A> {
        match self {
            Ty::Base(b, a) => Ty::Base(*b, a.rename(f)),
            Ty::Fun(a, trace, r) => Ty::fun(
                a.rename(f),
                trace.iter().map(|t| TraceSlot { slot: f(t.slot), dist: t.dist }).collect(),
                r.rename(f),
            ),
        }
    }

    pub fn map_ann<B: Ann>(&self, f: &dyn Fn(&A) -> B) -> Ty<B> {
        match self {
            Ty::Base(b, a) => Ty::Base(*b, f(a)),
            Ty::Fun(a, trace, r) => Ty::fun(a.map_ann(f), trace.clone(), r.map_ann(f)),
        }
    }

    pub fn erase(&self) -> CoreType {
        self.map_ann(&|_| ())
    }
}

impl<A: Ann> fmt::Display for Ty<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Base(b, a) => write!(f, "{}{}", b.keyword(), a.suffix()),
            Ty::Fun(a, trace, r) if trace.is_empty() => write!(f, "(fun {a} {r})"),
            Ty::Fun(a, trace, r) => {
                write!(f, "(fun {a} (trace")?;
                for t in trace {
                    write!(f, " {}", t.dist)?;
                }
                write!(f, ") {r})")
            }
        }
    }
}

/// Structural equality up to renaming of function-local slots.
impl<A: Ann> PartialEq for Ty<A> {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Ty::Base(b1, a1), Ty::Base(b2, a2)) => b1 == b2 && a1 == a2,
            (Ty::Fun(a1, s1, r1), Ty::Fun(a2, s2, r2)) => {
                if s1.len() != s2.len() || s1.iter().zip(s2).any(|(x, y)| x.dist != y.dist) {
                    return false;
                }
                let map: Vec<(Slot, Slot)> = s2.iter().zip(s1).map(|(y, x)| (y.slot, x.slot)).collect();
                let rn = move |s: Slot| map.iter().find(|(from, _)| *from == s).map_or(s, |(_, to)| *to);
                **a1 == **a2 && **r1 == r2.rename(&rn)
            }
            _ => false,
        }
    }
}

/// The distributions drawn by a whole program, in order.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TraceType(pub Vec<Dist>);

impl TraceType {
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for TraceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|d| d.name()).collect();
        write!(f, "[{}]", names.join(", "))
    }
}

/// Result of checking a closed program or term.
#[derive(Clone, Debug)]
pub struct Judgement<A> {
    pub trace: TraceType,
    pub ty: Ty<A>,
}

impl<A: Ann> PartialEq for Judgement<A> {
    fn eq(&self, other: &Self) -> bool {
        self.trace == other.trace && self.ty == other.ty
    }
}

impl<A: Ann> fmt::Display for Judgement<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trace: {}\ntype: {}", self.trace, self.ty)
    }
}

/// System-independent view of an annotation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Annotation {
    Plain,
    Sgd(u8),
    Unif { g: bool, deps: BTreeSet<Slot> },
}

impl Ann for Annotation {
    fn rename(&self, f: &dyn Fn(Slot) -> Slot) -> Self {
        match self {
            Annotation::Unif { g, deps } => Annotation::Unif { g: *g, deps: deps.iter().map(|s| f(*s)).collect() },
            other => other.clone(),
        }
    }

    fn suffix(&self) -> String {
        match self {
            Annotation::Plain => String::new(),
            Annotation::Sgd(e) => SgdAnn(*e).suffix(),
            Annotation::Unif { g, deps } => UnifAnn::new(*g, deps.clone()).suffix(),
        }
    }
}

pub type AnnotatedType = Ty<Annotation>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TypeErrorKind {
    BranchNotSafe,
    IllTyped,
    UnannotatedHigherOrderBinder,
    UnboundVariable,
    NotInPolyFragment,
    NoFiniteMoments,
    AnnotationMismatch,
    GuardNotSafe,
    TransformNotDiffeomorphic,
    OverlappingDependencies,
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeErrorKind::BranchNotSafe => "branch not safe type",
            TypeErrorKind::IllTyped => "ill-typed",
            TypeErrorKind::UnannotatedHigherOrderBinder => "unannotated higher-order binder",
            TypeErrorKind::UnboundVariable => "unbound variable",
            TypeErrorKind::NotInPolyFragment => "primitive not in poly fragment",
            TypeErrorKind::NoFiniteMoments => "distribution lacks finite moments",
            TypeErrorKind::AnnotationMismatch => "annotation mismatch",
            TypeErrorKind::GuardNotSafe => "guard not guard-safe",
            TypeErrorKind::TransformNotDiffeomorphic => "transform not diffeomorphic",
            TypeErrorKind::OverlappingDependencies => "overlapping dependencies in guard arithmetic",
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("{kind}: {detail} (rule `{rule}` at {path})")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub rule: &'static str,
    /// Slash-separated route from the root to the failing node.
    pub path: String,
    pub detail: String,
}
