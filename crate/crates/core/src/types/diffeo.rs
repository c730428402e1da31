//! Recognition of invertible affine transforms `lam s. A*s + B`.

use crate::syntax::{BaseType, BinOp, ParamDecl, Term};

use super::check::infer_term;
use super::system::Basic;
use super::{CoreType, Ty};

/// Decomposition `s => scale * s + shift` of a transform; absent parts are 1 and 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine<'t> {
    pub binder: &'t str,
    pub scale: Option<&'t Term>,
    pub shift: Option<&'t Term>,
}

fn is_var(t: &Term, s: &str) -> bool {
    matches!(t, Term::Var(x) if x == s)
}

/// `A*s` or `s*A`, returning `A`.
fn scaled<'t>(t: &'t Term, s: &str) -> Option<&'t Term> {
    match t {
        Term::Binary(BinOp::Mul, a, x) if is_var(x, s) => Some(a),
        Term::Binary(BinOp::Mul, x, a) if is_var(x, s) => Some(a),
        _ => None,
    }
}

/// Matches the syntactic shapes `s`, `A*s + B`, `s*A + B`, `A*s`, `s*A` and `s + B`.
pub fn affine_parts(t: &Term) -> Option<Affine<'_>> {
    let Term::Lam(s, _, body) = t else { return None };
    let (scale, shift) = match body.as_ref() {
        b if is_var(b, s) => (None, None),
        Term::Binary(BinOp::Add, x, b) if is_var(x, s) => (None, Some(b.as_ref())),
        Term::Binary(BinOp::Add, x, b) => (Some(scaled(x, s)?), Some(b.as_ref())),
        other => (Some(scaled(other, s)?), None),
    };
    Some(Affine { binder: s, scale, shift })
}

/// Whether `t` is an affine transform whose scale and shift are free of
/// samples, conditionals and the bound variable, and whose scale is positive.
pub fn is_diffeomorphic_transform(t: &Term, params: &[ParamDecl], ctx: &[(String, CoreType)]) -> bool {
    let Some(aff) = affine_parts(t) else { return false };
    let clean = |p: &Term| !p.contains_sampling() && !p.contains_if() && !p.free_vars().contains(aff.binder);
    let types_as = |p: &Term, want: fn(BaseType) -> bool| matches!(infer_term::<Basic>(params, ctx, p), Ok(j) if j.trace.is_empty() && matches!(j.ty, Ty::Base(b, ()) if want(b)));
    aff.scale.is_none_or(|a| clean(a) && types_as(a, |b| b == BaseType::PosReal))
        && aff.shift.is_none_or(|b| clean(b) && types_as(b, |_| true))
}
