//! Deterministic quadrature oracle for `E_{s ~ D}[M(theta, s)]` over traces
//! of dimension at most two.
//!
//! Composite Simpson on a truncated box, with one refinement: a Simpson
//! panel whose nodes disagree on the sign pattern of the guards is split at
//! the located jump points and integrated piecewise with Gauss-Legendre, so
//! hard conditionals do not cost accuracy.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::semantics::{eval_real, guard_signature, EvalError, EvalOptions, SmoothingConfig};
use crate::syntax::{Dist, Program};
use crate::types::{infer_program_basic, TypeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("trace dimension too high for oracle: {0} draws (at most 2 supported)")]
    TooManyDimensions(usize),
    #[error("at least 5 odd nodes per axis are required, got {0}")]
    TooFewNodes(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Simpson nodes per axis (odd).
    pub nodes: usize,
    /// Half-width of the box for normal, logistic and cauchy draws.
    pub symmetric_bound: f64,
    /// Upper end of the box for exponential draws.
    pub exponential_bound: f64,
    /// Factor by which the box is widened to measure truncation sensitivity.
    pub widening: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { nodes: 4001, symmetric_bound: 10.0, exponential_bound: 40.0, widening: 1.5 }
    }
}

impl QuadratureOptions {
    fn bounds(&self, d: Dist) -> (f64, f64) {
        match d {
            Dist::Exponential => (0.0, self.exponential_bound),
            _ => (-self.symmetric_bound, self.symmetric_bound),
        }
    }

    fn widened(&self) -> QuadratureOptions {
        QuadratureOptions {
            symmetric_bound: self.symmetric_bound * self.widening,
            exponential_bound: self.exponential_bound * self.widening,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    /// `|value(widened box) - value|`.
    pub widening_delta: f64,
}

/// Integrand value with the guard pattern that produced it; points with
/// equal patterns lie on the same smooth piece.
pub type Piece = (f64, Vec<bool>);

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

fn gauss_legendre<E>(a: f64, b: f64, f: &(dyn Fn(f64) -> Result<Piece, E> + Sync)) -> Result<f64, E> {
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc += w * f(mid + half * x)?.0;
    }
    Ok(acc * half)
}

/// Every point in `(a, c)` where the piece changes, found by bisection.
fn breakpoints<E>(
    a: f64,
    sa: &[bool],
    c: f64,
    sc: &[bool],
    f: &(dyn Fn(f64) -> Result<Piece, E> + Sync),
    depth: u32,
    out: &mut Vec<f64>,
) -> Result<(), E> {
    if sa == sc {
        return Ok(());
    }
    let m = (a + c) / 2.0;
    if depth == 0 || m <= a || m >= c {
        out.push(m);
        return Ok(());
    }
    let (_, sm) = f(m)?;
    breakpoints(a, sa, m, &sm, f, depth - 1, out)?;
    breakpoints(m, &sm, c, sc, f, depth - 1, out)
}

/// Composite Simpson on `[lo, hi]` with piecewise refinement at jumps.
pub fn integrate_1d<E: Send>(
    lo: f64,
    hi: f64,
    nodes: usize,
    f: &(dyn Fn(f64) -> Result<Piece, E> + Sync),
) -> Result<f64, E> {
    integrate_1d_pieces(lo, hi, nodes, f).map(|(v, _)| v)
}

/// As [`integrate_1d`], also returning every piece label seen at a node.
fn integrate_1d_pieces<E: Send>(
    lo: f64,
    hi: f64,
    nodes: usize,
    f: &(dyn Fn(f64) -> Result<Piece, E> + Sync),
) -> Result<(f64, BTreeSet<Vec<bool>>), E> {
    let h = (hi - lo) / (nodes - 1) as f64;
    let xs: Vec<f64> = (0..nodes).map(|i| lo + h * i as f64).collect();
    let pts = xs.par_iter().map(|&x| f(x)).collect::<Result<Vec<_>, E>>()?;
    let mut total = 0.0;
    for p in (0..nodes - 1).step_by(2) {
        let (a, b, c) = (&pts[p], &pts[p + 1], &pts[p + 2]);
        if a.1 == b.1 && b.1 == c.1 {
            total += h / 3.0 * (a.0 + 4.0 * b.0 + c.0);
            continue;
        }
        let mut cuts = vec![xs[p]];
        breakpoints(xs[p], &a.1, xs[p + 1], &b.1, f, 60, &mut cuts)?;
        cuts.push(xs[p + 1]);
        breakpoints(xs[p + 1], &b.1, xs[p + 2], &c.1, f, 60, &mut cuts)?;
        cuts.push(xs[p + 2]);
        for w in cuts.windows(2) {
            if w[1] > w[0] {
                total += gauss_legendre(w[0], w[1], f)?;
            }
        }
    }
    let labels = pts.into_iter().map(|(_, sig)| sig).collect();
    Ok((total, labels))
}

/// Injective encoding of a set of labels as one label: each member is
/// prefixed by its length in unary.
fn encode_labels(labels: &BTreeSet<Vec<bool>>) -> Vec<bool> {
    let mut out = Vec::new();
    for l in labels {
        out.extend(std::iter::repeat_n(true, l.len()));
        out.push(false);
        out.extend(l);
    }
    out
}

/// `E_{s ~ dists}[f(s)]` truncated to the options' box. `f` returns the
/// integrand and its piece label. In two dimensions the outer axis is
/// labelled by the set of inner labels, so jumps that depend only on the
/// outer draw are refined as well.
pub fn integrate<F>(dists: &[Dist], opts: &QuadratureOptions, f: F) -> Result<f64, QuadratureError>
where
    F: Fn(&[f64]) -> Result<Piece, QuadratureError> + Sync,
{
    if opts.nodes < 5 || opts.nodes.is_multiple_of(2) {
        return Err(QuadratureError::TooFewNodes(opts.nodes));
    }
    match dists {
        [] => Ok(f(&[])?.0),
        [d] => {
            let (lo, hi) = opts.bounds(*d);
            let g = |x: f64| f(&[x]).map(|(v, sig)| (v * d.pdf(x), sig));
            integrate_1d(lo, hi, opts.nodes, &g)
        }
        [d1, d2] => {
            let (lo1, hi1) = opts.bounds(*d1);
            let (lo2, hi2) = opts.bounds(*d2);
            let outer = |x: f64| -> Result<Piece, QuadratureError> {
                let g = |y: f64| f(&[x, y]).map(|(v, sig)| (v * d2.pdf(y), sig));
                let (v, labels) = integrate_1d_pieces(lo2, hi2, opts.nodes, &g)?;
                Ok((d1.pdf(x) * v, encode_labels(&labels)))
            };
            integrate_1d(lo1, hi1, opts.nodes, &outer)
        }
        more => Err(QuadratureError::TooManyDimensions(more.len())),
    }
}

/// Integrand of the measurable or smoothed semantics. Smoothed integrands
/// are continuous, so they carry an empty piece label.
pub fn program_integrand<'p>(
    p: &'p Program,
    theta: &[f64],
    smoothing: Option<SmoothingConfig>,
) -> impl Fn(&[f64]) -> Result<Piece, QuadratureError> + Sync + 'p {
    let theta = theta.to_vec();
    move |s: &[f64]| match smoothing {
        Some(cfg) => Ok((eval_real(p, &theta, s, EvalOptions::smoothed(cfg))?, Vec::new())),
        None => Ok(guard_signature(p, &theta, s)?),
    }
}

fn trace_dists(p: &Program) -> Result<Vec<Dist>, QuadratureError> {
    let dists = infer_program_basic(p)?.trace.0;
    if dists.len() > 2 {
        return Err(QuadratureError::TooManyDimensions(dists.len()));
    }
    Ok(dists)
}

/// `E[M(theta, .)]` (or its smoothed analogue) with a truncation-widening delta.
pub fn quadrature_expectation(
    p: &Program,
    theta: &[f64],
    smoothing: Option<SmoothingConfig>,
    opts: &QuadratureOptions,
) -> Result<QuadratureResult, QuadratureError> {
    let dists = trace_dists(p)?;
    let value = integrate(&dists, opts, program_integrand(p, theta, smoothing))?;
    let wide = integrate(&dists, &opts.widened(), program_integrand(p, theta, smoothing))?;
    Ok(QuadratureResult { value, widening_delta: (wide - value).abs() })
}

/// `E[|M(theta, .)|]`, used to check integrability.
pub fn quadrature_abs_expectation(
    p: &Program,
    theta: &[f64],
    opts: &QuadratureOptions,
) -> Result<QuadratureResult, QuadratureError> {
    let dists = trace_dists(p)?;
    let f = program_integrand(p, theta, None);
    // The sign joins the label so the kink of |M| at M = 0 is located like a jump.
    let abs = |s: &[f64]| {
        f(s).map(|(v, mut sig)| {
            sig.push(v < 0.0);
            (v.abs(), sig)
        })
    };
    let value = integrate(&dists, opts, abs)?;
    let wide = integrate(&dists, &opts.widened(), abs)?;
    Ok(QuadratureResult { value, widening_delta: (wide - value).abs() })
}

/// Gradient of the quadrature expectation by central differences with step `h`.
pub fn quadrature_gradient(
    p: &Program,
    theta: &[f64],
    smoothing: Option<SmoothingConfig>,
    opts: &QuadratureOptions,
    h: f64,
) -> Result<Vec<f64>, QuadratureError> {
    let dists = trace_dists(p)?;
    (0..theta.len())
        .map(|i| {
            let mut up = theta.to_vec();
            let mut down = theta.to_vec();
            up[i] += h;
            down[i] -= h;
            let fu = integrate(&dists, opts, program_integrand(p, &up, smoothing))?;
            let fd = integrate(&dists, opts, program_integrand(p, &down, smoothing))?;
            Ok((fu - fd) / (2.0 * h))
        })
        .collect()
}

/// Root of `f` on `[lo, hi]` by bisection; `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    while hi - lo > tol {
        let mid = (lo + hi) / 2.0;
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some((lo + hi) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    fn normal_cdf(x: f64) -> f64 {
        // Integrate the density with the same Gauss-Legendre rule on fine panels.
        let f = |t: f64| Ok::<_, ()>((Dist::Normal.pdf(t), Vec::new()));
        0.5 + integrate_1d(0.0, x, 2001, &f).unwrap()
    }

    #[test]
    fn constant_program() {
        let p = parse_program("(program (params) (body 7))").unwrap();
        let r = quadrature_expectation(&p, &[], None, &QuadratureOptions::default()).unwrap();
        assert_eq!(r.value, 7.0);
    }

    #[test]
    fn example1_at_zero_is_half() {
        let p = parse_program(
            "(program (params (theta real)) (body (app (lam z (add (mul -0.5 (pow theta 2)) (if z 0 1))) \
             (transform normal (lam s (add s theta))))))",
        )
        .unwrap();
        let r = quadrature_expectation(&p, &[0.0], None, &QuadratureOptions::default()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-9, "{}", r.value);
        assert!(r.widening_delta < 1e-9);
    }

    #[test]
    fn nconv_is_normal_cdf() {
        let p =
            parse_program("(program (params (theta real)) (body (if (transform normal (lam s (add s theta))) 0 1)))")
                .unwrap();
        let r = quadrature_expectation(&p, &[1.0], None, &QuadratureOptions::default()).unwrap();
        assert!((r.value - 0.841_344_746_068_542_9).abs() < 1e-7, "{}", r.value);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_product() {
        let p =
            parse_program("(program (params) (body (if (sample normal) 0 (if (sample exponential) 0 1))))").unwrap();
        // Exponential draws are non-negative, so the inner guard never takes the first branch.
        let r = quadrature_expectation(&p, &[], None, &QuadratureOptions { nodes: 401, ..Default::default() }).unwrap();
        assert!((r.value - 0.5).abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn too_many_dimensions() {
        let p = parse_program("(program (params) (body (add (sample normal) (add (sample normal) (sample normal)))))")
            .unwrap();
        assert_eq!(
            quadrature_expectation(&p, &[], None, &QuadratureOptions::default()),
            Err(QuadratureError::TooManyDimensions(3))
        );
    }

    #[test]
    fn bisection_finds_root() {
        let r = bisect(0.0, 2.0, 1e-12, |x| x * x - 2.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
        assert!(bisect(0.0, 1.0, 1e-12, |x| x + 1.0).is_none());
    }
}
