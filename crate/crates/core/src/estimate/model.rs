//! Optimisation problems: a program, its parameter domain and a direction.

use crate::syntax::{BaseType, Dist, Program, Term};
use crate::types::{affine_parts, infer_program_basic, Ty};

use super::EstimateError;

/// Lower bound enforced on positive parameters.
pub const POSITIVE_FLOOR: f64 = 1e-6;
/// Default box for real parameters.
pub const DEFAULT_REAL_BOUND: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// Factor turning `E[M]` into the quantity being minimised.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

/// Closed box of admissible parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn for_program(p: &Program) -> Domain {
        let bounds = p
            .params
            .iter()
            .map(|d| match d.base {
                BaseType::Real => (-DEFAULT_REAL_BOUND, DEFAULT_REAL_BOUND),
                BaseType::PosReal => (POSITIVE_FLOOR, f64::INFINITY),
            })
            .collect();
        Domain { bounds }
    }

    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.bounds).map(|(t, (lo, hi))| t.clamp(*lo, *hi)).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.bounds.len() && theta.iter().zip(&self.bounds).all(|(t, (lo, hi))| lo <= t && t <= hi)
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub name: String,
    pub program: Program,
    pub domain: Domain,
    pub sense: Sense,
    trace_type: Vec<Dist>,
    score_supported: bool,
}

fn score_transforms_ok(t: &Term) -> bool {
    !t.any(&|n| match n {
        Term::Transform(d, tf) => matches!(d, Dist::Cauchy) || affine_parts(tf).is_none(),
        _ => false,
    })
}

impl Model {
    pub fn new(name: &str, program: Program, sense: Sense) -> Result<Model, EstimateError> {
        let j = infer_program_basic(&program)?;
        if !matches!(j.ty, Ty::Base(..)) {
            return Err(EstimateError::NotRealValued(j.ty.to_string()));
        }
        Ok(Model {
            name: name.to_string(),
            domain: Domain::for_program(&program),
            score_supported: score_transforms_ok(&program.body),
            trace_type: j.trace.0,
            program,
            sense,
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> Model {
        self.domain = domain;
        self
    }

    pub fn dim(&self) -> usize {
        self.program.params.len()
    }

    pub fn trace_type(&self) -> &[Dist] {
        &self.trace_type
    }

    /// Whether every transform is affine in a distribution with a
    /// differentiable density, as the score estimator requires.
    pub fn score_supported(&self) -> bool {
        self.score_supported
    }

    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        self.domain.project(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    #[test]
    fn projection() {
        let p = parse_program("(program (params (a preal) (b real)) (body (add a b)))").unwrap();
        let m = Model::new("m", p, Sense::Minimize).unwrap();
        assert_eq!(m.project(&[-0.5, 150.0]), vec![POSITIVE_FLOOR, 100.0]);
        assert_eq!(m.project(&[2.0, -3.0]), vec![2.0, -3.0]);
        assert!(m.domain.contains(&[2.0, -3.0]));
    }

    #[test]
    fn rejects_function_valued_bodies() {
        let p = parse_program("(program (params) (body (lam x x)))").unwrap();
        assert!(matches!(Model::new("m", p, Sense::Minimize), Err(EstimateError::NotRealValued(_))));
    }

    #[test]
    fn score_support() {
        let ok = parse_program("(program (params (t real)) (body (transform logistic (lam s (add s t)))))").unwrap();
        assert!(Model::new("m", ok, Sense::Minimize).unwrap().score_supported());
        let bad = parse_program("(program (params (t real)) (body (transform normal (lam s (pow s 3)))))").unwrap();
        assert!(!Model::new("m", bad, Sense::Minimize).unwrap().score_supported());
    }
}
