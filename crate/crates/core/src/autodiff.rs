//! Forward-mode automatic differentiation with respect to the parameters.

use crate::semantics::{eval_real, EvalError, EvalOptions, Scalar, SmoothingConfig};
use crate::syntax::{BaseType, Program};

/// A value with its partial derivatives. An empty partials vector means
/// all derivatives are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub partials: Vec<f64>,
}

impl Dual {
    pub fn new(value: f64, partials: Vec<f64>) -> Dual {
        Dual { value, partials }
    }

    /// The i-th of n independent variables.
    pub fn variable(value: f64, i: usize, n: usize) -> Dual {
        let mut partials = vec![0.0; n];
        partials[i] = 1.0;
        Dual { value, partials }
    }

    pub fn partial(&self, i: usize) -> f64 {
        self.partials.get(i).copied().unwrap_or(0.0)
    }

    fn scaled(&self, k: f64) -> Vec<f64> {
        self.partials.iter().map(|d| d * k).collect()
    }

    fn lin(&self, a: f64, other: &Dual, b: f64) -> Vec<f64> {
        let n = self.partials.len().max(other.partials.len());
        (0..n).map(|i| a * self.partial(i) + b * other.partial(i)).collect()
    }
}

impl Scalar for Dual {
    fn constant(r: f64) -> Dual {
        Dual { value: r, partials: Vec::new() }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn add(&self, o: &Dual) -> Dual {
        Dual::new(self.value + o.value, self.lin(1.0, o, 1.0))
    }
    fn mul(&self, o: &Dual) -> Dual {
        Dual::new(self.value * o.value, self.lin(o.value, o, self.value))
    }
    fn neg(&self) -> Dual {
        Dual::new(-self.value, self.scaled(-1.0))
    }
    fn inv(&self) -> Dual {
        let v = 1.0 / self.value;
        Dual::new(v, self.scaled(-v * v))
    }
    fn exp(&self) -> Dual {
        let v = self.value.exp();
        Dual::new(v, self.scaled(v))
    }
    fn ln(&self) -> Dual {
        Dual::new(self.value.ln(), self.scaled(1.0 / self.value))
    }
    fn sigma(&self, eta: f64) -> Dual {
        let s = self.value.sigma(eta);
        Dual::new(s, self.scaled(s * (1.0 - s) / eta))
    }
    fn is_constant(&self) -> bool {
        self.partials.iter().all(|d| *d == 0.0)
    }
}

fn seeded(theta: &[f64]) -> Vec<Dual> {
    theta.iter().enumerate().map(|(i, t)| Dual::variable(*t, i, theta.len())).collect()
}

fn dense(d: Dual, n: usize) -> (f64, Vec<f64>) {
    let g = (0..n).map(|i| d.partial(i)).collect();
    (d.value, g)
}

/// Value and gradient of the program under the given interpretation.
pub fn grad_with(p: &Program, theta: &[f64], trace: &[f64], opts: EvalOptions) -> Result<(f64, Vec<f64>), EvalError> {
    let d = eval_real(p, &seeded(theta), trace, opts)?;
    Ok(dense(d, theta.len()))
}

/// Gradient of the smoothed semantics.
pub fn grad_smoothed(
    p: &Program,
    theta: &[f64],
    trace: &[f64],
    cfg: SmoothingConfig,
) -> Result<(f64, Vec<f64>), EvalError> {
    grad_with(p, theta, trace, EvalOptions::smoothed(cfg))
}

/// Gradient of the measurable semantics, with the branch taken held fixed:
/// the guard contributes nothing.
pub fn grad_measurable(p: &Program, theta: &[f64], trace: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
    grad_with(p, theta, trace, EvalOptions::measurable())
}

/// Central finite differences of the program value with step `h`.
pub fn finite_diff_grad(
    p: &Program,
    theta: &[f64],
    trace: &[f64],
    opts: EvalOptions,
    h: f64,
) -> Result<Vec<f64>, EvalError> {
    let mut g = Vec::with_capacity(theta.len());
    let mut th = theta.to_vec();
    for i in 0..theta.len() {
        if p.params[i].base == BaseType::PosReal && theta[i] - h <= 0.0 {
            return Err(EvalError::Domain(format!(
                "finite-difference step {h} leaves the domain of `{}`",
                p.params[i].name
            )));
        }
        th[i] = theta[i] + h;
        let up: f64 = eval_real(p, &th, trace, opts)?;
        th[i] = theta[i] - h;
        let down: f64 = eval_real(p, &th, trace, opts)?;
        th[i] = theta[i];
        g.push((up - down) / (2.0 * h));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::sigma_eta;
    use crate::syntax::parse_program;

    #[test]
    fn dual_rules() {
        let x = Dual::new(3.0, vec![1.0, 0.0]);
        let y = Dual::new(3.0, vec![0.0, 1.0]);
        assert_eq!(x.mul(&y), Dual::new(9.0, vec![3.0, 3.0]));
        assert_eq!(Dual::new(1.0, vec![1.0]).ln(), Dual::new(0.0, vec![1.0]));
        let s = Dual::new(0.0, vec![1.0]).sigma(0.1);
        assert_eq!(s.value, 0.5);
        assert!((s.partials[0] - 2.5).abs() < 1e-12);
        assert_eq!(Dual::constant(2.0).add(&x).partials, vec![1.0, 0.0]);
    }

    fn prog(src: &str) -> Program {
        parse_program(src).unwrap()
    }

    #[test]
    fn squared_parameter() {
        let p = prog("(program (params (t real)) (body (mul t t)))");
        assert_eq!(grad_measurable(&p, &[3.0], &[]).unwrap(), (9.0, vec![6.0]));
    }

    #[test]
    fn smoothed_guard_derivative() {
        let p = prog("(program (params (t real)) (body (if (transform normal (lam s (add s t))) 0 1)))");
        let cfg = SmoothingConfig::new(0.1).unwrap();
        let (_, g) = grad_smoothed(&p, &[0.3], &[0.1], cfg).unwrap();
        let s = sigma_eta(0.4, 0.1);
        assert!((g[0] - s * (1.0 - s) / 0.1).abs() < 1e-12);
        assert!((g[0] - 0.176_627).abs() < 1e-5);
    }

    #[test]
    fn measurable_gradient_ignores_guards() {
        let ex1 = prog(
            "(program (params (t real)) (body (app (lam z (add (mul -0.5 (pow t 2)) (if z 0 1))) (transform normal (lam s (add s t))))))",
        );
        for (t, s) in [(0.5, -2.0), (0.5, 2.0), (-1.0, 0.3)] {
            assert_eq!(grad_measurable(&ex1, &[t], &[s]).unwrap().1, vec![-t]);
        }
        let p = prog("(program (params (t real)) (body (if (sample normal) t (neg t))))");
        assert_eq!(grad_measurable(&p, &[0.7], &[-1.0]).unwrap().1, vec![1.0]);
        let ex0g = prog("(program (params (t real)) (body (if 0 (add (mul t t) 1) (mul (add t -1) (add t -1)))))");
        assert_eq!(grad_measurable(&ex0g, &[0.5], &[]).unwrap().1, vec![-1.0]);
    }

    #[test]
    fn finite_differences_respect_domains() {
        let p = prog("(program (params (t preal)) (body (log t)))");
        assert!(finite_diff_grad(&p, &[1e-6], &[], EvalOptions::measurable(), 1e-5).is_err());
        let g = finite_diff_grad(&p, &[2.0], &[], EvalOptions::measurable(), 1e-5).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-9);
    }
}
