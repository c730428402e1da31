//! Projected SGD and Adam.

use std::time::Instant;

use super::{estimate, Domain, EstimateError, Estimator, Model, TraceStream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    /// `c / k` at step k (from 1): square-summable but not summable.
    RobbinsMonro(f64),
    Constant(f64),
}

impl StepSchedule {
    pub fn step(self, k: u64) -> f64 {
        match self {
            StepSchedule::RobbinsMonro(c) => c / k as f64,
            StepSchedule::Constant(g) => g,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> AdamConfig {
        AdamConfig { lr, ..AdamConfig::default() }
    }
}

/// Anything that produces a descent gradient for the current iterate.
pub trait GradientOracle {
    fn gradient(&mut self, theta: &[f64], iteration: u64) -> Result<Vec<f64>, EstimateError>;
}

impl<F: FnMut(&[f64], u64) -> Result<Vec<f64>, EstimateError>> GradientOracle for F {
    fn gradient(&mut self, theta: &[f64], iteration: u64) -> Result<Vec<f64>, EstimateError> {
        self(theta, iteration)
    }
}

/// Mean of `samples` estimates per iteration, signed so that descending it
/// optimises the model in its own sense.
pub struct ModelOracle<'m> {
    pub model: &'m Model,
    pub estimator: Estimator,
    pub samples: usize,
    pub stream: TraceStream,
}

impl GradientOracle for ModelOracle<'_> {
    fn gradient(&mut self, theta: &[f64], iteration: u64) -> Result<Vec<f64>, EstimateError> {
        let g = estimate(self.model, self.estimator, theta, self.samples, &self.stream, iteration)?;
        let sign = self.model.sense.sign();
        Ok(g.into_iter().map(|x| sign * x).collect())
    }
}

/// Iterates `theta_0 .. theta_iters`, with per-step gradient norms and
/// cumulative wall-clock time.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub thetas: Vec<Vec<f64>>,
    pub grad_norms: Vec<f64>,
    pub elapsed_ns: Vec<u64>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.thetas.last().expect("trajectory holds the initial point")
    }
}

fn run(
    domain: &Domain,
    theta0: &[f64],
    iters: u64,
    oracle: &mut dyn GradientOracle,
    mut update: impl FnMut(u64, &mut [f64], &[f64]),
) -> Result<Trajectory, EstimateError> {
    if theta0.len() != domain.bounds.len() {
        return Err(EstimateError::Dimension { expected: domain.bounds.len(), got: theta0.len() });
    }
    let start = Instant::now();
    let mut theta = domain.project(theta0);
    let mut traj = Trajectory {
        thetas: Vec::with_capacity(iters as usize + 1),
        grad_norms: Vec::with_capacity(iters as usize),
        elapsed_ns: Vec::with_capacity(iters as usize),
    };
    traj.thetas.push(theta.clone());
    for k in 1..=iters {
        let g = oracle.gradient(&theta, k - 1)?;
        if g.len() != theta.len() {
            return Err(EstimateError::Dimension { expected: theta.len(), got: g.len() });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(EstimateError::NonFiniteGradient { iteration: k - 1 });
        }
        update(k, &mut theta, &g);
        theta = domain.project(&theta);
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(EstimateError::Diverged { iteration: k });
        }
        traj.grad_norms.push(g.iter().map(|x| x * x).sum::<f64>().sqrt());
        traj.elapsed_ns.push(start.elapsed().as_nanos() as u64);
        traj.thetas.push(theta.clone());
    }
    Ok(traj)
}

/// Projected SGD: `theta <- proj(theta - gamma_k * g_k)`.
pub fn run_sgd(
    domain: &Domain,
    theta0: &[f64],
    schedule: StepSchedule,
    iters: u64,
    oracle: &mut dyn GradientOracle,
) -> Result<Trajectory, EstimateError> {
    run(domain, theta0, iters, oracle, |k, theta, g| {
        let step = schedule.step(k);
        theta.iter_mut().zip(g).for_each(|(t, gi)| *t -= step * gi);
    })
}

/// Projected Adam with bias-corrected moments.
pub fn run_adam(
    domain: &Domain,
    theta0: &[f64],
    cfg: AdamConfig,
    iters: u64,
    oracle: &mut dyn GradientOracle,
) -> Result<Trajectory, EstimateError> {
    let mut m = vec![0.0; theta0.len()];
    let mut v = vec![0.0; theta0.len()];
    run(domain, theta0, iters, oracle, |k, theta, g| {
        let c1 = 1.0 - cfg.beta1.powi(k as i32);
        let c2 = 1.0 - cfg.beta2.powi(k as i32);
        for i in 0..theta.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            theta[i] -= cfg.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.epsilon);
        }
    })
}
