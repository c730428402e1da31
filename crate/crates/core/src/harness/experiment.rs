//! ELBO trajectories, gradient-variance statistics and work-normalised
//! variance for a set of estimators on one model.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::estimate::{
    estimate, gradient_samples, objective_sample, run_adam, summarize, AdamConfig, EstimateError, Estimator, Model,
    ModelOracle, TraceStream, Trajectory,
};
use crate::semantics::SmoothingConfig;

const GRADIENT_TAG: u64 = 1;
const OBJECTIVE_TAG: u64 = 2;
const VARIANCE_TAG: u64 = 3;
const TIMING_TAG: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub iters: u64,
    pub samples_per_step: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub checkpoint_every: u64,
    /// Traces used to estimate the objective at each checkpoint.
    pub objective_samples: usize,
    /// Single-trace gradients drawn per checkpoint for variance statistics.
    pub variance_samples: usize,
    pub time_budget: Duration,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            iters: 5000,
            samples_per_step: 16,
            adam: AdamConfig::default(),
            seed: 0,
            checkpoint_every: 100,
            objective_samples: 200,
            variance_samples: 1000,
            time_budget: Duration::from_secs(1),
        }
    }
}

/// Objective estimate at one checkpoint, in the model's own sign.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub iter: u64,
    pub theta: Vec<f64>,
    pub objective_measurable: f64,
    pub se_measurable: f64,
    /// Only for smoothed estimators: the objective the optimiser actually saw.
    pub objective_smoothed: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub estimator: Estimator,
    pub trajectory: Trajectory,
    pub checkpoints: Vec<Checkpoint>,
}

impl RunResult {
    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("at least the initial checkpoint")
    }
}

fn checkpoint_iters(cfg: &ExperimentConfig) -> Vec<u64> {
    let every = cfg.checkpoint_every.max(1);
    let mut its: Vec<u64> = (0..=cfg.iters / every).map(|k| k * every).collect();
    if its.last() != Some(&cfg.iters) && !cfg.iters.is_multiple_of(every) {
        its.push(cfg.iters);
    }
    its
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

/// Monte Carlo objective at `theta` using the checkpoint's common random
/// numbers: traces depend only on the seed, checkpoint index and sample index.
pub fn objective_at(
    model: &Model,
    theta: &[f64],
    smoothing: Option<SmoothingConfig>,
    samples: usize,
    seed: u64,
    checkpoint: u64,
) -> Result<(f64, f64), EstimateError> {
    if samples == 0 {
        return Err(EstimateError::NoSamples);
    }
    let stream = TraceStream::new(seed).child(OBJECTIVE_TAG);
    let values = (0..samples as u64)
        .map(|i| {
            let trace = stream.draw(model.trace_type(), checkpoint, i);
            objective_sample(model, theta, &trace, smoothing)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mean_se(&values))
}

fn run_one(model: &Model, est: Estimator, theta0: &[f64], cfg: &ExperimentConfig) -> Result<RunResult, EstimateError> {
    let mut oracle = ModelOracle {
        model,
        estimator: est,
        samples: cfg.samples_per_step,
        stream: TraceStream::new(cfg.seed).child(GRADIENT_TAG),
    };
    let trajectory = run_adam(&model.domain, theta0, cfg.adam, cfg.iters, &mut oracle)?;
    let checkpoints = checkpoint_iters(cfg)
        .into_iter()
        .enumerate()
        .map(|(k, it)| {
            let theta = trajectory.thetas[it as usize].clone();
            let (m, se) = objective_at(model, &theta, None, cfg.objective_samples, cfg.seed, k as u64)?;
            let smoothed = match est {
                Estimator::Smooth(sc) => {
                    Some(objective_at(model, &theta, Some(sc), cfg.objective_samples, cfg.seed, k as u64)?)
                }
                _ => None,
            };
            Ok(Checkpoint { iter: it, theta, objective_measurable: m, se_measurable: se, objective_smoothed: smoothed })
        })
        .collect::<Result<Vec<_>, EstimateError>>()?;
    Ok(RunResult { estimator: est, trajectory, checkpoints })
}

/// Runs Adam once per estimator from `theta0` and records checkpoints every
/// `checkpoint_every` iterations (`iters / checkpoint_every + 1` of them).
pub fn elbo_experiment(
    model: &Model,
    estimators: &[Estimator],
    theta0: &[f64],
    cfg: &ExperimentConfig,
) -> Result<Vec<RunResult>, EstimateError> {
    estimators.par_iter().map(|&est| run_one(model, est, theta0, cfg)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceRow {
    pub estimator: Estimator,
    /// Per-checkpoint component variances averaged over components, then checkpoints.
    pub component_variance: f64,
    /// Variance of the gradient's L2 norm averaged over checkpoints.
    pub norm_variance: f64,
}

/// Gradient variance of one estimator at the given parameter points.
pub fn variance_at(
    model: &Model,
    est: Estimator,
    thetas: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<VarianceRow, EstimateError> {
    if samples < 2 {
        return Err(EstimateError::NoSamples);
    }
    if thetas.is_empty() {
        return Err(EstimateError::NoSamples);
    }
    let stream = TraceStream::new(seed).child(VARIANCE_TAG);
    let (mut comp, mut norm) = (0.0, 0.0);
    for (k, theta) in thetas.iter().enumerate() {
        let s = summarize(&gradient_samples(model, est, theta, samples, &stream, k as u64)?);
        comp += if s.variance.is_empty() { 0.0 } else { s.variance.iter().sum::<f64>() / s.variance.len() as f64 };
        norm += s.norm_variance;
    }
    let n = thetas.len() as f64;
    Ok(VarianceRow { estimator: est, component_variance: comp / n, norm_variance: norm / n })
}

/// Variance statistics along each run's own checkpoints.
pub fn variance_report(
    model: &Model,
    runs: &[RunResult],
    cfg: &ExperimentConfig,
) -> Result<Vec<VarianceRow>, EstimateError> {
    runs.par_iter()
        .map(|r| {
            let thetas: Vec<Vec<f64>> = r.checkpoints.iter().map(|c| c.theta.clone()).collect();
            variance_at(model, r.estimator, &thetas, cfg.variance_samples, cfg.seed)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct WnvRow {
    pub estimator: Estimator,
    /// Optimisation steps completed within the time budget.
    pub iterations: u64,
    /// Cost (reciprocal of iterations) relative to the reference estimator.
    pub cost_ratio: f64,
    pub component_variance: f64,
    pub norm_variance: f64,
    pub wnv_component: f64,
    pub wnv_norm: f64,
}

/// Number of `samples`-trace gradient estimates completed within `budget`
/// on the calling thread.
pub fn iterations_within(
    model: &Model,
    est: Estimator,
    theta: &[f64],
    samples: usize,
    budget: Duration,
    seed: u64,
) -> Result<u64, EstimateError> {
    let stream = TraceStream::new(seed).child(TIMING_TAG);
    let start = Instant::now();
    let mut it = 0u64;
    while start.elapsed() < budget {
        // Below the parallel threshold, so this stays on one thread.
        estimate(model, est, theta, samples, &stream, it)?;
        it += 1;
    }
    Ok(it.max(1))
}

/// Work-normalised variance: each row's cost is `1 / iterations`,
/// normalised to the score estimator's cost (or the first row's when score
/// is absent), and `wnv = cost_ratio * variance` exactly.
pub fn work_normalised_variance(
    model: &Model,
    theta: &[f64],
    variances: &[VarianceRow],
    cfg: &ExperimentConfig,
) -> Result<Vec<WnvRow>, EstimateError> {
    let iters = variances
        .iter()
        .map(|v| iterations_within(model, v.estimator, theta, cfg.samples_per_step, cfg.time_budget, cfg.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let reference = variances.iter().position(|v| v.estimator == Estimator::Score).unwrap_or(0);
    let Some(&ref_iters) = iters.get(reference) else { return Ok(Vec::new()) };
    Ok(variances
        .iter()
        .zip(iters)
        .map(|(v, it)| {
            let cost_ratio = ref_iters as f64 / it as f64;
            WnvRow {
                estimator: v.estimator,
                iterations: it,
                cost_ratio,
                component_variance: v.component_variance,
                norm_variance: v.norm_variance,
                wnv_component: cost_ratio * v.component_variance,
                wnv_norm: cost_ratio * v.norm_variance,
            }
        })
        .collect())
}

/// Float with 17 significant digits, the precision needed to round-trip an f64.
pub fn sig17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn write_elbo_csv(w: &mut dyn Write, runs: &[RunResult]) -> io::Result<()> {
    writeln!(w, "estimator,iter,objective_measurable,se_measurable,objective_smoothed,se_smoothed")?;
    for r in runs {
        for c in &r.checkpoints {
            let (os, ss) = match c.objective_smoothed {
                Some((o, s)) => (sig17(o), sig17(s)),
                None => (String::new(), String::new()),
            };
            writeln!(
                w,
                "{},{},{},{},{os},{ss}",
                r.estimator.name(),
                c.iter,
                sig17(c.objective_measurable),
                sig17(c.se_measurable)
            )?;
        }
    }
    Ok(())
}

pub fn write_variance_csv(w: &mut dyn Write, rows: &[VarianceRow]) -> io::Result<()> {
    writeln!(w, "estimator,component_variance,norm_variance")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.estimator.name(), sig17(r.component_variance), sig17(r.norm_variance))?;
    }
    Ok(())
}

pub fn write_wnv_csv(w: &mut dyn Write, rows: &[WnvRow]) -> io::Result<()> {
    writeln!(w, "estimator,iterations,cost_ratio,component_variance,norm_variance,wnv_component,wnv_norm")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.estimator.name(),
            r.iterations,
            sig17(r.cost_ratio),
            sig17(r.component_variance),
            sig17(r.norm_variance),
            sig17(r.wnv_component),
            sig17(r.wnv_norm)
        )?;
    }
    Ok(())
}

/// Trajectory as CSV: `iter, theta_1..m, grad_norm, elapsed_ns`. Row 0 is
/// the starting point with empty gradient and time columns.
pub fn write_trajectory_csv(w: &mut dyn Write, traj: &Trajectory) -> io::Result<()> {
    let m = traj.thetas.first().map_or(0, Vec::len);
    let mut header = vec!["iter".to_string()];
    header.extend((1..=m).map(|i| format!("theta_{i}")));
    header.push("grad_norm".into());
    header.push("elapsed_ns".into());
    writeln!(w, "{}", header.join(","))?;
    for (k, theta) in traj.thetas.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(theta.iter().map(|t| sig17(*t)));
        if k == 0 {
            row.push(String::new());
            row.push(String::new());
        } else {
            row.push(sig17(traj.grad_norms[k - 1]));
            row.push(traj.elapsed_ns[k - 1].to_string());
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::builtin;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig { iters: 300, objective_samples: 20, variance_samples: 20, ..Default::default() }
    }

    #[test]
    fn checkpoint_count() {
        let cfg = small_cfg();
        assert_eq!(checkpoint_iters(&cfg).len() as u64, cfg.iters / 100 + 1);
        let b = builtin("example1").unwrap();
        let runs = elbo_experiment(&b.model, &[Estimator::Reparam], &b.theta0, &cfg).unwrap();
        assert_eq!(runs[0].checkpoints.len(), 4);
    }

    #[test]
    fn deterministic_model_has_zero_variance() {
        let b = builtin("ex0g").unwrap();
        let row = variance_at(&b.model, Estimator::Reparam, &[vec![0.3]], 2, 1).unwrap();
        assert_eq!(row.component_variance, 0.0);
        assert_eq!(row.norm_variance, 0.0);
    }

    #[test]
    fn wnv_identity_and_reference() {
        let b = builtin("example1").unwrap();
        let cfg = ExperimentConfig { time_budget: Duration::from_millis(20), ..small_cfg() };
        let ests = [Estimator::Score, Estimator::Reparam];
        let vars: Vec<VarianceRow> =
            ests.iter().map(|&e| variance_at(&b.model, e, &[vec![0.0]], 10, 3).unwrap()).collect();
        let rows = work_normalised_variance(&b.model, &[0.0], &vars, &cfg).unwrap();
        assert_eq!(rows[0].cost_ratio, 1.0);
        for r in rows {
            assert_eq!(r.wnv_component, r.cost_ratio * r.component_variance);
            assert_eq!(r.wnv_norm, r.cost_ratio * r.norm_variance);
        }
    }

    #[test]
    fn sig17_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02e23] {
            assert_eq!(sig17(x).parse::<f64>().unwrap(), x);
        }
    }
}
