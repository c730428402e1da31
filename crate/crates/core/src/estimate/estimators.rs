//! Pathwise (reparameterisation), smoothed and score-function estimators.

use std::time::Instant;

use rayon::prelude::*;

use crate::autodiff::{grad_measurable, grad_smoothed, Dual};
use crate::semantics::{eval_real, eval_with_fixed_transforms, EvalError, EvalOptions, Scalar, SmoothingConfig};

use super::{EstimateError, Model, TraceStream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Estimator {
    /// Derivative of the measurable semantics; blind to moving discontinuities.
    Reparam,
    /// Derivative of the smoothed semantics.
    Smooth(SmoothingConfig),
    /// `f * grad log q + grad f` with transformed values held fixed.
    Score,
}

impl Estimator {
    pub fn name(&self) -> String {
        match self {
            Estimator::Reparam => "reparam".into(),
            Estimator::Smooth(cfg) => format!("smooth(eta={})", cfg.eta()),
            Estimator::Score => "score".into(),
        }
    }

    /// Parses `reparam`, `score`, `smooth` (eta 0.15) or `smooth:ETA`.
    pub fn parse(s: &str) -> Option<Estimator> {
        match s {
            "reparam" => Some(Estimator::Reparam),
            "score" => Some(Estimator::Score),
            "smooth" => SmoothingConfig::new(0.15).ok().map(Estimator::Smooth),
            _ => {
                let eta = s.strip_prefix("smooth:").or_else(|| s.strip_prefix("smooth="))?;
                SmoothingConfig::new(eta.parse().ok()?).ok().map(Estimator::Smooth)
            }
        }
    }
}

/// One single-trace gradient estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorSample {
    /// Value of the integrand on this trace under the estimator's semantics.
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Wall-clock time spent producing this sample.
    pub elapsed_ns: u64,
}

fn score_error(e: EvalError) -> EstimateError {
    match e {
        EvalError::NotAffine | EvalError::ParameterGuard => EstimateError::ScoreUnsupported(e.to_string()),
        other => EstimateError::Eval(other),
    }
}

/// Gradient estimate of `E[M]` (in the model's own sign) from one trace.
pub fn single_sample(
    model: &Model,
    est: Estimator,
    theta: &[f64],
    trace: &[f64],
) -> Result<EstimatorSample, EstimateError> {
    if theta.len() != model.dim() {
        return Err(EstimateError::Dimension { expected: model.dim(), got: theta.len() });
    }
    let start = Instant::now();
    let (value, gradient) = match est {
        Estimator::Reparam => grad_measurable(&model.program, theta, trace)?,
        Estimator::Smooth(cfg) => grad_smoothed(&model.program, theta, trace, cfg)?,
        Estimator::Score => {
            if !model.score_supported() {
                return Err(EstimateError::ScoreUnsupported(format!(
                    "model `{}` has a transform that is not affine in a normal, logistic or exponential draw",
                    model.name
                )));
            }
            let seeded: Vec<Dual> = theta.iter().enumerate().map(|(i, t)| Dual::variable(*t, i, theta.len())).collect();
            let (f, log_q) = eval_with_fixed_transforms(&model.program, &seeded, trace).map_err(score_error)?;
            let g = (0..theta.len()).map(|i| f.value * log_q.partial(i) + f.partial(i)).collect();
            (f.value(), g)
        }
    };
    Ok(EstimatorSample { value, gradient, elapsed_ns: start.elapsed().as_nanos() as u64 })
}

/// `n` single-trace samples at `theta`, traces keyed by `(iteration, index)`.
pub fn gradient_samples(
    model: &Model,
    est: Estimator,
    theta: &[f64],
    n: usize,
    stream: &TraceStream,
    iteration: u64,
) -> Result<Vec<EstimatorSample>, EstimateError> {
    if n == 0 {
        return Err(EstimateError::NoSamples);
    }
    let one = |i: usize| {
        let trace = stream.draw(model.trace_type(), iteration, i as u64);
        let s = single_sample(model, est, theta, &trace)?;
        if s.gradient.iter().all(|g| g.is_finite()) {
            Ok(s)
        } else {
            Err(EstimateError::NonFiniteGradient { iteration })
        }
    };
    if n >= 4096 {
        (0..n).into_par_iter().map(one).collect()
    } else {
        (0..n).map(one).collect()
    }
}

/// Monte Carlo mean gradient of `E[M]`.
pub fn estimate(
    model: &Model,
    est: Estimator,
    theta: &[f64],
    n: usize,
    stream: &TraceStream,
    iteration: u64,
) -> Result<Vec<f64>, EstimateError> {
    Ok(summarize(&gradient_samples(model, est, theta, n, stream, iteration)?).mean)
}

pub fn estimate_smooth(
    model: &Model,
    theta: &[f64],
    n: usize,
    cfg: SmoothingConfig,
    stream: &TraceStream,
) -> Result<Vec<f64>, EstimateError> {
    estimate(model, Estimator::Smooth(cfg), theta, n, stream, 0)
}

pub fn estimate_reparam(
    model: &Model,
    theta: &[f64],
    n: usize,
    stream: &TraceStream,
) -> Result<Vec<f64>, EstimateError> {
    estimate(model, Estimator::Reparam, theta, n, stream, 0)
}

pub fn estimate_score(model: &Model, theta: &[f64], n: usize, stream: &TraceStream) -> Result<Vec<f64>, EstimateError> {
    estimate(model, Estimator::Score, theta, n, stream, 0)
}

/// Sample mean, per-component variance and standard error of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSummary {
    pub mean: Vec<f64>,
    /// Unbiased per-component sample variance.
    pub variance: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Unbiased sample variance of the gradient's Euclidean norm.
    pub norm_variance: f64,
}

fn mean_var(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = if n > 1 { xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    (mean, var)
}

pub fn summarize(samples: &[EstimatorSample]) -> GradientSummary {
    let n = samples.len();
    let dim = samples.first().map_or(0, |s| s.gradient.len());
    let mut mean = Vec::with_capacity(dim);
    let mut variance = Vec::with_capacity(dim);
    for i in 0..dim {
        let (m, v) = mean_var(samples.iter().map(|s| s.gradient[i]), n);
        mean.push(m);
        variance.push(v);
    }
    let std_err = variance.iter().map(|v| (v / n as f64).sqrt()).collect();
    let norms = samples.iter().map(|s| s.gradient.iter().map(|g| g * g).sum::<f64>().sqrt());
    let (_, norm_variance) = mean_var(norms, n);
    GradientSummary { mean, variance, std_err, norm_variance }
}

/// Value of the integrand on one trace under measurable or smoothed semantics.
pub fn objective_sample(
    model: &Model,
    theta: &[f64],
    trace: &[f64],
    smoothing: Option<SmoothingConfig>,
) -> Result<f64, EstimateError> {
    let opts = match smoothing {
        Some(cfg) => EvalOptions::smoothed(cfg),
        None => EvalOptions::measurable(),
    };
    Ok(eval_real(&model.program, theta, trace, opts)?)
}
