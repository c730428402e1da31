//! Gradient estimators against the quadrature oracle, and the optimisers.
#![allow(clippy::needless_range_loop)]

mod common;

use proptest::prelude::*;
use smoothppl::estimate::{
    estimate_score, estimate_smooth, gradient_samples, run_adam, run_sgd, summarize, AdamConfig, Domain, EstimateError,
    Estimator, GradientSummary, Model, ModelOracle, Sense, StepSchedule, TraceStream,
};
use smoothppl::harness::{bisect, builtin, quadrature_gradient, QuadratureOptions};
use smoothppl::semantics::SmoothingConfig;
use smoothppl::syntax::{parse_program, BaseType};
use smoothppl::types::check_sgd;

fn cfg(e: f64) -> SmoothingConfig {
    SmoothingConfig::new(e).unwrap()
}

fn model(src: &str) -> Model {
    Model::new("test", parse_program(src).unwrap(), Sense::Minimize).unwrap()
}

fn summary(m: &Model, est: Estimator, theta: &[f64], n: usize, seed: u64) -> GradientSummary {
    summarize(&gradient_samples(m, est, theta, n, &TraceStream::new(seed), 0).unwrap())
}

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[test]
fn constant_integrand() {
    let m = model("(program (params (theta real)) (body (add 7 (mul 0 (transform normal (lam s (add s theta)))))))");
    let s = TraceStream::new(1);
    assert_eq!(estimate_smooth(&m, &[0.3], 100, cfg(0.1), &s).unwrap(), vec![0.0]);
    let score = summary(&m, Estimator::Score, &[0.3], 20_000, 2);
    assert!(score.mean[0].abs() <= 3.0 * score.std_err[0], "{score:?}");
}

#[test]
fn example1_estimators() {
    let b = builtin("example1").unwrap();
    let m = &b.model;
    let reparam = summary(m, Estimator::Reparam, &[1.0], 100_000, 3);
    assert!((reparam.mean[0] + 1.0).abs() <= 3.0 * reparam.std_err[0] + 1e-12);

    let opts = QuadratureOptions::default();
    let smooth_truth = quadrature_gradient(&m.program, &[0.0], Some(cfg(0.05)), &opts, 1e-4).unwrap()[0];
    let smooth = summary(m, Estimator::Smooth(cfg(0.05)), &[0.0], 200_000, 4);
    assert!((smooth.mean[0] - smooth_truth).abs() <= 3.0 * smooth.std_err[0], "{smooth:?} vs {smooth_truth}");
    assert!((smooth_truth - phi(0.0)).abs() < 0.02);

    let score = summary(m, Estimator::Score, &[0.0], 1_000_000, 5);
    assert!((score.mean[0] - phi(0.0)).abs() <= 3.0 * score.std_err[0], "{score:?}");
    let est = estimate_score(m, &[0.0], 1000, &TraceStream::new(5)).unwrap();
    assert_eq!(est.len(), 1);
}

#[test]
fn reparameterisation_bias_is_detected() {
    let b = builtin("example1").unwrap();
    let truth = quadrature_gradient(&b.model.program, &[0.0], None, &QuadratureOptions::default(), 1e-4).unwrap()[0];
    assert!((truth - phi(0.0)).abs() < 1e-6);
    let r = summary(&b.model, Estimator::Reparam, &[0.0], 100_000, 6);
    let gap = (r.mean[0] - truth).abs();
    assert!(gap >= 0.35 && gap >= 30.0 * r.std_err[0]);
}

/// Smoothed estimates are unbiased for the smoothed objective on every
/// SGD-typable real-valued corpus program the oracle can integrate. The
/// slack term covers the oracle's finite-difference error.
#[test]
fn smooth_estimator_is_unbiased_on_corpus() {
    let mut checked = 0;
    for (name, p, dists) in common::typable_corpus() {
        if dists.len() > 2 || dists.is_empty() || p.params.is_empty() || check_sgd(&p).is_err() {
            continue;
        }
        let Ok(m) = Model::new(&name, p.clone(), Sense::Minimize) else { continue };
        let opts = QuadratureOptions { nodes: if dists.len() == 2 { 801 } else { 4001 }, ..Default::default() };
        for e in [0.2, 0.1] {
            for k in 0..3 {
                let theta: Vec<f64> = p
                    .params
                    .iter()
                    .map(|d| match d.base {
                        BaseType::Real => [-0.5, 0.3, 1.0][k],
                        BaseType::PosReal => [0.5, 1.0, 2.0][k],
                    })
                    .collect();
                let truth = quadrature_gradient(&p, &theta, Some(cfg(e)), &opts, 1e-4).unwrap();
                let s = summary(&m, Estimator::Smooth(cfg(e)), &theta, 100_000, 7 + k as u64);
                for i in 0..theta.len() {
                    assert!(
                        (s.mean[i] - truth[i]).abs() <= 4.0 * s.std_err[i] + 1e-6 * truth[i].abs().max(1.0),
                        "{name} eta {e} theta {theta:?}: {} vs {}",
                        s.mean[i],
                        truth[i]
                    );
                }
            }
        }
        checked += 1;
    }
    assert!(checked >= 8, "only {checked} programs checked");
}

#[test]
fn estimators_agree_without_conditionals() {
    let m = model("(program (params (mu real) (sd preal)) (body (app (lam z (mul z z)) (transform normal (lam s (add (mul s sd) mu))))))");
    let theta = [0.7, 1.3];
    let exact = [2.0 * 0.7, 2.0 * 1.3];
    let runs: Vec<GradientSummary> = [Estimator::Reparam, Estimator::Smooth(cfg(0.1)), Estimator::Score]
        .iter()
        .enumerate()
        .map(|(i, &e)| summary(&m, e, &theta, 100_000, 30 + i as u64))
        .collect();
    for a in &runs {
        for i in 0..2 {
            assert!((a.mean[i] - exact[i]).abs() <= 4.0 * a.std_err[i], "{a:?}");
        }
        for b in &runs {
            for i in 0..2 {
                let se = a.std_err[i].hypot(b.std_err[i]);
                assert!((a.mean[i] - b.mean[i]).abs() <= 4.0 * se);
            }
        }
    }
}

#[test]
fn score_requires_affine_transforms() {
    let m = model("(program (params (theta real)) (body (transform normal (lam s (add (pow s 3) theta)))))");
    assert!(!m.score_supported());
    let err = gradient_samples(&m, Estimator::Score, &[0.0], 4, &TraceStream::new(0), 0).unwrap_err();
    assert!(matches!(err, EstimateError::ScoreUnsupported(_)));
}

#[test]
fn sgd_on_quadratic() {
    let domain = Domain { bounds: vec![(-100.0, 100.0)] };
    let mut oracle = |t: &[f64], _: u64| Ok(vec![2.0 * (t[0] - 1.0)]);
    let traj = run_sgd(&domain, &[5.0], StepSchedule::RobbinsMonro(0.5), 2000, &mut oracle).unwrap();
    assert!((traj.last()[0] - 1.0).abs() < 1e-2);
    let mut oracle = |t: &[f64], _: u64| Ok(vec![2.0 * (t[0] - 1.0)]);
    let traj = run_adam(&domain, &[5.0], AdamConfig::with_lr(0.01), 5000, &mut oracle).unwrap();
    assert!((traj.last()[0] - 1.0).abs() < 1e-3);
}

#[test]
fn sgd_on_smoothed_ex0g() {
    let b = builtin("ex0g").unwrap();
    for e in [0.2, 0.1, 0.05] {
        let mut oracle = ModelOracle {
            model: &b.model,
            estimator: Estimator::Smooth(cfg(e)),
            samples: 1,
            stream: TraceStream::new(0),
        };
        let traj = run_sgd(&b.model.domain, &[0.0], StepSchedule::RobbinsMonro(0.5), 2000, &mut oracle).unwrap();
        assert!((traj.last()[0] - 0.5).abs() < 0.01);
    }
    let c = model("(program (params (theta real)) (body 3))");
    let mut oracle = ModelOracle { model: &c, estimator: Estimator::Reparam, samples: 1, stream: TraceStream::new(0) };
    let traj = run_sgd(&c.domain, &[0.4], StepSchedule::Constant(0.1), 50, &mut oracle).unwrap();
    assert!(traj.thetas.iter().all(|t| t[0] == 0.4));
}

/// Adam on the smoothed example reaches the smoothed objective's stationary
/// point, found by bisection on the quadrature gradient.
#[test]
fn adam_reaches_smoothed_stationary_point() {
    let b = builtin("example1").unwrap();
    let opts = QuadratureOptions { nodes: 2001, ..Default::default() };
    let grad = |t: f64| quadrature_gradient(&b.model.program, &[t], Some(cfg(0.15)), &opts, 1e-4).unwrap()[0];
    let stationary = bisect(0.05, 1.0, 1e-6, grad).unwrap();
    let run = || {
        let mut oracle = ModelOracle {
            model: &b.model,
            estimator: Estimator::Smooth(cfg(0.15)),
            samples: 16,
            stream: TraceStream::new(9),
        };
        run_adam(&b.model.domain, &b.theta0, AdamConfig::with_lr(0.001), 10_000, &mut oracle).unwrap()
    };
    let first = run();
    assert!((first.last()[0] - stationary).abs() < 0.05, "{} vs {stationary}", first.last()[0]);
    let second = run();
    let bits = |t: &Vec<Vec<f64>>| t.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&first.thetas), bits(&second.thetas));
}

#[test]
fn projection() {
    let m = model("(program (params (a real) (sd preal)) (body (mul a sd)))");
    assert_eq!(m.project(&[150.0, -0.5]), vec![100.0, 1e-6]);
    assert_eq!(m.project(&[3.0, 2.0]), vec![3.0, 2.0]);
}

#[test]
fn non_finite_gradients_are_errors() {
    let domain = Domain { bounds: vec![(-1.0, 1.0)] };
    let mut oracle = |_: &[f64], _: u64| Ok(vec![f64::NAN]);
    assert_eq!(
        run_sgd(&domain, &[0.0], StepSchedule::Constant(0.1), 3, &mut oracle),
        Err(EstimateError::NonFiniteGradient { iteration: 0 })
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn iterates_stay_in_the_box(start in -100.0f64..100.0, sd in 1e-3f64..10.0, lr in 0.01f64..50.0, slope in -20.0f64..20.0) {
        let m = model("(program (params (a real) (sd preal)) (body (add (mul a 3) (log sd))))");
        let mut oracle = move |_: &[f64], _: u64| Ok(vec![slope, 1.0]);
        let traj = run_adam(&m.domain, &[start, sd], AdamConfig::with_lr(lr), 200, &mut oracle).unwrap();
        prop_assert!(traj.thetas.iter().all(|t| m.domain.contains(t)));
        let mut oracle = move |_: &[f64], _: u64| Ok(vec![slope, 1.0]);
        let traj = run_sgd(&m.domain, &[start, sd], StepSchedule::Constant(lr), 200, &mut oracle).unwrap();
        prop_assert!(traj.thetas.iter().all(|t| m.domain.contains(t)));
    }
}
