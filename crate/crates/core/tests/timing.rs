//! Work-normalised variance. Kept in its own test binary so the timing runs
//! do not compete with other tests for cores.

use std::time::Duration;

use smoothppl::estimate::Estimator;
use smoothppl::harness::{builtin, variance_at, work_normalised_variance, ExperimentConfig};
use smoothppl::semantics::SmoothingConfig;

#[test]
fn wnv_identity_and_stable_cost_ratios() {
    let b = builtin("prop2").unwrap();
    let ests = [Estimator::Score, Estimator::Smooth(SmoothingConfig::new(0.15).unwrap()), Estimator::Reparam];
    let vars: Vec<_> = ests.iter().map(|&e| variance_at(&b.model, e, &[vec![0.0]], 200, 1).unwrap()).collect();
    let table = |secs: u64| {
        let cfg = ExperimentConfig { time_budget: Duration::from_secs(secs), ..Default::default() };
        work_normalised_variance(&b.model, &[0.0], &vars, &cfg).unwrap()
    };
    let one = table(1);
    let two = table(2);
    for rows in [&one, &two] {
        assert_eq!(rows[0].cost_ratio, 1.0);
        for r in rows.iter() {
            assert_eq!(r.wnv_component, r.cost_ratio * r.component_variance);
            assert_eq!(r.wnv_norm, r.cost_ratio * r.norm_variance);
        }
    }
    for (a, b) in one.iter().zip(&two) {
        assert!((a.cost_ratio / b.cost_ratio - 1.0).abs() < 0.25, "{} vs {}", a.cost_ratio, b.cost_ratio);
    }
}
