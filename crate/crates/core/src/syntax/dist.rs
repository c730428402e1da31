//! The four primitive distributions, their densities and samplers.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A primitive distribution over the reals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dist {
    Normal,
    Exponential,
    Logistic,
    Cauchy,
}

impl Dist {
    pub const ALL: [Dist; 4] = [Dist::Normal, Dist::Exponential, Dist::Logistic, Dist::Cauchy];

    pub fn name(self) -> &'static str {
        match self {
            Dist::Normal => "normal",
            Dist::Exponential => "exponential",
            Dist::Logistic => "logistic",
            Dist::Cauchy => "cauchy",
        }
    }

    pub fn from_name(name: &str) -> Option<Dist> {
        Dist::ALL.into_iter().find(|d| d.name() == name)
    }

    /// Whether every polynomial moment is finite.
    pub fn has_finite_moments(self) -> bool {
        !matches!(self, Dist::Cauchy)
    }

    /// Closed support interval.
    pub fn support(self) -> (f64, f64) {
        match self {
            Dist::Exponential => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn pdf(self, x: f64) -> f64 {
        match self {
            Dist::Normal => (-0.5 * x * x - LN_SQRT_2PI).exp(),
            Dist::Exponential => {
                if x >= 0.0 {
                    (-x).exp()
                } else {
                    0.0
                }
            }
            Dist::Logistic => {
                let e = (-x.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            Dist::Cauchy => 1.0 / (std::f64::consts::PI * (1.0 + x * x)),
        }
    }

    /// Log density; `-inf` outside the support.
    pub fn log_pdf(self, x: f64) -> f64 {
        match self {
            Dist::Normal => -0.5 * x * x - LN_SQRT_2PI,
            Dist::Exponential => {
                if x >= 0.0 {
                    -x
                } else {
                    f64::NEG_INFINITY
                }
            }
            Dist::Logistic => {
                let a = x.abs();
                -a - 2.0 * (-a).exp().ln_1p()
            }
            Dist::Cauchy => -(std::f64::consts::PI * (1.0 + x * x)).ln(),
        }
    }

    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Dist::Normal => StandardNormal.sample(rng),
            Dist::Exponential => Exp1.sample(rng),
            Dist::Logistic => {
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                (u / (1.0 - u)).ln()
            }
            Dist::Cauchy => {
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                (std::f64::consts::PI * (u - 0.5)).tan()
            }
        }
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pdf_reference_values() {
        assert!((Dist::Normal.pdf(0.0) - 0.398_942_280_4).abs() < 1e-10);
        assert_eq!(Dist::Logistic.pdf(0.0), 0.25);
        assert_eq!(Dist::Exponential.pdf(-1.0), 0.0);
        assert!((Dist::Exponential.pdf(1.0) - (-1.0f64).exp()).abs() < 1e-16);
        assert!((Dist::Cauchy.pdf(1.0) - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-16);
    }

    #[test]
    fn log_pdf_agrees_with_pdf() {
        for d in Dist::ALL {
            for x in [-3.0, -0.5, 0.0, 0.25, 2.0, 7.5] {
                let p = d.pdf(x);
                if p > 0.0 {
                    assert!((d.log_pdf(x) - p.ln()).abs() < 1e-12, "{d} at {x}");
                } else {
                    assert_eq!(d.log_pdf(x), f64::NEG_INFINITY);
                }
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for d in Dist::ALL {
            assert_eq!(Dist::from_name(d.name()), Some(d));
        }
        assert_eq!(Dist::from_name("gamma"), None);
    }

    #[test]
    fn sample_means_are_plausible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        for (d, mean) in [(Dist::Normal, 0.0), (Dist::Exponential, 1.0), (Dist::Logistic, 0.0)] {
            let m: f64 = (0..n).map(|_| d.draw(&mut rng)).sum::<f64>() / n as f64;
            assert!((m - mean).abs() < 0.02, "{d}: {m}");
        }
        assert!((0..1000).all(|_| Dist::Exponential.draw(&mut rng) >= 0.0));
    }
}
