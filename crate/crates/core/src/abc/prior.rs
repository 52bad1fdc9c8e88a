use std::f64::consts::{LN_10, LN_2};

use rand::distr::{Distribution, Open01};
use rand::Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::adjust::Transform;
use crate::error::{Error, Result};
use crate::model::{ParamName, Theta};
use crate::rng::rng_from_seed;

/// Prior law of one coordinate of θ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamPrior {
    /// `log10 x ~ Uniform(lo, hi)`.
    Log10Uniform {
        lo: f64,
        hi: f64,
    },
    /// `x = ln 2 / h` with half-life `h ~ Uniform(lo, hi)`.
    HalfLifeUniform {
        lo: f64,
        hi: f64,
    },
    /// Gamma with shape and rate.
    Gamma {
        shape: f64,
        rate: f64,
    },
    Fixed {
        value: f64,
    },
}

impl ParamPrior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ParamPrior::Log10Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            ParamPrior::HalfLifeUniform { lo, hi } => lo > 0.0 && hi.is_finite() && lo < hi,
            ParamPrior::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
            ParamPrior::Fixed { value } => value.is_finite() && value >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameters(format!("invalid prior {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ParamPrior::Log10Uniform { lo, hi } => {
                let u: f64 = Open01.sample(rng);
                10f64.powf(lo + u * (hi - lo))
            }
            ParamPrior::HalfLifeUniform { lo, hi } => {
                let u: f64 = Open01.sample(rng);
                LN_2 / (lo + u * (hi - lo))
            }
            ParamPrior::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate)
                .expect("validated gamma prior")
                .sample(rng),
            ParamPrior::Fixed { value } => value,
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, ParamPrior::Fixed { .. })
    }

    /// Closed support `[lo, hi]`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            ParamPrior::Log10Uniform { lo, hi } => (10f64.powf(lo), 10f64.powf(hi)),
            ParamPrior::HalfLifeUniform { lo, hi } => (LN_2 / hi, LN_2 / lo),
            ParamPrior::Gamma { .. } => (0.0, f64::INFINITY),
            ParamPrior::Fixed { value } => (value, value),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        match self {
            ParamPrior::Gamma { .. } => x > 0.0 && x.is_finite(),
            _ => x >= lo && x <= hi,
        }
    }

    /// Density on the natural scale (0 for fixed priors).
    pub fn density(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        match *self {
            ParamPrior::Log10Uniform { lo, hi } => 1.0 / (x * LN_10 * (hi - lo)),
            ParamPrior::HalfLifeUniform { lo, hi } => LN_2 / (x * x * (hi - lo)),
            ParamPrior::Gamma { shape, rate } => {
                let ln = shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape);
                ln.exp()
            }
            ParamPrior::Fixed { .. } => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ParamPrior::Log10Uniform { lo, hi } => {
                (10f64.powf(hi) - 10f64.powf(lo)) / ((hi - lo) * LN_10)
            }
            ParamPrior::HalfLifeUniform { lo, hi } => LN_2 * (hi.ln() - lo.ln()) / (hi - lo),
            ParamPrior::Gamma { shape, rate } => shape / rate,
            ParamPrior::Fixed { value } => value,
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        match *self {
            ParamPrior::Log10Uniform { lo, hi } => {
                let second =
                    (10f64.powf(2.0 * hi) - 10f64.powf(2.0 * lo)) / (2.0 * (hi - lo) * LN_10);
                (second - m * m).max(0.0)
            }
            ParamPrior::HalfLifeUniform { lo, hi } => {
                let second = LN_2 * LN_2 * (1.0 / lo - 1.0 / hi) / (hi - lo);
                (second - m * m).max(0.0)
            }
            ParamPrior::Gamma { shape, rate } => shape / (rate * rate),
            ParamPrior::Fixed { .. } => 0.0,
        }
    }

    /// Scale on which regression adjustment and mode estimation operate;
    /// its inverse maps the real line into the support.
    pub fn transform(&self) -> Transform {
        match *self {
            ParamPrior::Log10Uniform { lo, hi } => Transform::Log10Logit { lo, hi },
            ParamPrior::HalfLifeUniform { lo, hi } => Transform::Logit {
                lo: LN_2 / hi,
                hi: LN_2 / lo,
            },
            ParamPrior::Gamma { .. } => Transform::Log,
            ParamPrior::Fixed { .. } => Transform::Identity,
        }
    }

    /// Width of the support in decades, used to rescale errors. `None` for
    /// unbounded or fixed priors.
    pub fn range_log10(&self) -> Option<f64> {
        match *self {
            ParamPrior::Log10Uniform { lo, hi } => Some(hi - lo),
            ParamPrior::HalfLifeUniform { lo, hi } => Some(hi.log10() - lo.log10()),
            _ => None,
        }
    }
}

/// Independent priors on the five inferential rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub mu1: ParamPrior,
    pub lambda1: ParamPrior,
    pub lambda2: ParamPrior,
    pub lambda3: ParamPrior,
    pub c: ParamPrior,
}

impl PriorSpec {
    /// Priors of the HIV/Cuba study: log-uniform rates and a half-life
    /// between one month and five years for the contact-tracing decay.
    pub fn hiv_study() -> Self {
        PriorSpec {
            mu1: ParamPrior::Log10Uniform { lo: -6.0, hi: -4.0 },
            lambda1: ParamPrior::Log10Uniform { lo: -9.0, hi: -6.0 },
            lambda2: ParamPrior::Log10Uniform { lo: -4.0, hi: 3.0 },
            lambda3: ParamPrior::Log10Uniform { lo: -8.0, hi: 2.0 },
            c: ParamPrior::HalfLifeUniform {
                lo: 1.0 / 12.0,
                hi: 5.0,
            },
        }
    }

    /// Closed standard SIR without deaths or contact tracing: gamma priors
    /// on λ₁ and λ₂, everything else fixed.
    pub fn standard_sir(lambda1: (f64, f64), lambda2: (f64, f64)) -> Self {
        PriorSpec {
            mu1: ParamPrior::Fixed { value: 0.0 },
            lambda1: ParamPrior::Gamma {
                shape: lambda1.0,
                rate: lambda1.1,
            },
            lambda2: ParamPrior::Gamma {
                shape: lambda2.0,
                rate: lambda2.1,
            },
            lambda3: ParamPrior::Fixed { value: 0.0 },
            c: ParamPrior::Fixed { value: 1.0 },
        }
    }

    pub fn get(&self, name: ParamName) -> &ParamPrior {
        match name {
            ParamName::Mu1 => &self.mu1,
            ParamName::Lambda1 => &self.lambda1,
            ParamName::Lambda2 => &self.lambda2,
            ParamName::Lambda3 => &self.lambda3,
            ParamName::C => &self.c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for name in ParamName::ALL {
            self.get(name).validate()?;
        }
        if let ParamPrior::Fixed { value } = self.c {
            if !(value > 0.0) {
                return Err(Error::InvalidParameters("fixed c must be positive".into()));
            }
        }
        Ok(())
    }

    /// Coordinates that are actually inferred.
    pub fn free(&self) -> Vec<ParamName> {
        ParamName::ALL
            .into_iter()
            .filter(|&n| !self.get(n).is_fixed())
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Theta {
        let mut th = Theta::from_array([0.0; 5]);
        for name in ParamName::ALL {
            th.set(name, self.get(name).sample(rng));
        }
        th
    }

    pub fn contains(&self, theta: &Theta) -> bool {
        ParamName::ALL
            .into_iter()
            .all(|n| self.get(n).contains(theta.get(n)))
    }

    pub fn mean(&self) -> Theta {
        let mut th = Theta::from_array([0.0; 5]);
        for name in ParamName::ALL {
            th.set(name, self.get(name).mean());
        }
        th
    }
}

/// One prior draw from a fresh generator seeded with `seed`.
pub fn sample_prior(spec: &PriorSpec, seed: u64) -> Theta {
    spec.sample(&mut rng_from_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Continuous, Gamma as StatrsGamma};

    #[test]
    fn log10_uniform_support() {
        let p = ParamPrior::Log10Uniform { lo: -9.0, hi: -6.0 };
        let mut rng = rng_from_seed(1);
        for _ in 0..10_000 {
            let x = p.sample(&mut rng);
            assert!((1e-9..=1e-6).contains(&x));
        }
    }

    #[test]
    fn log10_uniform_mean_of_exponent() {
        let p = ParamPrior::Log10Uniform { lo: -9.0, hi: -6.0 };
        let mut rng = rng_from_seed(2);
        let n = 100_000;
        let logs: Vec<f64> = (0..n).map(|_| p.sample(&mut rng).log10()).collect();
        let m = logs.iter().sum::<f64>() / n as f64;
        // Uniform(-9,-6): mean -7.5, sd 3/sqrt(12)
        let se = 3.0 / 12f64.sqrt() / (n as f64).sqrt();
        assert!((m + 7.5).abs() < 3.0 * se, "mean {m}");
    }

    #[test]
    fn half_life_median() {
        let p = ParamPrior::HalfLifeUniform {
            lo: 1.0 / 12.0,
            hi: 5.0,
        };
        let mut rng = rng_from_seed(3);
        let n = 100_001;
        let mut h: Vec<f64> = (0..n).map(|_| LN_2 / p.sample(&mut rng)).collect();
        h.sort_by(|a, b| a.total_cmp(b));
        let med = h[n / 2];
        let expected = (1.0 / 12.0 + 5.0) / 2.0;
        // sd of the sample median of Uniform(a,b) is about (b-a)/(2 sqrt(n))
        let se = (5.0 - 1.0 / 12.0) / (2.0 * (n as f64).sqrt());
        assert!((med - expected).abs() < 4.0 * se, "median {med}");
    }

    fn mc_moments(p: ParamPrior, seed: u64, n: usize) -> (f64, f64) {
        let mut rng = rng_from_seed(seed);
        let xs: Vec<f64> = (0..n).map(|_| p.sample(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (m, v)
    }

    #[test]
    fn analytic_moments_match_sampling() {
        let n = 200_000;
        for (k, p) in [
            ParamPrior::Log10Uniform { lo: -2.0, hi: 1.0 },
            ParamPrior::HalfLifeUniform {
                lo: 1.0 / 12.0,
                hi: 5.0,
            },
            ParamPrior::Gamma {
                shape: 2.0,
                rate: 3.0,
            },
            ParamPrior::Gamma {
                shape: 0.1,
                rate: 0.1,
            },
        ]
        .into_iter()
        .enumerate()
        {
            let (m, v) = mc_moments(p, 10 + k as u64, n);
            let se = (p.variance() / n as f64).sqrt();
            assert!(
                (m - p.mean()).abs() < 4.0 * se,
                "{p:?}: {m} vs {}",
                p.mean()
            );
            assert!(
                (v / p.variance() - 1.0).abs() < 0.2,
                "{p:?}: var {v} vs {}",
                p.variance()
            );
        }
    }

    #[test]
    fn gamma_density_matches_reference() {
        let p = ParamPrior::Gamma {
            shape: 0.1,
            rate: 0.1,
        };
        let r = StatrsGamma::new(0.1, 0.1).unwrap();
        for x in [1e-3, 0.1, 1.0, 7.5] {
            assert!((p.density(x) / r.pdf(x) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        for p in [
            ParamPrior::Log10Uniform { lo: -1.0, hi: 1.0 },
            ParamPrior::HalfLifeUniform { lo: 0.5, hi: 5.0 },
        ] {
            let (a, b) = p.support();
            let n = 200_000;
            let h = (b - a) / n as f64;
            let total: f64 = (0..n)
                .map(|i| p.density(a + (i as f64 + 0.5) * h) * h)
                .sum();
            assert!((total - 1.0).abs() < 1e-4, "{p:?}: {total}");
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let spec = PriorSpec::hiv_study();
        assert_eq!(sample_prior(&spec, 7), sample_prior(&spec, 7));
        assert_ne!(sample_prior(&spec, 7), sample_prior(&spec, 8));
        assert!(spec.contains(&sample_prior(&spec, 7)));
    }

    #[test]
    fn standard_sir_frees_two_rates() {
        let spec = PriorSpec::standard_sir((0.1, 1.0), (0.1, 0.1));
        assert_eq!(spec.free(), vec![ParamName::Lambda1, ParamName::Lambda2]);
        assert_eq!(sample_prior(&spec, 1).lambda3, 0.0);
    }

    #[test]
    fn prior_json_round_trip() {
        let spec = PriorSpec::hiv_study();
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<PriorSpec>(&s).unwrap(), spec);
    }
}
