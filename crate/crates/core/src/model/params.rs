use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default per-capita exit rate from the susceptible class (1/year): a
/// 35-year sexually active window. Immigration defaults to `mu0 * S0`.
pub const DEFAULT_MU0: f64 = 1.0 / 35.0;

/// Functional form of the total contact-tracing detection rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `lambda3 * I * r(t)`
    MassAction,
    /// `lambda3 * I * r(t) / (I + r(t))`
    FrequencyDependent,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::MassAction => "mass_action",
            Variant::FrequencyDependent => "frequency_dependent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mass_action" => Some(Variant::MassAction),
            "frequency_dependent" => Some(Variant::FrequencyDependent),
            _ => None,
        }
    }
}

/// Model rates. Units are years and individuals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    /// Immigration into S (individuals/year).
    pub lambda0: f64,
    /// Per-capita exit rate from S.
    pub mu0: f64,
    /// Per-capita death/emigration rate from I.
    pub mu1: f64,
    /// Per-pair infection rate.
    pub lambda1: f64,
    /// Per-capita random-screening rate.
    pub lambda2: f64,
    /// Contact-tracing coefficient.
    pub lambda3: f64,
    /// Decay rate of a detected individual's contact-tracing contribution.
    pub c: f64,
    pub variant: Variant,
}

impl Parameters {
    /// Closed population with the given inferential parameters.
    pub fn closed(theta: Theta, variant: Variant) -> Self {
        Parameters {
            lambda0: 0.0,
            mu0: 0.0,
            mu1: theta.mu1,
            lambda1: theta.lambda1,
            lambda2: theta.lambda2,
            lambda3: theta.lambda3,
            c: theta.c,
            variant,
        }
    }

    /// Sets `mu0` and `lambda0 = mu0 * s0` so that S is at demographic
    /// equilibrium in the absence of infection.
    pub fn with_equilibrium_demography(mut self, s0: f64, mu0: f64) -> Self {
        self.mu0 = mu0;
        self.lambda0 = mu0 * s0;
        self
    }

    pub fn theta(&self) -> Theta {
        Theta {
            mu1: self.mu1,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            c: self.c,
        }
    }

    pub fn with_theta(mut self, theta: Theta) -> Self {
        self.mu1 = theta.mu1;
        self.lambda1 = theta.lambda1;
        self.lambda2 = theta.lambda2;
        self.lambda3 = theta.lambda3;
        self.c = theta.c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda0", self.lambda0),
            ("mu0", self.mu0),
            ("mu1", self.mu1),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameters(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "c must be finite and > 0, got {}",
                self.c
            )));
        }
        Ok(())
    }
}

/// Names of the five inferential coordinates, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    Mu1,
    Lambda1,
    Lambda2,
    Lambda3,
    C,
}

impl ParamName {
    pub const ALL: [ParamName; 5] = [
        ParamName::Mu1,
        ParamName::Lambda1,
        ParamName::Lambda2,
        ParamName::Lambda3,
        ParamName::C,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::Mu1 => "mu1",
            ParamName::Lambda1 => "lambda1",
            ParamName::Lambda2 => "lambda2",
            ParamName::Lambda3 => "lambda3",
            ParamName::C => "c",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

/// The inferential parameter `(mu1, lambda1, lambda2, lambda3, c)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub mu1: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub c: f64,
}

impl Theta {
    pub fn to_array(self) -> [f64; 5] {
        [self.mu1, self.lambda1, self.lambda2, self.lambda3, self.c]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Theta {
            mu1: a[0],
            lambda1: a[1],
            lambda2: a[2],
            lambda3: a[3],
            c: a[4],
        }
    }

    pub fn get(&self, name: ParamName) -> f64 {
        self.to_array()[name.index()]
    }

    pub fn set(&mut self, name: ParamName, value: f64) {
        let mut a = self.to_array();
        a[name.index()] = value;
        *self = Theta::from_array(a);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Parameters {
        Parameters::closed(
            Theta {
                mu1: 0.0,
                lambda1: 0.1,
                lambda2: 1.0,
                lambda3: 0.0,
                c: 1.0,
            },
            Variant::MassAction,
        )
    }

    #[test]
    fn equilibrium_demography_ratio() {
        let p = base().with_equilibrium_demography(6e6, 0.02);
        assert!((p.lambda0 / p.mu0 - 6e6).abs() < 1e-6);
    }

    #[test]
    fn rejects_negative_rates_and_nonpositive_c() {
        let mut p = base();
        p.lambda2 = -1.0;
        assert!(p.validate().is_err());
        let mut p = base();
        p.c = 0.0;
        assert!(p.validate().is_err());
        assert!(base().validate().is_ok());
    }

    #[test]
    fn theta_roundtrip_by_name() {
        let mut t = base().theta();
        t.set(ParamName::Lambda3, 0.5);
        assert_eq!(t.get(ParamName::Lambda3), 0.5);
        assert_eq!(ParamName::parse("lambda3"), Some(ParamName::Lambda3));
    }
}
