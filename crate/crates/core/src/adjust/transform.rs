use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reparameterisation onto the real line used for regression adjustment.
///
/// `Logit { lo, hi }` maps `(lo, hi)` to ℝ via `ln((x-lo)/(hi-x))`.
/// `Log10Logit { lo, hi }` applies that logit to `log10 x` with `lo`, `hi`
/// given as decades, matching log-uniform priors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Log,
    Logit { lo: f64, hi: f64 },
    Log10Logit { lo: f64, hi: f64 },
}

/// Values on the closed boundary of a logit domain are pulled this far
/// (relative to the interval) inside before transforming.
const BOUNDARY_EPS: f64 = 1e-15;

fn logit_unit(u: f64) -> f64 {
    let u = u.clamp(BOUNDARY_EPS, 1.0 - BOUNDARY_EPS);
    u.ln() - (-u).ln_1p()
}

fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

fn from_unit(lo: f64, hi: f64, y: f64) -> f64 {
    // lo + (hi-lo)σ(y) loses precision next to hi; use the complement there
    if y > 0.0 {
        hi - (hi - lo) * sigmoid(-y)
    } else {
        lo + (hi - lo) * sigmoid(y)
    }
}

fn to_unit(lo: f64, hi: f64, x: f64) -> f64 {
    if x - lo <= hi - x {
        logit_unit((x - lo) / (hi - lo))
    } else {
        // ln((x-lo)/(hi-x)) = -logit((hi-x)/(hi-lo))
        -logit_unit((hi - x) / (hi - lo))
    }
}

impl Transform {
    pub fn apply(&self, x: f64) -> Result<f64> {
        let out_of_domain = || Error::Contract(format!("{x} outside the domain of {self:?}"));
        match *self {
            Transform::Identity if x.is_finite() => Ok(x),
            Transform::Log if x > 0.0 && x.is_finite() => Ok(x.ln()),
            Transform::Logit { lo, hi } if x >= lo && x <= hi => Ok(to_unit(lo, hi, x)),
            Transform::Log10Logit { lo, hi } if x > 0.0 => {
                let l = x.log10();
                // tolerate log10 rounding right at the edge of the support
                let slack = 1e-12 * (hi - lo);
                if l < lo - slack || l > hi + slack {
                    return Err(out_of_domain());
                }
                Ok(to_unit(lo, hi, l.clamp(lo, hi)))
            }
            _ => Err(out_of_domain()),
        }
    }

    pub fn invert(&self, y: f64) -> f64 {
        match *self {
            Transform::Identity => y,
            Transform::Log => y.exp(),
            Transform::Logit { lo, hi } => from_unit(lo, hi, y),
            Transform::Log10Logit { lo, hi } => 10f64.powf(from_unit(lo, hi, y)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        assert_eq!(Transform::Log.apply(1.0).unwrap(), 0.0);
        assert_eq!(Transform::Log.invert(0.0), 1.0);
        let unit = Transform::Logit { lo: 0.0, hi: 1.0 };
        assert_eq!(unit.apply(0.5).unwrap(), 0.0);
        assert_eq!(unit.invert(0.0), 0.5);
        let l = Transform::Logit { lo: -9.0, hi: -6.0 };
        assert!(l.apply(-7.5).unwrap().abs() < 1e-15);
        let ll = Transform::Log10Logit { lo: -9.0, hi: -6.0 };
        assert!(ll.apply(10f64.powf(-7.5)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn out_of_domain_rejected() {
        assert!(Transform::Log.apply(0.0).is_err());
        assert!(Transform::Log.apply(-1.0).is_err());
        assert!(Transform::Logit { lo: 0.0, hi: 1.0 }.apply(1.5).is_err());
        assert!(Transform::Log10Logit { lo: -9.0, hi: -6.0 }
            .apply(1e-3)
            .is_err());
        assert!(Transform::Identity.apply(f64::NAN).is_err());
    }

    #[test]
    fn boundary_values_map_to_finite_numbers() {
        let l = Transform::Logit { lo: 2.0, hi: 3.0 };
        assert!(l.apply(2.0).unwrap().is_finite());
        assert!(l.apply(3.0).unwrap().is_finite());
    }

    #[test]
    fn extreme_inverse_stays_in_support() {
        let l = Transform::Log10Logit { lo: -9.0, hi: -6.0 };
        for y in [-1e6, -50.0, 0.0, 50.0, 1e6] {
            let x = l.invert(y);
            assert!((1e-9..=1e-6).contains(&x), "{y} -> {x}");
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    proptest! {
        #[test]
        fn log_round_trip(x in 1e-300f64..1e300) {
            let t = Transform::Log;
            prop_assert!(rel(t.invert(t.apply(x).unwrap()), x) < 1e-12);
        }

        #[test]
        fn logit_round_trip(lo in -10.0f64..10.0, w in 0.01f64..20.0, u in 0.001f64..0.999) {
            let t = Transform::Logit { lo, hi: lo + w };
            let x = lo + u * w;
            let back = t.invert(t.apply(x).unwrap());
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(w));
        }

        #[test]
        fn log10_logit_round_trip(lo in -9.0f64..0.0, w in 1.0f64..8.0, u in 0.001f64..0.999) {
            let t = Transform::Log10Logit { lo, hi: lo + w };
            let x = 10f64.powf(lo + u * w);
            prop_assert!(rel(t.invert(t.apply(x).unwrap()), x) < 1e-12);
        }

        #[test]
        fn inverse_lands_in_support(y in -1e3f64..1e3) {
            let t = Transform::Logit { lo: 0.1386, hi: 8.3178 };
            let x = t.invert(y);
            prop_assert!((0.1386..=8.3178).contains(&x));
        }
    }
}
