use super::params::{Parameters, Variant};
use super::state::PopulationState;
use crate::error::{Error, Result};

/// Contact-tracing pressure `r(t) = sum_i exp(-c (t - T_i))`.
pub fn ct_pressure(detection_times: &[f64], c: f64, t: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Contract(format!("c must be > 0, got {c}")));
    }
    let mut sum = 0.0;
    for &ti in detection_times {
        if ti > t {
            return Err(Error::Contract(format!(
                "detection at {ti} lies in the future of t = {t}"
            )));
        }
        sum += (-c * (t - ti)).exp();
    }
    Ok(sum)
}

/// Total contact-tracing detection rate for `infectious` individuals under
/// pressure `r`. The frequency-dependent form is 0 when `I + r = 0`.
#[inline]
pub fn ct_rate(variant: Variant, lambda3: f64, infectious: f64, r: f64) -> f64 {
    match variant {
        Variant::MassAction => lambda3 * infectious * r,
        Variant::FrequencyDependent => {
            let denom = infectious + r;
            if denom > 0.0 {
                lambda3 * infectious * r / denom
            } else {
                0.0
            }
        }
    }
}

/// Instantaneous rates of every event kind.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventRates {
    pub infect: f64,
    pub death_s: f64,
    pub death_i: f64,
    pub screen: f64,
    pub ct: f64,
    pub immigrate: f64,
}

impl EventRates {
    pub fn total(&self) -> f64 {
        self.infect + self.death_s + self.death_i + self.screen + self.ct + self.immigrate
    }
}

pub fn event_rates(state: &PopulationState, params: &Parameters) -> Result<EventRates> {
    state.validate()?;
    params.validate()?;
    let s = state.counts.s as f64;
    let i = state.counts.i as f64;
    let r = ct_pressure(&state.detection_times, params.c, state.t)?;
    Ok(EventRates {
        infect: params.lambda1 * s * i,
        death_s: params.mu0 * s,
        death_i: params.mu1 * i,
        screen: params.lambda2 * i,
        ct: ct_rate(params.variant, params.lambda3, i, r),
        immigrate: params.lambda0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Counts, Theta};

    fn params(variant: Variant) -> Parameters {
        Parameters::closed(
            Theta {
                mu1: 0.0,
                lambda1: 0.12,
                lambda2: 1.0,
                lambda3: 1.0,
                c: std::f64::consts::LN_2,
            },
            variant,
        )
    }

    #[test]
    fn pressure_examples() {
        assert_eq!(ct_pressure(&[], 1.0, 5.0).unwrap(), 0.0);
        assert_eq!(ct_pressure(&[3.0], 2.0, 3.0).unwrap(), 1.0);
        let r = ct_pressure(&[0.0, 1.0], std::f64::consts::LN_2, 2.0).unwrap();
        assert!((r - 0.75).abs() < 1e-15);
    }

    #[test]
    fn pressure_rejects_future_detection() {
        assert!(ct_pressure(&[4.0], 1.0, 3.0).is_err());
    }

    #[test]
    fn empty_infectious_class_has_no_i_driven_rates() {
        let st = PopulationState {
            t: 1.0,
            counts: Counts {
                s: 10,
                i: 0,
                r1: 1,
                r2: 0,
            },
            detection_times: vec![0.5],
        };
        let r = event_rates(&st, &params(Variant::MassAction)).unwrap();
        assert_eq!((r.infect, r.death_i, r.screen, r.ct), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn infection_and_screening_rates() {
        let mut p = params(Variant::MassAction);
        p.lambda3 = 0.0;
        let st = PopulationState::new(10, 2);
        let r = event_rates(&st, &p).unwrap();
        assert!((r.infect - 2.4).abs() < 1e-12);
        assert!((r.screen - 2.0).abs() < 1e-12);
        assert_eq!(r.ct, 0.0);
    }

    #[test]
    fn both_contact_tracing_forms() {
        // I = 1, r(t) = 0.75 from detections at 0 and 1 evaluated at t = 2.
        let st = PopulationState {
            t: 2.0,
            counts: Counts {
                s: 0,
                i: 1,
                r1: 2,
                r2: 0,
            },
            detection_times: vec![0.0, 1.0],
        };
        let ma = event_rates(&st, &params(Variant::MassAction)).unwrap();
        assert!((ma.ct - 0.75).abs() < 1e-12);
        let fd = event_rates(&st, &params(Variant::FrequencyDependent)).unwrap();
        assert!((fd.ct - 0.75 / 1.75).abs() < 1e-12);
        assert!((fd.ct - 0.4286).abs() < 1e-4);
    }

    #[test]
    fn frequency_form_vanishes_without_pressure_or_infectives() {
        assert_eq!(ct_rate(Variant::FrequencyDependent, 2.0, 0.0, 0.0), 0.0);
    }
}
