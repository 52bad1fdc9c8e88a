//! Large-population limit of the mass-action model:
//!
//! ```text
//! s' = lambda0 - mu0 s - lambda1 s i
//! i' = lambda1 s i - (mu1 + lambda2) i - lambda3 i r
//! r' = lambda2 i + lambda3 i r - c r
//! ```
//!
//! where `r` is the contact-tracing pressure. Integrated with the
//! Dormand–Prince 5(4) pair and a standard PI-free step controller.

use serde::{Deserialize, Serialize};

use super::params::{Parameters, Variant};
use super::rates::ct_pressure;
use super::state::PopulationState;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeInit {
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

impl OdeInit {
    /// Continuous counterpart of a stochastic state; `r` is the pressure at
    /// the state's time.
    pub fn from_state(state: &PopulationState, c: f64) -> Result<Self> {
        Ok(OdeInit {
            s: state.counts.s as f64,
            i: state.counts.i as f64,
            r: ct_pressure(&state.detection_times, c, state.t)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Number of output intervals on `[0, horizon]`.
    pub n_output: usize,
    pub h_min: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-10,
            n_output: 600,
            h_min: 1e-14,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicTrajectory {
    pub grid: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
}

impl DeterministicTrajectory {
    /// Linear interpolation on the output grid.
    pub fn at(&self, t: f64) -> [f64; 3] {
        let g = &self.grid;
        let k = match g.iter().position(|&x| x >= t) {
            Some(0) => return [self.s[0], self.i[0], self.r[0]],
            Some(k) => k,
            None => {
                let n = g.len() - 1;
                return [self.s[n], self.i[n], self.r[n]];
            }
        };
        let w = (t - g[k - 1]) / (g[k] - g[k - 1]);
        let lerp = |v: &[f64]| v[k - 1] + w * (v[k] - v[k - 1]);
        [lerp(&self.s), lerp(&self.i), lerp(&self.r)]
    }
}

fn rhs(p: &Parameters, y: &[f64; 3]) -> [f64; 3] {
    let [s, i, r] = *y;
    [
        p.lambda0 - p.mu0 * s - p.lambda1 * s * i,
        p.lambda1 * s * i - (p.mu1 + p.lambda2) * i - p.lambda3 * i * r,
        p.lambda2 * i + p.lambda3 * i * r - p.c * r,
    ]
}

fn axpy(y: &[f64; 3], h: f64, terms: &[(f64, &[f64; 3])]) -> [f64; 3] {
    let mut out = *y;
    for (a, k) in terms {
        for j in 0..3 {
            out[j] += h * a * k[j];
        }
    }
    out
}

/// One Dormand–Prince step; returns the 5th-order solution and the error
/// estimate.
fn dopri_step(p: &Parameters, y: &[f64; 3], h: f64) -> ([f64; 3], [f64; 3]) {
    let k1 = rhs(p, y);
    let k2 = rhs(p, &axpy(y, h, &[(1.0 / 5.0, &k1)]));
    let k3 = rhs(p, &axpy(y, h, &[(3.0 / 40.0, &k1), (9.0 / 40.0, &k2)]));
    let k4 = rhs(
        p,
        &axpy(
            y,
            h,
            &[(44.0 / 45.0, &k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)],
        ),
    );
    let k5 = rhs(
        p,
        &axpy(
            y,
            h,
            &[
                (19372.0 / 6561.0, &k1),
                (-25360.0 / 2187.0, &k2),
                (64448.0 / 6561.0, &k3),
                (-212.0 / 729.0, &k4),
            ],
        ),
    );
    let k6 = rhs(
        p,
        &axpy(
            y,
            h,
            &[
                (9017.0 / 3168.0, &k1),
                (-355.0 / 33.0, &k2),
                (46732.0 / 5247.0, &k3),
                (49.0 / 176.0, &k4),
                (-5103.0 / 18656.0, &k5),
            ],
        ),
    );
    let y5 = axpy(
        y,
        h,
        &[
            (35.0 / 384.0, &k1),
            (500.0 / 1113.0, &k3),
            (125.0 / 192.0, &k4),
            (-2187.0 / 6784.0, &k5),
            (11.0 / 84.0, &k6),
        ],
    );
    let k7 = rhs(p, &y5);
    let e = [
        71.0 / 57600.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let mut err = [0.0; 3];
    for j in 0..3 {
        err[j] = h
            * (e[0] * k1[j]
                + e[1] * k3[j]
                + e[2] * k4[j]
                + e[3] * k5[j]
                + e[4] * k6[j]
                + e[5] * k7[j]);
    }
    (y5, err)
}

/// Solves the ODE on a uniform output grid of `opts.n_output` intervals.
pub fn solve_ode(
    params: &Parameters,
    init: OdeInit,
    horizon: f64,
    opts: &OdeOptions,
) -> Result<DeterministicTrajectory> {
    if !(horizon > 0.0) || opts.n_output == 0 {
        return Err(Error::Contract(
            "horizon and n_output must be positive".into(),
        ));
    }
    let n = opts.n_output;
    let grid: Vec<f64> = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();
    solve_ode_at(params, init, &grid, opts)
}

/// Solves the ODE from `t = grid[0]` and reports the solution at every grid
/// point (which must be increasing).
pub fn solve_ode_at(
    params: &Parameters,
    init: OdeInit,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<DeterministicTrajectory> {
    params.validate()?;
    if params.variant != Variant::MassAction {
        return Err(Error::Contract(
            "the ODE limit is only available for the mass-action variant".into(),
        ));
    }
    if !(init.s >= 0.0 && init.i >= 0.0 && init.r >= 0.0) {
        return Err(Error::Contract(
            "initial condition must be nonnegative".into(),
        ));
    }
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Contract(
            "output grid must be nonempty and increasing".into(),
        ));
    }

    let mut y = [init.s, init.i, init.r];
    let mut t = grid[0];
    let span = grid[grid.len() - 1] - grid[0];
    let mut h = (span / 100.0).max(1e-6).min(0.01);
    let mut out = DeterministicTrajectory {
        grid: grid.to_vec(),
        s: vec![y[0]],
        i: vec![y[1]],
        r: vec![y[2]],
    };

    for &target in &grid[1..] {
        while t < target {
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            if step < opts.h_min * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t, h: step });
            }
            let (y_new, err) = dopri_step(params, &y, step);
            let mut norm = 0.0;
            for j in 0..3 {
                let sc = opts.atol + opts.rtol * y[j].abs().max(y_new[j].abs());
                norm += (err[j] / sc).powi(2);
            }
            let norm = (norm / 3.0).sqrt();
            if !norm.is_finite() {
                h = step * 0.2;
                continue;
            }
            let factor = if norm == 0.0 {
                5.0
            } else {
                (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            if norm <= 1.0 {
                t = if last { target } else { t + step };
                y = y_new;
                // a step clamped to the output point keeps the previous proposal
                if !last {
                    h = step * factor;
                }
            } else {
                h = step * factor;
            }
        }
        out.s.push(y[0]);
        out.i.push(y[1]);
        out.r.push(y[2]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Theta;

    fn params(lambda1: f64, lambda2: f64, lambda3: f64) -> Parameters {
        Parameters::closed(
            Theta {
                mu1: 0.1,
                lambda1,
                lambda2,
                lambda3,
                c: 1.0,
            },
            Variant::MassAction,
        )
    }

    #[test]
    fn linear_decay_of_infectives() {
        let p = params(0.0, 0.5, 0.0);
        let sol = solve_ode(
            &p,
            OdeInit {
                s: 100.0,
                i: 50.0,
                r: 0.0,
            },
            4.0,
            &OdeOptions::default(),
        )
        .unwrap();
        for (t, i) in sol.grid.iter().zip(&sol.i) {
            let exact = 50.0 * (-(0.1 + 0.5) * t).exp();
            assert!(
                (i - exact).abs() <= 1e-8 * exact.max(1.0),
                "t={t}: {i} vs {exact}"
            );
        }
    }

    #[test]
    fn equilibrium_without_infectives() {
        let p = params(0.3, 0.5, 0.0);
        let sol = solve_ode(
            &p,
            OdeInit {
                s: 7.0,
                i: 0.0,
                r: 0.0,
            },
            3.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert!(sol.s.iter().all(|&s| s == 7.0));
        assert!(sol.i.iter().all(|&i| i == 0.0));
    }

    #[test]
    fn rejects_frequency_dependent_variant() {
        let mut p = params(0.3, 0.5, 0.0);
        p.variant = Variant::FrequencyDependent;
        assert!(solve_ode(
            &p,
            OdeInit {
                s: 1.0,
                i: 1.0,
                r: 0.0
            },
            1.0,
            &OdeOptions::default()
        )
        .is_err());
    }

    #[test]
    fn reports_step_underflow() {
        // Blow-up in finite time: i' ~ lambda1 s i with huge s i.
        let p = params(1e6, 0.0, 0.0);
        let opts = OdeOptions {
            h_min: 1e-3,
            ..OdeOptions::default()
        };
        let res = solve_ode(
            &p,
            OdeInit {
                s: 1e6,
                i: 1e6,
                r: 0.0,
            },
            1.0,
            &opts,
        );
        assert!(matches!(res, Err(Error::StepSizeUnderflow { .. })));
    }
}
