//! Smooth-rejection weights.
//!
//! Weights are the kernel values `K(d/δ)` without the `1/δ` normalisation:
//! the constant cancels in every weighted estimator, and dropping it keeps
//! weights finite when δ is tiny (exact matches give δ close to 0).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summaries::{l1_distance, ScaleMatrix, StepPath, SummaryVector};

/// `(3/4)(1 - u²)` on `[-1, 1]`, zero outside.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// How the bandwidth δ is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    /// Fraction `P_δ` of simulations receiving positive weight.
    Rate(f64),
    /// Fixed δ.
    Absolute(f64),
}

impl Tolerance {
    pub fn resolve(self, distances: &[f64]) -> Result<f64> {
        match self {
            Tolerance::Rate(p) => tolerance_from_rate(distances, p),
            Tolerance::Absolute(d) if d > 0.0 && d.is_finite() => Ok(d),
            Tolerance::Absolute(d) => {
                Err(Error::Contract(format!("tolerance {d} must be positive")))
            }
        }
    }
}

/// Number of accepted simulations, `⌈p·n⌉`, robust to `p·n` landing a hair
/// above an integer through rounding.
pub fn accepted_count(n: usize, p: f64) -> usize {
    let x = p * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r
    } else {
        x.ceil()
    };
    (k as usize).clamp(1, n)
}

/// δ from the `⌈p·N⌉`-th smallest distance.
///
/// The order statistic itself would sit on the kernel boundary and get
/// weight 0, so δ is nudged just above it: exactly `⌈p·N⌉` simulations
/// get positive weight when there are no ties. Infinite distances (failed
/// simulations) are never accepted; if fewer than `⌈p·N⌉` distances are
/// finite, all finite ones are.
pub fn tolerance_from_rate(distances: &[f64], p: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::Empty("distances"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Contract(format!(
            "tolerance rate {p} outside (0, 1]"
        )));
    }
    if distances.iter().any(|d| d.is_nan() || *d < 0.0) {
        return Err(Error::Contract("distances must be nonnegative".into()));
    }
    let mut finite: Vec<f64> = distances
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .collect();
    if finite.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    let k = accepted_count(distances.len(), p).min(finite.len());
    let (_, kth, _) = finite.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    Ok(nudge(*kth))
}

fn nudge(d: f64) -> f64 {
    d + (d * 1e-12).max(1e-300)
}

/// `K(dᵢ/δ)` for each distance.
pub fn kernel_weights(distances: &[f64], delta: f64) -> Vec<f64> {
    distances.iter().map(|d| epanechnikov(d / delta)).collect()
}

fn check_not_degenerate(w: &[f64]) -> Result<()> {
    if w.iter().any(|&x| x > 0.0) {
        Ok(())
    } else {
        Err(Error::DegenerateWeights)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub weights: Vec<f64>,
    /// Bandwidths used, one per kernel factor.
    pub deltas: Vec<f64>,
}

/// L1 distances of simulated detection paths to the observed ones, over
/// `[0, horizon]`.
pub fn path_distances(
    sims: &[(StepPath, StepPath)],
    obs: &(StepPath, StepPath),
    horizon: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let pairs: Result<Vec<(f64, f64)>> = sims
        .par_iter()
        .map(|(r1, r2)| {
            Ok((
                l1_distance(r1, &obs.0, horizon)?,
                l1_distance(r2, &obs.1, horizon)?,
            ))
        })
        .collect();
    Ok(pairs?.into_iter().unzip())
}

/// Product-kernel weights `K(d¹ᵢ/δ₁)·K(d²ᵢ/δ₂)` from precomputed distances.
pub fn path_weights_from_distances(
    d1: &[f64],
    d2: &[f64],
    tol: (Tolerance, Tolerance),
) -> Result<Weights> {
    if d1.len() != d2.len() {
        return Err(Error::Contract("distance vectors differ in length".into()));
    }
    let delta1 = tol.0.resolve(d1)?;
    let delta2 = tol.1.resolve(d2)?;
    let weights: Vec<f64> = d1
        .iter()
        .zip(d2)
        .map(|(a, b)| epanechnikov(a / delta1) * epanechnikov(b / delta2))
        .collect();
    check_not_degenerate(&weights)?;
    Ok(Weights {
        weights,
        deltas: vec![delta1, delta2],
    })
}

/// Product-kernel weights where `p` is the fraction of simulations that
/// get positive joint weight. Both margins use the same rate, the smallest
/// one giving at least `⌈p·N⌉` draws in the intersection (fewer only when
/// fewer distances are finite).
pub fn path_weights_joint_rate(d1: &[f64], d2: &[f64], p: f64) -> Result<Weights> {
    if d1.len() != d2.len() {
        return Err(Error::Contract("distance vectors differ in length".into()));
    }
    if d1.is_empty() {
        return Err(Error::Empty("distances"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Contract(format!(
            "tolerance rate {p} outside (0, 1]"
        )));
    }
    if d1.iter().chain(d2).any(|d| d.is_nan() || *d < 0.0) {
        return Err(Error::Contract("distances must be nonnegative".into()));
    }
    let sorted = |d: &[f64]| {
        let mut v: Vec<f64> = d.iter().copied().filter(|d| d.is_finite()).collect();
        v.sort_unstable_by(f64::total_cmp);
        v
    };
    let (s1, s2) = (sorted(d1), sorted(d2));
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    let deltas = |k: usize| {
        (
            nudge(s1[k.min(s1.len()) - 1]),
            nudge(s2[k.min(s2.len()) - 1]),
        )
    };
    let joint = |k: usize| {
        let (a, b) = deltas(k);
        d1.iter()
            .zip(d2)
            .filter(|(x, y)| epanechnikov(*x / a) * epanechnikov(*y / b) > 0.0)
            .count()
    };
    let target = accepted_count(d1.len(), p);
    let (mut lo, mut hi) = (1, s1.len().max(s2.len()));
    if joint(hi) >= target {
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if joint(mid) >= target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
    }
    let (delta1, delta2) = deltas(hi);
    let weights: Vec<f64> = d1
        .iter()
        .zip(d2)
        .map(|(a, b)| epanechnikov(a / delta1) * epanechnikov(b / delta2))
        .collect();
    check_not_degenerate(&weights)?;
    Ok(Weights {
        weights,
        deltas: vec![delta1, delta2],
    })
}

/// Product-kernel weights of simulated `(R¹, R²)` paths. Both tolerances
/// are resolved independently over their own distance vectors.
pub fn path_weights(
    sims: &[(StepPath, StepPath)],
    obs: &(StepPath, StepPath),
    tol: (Tolerance, Tolerance),
) -> Result<Weights> {
    let horizon = obs.0.t_end();
    let (d1, d2) = path_distances(sims, obs, horizon)?;
    path_weights_from_distances(&d1, &d2, tol)
}

/// `‖H⁻¹(sᵢ - s_obs)‖₂` for each simulation.
pub fn scaled_distances(
    sims: &[SummaryVector],
    obs: &SummaryVector,
    h: &ScaleMatrix,
) -> Result<Vec<f64>> {
    if h.sd.len() != obs.entries.len() {
        return Err(Error::LayoutMismatch(format!(
            "scale of dimension {} for summaries of dimension {}",
            h.sd.len(),
            obs.entries.len()
        )));
    }
    if h.sd.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Contract("scale entries must be positive".into()));
    }
    sims.par_iter()
        .map(|s| {
            s.check_layout(obs)?;
            Ok(h.scaled_distance(&s.entries, &obs.entries))
        })
        .collect()
}

/// Spherical-kernel weights `K(‖H⁻¹(sᵢ - s_obs)‖/δ)`.
pub fn vector_weights(
    sims: &[SummaryVector],
    obs: &SummaryVector,
    h: &ScaleMatrix,
    tol: Tolerance,
) -> Result<Weights> {
    let d = scaled_distances(sims, obs, h)?;
    vector_weights_from_distances(&d, tol)
}

pub fn vector_weights_from_distances(d: &[f64], tol: Tolerance) -> Result<Weights> {
    let delta = tol.resolve(d)?;
    let weights = kernel_weights(d, delta);
    check_not_degenerate(&weights)?;
    Ok(Weights {
        weights,
        deltas: vec![delta],
    })
}
