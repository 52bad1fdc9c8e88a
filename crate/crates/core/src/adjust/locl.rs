use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Design matrices with reciprocal condition number below this get a ridge.
pub const RCOND_MIN: f64 = 1e-10;
/// Ridge penalty, relative to the mean diagonal of the standardised
/// normal matrix.
pub const RIDGE_SCALE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoclFit {
    pub alpha: f64,
    /// Slopes on `s - s_obs`, natural summary units. Zero for summaries
    /// that are constant over the positive-weight draws.
    pub beta: Vec<f64>,
    /// Ridge penalty applied when the design was ill-conditioned.
    pub ridge: Option<f64>,
    pub rcond: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoclResult {
    pub adjusted: Vec<f64>,
    pub fit: LoclFit,
}

/// Weighted least squares of `θ` on `(1, s - s_obs)` over positive-weight
/// draws.
pub fn locl_fit<S: AsRef<[f64]>>(
    theta: &[f64],
    stats: &[S],
    obs: &[f64],
    weights: &[f64],
) -> Result<LoclFit> {
    if theta.len() != stats.len() || theta.len() != weights.len() {
        return Err(Error::Contract(
            "draws, summaries and weights differ in length".into(),
        ));
    }
    let d = obs.len();
    if stats.iter().any(|s| s.as_ref().len() != d) {
        return Err(Error::LayoutMismatch(
            "summary dimension differs from the observation".into(),
        ));
    }
    let rows: Vec<usize> = (0..theta.len()).filter(|&i| weights[i] > 0.0).collect();
    if rows.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    let wsum: f64 = rows.iter().map(|&i| weights[i]).sum();
    let w: Vec<f64> = rows.iter().map(|&i| weights[i] / wsum).collect();

    // standardise each regressor by its weighted spread; constant columns
    // are collinear with the intercept and are left out
    let mut cols = Vec::new();
    let mut scale = Vec::new();
    for k in 0..d {
        let x: Vec<f64> = rows
            .iter()
            .map(|&i| stats[i].as_ref()[k] - obs[k])
            .collect();
        let mean: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        let var: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - mean).powi(2)).sum();
        if var > 0.0 && var.is_finite() {
            cols.push(k);
            scale.push(var.sqrt());
        }
    }
    let p = cols.len() + 1;
    let n = rows.len();
    let x = DMatrix::from_fn(n, p, |r, c| {
        if c == 0 {
            1.0
        } else {
            let k = cols[c - 1];
            (stats[rows[r]].as_ref()[k] - obs[k]) / scale[c - 1]
        }
    });
    let xw = DMatrix::from_fn(n, p, |r, c| x[(r, c)] * w[r]);
    let y = DVector::from_iterator(n, rows.iter().map(|&i| theta[i]));
    let mut a = xw.transpose() * &x;
    let b = xw.transpose() * y;

    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let (mn, mx) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| {
        (lo.min(e), hi.max(e.abs()))
    });
    let rcond = if mx > 0.0 { (mn / mx).max(0.0) } else { 0.0 };
    let mut ridge = None;
    if rcond < RCOND_MIN && p > 1 {
        let trace: f64 = (1..p).map(|j| a[(j, j)]).sum();
        let kappa = RIDGE_SCALE * trace / (p - 1) as f64;
        for j in 1..p {
            a[(j, j)] += kappa;
        }
        ridge = Some(kappa);
        log::warn!(
            "local-linear design ill-conditioned (rcond {rcond:.3e}); ridge {kappa:.3e} applied"
        );
    }
    let coef = a
        .cholesky()
        .ok_or_else(|| Error::Regression(format!("normal equations singular (rcond {rcond:.3e})")))?
        .solve(&b);
    let mut beta = vec![0.0; d];
    for (c, &k) in cols.iter().enumerate() {
        beta[k] = coef[c + 1] / scale[c];
    }
    Ok(LoclFit {
        alpha: coef[0],
        beta,
        ridge,
        rcond,
    })
}

/// `θᵢ* = θᵢ - (sᵢ - s_obs)ᵀβ̂`, applied to every draw.
pub fn locl_adjust<S: AsRef<[f64]>>(
    theta: &[f64],
    stats: &[S],
    obs: &[f64],
    weights: &[f64],
) -> Result<LoclResult> {
    let fit = locl_fit(theta, stats, obs, weights)?;
    let adjusted = theta
        .iter()
        .zip(stats)
        .map(|(t, s)| {
            let shift: f64 = s
                .as_ref()
                .iter()
                .zip(obs)
                .zip(&fit.beta)
                .map(|((x, o), b)| (x - o) * b)
                .sum();
            t - shift
        })
        .collect();
    Ok(LoclResult { adjusted, fit })
}
