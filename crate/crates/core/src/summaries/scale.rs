use serde::{Deserialize, Serialize};

use super::vector::SummaryVector;
use crate::error::{Error, Result};

/// Diagonal standardisation `H`: one standard deviation per summary entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleMatrix {
    pub sd: Vec<f64>,
}

impl ScaleMatrix {
    /// `‖H⁻¹ (a - b)‖₂`.
    pub fn scaled_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.sd)
            .map(|((x, y), s)| ((x - y) / s).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-entry sample standard deviation (`n - 1` denominator); zero
/// deviations are replaced by 1.
pub fn fit_scale(batch: &[SummaryVector]) -> Result<ScaleMatrix> {
    fit_scale_rows(batch.iter().map(|v| v.entries.as_slice()))
}

pub(crate) fn fit_scale_rows<'a>(
    rows: impl Iterator<Item = &'a [f64]> + Clone,
) -> Result<ScaleMatrix> {
    let n = rows.clone().count();
    if n < 2 {
        return Err(Error::Contract(
            "at least two summary vectors are needed".into(),
        ));
    }
    let d = rows.clone().next().map(|r| r.len()).unwrap_or(0);
    let mut mean = vec![0.0; d];
    for r in rows.clone() {
        if r.len() != d {
            return Err(Error::LayoutMismatch("ragged summary batch".into()));
        }
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut ss = vec![0.0; d];
    for r in rows {
        for ((s, x), m) in ss.iter_mut().zip(r).zip(&mean) {
            *s += (x - m).powi(2);
        }
    }
    let sd = ss
        .into_iter()
        .map(|s| {
            let v = (s / (n - 1) as f64).sqrt();
            if v > 0.0 && v.is_finite() {
                v
            } else {
                1.0
            }
        })
        .collect();
    Ok(ScaleMatrix { sd })
}
