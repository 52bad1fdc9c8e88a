use std::f64::consts::LN_10;

use crate::error::{Error, Result};

/// Rescaled squared log error: `mean((ln est - ln truth)²) / (range·ln 10)²`
/// with `range_log10` the prior width in decades, so both numerator and
/// denominator use natural logarithms.
pub fn rmse(estimates: &[f64], truth: f64, range_log10: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Empty("estimates"));
    }
    if !(truth > 0.0) {
        return Err(Error::Contract(format!("truth {truth} must be positive")));
    }
    if !(range_log10 > 0.0) {
        return Err(Error::Contract("prior range must be positive".into()));
    }
    if let Some(e) = estimates.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::Contract(format!("estimate {e} is not positive")));
    }
    let range = range_log10 * LN_10;
    let lt = truth.ln();
    Ok(estimates
        .iter()
        .map(|e| (e.ln() - lt).powi(2) / (range * range))
        .sum::<f64>()
        / estimates.len() as f64)
}

/// Mean interval length over the prior range (same units).
pub fn rmci(lengths: &[f64], range: f64) -> Result<f64> {
    if lengths.is_empty() {
        return Err(Error::Empty("interval lengths"));
    }
    if lengths.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Contract(
            "interval lengths must be nonnegative".into(),
        ));
    }
    Ok(lengths.iter().sum::<f64>() / lengths.len() as f64 / range)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[2.0, 2.0], 2.0, 3.0).unwrap(), 0.0);
        assert!((rmse(&[10.0], 1.0, 3.0).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        let both = rmse(&[10.0, 0.1], 1.0, 3.0).unwrap();
        assert!((both - rmse(&[10.0], 1.0, 3.0).unwrap()).abs() < 1e-15);
        assert!(rmse(&[0.0], 1.0, 3.0).is_err());
        assert!(rmse(&[], 1.0, 3.0).is_err());
    }

    #[test]
    fn rmci_cases() {
        assert_eq!(rmci(&[0.0, 0.0], 3.0).unwrap(), 0.0);
        assert_eq!(rmci(&[3.0, 3.0], 3.0).unwrap(), 1.0);
        assert_eq!(rmci(&[1.0, 2.0], 3.0).unwrap(), 0.5);
    }
}
