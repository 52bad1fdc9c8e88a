use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::prior::PriorSpec;
use crate::adjust::Transform;
use crate::error::{Error, Result};
use crate::model::{ParamName, Theta};

/// Which estimator produced the draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Rejection,
    Locl,
    Nch,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Rejection => "rejection",
            Provenance::Locl => "locl",
            Provenance::Nch => "nch",
        }
    }
}

/// Weighted sample approximating the ABC posterior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPosterior {
    pub draws: Vec<Theta>,
    pub weights: Vec<f64>,
    /// Regression-adjusted draws (same weights), when an adjustment ran.
    pub adjusted: Option<Vec<Theta>>,
    pub provenance: Provenance,
    /// Bandwidths used to weight the draws.
    pub deltas: Vec<f64>,
}

impl WeightedPosterior {
    pub fn new(draws: Vec<Theta>, weights: Vec<f64>, deltas: Vec<f64>) -> Result<Self> {
        if draws.len() != weights.len() {
            return Err(Error::Contract(format!(
                "{} draws but {} weights",
                draws.len(),
                weights.len()
            )));
        }
        check_weights(&weights)?;
        Ok(WeightedPosterior {
            draws,
            weights,
            adjusted: None,
            provenance: Provenance::Rejection,
            deltas,
        })
    }

    /// Drops zero-weight draws.
    pub fn compact(mut self) -> Self {
        let keep: Vec<bool> = self.weights.iter().map(|&w| w > 0.0).collect();
        let filter = |v: Vec<Theta>| -> Vec<Theta> {
            v.into_iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(t, _)| t)
                .collect()
        };
        self.draws = filter(self.draws);
        self.adjusted = self.adjusted.map(filter);
        self.weights.retain(|&w| w > 0.0);
        self
    }

    /// The draws estimators use: adjusted ones if present.
    pub fn effective_draws(&self) -> &[Theta] {
        self.adjusted.as_deref().unwrap_or(&self.draws)
    }

    pub fn values(&self, name: ParamName) -> Vec<f64> {
        self.effective_draws().iter().map(|t| t.get(name)).collect()
    }

    pub fn mean(&self, name: ParamName) -> Result<f64> {
        weighted_mean(&self.values(name), &self.weights)
    }

    pub fn quantile(&self, name: ParamName, q: f64) -> Result<f64> {
        weighted_quantile(&self.values(name), &self.weights, q)
    }

    pub fn mode(&self, name: ParamName, transform: &Transform) -> Result<f64> {
        weighted_kde_mode(&self.values(name), &self.weights, transform)
    }

    /// Mean, median, mode and central 95% interval of each free coordinate.
    pub fn summary(&self, prior: &PriorSpec) -> Result<PosteriorSummary> {
        let mut params = Vec::new();
        for name in prior.free() {
            let t = prior.get(name).transform();
            params.push(CoordinateSummary {
                name: name.as_str().to_string(),
                mean: self.mean(name)?,
                median: self.quantile(name, 0.5)?,
                mode: self.mode(name, &t)?,
                q025: self.quantile(name, 0.025)?,
                q975: self.quantile(name, 0.975)?,
            });
        }
        Ok(PosteriorSummary {
            provenance: self.provenance,
            deltas: self.deltas.clone(),
            draws: self.draws.len(),
            positive_weights: self.weights.iter().filter(|&&w| w > 0.0).count(),
            effective_sample_size: effective_sample_size(&self.weights),
            params,
        })
    }

    /// Tab-separated dump: θ coordinates, weight, then adjusted θ if any.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let names: Vec<&str> = ParamName::ALL.iter().map(|n| n.as_str()).collect();
        write!(w, "{}\tweight", names.join("\t"))?;
        if self.adjusted.is_some() {
            for n in &names {
                write!(w, "\tadj_{n}")?;
            }
        }
        writeln!(w)?;
        for (i, (t, wt)) in self.draws.iter().zip(&self.weights).enumerate() {
            let row: Vec<String> = t.to_array().iter().map(|x| format!("{x:e}")).collect();
            write!(w, "{}\t{wt:e}", row.join("\t"))?;
            if let Some(adj) = &self.adjusted {
                for x in adj[i].to_array() {
                    write!(w, "\t{x:e}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub mode: f64,
    pub q025: f64,
    pub q975: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub provenance: Provenance,
    pub deltas: Vec<f64>,
    pub draws: usize,
    pub positive_weights: usize,
    pub effective_sample_size: f64,
    pub params: Vec<CoordinateSummary>,
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Contract(
            "weights must be finite and nonnegative".into(),
        ));
    }
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok(())
}

/// `(Σw)² / Σw²`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

/// Nadaraya–Watson estimate `Σ xᵢwᵢ / Σ wᵢ`.
pub fn weighted_mean(values: &[f64], weights: &[f64]) -> Result<f64> {
    check_weights(weights)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, w) in values.iter().zip(weights) {
        if *w > 0.0 {
            num += x * w;
            den += w;
        }
    }
    Ok(num / den)
}

/// Positive-weight `(value, weight)` pairs sorted by value.
fn sorted_support(values: &[f64], weights: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(x, w)| (*x, *w))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// Smallest value whose cumulative normalised weight reaches `q`.
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> Result<f64> {
    check_weights(weights)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Contract(format!(
            "quantile level {q} outside (0, 1)"
        )));
    }
    let v = sorted_support(values, weights);
    Ok(quantile_sorted(&v, q))
}

fn quantile_sorted(v: &[(f64, f64)], q: f64) -> f64 {
    let total: f64 = v.iter().map(|p| p.1).sum();
    let target = q * total;
    let mut cum = 0.0;
    for &(x, w) in v {
        cum += w;
        // relative slack so that hand-exact levels such as 0.5 of {1,1,2} hit
        if cum >= target * (1.0 - 1e-12) {
            return x;
        }
    }
    v.last().map(|p| p.0).unwrap_or(f64::NAN)
}

/// Number of grid points of the mode search.
pub const MODE_GRID: usize = 512;

/// Weighted Silverman bandwidth `0.9·min(sd, IQR/1.34)·n_eff^{-1/5}` of
/// already-sorted positive-weight pairs. Falls back to whichever spread
/// measure is positive; 0 when both vanish.
fn silverman(v: &[(f64, f64)]) -> f64 {
    let total: f64 = v.iter().map(|p| p.1).sum();
    let mean = v.iter().map(|p| p.0 * p.1).sum::<f64>() / total;
    let var = v.iter().map(|p| p.1 * (p.0 - mean).powi(2)).sum::<f64>() / total;
    let sd = var.sqrt();
    let iqr = (quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => 0.0,
    };
    let weights: Vec<f64> = v.iter().map(|p| p.1).collect();
    0.9 * spread * effective_sample_size(&weights).powf(-0.2)
}

/// Bandwidth of the mode search, on the transformed scale.
pub fn kde_bandwidth(values: &[f64], weights: &[f64], transform: &Transform) -> Result<f64> {
    check_weights(weights)?;
    let v = transformed_support(values, weights, transform)?;
    Ok(silverman(&v))
}

fn transformed_support(values: &[f64], weights: &[f64], t: &Transform) -> Result<Vec<(f64, f64)>> {
    let mut v = sorted_support(values, weights);
    for p in &mut v {
        p.0 = t.apply(p.0)?;
    }
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(v)
}

/// Weighted Gaussian KDE on `transform`'s scale, maximised over a
/// [`MODE_GRID`]-point grid spanning the positive-weight draws; the
/// argmax is mapped back to the natural scale. A single atom is its own
/// mode.
pub fn weighted_kde_mode(values: &[f64], weights: &[f64], transform: &Transform) -> Result<f64> {
    check_weights(weights)?;
    let natural = sorted_support(values, weights);
    if natural[0].0 == natural[natural.len() - 1].0 {
        return Ok(natural[0].0);
    }
    let v = transformed_support(values, weights, transform)?;
    let lo = v[0].0;
    let hi = v[v.len() - 1].0;
    let h = silverman(&v);
    if !(hi > lo) || !(h > 0.0) {
        return Ok(transform.invert(quantile_sorted(&v, 0.5)));
    }
    let density = |g: f64| -> f64 {
        v.iter()
            .map(|&(y, w)| {
                let z = (g - y) / h;
                w * (-0.5 * z * z).exp()
            })
            .sum()
    };
    let step = (hi - lo) / (MODE_GRID - 1) as f64;
    let mut best = (lo, f64::NEG_INFINITY);
    for k in 0..MODE_GRID {
        let g = lo + k as f64 * step;
        let f = density(g);
        if f > best.1 {
            best = (g, f);
        }
    }
    Ok(transform.invert(best.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mean_hand_cases() {
        assert_eq!(
            weighted_mean(&[1.0, 2.0, 4.0], &[1.0, 1.0, 2.0]).unwrap(),
            2.75
        );
        assert_eq!(
            weighted_mean(&[1.0, 2.0, 4.0], &[0.0, 3.0, 0.0]).unwrap(),
            2.0
        );
        assert!((weighted_mean(&[1.0, 2.0, 6.0], &[0.5; 3]).unwrap() - 3.0).abs() < 1e-15);
        assert!(matches!(
            weighted_mean(&[1.0], &[0.0]),
            Err(Error::DegenerateWeights)
        ));
    }

    #[test]
    fn quantile_hand_cases() {
        assert_eq!(
            weighted_quantile(&[3.0, 1.0, 2.0], &[2.0, 1.0, 1.0], 0.5).unwrap(),
            2.0
        );
        // equal weights: ordinary empirical quantile (inverse ECDF)
        let xs = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(weighted_quantile(&xs, &[1.0; 5], 0.4).unwrap(), 2.0);
        assert_eq!(weighted_quantile(&xs, &[1.0; 5], 0.41).unwrap(), 3.0);
        assert_eq!(
            weighted_quantile(&xs, &[0.0, 0.0, 1.0, 1.0, 1.0], 1e-9).unwrap(),
            2.0
        );
        assert!(weighted_quantile(&xs, &[1.0; 5], 1.0).is_err());
    }

    #[test]
    fn mode_single_atom() {
        let m = weighted_kde_mode(&[3.0, 7.0], &[1.0, 0.0], &Transform::Log).unwrap();
        assert_eq!(m, 3.0);
    }

    #[test]
    fn mode_of_symmetric_sample_is_near_median() {
        let xs: Vec<f64> = (0..201).map(|i| -1.0 + i as f64 / 100.0).collect();
        let ws: Vec<f64> = xs.iter().map(|x| 1.0 - x * x + 0.01).collect();
        let m = weighted_kde_mode(&xs, &ws, &Transform::Identity).unwrap();
        let med = weighted_quantile(&xs, &ws, 0.5).unwrap();
        assert!(
            (m - med).abs() <= 2.0 / 511.0 + 1e-12,
            "mode {m} median {med}"
        );
    }

    #[test]
    fn mode_of_mixture_against_dense_grid() {
        // 80% of the mass near 1, 20% near 10, on the log scale
        let mut xs = Vec::new();
        let mut ws = Vec::new();
        for i in 0..400 {
            let u = (i as f64 + 0.5) / 400.0 - 0.5;
            xs.push((0.3 * u).exp());
            ws.push(0.8);
            xs.push(10f64.ln().exp() * (0.3 * u).exp());
            ws.push(0.2);
        }
        let m = weighted_kde_mode(&xs, &ws, &Transform::Log).unwrap();
        assert!((m.ln()).abs() < 0.2, "mode {m}");

        // independent oracle: same KDE evaluated on a much finer grid
        let ys: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let h = kde_bandwidth(&xs, &ws, &Transform::Log).unwrap();
        let (lo, hi) = (
            ys.iter().cloned().fold(f64::INFINITY, f64::min),
            ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..20_000 {
            let g = lo + (hi - lo) * k as f64 / 19_999.0;
            let f: f64 = ys
                .iter()
                .zip(&ws)
                .map(|(y, w)| w * (-0.5 * ((g - y) / h).powi(2)).exp())
                .sum();
            if f > best.1 {
                best = (g, f);
            }
        }
        assert!((m.ln() - best.0).abs() <= (hi - lo) / 511.0);
    }

    #[test]
    fn tsv_dump_has_one_row_per_draw() {
        let th = Theta::from_array([1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut wp = WeightedPosterior::new(vec![th, th], vec![1.0, 0.5], vec![0.1]).unwrap();
        wp.adjusted = Some(vec![th, th]);
        let mut out = Vec::new();
        wp.write_tsv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert_eq!(s.lines().next().unwrap().split('\t').count(), 11);
    }

    #[test]
    fn compact_keeps_positive_weights() {
        let a = Theta::from_array([1.0; 5]);
        let b = Theta::from_array([2.0; 5]);
        let wp = WeightedPosterior::new(vec![a, b], vec![0.0, 0.5], vec![])
            .unwrap()
            .compact();
        assert_eq!(wp.draws, vec![b]);
        assert_eq!(wp.weights, vec![0.5]);
    }

    proptest! {
        #[test]
        fn estimators_permutation_invariant(
            pairs in prop::collection::vec((0.01f64..100.0, 0.0f64..1.0), 2..60),
            rot in 0usize..60,
            q in 0.01f64..0.99,
        ) {
            prop_assume!(pairs.iter().any(|p| p.1 > 0.0));
            let (xs, ws): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
            let mut p2 = pairs.clone();
            p2.reverse();
            let r = rot % p2.len();
            p2.rotate_left(r);
            let (xs2, ws2): (Vec<f64>, Vec<f64>) = p2.into_iter().unzip();
            let m1 = weighted_mean(&xs, &ws).unwrap();
            let m2 = weighted_mean(&xs2, &ws2).unwrap();
            prop_assert!((m1 - m2).abs() <= 1e-9 * m1.abs().max(1.0));
            prop_assert_eq!(weighted_quantile(&xs, &ws, q).unwrap(), weighted_quantile(&xs2, &ws2, q).unwrap());
            let lo = weighted_quantile(&xs, &ws, 0.025).unwrap();
            let hi = weighted_quantile(&xs, &ws, 0.975).unwrap();
            prop_assert!(hi >= lo);
            let t = Transform::Log;
            let d1 = weighted_kde_mode(&xs, &ws, &t).unwrap();
            let d2 = weighted_kde_mode(&xs2, &ws2, &t).unwrap();
            prop_assert!((d1 - d2).abs() <= 1e-9 * d1.abs());
        }
    }
}
