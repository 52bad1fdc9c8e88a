//! Nonlinear conditional heteroscedastic adjustment:
//! `θᵢ* = m̂(s_obs) + (θᵢ - m̂(sᵢ))·σ̂(s_obs)/σ̂(sᵢ)`, with `m̂` and `log σ̂²`
//! each an ensemble average of small neural networks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};

pub const NCH_FORMAT_VERSION: u32 = 1;
/// Added to squared residuals before taking logs.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NchConfig {
    pub mlp: MlpConfig,
    /// Ensemble size per regression.
    pub members: usize,
    pub seed: u64,
    pub min_draws: usize,
    /// Smallest admissible σ̂; smaller predictions are clamped.
    pub sigma_floor: f64,
}

impl Default for NchConfig {
    fn default() -> Self {
        NchConfig {
            mlp: MlpConfig::default(),
            members: 10,
            seed: 0,
            min_draws: 10,
            sigma_floor: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Affine {
    center: f64,
    scale: f64,
}

impl Affine {
    fn fit(y: &[f64], w: &[f64]) -> Self {
        let total: f64 = w.iter().sum();
        let center = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total;
        let var = y
            .iter()
            .zip(w)
            .map(|(a, b)| b * (a - center).powi(2))
            .sum::<f64>()
            / total;
        // a constant target keeps scale 0, so predictions equal it exactly
        let scale = if var.is_finite() { var.sqrt() } else { 1.0 };
        Affine { center, scale }
    }

    fn standardise(&self, v: f64) -> f64 {
        if self.scale > 0.0 {
            (v - self.center) / self.scale
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NchModel {
    pub format: String,
    pub version: u32,
    pub config: NchConfig,
    input_center: Vec<f64>,
    input_scale: Vec<f64>,
    mean_out: Affine,
    logvar_out: Affine,
    mean_members: Vec<Mlp>,
    logvar_members: Vec<Mlp>,
}

impl NchModel {
    fn standardise(&self, s: &[f64]) -> Vec<f64> {
        s.iter()
            .zip(&self.input_center)
            .zip(&self.input_scale)
            .map(|((x, c), h)| (x - c) / h)
            .collect()
    }

    fn ensemble(members: &[Mlp], out: &Affine, z: &[f64]) -> f64 {
        let avg = members.iter().map(|m| m.predict(z)).sum::<f64>() / members.len() as f64;
        out.center + out.scale * avg
    }

    pub fn inputs(&self) -> usize {
        self.input_center.len()
    }

    pub fn members(&self) -> usize {
        self.mean_members.len()
    }

    /// Conditional mean `m̂(s)`.
    pub fn mean(&self, s: &[f64]) -> f64 {
        Self::ensemble(&self.mean_members, &self.mean_out, &self.standardise(s))
    }

    /// `log σ̂²(s)`.
    pub fn log_variance(&self, s: &[f64]) -> f64 {
        Self::ensemble(&self.logvar_members, &self.logvar_out, &self.standardise(s))
    }

    pub fn sigma(&self, s: &[f64]) -> f64 {
        (0.5 * self.log_variance(s)).exp()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: NchModel = serde_json::from_str(text)?;
        if m.format != "sirabc-nch" || m.version != NCH_FORMAT_VERSION {
            return Err(Error::Contract(format!(
                "unsupported model format {} v{}",
                m.format, m.version
            )));
        }
        Ok(m)
    }
}

fn train_ensemble(
    x: &[f64],
    y: &[f64],
    w: &[f64],
    inputs: usize,
    cfg: &NchConfig,
    offset: u64,
    what: &str,
) -> Result<Vec<Mlp>> {
    (0..cfg.members)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, stream::NCH, offset + k as u64));
            let mut net = Mlp::init(inputs, cfg.mlp.hidden, &mut rng);
            net.train(x, y, w, &cfg.mlp).map_err(|e| match e {
                Error::NonConvergence(msg) => {
                    Error::NonConvergence(format!("{what} network {k}: {msg}"))
                }
                other => other,
            })?;
            Ok(net)
        })
        .collect()
}

/// Fits `m̂` on the positive-weight draws, then `log σ̂²` on their log
/// squared residuals. Inputs are centred and scaled by their weighted mean
/// and standard deviation; targets are standardised the same way.
pub fn nch_fit<S: AsRef<[f64]> + Sync>(
    theta: &[f64],
    stats: &[S],
    weights: &[f64],
    cfg: &NchConfig,
) -> Result<NchModel> {
    if theta.len() != stats.len() || theta.len() != weights.len() {
        return Err(Error::Contract(
            "draws, summaries and weights differ in length".into(),
        ));
    }
    if cfg.members == 0 || cfg.mlp.hidden == 0 {
        return Err(Error::Contract("empty network ensemble".into()));
    }
    let rows: Vec<usize> = (0..theta.len()).filter(|&i| weights[i] > 0.0).collect();
    if rows.len() < cfg.min_draws.max(2) {
        return Err(Error::Regression(format!(
            "{} positive-weight draws, at least {} needed",
            rows.len(),
            cfg.min_draws.max(2)
        )));
    }
    let d = stats[rows[0]].as_ref().len();
    if rows.iter().any(|&i| stats[i].as_ref().len() != d) {
        return Err(Error::LayoutMismatch("ragged summaries".into()));
    }
    let w: Vec<f64> = rows.iter().map(|&i| weights[i]).collect();
    let mut input_center = Vec::with_capacity(d);
    let mut input_scale = Vec::with_capacity(d);
    for k in 0..d {
        let col: Vec<f64> = rows.iter().map(|&i| stats[i].as_ref()[k]).collect();
        let a = Affine::fit(&col, &w);
        input_center.push(a.center);
        input_scale.push(if a.scale > 0.0 { a.scale } else { 1.0 });
    }
    let mut x = Vec::with_capacity(rows.len() * d);
    for &i in &rows {
        for k in 0..d {
            x.push((stats[i].as_ref()[k] - input_center[k]) / input_scale[k]);
        }
    }
    let y: Vec<f64> = rows.iter().map(|&i| theta[i]).collect();
    let mean_out = Affine::fit(&y, &w);
    let y_std: Vec<f64> = y.iter().map(|&v| mean_out.standardise(v)).collect();
    let mean_members = train_ensemble(&x, &y_std, &w, d, cfg, 0, "mean")?;

    let mut model = NchModel {
        format: "sirabc-nch".into(),
        version: NCH_FORMAT_VERSION,
        config: *cfg,
        input_center,
        input_scale,
        mean_out,
        logvar_out: Affine {
            center: 0.0,
            scale: 1.0,
        },
        mean_members,
        logvar_members: Vec::new(),
    };
    let lv: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(r, &i)| {
            let z = &x[r * d..(r + 1) * d];
            let m = NchModel::ensemble(&model.mean_members, &model.mean_out, z);
            ((theta[i] - m).powi(2) + RESIDUAL_FLOOR).ln()
        })
        .collect();
    let logvar_out = Affine::fit(&lv, &w);
    let lv_std: Vec<f64> = lv.iter().map(|&v| logvar_out.standardise(v)).collect();
    model.logvar_members = train_ensemble(&x, &lv_std, &w, d, cfg, cfg.members as u64, "variance")?;
    model.logvar_out = logvar_out;
    Ok(model)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NchResult {
    pub adjusted: Vec<f64>,
    /// Number of σ̂ evaluations raised to the floor.
    pub clamped: usize,
}

/// Applies the heteroscedastic adjustment for arbitrary `m̂`, `σ̂`.
pub fn nch_apply<S, M, V>(
    mean: M,
    sigma: V,
    theta: &[f64],
    stats: &[S],
    obs: &[f64],
    sigma_floor: f64,
) -> Result<NchResult>
where
    S: AsRef<[f64]>,
    M: Fn(&[f64]) -> f64,
    V: Fn(&[f64]) -> f64,
{
    if theta.len() != stats.len() {
        return Err(Error::Contract(
            "draws and summaries differ in length".into(),
        ));
    }
    let mut clamped = 0;
    let mut floor = |v: f64| {
        if v < sigma_floor || !v.is_finite() {
            clamped += 1;
            sigma_floor
        } else {
            v
        }
    };
    let m_obs = mean(obs);
    let s_obs = floor(sigma(obs));
    let mut adjusted = Vec::with_capacity(theta.len());
    for (t, s) in theta.iter().zip(stats) {
        let s = s.as_ref();
        let a = m_obs + (t - mean(s)) * s_obs / floor(sigma(s));
        if !a.is_finite() {
            return Err(Error::Regression(format!(
                "non-finite adjusted draw from {t}"
            )));
        }
        adjusted.push(a);
    }
    if clamped > 0 {
        log::warn!("{clamped} conditional spread predictions raised to the floor {sigma_floor:e}");
    }
    Ok(NchResult { adjusted, clamped })
}

pub fn nch_adjust<S: AsRef<[f64]>>(
    model: &NchModel,
    theta: &[f64],
    stats: &[S],
    obs: &[f64],
) -> Result<NchResult> {
    if obs.len() != model.inputs() {
        return Err(Error::LayoutMismatch(format!(
            "model fitted on {} summaries, observation has {}",
            model.inputs(),
            obs.len()
        )));
    }
    nch_apply(
        |s| model.mean(s),
        |s| model.sigma(s),
        theta,
        stats,
        obs,
        model.config.sigma_floor,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn hand_built_model() {
        let r = nch_apply(|s| s[0], |s| 1.0 + s[0], &[5.0], &[[1.0]], &[0.0], 1e-8).unwrap();
        assert!((r.adjusted[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_spread_is_a_location_shift() {
        let theta = [1.0, 4.0, -2.0];
        let stats = [[0.5], [1.0], [3.0]];
        let r = nch_apply(|s| s[0] * s[0], |_| 0.3, &theta, &stats, &[2.0], 1e-8).unwrap();
        for i in 0..3 {
            let expect = 4.0 + (theta[i] - stats[i][0] * stats[i][0]);
            assert!((r.adjusted[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn spread_floor_is_counted() {
        let r = nch_apply(|_| 0.0, |_| 0.0, &[1.0, 2.0], &[[0.0], [0.0]], &[0.0], 1e-8).unwrap();
        assert_eq!(r.clamped, 3);
        assert_eq!(r.adjusted, vec![1.0, 2.0]);
    }

    fn sine_data(n: usize, seed: u64, hetero: bool) -> (Vec<f64>, Vec<[f64; 1]>) {
        let mut rng = rng_from_seed(seed);
        let mut theta = Vec::new();
        let mut stats = Vec::new();
        for _ in 0..n {
            let s: f64 = rng.random_range(0.0..3.0);
            let e: f64 = StandardNormal.sample(&mut rng);
            let sd = if hetero { 0.05 + 0.1 * s } else { 0.1 };
            theta.push(s.sin() + sd * e);
            stats.push([s]);
        }
        (theta, stats)
    }

    #[test]
    fn recovers_sine_mean() {
        let (theta, stats) = sine_data(400, 11, false);
        let model = nch_fit(&theta, &stats, &vec![1.0; 400], &NchConfig::default()).unwrap();
        let grid: Vec<f64> = (0..61).map(|k| 0.05 * k as f64).collect();
        let mse = grid
            .iter()
            .map(|&s| (model.mean(&[s]) - s.sin()).powi(2))
            .sum::<f64>()
            / 61.0;
        assert!(mse.sqrt() < 0.1, "rms {}", mse.sqrt());
    }

    #[test]
    fn homoscedastic_spread_is_flat() {
        let (theta, stats) = sine_data(400, 12, false);
        let model = nch_fit(&theta, &stats, &vec![1.0; 400], &NchConfig::default()).unwrap();
        let sig: Vec<f64> = (0..31).map(|k| model.sigma(&[0.1 * k as f64])).collect();
        let ratio = sig.iter().cloned().fold(0.0, f64::max)
            / sig.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(ratio < 1.5, "ratio {ratio}");
    }

    #[test]
    fn constant_target_collapses() {
        let stats: Vec<[f64; 2]> = (0..50).map(|i| [i as f64, (i % 7) as f64]).collect();
        let theta = vec![3.25; 50];
        let w = vec![1.0; 50];
        let model = nch_fit(&theta, &stats, &w, &NchConfig::default()).unwrap();
        assert_eq!(model.mean(&[10.0, 3.0]), 3.25);
        let r = nch_adjust(&model, &theta, &stats, &[20.0, 1.0]).unwrap();
        assert!(r.adjusted.iter().all(|&a| a == 3.25));
    }

    #[test]
    fn deterministic_and_serialisable() {
        let (theta, stats) = sine_data(60, 13, true);
        let cfg = NchConfig {
            members: 2,
            mlp: MlpConfig {
                epochs: 200,
                ..MlpConfig::default()
            },
            ..NchConfig::default()
        };
        let w = vec![1.0; 60];
        let a = nch_fit(&theta, &stats, &w, &cfg).unwrap();
        let b = nch_fit(&theta, &stats, &w, &cfg).unwrap();
        assert_eq!(a, b);
        let back = NchModel::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.mean(&[1.0]).to_bits(), a.mean(&[1.0]).to_bits());
    }

    #[test]
    fn too_few_draws_rejected() {
        let r = nch_fit(
            &[1.0, 2.0],
            &[[0.0], [1.0]],
            &[1.0, 1.0],
            &NchConfig::default(),
        );
        assert!(matches!(r, Err(Error::Regression(_))));
    }
}
