//! Regression adjustment of rejection samples.

pub mod locl;
pub mod mlp;
pub mod nch;
pub mod transform;

pub use locl::{locl_adjust, locl_fit, LoclFit, LoclResult};
pub use mlp::{Mlp, MlpConfig, TrainReport};
pub use nch::{nch_adjust, nch_apply, nch_fit, NchConfig, NchModel, NchResult};
pub use transform::Transform;

use serde::{Deserialize, Serialize};

use crate::abc::{PriorSpec, Provenance, WeightedPosterior};
use crate::error::{Error, Result};
use crate::model::ParamName;
use crate::rng::{derive_seed, stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdjustMethod {
    Locl,
    Nch(NchConfig),
}

/// Diagnostics of a posterior adjustment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdjustReport {
    /// Coordinates whose local-linear fit needed the ridge fallback.
    pub ridge: Vec<String>,
    /// σ̂ evaluations raised to the floor, over all coordinates.
    pub clamped: usize,
}

/// Adjusts the listed coordinates (all free ones when `coords` is `None`)
/// on their prior's transformed scale and maps the result back, so adjusted
/// draws stay in the prior support. Other coordinates keep their rejection
/// values. Zero-weight draws are dropped first.
pub fn adjust_posterior<S: AsRef<[f64]> + Sync>(
    posterior: &WeightedPosterior,
    stats: &[S],
    obs: &[f64],
    prior: &PriorSpec,
    method: &AdjustMethod,
    coords: Option<&[ParamName]>,
) -> Result<(WeightedPosterior, AdjustReport)> {
    if stats.len() != posterior.draws.len() {
        return Err(Error::Contract("one summary per draw is required".into()));
    }
    let keep: Vec<usize> = (0..posterior.weights.len())
        .filter(|&i| posterior.weights[i] > 0.0)
        .collect();
    let stats: Vec<&[f64]> = keep.iter().map(|&i| stats[i].as_ref()).collect();
    let mut out = WeightedPosterior {
        draws: keep.iter().map(|&i| posterior.draws[i]).collect(),
        weights: keep.iter().map(|&i| posterior.weights[i]).collect(),
        adjusted: None,
        provenance: match method {
            AdjustMethod::Locl => Provenance::Locl,
            AdjustMethod::Nch(_) => Provenance::Nch,
        },
        deltas: posterior.deltas.clone(),
    };
    let mut adjusted = out.draws.clone();
    let mut report = AdjustReport::default();
    let names = match coords {
        Some(c) => c.to_vec(),
        None => prior.free(),
    };
    for name in names {
        let t = prior.get(name).transform();
        let y: Vec<f64> = out
            .draws
            .iter()
            .map(|th| t.apply(th.get(name)))
            .collect::<Result<_>>()?;
        let y_adj = match method {
            AdjustMethod::Locl => {
                let r = locl_adjust(&y, &stats, obs, &out.weights)?;
                if r.fit.ridge.is_some() {
                    report.ridge.push(name.as_str().to_string());
                }
                r.adjusted
            }
            AdjustMethod::Nch(cfg) => {
                let cfg = NchConfig {
                    seed: derive_seed(cfg.seed, stream::NCH, 1_000_000 + name.index() as u64),
                    ..*cfg
                };
                let model = nch_fit(&y, &stats, &out.weights, &cfg)?;
                let r = nch_adjust(&model, &y, &stats, obs)?;
                report.clamped += r.clamped;
                r.adjusted
            }
        };
        for (th, v) in adjusted.iter_mut().zip(y_adj) {
            th.set(name, t.invert(v));
        }
    }
    out.adjusted = Some(adjusted);
    Ok((out, report))
}
