//! Rejection ABC on one observed data set.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::DetectionDataset;
use super::reference::{build_reference_table, ReferenceSpec};
use super::setup::ModelSetup;
use crate::abc::{
    path_weights_from_distances, vector_weights_from_distances, PriorSpec, Tolerance,
    WeightedPosterior,
};
use crate::error::{Error, Result};
use crate::summaries::{SummaryLayout, SummaryVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryKind {
    /// The two detection counting processes, compared in L1.
    Path,
    /// Binned counts and mean sojourn, compared in scaled Euclidean norm.
    Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbcConfig {
    pub setup: ModelSetup,
    pub prior: PriorSpec,
    pub simulations: u64,
    pub summaries: SummaryKind,
    pub tolerance: Tolerance,
    pub layout: SummaryLayout,
}

impl AbcConfig {
    pub fn hash(&self, seed: u64) -> Result<String> {
        let text = serde_json::to_string(&(self, seed))?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}

/// Positive-weight draws with the summaries they were simulated with, so
/// that a regression adjustment can run later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbcFit {
    pub posterior: WeightedPosterior,
    pub stats: Vec<Vec<f64>>,
    pub layout: SummaryLayout,
    pub observed: Option<SummaryVector>,
    pub simulations: u64,
    pub failed_simulations: usize,
}

/// Fits the posterior of `data` (and, for vector summaries, of `observed`).
pub fn fit_abc(
    cfg: &AbcConfig,
    data: &DetectionDataset,
    observed: Option<&SummaryVector>,
    seed: u64,
    archive: Option<&Path>,
) -> Result<AbcFit> {
    if data.horizon < cfg.setup.horizon {
        return Err(Error::HorizonMismatch {
            left: cfg.setup.horizon,
            right: data.horizon,
        });
    }
    if cfg.summaries == SummaryKind::Vector && observed.is_none() {
        return Err(Error::InvalidParameters(
            "vector summaries need an observed summary vector".into(),
        ));
    }
    if let Some(o) = observed {
        if o.layout != cfg.layout {
            return Err(Error::LayoutMismatch(format!(
                "configured {:?}, observed {:?}",
                cfg.layout, o.layout
            )));
        }
    }
    let obs_paths = data
        .truncate(cfg.setup.horizon)
        .step_paths(cfg.setup.horizon)?;
    let spec = ReferenceSpec {
        setup: &cfg.setup,
        prior: &cfg.prior,
        layout: cfg.layout,
        root_seed: seed,
        simulations: cfg.simulations,
    };
    let hash = cfg.hash(seed)?;
    let table = build_reference_table(
        &spec,
        std::slice::from_ref(&obs_paths),
        archive.map(|p| (p, hash.as_str())),
    )?;
    let w = match cfg.summaries {
        SummaryKind::Path => {
            let (d1, d2) = table.path_distances(0)?;
            path_weights_from_distances(&d1, &d2, (cfg.tolerance, cfg.tolerance))?
        }
        SummaryKind::Vector => {
            let obs = observed.expect("checked above");
            let d = table.scaled_distances(obs, &table.scale()?)?;
            vector_weights_from_distances(&d, cfg.tolerance)?
        }
    };
    let stats: Vec<Vec<f64>> = table
        .records
        .iter()
        .zip(&w.weights)
        .filter(|(_, &wi)| wi > 0.0)
        .map(|(r, _)| r.summary.clone().unwrap_or_default())
        .collect();
    let posterior = WeightedPosterior::new(table.thetas(), w.weights, w.deltas)?.compact();
    Ok(AbcFit {
        posterior,
        stats,
        layout: cfg.layout,
        observed: observed.cloned(),
        simulations: cfg.simulations,
        failed_simulations: table.failures(),
    })
}
