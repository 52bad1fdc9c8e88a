//! The run configuration: one TOML document whose sections feed the
//! subcommands. Every section is optional.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sirabc::abc::{PriorSpec, Tolerance};
use sirabc::adjust::AdjustMethod;
use sirabc::experiments::{
    AbcConfig, Method, ModelSetup, Statistic, StudyConfig, SummaryKind, TuneConfig, PATH_RATES,
    VECTOR_RATES,
};
use sirabc::mcmc::McmcConfig;
use sirabc::model::{ParamName, Theta};
use sirabc::summaries::SummaryLayout;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub model: ModelSetup,
    pub prior: PriorSpec,
    /// Parameters for `simulate`, and the truth of the synthetic study.
    pub theta: Theta,
    pub layout: SummaryLayout,
    pub abc: AbcSection,
    pub adjust: AdjustMethod,
    pub mcmc: McmcConfig,
    pub study: StudySection,
    pub ppd: PpdSection,
    pub tune: TuneSection,
}

impl Default for Config {
    fn default() -> Self {
        let study = StudyConfig::hiv_study();
        Config {
            seed: None,
            model: study.setup,
            prior: study.prior,
            theta: study.truth,
            layout: study.layout,
            abc: AbcSection::default(),
            adjust: AdjustMethod::Locl,
            mcmc: McmcConfig::default(),
            study: StudySection::default(),
            ppd: PpdSection::default(),
            tune: TuneSection::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbcSection {
    pub simulations: u64,
    pub summaries: SummaryKind,
    pub tolerance: Tolerance,
}

impl Default for AbcSection {
    fn default() -> Self {
        AbcSection {
            simulations: 5000,
            summaries: SummaryKind::Path,
            tolerance: Tolerance::Rate(0.01),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub replicates: usize,
    pub simulations: u64,
    pub methods: Vec<Method>,
    pub path_rates: Vec<f64>,
    pub vector_rates: Vec<f64>,
    pub nch_rates: Option<Vec<f64>>,
    pub nch: sirabc::adjust::NchConfig,
    pub report_params: Vec<ParamName>,
}

impl Default for StudySection {
    fn default() -> Self {
        let s = StudyConfig::hiv_study();
        StudySection {
            replicates: s.replicates,
            simulations: s.simulations,
            methods: s.methods,
            path_rates: PATH_RATES.to_vec(),
            vector_rates: VECTOR_RATES.to_vec(),
            nch_rates: s.nch_rates,
            nch: s.nch,
            report_params: s.report_params,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpdSection {
    /// `r1`, `r2`, `total`, `infectious@<year>` or `sojourn`.
    pub statistic: String,
    pub draws: usize,
    pub level: f64,
}

impl Default for PpdSection {
    fn default() -> Self {
        PpdSection {
            statistic: "r1".into(),
            draws: 1000,
            level: 0.95,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSection {
    pub train_horizon: f64,
    pub eval_horizon: f64,
    pub simulations: u64,
    pub rates: Vec<f64>,
    pub n_forward: usize,
}

impl Default for TuneSection {
    fn default() -> Self {
        TuneSection {
            train_horizon: 5.0,
            eval_horizon: 6.0,
            simulations: 5000,
            rates: PATH_RATES.to_vec(),
            n_forward: 200,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config = toml::from_str(&text).map_err(|e| {
            sirabc::Error::InvalidParameters(format!("config {}: {e}", path.display()))
        })?;
        Ok(cfg)
    }

    pub fn abc(&self) -> AbcConfig {
        AbcConfig {
            setup: self.model,
            prior: self.prior,
            simulations: self.abc.simulations,
            summaries: self.abc.summaries,
            tolerance: self.abc.tolerance,
            layout: self.layout,
        }
    }

    pub fn study(&self) -> StudyConfig {
        let s = self.study.clone();
        StudyConfig {
            setup: self.model,
            truth: self.theta,
            prior: self.prior,
            layout: self.layout,
            replicates: s.replicates,
            simulations: s.simulations,
            methods: s.methods,
            path_rates: s.path_rates,
            vector_rates: s.vector_rates,
            nch_rates: s.nch_rates,
            nch: s.nch,
            report_params: s.report_params,
        }
    }

    pub fn tune(&self) -> TuneConfig {
        TuneConfig {
            setup: self.model,
            prior: self.prior,
            train_horizon: self.tune.train_horizon,
            eval_horizon: self.tune.eval_horizon,
            simulations: self.tune.simulations,
            rates: self.tune.rates.clone(),
            n_forward: self.tune.n_forward,
        }
    }

    pub fn statistic(&self) -> sirabc::Result<Statistic> {
        self.ppd.statistic.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c: Config = toml::from_str("").unwrap();
        assert_eq!(c.model, ModelSetup::hiv_study());
        assert_eq!(c.layout, SummaryLayout::new(6, 6));
    }

    #[test]
    fn sections_parse() {
        let text = r#"
seed = 3
[model]
s0 = 100
i0 = 2
horizon = 2.0
variant = "frequency_dependent"
mu0 = 0.0
[abc]
summaries = "vector"
tolerance = { kind = "absolute", value = 2.5 }
[adjust]
kind = "nch"
members = 3
[ppd]
statistic = "infectious@2"
"#;
        let c: Config = toml::from_str(text).unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.model.s0, 100);
        assert_eq!(c.abc.tolerance, Tolerance::Absolute(2.5));
        assert!(matches!(c.adjust, AdjustMethod::Nch(n) if n.members == 3));
        assert_eq!(c.statistic().unwrap(), Statistic::InfectiousAt(2));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Config>("[abc]\nsimulation = 3").is_err());
    }
}
