use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    run, EpidemicPath, EventSink, Parameters, PopulationState, SimFinish, SimOptions, Theta,
    Variant, DEFAULT_MAX_EVENTS, DEFAULT_MU0,
};
use crate::rng::SimRng;

fn default_mu0() -> f64 {
    DEFAULT_MU0
}

fn default_max_events() -> u64 {
    DEFAULT_MAX_EVENTS
}

/// Everything about a simulation except θ: population, horizon, variant
/// and demography.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSetup {
    pub s0: u64,
    pub i0: u64,
    /// Observation horizon in years.
    pub horizon: f64,
    pub variant: Variant,
    /// Per-capita exit rate from S; immigration is `mu0 * s0` so that S
    /// is at equilibrium without infection. 0 gives a closed population.
    #[serde(default = "default_mu0")]
    pub mu0: f64,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
}

impl ModelSetup {
    /// Population and horizon of the HIV/Cuba synthetic study.
    pub fn hiv_study() -> Self {
        ModelSetup {
            s0: 6_000_000,
            i0: 232,
            horizon: 6.0,
            variant: Variant::MassAction,
            mu0: DEFAULT_MU0,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameters("horizon must be positive".into()));
        }
        if !(self.mu0 >= 0.0 && self.mu0.is_finite()) {
            return Err(Error::InvalidParameters("mu0 must be nonnegative".into()));
        }
        if self.max_events == 0 {
            return Err(Error::InvalidParameters(
                "max_events must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn parameters(&self, theta: Theta) -> Parameters {
        Parameters::closed(theta, self.variant)
            .with_equilibrium_demography(self.s0 as f64, self.mu0)
    }

    pub fn initial_state(&self) -> PopulationState {
        PopulationState::new(self.s0, self.i0)
    }

    pub fn options(&self) -> SimOptions {
        SimOptions {
            horizon: self.horizon,
            max_events: self.max_events,
        }
    }

    pub fn run<K: EventSink + ?Sized>(
        &self,
        theta: Theta,
        rng: &mut SimRng,
        sink: &mut K,
    ) -> Result<SimFinish> {
        run(
            &self.parameters(theta),
            &self.initial_state(),
            &self.options(),
            rng,
            sink,
        )
    }

    /// Full event log (memory grows with the number of jumps).
    pub fn simulate_path(&self, theta: Theta, seed: u64) -> Result<EpidemicPath> {
        crate::model::simulate_with(
            &self.parameters(theta),
            &self.initial_state(),
            &self.options(),
            seed,
        )
    }
}
