//! The SIR model with random-screening and contact-tracing detection.

mod ode;
mod params;
mod path;
mod rates;
mod sim;
mod state;

pub use ode::{solve_ode, solve_ode_at, DeterministicTrajectory, OdeInit, OdeOptions};
pub use params::{ParamName, Parameters, Theta, Variant, DEFAULT_MU0};
pub use path::{EpidemicPath, Event, Individual};
pub use rates::{ct_pressure, ct_rate, event_rates, EventRates};
pub use sim::{
    run, simulate, simulate_with, EndStatus, EventSink, NullSink, SimEvent, SimFinish, SimOptions,
    DEFAULT_MAX_EVENTS,
};
pub use state::{Counts, EventKind, PopulationState};
