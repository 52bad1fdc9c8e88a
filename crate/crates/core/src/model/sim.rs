//! Exact simulation of the epidemic jump process.
//!
//! All rates except contact tracing are constant between jumps. The
//! contact-tracing rate decays with `r(t)`, so it is bounded by its value
//! at the last jump and sampled by thinning: candidate times are drawn from
//! the bounded total rate and a contact-tracing candidate is kept with
//! probability `rate(t) / bound`. A rejected candidate advances time without
//! changing the state; the bound is then recomputed, which tightens it.
//!
//! `r(t)` is maintained incrementally (decay between jumps, `+1` per
//! detection) and resummed exactly from all detection times every
//! `max(10_000, #detections)` loop iterations, which keeps the amortised cost
//! per jump constant.
//!
//! Once `I = 0` no infection, detection or death in `I` can ever happen
//! again, so the path is closed there with [`EndStatus::Absorbed`]; only
//! demographic turnover of `S` would remain.
//!
//! Events are emitted in generation order; if two jumps land on the same
//! floating-point time they keep that order.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::params::Parameters;
use super::path::EpidemicPath;
use super::rates::{ct_pressure, ct_rate};
use super::state::{Counts, EventKind, PopulationState};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Default cap on loop iterations (jumps plus rejected candidates).
pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000;
const RESUM_INTERVAL: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub horizon: f64,
    pub max_events: u64,
}

impl SimOptions {
    pub fn new(horizon: f64) -> Self {
        SimOptions {
            horizon,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }
}

/// One jump, as seen by an [`EventSink`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    /// Individual involved; `None` for events of the susceptible class.
    pub id: Option<u64>,
    /// Infection time of that individual (`None` for the initially
    /// infectious and for susceptible events).
    pub infection_time: Option<f64>,
    /// Counts right after the jump.
    pub counts: Counts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndStatus {
    /// Reached the horizon.
    Horizon,
    /// No infectious individual (or no possible event) remains.
    Absorbed,
}

impl EndStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EndStatus::Horizon => "horizon",
            EndStatus::Absorbed => "absorbed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimFinish {
    pub end_time: f64,
    pub status: EndStatus,
    pub counts: Counts,
    /// Accepted jumps.
    pub events: u64,
    /// Loop iterations, including rejected contact-tracing candidates.
    pub iterations: u64,
}

/// Observer of a simulation run.
pub trait EventSink {
    fn on_start(&mut self, _init: &PopulationState) {}
    fn on_event(&mut self, event: &SimEvent);
    fn on_finish(&mut self, _finish: &SimFinish) {}
}

/// Discards everything.
pub struct NullSink;

impl EventSink for NullSink {
    fn on_event(&mut self, _event: &SimEvent) {}
}

impl<A: EventSink, B: EventSink> EventSink for (A, B) {
    fn on_start(&mut self, init: &PopulationState) {
        self.0.on_start(init);
        self.1.on_start(init);
    }
    fn on_event(&mut self, event: &SimEvent) {
        self.0.on_event(event);
        self.1.on_event(event);
    }
    fn on_finish(&mut self, finish: &SimFinish) {
        self.0.on_finish(finish);
        self.1.on_finish(finish);
    }
}

impl<K: EventSink + ?Sized> EventSink for &mut K {
    fn on_start(&mut self, init: &PopulationState) {
        (**self).on_start(init);
    }
    fn on_event(&mut self, event: &SimEvent) {
        (**self).on_event(event);
    }
    fn on_finish(&mut self, finish: &SimFinish) {
        (**self).on_finish(finish);
    }
}

/// Runs one trajectory from `init` up to `opts.horizon`, streaming jumps
/// into `sink`.
pub fn run<R, K>(
    params: &Parameters,
    init: &PopulationState,
    opts: &SimOptions,
    rng: &mut R,
    sink: &mut K,
) -> Result<SimFinish>
where
    R: Rng + ?Sized,
    K: EventSink + ?Sized,
{
    params.validate()?;
    init.validate()?;
    if !(opts.horizon > init.t) {
        return Err(Error::Contract(format!(
            "horizon {} must exceed the initial time {}",
            opts.horizon, init.t
        )));
    }

    let p = *params;
    let mut t = init.t;
    let mut counts = init.counts;
    let mut detections = init.detection_times.clone();
    let mut r = ct_pressure(&detections, p.c, t)?;
    let mut infected: Vec<(u64, Option<f64>)> = (0..counts.i).map(|id| (id, None)).collect();
    let mut next_id = counts.i;
    let mut events = 0u64;
    let mut iterations = 0u64;
    let mut since_resum = 0u64;

    sink.on_start(init);

    let status = loop {
        if counts.i == 0 {
            break EndStatus::Absorbed;
        }
        let s = counts.s as f64;
        let i = counts.i as f64;
        let infect = p.lambda1 * s * i;
        let death_s = p.mu0 * s;
        let death_i = p.mu1 * i;
        let screen = p.lambda2 * i;
        let immigrate = p.lambda0;
        let ct_bound = ct_rate(p.variant, p.lambda3, i, r);
        let total = infect + death_s + death_i + screen + immigrate + ct_bound;
        if !(total > 0.0) {
            break EndStatus::Absorbed;
        }
        if iterations >= opts.max_events {
            return Err(Error::BudgetExceeded {
                limit: opts.max_events,
                time: t,
            });
        }
        iterations += 1;

        let tau: f64 = rng.sample::<f64, _>(Exp1) / total;
        let t_next = t + tau;
        if t_next > opts.horizon {
            break EndStatus::Horizon;
        }
        if r > 0.0 {
            r *= (-p.c * (t_next - t)).exp();
        }
        t = t_next;

        since_resum += 1;
        if since_resum >= RESUM_INTERVAL.max(detections.len() as u64) {
            r = ct_pressure(&detections, p.c, t)?;
            since_resum = 0;
        }

        let mut u = rng.random::<f64>() * total;
        let kind = if u < infect {
            EventKind::Infect
        } else if {
            u -= infect;
            u < screen
        } {
            EventKind::DetectScreen
        } else if {
            u -= screen;
            u < death_i
        } {
            EventKind::DeathI
        } else if {
            u -= death_i;
            u < death_s
        } {
            EventKind::DeathS
        } else if {
            u -= death_s;
            u < immigrate
        } {
            EventKind::Immigrate
        } else {
            // u is uniform on [0, ct_bound) here; keep with prob rate/bound.
            u -= immigrate;
            let actual = ct_rate(p.variant, p.lambda3, i, r);
            if u < actual {
                EventKind::DetectCt
            } else {
                continue;
            }
        };

        let (id, infection_time) = match kind {
            EventKind::Infect => {
                let id = next_id;
                next_id += 1;
                infected.push((id, Some(t)));
                (Some(id), Some(t))
            }
            EventKind::DeathI | EventKind::DetectScreen | EventKind::DetectCt => {
                let k = rng.random_range(0..infected.len());
                let (id, inf) = infected.swap_remove(k);
                (Some(id), inf)
            }
            EventKind::DeathS | EventKind::Immigrate => (None, None),
        };
        if kind.is_detection() {
            detections.push(t);
            r += 1.0;
        }
        counts = match counts.apply(kind) {
            Some(c) => c,
            None => unreachable!("event {kind:?} fired with an empty source class"),
        };
        events += 1;
        sink.on_event(&SimEvent {
            time: t,
            kind,
            id,
            infection_time,
            counts,
        });
    };

    let end_time = match status {
        EndStatus::Horizon => opts.horizon,
        EndStatus::Absorbed => t,
    };
    let finish = SimFinish {
        end_time,
        status,
        counts,
        events,
        iterations,
    };
    sink.on_finish(&finish);
    Ok(finish)
}

/// Simulates a full event log with the default event cap.
pub fn simulate(
    params: &Parameters,
    init: &PopulationState,
    horizon: f64,
    seed: u64,
) -> Result<EpidemicPath> {
    simulate_with(params, init, &SimOptions::new(horizon), seed)
}

pub fn simulate_with(
    params: &Parameters,
    init: &PopulationState,
    opts: &SimOptions,
    seed: u64,
) -> Result<EpidemicPath> {
    let mut rng = rng_from_seed(seed);
    let mut rec = EpidemicPath::recorder(*params, init.clone(), seed, *opts);
    run(params, init, opts, &mut rng, &mut rec)?;
    Ok(rec.finish())
}
