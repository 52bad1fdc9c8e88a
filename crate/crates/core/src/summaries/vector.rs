//! Binned summary vector.
//!
//! Layout for `years = Y` and `infection_window = W` (dimension `3 + 2Y + W`):
//!
//! | entries         | statistic                                              |
//! |-----------------|--------------------------------------------------------|
//! | 0, 1            | `R¹_Y`, `R²_Y`                                          |
//! | 2 .. 2+Y        | screening detections in `(j, j+1]`, `j = 0..Y`          |
//! | 2+Y .. 2+2Y     | contact-tracing detections in `(j, j+1]`                |
//! | 2+2Y .. 2+2Y+W  | new infections in `(j, j+1]`, `j = 0..W`                |
//! | 2+2Y+W          | mean sojourn time in I over `[0, W]`                    |
//!
//! The sojourn entry averages `detection - infection` over individuals both
//! infected and detected within `[0, W]`; initially infectious individuals
//! (unknown infection time) and individuals still undetected at `W` are
//! left out. When no such individual exists the entry is 0 and
//! `sojourn_defined` is false.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EpidemicPath, EventKind, EventSink, PopulationState, SimEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SummaryLayout {
    pub years: usize,
    pub infection_window: usize,
}

impl SummaryLayout {
    pub fn new(years: usize, infection_window: usize) -> Self {
        SummaryLayout {
            years,
            infection_window,
        }
    }

    pub fn dim(&self) -> usize {
        3 + 2 * self.years + self.infection_window
    }

    pub fn sojourn_index(&self) -> usize {
        self.dim() - 1
    }

    /// Entry names, in layout order.
    pub fn names(&self) -> Vec<String> {
        let mut names = vec!["r1_total".to_string(), "r2_total".to_string()];
        names.extend((0..self.years).map(|j| format!("r1_year{j}")));
        names.extend((0..self.years).map(|j| format!("r2_year{j}")));
        names.extend((0..self.infection_window).map(|j| format!("infections_year{j}")));
        names.push("mean_sojourn".to_string());
        names
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryVector {
    pub layout: SummaryLayout,
    pub entries: Vec<f64>,
    pub sojourn_defined: bool,
}

impl AsRef<[f64]> for SummaryVector {
    fn as_ref(&self) -> &[f64] {
        &self.entries
    }
}

impl SummaryVector {
    pub fn check_layout(&self, other: &SummaryVector) -> Result<()> {
        if self.layout != other.layout || self.entries.len() != other.entries.len() {
            return Err(Error::LayoutMismatch(format!(
                "{:?} vs {:?}",
                self.layout, other.layout
            )));
        }
        Ok(())
    }
}

/// Streaming computation of a [`SummaryVector`] during simulation.
#[derive(Clone, Debug)]
pub struct SummaryAccumulator {
    layout: SummaryLayout,
    r1_initial: u64,
    r2_initial: u64,
    r1_year: Vec<u64>,
    r2_year: Vec<u64>,
    infections_year: Vec<u64>,
    sojourn_sum: f64,
    sojourn_count: u64,
}

impl SummaryAccumulator {
    pub fn new(layout: SummaryLayout) -> Self {
        SummaryAccumulator {
            layout,
            r1_initial: 0,
            r2_initial: 0,
            r1_year: vec![0; layout.years],
            r2_year: vec![0; layout.years],
            infections_year: vec![0; layout.infection_window],
            sojourn_sum: 0.0,
            sojourn_count: 0,
        }
    }

    /// Bin `j` such that `t ∈ (j, j+1]`; `None` for `t <= 0` or past `n`.
    fn bin(t: f64, n: usize) -> Option<usize> {
        if !(t > 0.0) || t > n as f64 {
            return None;
        }
        Some((t.ceil() as usize).saturating_sub(1).min(n - 1))
    }

    pub fn summary(&self) -> SummaryVector {
        let l = self.layout;
        let mut e = Vec::with_capacity(l.dim());
        let r1: u64 = self.r1_initial + self.r1_year.iter().sum::<u64>();
        let r2: u64 = self.r2_initial + self.r2_year.iter().sum::<u64>();
        e.push(r1 as f64);
        e.push(r2 as f64);
        e.extend(self.r1_year.iter().map(|&x| x as f64));
        e.extend(self.r2_year.iter().map(|&x| x as f64));
        e.extend(self.infections_year.iter().map(|&x| x as f64));
        let defined = self.sojourn_count > 0;
        e.push(if defined {
            self.sojourn_sum / self.sojourn_count as f64
        } else {
            0.0
        });
        SummaryVector {
            layout: l,
            entries: e,
            sojourn_defined: defined,
        }
    }
}

impl EventSink for SummaryAccumulator {
    fn on_start(&mut self, init: &PopulationState) {
        *self = SummaryAccumulator::new(self.layout);
        self.r1_initial = init.counts.r1;
        self.r2_initial = init.counts.r2;
    }

    fn on_event(&mut self, e: &SimEvent) {
        let l = self.layout;
        match e.kind {
            EventKind::DetectScreen | EventKind::DetectCt => {
                if let Some(j) = Self::bin(e.time, l.years) {
                    if e.kind == EventKind::DetectScreen {
                        self.r1_year[j] += 1;
                    } else {
                        self.r2_year[j] += 1;
                    }
                }
                let w = l.infection_window as f64;
                if let Some(inf) = e.infection_time {
                    if inf >= 0.0 && e.time <= w {
                        self.sojourn_sum += e.time - inf;
                        self.sojourn_count += 1;
                    }
                }
            }
            EventKind::Infect => {
                if let Some(j) = Self::bin(e.time, l.infection_window) {
                    self.infections_year[j] += 1;
                }
            }
            _ => {}
        }
    }
}

/// Summary vector of a recorded trajectory.
pub fn vector_summaries(
    path: &EpidemicPath,
    years: usize,
    infection_window: usize,
) -> Result<SummaryVector> {
    let horizon = path.options.horizon;
    if years as f64 > horizon {
        return Err(Error::Contract(format!(
            "{years} years of summaries exceed the path horizon {horizon}"
        )));
    }
    if infection_window as f64 > horizon {
        return Err(Error::Contract(format!(
            "infection window {infection_window} exceeds the path horizon {horizon}"
        )));
    }
    if path.initial.t != 0.0 {
        return Err(Error::Contract(
            "summaries assume paths starting at t = 0".into(),
        ));
    }
    let mut acc = SummaryAccumulator::new(SummaryLayout::new(years, infection_window));
    path.replay_into(&mut acc)?;
    Ok(acc.summary())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EndStatus, Event, Parameters, SimOptions, Theta, Variant};

    fn path_with(events: Vec<Event>, s0: u64, i0: u64, horizon: f64) -> EpidemicPath {
        EpidemicPath {
            params: Parameters::closed(
                Theta {
                    mu1: 0.0,
                    lambda1: 0.1,
                    lambda2: 1.0,
                    lambda3: 0.0,
                    c: 1.0,
                },
                Variant::MassAction,
            ),
            initial: PopulationState::new(s0, i0),
            seed: 0,
            options: SimOptions::new(horizon),
            events,
            end_time: horizon,
            status: EndStatus::Horizon,
        }
    }

    #[test]
    fn dimensions() {
        assert_eq!(SummaryLayout::new(6, 6).dim(), 21);
        assert_eq!(SummaryLayout::new(21, 6).dim(), 51);
        assert_eq!(SummaryLayout::new(6, 6).names().len(), 21);
    }

    #[test]
    fn empty_path_gives_zeros() {
        let p = path_with(vec![], 10, 0, 6.0);
        let s = vector_summaries(&p, 6, 6).unwrap();
        assert!(s.entries.iter().all(|&x| x == 0.0));
        assert!(!s.sojourn_defined);
    }

    #[test]
    fn hand_replay_single_infection() {
        // index case (id 0) stays infectious; id 1 infected at 0.5, detected at 2.5
        let events = vec![
            Event {
                time: 0.5,
                kind: EventKind::Infect,
                id: Some(1),
            },
            Event {
                time: 2.5,
                kind: EventKind::DetectScreen,
                id: Some(1),
            },
        ];
        let p = path_with(events, 10, 1, 6.0);
        let s = vector_summaries(&p, 6, 6).unwrap();
        let l = s.layout;
        assert_eq!(s.entries[l.sojourn_index()], 2.0);
        assert!(s.sojourn_defined);
        // third year is (2, 3]
        assert_eq!(s.entries[2 + 2], 1.0);
        assert_eq!(s.entries[0], 1.0);
        assert_eq!(s.entries[2 + 2 * 6], 1.0, "one infection in (0, 1]");
    }

    #[test]
    fn initial_infectives_do_not_enter_sojourn() {
        let events = vec![Event {
            time: 1.5,
            kind: EventKind::DetectCt,
            id: Some(0),
        }];
        let p = path_with(events, 10, 1, 6.0);
        let s = vector_summaries(&p, 6, 6).unwrap();
        assert!(!s.sojourn_defined);
        assert_eq!(s.entries[1], 1.0);
        assert_eq!(s.entries[2 + 6 + 1], 1.0);
    }

    #[test]
    fn window_beyond_horizon_rejected() {
        let p = path_with(vec![], 10, 1, 5.0);
        assert!(vector_summaries(&p, 6, 5).is_err());
        assert!(vector_summaries(&p, 5, 6).is_err());
    }
}
