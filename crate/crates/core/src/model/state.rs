use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kinds of jumps of the epidemic process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Infect,
    DeathS,
    DeathI,
    DetectScreen,
    DetectCt,
    Immigrate,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Infect => "infect",
            EventKind::DeathS => "death_s",
            EventKind::DeathI => "death_i",
            EventKind::DetectScreen => "detect_screen",
            EventKind::DetectCt => "detect_ct",
            EventKind::Immigrate => "immigrate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "infect" => EventKind::Infect,
            "death_s" => EventKind::DeathS,
            "death_i" => EventKind::DeathI,
            "detect_screen" => EventKind::DetectScreen,
            "detect_ct" => EventKind::DetectCt,
            "immigrate" => EventKind::Immigrate,
            _ => return None,
        })
    }

    pub fn is_detection(self) -> bool {
        matches!(self, EventKind::DetectScreen | EventKind::DetectCt)
    }
}

/// Compartment sizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub s: u64,
    pub i: u64,
    pub r1: u64,
    pub r2: u64,
}

impl Counts {
    /// Applies one jump. Returns `None` if the jump would empty a class
    /// that is already empty.
    pub fn apply(self, kind: EventKind) -> Option<Counts> {
        let mut c = self;
        match kind {
            EventKind::Infect => {
                c.s = c.s.checked_sub(1)?;
                c.i += 1;
            }
            EventKind::DeathS => c.s = c.s.checked_sub(1)?,
            EventKind::DeathI => c.i = c.i.checked_sub(1)?,
            EventKind::DetectScreen => {
                c.i = c.i.checked_sub(1)?;
                c.r1 += 1;
            }
            EventKind::DetectCt => {
                c.i = c.i.checked_sub(1)?;
                c.r2 += 1;
            }
            EventKind::Immigrate => c.s += 1,
        }
        Some(c)
    }

    pub fn detected(&self) -> u64 {
        self.r1 + self.r2
    }
}

/// State of the population at time `t`, including the detection times of
/// every detected individual (needed for the contact-tracing pressure).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub t: f64,
    pub counts: Counts,
    pub detection_times: Vec<f64>,
}

impl PopulationState {
    /// A state at `t = 0` with no detected individuals.
    pub fn new(s: u64, i: u64) -> Self {
        PopulationState {
            t: 0.0,
            counts: Counts { s, i, r1: 0, r2: 0 },
            detection_times: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() {
            return Err(Error::Contract(format!(
                "state time {} is not finite",
                self.t
            )));
        }
        let n = self.counts.r1 + self.counts.r2;
        if self.detection_times.len() as u64 != n {
            return Err(Error::Contract(format!(
                "{} detection times recorded for R1 + R2 = {n}",
                self.detection_times.len()
            )));
        }
        if let Some(&bad) = self.detection_times.iter().find(|&&d| !(d <= self.t)) {
            return Err(Error::Contract(format!(
                "detection time {bad} is after the state time {}",
                self.t
            )));
        }
        Ok(())
    }
}
