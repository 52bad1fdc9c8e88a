//! Event logs and their text serialization.
//!
//! ```text
//! # sirabc-path v1
//! # seed 42
//! # horizon 6
//! # max_events 10000000
//! # variant mass_action
//! # params lambda0=0 mu0=0 mu1=0.000002 lambda1=0.000000114 lambda2=0.375 lambda3=0.0000655 c=1
//! # init t=0 S=6000000 I=232 R1=0 R2=0
//! # init_detections
//! # end 6 horizon
//! time,kind,id
//! 0.0021877,infect,232
//! 0.0034021,death_s,-
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so parsing and
//! re-serializing a path reproduces it byte for byte.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use super::params::{Parameters, Variant};
use super::sim::{EndStatus, EventSink, SimEvent, SimFinish, SimOptions};
use super::state::{Counts, EventKind, PopulationState};
use crate::error::{Error, Result};

const MAGIC: &str = "# sirabc-path v1";
const COLUMNS: &str = "time,kind,id";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub id: Option<u64>,
}

/// What happened to one individual that was infectious at some point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Individual {
    pub id: u64,
    /// `None` for individuals already infectious in the initial state.
    pub infection_time: Option<f64>,
    pub detection_time: Option<f64>,
    pub detection_kind: Option<EventKind>,
    pub death_time: Option<f64>,
}

/// A complete simulated trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct EpidemicPath {
    pub params: Parameters,
    pub initial: PopulationState,
    pub seed: u64,
    pub options: SimOptions,
    pub events: Vec<Event>,
    pub end_time: f64,
    pub status: EndStatus,
}

/// [`EventSink`] that records an [`EpidemicPath`].
pub struct PathRecorder {
    path: EpidemicPath,
}

impl EventSink for PathRecorder {
    fn on_event(&mut self, e: &SimEvent) {
        self.path.events.push(Event {
            time: e.time,
            kind: e.kind,
            id: e.id,
        });
    }

    fn on_finish(&mut self, f: &SimFinish) {
        self.path.end_time = f.end_time;
        self.path.status = f.status;
    }
}

impl PathRecorder {
    pub fn finish(self) -> EpidemicPath {
        self.path
    }
}

impl EpidemicPath {
    pub fn recorder(
        params: Parameters,
        initial: PopulationState,
        seed: u64,
        options: SimOptions,
    ) -> PathRecorder {
        PathRecorder {
            path: EpidemicPath {
                params,
                end_time: options.horizon,
                initial,
                seed,
                options,
                events: Vec::new(),
                status: EndStatus::Horizon,
            },
        }
    }

    /// Replays the log; fails if a jump empties an empty class or time runs
    /// backwards.
    pub fn final_counts(&self) -> Result<Counts> {
        let mut c = self.initial.counts;
        let mut last = self.initial.t;
        for (k, e) in self.events.iter().enumerate() {
            if e.time < last {
                return Err(Error::Contract(format!("event {k} goes back in time")));
            }
            last = e.time;
            c = c.apply(e.kind).ok_or_else(|| {
                Error::Contract(format!(
                    "event {k} ({}) empties an empty class",
                    e.kind.as_str()
                ))
            })?;
        }
        Ok(c)
    }

    /// Final state, including detection times.
    pub fn final_state(&self) -> Result<PopulationState> {
        let counts = self.final_counts()?;
        let mut detection_times = self.initial.detection_times.clone();
        detection_times.extend(
            self.events
                .iter()
                .filter(|e| e.kind.is_detection())
                .map(|e| e.time),
        );
        Ok(PopulationState {
            t: self.end_time,
            counts,
            detection_times,
        })
    }

    /// Per-individual records, indexed by id.
    pub fn individuals(&self) -> Vec<Individual> {
        let mut out: Vec<Individual> = (0..self.initial.counts.i)
            .map(|id| Individual {
                id,
                infection_time: None,
                detection_time: None,
                detection_kind: None,
                death_time: None,
            })
            .collect();
        for e in &self.events {
            let Some(id) = e.id else { continue };
            match e.kind {
                EventKind::Infect => {
                    debug_assert_eq!(id as usize, out.len());
                    out.push(Individual {
                        id,
                        infection_time: Some(e.time),
                        detection_time: None,
                        detection_kind: None,
                        death_time: None,
                    });
                }
                EventKind::DetectScreen | EventKind::DetectCt => {
                    if let Some(ind) = out.get_mut(id as usize) {
                        ind.detection_time = Some(e.time);
                        ind.detection_kind = Some(e.kind);
                    }
                }
                EventKind::DeathI => {
                    if let Some(ind) = out.get_mut(id as usize) {
                        ind.death_time = Some(e.time);
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Replays the log into a sink, as if it were being simulated.
    pub fn replay_into<K: EventSink + ?Sized>(&self, sink: &mut K) -> Result<()> {
        let mut infection: Vec<Option<f64>> = vec![None; self.initial.counts.i as usize];
        let mut counts = self.initial.counts;
        sink.on_start(&self.initial);
        for (k, e) in self.events.iter().enumerate() {
            counts = counts.apply(e.kind).ok_or_else(|| {
                Error::Contract(format!(
                    "event {k} ({}) empties an empty class",
                    e.kind.as_str()
                ))
            })?;
            let infection_time = match (e.kind, e.id) {
                (EventKind::Infect, Some(_)) => {
                    infection.push(Some(e.time));
                    Some(e.time)
                }
                (_, Some(id)) => infection.get(id as usize).copied().flatten(),
                _ => None,
            };
            sink.on_event(&SimEvent {
                time: e.time,
                kind: e.kind,
                id: e.id,
                infection_time,
                counts,
            });
        }
        sink.on_finish(&SimFinish {
            end_time: self.end_time,
            status: self.status,
            counts,
            events: self.events.len() as u64,
            iterations: self.events.len() as u64,
        });
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let p = &self.params;
        let init = &self.initial;
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "# seed {}", self.seed)?;
        writeln!(w, "# horizon {}", self.options.horizon)?;
        writeln!(w, "# max_events {}", self.options.max_events)?;
        writeln!(w, "# variant {}", p.variant.as_str())?;
        writeln!(
            w,
            "# params lambda0={} mu0={} mu1={} lambda1={} lambda2={} lambda3={} c={}",
            p.lambda0, p.mu0, p.mu1, p.lambda1, p.lambda2, p.lambda3, p.c
        )?;
        writeln!(
            w,
            "# init t={} S={} I={} R1={} R2={}",
            init.t, init.counts.s, init.counts.i, init.counts.r1, init.counts.r2
        )?;
        let mut dets = String::new();
        for d in &init.detection_times {
            let _ = write!(dets, " {d}");
        }
        writeln!(w, "# init_detections{dets}")?;
        writeln!(w, "# end {} {}", self.end_time, self.status.as_str())?;
        writeln!(w, "{COLUMNS}")?;
        for e in &self.events {
            match e.id {
                Some(id) => writeln!(w, "{},{},{}", e.time, e.kind.as_str(), id)?,
                None => writeln!(w, "{},{},-", e.time, e.kind.as_str())?,
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 output")
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::read_from(text.as_bytes())
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));
        let mut header = |expect: &str| -> Result<(usize, String)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("missing header line `{expect}`")))?;
            let line = line?;
            let rest = line
                .strip_prefix(expect)
                .ok_or_else(|| Error::parse(no, format!("expected `{expect}`")))?;
            Ok((no, rest.trim().to_string()))
        };

        let (no, rest) = header(MAGIC)?;
        if !rest.is_empty() {
            return Err(Error::parse(no, "trailing data after magic"));
        }
        let (no, seed) = header("# seed")?;
        let seed = num::<u64>(no, &seed)?;
        let (no, horizon) = header("# horizon")?;
        let horizon = num::<f64>(no, &horizon)?;
        let (no, max_events) = header("# max_events")?;
        let max_events = num::<u64>(no, &max_events)?;
        let (no, variant) = header("# variant")?;
        let variant =
            Variant::parse(&variant).ok_or_else(|| Error::parse(no, "unknown variant"))?;
        let (no, params) = header("# params")?;
        let kv = key_values(no, &params)?;
        let get = |k: &str| -> Result<f64> {
            let v = kv
                .iter()
                .find(|(key, _)| key == k)
                .ok_or_else(|| Error::parse(no, format!("missing `{k}`")))?;
            num::<f64>(no, &v.1)
        };
        let params = Parameters {
            lambda0: get("lambda0")?,
            mu0: get("mu0")?,
            mu1: get("mu1")?,
            lambda1: get("lambda1")?,
            lambda2: get("lambda2")?,
            lambda3: get("lambda3")?,
            c: get("c")?,
            variant,
        };
        let (no, init) = header("# init")?;
        let kv = key_values(no, &init)?;
        let geti = |k: &str| -> Result<&str> {
            kv.iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::parse(no, format!("missing `{k}`")))
        };
        let t0 = num::<f64>(no, geti("t")?)?;
        let counts = Counts {
            s: num(no, geti("S")?)?,
            i: num(no, geti("I")?)?,
            r1: num(no, geti("R1")?)?,
            r2: num(no, geti("R2")?)?,
        };
        let (no, dets) = header("# init_detections")?;
        let detection_times = dets
            .split_whitespace()
            .map(|d| num::<f64>(no, d))
            .collect::<Result<Vec<_>>>()?;
        let (no, end) = header("# end")?;
        let mut it = end.split_whitespace();
        let end_time = num::<f64>(no, it.next().unwrap_or(""))?;
        let status = match it.next() {
            Some("horizon") => EndStatus::Horizon,
            Some("absorbed") => EndStatus::Absorbed,
            _ => return Err(Error::parse(no, "unknown end status")),
        };
        let (no, cols) = header(COLUMNS)?;
        if !cols.is_empty() {
            return Err(Error::parse(no, "unexpected column header"));
        }

        let mut events = Vec::new();
        for (no, line) in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut f = line.split(',');
            let (Some(t), Some(k), Some(id), None) = (f.next(), f.next(), f.next(), f.next())
            else {
                return Err(Error::parse(no, "expected `time,kind,id`"));
            };
            let time = num::<f64>(no, t)?;
            let kind = EventKind::parse(k)
                .ok_or_else(|| Error::parse(no, format!("unknown event kind `{k}`")))?;
            let id = if id == "-" {
                None
            } else {
                Some(num::<u64>(no, id)?)
            };
            events.push(Event { time, kind, id });
        }

        let initial = PopulationState {
            t: t0,
            counts,
            detection_times,
        };
        initial
            .validate()
            .map_err(|e| Error::parse(0, format!("initial state: {e}")))?;
        Ok(EpidemicPath {
            params,
            initial,
            seed,
            options: SimOptions {
                horizon,
                max_events,
            },
            events,
            end_time,
            status,
        })
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.trim()
        .parse::<T>()
        .map_err(|_| Error::parse(line, format!("invalid number `{s}`")))
}

fn key_values(line: usize, s: &str) -> Result<Vec<(String, String)>> {
    s.split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::parse(line, format!("expected key=value, got `{kv}`")))
        })
        .collect()
}
