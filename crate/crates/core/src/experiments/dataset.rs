use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EpidemicPath, EventKind};
use crate::summaries::StepPath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    Screening,
    ContactTracing,
}

impl DetectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionMode::Screening => "screening",
            DetectionMode::ContactTracing => "contact_tracing",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "screening" => Some(DetectionMode::Screening),
            "contact_tracing" => Some(DetectionMode::ContactTracing),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Years since the epidemic origin.
    pub time: f64,
    pub mode: DetectionMode,
}

/// Observed detection times with their modes, sorted by time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionDataset {
    pub records: Vec<Detection>,
    /// Free-form calendar date of time 0, if known.
    pub origin: Option<String>,
    pub horizon: f64,
}

/// Outcome of parsing a detections file.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub dataset: DetectionDataset,
    /// The rows were not in time order and have been sorted.
    pub sorted: bool,
}

impl DetectionDataset {
    /// Detections of a simulated path up to `horizon`.
    pub fn from_path(path: &EpidemicPath, horizon: f64) -> Self {
        let records = path
            .events
            .iter()
            .filter(|e| e.time <= horizon)
            .filter_map(|e| {
                match e.kind {
                    EventKind::DetectScreen => Some(DetectionMode::Screening),
                    EventKind::DetectCt => Some(DetectionMode::ContactTracing),
                    _ => None,
                }
                .map(|mode| Detection { time: e.time, mode })
            })
            .collect();
        DetectionDataset {
            records,
            origin: None,
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self, mode: DetectionMode) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.mode == mode)
            .map(|r| r.time)
            .collect()
    }

    /// Observed `(R¹, R²)` counting paths on `[0, horizon]`.
    pub fn step_paths(&self, horizon: f64) -> Result<(StepPath, StepPath)> {
        let cut = |v: Vec<f64>| v.into_iter().filter(|&t| t <= horizon).collect::<Vec<_>>();
        Ok((
            StepPath::counting(0, &cut(self.times(DetectionMode::Screening)), horizon)?,
            StepPath::counting(0, &cut(self.times(DetectionMode::ContactTracing)), horizon)?,
        ))
    }

    /// Restriction to `[0, horizon]`.
    pub fn truncate(&self, horizon: f64) -> Self {
        DetectionDataset {
            records: self
                .records
                .iter()
                .copied()
                .filter(|r| r.time <= horizon)
                .collect(),
            origin: self.origin.clone(),
            horizon,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("ascii output")
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# horizon={}", self.horizon)?;
        if let Some(o) = &self.origin {
            writeln!(w, "# origin={o}")?;
        }
        writeln!(w, "time,mode")?;
        for r in &self.records {
            writeln!(w, "{},{}", r.time, r.mode.as_str())?;
        }
        Ok(())
    }
}

/// Parses `time,mode` rows. Lines starting with `#` carry `key=value`
/// metadata (`horizon`, `origin`); without a horizon the latest detection
/// time is used.
pub fn parse_detections(text: &str) -> Result<Ingested> {
    let mut horizon: Option<f64> = None;
    let mut origin = None;
    let mut header_seen = false;
    let mut records = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((key, value)) = meta.trim().split_once('=') {
                match key.trim() {
                    "horizon" => {
                        let h: f64 = value
                            .trim()
                            .parse()
                            .map_err(|_| Error::parse(line_no, "bad horizon"))?;
                        if !(h >= 0.0 && h.is_finite()) {
                            return Err(Error::parse(
                                line_no,
                                "horizon must be a nonnegative number",
                            ));
                        }
                        horizon = Some(h);
                    }
                    "origin" => origin = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["time", "mode"] {
                return Err(Error::parse(line_no, "expected header `time,mode`"));
            }
            header_seen = true;
            continue;
        }
        let (t, m) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(line_no, "expected two comma-separated fields"))?;
        let time: f64 = t
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad time `{}`", t.trim())))?;
        if !(time >= 0.0 && time.is_finite()) {
            return Err(Error::parse(
                line_no,
                format!("time {time} must be a nonnegative number"),
            ));
        }
        let mode = DetectionMode::parse(m.trim())
            .ok_or_else(|| Error::parse(line_no, format!("unknown mode `{}`", m.trim())))?;
        records.push((line_no, Detection { time, mode }));
    }
    if !header_seen {
        return Err(Error::parse(
            text.lines().count().max(1),
            "missing header `time,mode`",
        ));
    }
    let sorted = records.windows(2).any(|w| w[0].1.time > w[1].1.time);
    if sorted {
        log::info!("detections were not in time order; sorted");
        records.sort_by(|a, b| a.1.time.total_cmp(&b.1.time));
    }
    let max_time = records.last().map(|r| r.1.time).unwrap_or(0.0);
    let horizon = match horizon {
        Some(h) => {
            if let Some((line, _)) = records.iter().find(|r| r.1.time > h) {
                return Err(Error::parse(
                    *line,
                    format!("time beyond the declared horizon {h}"),
                ));
            }
            h
        }
        None => max_time,
    };
    Ok(Ingested {
        dataset: DetectionDataset {
            records: records.into_iter().map(|r| r.1).collect(),
            origin,
            horizon,
        },
        sorted,
    })
}

pub fn ingest_detections(path: &Path) -> Result<Ingested> {
    let text = fs::read_to_string(path).map_err(Error::Io)?;
    parse_detections(&text)
}
