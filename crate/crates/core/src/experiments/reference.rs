//! The reference table: prior draws, their simulated summaries, and the
//! L1 distances of their detection paths to every observed path.
//!
//! Distances to the observations are computed while each simulation's
//! detection times are in memory, so the table never holds simulated
//! paths. The table can be streamed to a line-delimited JSON archive and a
//! partial archive resumed.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::setup::ModelSetup;
use crate::abc::PriorSpec;
use crate::error::{Error, Result};
use crate::model::Theta;
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::summaries::{
    fit_scale_rows, l1_distance, DetectionRecorder, ScaleMatrix, StepPath, SummaryAccumulator,
    SummaryLayout, SummaryVector,
};

pub const ARCHIVE_FORMAT: &str = "sirabc-archive";
pub const ARCHIVE_VERSION: u32 = 1;
const CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    /// The event cap was hit; the draw gets weight 0 everywhere.
    BudgetExceeded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub index: u64,
    pub seed: u64,
    pub theta: Theta,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<Vec<f64>>,
    #[serde(default)]
    pub sojourn_defined: bool,
    /// `(‖R¹ - R¹_obs‖₁, ‖R² - R²_obs‖₁)` for each observation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path_distances: Vec<[f64; 2]>,
}

/// What the table is built from.
#[derive(Clone, Copy, Debug)]
pub struct ReferenceSpec<'a> {
    pub setup: &'a ModelSetup,
    pub prior: &'a PriorSpec,
    pub layout: SummaryLayout,
    pub root_seed: u64,
    pub simulations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub layout: SummaryLayout,
    pub observations: usize,
    pub simulations: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTable {
    pub layout: SummaryLayout,
    pub records: Vec<ReferenceRecord>,
}

/// Simulates draw `index` of the table.
pub fn simulate_record(
    spec: &ReferenceSpec,
    observations: &[(StepPath, StepPath)],
    index: u64,
) -> Result<ReferenceRecord> {
    let seed = derive_seed(spec.root_seed, stream::REFERENCE, index);
    let mut rng = rng_from_seed(seed);
    let theta = spec.prior.sample(&mut rng);
    let mut sink = (
        DetectionRecorder::default(),
        SummaryAccumulator::new(spec.layout),
    );
    match spec.setup.run(theta, &mut rng, &mut sink) {
        Ok(_) => {}
        Err(Error::BudgetExceeded { .. }) => {
            return Ok(ReferenceRecord {
                index,
                seed,
                theta,
                status: RecordStatus::BudgetExceeded,
                summary: None,
                sojourn_defined: false,
                path_distances: Vec::new(),
            })
        }
        Err(e) => return Err(e),
    }
    let horizon = spec.setup.horizon;
    let (r1, r2) = sink.0.step_paths(horizon)?;
    let path_distances = observations
        .iter()
        .map(|(o1, o2)| {
            Ok([
                l1_distance(&r1, o1, horizon)?,
                l1_distance(&r2, o2, horizon)?,
            ])
        })
        .collect::<Result<_>>()?;
    let sv = sink.1.summary();
    Ok(ReferenceRecord {
        index,
        seed,
        theta,
        status: RecordStatus::Ok,
        summary: Some(sv.entries),
        sojourn_defined: sv.sojourn_defined,
        path_distances,
    })
}

fn read_archive(path: &Path, header: &ArchiveHeader) -> Result<(Vec<ReferenceRecord>, u64)> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    let mut valid = reader.read_line(&mut line)? as u64;
    let found: ArchiveHeader = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::parse(1, format!("bad archive header: {e}")))?;
    if &found != header {
        return Err(Error::Contract(format!(
            "archive {} was written for a different configuration",
            path.display()
        )));
    }
    let mut records = Vec::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        if !line.ends_with('\n') {
            // interrupted write: drop the partial record
            log::warn!(
                "dropping a truncated record at the end of {}",
                path.display()
            );
            break;
        }
        let rec: ReferenceRecord = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::parse(records.len() + 2, format!("bad archive record: {e}")))?;
        if rec.index != records.len() as u64 {
            return Err(Error::parse(
                records.len() + 2,
                "archive records out of order",
            ));
        }
        records.push(rec);
        valid += n as u64;
    }
    Ok((records, valid))
}

/// Simulates the table, resuming from and appending to `archive` when
/// given. Records are produced in parallel chunks but written and returned
/// in index order, so the result does not depend on the worker count.
pub fn build_reference_table(
    spec: &ReferenceSpec,
    observations: &[(StepPath, StepPath)],
    archive: Option<(&Path, &str)>,
) -> Result<ReferenceTable> {
    spec.setup.validate()?;
    spec.prior.validate()?;
    let mut records: Vec<ReferenceRecord> = Vec::with_capacity(spec.simulations as usize);
    let mut writer = None;
    if let Some((path, hash)) = archive {
        let header = ArchiveHeader {
            format: ARCHIVE_FORMAT.into(),
            version: ARCHIVE_VERSION,
            config_hash: hash.to_string(),
            layout: spec.layout,
            observations: observations.len(),
            simulations: spec.simulations,
        };
        let exists = path.exists() && fs::metadata(path)?.len() > 0;
        let file = if exists {
            let (done, valid) = read_archive(path, &header)?;
            log::info!("resuming from {} archived simulations", done.len());
            records = done;
            let f = OpenOptions::new().write(true).open(path)?;
            f.set_len(valid)?;
            drop(f);
            OpenOptions::new().append(true).open(path)?
        } else {
            let mut f = File::create(path)?;
            writeln!(f, "{}", serde_json::to_string(&header)?)?;
            f
        };
        writer = Some(BufWriter::new(file));
    }
    let mut next = records.len() as u64;
    while next < spec.simulations {
        let end = (next + CHUNK as u64 * rayon::current_num_threads() as u64).min(spec.simulations);
        let chunk: Vec<ReferenceRecord> = (next..end)
            .into_par_iter()
            .map(|i| simulate_record(spec, observations, i))
            .collect::<Result<_>>()?;
        if let Some(w) = writer.as_mut() {
            for r in &chunk {
                writeln!(w, "{}", serde_json::to_string(r)?)?;
            }
            w.flush()?;
        }
        records.extend(chunk);
        next = end;
        log::debug!("{next}/{} reference simulations", spec.simulations);
    }
    records.truncate(spec.simulations as usize);
    Ok(ReferenceTable {
        layout: spec.layout,
        records,
    })
}

impl ReferenceTable {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn thetas(&self) -> Vec<Theta> {
        self.records.iter().map(|r| r.theta).collect()
    }

    pub fn failures(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.status != RecordStatus::Ok)
            .count()
    }

    /// L1 distances to observation `j`; infinite for failed simulations.
    pub fn path_distances(&self, j: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut d1 = Vec::with_capacity(self.len());
        let mut d2 = Vec::with_capacity(self.len());
        for r in &self.records {
            match r.status {
                RecordStatus::Ok => {
                    let d = r.path_distances.get(j).ok_or_else(|| {
                        Error::Contract(format!(
                            "record {} has no distance to observation {j}",
                            r.index
                        ))
                    })?;
                    d1.push(d[0]);
                    d2.push(d[1]);
                }
                RecordStatus::BudgetExceeded => {
                    d1.push(f64::INFINITY);
                    d2.push(f64::INFINITY);
                }
            }
        }
        Ok((d1, d2))
    }

    /// Summary rows aligned with the records; failed simulations give an
    /// empty row (they never carry weight).
    pub fn summary_rows(&self) -> Vec<&[f64]> {
        self.records
            .iter()
            .map(|r| r.summary.as_deref().unwrap_or(&[]))
            .collect()
    }

    /// Scale fitted on all successful simulations.
    pub fn scale(&self) -> Result<ScaleMatrix> {
        fit_scale_rows(self.records.iter().filter_map(|r| r.summary.as_deref()))
    }

    /// `‖H⁻¹(sᵢ - s_obs)‖₂`; infinite for failed simulations.
    pub fn scaled_distances(&self, obs: &SummaryVector, h: &ScaleMatrix) -> Result<Vec<f64>> {
        if obs.layout != self.layout || h.sd.len() != obs.entries.len() {
            return Err(Error::LayoutMismatch(format!(
                "table layout {:?}, observation layout {:?}",
                self.layout, obs.layout
            )));
        }
        Ok(self
            .records
            .iter()
            .map(|r| match &r.summary {
                Some(s) => h.scaled_distance(s, &obs.entries),
                None => f64::INFINITY,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;

    fn small() -> (ModelSetup, PriorSpec) {
        let setup = ModelSetup {
            s0: 50,
            i0: 2,
            horizon: 3.0,
            variant: Variant::MassAction,
            mu0: 0.0,
            max_events: 10_000,
        };
        (setup, PriorSpec::standard_sir((2.0, 50.0), (2.0, 2.0)))
    }

    fn obs(setup: &ModelSetup) -> Vec<(StepPath, StepPath)> {
        vec![(
            StepPath::counting(0, &[0.5, 1.0], setup.horizon).unwrap(),
            StepPath::constant(0.0, setup.horizon),
        )]
    }

    #[test]
    fn archive_resume_equals_fresh_run() {
        let (setup, prior) = small();
        let spec = ReferenceSpec {
            setup: &setup,
            prior: &prior,
            layout: SummaryLayout::new(3, 3),
            root_seed: 42,
            simulations: 300,
        };
        let o = obs(&setup);
        let fresh = build_reference_table(&spec, &o, None).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("archive.jsonl");
        let partial = ReferenceSpec {
            simulations: 300,
            ..spec
        };
        build_reference_table(&partial, &o, Some((&path, "h"))).unwrap();
        // cut the archive mid-record, as an interrupted run would
        let text = fs::read_to_string(&path).unwrap();
        let keep = text
            .lines()
            .take(101)
            .map(|l| format!("{l}\n"))
            .collect::<String>()
            + "{\"index\":100,";
        fs::write(&path, keep).unwrap();
        let resumed = build_reference_table(&spec, &o, Some((&path, "h"))).unwrap();
        assert_eq!(resumed, fresh);
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 301);
        // a different configuration hash is refused
        assert!(build_reference_table(&spec, &o, Some((&path, "other"))).is_err());
    }

    #[test]
    fn distances_and_scale() {
        let (setup, prior) = small();
        let spec = ReferenceSpec {
            setup: &setup,
            prior: &prior,
            layout: SummaryLayout::new(3, 3),
            root_seed: 1,
            simulations: 50,
        };
        let o = obs(&setup);
        let t = build_reference_table(&spec, &o, None).unwrap();
        let (d1, d2) = t.path_distances(0).unwrap();
        assert_eq!(d1.len(), 50);
        assert!(d2.iter().all(|&d| d == 0.0 || d.is_infinite()));
        let h = t.scale().unwrap();
        assert!(h.sd.iter().all(|&s| s > 0.0));
    }
}
