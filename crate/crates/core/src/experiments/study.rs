//! The synthetic study: M data sets simulated at a known θ, each analysed
//! by path-valued rejection and by vector rejection with and without
//! regression adjustment, over grids of tolerance rates.
//!
//! All replicates share one reference table of prior simulations (the
//! prior and the simulator do not depend on the data), which is what makes
//! the study affordable; replicates differ only through their observed
//! paths and summaries.

use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{rmci, rmse};
use super::reference::{build_reference_table, ReferenceSpec, ReferenceTable};
use super::setup::ModelSetup;
use crate::abc::{
    path_weights_joint_rate, vector_weights_from_distances, PriorSpec, Tolerance, WeightedPosterior,
};
use crate::adjust::{adjust_posterior, AdjustMethod, NchConfig};
use crate::error::{Error, Result};
use crate::model::{ParamName, Theta};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::summaries::{
    DetectionRecorder, ScaleMatrix, StepPath, SummaryAccumulator, SummaryLayout, SummaryVector,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PathRejection,
    VectorRejection,
    VectorLocl,
    VectorNch,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::PathRejection,
        Method::VectorRejection,
        Method::VectorLocl,
        Method::VectorNch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::PathRejection => "path-rejection",
            Method::VectorRejection => "vector-rejection",
            Method::VectorLocl => "vector-locl",
            Method::VectorNch => "vector-nch",
        }
    }
}

/// Path-rejection grid: fraction of simulations with positive joint
/// weight under the product kernel.
pub const PATH_RATES: [f64; 11] = [
    0.007, 0.02, 0.06, 0.13, 0.27, 0.37, 0.45, 0.53, 0.66, 0.80, 1.0,
];
pub const VECTOR_RATES: [f64; 7] = [0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 1.0];

fn default_report_params() -> Vec<ParamName> {
    vec![ParamName::Lambda1, ParamName::Lambda2, ParamName::Lambda3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub setup: ModelSetup,
    pub truth: Theta,
    pub prior: PriorSpec,
    pub layout: SummaryLayout,
    pub replicates: usize,
    pub simulations: u64,
    pub methods: Vec<Method>,
    /// Joint acceptance fractions for path rejection; see
    /// [`path_weights_joint_rate`].
    pub path_rates: Vec<f64>,
    pub vector_rates: Vec<f64>,
    /// Rates at which the NCH adjustment runs; all vector rates if absent.
    #[serde(default)]
    pub nch_rates: Option<Vec<f64>>,
    #[serde(default)]
    pub nch: NchConfig,
    /// Coordinates estimated and reported.
    #[serde(default = "default_report_params")]
    pub report_params: Vec<ParamName>,
}

impl StudyConfig {
    /// HIV/Cuba synthetic study at desk scale (20 replicates of 5000
    /// simulations).
    pub fn hiv_study() -> Self {
        StudyConfig {
            setup: ModelSetup::hiv_study(),
            truth: Theta {
                mu1: 2e-6,
                lambda1: 1.14e-7,
                lambda2: 0.375,
                lambda3: 6.55e-5,
                c: 1.0,
            },
            prior: PriorSpec::hiv_study(),
            layout: SummaryLayout::new(6, 6),
            replicates: 20,
            simulations: 5000,
            methods: Method::ALL.to_vec(),
            path_rates: PATH_RATES.to_vec(),
            vector_rates: VECTOR_RATES.to_vec(),
            nch_rates: None,
            nch: NchConfig::default(),
            report_params: default_report_params(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.setup.validate()?;
        self.prior.validate()?;
        self.setup.parameters(self.truth).validate()?;
        if self.replicates == 0 || self.simulations < 2 {
            return Err(Error::InvalidParameters(
                "need at least one replicate and two simulations".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameters("no methods selected".into()));
        }
        let rates = self
            .path_rates
            .iter()
            .chain(&self.vector_rates)
            .chain(self.nch_rates.iter().flatten());
        for &p in rates {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParameters(format!(
                    "tolerance rate {p} outside (0, 1]"
                )));
            }
        }
        if (self.layout.years.max(self.layout.infection_window)) as f64 > self.setup.horizon {
            return Err(Error::InvalidParameters(
                "summary window exceeds the horizon".into(),
            ));
        }
        for p in &self.report_params {
            if self.prior.get(*p).is_fixed() {
                return Err(Error::InvalidParameters(format!(
                    "{} is fixed by the prior and cannot be reported",
                    p.as_str()
                )));
            }
        }
        Ok(())
    }

    fn nch_rates(&self) -> &[f64] {
        self.nch_rates.as_deref().unwrap_or(&self.vector_rates)
    }

    /// SHA-256 of the configuration and root seed.
    pub fn hash(&self, seed: u64) -> Result<String> {
        let text = serde_json::to_string(&(self, seed))?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}

/// The synthetic observation of one replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct Replicate {
    pub index: usize,
    pub seed: u64,
    pub paths: (StepPath, StepPath),
    pub summary: SummaryVector,
}

/// Simulates replicate `k` at the true θ.
pub fn simulate_replicate(cfg: &StudyConfig, root: u64, k: usize) -> Result<Replicate> {
    let seed = derive_seed(root, stream::TRUTH, k as u64);
    let mut rng = rng_from_seed(seed);
    let mut sink = (
        DetectionRecorder::default(),
        SummaryAccumulator::new(cfg.layout),
    );
    cfg.setup.run(cfg.truth, &mut rng, &mut sink)?;
    Ok(Replicate {
        index: k,
        seed,
        paths: sink.0.step_paths(cfg.setup.horizon)?,
        summary: sink.1.summary(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub method: Method,
    pub rate: f64,
    pub replicate: usize,
    pub param: ParamName,
    pub mode: f64,
    pub median: f64,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub method: Option<Method>,
    pub rate: Option<f64>,
    pub replicate: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: Method,
    pub rate: f64,
    pub param: ParamName,
    /// Replicates contributing.
    pub n: usize,
    /// Of the posterior mode.
    pub rmse_mode: Option<f64>,
    pub rmse_median: Option<f64>,
    /// Interval lengths measured in decades.
    pub rmci: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config_hash: String,
    pub seed: u64,
    pub replicates: usize,
    pub simulations: u64,
    pub failed_simulations: usize,
    pub truth: Theta,
    pub replicate_seeds: Vec<u64>,
    pub failures: Vec<Failure>,
    pub estimates: Vec<Estimate>,
    pub tables: Vec<TableRow>,
}

impl StudyReport {
    pub fn row(&self, method: Method, rate: f64, param: ParamName) -> Option<&TableRow> {
        self.tables
            .iter()
            .find(|r| r.method == method && r.rate == rate && r.param == param)
    }

    pub fn estimates_for(&self, method: Method, rate: f64, param: ParamName) -> Vec<&Estimate> {
        self.estimates
            .iter()
            .filter(|e| e.method == method && e.rate == rate && e.param == param)
            .collect()
    }

    /// Tab-separated per-replicate estimates (box-plot input).
    pub fn write_estimates_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "method\trate\treplicate\tparam\tmode\tmedian\tmean\tq025\tq975"
        )?;
        for e in &self.estimates {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}",
                e.method.as_str(),
                e.rate,
                e.replicate,
                e.param.as_str(),
                e.mode,
                e.median,
                e.mean,
                e.q025,
                e.q975
            )?;
        }
        Ok(())
    }

    /// Tab-separated RMSE/RMCI table.
    pub fn write_tables_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let f = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_else(|| "NA".into());
        writeln!(w, "method\trate\tparam\tn\trmse_mode\trmse_median\trmci")?;
        for r in &self.tables {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.method.as_str(),
                r.rate,
                r.param.as_str(),
                r.n,
                f(r.rmse_mode),
                f(r.rmse_median),
                f(r.rmci)
            )?;
        }
        Ok(())
    }
}

fn estimates(
    post: &WeightedPosterior,
    prior: &PriorSpec,
    params: &[ParamName],
    method: Method,
    rate: f64,
    replicate: usize,
) -> Result<Vec<Estimate>> {
    params
        .iter()
        .map(|&p| {
            Ok(Estimate {
                method,
                rate,
                replicate,
                param: p,
                mode: post.mode(p, &prior.get(p).transform())?,
                median: post.quantile(p, 0.5)?,
                mean: post.mean(p)?,
                q025: post.quantile(p, 0.025)?,
                q975: post.quantile(p, 0.975)?,
            })
        })
        .collect()
}

struct ReplicateOutcome {
    estimates: Vec<Estimate>,
    failures: Vec<Failure>,
}

fn analyse_replicate(
    cfg: &StudyConfig,
    root: u64,
    table: &ReferenceTable,
    thetas: &[Theta],
    h: &ScaleMatrix,
    obs_index: usize,
    rep: &Replicate,
) -> Result<ReplicateOutcome> {
    let mut out = ReplicateOutcome {
        estimates: Vec::new(),
        failures: Vec::new(),
    };
    let params = &cfg.report_params;
    let record = |out: &mut ReplicateOutcome,
                  method: Method,
                  rate: f64,
                  r: Result<Vec<Estimate>>| match r {
        Ok(e) => out.estimates.extend(e),
        Err(e @ (Error::DegenerateWeights | Error::Regression(_) | Error::NonConvergence(_))) => {
            log::warn!(
                "replicate {}: {} at rate {rate}: {e}",
                rep.index,
                method.as_str()
            );
            out.failures.push(Failure {
                method: Some(method),
                rate: Some(rate),
                replicate: rep.index,
                reason: e.to_string(),
            })
        }
        Err(e) => out.failures.push(Failure {
            method: Some(method),
            rate: Some(rate),
            replicate: rep.index,
            reason: format!("unexpected: {e}"),
        }),
    };

    if cfg.methods.contains(&Method::PathRejection) {
        let (d1, d2) = table.path_distances(obs_index)?;
        for &p in &cfg.path_rates {
            let r = path_weights_joint_rate(&d1, &d2, p)
                .and_then(|w| WeightedPosterior::new(thetas.to_vec(), w.weights, w.deltas))
                .and_then(|post| {
                    estimates(
                        &post.compact(),
                        &cfg.prior,
                        params,
                        Method::PathRejection,
                        p,
                        rep.index,
                    )
                });
            record(&mut out, Method::PathRejection, p, r);
        }
    }

    let vector_methods: Vec<Method> = cfg
        .methods
        .iter()
        .copied()
        .filter(|m| *m != Method::PathRejection)
        .collect();
    if vector_methods.is_empty() {
        return Ok(out);
    }
    let d = table.scaled_distances(&rep.summary, h)?;
    let rows = table.summary_rows();
    for (ri, &p) in cfg.vector_rates.iter().enumerate() {
        let post = match vector_weights_from_distances(&d, Tolerance::Rate(p))
            .and_then(|w| WeightedPosterior::new(thetas.to_vec(), w.weights, w.deltas))
        {
            Ok(post) => post,
            Err(e) => {
                for &m in &vector_methods {
                    record(
                        &mut out,
                        m,
                        p,
                        Err(match &e {
                            Error::DegenerateWeights => Error::DegenerateWeights,
                            other => Error::Contract(other.to_string()),
                        }),
                    );
                }
                continue;
            }
        };
        for &m in &vector_methods {
            let r = match m {
                Method::VectorRejection => {
                    estimates(&post.clone().compact(), &cfg.prior, params, m, p, rep.index)
                }
                Method::VectorLocl => adjust_posterior(
                    &post,
                    &rows,
                    &rep.summary.entries,
                    &cfg.prior,
                    &AdjustMethod::Locl,
                    Some(params),
                )
                .and_then(|(a, _)| estimates(&a, &cfg.prior, params, m, p, rep.index)),
                Method::VectorNch => {
                    if !cfg.nch_rates().contains(&p) {
                        continue;
                    }
                    let nch = NchConfig {
                        seed: derive_seed(root, stream::NCH, (rep.index as u64) << 16 | ri as u64),
                        ..cfg.nch
                    };
                    adjust_posterior(
                        &post,
                        &rows,
                        &rep.summary.entries,
                        &cfg.prior,
                        &AdjustMethod::Nch(nch),
                        Some(params),
                    )
                    .and_then(|(a, _)| estimates(&a, &cfg.prior, params, m, p, rep.index))
                }
                Method::PathRejection => unreachable!(),
            };
            record(&mut out, m, p, r);
        }
    }
    Ok(out)
}

fn aggregate(cfg: &StudyConfig, estimates: &[Estimate]) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for &m in &cfg.methods {
        let rates: Vec<f64> = match m {
            Method::PathRejection => cfg.path_rates.clone(),
            Method::VectorNch => cfg.nch_rates().to_vec(),
            _ => cfg.vector_rates.clone(),
        };
        for p in rates {
            for &param in &cfg.report_params {
                let es: Vec<&Estimate> = estimates
                    .iter()
                    .filter(|e| e.method == m && e.rate == p && e.param == param)
                    .collect();
                let prior = cfg.prior.get(param);
                let truth = cfg.truth.get(param);
                let range = prior.range_log10();
                let (mut rm, mut rmed, mut rc) = (None, None, None);
                if let (Some(range), false) = (range, es.is_empty()) {
                    if truth > 0.0 {
                        let modes: Vec<f64> = es.iter().map(|e| e.mode).collect();
                        let meds: Vec<f64> = es.iter().map(|e| e.median).collect();
                        rm = rmse(&modes, truth, range).ok();
                        rmed = rmse(&meds, truth, range).ok();
                    }
                    let lens: Vec<f64> = es
                        .iter()
                        .map(|e| (e.q975.log10() - e.q025.log10()).max(0.0))
                        .collect();
                    rc = rmci(&lens, range).ok();
                }
                rows.push(TableRow {
                    method: m,
                    rate: p,
                    param,
                    n: es.len(),
                    rmse_mode: rm,
                    rmse_median: rmed,
                    rmci: rc,
                });
            }
        }
    }
    Ok(rows)
}

/// Runs the study with root seed `seed`. With `archive`, reference
/// simulations are streamed to (and resumed from) that file.
pub fn run_synthetic_study(
    cfg: &StudyConfig,
    seed: u64,
    archive: Option<&Path>,
) -> Result<StudyReport> {
    cfg.validate()?;
    let hash = cfg.hash(seed)?;
    let reps: Vec<Result<Replicate>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|k| simulate_replicate(cfg, seed, k))
        .collect();
    let mut failures = Vec::new();
    let mut replicates = Vec::new();
    for (k, r) in reps.into_iter().enumerate() {
        match r {
            Ok(rep) => replicates.push(rep),
            Err(e @ Error::BudgetExceeded { .. }) => {
                log::warn!("replicate {k} excluded: {e}");
                failures.push(Failure {
                    method: None,
                    rate: None,
                    replicate: k,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    if replicates.is_empty() {
        return Err(Error::Contract("every synthetic replicate failed".into()));
    }
    let observations: Vec<(StepPath, StepPath)> =
        replicates.iter().map(|r| r.paths.clone()).collect();
    let spec = ReferenceSpec {
        setup: &cfg.setup,
        prior: &cfg.prior,
        layout: cfg.layout,
        root_seed: seed,
        simulations: cfg.simulations,
    };
    let table = build_reference_table(&spec, &observations, archive.map(|p| (p, hash.as_str())))?;
    let failed_simulations = table.failures();
    if failed_simulations > 0 {
        log::warn!("{failed_simulations} reference simulations exceeded the event cap");
    }
    let h = table.scale()?;
    let thetas = table.thetas();
    let outcomes: Vec<Result<ReplicateOutcome>> = replicates
        .par_iter()
        .enumerate()
        .map(|(j, rep)| analyse_replicate(cfg, seed, &table, &thetas, &h, j, rep))
        .collect();
    let mut estimates_all = Vec::new();
    for o in outcomes {
        let o = o?;
        estimates_all.extend(o.estimates);
        failures.extend(o.failures);
    }
    let tables = aggregate(cfg, &estimates_all)?;
    Ok(StudyReport {
        config_hash: hash,
        seed,
        replicates: cfg.replicates,
        simulations: cfg.simulations,
        failed_simulations,
        truth: cfg.truth,
        replicate_seeds: replicates.iter().map(|r| r.seed).collect(),
        failures,
        estimates: estimates_all,
        tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjust::MlpConfig;
    use crate::model::Variant;

    fn tiny() -> StudyConfig {
        StudyConfig {
            setup: ModelSetup {
                s0: 2000,
                i0: 20,
                horizon: 3.0,
                variant: Variant::MassAction,
                mu0: 0.0,
                max_events: 200_000,
            },
            truth: Theta {
                mu1: 2e-3,
                lambda1: 2e-4,
                lambda2: 0.4,
                lambda3: 0.01,
                c: 1.0,
            },
            prior: PriorSpec {
                mu1: crate::abc::ParamPrior::Log10Uniform { lo: -4.0, hi: -2.0 },
                lambda1: crate::abc::ParamPrior::Log10Uniform { lo: -5.0, hi: -3.0 },
                lambda2: crate::abc::ParamPrior::Log10Uniform { lo: -2.0, hi: 1.0 },
                lambda3: crate::abc::ParamPrior::Log10Uniform { lo: -4.0, hi: 0.0 },
                c: crate::abc::ParamPrior::HalfLifeUniform {
                    lo: 1.0 / 12.0,
                    hi: 5.0,
                },
            },
            layout: SummaryLayout::new(3, 3),
            replicates: 2,
            simulations: 200,
            methods: Method::ALL.to_vec(),
            path_rates: vec![0.2, 1.0],
            vector_rates: vec![0.2, 1.0],
            nch_rates: Some(vec![1.0]),
            nch: NchConfig {
                members: 2,
                mlp: MlpConfig {
                    epochs: 100,
                    ..MlpConfig::default()
                },
                ..NchConfig::default()
            },
            report_params: default_report_params(),
        }
    }

    #[test]
    fn deterministic_and_archive_equivalent() {
        let cfg = tiny();
        let a = run_synthetic_study(&cfg, 5, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let b = run_synthetic_study(&cfg, 5, Some(&path)).unwrap();
        assert_eq!(a, b);
        // second run reads everything back from the archive
        let c = run_synthetic_study(&cfg, 5, Some(&path)).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.tables.len(), (2 + 2 + 2 + 1) * 3);
        assert!(a
            .tables
            .iter()
            .all(|r| r.rmse_mode.map_or(true, |v| v >= 0.0)));
    }

    #[test]
    fn full_acceptance_targets_the_prior() {
        let mut cfg = tiny();
        cfg.replicates = 1;
        cfg.simulations = 100;
        cfg.methods = vec![Method::PathRejection];
        cfg.path_rates = vec![1.0];
        let rep = run_synthetic_study(&cfg, 9, None).unwrap();
        let e = rep.estimates_for(Method::PathRejection, 1.0, ParamName::Lambda2);
        assert_eq!(e.len(), 1);
        // log10-uniform(-2, 1): prior median 10^-0.5
        let med = e[0].median.log10();
        assert!((med + 0.5).abs() < 0.6, "median exponent {med}");
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = tiny();
        cfg.path_rates = vec![0.0];
        assert!(run_synthetic_study(&cfg, 1, None).is_err());
    }
}
