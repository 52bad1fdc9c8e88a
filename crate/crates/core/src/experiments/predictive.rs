//! Posterior predictive checks, prediction-error tolerance tuning and
//! detection-coverage curves.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{DetectionDataset, DetectionMode};
use super::reference::{build_reference_table, ReferenceSpec};
use super::setup::ModelSetup;
use crate::abc::{
    path_weights_from_distances, weighted_quantile, PriorSpec, Tolerance, WeightedPosterior,
};
use crate::error::{Error, Result};
use crate::model::{Counts, EndStatus, EventSink, PopulationState, SimEvent, SimFinish, Theta};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::summaries::{SummaryAccumulator, SummaryLayout};

/// Compartment counts at the end of each whole year, plus at the horizon.
#[derive(Clone, Debug, Default)]
pub struct YearlySnapshot {
    years: usize,
    current: Counts,
    snapshots: Vec<Counts>,
}

impl YearlySnapshot {
    pub fn new(years: usize) -> Self {
        YearlySnapshot {
            years,
            ..Default::default()
        }
    }

    fn fill_until(&mut self, t: f64) {
        while self.snapshots.len() < self.years && ((self.snapshots.len() + 1) as f64) < t {
            self.snapshots.push(self.current);
        }
    }
}

impl EventSink for YearlySnapshot {
    fn on_start(&mut self, init: &PopulationState) {
        self.snapshots.clear();
        self.current = init.counts;
    }

    fn on_event(&mut self, e: &SimEvent) {
        self.fill_until(e.time);
        self.current = e.counts;
    }

    fn on_finish(&mut self, _f: &SimFinish) {
        self.fill_until(f64::INFINITY);
    }
}

/// What a forward simulation reports to the predictive checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStatistics {
    pub theta: Theta,
    /// Counts at t = 1, 2, …, ⌊horizon⌋.
    pub yearly: Vec<Counts>,
    /// Counts at the horizon.
    pub end: Counts,
    pub extinct: bool,
    /// Mean infection-to-detection time; `None` without qualifying detections.
    pub mean_sojourn: Option<f64>,
}

impl PathStatistics {
    /// `(R¹ + R²) / (I + R¹ + R²)` at each whole year; 0 when nobody has
    /// been infected.
    pub fn coverage(&self) -> Vec<f64> {
        self.yearly.iter().map(coverage_of).collect()
    }
}

pub fn coverage_of(c: &Counts) -> f64 {
    let r = (c.r1 + c.r2) as f64;
    let n = r + c.i as f64;
    if n > 0.0 {
        r / n
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    R1AtEnd,
    R2AtEnd,
    TotalDetections,
    /// Infectious count at the end of the given year.
    InfectiousAt(usize),
    MeanSojourn,
}

impl Statistic {
    pub fn extract(self, p: &PathStatistics) -> Option<f64> {
        match self {
            Statistic::R1AtEnd => Some(p.end.r1 as f64),
            Statistic::R2AtEnd => Some(p.end.r2 as f64),
            Statistic::TotalDetections => Some((p.end.r1 + p.end.r2) as f64),
            Statistic::InfectiousAt(y) => y
                .checked_sub(1)
                .and_then(|k| p.yearly.get(k))
                .map(|c| c.i as f64),
            Statistic::MeanSojourn => p.mean_sojourn,
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::R1AtEnd => write!(f, "r1"),
            Statistic::R2AtEnd => write!(f, "r2"),
            Statistic::TotalDetections => write!(f, "total"),
            Statistic::InfectiousAt(y) => write!(f, "infectious@{y}"),
            Statistic::MeanSojourn => write!(f, "sojourn"),
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    /// `r1`, `r2`, `total`, `infectious@<year>` or `sojourn`.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "r1" => Statistic::R1AtEnd,
            "r2" => Statistic::R2AtEnd,
            "total" => Statistic::TotalDetections,
            "sojourn" => Statistic::MeanSojourn,
            _ => match s.strip_prefix("infectious@").map(str::parse::<usize>) {
                Some(Ok(y)) if y > 0 => Statistic::InfectiousAt(y),
                _ => return Err(Error::InvalidParameters(format!("unknown statistic '{s}'"))),
            },
        })
    }
}

/// Simulates one forward path at `theta` and collects its statistics.
pub fn forward_statistics(setup: &ModelSetup, theta: Theta, seed: u64) -> Result<PathStatistics> {
    let years = setup.horizon.floor() as usize;
    let mut sink = (
        YearlySnapshot::new(years),
        SummaryAccumulator::new(SummaryLayout::new(years, years)),
    );
    let mut rng = rng_from_seed(seed);
    let fin = setup.run(theta, &mut rng, &mut sink)?;
    let s = sink.1.summary();
    Ok(PathStatistics {
        theta,
        yearly: sink.0.snapshots,
        end: fin.counts,
        extinct: fin.status == EndStatus::Absorbed,
        mean_sojourn: s
            .sojourn_defined
            .then(|| s.entries[s.layout.sojourn_index()]),
    })
}

/// `n` parameter values resampled from the posterior in proportion to
/// the weights.
pub fn resample(post: &WeightedPosterior, n: usize, seed: u64) -> Result<Vec<Theta>> {
    let idx = WeightedIndex::new(&post.weights).map_err(|_| Error::DegenerateWeights)?;
    let mut rng = rng_from_seed(derive_seed(seed, stream::RESAMPLE, 0));
    let draws = post.effective_draws();
    Ok((0..n).map(|_| draws[idx.sample(&mut rng)]).collect())
}

/// Forward paths over `setup.horizon` with θ resampled from the posterior.
pub fn predictive_paths(
    post: &WeightedPosterior,
    setup: &ModelSetup,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<PathStatistics>> {
    setup.validate()?;
    let thetas = resample(post, n_draws, seed)?;
    thetas
        .into_par_iter()
        .enumerate()
        .map(|(j, th)| forward_statistics(setup, th, derive_seed(seed, stream::FORWARD, j as u64)))
        .collect()
}

/// PPD sample of one statistic. Paths where it is undefined are skipped.
pub fn posterior_predictive(
    post: &WeightedPosterior,
    setup: &ModelSetup,
    statistic: Statistic,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let paths = predictive_paths(post, setup, n_draws, seed)?;
    Ok(paths.iter().filter_map(|p| statistic.extract(p)).collect())
}

/// Central interval of an unweighted sample at `level`.
pub fn central_interval(sample: &[f64], level: f64) -> Result<(f64, f64)> {
    let w = vec![1.0; sample.len()];
    let a = (1.0 - level) / 2.0;
    Ok((
        weighted_quantile(sample, &w, a)?,
        weighted_quantile(sample, &w, 1.0 - a)?,
    ))
}

/// Is `observed` inside the central `level` interval of the sample?
pub fn ppd_contains(sample: &[f64], observed: f64, level: f64) -> Result<bool> {
    let (lo, hi) = central_interval(sample, level)?;
    Ok(lo <= observed && observed <= hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub years: Vec<usize>,
    pub median: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CoverageCurve {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "year\tmedian\tq025\tq975")?;
        for k in 0..self.years.len() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                self.years[k], self.median[k], self.lo[k], self.hi[k]
            )?;
        }
        Ok(())
    }
}

/// Per-year median and central 95% band of the coverage over a sample of
/// predictive paths.
pub fn coverage_curve(paths: &[PathStatistics]) -> Result<CoverageCurve> {
    let years = paths
        .iter()
        .map(|p| p.yearly.len())
        .min()
        .ok_or(Error::Empty("paths"))?;
    let mut curve = CoverageCurve {
        years: (1..=years).collect(),
        median: Vec::with_capacity(years),
        lo: Vec::with_capacity(years),
        hi: Vec::with_capacity(years),
    };
    let w = vec![1.0; paths.len()];
    for k in 0..years {
        let v: Vec<f64> = paths.iter().map(|p| coverage_of(&p.yearly[k])).collect();
        curve.median.push(weighted_quantile(&v, &w, 0.5)?);
        curve.lo.push(weighted_quantile(&v, &w, 0.025)?);
        curve.hi.push(weighted_quantile(&v, &w, 0.975)?);
    }
    Ok(curve)
}

/// Mean of `|R¹ − R¹_obs| / R¹_obs + |R² − R²_obs| / R²_obs` over forward
/// draws `(R¹, R²)`.
pub fn relative_prediction_error(sim: &[(f64, f64)], obs: (f64, f64)) -> Result<f64> {
    if !(obs.0 > 0.0 && obs.1 > 0.0) {
        return Err(Error::InvalidParameters(
            "observed detections of both modes must be positive".into(),
        ));
    }
    if sim.is_empty() {
        return Err(Error::Empty("forward simulations"));
    }
    let s: f64 = sim
        .iter()
        .map(|&(a, b)| (a - obs.0).abs() / obs.0 + (b - obs.1).abs() / obs.1)
        .sum();
    Ok(s / sim.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionError {
    pub value: f64,
    /// Forward paths absorbed before the evaluation horizon.
    pub extinct: usize,
    pub n: usize,
}

/// Expected relative error of the detection counts at `eval_horizon`,
/// integrating over posterior draws and simulation noise. Paths run from 0
/// with θ resampled from a posterior fitted on `[0, train_horizon]`.
pub fn prediction_error(
    post: &WeightedPosterior,
    setup: &ModelSetup,
    train_horizon: f64,
    eval_horizon: f64,
    obs: &DetectionDataset,
    n_forward: usize,
    seed: u64,
) -> Result<PredictionError> {
    if !(eval_horizon > train_horizon && train_horizon > 0.0) {
        return Err(Error::InvalidParameters(
            "need 0 < train horizon < evaluation horizon".into(),
        ));
    }
    if eval_horizon > obs.horizon {
        return Err(Error::HorizonMismatch {
            left: eval_horizon,
            right: obs.horizon,
        });
    }
    let count =
        |m: DetectionMode| obs.times(m).iter().filter(|&&t| t <= eval_horizon).count() as f64;
    let observed = (
        count(DetectionMode::Screening),
        count(DetectionMode::ContactTracing),
    );
    let fwd = ModelSetup {
        horizon: eval_horizon,
        ..*setup
    };
    let paths = predictive_paths(post, &fwd, n_forward, seed)?;
    let extinct = paths.iter().filter(|p| p.extinct).count();
    if extinct == paths.len() {
        return Err(Error::ForwardExtinction);
    }
    let sim: Vec<(f64, f64)> = paths
        .iter()
        .map(|p| (p.end.r1 as f64, p.end.r2 as f64))
        .collect();
    Ok(PredictionError {
        value: relative_prediction_error(&sim, observed)?,
        extinct,
        n: paths.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub setup: ModelSetup,
    pub prior: PriorSpec,
    pub train_horizon: f64,
    pub eval_horizon: f64,
    pub simulations: u64,
    pub rates: Vec<f64>,
    pub n_forward: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub rate: f64,
    pub error: Option<f64>,
    pub extinct: usize,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub rows: Vec<TuneRow>,
    /// Rate with the smallest prediction error.
    pub best: Option<f64>,
}

impl TuneReport {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "rate\terror\textinct")?;
        for r in &self.rows {
            let e = r
                .error
                .map(|v| v.to_string())
                .unwrap_or_else(|| "NA".into());
            writeln!(w, "{}\t{}\t{}", r.rate, e, r.extinct)?;
        }
        Ok(())
    }
}

/// Fits path-valued rejection ABC on the data truncated at the training
/// horizon for each tolerance rate and scores it by the prediction error
/// at the evaluation horizon.
pub fn tune_tolerance(cfg: &TuneConfig, obs: &DetectionDataset, seed: u64) -> Result<TuneReport> {
    for &p in &cfg.rates {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameters(format!(
                "tolerance rate {p} outside (0, 1]"
            )));
        }
    }
    if !(cfg.eval_horizon > cfg.train_horizon && cfg.train_horizon > 0.0) {
        return Err(Error::InvalidParameters(
            "need 0 < train horizon < evaluation horizon".into(),
        ));
    }
    let train = obs.truncate(cfg.train_horizon);
    let observed = train.step_paths(cfg.train_horizon)?;
    let setup = ModelSetup {
        horizon: cfg.train_horizon,
        ..cfg.setup
    };
    let spec = ReferenceSpec {
        setup: &setup,
        prior: &cfg.prior,
        layout: SummaryLayout::new(0, 0),
        root_seed: seed,
        simulations: cfg.simulations,
    };
    let table = build_reference_table(&spec, std::slice::from_ref(&observed), None)?;
    let (d1, d2) = table.path_distances(0)?;
    let thetas = table.thetas();
    let mut rows = Vec::new();
    for (k, &p) in cfg.rates.iter().enumerate() {
        let fit = path_weights_from_distances(&d1, &d2, (Tolerance::Rate(p), Tolerance::Rate(p)))
            .and_then(|w| WeightedPosterior::new(thetas.clone(), w.weights, w.deltas));
        let scored = fit.and_then(|post| {
            prediction_error(
                &post,
                &cfg.setup,
                cfg.train_horizon,
                cfg.eval_horizon,
                obs,
                cfg.n_forward,
                derive_seed(seed, stream::FORWARD, k as u64),
            )
        });
        rows.push(match scored {
            Ok(e) => TuneRow {
                rate: p,
                error: Some(e.value),
                extinct: e.extinct,
                failure: None,
            },
            Err(e @ (Error::DegenerateWeights | Error::ForwardExtinction)) => TuneRow {
                rate: p,
                error: None,
                extinct: 0,
                failure: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        });
    }
    let best = rows
        .iter()
        .filter_map(|r| r.error.map(|e| (r.rate, e)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(r, _)| r);
    Ok(TuneReport { rows, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::ParamPrior;
    use crate::model::Variant;

    fn setup() -> ModelSetup {
        ModelSetup {
            s0: 500,
            i0: 10,
            horizon: 4.0,
            variant: Variant::MassAction,
            mu0: 0.0,
            max_events: 1_000_000,
        }
    }

    fn theta() -> Theta {
        Theta {
            mu1: 0.3,
            lambda1: 2e-3,
            lambda2: 0.3,
            lambda3: 0.01,
            c: 1.0,
        }
    }

    fn atom(t: Theta) -> WeightedPosterior {
        WeightedPosterior::new(vec![t], vec![1.0], vec![1.0]).unwrap()
    }

    fn counts(i: u64, r1: u64, r2: u64) -> Counts {
        Counts { s: 0, i, r1, r2 }
    }

    #[test]
    fn coverage_hand_cases() {
        assert_eq!(coverage_of(&counts(0, 3, 2)), 1.0);
        assert_eq!(coverage_of(&counts(5, 0, 0)), 0.0);
        assert_eq!(coverage_of(&counts(0, 0, 0)), 0.0);
        assert_eq!(coverage_of(&counts(2, 1, 1)), 0.5);
    }

    #[test]
    fn total_is_sum_of_modes() {
        let paths = predictive_paths(&atom(theta()), &setup(), 30, 4).unwrap();
        for p in &paths {
            let t = Statistic::TotalDetections.extract(p).unwrap();
            let a = Statistic::R1AtEnd.extract(p).unwrap() + Statistic::R2AtEnd.extract(p).unwrap();
            assert_eq!(t, a);
            assert_eq!(p.yearly.len(), 4);
            // no removal from R: detections never decrease
            let r: Vec<u64> = p.yearly.iter().map(|c| c.r1 + c.r2).collect();
            assert!(r.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn yearly_snapshot_matches_event_log() {
        let s = setup();
        let path = s.simulate_path(theta(), 11).unwrap();
        let stats = forward_statistics(&s, theta(), 11).unwrap();
        for (k, c) in stats.yearly.iter().enumerate() {
            let y = (k + 1) as f64;
            let expect = path
                .events
                .iter()
                .take_while(|e| e.time <= y)
                .fold(path.initial.counts, |c, e| c.apply(e.kind).unwrap());
            assert_eq!(*c, expect, "year {}", k + 1);
        }
    }

    #[test]
    fn statistic_names_round_trip() {
        for s in [
            Statistic::R1AtEnd,
            Statistic::R2AtEnd,
            Statistic::TotalDetections,
            Statistic::InfectiousAt(6),
            Statistic::MeanSojourn,
        ] {
            assert_eq!(s.to_string().parse::<Statistic>().unwrap(), s);
        }
        assert!("infectious@0".parse::<Statistic>().is_err());
        assert!("r3".parse::<Statistic>().is_err());
    }

    #[test]
    fn relative_error_zero_when_equal() {
        let sim = vec![(4.0, 7.0); 10];
        assert_eq!(relative_prediction_error(&sim, (4.0, 7.0)).unwrap(), 0.0);
        let v = relative_prediction_error(&[(8.0, 7.0), (4.0, 0.0)], (4.0, 7.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!(relative_prediction_error(&sim, (0.0, 7.0)).is_err());
    }

    #[test]
    fn ppd_deterministic_and_interval() {
        let a = posterior_predictive(&atom(theta()), &setup(), Statistic::R1AtEnd, 50, 9).unwrap();
        let b = posterior_predictive(&atom(theta()), &setup(), Statistic::R1AtEnd, 50, 9).unwrap();
        assert_eq!(a, b);
        let (lo, hi) = central_interval(&a, 0.95).unwrap();
        assert!(lo <= hi);
        assert!(ppd_contains(&a, lo, 0.95).unwrap());
        assert!(!ppd_contains(&a, hi + 1.0, 0.95).unwrap());
    }

    #[test]
    fn resample_follows_weights() {
        let mut t2 = theta();
        t2.lambda2 = 9.0;
        let post = WeightedPosterior::new(vec![theta(), t2], vec![1.0, 3.0], vec![1.0]).unwrap();
        let d = resample(&post, 20_000, 1).unwrap();
        let f = d.iter().filter(|t| t.lambda2 == 9.0).count() as f64 / 20_000.0;
        // binomial s.e. ≈ 0.003
        assert!((f - 0.75).abs() < 0.015, "{f}");
    }

    #[test]
    fn extinction_flagged() {
        let mut t = theta();
        t.lambda1 = 0.0;
        t.mu1 = 50.0;
        let s = setup();
        let obs = DetectionDataset::from_path(&s.simulate_path(theta(), 3).unwrap(), 4.0);
        let r = prediction_error(&atom(t), &s, 2.0, 4.0, &obs, 20, 1);
        assert!(matches!(r, Err(Error::ForwardExtinction)), "{r:?}");
    }

    #[test]
    fn concentrated_posterior_beats_prior() {
        let s = setup();
        let obs = DetectionDataset::from_path(&s.simulate_path(theta(), 21).unwrap(), 4.0);
        let prior = PriorSpec {
            mu1: ParamPrior::Log10Uniform { lo: -2.0, hi: 0.0 },
            lambda1: ParamPrior::Log10Uniform { lo: -4.0, hi: -2.0 },
            lambda2: ParamPrior::Log10Uniform { lo: -2.0, hi: 1.0 },
            lambda3: ParamPrior::Log10Uniform { lo: -4.0, hi: 0.0 },
            c: ParamPrior::Fixed { value: 1.0 },
        };
        let draws: Vec<Theta> = (0..400)
            .map(|k| prior.sample(&mut rng_from_seed(k)))
            .collect();
        let flat = WeightedPosterior::new(draws, vec![1.0; 400], vec![]).unwrap();
        let near = prediction_error(&atom(theta()), &s, 2.0, 4.0, &obs, 300, 5).unwrap();
        let far = prediction_error(&flat, &s, 2.0, 4.0, &obs, 300, 5).unwrap();
        assert!(near.value < far.value, "{near:?} vs {far:?}");
    }

    #[test]
    fn tuning_reports_every_rate() {
        let s = setup();
        let obs = DetectionDataset::from_path(&s.simulate_path(theta(), 21).unwrap(), 4.0);
        let cfg = TuneConfig {
            setup: s,
            prior: PriorSpec {
                mu1: ParamPrior::Log10Uniform { lo: -2.0, hi: 0.0 },
                lambda1: ParamPrior::Log10Uniform { lo: -4.0, hi: -2.0 },
                lambda2: ParamPrior::Log10Uniform { lo: -2.0, hi: 1.0 },
                lambda3: ParamPrior::Log10Uniform { lo: -4.0, hi: 0.0 },
                c: ParamPrior::Fixed { value: 1.0 },
            },
            train_horizon: 2.0,
            eval_horizon: 4.0,
            simulations: 300,
            rates: vec![0.1, 1.0],
            n_forward: 50,
        };
        let a = tune_tolerance(&cfg, &obs, 2).unwrap();
        assert_eq!(a.rows.len(), 2);
        assert!(a.best.is_some());
        assert_eq!(a, tune_tolerance(&cfg, &obs, 2).unwrap());
    }
}
