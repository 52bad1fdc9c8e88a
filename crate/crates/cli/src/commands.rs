use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use sirabc::abc::WeightedPosterior;
use sirabc::adjust::{adjust_posterior, AdjustMethod};
use sirabc::experiments::{
    coverage_curve, fit_abc, ingest_detections, ppd_contains, predictive_paths,
    run_synthetic_study, tune_tolerance, AbcFit, DetectionDataset, DetectionMode, Statistic,
};
use sirabc::mcmc::{run_mcmc, McmcConfig, McmcData};
use sirabc::summaries::{SummaryAccumulator, SummaryVector};

use crate::config::Config;

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let p = dir.join(name);
    let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(sirabc::Error::from)?)
}

fn read_dataset(path: &Path) -> anyhow::Result<DetectionDataset> {
    Ok(ingest_detections(path)?.dataset)
}

fn output_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn simulate(cfg: &Config, seed: u64, out: &Path) -> anyhow::Result<()> {
    output_dir(out)?;
    let path = cfg.model.simulate_path(cfg.theta, seed)?;
    let mut w = create(out, "events.txt")?;
    path.write_to(&mut w)?;
    w.flush()?;
    let data = DetectionDataset::from_path(&path, cfg.model.horizon);
    let mut w = create(out, "detections.csv")?;
    data.write_to(&mut w)?;
    w.flush()?;
    let mut acc = SummaryAccumulator::new(cfg.layout);
    path.replay_into(&mut acc)?;
    write_json(out, "summary.json", &acc.summary())?;
    log::info!("{} events, {} detections", path.events.len(), data.len());
    Ok(())
}

pub fn abc(
    cfg: &Config,
    seed: u64,
    data: &Path,
    observed: Option<&Path>,
    archive: Option<&Path>,
    out: &Path,
) -> anyhow::Result<()> {
    output_dir(out)?;
    let data = read_dataset(data)?;
    let observed: Option<SummaryVector> = observed.map(read_json).transpose()?;
    let fit = fit_abc(&cfg.abc(), &data, observed.as_ref(), seed, archive)?;
    if fit.failed_simulations > 0 {
        log::warn!(
            "{} simulations exceeded the event cap",
            fit.failed_simulations
        );
    }
    write_json(out, "fit.json", &fit)?;
    write_posterior(cfg, &fit.posterior, out)
}

fn write_posterior(cfg: &Config, post: &WeightedPosterior, out: &Path) -> anyhow::Result<()> {
    let mut w = create(out, "posterior.tsv")?;
    post.write_tsv(&mut w)?;
    w.flush()?;
    write_json(out, "summary.json", &post.summary(&cfg.prior)?)
}

pub fn adjust(
    cfg: &Config,
    fit: &Path,
    method: Option<AdjustMethod>,
    out: &Path,
) -> anyhow::Result<()> {
    output_dir(out)?;
    let fit: AbcFit = read_json(fit)?;
    let obs = fit.observed.as_ref().ok_or_else(|| {
        sirabc::Error::InvalidParameters("the fit carries no observed summary vector".into())
    })?;
    let method = method.unwrap_or(cfg.adjust);
    let (post, report) = adjust_posterior(
        &fit.posterior,
        &fit.stats,
        &obs.entries,
        &cfg.prior,
        &method,
        None,
    )?;
    if !report.ridge.is_empty() {
        log::warn!("ridge-regularised coordinates: {}", report.ridge.join(", "));
    }
    write_json(out, "adjusted.json", &post)?;
    write_json(out, "report.json", &report)?;
    write_posterior(cfg, &post, out)
}

pub fn mcmc(cfg: &Config, seed: u64, data: &Path, out: &Path) -> anyhow::Result<()> {
    output_dir(out)?;
    let data = read_dataset(data)?;
    let mut detections: Vec<f64> = data
        .records
        .iter()
        .map(|r| r.time)
        .filter(|&t| t <= cfg.model.horizon)
        .collect();
    detections.sort_by(f64::total_cmp);
    let input = McmcData {
        detections,
        s0: cfg.model.s0,
        i0: cfg.model.i0,
        horizon: cfg.model.horizon,
    };
    let mc = McmcConfig { seed, ..cfg.mcmc };
    let chain = run_mcmc(&input, &mc)?;
    let mut w = create(out, "chain.tsv")?;
    chain.write_tsv(&mut w)?;
    w.flush()?;
    write_json(out, "diagnostics.json", &chain.diagnostics)
}

pub fn study(cfg: &Config, seed: u64, archive: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    output_dir(out)?;
    let report = run_synthetic_study(&cfg.study(), seed, archive)?;
    let excluded = report
        .failures
        .iter()
        .filter(|f| f.method.is_none())
        .count();
    if excluded > 0 {
        log::warn!("{excluded} replicates excluded");
    }
    write_json(out, "report.json", &report)?;
    let mut w = create(out, "tables.tsv")?;
    report.write_tables_tsv(&mut w)?;
    w.flush()?;
    let mut w = create(out, "estimates.tsv")?;
    report.write_estimates_tsv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Accepts either an ABC fit or a bare (possibly adjusted) posterior.
fn load_posterior(path: &Path) -> anyhow::Result<WeightedPosterior> {
    let value: serde_json::Value = read_json(path)?;
    let post = if value.get("posterior").is_some() {
        serde_json::from_value::<AbcFit>(value).map(|f| f.posterior)
    } else {
        serde_json::from_value::<WeightedPosterior>(value)
    };
    Ok(post.map_err(sirabc::Error::from)?)
}

#[derive(Serialize)]
struct Verdict {
    statistic: String,
    observed: f64,
    lo: f64,
    hi: f64,
    level: f64,
    inside: bool,
}

fn observed_statistic(stat: Statistic, data: &DetectionDataset, horizon: f64) -> Option<f64> {
    let count = |m| data.times(m).iter().filter(|&&t| t <= horizon).count() as f64;
    match stat {
        Statistic::R1AtEnd => Some(count(DetectionMode::Screening)),
        Statistic::R2AtEnd => Some(count(DetectionMode::ContactTracing)),
        Statistic::TotalDetections => {
            Some(count(DetectionMode::Screening) + count(DetectionMode::ContactTracing))
        }
        Statistic::InfectiousAt(_) | Statistic::MeanSojourn => None,
    }
}

pub fn ppd(
    cfg: &Config,
    seed: u64,
    posterior: &Path,
    data: Option<&Path>,
    out: &Path,
) -> anyhow::Result<()> {
    output_dir(out)?;
    let post = load_posterior(posterior)?;
    let stat = cfg.statistic()?;
    let paths = predictive_paths(&post, &cfg.model, cfg.ppd.draws, seed)?;
    let sample: Vec<f64> = paths.iter().filter_map(|p| stat.extract(p)).collect();
    let mut w = create(out, "ppd.tsv")?;
    writeln!(w, "{stat}")?;
    for v in &sample {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    let mut w = create(out, "coverage.tsv")?;
    coverage_curve(&paths)?.write_tsv(&mut w)?;
    w.flush()?;
    if let Some(d) = data {
        let data = read_dataset(d)?;
        match observed_statistic(stat, &data, cfg.model.horizon) {
            Some(obs) => {
                let (lo, hi) = sirabc::experiments::central_interval(&sample, cfg.ppd.level)?;
                let v = Verdict {
                    statistic: stat.to_string(),
                    observed: obs,
                    lo,
                    hi,
                    level: cfg.ppd.level,
                    inside: ppd_contains(&sample, obs, cfg.ppd.level)?,
                };
                write_json(out, "verdict.json", &v)?;
            }
            None => log::warn!("{stat} is not observable from detection data; no verdict"),
        }
    }
    Ok(())
}

pub fn tune(cfg: &Config, seed: u64, data: &Path, out: &Path) -> anyhow::Result<()> {
    output_dir(out)?;
    let data = read_dataset(data)?;
    let report = tune_tolerance(&cfg.tune(), &data, seed)?;
    write_json(out, "tune.json", &report)?;
    let mut w = create(out, "tune.tsv")?;
    report.write_tsv(&mut w)?;
    w.flush()?;
    Ok(())
}
