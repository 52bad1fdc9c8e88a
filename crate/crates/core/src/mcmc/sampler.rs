use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::likelihood::{path_stats, AugmentedState, McmcData, PathStats};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    /// Total iterations, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    /// Metropolis–Hastings moves on infection times per Gibbs sweep.
    pub moves_per_iteration: usize,
    pub p_move: f64,
    pub p_insert: f64,
    pub p_delete: f64,
    pub prior_lambda1: GammaPrior,
    pub prior_lambda2: GammaPrior,
    pub seed: u64,
    /// Replace the likelihood by 1 (samples the prior).
    pub prior_only: bool,
    /// Hold the rates at these values instead of Gibbs-sampling them.
    pub fixed_rates: Option<(f64, f64)>,
    /// Iterations without any accepted move that count as a stall.
    pub stall_window: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 10_000,
            burn_in: 5_000,
            moves_per_iteration: 5,
            p_move: 0.8,
            p_insert: 0.1,
            p_delete: 0.1,
            prior_lambda1: GammaPrior {
                shape: 0.1,
                rate: 1.0,
            },
            prior_lambda2: GammaPrior {
                shape: 0.1,
                rate: 0.1,
            },
            seed: 0,
            prior_only: false,
            fixed_rates: None,
            stall_window: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Move,
    Insert,
    Delete,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub moves: MoveStats,
    pub inserts: MoveStats,
    pub deletes: MoveStats,
    /// Longest run of iterations without an accepted move.
    pub longest_stall: usize,
    /// Whether that run reached the configured stall window.
    pub stalled: bool,
}

/// Post-burn-in samples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub loglik: Vec<f64>,
    pub n_infections: Vec<usize>,
    pub burn_in: usize,
    pub diagnostics: Diagnostics,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.lambda1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda1.is_empty()
    }

    /// Tab-separated `iteration, lambda1, lambda2, loglik, n_infections`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iteration\tlambda1\tlambda2\tloglik\tn_infections")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{}\t{:e}\t{:e}\t{:e}\t{}",
                self.burn_in + k,
                self.lambda1[k],
                self.lambda2[k],
                self.loglik[k],
                self.n_infections[k]
            )?;
        }
        Ok(())
    }
}

/// A valid starting configuration: the infections needed to explain the
/// detections, evenly spaced before the first detection.
pub fn initial_infections(data: &McmcData) -> Result<Vec<f64>> {
    let needed = (data.detections.len() as u64).saturating_sub(data.i0);
    if needed > data.s0 {
        return Err(Error::InvalidParameters(format!(
            "{} detections cannot come from {} individuals",
            data.detections.len(),
            data.s0 + data.i0
        )));
    }
    if data.i0 == 0 {
        return Err(Error::InvalidParameters(
            "at least one initial infective is required".into(),
        ));
    }
    let first = data.detections.first().copied().unwrap_or(data.horizon);
    let n = needed as usize;
    Ok((1..=n).map(|k| first * k as f64 / (n + 1) as f64).collect())
}

fn validate(data: &McmcData, cfg: &McmcConfig) -> Result<()> {
    if !(data.horizon > 0.0) {
        return Err(Error::InvalidParameters("horizon must be positive".into()));
    }
    if data.detections.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameters("detections must be sorted".into()));
    }
    if data
        .detections
        .iter()
        .any(|&t| !(t > 0.0 && t <= data.horizon))
    {
        return Err(Error::InvalidParameters(
            "detections must lie in (0, horizon]".into(),
        ));
    }
    let probs = [cfg.p_move, cfg.p_insert, cfg.p_delete];
    if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameters(
            "move probabilities must sum to 1".into(),
        ));
    }
    if cfg.burn_in > cfg.iterations {
        return Err(Error::InvalidParameters(
            "burn-in exceeds the iteration count".into(),
        ));
    }
    for g in [cfg.prior_lambda1, cfg.prior_lambda2] {
        if !(g.shape > 0.0 && g.rate > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "invalid gamma prior {g:?}"
            )));
        }
    }
    Ok(())
}

struct Sampler<'a> {
    data: &'a McmcData,
    cfg: &'a McmcConfig,
    rng: SimRng,
    state: AugmentedState,
    stats: PathStats,
}

impl Sampler<'_> {
    fn target(&self, st: &PathStats) -> f64 {
        if self.cfg.prior_only {
            0.0
        } else {
            st.loglik(self.state.lambda1, self.state.lambda2)
        }
    }

    fn gibbs(&mut self) {
        if let Some((l1, l2)) = self.cfg.fixed_rates {
            self.state.lambda1 = l1;
            self.state.lambda2 = l2;
            return;
        }
        let (p1, p2) = (self.cfg.prior_lambda1, self.cfg.prior_lambda2);
        let (mut a1, mut b1, mut a2, mut b2) = (p1.shape, p1.rate, p2.shape, p2.rate);
        if !self.cfg.prior_only {
            a1 += self.stats.n_infections as f64;
            b1 += self.stats.int_si;
            a2 += self.stats.n_detections as f64;
            b2 += self.stats.int_i;
        }
        self.state.lambda1 = Gamma::new(a1, 1.0 / b1)
            .expect("positive shape")
            .sample(&mut self.rng);
        self.state.lambda2 = Gamma::new(a2, 1.0 / b2)
            .expect("positive shape")
            .sample(&mut self.rng);
    }

    /// One Metropolis–Hastings step; returns the kind and whether it was
    /// accepted. Inapplicable proposals are rejections.
    fn mh(&mut self) -> (MoveKind, bool) {
        let u: f64 = self.rng.random();
        let cfg = self.cfg;
        let kind = if u < cfg.p_move {
            MoveKind::Move
        } else if u < cfg.p_move + cfg.p_insert {
            MoveKind::Insert
        } else {
            MoveKind::Delete
        };
        let h = self.data.horizon;
        let n = self.state.infections.len();
        let mut proposal = self.state.infections.clone();
        // log of q(back)/q(forth)
        let log_q = match kind {
            MoveKind::Move => {
                if n == 0 {
                    return (kind, false);
                }
                let k = self.rng.random_range(0..n);
                proposal.remove(k);
                insert_sorted(&mut proposal, self.rng.random::<f64>() * h);
                0.0
            }
            MoveKind::Insert => {
                if n as u64 >= self.data.s0 {
                    return (kind, false);
                }
                insert_sorted(&mut proposal, self.rng.random::<f64>() * h);
                (cfg.p_delete / (n + 1) as f64).ln() - (cfg.p_insert / h).ln()
            }
            MoveKind::Delete => {
                if n == 0 {
                    return (kind, false);
                }
                let k = self.rng.random_range(0..n);
                proposal.remove(k);
                (cfg.p_insert / h).ln() - (cfg.p_delete / n as f64).ln()
            }
        };
        let Some(new_stats) = path_stats(self.data, &proposal) else {
            return (kind, false);
        };
        let log_alpha = self.target(&new_stats) - self.target(&self.stats) + log_q;
        let accept = log_alpha >= 0.0 || self.rng.random::<f64>().ln() < log_alpha;
        if accept {
            self.state.infections = proposal;
            self.stats = new_stats;
        }
        (kind, accept)
    }
}

fn insert_sorted(v: &mut Vec<f64>, t: f64) {
    let at = v.partition_point(|&x| x < t);
    v.insert(at, t);
}

/// Data-augmentation sampler started from [`initial_infections`].
pub fn run_mcmc(data: &McmcData, cfg: &McmcConfig) -> Result<Chain> {
    let start = initial_infections(data)?;
    run_mcmc_from(data, start, cfg)
}

fn sampler<'a>(
    data: &'a McmcData,
    mut infections: Vec<f64>,
    cfg: &'a McmcConfig,
) -> Result<Sampler<'a>> {
    validate(data, cfg)?;
    infections.sort_by(|a, b| a.total_cmp(b));
    let stats = path_stats(data, &infections)
        .ok_or_else(|| Error::InvalidParameters("initial infection times are impossible".into()))?;
    Ok(Sampler {
        data,
        cfg,
        rng: rng_from_seed(derive_seed(cfg.seed, stream::MCMC, 0)),
        state: AugmentedState {
            lambda1: 0.0,
            lambda2: 0.0,
            infections,
        },
        stats,
    })
}

/// Data-augmentation sampler started from the given infection times.
pub fn run_mcmc_from(data: &McmcData, infections: Vec<f64>, cfg: &McmcConfig) -> Result<Chain> {
    let mut s = sampler(data, infections, cfg)?;
    let keep = cfg.iterations - cfg.burn_in;
    let mut chain = Chain {
        burn_in: cfg.burn_in,
        lambda1: Vec::with_capacity(keep),
        lambda2: Vec::with_capacity(keep),
        loglik: Vec::with_capacity(keep),
        n_infections: Vec::with_capacity(keep),
        diagnostics: Diagnostics::default(),
    };
    let mut stall = 0usize;
    for it in 0..cfg.iterations {
        s.gibbs();
        let mut any = false;
        for _ in 0..cfg.moves_per_iteration {
            let (kind, ok) = s.mh();
            let slot = match kind {
                MoveKind::Move => &mut chain.diagnostics.moves,
                MoveKind::Insert => &mut chain.diagnostics.inserts,
                MoveKind::Delete => &mut chain.diagnostics.deletes,
            };
            slot.proposed += 1;
            slot.accepted += ok as u64;
            any |= ok;
        }
        if cfg.moves_per_iteration > 0 {
            stall = if any { 0 } else { stall + 1 };
            chain.diagnostics.longest_stall = chain.diagnostics.longest_stall.max(stall);
        }
        if it >= cfg.burn_in {
            chain.lambda1.push(s.state.lambda1);
            chain.lambda2.push(s.state.lambda2);
            chain
                .loglik
                .push(s.stats.loglik(s.state.lambda1, s.state.lambda2));
            chain.n_infections.push(s.state.infections.len());
        }
    }
    if chain.diagnostics.longest_stall >= cfg.stall_window {
        chain.diagnostics.stalled = true;
        log::warn!(
            "no infection-time move accepted for {} consecutive iterations",
            chain.diagnostics.longest_stall
        );
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (
            m,
            x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0),
        )
    }

    #[test]
    fn conjugate_update_for_lambda2() {
        let data = McmcData {
            detections: vec![0.8, 1.5, 2.5, 4.0],
            s0: 9,
            i0: 1,
            horizon: 5.0,
        };
        let infections = vec![0.3, 1.0, 2.0];
        let st = path_stats(&data, &infections).unwrap();
        let cfg = McmcConfig {
            iterations: 100_000,
            burn_in: 0,
            moves_per_iteration: 0,
            seed: 3,
            ..McmcConfig::default()
        };
        let chain = run_mcmc_from(&data, infections, &cfg).unwrap();
        let (shape, rate) = (0.1 + 4.0, 0.1 + st.int_i);
        let (m, v) = mean_var(&chain.lambda2);
        let n = chain.len() as f64;
        let (tm, tv) = (shape / rate, shape / (rate * rate));
        assert!((m - tm).abs() < 3.0 * (tv / n).sqrt(), "mean {m} vs {tm}");
        // sd of the sample variance of a gamma: sqrt((μ4 - σ⁴)/n), μ4 = σ⁴(3 + 6/shape)
        let se_v = (tv * tv * (2.0 + 6.0 / shape) / n).sqrt();
        assert!((v - tv).abs() < 3.0 * se_v, "var {v} vs {tv}");

        let (shape1, rate1) = (0.1 + 3.0, 1.0 + st.int_si);
        let (m1, _) = mean_var(&chain.lambda1);
        let tv1 = shape1 / (rate1 * rate1);
        assert!((m1 - shape1 / rate1).abs() < 3.0 * (tv1 / n).sqrt());
    }

    #[test]
    fn prior_recovery_without_data() {
        let data = McmcData {
            detections: vec![],
            s0: 5,
            i0: 1,
            horizon: 2.0,
        };
        let cfg = McmcConfig {
            iterations: 50_000,
            burn_in: 1_000,
            prior_only: true,
            seed: 4,
            ..McmcConfig::default()
        };
        let chain = run_mcmc(&data, &cfg).unwrap();
        let n = chain.len() as f64;
        for (x, g) in [
            (&chain.lambda1, cfg.prior_lambda1),
            (&chain.lambda2, cfg.prior_lambda2),
        ] {
            let (m, v) = mean_var(x);
            let (tm, tv) = (g.shape / g.rate, g.shape / (g.rate * g.rate));
            assert!((m - tm).abs() < 3.0 * (tv / n).sqrt(), "{m} vs {tm}");
            assert!((v / tv - 1.0).abs() < 0.25, "{v} vs {tv}");
        }
    }

    /// One susceptible, one index case, a single detection at `d`: the
    /// latent state is either no infection or one infection at `t < d`.
    /// With the rates fixed the posterior of that state is known in
    /// closed form up to a one-dimensional integral.
    #[test]
    fn trans_dimensional_moves_hit_the_target() {
        let (l1, l2, d, h) = (0.8, 1.3, 1.2, 2.0);
        let data = McmcData {
            detections: vec![d],
            s0: 1,
            i0: 1,
            horizon: h,
        };
        let l0 = l2 * (-(l1 + l2) * d).exp();
        let lik1 =
            |t: f64| 2.0 * l1 * l2 * (-((l1 + l2) * t + 2.0 * l2 * (d - t) + l2 * (h - d))).exp();
        let m = 100_000;
        let z1: f64 = (0..m)
            .map(|k| lik1(d * (k as f64 + 0.5) / m as f64) * d / m as f64)
            .sum();
        let p1 = z1 / (z1 + l0);
        // conditional mean of t given an infection
        let t1: f64 = (0..m)
            .map(|k| {
                let t = d * (k as f64 + 0.5) / m as f64;
                t * lik1(t) * d / m as f64
            })
            .sum::<f64>()
            / z1;

        let cfg = McmcConfig {
            fixed_rates: Some((l1, l2)),
            seed: 5,
            ..McmcConfig::default()
        };
        let mut s = sampler(&data, vec![], &cfg).unwrap();
        s.gibbs();
        let steps = 400_000;
        let (mut with, mut t_sum) = (0usize, 0.0);
        let mut accepted = [0usize; 3];
        for _ in 0..steps {
            let (kind, ok) = s.mh();
            accepted[kind as usize] += ok as usize;
            if let [t] = s.state.infections[..] {
                with += 1;
                t_sum += t;
            }
        }
        let freq = with as f64 / steps as f64;
        // generous allowance for autocorrelation
        assert!((freq - p1).abs() < 0.02, "P(infection) {freq} vs {p1}");
        assert!(
            (t_sum / with as f64 - t1).abs() < 0.02,
            "E[t] {} vs {t1}",
            t_sum / with as f64
        );
        assert!(accepted.iter().all(|&a| a > 0));
    }

    #[test]
    fn deterministic_per_seed() {
        let data = McmcData {
            detections: vec![1.0, 2.0, 2.5],
            s0: 9,
            i0: 1,
            horizon: 5.0,
        };
        let cfg = McmcConfig {
            iterations: 500,
            burn_in: 100,
            seed: 9,
            ..McmcConfig::default()
        };
        let a = run_mcmc(&data, &cfg).unwrap();
        let b = run_mcmc(&data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 400);
        assert!(a.lambda1.iter().chain(&a.lambda2).all(|&x| x > 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        let data = McmcData {
            detections: vec![2.0, 1.0],
            s0: 9,
            i0: 1,
            horizon: 5.0,
        };
        assert!(run_mcmc(&data, &McmcConfig::default()).is_err());
        let data = McmcData {
            detections: vec![1.0, 2.0, 3.0],
            s0: 1,
            i0: 1,
            horizon: 5.0,
        };
        assert!(run_mcmc(&data, &McmcConfig::default()).is_err());
    }
}
