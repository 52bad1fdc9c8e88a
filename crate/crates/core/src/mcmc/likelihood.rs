use serde::{Deserialize, Serialize};

/// Detection times of a closed SIR epidemic (no deaths, no contact
/// tracing), observed over `[0, horizon]`. The `i0` initial infectives are
/// infected at time 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcData {
    pub detections: Vec<f64>,
    pub s0: u64,
    pub i0: u64,
    pub horizon: f64,
}

/// Latent infection times plus the rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Sorted infection times of the initially susceptible individuals.
    pub infections: Vec<f64>,
}

/// Sufficient statistics of a complete-data path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathStats {
    pub n_infections: usize,
    pub n_detections: usize,
    /// `∫ S I dt` over `[0, horizon]`.
    pub int_si: f64,
    /// `∫ I dt` over `[0, horizon]`.
    pub int_i: f64,
    /// `Σ ln(S I)` over infections plus `Σ ln I` over detections, each at
    /// the left limit.
    pub log_factors: f64,
}

impl PathStats {
    pub fn loglik(&self, lambda1: f64, lambda2: f64) -> f64 {
        let mut l = self.log_factors - lambda1 * self.int_si - lambda2 * self.int_i;
        if self.n_infections > 0 {
            l += self.n_infections as f64 * lambda1.ln();
        }
        if self.n_detections > 0 {
            l += self.n_detections as f64 * lambda2.ln();
        }
        l
    }
}

/// Integrates the counting path defined by `infections` (sorted) and the
/// observed detections. `None` when the path is impossible: an event with
/// no infective (or, for infections, no susceptible) just before it, or
/// an event outside `[0, horizon]`.
///
/// Events sharing a time all use the state before that time, so the
/// bookkeeping order of ties is irrelevant.
pub fn path_stats(data: &McmcData, infections: &[f64]) -> Option<PathStats> {
    let h = data.horizon;
    let in_range = |t: &f64| *t >= 0.0 && *t <= h;
    if !infections.iter().all(in_range) || !data.detections.iter().all(in_range) {
        return None;
    }
    if infections.len() as u64 > data.s0 {
        return None;
    }
    let (mut s, mut i) = (data.s0 as f64, data.i0 as f64);
    let (mut a, mut b) = (0usize, 0usize);
    let mut t = 0.0;
    let mut st = PathStats {
        n_infections: infections.len(),
        n_detections: data.detections.len(),
        int_si: 0.0,
        int_i: 0.0,
        log_factors: 0.0,
    };
    let inf = infections;
    let det = &data.detections;
    while a < inf.len() || b < det.len() {
        let next = match (inf.get(a), det.get(b)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        st.int_si += s * i * (next - t);
        st.int_i += i * (next - t);
        t = next;
        let (s_pre, i_pre) = (s, i);
        while a < inf.len() && inf[a] == t {
            if s_pre <= 0.0 || i_pre <= 0.0 || s <= 0.0 {
                return None;
            }
            st.log_factors += (s_pre * i_pre).ln();
            s -= 1.0;
            i += 1.0;
            a += 1;
        }
        while b < det.len() && det[b] == t {
            if i_pre <= 0.0 || i <= 0.0 {
                return None;
            }
            st.log_factors += i_pre.ln();
            i -= 1.0;
            b += 1;
        }
    }
    st.int_si += s * i * (h - t);
    st.int_i += i * (h - t);
    Some(st)
}

/// Complete-data log-likelihood; `-∞` for impossible configurations.
pub fn complete_loglik(data: &McmcData, state: &AugmentedState) -> f64 {
    match path_stats(data, &state.infections) {
        Some(st) => st.loglik(state.lambda1, state.lambda2),
        None => f64::NEG_INFINITY,
    }
}
