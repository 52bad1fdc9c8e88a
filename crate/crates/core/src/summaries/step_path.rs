use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EpidemicPath, EventKind, EventSink, PopulationState, SimEvent};

/// Right-continuous, nondecreasing step function on `[0, t_end]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPath {
    initial: f64,
    jump_times: Vec<f64>,
    values: Vec<f64>,
    t_end: f64,
}

impl StepPath {
    /// `values[k]` is the value from `jump_times[k]` on.
    pub fn new(initial: f64, jump_times: Vec<f64>, values: Vec<f64>, t_end: f64) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(Error::Contract(
                "one value per jump time is required".into(),
            ));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::Contract(format!("invalid end time {t_end}")));
        }
        let mut prev_t = 0.0;
        let mut prev_v = initial;
        for (&t, &v) in jump_times.iter().zip(&values) {
            if !(t >= prev_t && t <= t_end) {
                return Err(Error::Contract(format!(
                    "jump times must be nondecreasing within [0, {t_end}], got {t}"
                )));
            }
            if !(v >= prev_v) {
                return Err(Error::Contract("step values must be nondecreasing".into()));
            }
            prev_t = t;
            prev_v = v;
        }
        Ok(StepPath {
            initial,
            jump_times,
            values,
            t_end,
        })
    }

    /// Counting path starting at `initial` with a unit jump at each of the
    /// (sorted) `times` that falls in `[0, t_end]`.
    pub fn counting(initial: u64, times: &[f64], t_end: f64) -> Result<Self> {
        let kept: Vec<f64> = times.iter().copied().filter(|&t| t <= t_end).collect();
        let values = (1..=kept.len())
            .map(|k| (initial + k as u64) as f64)
            .collect();
        StepPath::new(initial as f64, kept, values, t_end)
    }

    pub fn constant(value: f64, t_end: f64) -> Self {
        StepPath {
            initial: value,
            jump_times: Vec::new(),
            values: Vec::new(),
            t_end,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&x| x <= t);
        if k == 0 {
            self.initial
        } else {
            self.values[k - 1]
        }
    }

    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.initial)
    }

    /// Restriction to `[0, t_end]` for `t_end` no larger than the current end.
    pub fn truncate(&self, t_end: f64) -> Result<Self> {
        if t_end > self.t_end {
            return Err(Error::HorizonMismatch {
                left: t_end,
                right: self.t_end,
            });
        }
        let k = self.jump_times.partition_point(|&x| x <= t_end);
        Ok(StepPath {
            initial: self.initial,
            jump_times: self.jump_times[..k].to_vec(),
            values: self.values[..k].to_vec(),
            t_end,
        })
    }
}

/// `∫_0^T |f - g| ds`, exact on the merged breakpoints.
pub fn l1_distance(f: &StepPath, g: &StepPath, t_end: f64) -> Result<f64> {
    for p in [f, g] {
        if p.t_end != t_end {
            return Err(Error::HorizonMismatch {
                left: p.t_end,
                right: t_end,
            });
        }
    }
    let (ft, fv) = (&f.jump_times, &f.values);
    let (gt, gv) = (&g.jump_times, &g.values);
    let (mut i, mut j) = (0, 0);
    let (mut a, mut b) = (f.initial, g.initial);
    let mut t = 0.0;
    let mut acc = 0.0;
    loop {
        let next_f = ft.get(i).copied().unwrap_or(f64::INFINITY);
        let next_g = gt.get(j).copied().unwrap_or(f64::INFINITY);
        let next = next_f.min(next_g).min(t_end);
        acc += (a - b).abs() * (next - t);
        t = next;
        if t >= t_end {
            break;
        }
        while i < ft.len() && ft[i] == t {
            a = fv[i];
            i += 1;
        }
        while j < gt.len() && gt[j] == t {
            b = gv[j];
            j += 1;
        }
    }
    Ok(acc)
}

/// The two detection counting paths `(R¹, R²)` of a trajectory on
/// `[0, horizon]`.
pub fn detection_paths(path: &EpidemicPath, horizon: f64) -> Result<(StepPath, StepPath)> {
    if horizon > path.options.horizon {
        return Err(Error::HorizonMismatch {
            left: horizon,
            right: path.options.horizon,
        });
    }
    let mut rec = DetectionRecorder::default();
    path.replay_into(&mut rec)?;
    rec.step_paths(horizon)
}

/// [`EventSink`] keeping the detection times of each mode.
#[derive(Clone, Debug, Default)]
pub struct DetectionRecorder {
    pub initial_r1: u64,
    pub initial_r2: u64,
    pub screen: Vec<f64>,
    pub ct: Vec<f64>,
}

impl DetectionRecorder {
    pub fn step_paths(&self, horizon: f64) -> Result<(StepPath, StepPath)> {
        Ok((
            StepPath::counting(self.initial_r1, &self.screen, horizon)?,
            StepPath::counting(self.initial_r2, &self.ct, horizon)?,
        ))
    }
}

impl EventSink for DetectionRecorder {
    fn on_start(&mut self, init: &PopulationState) {
        self.initial_r1 = init.counts.r1;
        self.initial_r2 = init.counts.r2;
        self.screen.clear();
        self.ct.clear();
    }

    fn on_event(&mut self, e: &SimEvent) {
        match e.kind {
            EventKind::DetectScreen => self.screen.push(e.time),
            EventKind::DetectCt => self.ct.push(e.time),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step(times: &[f64], t_end: f64) -> StepPath {
        StepPath::counting(0, times, t_end).unwrap()
    }

    /// Left Riemann sum on a uniform grid.
    fn riemann_l1(f: &StepPath, g: &StepPath, t_end: f64, h: f64) -> f64 {
        let n = (t_end / h).round() as usize;
        (0..n)
            .map(|k| {
                let t = (k as f64 + 0.5) * h;
                (f.value_at(t) - g.value_at(t)).abs() * h
            })
            .sum()
    }

    #[test]
    fn identical_paths_are_at_distance_zero() {
        let f = step(&[0.3, 1.2, 2.9], 3.0);
        assert_eq!(l1_distance(&f, &f, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn rectangle() {
        let f = StepPath::constant(0.0, 3.0);
        let g = StepPath::constant(1.0, 3.0);
        assert_eq!(l1_distance(&f, &g, 3.0).unwrap(), 3.0);
    }

    #[test]
    fn shifted_unit_jumps_match_fine_grid_oracle() {
        let f = step(&[1.0], 3.0);
        let g = step(&[2.0], 3.0);
        let exact = l1_distance(&f, &g, 3.0).unwrap();
        let oracle = riemann_l1(&f, &g, 3.0, 1e-4);
        assert!((exact - oracle).abs() < 1e-3);
        assert!((exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_horizons_are_rejected() {
        let f = StepPath::constant(0.0, 3.0);
        let g = StepPath::constant(0.0, 4.0);
        assert!(l1_distance(&f, &g, 3.0).is_err());
    }

    #[test]
    fn right_continuity_and_truncation() {
        let f = step(&[1.0, 1.0, 2.5], 3.0);
        assert_eq!(f.value_at(0.999), 0.0);
        assert_eq!(f.value_at(1.0), 2.0);
        assert_eq!(f.value_at(3.0), 3.0);
        let g = f.truncate(2.0).unwrap();
        assert_eq!(g.final_value(), 2.0);
        assert!(f.truncate(4.0).is_err());
    }

    #[test]
    fn rejects_decreasing_values() {
        assert!(StepPath::new(2.0, vec![1.0], vec![1.0], 3.0).is_err());
        assert!(StepPath::new(0.0, vec![2.0, 1.0], vec![1.0, 2.0], 3.0).is_err());
    }

    fn arb_path(t_end: f64) -> impl Strategy<Value = StepPath> {
        (0u64..5, prop::collection::vec(0.0..t_end, 0..12)).prop_map(move |(init, mut ts)| {
            ts.sort_by(f64::total_cmp);
            StepPath::counting(init, &ts, t_end).unwrap()
        })
    }

    proptest! {
        #[test]
        fn l1_is_a_metric(f in arb_path(4.0), g in arb_path(4.0), h in arb_path(4.0)) {
            let fg = l1_distance(&f, &g, 4.0).unwrap();
            let gf = l1_distance(&g, &f, 4.0).unwrap();
            let fh = l1_distance(&f, &h, 4.0).unwrap();
            let hg = l1_distance(&h, &g, 4.0).unwrap();
            prop_assert!(fg >= 0.0);
            prop_assert!((fg - gf).abs() <= 1e-12 * fg.max(1.0));
            prop_assert!(fg <= fh + hg + 1e-12);
            prop_assert_eq!(l1_distance(&f, &f, 4.0).unwrap(), 0.0);
        }

        #[test]
        fn l1_agrees_with_riemann_sum(f in arb_path(2.0), g in arb_path(2.0)) {
            let exact = l1_distance(&f, &g, 2.0).unwrap();
            let approx = riemann_l1(&f, &g, 2.0, 1e-4);
            // each breakpoint contributes at most jump * h to the grid error
            prop_assert!((exact - approx).abs() < 1e-2);
        }
    }
}
