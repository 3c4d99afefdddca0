//! Delays `d_j^t`, relative delays `D_j^t` and epoch boundaries.
//!
//! Exchanges are indexed by their 0-based position `t` in the trace. Every
//! worker has a virtual update at `t = -1`, so `d_j^t = t + 1` until worker
//! `j` first reports. `D_j^t = t - (penultimate update of j)` and is undefined
//! while `j` has fewer than one real update.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DelayTable {
    workers: usize,
    updaters: Vec<usize>,
    /// Real update positions per worker, ascending.
    updates: Vec<Vec<usize>>,
}

impl DelayTable {
    pub fn new(updaters: &[usize], workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(crate::error::invalid("need at least one worker"));
        }
        let mut updates = vec![Vec::new(); workers];
        for (t, &i) in updaters.iter().enumerate() {
            updates
                .get_mut(i)
                .ok_or(Error::WorkerOutOfRange { id: i, workers })?
                .push(t);
        }
        Ok(Self {
            workers,
            updaters: updaters.to_vec(),
            updates,
        })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn len(&self) -> usize {
        self.updaters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updaters.is_empty()
    }

    pub fn updater(&self, t: usize) -> usize {
        self.updaters[t]
    }

    /// Number of real updates of `j` at positions `<= t`.
    fn count_through(&self, t: usize, j: usize) -> usize {
        self.updates[j].partition_point(|&u| u <= t)
    }

    /// Last update of `j` at or before `t` (`-1` for the virtual one).
    pub fn last_update(&self, t: usize, j: usize) -> i64 {
        match self.count_through(t, j) {
            0 => -1,
            c => self.updates[j][c - 1] as i64,
        }
    }

    /// Update preceding the last one, if any.
    pub fn penultimate_update(&self, t: usize, j: usize) -> Option<i64> {
        match self.count_through(t, j) {
            0 => None,
            1 => Some(-1),
            c => Some(self.updates[j][c - 2] as i64),
        }
    }

    pub fn d(&self, t: usize, j: usize) -> usize {
        (t as i64 - self.last_update(t, j)) as usize
    }

    #[allow(non_snake_case)]
    pub fn D(&self, t: usize, j: usize) -> Option<usize> {
        self.penultimate_update(t, j)
            .map(|p| (t as i64 - p) as usize)
    }

    /// `max_{t,j} d_j^t`
    pub fn max_delay(&self) -> usize {
        let n = self.len();
        if n == 0 {
            return 0;
        }
        self.updates
            .iter()
            .map(|ups| {
                let mut prev = -1i64;
                let mut worst = 0i64;
                for &u in ups {
                    // delay just before this update
                    worst = worst.max(u as i64 - 1 - prev);
                    prev = u as i64;
                }
                worst.max(n as i64 - 1 - prev)
            })
            .max()
            .unwrap_or(0) as usize
    }

    /// `max_t (1/M) sum_j d_j^t`
    pub fn max_average_delay(&self) -> f64 {
        let m = self.workers;
        let mut d: Vec<usize> = vec![0; m];
        let mut worst = 0usize;
        for &i in &self.updaters {
            for dj in d.iter_mut() {
                *dj += 1;
            }
            d[i] = 0;
            worst = worst.max(d.iter().sum());
        }
        worst as f64 / m as f64
    }

    /// Largest age of a gradient used by an aggregated-gradient step, i.e.
    /// `max (t - p)` where `x^p` is the point behind worker `j`'s freshest
    /// gradient when exchange `t` is processed (`p = 0` before any report).
    pub fn max_gradient_staleness(&self) -> usize {
        let mut worst = 0;
        for t in 0..self.len() {
            for j in 0..self.workers {
                let point = self.penultimate_update(t, j).map_or(0, |p| p + 1);
                worst = worst.max((t as i64 - point) as usize);
            }
        }
        worst
    }
}

/// Boundaries `k_0 = 0 < k_1 < ...` over exchange positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochSequence {
    pub boundaries: Vec<usize>,
}

impl EpochSequence {
    /// Epoch containing exchange position `t`.
    pub fn epoch_of(&self, t: usize) -> usize {
        self.boundaries
            .partition_point(|&b| b <= t)
            .saturating_sub(1)
    }

    /// `k_{m+1} - k_m` for every completed epoch.
    pub fn gaps(&self) -> Vec<usize> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Number of started epochs.
    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }
}

/// `k_{m+1} = min { t : t - D_i^t >= k_m for all i }`
pub fn epoch_sequence(delays: &DelayTable) -> EpochSequence {
    let mut boundaries = vec![0];
    let m = delays.workers();
    // penultimate and last update positions, tracked online
    let mut last = vec![-1i64; m];
    let mut penult: Vec<Option<i64>> = vec![None; m];
    for t in 0..delays.len() {
        let i = delays.updater(t);
        penult[i] = Some(last[i]);
        last[i] = t as i64;
        let km = *boundaries.last().expect("k_0 present") as i64;
        if penult.iter().all(|p| p.is_some_and(|p| p >= km)) {
            boundaries.push(t);
        }
    }
    EpochSequence { boundaries }
}

/// Epoch boundaries from counting: `k_{m+1}` is the first position at which
/// every worker has two updates in `[k_m, k_{m+1}]`.
pub fn epochs_by_counting(updaters: &[usize], workers: usize) -> EpochSequence {
    let mut boundaries = vec![0];
    let mut start = 0;
    loop {
        let mut counts = vec![0usize; workers];
        let mut found = None;
        for (t, &i) in updaters.iter().enumerate().skip(start) {
            counts[i] += 1;
            if counts.iter().all(|&c| c >= 2) {
                found = Some(t);
                break;
            }
        }
        match found {
            Some(t) => {
                boundaries.push(t);
                start = t;
            }
            None => return EpochSequence { boundaries },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochBoundsReport {
    pub max_delay: usize,
    pub max_average_delay: f64,
    pub uniform_gap_bound: usize,
    pub average_gap_bound: f64,
    pub gaps: Vec<usize>,
    /// Epoch indices `m` with `k_{m+1} - k_m > 2d + 1`.
    pub uniform_violations: Vec<usize>,
    /// Epoch indices `m` with `k_{m+1} - k_m > 2M(2 dbar - M + 3) - 3`.
    pub average_violations: Vec<usize>,
}

pub fn verify_epoch_bounds(delays: &DelayTable, epochs: &EpochSequence) -> EpochBoundsReport {
    let m = delays.workers() as f64;
    let d = delays.max_delay();
    let d_bar = delays.max_average_delay();
    let uniform_gap_bound = 2 * d + 1;
    let average_gap_bound = 2.0 * m * (2.0 * d_bar - m + 3.0) - 3.0;
    let gaps = epochs.gaps();
    let uniform_violations = (0..gaps.len())
        .filter(|&e| gaps[e] > uniform_gap_bound)
        .collect();
    let average_violations = (0..gaps.len())
        .filter(|&e| gaps[e] as f64 > average_gap_bound)
        .collect();
    EpochBoundsReport {
        max_delay: d,
        max_average_delay: d_bar,
        uniform_gap_bound,
        average_gap_bound,
        gaps,
        uniform_violations,
        average_violations,
    }
}
