//! Per-exchange records of a run and the checks that replay them.

use crate::algorithm::StepConfig;
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;
use crate::problem::Regularizer;
use crate::simulator::delays::DelayTable;

/// Snapshots are kept for every exchange up to this dimension.
pub const SNAPSHOT_DIM_LIMIT: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    DaveRpg,
    Piag,
    SyncPg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::DaveRpg => "dave-rpg",
            Algorithm::Piag => "piag",
            Algorithm::SyncPg => "sync-pg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dave-rpg" | "dave" => Ok(Algorithm::DaveRpg),
            "piag" => Ok(Algorithm::Piag),
            "sync-pg" | "sync" => Ok(Algorithm::SyncPg),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// State after one exchange.
///
/// `master` is `x_bar^k` for DAve-RPG and the iterate itself for the
/// baselines. `local` is the worker's new local iterate (the fresh gradient
/// for PIAG). `delta` is the change applied to `master`.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub master: Vec<f64>,
    pub local: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// 1-based exchange number.
    pub k: usize,
    pub worker: usize,
    pub time: f64,
    pub reps: usize,
    pub delta_norm: f64,
    pub snapshot: Option<Snapshot>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub workers: usize,
    pub dim: usize,
    pub steps: StepConfig,
    pub initial_master: Vec<f64>,
    pub initial_locals: Vec<Vec<f64>>,
    pub records: Vec<TraceRecord>,
    pub final_master: Vec<f64>,
    /// Delay bound used for the PIAG stepsize.
    pub piag_delay: Option<usize>,
}

impl Trace {
    pub fn new(
        algorithm: Algorithm,
        steps: StepConfig,
        initial_master: Vec<f64>,
        initial_locals: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let workers = steps.workers();
        check_dim(workers, initial_locals.len())?;
        let dim = initial_master.len();
        for l in &initial_locals {
            check_dim(dim, l.len())?;
        }
        Ok(Self {
            algorithm,
            workers,
            dim,
            steps,
            final_master: initial_master.clone(),
            initial_master,
            initial_locals,
            records: Vec::new(),
            piag_delay: None,
        })
    }

    pub fn keeps_snapshots(&self) -> bool {
        self.dim <= SNAPSHOT_DIM_LIMIT
    }

    /// Appends the next exchange and updates `final_master`.
    pub fn push(
        &mut self,
        worker: usize,
        time: f64,
        reps: usize,
        master: &[f64],
        local: &[f64],
        delta: &[f64],
    ) {
        let snapshot = self.keeps_snapshots().then(|| Snapshot {
            master: master.to_vec(),
            local: local.to_vec(),
            delta: delta.to_vec(),
        });
        self.records.push(TraceRecord {
            k: self.records.len() + 1,
            worker,
            time,
            reps,
            delta_norm: linalg::norm(delta),
            snapshot,
        });
        self.final_master.clear();
        self.final_master.extend_from_slice(master);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn updaters(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.worker).collect()
    }

    pub fn delays(&self) -> Result<DelayTable> {
        DelayTable::new(&self.updaters(), self.workers)
    }

    fn snapshot(&self, idx: usize) -> Result<&Snapshot> {
        self.records[idx]
            .snapshot
            .as_ref()
            .ok_or(Error::MissingSnapshots)
    }

    /// Master state after exchange `k` (`k = 0` is the initial state).
    pub fn master_at(&self, k: usize) -> Result<&[f64]> {
        if k == 0 {
            return Ok(&self.initial_master);
        }
        if k > self.len() {
            return Err(invalid(format!(
                "exchange {k} beyond trace of length {}",
                self.len()
            )));
        }
        Ok(&self.snapshot(k - 1)?.master)
    }

    /// Output iterate `x^k`.
    pub fn iterate_at(&self, k: usize, reg: &Regularizer) -> Result<Vec<f64>> {
        let m = self.master_at(k)?;
        match self.algorithm {
            Algorithm::DaveRpg => reg.prox(m, self.steps.gamma_bar()),
            Algorithm::Piag | Algorithm::SyncPg => Ok(m.to_vec()),
        }
    }

    /// `max_k |x_bar^k - sum_i pi_i x_i^{k - d_i^k}| / (1 + |x_bar^k|)`, with
    /// the local iterates rebuilt from the records.
    pub fn aggregation_residual(&self) -> Result<f64> {
        if self.algorithm != Algorithm::DaveRpg {
            return Err(invalid(
                "aggregation identity applies to DAve-RPG traces only",
            ));
        }
        let mut locals = self.initial_locals.clone();
        let mut worst = aggregation_gap(&self.initial_master, &locals, self.steps.pis());
        for (idx, r) in self.records.iter().enumerate() {
            let snap = self.snapshot(idx)?;
            locals[r.worker].clone_from(&snap.local);
            worst = worst.max(aggregation_gap(&snap.master, &locals, self.steps.pis()));
        }
        Ok(worst)
    }

    /// Re-applies the recorded adjustments in commit order to the initial
    /// master state.
    pub fn replay_commits(&self) -> Result<Vec<f64>> {
        self.replay_in_order(&(0..self.len()).collect::<Vec<_>>())
    }

    /// Applies the recorded adjustments in the given order.
    pub fn replay_in_order(&self, order: &[usize]) -> Result<Vec<f64>> {
        let mut x = self.initial_master.clone();
        for &idx in order {
            linalg::axpy(1.0, &self.snapshot(idx)?.delta, &mut x);
        }
        Ok(x)
    }
}

fn aggregation_gap(master: &[f64], locals: &[Vec<f64>], pis: &[f64]) -> f64 {
    let mut avg = vec![0.0; master.len()];
    for (l, &p) in locals.iter().zip(pis) {
        linalg::axpy(p, l, &mut avg);
    }
    linalg::dist(master, &avg) / (1.0 + linalg::norm(master))
}
