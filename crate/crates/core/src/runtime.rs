//! The master/worker protocol on real threads.
//!
//! The master runs on the calling thread and is the only writer of `x_bar`.
//! Each worker owns its local state, blocks on the next model snapshot,
//! performs its passes and sends its adjustment back. Commit order at the
//! master defines the iteration index.

use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::{Duration, Instant};

use crate::algorithm::{AdjustmentMsg, MasterState, RepetitionPolicy, StepConfig, WorkerState};
use crate::error::{check_dim, invalid, Error, Result};
use crate::problem::CompositeProblem;
use crate::simulator::{Algorithm, Init, Trace};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StopRule {
    pub max_iters: Option<usize>,
    pub residual: Option<f64>,
    pub wall_clock: Option<Duration>,
}

impl StopRule {
    pub fn iters(n: usize) -> Self {
        Self {
            max_iters: Some(n),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters.is_none() && self.residual.is_none() && self.wall_clock.is_none() {
            return Err(invalid("stop rule needs at least one criterion"));
        }
        if self.max_iters == Some(0) {
            return Err(invalid("iteration limit must be positive"));
        }
        if self.residual.is_some_and(|r| !(r > 0.0)) {
            return Err(invalid("residual threshold must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Iterations,
    Residual,
    WallClock,
}

/// Makes `worker` panic when it starts round `round` (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fault {
    pub worker: usize,
    pub round: usize,
}

#[derive(Clone, Debug)]
pub struct ClusterConfig {
    pub steps: StepConfig,
    pub reps: RepetitionPolicy,
    /// Per-worker multipliers of `unit_delay`; empty means no slowdown.
    pub slowdown: Vec<f64>,
    /// Sleep after each local pass, scaled by the worker's slowdown.
    pub unit_delay: Duration,
    pub stop: StopRule,
    /// Evaluate the residual every this many commits.
    pub residual_every: usize,
    pub init: Init,
    pub fault: Option<Fault>,
}

impl ClusterConfig {
    pub fn new(problem: &CompositeProblem, reps: RepetitionPolicy, stop: StopRule) -> Result<Self> {
        Ok(Self {
            steps: StepConfig::default_for(problem)?,
            reps,
            slowdown: Vec::new(),
            unit_delay: Duration::ZERO,
            stop,
            residual_every: 1,
            init: Init::uniform(vec![0.0; problem.dim()], problem.workers()),
            fault: None,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ClusterOutcome {
    pub output: Vec<f64>,
    pub trace: Trace,
    pub stopped_by: StopReason,
}

/// A failed run with whatever was committed before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{source}")]
pub struct ClusterFailure {
    #[source]
    pub source: Error,
    pub partial: Option<Box<Trace>>,
}

impl From<Error> for ClusterFailure {
    fn from(source: Error) -> Self {
        Self {
            source,
            partial: None,
        }
    }
}

enum Down {
    Model(Vec<f64>),
    Stop,
}

enum Up {
    Adjust {
        worker: usize,
        delta: Vec<f64>,
        local: Vec<f64>,
        reps: usize,
    },
    Failed {
        worker: usize,
        message: String,
    },
}

/// Reports a panicking worker to the master.
struct PanicGuard {
    worker: usize,
    tx: Sender<Up>,
}

impl Drop for PanicGuard {
    fn drop(&mut self) {
        if thread::panicking() {
            let _ = self.tx.send(Up::Failed {
                worker: self.worker,
                message: "worker panicked".into(),
            });
        }
    }
}

struct WorkerCtx<'a> {
    problem: &'a CompositeProblem,
    state: WorkerState,
    reps: RepetitionPolicy,
    pause: Duration,
    fault: Option<usize>,
}

fn worker_loop(mut ctx: WorkerCtx<'_>, rx: Receiver<Down>, tx: Sender<Up>) {
    let id = ctx.state.id;
    let _guard = PanicGuard {
        worker: id,
        tx: tx.clone(),
    };
    let term = &ctx.problem.terms()[id];
    let reg = ctx.problem.reg();
    let mut round = 0;
    while let Ok(Down::Model(x_bar)) = rx.recv() {
        if ctx.fault == Some(round) {
            panic!("injected fault in worker {id} at round {round}");
        }
        round += 1;
        ctx.state.last_received = x_bar;
        let start = Instant::now();
        let pause = ctx.pause;
        let reps = &ctx.reps;
        let keep_going = |done: usize| {
            if !pause.is_zero() {
                thread::sleep(pause);
            }
            match reps {
                RepetitionPolicy::Budgeted { budget } => start.elapsed().as_secs_f64() < *budget,
                _ => done < reps.fixed(id).unwrap_or(1),
            }
        };
        let up = match ctx.state.run_passes(term, &reg, keep_going) {
            Ok((msg, reps)) => Up::Adjust {
                worker: id,
                delta: msg.delta,
                local: ctx.state.x.clone(),
                reps,
            },
            Err(e) => Up::Failed {
                worker: id,
                message: e.to_string(),
            },
        };
        let failed = matches!(up, Up::Failed { .. });
        if tx.send(up).is_err() || failed {
            return;
        }
    }
}

pub fn run_cluster(
    problem: &CompositeProblem,
    config: &ClusterConfig,
) -> std::result::Result<ClusterOutcome, ClusterFailure> {
    let m = problem.workers();
    check_dim(m, config.steps.workers())?;
    check_dim(m, config.init.locals.len())?;
    check_dim(problem.dim(), config.init.master.len())?;
    config.reps.validate(m)?;
    config.stop.validate()?;
    if !config.slowdown.is_empty() {
        check_dim(m, config.slowdown.len())?;
        if config
            .slowdown
            .iter()
            .any(|f| !(*f >= 0.0 && f.is_finite()))
        {
            return Err(invalid("slowdown factors must be nonnegative").into());
        }
    }
    let reg = problem.reg();
    let every = config.residual_every.max(1);
    let mut master = MasterState::new(config.init.master.clone(), config.steps.clone());
    let mut trace = Trace::new(
        Algorithm::DaveRpg,
        config.steps.clone(),
        config.init.master.clone(),
        config.init.locals.clone(),
    )?;

    let (up_tx, up_rx) = mpsc::channel::<Up>();
    let mut result: std::result::Result<StopReason, Error> = Err(invalid("no iterations"));
    thread::scope(|scope| {
        let mut downs = Vec::with_capacity(m);
        let mut handles = Vec::with_capacity(m);
        for i in 0..m {
            let (down_tx, down_rx) = mpsc::channel();
            let state = match WorkerState::new(
                i,
                &config.steps,
                config.init.locals[i].clone(),
                config.init.master.clone(),
            ) {
                Ok(s) => s,
                Err(e) => {
                    result = Err(e);
                    break;
                }
            };
            let factor = config.slowdown.get(i).copied().unwrap_or(1.0);
            let ctx = WorkerCtx {
                problem,
                state,
                reps: config.reps.clone(),
                pause: config.unit_delay.mul_f64(factor),
                fault: config.fault.filter(|f| f.worker == i).map(|f| f.round),
            };
            let tx = up_tx.clone();
            handles.push(scope.spawn(move || worker_loop(ctx, down_rx, tx)));
            let _ = down_tx.send(Down::Model(config.init.master.clone()));
            downs.push(down_tx);
        }
        if downs.len() == m {
            result = master_loop(
                problem,
                config,
                &mut master,
                &mut trace,
                &up_rx,
                &downs,
                every,
            );
        }
        for d in &downs {
            let _ = d.send(Down::Stop);
        }
        // joined explicitly so a worker panic is not re-raised here
        for h in handles {
            let _ = h.join();
        }
    });
    // late adjustments are discarded with the channel
    drop(up_rx);

    match result {
        Ok(stopped_by) => {
            let output = master.output(&reg)?;
            Ok(ClusterOutcome {
                output,
                trace,
                stopped_by,
            })
        }
        Err(source) => Err(ClusterFailure {
            source,
            partial: Some(Box::new(trace)),
        }),
    }
}

fn master_loop(
    problem: &CompositeProblem,
    config: &ClusterConfig,
    master: &mut MasterState,
    trace: &mut Trace,
    up_rx: &Receiver<Up>,
    downs: &[Sender<Down>],
    every: usize,
) -> Result<StopReason> {
    let reg = problem.reg();
    let start = Instant::now();
    let stop = &config.stop;
    loop {
        let msg = match stop.wall_clock {
            Some(limit) => {
                let left = limit.saturating_sub(start.elapsed());
                match up_rx.recv_timeout(left) {
                    Ok(m) => m,
                    Err(RecvTimeoutError::Timeout) => return Ok(StopReason::WallClock),
                    Err(RecvTimeoutError::Disconnected) => {
                        return Err(invalid("all workers exited"))
                    }
                }
            }
            None => up_rx.recv().map_err(|_| invalid("all workers exited"))?,
        };
        let (worker, delta, local, reps) = match msg {
            Up::Adjust {
                worker,
                delta,
                local,
                reps,
            } => (worker, delta, local, reps),
            Up::Failed { worker, message } => return Err(Error::WorkerFailed { worker, message }),
        };
        let adj = AdjustmentMsg { worker, delta };
        master.apply(&adj)?;
        trace.push(
            worker,
            start.elapsed().as_secs_f64(),
            reps,
            master.x_bar(),
            &local,
            &adj.delta,
        );
        if stop.max_iters.is_some_and(|n| master.k() >= n) {
            return Ok(StopReason::Iterations);
        }
        if let Some(tol) = stop.residual {
            if master.k().is_multiple_of(every)
                && problem.residual_norm(&master.output(&reg)?)? <= tol
            {
                return Ok(StopReason::Residual);
            }
        }
        if stop
            .wall_clock
            .is_some_and(|limit| start.elapsed() >= limit)
        {
            return Ok(StopReason::WallClock);
        }
        let _ = downs[worker].send(Down::Model(master.x_bar().to_vec()));
    }
}
