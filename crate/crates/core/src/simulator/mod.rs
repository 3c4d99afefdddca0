//! Deterministic discrete-event execution of the protocols.
//!
//! The order of exchanges depends only on the delay model, the repetition
//! policy and the seed, never on iterate values. A schedule is generated
//! first and the chosen algorithm is then driven through it.

pub mod delays;
pub mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithm::{
    configure_steps, piag_stepsize, sync_pg_round, MasterState, PiagState, RepetitionPolicy,
    StepConfig, WorkerState,
};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;
use crate::problem::CompositeProblem;

pub use delays::{
    epoch_sequence, epochs_by_counting, verify_epoch_bounds, DelayTable, EpochBoundsReport,
    EpochSequence,
};
pub use trace::{Algorithm, Snapshot, Trace, TraceRecord, SNAPSHOT_DIM_LIMIT};

/// Compute-plus-communication time of one local pass.
#[derive(Clone, Debug, PartialEq)]
pub enum DelayModel {
    Constant {
        duration: f64,
    },
    Uniform {
        min: f64,
        max: f64,
    },
    Exponential {
        mean: f64,
    },
    SlowWorker {
        base: Box<DelayModel>,
        worker: usize,
        factor: f64,
    },
}

impl DelayModel {
    pub fn slow_worker(base: DelayModel, worker: usize, factor: f64) -> Self {
        DelayModel::SlowWorker {
            base: Box::new(base),
            worker,
            factor,
        }
    }

    pub fn validate(&self, workers: usize) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            DelayModel::Constant { duration } => positive(*duration, "duration"),
            DelayModel::Uniform { min, max } => {
                positive(*min, "uniform min")?;
                positive(*max, "uniform max")?;
                if max < min {
                    return Err(invalid(format!("uniform max {max} below min {min}")));
                }
                Ok(())
            }
            DelayModel::Exponential { mean } => positive(*mean, "exponential mean"),
            DelayModel::SlowWorker {
                base,
                worker,
                factor,
            } => {
                if *worker >= workers {
                    return Err(Error::WorkerOutOfRange {
                        id: *worker,
                        workers,
                    });
                }
                positive(*factor, "slowdown factor")?;
                base.validate(workers)
            }
        }
    }

    /// Multiplier applied to `worker`'s durations.
    pub fn slowdown(&self, worker: usize) -> f64 {
        match self {
            DelayModel::SlowWorker {
                base,
                worker: w,
                factor,
            } => base.slowdown(worker) * if *w == worker { *factor } else { 1.0 },
            _ => 1.0,
        }
    }
}

/// Per-worker random substream.
pub fn worker_rng(seed: u64, worker: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker as u64);
    rng
}

pub fn sample_compute_time(model: &DelayModel, worker: usize, rng: &mut ChaCha8Rng) -> f64 {
    match model {
        DelayModel::Constant { duration } => *duration,
        DelayModel::Uniform { min, max } => {
            if min == max {
                *min
            } else {
                min + (max - min) * rng.random::<f64>()
            }
        }
        DelayModel::Exponential { mean } => {
            let u: f64 = rng.random();
            (-mean * (-u).ln_1p()).max(mean * 1e-12)
        }
        DelayModel::SlowWorker {
            base,
            worker: w,
            factor,
        } => {
            let t = sample_compute_time(base, worker, rng);
            if *w == worker {
                t * factor
            } else {
                t
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Budget {
    pub max_iters: Option<usize>,
    pub max_time: Option<f64>,
}

impl Budget {
    pub fn iters(n: usize) -> Self {
        Self {
            max_iters: Some(n),
            max_time: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.max_iters, self.max_time) {
            (None, None) => Err(invalid("budget needs an iteration or time limit")),
            (Some(0), _) => Err(invalid("iteration budget must be positive")),
            (_, Some(t)) if !(t > 0.0) => Err(invalid("time budget must be positive")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub worker: usize,
    pub time: f64,
    pub reps: usize,
}

fn round_duration(
    model: &DelayModel,
    reps: &RepetitionPolicy,
    worker: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, usize) {
    match reps.fixed(worker) {
        Some(p) => (
            (0..p)
                .map(|_| sample_compute_time(model, worker, rng))
                .sum(),
            p,
        ),
        None => {
            let RepetitionPolicy::Budgeted { budget } = reps else {
                unreachable!("non-fixed policy is budgeted")
            };
            let mut total = 0.0;
            let mut p = 0;
            while p == 0 || total < *budget {
                total += sample_compute_time(model, worker, rng);
                p += 1;
            }
            (total, p)
        }
    }
}

fn within(budget: &Budget, count: usize, time: f64) -> bool {
    budget.max_iters.is_none_or(|n| count < n) && budget.max_time.is_none_or(|t| time <= t)
}

/// Exchange order for asynchronous protocols. Simultaneous completions
/// commit in ascending worker index.
pub fn async_schedule(
    model: &DelayModel,
    workers: usize,
    reps: &RepetitionPolicy,
    seed: u64,
    budget: &Budget,
) -> Result<Vec<Event>> {
    if workers == 0 {
        return Err(invalid("need at least one worker"));
    }
    model.validate(workers)?;
    reps.validate(workers)?;
    budget.validate()?;
    let mut rngs: Vec<_> = (0..workers).map(|i| worker_rng(seed, i)).collect();
    let mut pending: Vec<(f64, usize)> = (0..workers)
        .map(|i| round_duration(model, reps, i, &mut rngs[i]))
        .collect();
    let mut events = Vec::new();
    loop {
        let mut i = 0;
        for j in 1..workers {
            if pending[j].0 < pending[i].0 {
                i = j;
            }
        }
        let (time, p) = pending[i];
        if !within(budget, events.len(), time) {
            return Ok(events);
        }
        events.push(Event {
            worker: i,
            time,
            reps: p,
        });
        let (dt, next_p) = round_duration(model, reps, i, &mut rngs[i]);
        pending[i] = (time + dt, next_p);
    }
}

/// Rounds of the synchronous baseline; each lasts as long as its slowest
/// worker, who is recorded as the round's worker.
pub fn sync_schedule(
    model: &DelayModel,
    workers: usize,
    seed: u64,
    budget: &Budget,
) -> Result<Vec<Event>> {
    if workers == 0 {
        return Err(invalid("need at least one worker"));
    }
    model.validate(workers)?;
    budget.validate()?;
    let mut rngs: Vec<_> = (0..workers).map(|i| worker_rng(seed, i)).collect();
    let mut events = Vec::new();
    let mut now = 0.0;
    loop {
        let mut slowest = (0, f64::NEG_INFINITY);
        for (i, rng) in rngs.iter_mut().enumerate() {
            let t = sample_compute_time(model, i, rng);
            if t > slowest.1 {
                slowest = (i, t);
            }
        }
        now += slowest.1;
        if !within(budget, events.len(), now) {
            return Ok(events);
        }
        events.push(Event {
            worker: slowest.0,
            time: now,
            reps: 1,
        });
    }
}

/// Starting point: the master variable and every worker's local iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct Init {
    pub master: Vec<f64>,
    pub locals: Vec<Vec<f64>>,
}

impl Init {
    /// `x_bar = x_i = x0` for every worker.
    pub fn uniform(x0: Vec<f64>, workers: usize) -> Self {
        Self {
            locals: vec![x0.clone(); workers],
            master: x0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub algorithm: Algorithm,
    pub steps: StepConfig,
    pub reps: RepetitionPolicy,
    pub model: DelayModel,
    pub seed: u64,
    pub budget: Budget,
    /// PIAG delay bound; the observed gradient staleness when `None`.
    pub piag_delay: Option<usize>,
}

impl SimConfig {
    pub fn dave(
        problem: &CompositeProblem,
        reps: RepetitionPolicy,
        model: DelayModel,
        seed: u64,
        budget: Budget,
    ) -> Result<Self> {
        Ok(Self {
            algorithm: Algorithm::DaveRpg,
            steps: StepConfig::default_for(problem)?,
            reps,
            model,
            seed,
            budget,
            piag_delay: None,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub trace: Trace,
    /// Output iterate after the last exchange.
    pub output: Vec<f64>,
}

pub fn simulate(problem: &CompositeProblem, config: &SimConfig, init: &Init) -> Result<SimOutcome> {
    let m = problem.workers();
    check_dim(m, config.steps.workers())?;
    check_dim(m, init.locals.len())?;
    check_dim(problem.dim(), init.master.len())?;
    match config.algorithm {
        Algorithm::DaveRpg => {
            let events =
                async_schedule(&config.model, m, &config.reps, config.seed, &config.budget)?;
            run_dave(problem, config, init, &events)
        }
        Algorithm::Piag => {
            let single = RepetitionPolicy::Fixed(1);
            let events = async_schedule(&config.model, m, &single, config.seed, &config.budget)?;
            run_piag(problem, config, init, &events)
        }
        Algorithm::SyncPg => {
            let events = sync_schedule(&config.model, m, config.seed, &config.budget)?;
            run_sync(problem, config, init, &events)
        }
    }
}

fn run_dave(
    problem: &CompositeProblem,
    config: &SimConfig,
    init: &Init,
    events: &[Event],
) -> Result<SimOutcome> {
    let steps = &config.steps;
    let reg = problem.reg();
    let mut master = MasterState::new(init.master.clone(), steps.clone());
    let mut workers = (0..problem.workers())
        .map(|i| WorkerState::new(i, steps, init.locals[i].clone(), init.master.clone()))
        .collect::<Result<Vec<_>>>()?;
    let mut trace = Trace::new(
        Algorithm::DaveRpg,
        steps.clone(),
        init.master.clone(),
        init.locals.clone(),
    )?;
    for ev in events {
        let w = &mut workers[ev.worker];
        let msg = w.round(ev.reps, &problem.terms()[ev.worker], &reg)?;
        master.apply(&msg)?;
        w.last_received.clone_from(&master.x_bar().to_vec());
        trace.push(
            ev.worker,
            ev.time,
            ev.reps,
            master.x_bar(),
            &w.x,
            &msg.delta,
        );
    }
    let output = master.output(&reg)?;
    Ok(SimOutcome { trace, output })
}

fn run_piag(
    problem: &CompositeProblem,
    config: &SimConfig,
    init: &Init,
    events: &[Event],
) -> Result<SimOutcome> {
    let m = problem.workers();
    let d = match config.piag_delay {
        Some(d) => d,
        None => {
            let order: Vec<usize> = events.iter().map(|e| e.worker).collect();
            DelayTable::new(&order, m)?.max_gradient_staleness()
        }
    };
    let mu = problem.mus().iter().sum::<f64>() / m as f64;
    let l = problem.lipschitz_constants().iter().sum::<f64>() / m as f64;
    let gamma = piag_stepsize(mu, l, d)?;
    let reg = problem.reg();
    let mut state = PiagState::new(init.master.clone(), m, gamma)?;
    state.warm_up(problem)?;
    let mut dispatched = vec![init.master.clone(); m];
    let steps = configure_steps(&vec![gamma; m])?;
    let mut trace = Trace::new(
        Algorithm::Piag,
        steps,
        init.master.clone(),
        vec![init.master.clone(); m],
    )?;
    trace.piag_delay = Some(d);
    for ev in events {
        let g = problem.terms()[ev.worker].gradient(&dispatched[ev.worker])?;
        let before = state.x().to_vec();
        state.step(ev.worker, g.clone(), &reg)?;
        let delta = linalg::sub(state.x(), &before);
        dispatched[ev.worker] = state.x().to_vec();
        trace.push(ev.worker, ev.time, 1, state.x(), &g, &delta);
    }
    Ok(SimOutcome {
        output: state.x().to_vec(),
        trace,
    })
}

fn run_sync(
    problem: &CompositeProblem,
    config: &SimConfig,
    init: &Init,
    events: &[Event],
) -> Result<SimOutcome> {
    let m = problem.workers();
    let mut x = init.master.clone();
    let mut trace = Trace::new(
        Algorithm::SyncPg,
        config.steps.clone(),
        init.master.clone(),
        vec![init.master.clone(); m],
    )?;
    for ev in events {
        let next = sync_pg_round(problem, &x, &config.steps)?;
        let delta = linalg::sub(&next, &x);
        x = next;
        trace.push(ev.worker, ev.time, 1, &x, &x, &delta);
    }
    Ok(SimOutcome { output: x, trace })
}
