//! Master and worker state machines, stepsizes, and the PIAG and synchronous
//! proximal-gradient baselines.

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;
use crate::problem::{CompositeProblem, Regularizer, SmoothTerm};

/// Local stepsizes `gamma_i`, weights `pi_i` and the master stepsize.
#[derive(Clone, Debug, PartialEq)]
pub struct StepConfig {
    gammas: Vec<f64>,
    pis: Vec<f64>,
    gamma_bar: f64,
}

impl StepConfig {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(invalid("need at least one stepsize"));
        }
        if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(invalid(format!("stepsizes must be positive, got {g}")));
        }
        let inv_sum: f64 = gammas.iter().map(|g| 1.0 / g).sum();
        let pis = gammas.iter().map(|g| (1.0 / g) / inv_sum).collect();
        let gamma_bar = gammas.len() as f64 / inv_sum;
        Ok(Self {
            gammas,
            pis,
            gamma_bar,
        })
    }

    /// Largest admissible stepsize for every term: `2/(mu+L)` when
    /// strongly convex, `1.8/L` otherwise.
    pub fn default_for(problem: &CompositeProblem) -> Result<Self> {
        Self::new(
            problem
                .terms()
                .iter()
                .map(|t| default_stepsize(t.mu(), t.lipschitz()))
                .collect(),
        )
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn pis(&self) -> &[f64] {
        &self.pis
    }

    pub fn gamma_bar(&self) -> f64 {
        self.gamma_bar
    }

    pub fn workers(&self) -> usize {
        self.gammas.len()
    }
}

pub fn configure_steps(gammas: &[f64]) -> Result<StepConfig> {
    StepConfig::new(gammas.to_vec())
}

pub fn default_stepsize(mu: f64, lipschitz: f64) -> f64 {
    if mu > 0.0 {
        2.0 / (mu + lipschitz)
    } else {
        1.8 / lipschitz
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdjustmentMsg {
    pub worker: usize,
    pub delta: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MasterState {
    x_bar: Vec<f64>,
    k: usize,
    steps: StepConfig,
}

impl MasterState {
    pub fn new(x_bar: Vec<f64>, steps: StepConfig) -> Self {
        Self { x_bar, k: 0, steps }
    }

    pub fn x_bar(&self) -> &[f64] {
        &self.x_bar
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn steps(&self) -> &StepConfig {
        &self.steps
    }

    /// `x_bar += delta; k += 1`
    pub fn apply(&mut self, msg: &AdjustmentMsg) -> Result<()> {
        check_dim(self.x_bar.len(), msg.delta.len())?;
        if msg.worker >= self.steps.workers() {
            return Err(Error::WorkerOutOfRange {
                id: msg.worker,
                workers: self.steps.workers(),
            });
        }
        linalg::axpy(1.0, &msg.delta, &mut self.x_bar);
        self.k += 1;
        Ok(())
    }

    /// `prox_{gamma_bar g}(x_bar)`
    pub fn output(&self, reg: &Regularizer) -> Result<Vec<f64>> {
        reg.prox(&self.x_bar, self.steps.gamma_bar)
    }
}

#[derive(Clone, Debug)]
pub struct WorkerState {
    pub id: usize,
    pub x: Vec<f64>,
    pub gamma: f64,
    pub pi: f64,
    pub gamma_bar: f64,
    pub last_received: Vec<f64>,
}

impl WorkerState {
    pub fn new(id: usize, steps: &StepConfig, x0: Vec<f64>, x_bar0: Vec<f64>) -> Result<Self> {
        if id >= steps.workers() {
            return Err(Error::WorkerOutOfRange {
                id,
                workers: steps.workers(),
            });
        }
        check_dim(x0.len(), x_bar0.len())?;
        Ok(Self {
            id,
            x: x0,
            gamma: steps.gammas[id],
            pi: steps.pis[id],
            gamma_bar: steps.gamma_bar,
            last_received: x_bar0,
        })
    }

    /// Runs passes against `last_received` while `keep_going(done)` holds,
    /// always doing at least one. Updates `x` and returns the adjustment with
    /// the number of passes done.
    pub fn run_passes(
        &mut self,
        term: &SmoothTerm,
        reg: &Regularizer,
        mut keep_going: impl FnMut(usize) -> bool,
    ) -> Result<(AdjustmentMsg, usize)> {
        let n = self.x.len();
        check_dim(n, self.last_received.len())?;
        check_dim(n, term.dim())?;
        let mut delta = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut grad = vec![0.0; n];
        let mut done = 0;
        loop {
            for j in 0..n {
                z[j] = self.last_received[j] + delta[j];
            }
            reg.prox_in_place(&mut z, self.gamma_bar)?;
            term.gradient_into(&z, &mut grad)?;
            for j in 0..n {
                let next = z[j] - self.gamma * grad[j];
                delta[j] += self.pi * (next - self.x[j]);
                self.x[j] = next;
            }
            done += 1;
            if !keep_going(done) {
                break;
            }
        }
        Ok((
            AdjustmentMsg {
                worker: self.id,
                delta,
            },
            done,
        ))
    }

    /// Exactly `p` passes.
    pub fn round(
        &mut self,
        p: usize,
        term: &SmoothTerm,
        reg: &Regularizer,
    ) -> Result<AdjustmentMsg> {
        if p == 0 {
            return Err(invalid("repetitions must be at least 1"));
        }
        Ok(self.run_passes(term, reg, |done| done < p)?.0)
    }
}

/// One RPG round from `x_bar`; returns `(delta, x_new)` without mutating the worker.
pub fn rpg_worker_round(
    worker: &WorkerState,
    x_bar: &[f64],
    p: usize,
    term: &SmoothTerm,
    reg: &Regularizer,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(worker.x.len(), x_bar.len())?;
    let mut w = worker.clone();
    w.last_received = x_bar.to_vec();
    let msg = w.round(p, term, reg)?;
    Ok((msg.delta, w.x))
}

#[derive(Clone, Debug, PartialEq)]
pub enum RepetitionPolicy {
    Fixed(usize),
    PerWorker(Vec<usize>),
    /// Repeat until the sampled compute time of the round reaches the budget.
    Budgeted {
        budget: f64,
    },
}

impl RepetitionPolicy {
    pub fn validate(&self, workers: usize) -> Result<()> {
        match self {
            RepetitionPolicy::Fixed(0) => Err(invalid("repetitions must be at least 1")),
            RepetitionPolicy::Fixed(_) => Ok(()),
            RepetitionPolicy::PerWorker(ps) => {
                check_dim(workers, ps.len())?;
                if ps.contains(&0) {
                    return Err(invalid("repetitions must be at least 1"));
                }
                Ok(())
            }
            RepetitionPolicy::Budgeted { budget } => {
                if *budget > 0.0 && budget.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!(
                        "repetition budget must be positive, got {budget}"
                    )))
                }
            }
        }
    }

    /// Fixed repetition count for `worker`, or `None` when budgeted.
    pub fn fixed(&self, worker: usize) -> Option<usize> {
        match self {
            RepetitionPolicy::Fixed(p) => Some(*p),
            RepetitionPolicy::PerWorker(ps) => ps.get(worker).copied(),
            RepetitionPolicy::Budgeted { .. } => None,
        }
    }
}

/// PIAG stepsize `(16/mu)[(1 + mu/(48L))^{1/(d+1)} - 1]`, with the
/// `mu -> 0` limit `1/(3L(d+1))`.
pub fn piag_stepsize(mu: f64, lipschitz: f64, d: usize) -> Result<f64> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(invalid(format!("L must be positive, got {lipschitz}")));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(invalid(format!("mu must be nonnegative, got {mu}")));
    }
    let e = (d as f64 + 1.0).recip();
    if mu == 0.0 {
        return Ok(e / (3.0 * lipschitz));
    }
    if d == 0 {
        return Ok(16.0 / mu * (mu / (48.0 * lipschitz)));
    }
    Ok(16.0 / mu * (e * (mu / (48.0 * lipschitz)).ln_1p()).exp_m1())
}

#[derive(Clone, Debug)]
pub struct PiagState {
    x: Vec<f64>,
    table: Vec<Option<Vec<f64>>>,
    gamma: f64,
}

impl PiagState {
    pub fn new(x0: Vec<f64>, workers: usize, gamma: f64) -> Result<Self> {
        if workers == 0 {
            return Err(invalid("need at least one worker"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!(
                "PIAG stepsize must be positive, got {gamma}"
            )));
        }
        Ok(Self {
            x: x0,
            table: vec![None; workers],
            gamma,
        })
    }

    /// Fills every table entry with the gradient at the current point.
    pub fn warm_up(&mut self, problem: &CompositeProblem) -> Result<()> {
        check_dim(self.table.len(), problem.workers())?;
        for (i, t) in problem.terms().iter().enumerate() {
            self.table[i] = Some(t.gradient(&self.x)?);
        }
        Ok(())
    }

    pub fn set_entry(&mut self, worker: usize, gradient: Vec<f64>) -> Result<()> {
        check_dim(self.x.len(), gradient.len())?;
        let m = self.table.len();
        let slot = self.table.get_mut(worker).ok_or(Error::WorkerOutOfRange {
            id: worker,
            workers: m,
        })?;
        *slot = Some(gradient);
        Ok(())
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Replaces `worker`'s entry and steps from the current point.
    pub fn step(&mut self, worker: usize, gradient: Vec<f64>, reg: &Regularizer) -> Result<()> {
        self.set_entry(worker, gradient)?;
        let n = self.x.len();
        let mut sum = vec![0.0; n];
        for (i, entry) in self.table.iter().enumerate() {
            let g = entry.as_ref().ok_or(Error::UninitializedTable(i))?;
            linalg::axpy(1.0, g, &mut sum);
        }
        let c = self.gamma / self.table.len() as f64;
        for j in 0..n {
            self.x[j] -= c * sum[j];
        }
        reg.prox_in_place(&mut self.x, self.gamma)
    }
}

/// Applies `pi_i (x - gamma_i grad f_i(x))` for every worker into a weighted
/// sum; shared with the reference solver so fixed points agree bitwise.
pub(crate) fn weighted_local_sum(
    problem: &CompositeProblem,
    x: &[f64],
    steps: &StepConfig,
) -> Result<Vec<f64>> {
    check_dim(problem.dim(), x.len())?;
    check_dim(problem.workers(), steps.workers())?;
    let n = x.len();
    let mut acc = vec![0.0; n];
    let mut g = vec![0.0; n];
    for (i, term) in problem.terms().iter().enumerate() {
        term.gradient_into(x, &mut g)?;
        accumulate_local(&mut acc, steps.pis[i], x, steps.gammas[i], &g);
    }
    Ok(acc)
}

/// `acc += pi (x - gamma g)`, componentwise.
pub(crate) fn accumulate_local(acc: &mut [f64], pi: f64, x: &[f64], gamma: f64, g: &[f64]) {
    for j in 0..acc.len() {
        acc[j] += pi * (x[j] - gamma * g[j]);
    }
}

/// `prox_{gamma_bar g}(sum_i pi_i (x - gamma_i grad f_i(x)))`
pub fn sync_pg_round(
    problem: &CompositeProblem,
    x: &[f64],
    steps: &StepConfig,
) -> Result<Vec<f64>> {
    let mut v = weighted_local_sum(problem, x, steps)?;
    problem.reg().prox_in_place(&mut v, steps.gamma_bar)?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_quadratic(c: f64) -> SmoothTerm {
        SmoothTerm::centered(vec![c]).unwrap()
    }

    #[test]
    fn configure_steps_examples() {
        let s = configure_steps(&[0.7; 4]).unwrap();
        for &p in s.pis() {
            assert_relative_eq!(p, 0.25, epsilon = 1e-15);
        }
        assert_relative_eq!(s.gamma_bar(), 0.7, epsilon = 1e-15);

        let s = configure_steps(&[1.0, 3.0]).unwrap();
        assert_relative_eq!(s.pis()[0], 0.75, epsilon = 1e-15);
        assert_relative_eq!(s.pis()[1], 0.25, epsilon = 1e-15);
        assert_relative_eq!(s.gamma_bar(), 1.5, epsilon = 1e-15);

        assert!(configure_steps(&[1.0, 0.0]).is_err());
        assert!(configure_steps(&[-1.0]).is_err());
        assert!(configure_steps(&[]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn step_config_invariants(gammas in prop::collection::vec(1e-3f64..10.0, 1..20)) {
            let s = configure_steps(&gammas).unwrap();
            let m = gammas.len() as f64;
            prop_assert!((s.pis().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for (p, g) in s.pis().iter().zip(&gammas) {
                prop_assert!(*p > 0.0);
                prop_assert!((p * g - s.gamma_bar() / m).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rpg_round_hand_unrolled() {
        let steps = configure_steps(&[1.0, 1.0]).unwrap();
        let w = WorkerState::new(0, &steps, vec![0.0], vec![0.0]).unwrap();
        let (delta, x) =
            rpg_worker_round(&w, &[0.0], 2, &unit_quadratic(1.0), &Regularizer::Zero).unwrap();
        assert_eq!(delta, vec![0.5]);
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn rpg_single_pass_is_plain_gradient_adjustment() {
        let steps = configure_steps(&[0.4, 0.9, 0.5]).unwrap();
        let term = SmoothTerm::centered(vec![2.0, -1.0]).unwrap();
        let mut w = WorkerState::new(1, &steps, vec![0.3, 0.1], vec![0.0; 2]).unwrap();
        w.x = vec![0.3, 0.1];
        let x_bar = [1.5, -0.5];
        let (delta, x_new) = rpg_worker_round(&w, &x_bar, 1, &term, &Regularizer::Zero).unwrap();
        let g = term.gradient(&x_bar).unwrap();
        for j in 0..2 {
            let plus = x_bar[j] - w.gamma * g[j];
            assert_relative_eq!(x_new[j], plus, epsilon = 1e-15);
            assert_relative_eq!(delta[j], w.pi * (plus - w.x[j]), epsilon = 1e-15);
        }
    }

    #[test]
    fn rpg_round_rejects_bad_input() {
        let steps = configure_steps(&[1.0]).unwrap();
        let w = WorkerState::new(0, &steps, vec![0.0], vec![0.0]).unwrap();
        let t = unit_quadratic(1.0);
        assert!(rpg_worker_round(&w, &[0.0], 0, &t, &Regularizer::Zero).is_err());
        assert!(rpg_worker_round(&w, &[0.0, 1.0], 1, &t, &Regularizer::Zero).is_err());
    }

    #[test]
    fn rpg_round_fixed_point() {
        // f_1 = (x-1)^2/2, f_2 = (x+3)^2/2, g = 0.5|x|
        let p = CompositeProblem::new(
            vec![unit_quadratic(1.0), unit_quadratic(-3.0)],
            Regularizer::l1(0.5).unwrap(),
        )
        .unwrap();
        // x* solves 0 in x + 1 + 0.5 sign(x) -> x* = -0.5
        let x_star = [-0.5];
        let steps = configure_steps(&[1.0, 0.5]).unwrap();
        let shifted: Vec<Vec<f64>> = (0..2)
            .map(|i| {
                let g = p.terms()[i].gradient(&x_star).unwrap();
                vec![x_star[0] - steps.gammas()[i] * g[0]]
            })
            .collect();
        let x_bar: f64 = (0..2).map(|i| steps.pis()[i] * shifted[i][0]).sum();
        for i in 0..2 {
            let mut w = WorkerState::new(i, &steps, shifted[i].clone(), vec![x_bar]).unwrap();
            for reps in [1, 3, 7] {
                let (d, x) = rpg_worker_round(&w, &[x_bar], reps, &p.terms()[i], &p.reg()).unwrap();
                assert!(d[0].abs() <= 1e-15);
                assert!((x[0] - shifted[i][0]).abs() <= 1e-15);
            }
            w.round(2, &p.terms()[i], &p.reg()).unwrap();
        }
        let m = MasterState::new(vec![x_bar], steps);
        assert_relative_eq!(m.output(&p.reg()).unwrap()[0], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn master_apply_and_output() {
        let steps = configure_steps(&[1.0]).unwrap();
        let mut m = MasterState::new(vec![0.2], steps);
        m.apply(&AdjustmentMsg {
            worker: 0,
            delta: vec![0.1],
        })
        .unwrap();
        assert_relative_eq!(m.x_bar()[0], 0.3, epsilon = 1e-16);
        assert_eq!(m.k(), 1);
        m.apply(&AdjustmentMsg {
            worker: 0,
            delta: vec![0.0],
        })
        .unwrap();
        assert_relative_eq!(m.x_bar()[0], 0.3, epsilon = 1e-16);
        assert_eq!(m.k(), 2);
        assert!(m
            .apply(&AdjustmentMsg {
                worker: 0,
                delta: vec![0.0, 1.0]
            })
            .is_err());
        assert!(m
            .apply(&AdjustmentMsg {
                worker: 3,
                delta: vec![0.0]
            })
            .is_err());
        assert_eq!(m.output(&Regularizer::Zero).unwrap(), m.x_bar());

        let steps = configure_steps(&[0.5]).unwrap();
        let m = MasterState::new(vec![0.4], steps);
        assert_eq!(m.output(&Regularizer::l1(1.0).unwrap()).unwrap(), vec![0.0]);
    }

    #[test]
    fn piag_stepsize_examples() {
        assert_relative_eq!(
            piag_stepsize(0.0, 1.0, 0).unwrap(),
            1.0 / 3.0,
            max_relative = 1e-15
        );
        for mu in [0.1, 1.0, 3.0] {
            let l = 4.0;
            assert_eq!(
                piag_stepsize(mu, l, 0).unwrap(),
                16.0 / mu * (mu / (48.0 * l))
            );
            assert_relative_eq!(
                piag_stepsize(mu, l, 0).unwrap(),
                1.0 / (3.0 * l),
                max_relative = 1e-15
            );
        }
        // (16)[(49/48)^{1/10} - 1] = 0.033024895313860821063953712045794564707689
        let oracle = 0.033_024_895_313_860_82;
        assert_relative_eq!(
            piag_stepsize(1.0, 1.0, 9).unwrap(),
            oracle,
            max_relative = 1e-12
        );
        assert!(piag_stepsize(1.0, 0.0, 3).is_err());
        assert!(piag_stepsize(-1.0, 1.0, 3).is_err());
    }

    #[test]
    fn piag_step_examples() {
        let p = CompositeProblem::new(
            vec![unit_quadratic(1.0), unit_quadratic(3.0)],
            Regularizer::Zero,
        )
        .unwrap();
        let x = vec![0.5];
        let mut s = PiagState::new(x.clone(), 2, 0.25).unwrap();
        s.warm_up(&p).unwrap();
        let fresh = p.terms()[0].gradient(&x).unwrap();
        s.step(0, fresh, &p.reg()).unwrap();
        let g = p.smooth_gradient(&x).unwrap();
        assert_relative_eq!(s.x()[0], x[0] - 0.25 * g[0], epsilon = 1e-15);

        // fixed point
        let mut s = PiagState::new(vec![2.0], 2, 0.25).unwrap();
        s.warm_up(&p).unwrap();
        s.step(1, p.terms()[1].gradient(&[2.0]).unwrap(), &p.reg())
            .unwrap();
        assert_eq!(s.x(), &[2.0]);

        // hand-set delayed entries: table (-1.5, 4.0) after replacing worker 1
        let mut s = PiagState::new(vec![0.0], 2, 0.5).unwrap();
        s.set_entry(0, vec![-1.5]).unwrap();
        s.step(1, vec![4.0], &p.reg()).unwrap();
        // 0 - 0.5/2 * 2.5 = -0.625
        assert_eq!(s.x(), &[-0.625]);
    }

    #[test]
    fn piag_step_requires_warm_table() {
        let mut s = PiagState::new(vec![0.0], 2, 0.5).unwrap();
        assert!(matches!(
            s.step(0, vec![1.0], &Regularizer::Zero),
            Err(Error::UninitializedTable(1))
        ));
    }

    #[test]
    fn sync_round_examples() {
        let p = CompositeProblem::new(
            vec![unit_quadratic(1.0), unit_quadratic(3.0)],
            Regularizer::Zero,
        )
        .unwrap();
        let s = configure_steps(&[0.5, 0.5]).unwrap();
        let x = [0.0];
        let g = p.smooth_gradient(&x).unwrap();
        assert_relative_eq!(
            sync_pg_round(&p, &x, &s).unwrap()[0],
            -0.5 * g[0],
            epsilon = 1e-15
        );
        assert_eq!(sync_pg_round(&p, &[2.0], &s).unwrap(), vec![2.0]);

        // gammas (1, 0.5): pis (1/3, 2/3); x=0 -> 1/3 * 1 + 2/3 * 1.5 = 4/3
        let s = configure_steps(&[1.0, 0.5]).unwrap();
        assert_relative_eq!(
            sync_pg_round(&p, &x, &s).unwrap()[0],
            4.0 / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn dave_matches_piag_for_single_worker() {
        let term = SmoothTerm::quadratic(
            nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            vec![1.0, -2.0],
        )
        .unwrap();
        let p = CompositeProblem::new(vec![term], Regularizer::Zero).unwrap();
        let gamma = 0.3;
        let steps = configure_steps(&[gamma]).unwrap();
        let mut master = MasterState::new(vec![5.0, 5.0], steps.clone());
        let mut worker = WorkerState::new(0, &steps, vec![5.0, 5.0], vec![5.0, 5.0]).unwrap();
        let mut piag = PiagState::new(vec![5.0, 5.0], 1, gamma).unwrap();
        piag.warm_up(&p).unwrap();
        for _ in 0..100 {
            worker.last_received = master.x_bar().to_vec();
            let msg = worker.round(1, &p.terms()[0], &p.reg()).unwrap();
            master.apply(&msg).unwrap();
            let g = p.terms()[0].gradient(piag.x()).unwrap();
            piag.step(0, g, &p.reg()).unwrap();
            let out = master.output(&p.reg()).unwrap();
            assert!(linalg::dist(&out, piag.x()) <= 1e-13 * (1.0 + linalg::norm(piag.x())));
        }
    }

    #[test]
    fn repetition_policy_validation() {
        assert!(RepetitionPolicy::Fixed(0).validate(2).is_err());
        assert!(RepetitionPolicy::PerWorker(vec![1, 2]).validate(3).is_err());
        assert!(RepetitionPolicy::PerWorker(vec![1, 0]).validate(2).is_err());
        assert!(RepetitionPolicy::Budgeted { budget: 0.0 }
            .validate(1)
            .is_err());
        assert_eq!(RepetitionPolicy::PerWorker(vec![1, 4]).fixed(1), Some(4));
        assert_eq!(RepetitionPolicy::Budgeted { budget: 1.0 }.fixed(0), None);
    }
}
