//! Reference solutions, measured convergence series and the theoretical
//! envelopes they are checked against.

use crate::algorithm::{sync_pg_round, weighted_local_sum, StepConfig};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;
use crate::problem::CompositeProblem;
use crate::simulator::{Algorithm, DelayTable, EpochSequence, Trace};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 2_000_000;
const POLISH_ITERS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// `sum_i pi_i x_i*`
    pub x_bar_star: Vec<f64>,
    /// `x_i* = x* - gamma_i grad f_i(x*)`
    pub shifted: Vec<Vec<f64>>,
    pub residual: f64,
    pub iterations: usize,
    pub steps: StepConfig,
}

/// Runs synchronous proximal gradient from zero until the minimum-norm
/// subgradient is below `tol`, then keeps iterating while the iterate still
/// moves so that `x*` is a fixed point of the round to the last bit.
pub fn reference_solution(
    problem: &CompositeProblem,
    steps: &StepConfig,
    tol: f64,
    max_iters: usize,
) -> Result<ReferenceSolution> {
    check_dim(problem.workers(), steps.workers())?;
    let mut x = vec![0.0; problem.dim()];
    let mut iterations = 0;
    let mut residual = problem.residual_norm(&x)?;
    while residual > tol {
        if iterations >= max_iters {
            return Err(Error::IterationCap {
                cap: max_iters,
                residual,
            });
        }
        x = sync_pg_round(problem, &x, steps)?;
        iterations += 1;
        residual = problem.residual_norm(&x)?;
    }
    for _ in 0..POLISH_ITERS {
        let next = sync_pg_round(problem, &x, steps)?;
        if next == x {
            break;
        }
        let next_res = problem.residual_norm(&next)?;
        if next_res > residual {
            break;
        }
        x = next;
        residual = next_res;
        iterations += 1;
    }
    assemble(problem, steps, x, residual, iterations)
}

fn assemble(
    problem: &CompositeProblem,
    steps: &StepConfig,
    x_star: Vec<f64>,
    residual: f64,
    iterations: usize,
) -> Result<ReferenceSolution> {
    let mut shifted = Vec::with_capacity(problem.workers());
    for (i, t) in problem.terms().iter().enumerate() {
        let g = t.gradient(&x_star)?;
        let gamma = steps.gammas()[i];
        shifted.push(
            x_star
                .iter()
                .zip(&g)
                .map(|(x, g)| x - gamma * g)
                .collect::<Vec<_>>(),
        );
    }
    Ok(ReferenceSolution {
        f_star: problem.evaluate(&x_star)?,
        x_bar_star: weighted_local_sum(problem, &x_star, steps)?,
        x_star,
        shifted,
        residual,
        iterations,
        steps: steps.clone(),
    })
}

/// `max_i |x_i^0 - x_i*|^2`
pub fn initial_spread(init: &[Vec<f64>], shifted: &[Vec<f64>]) -> Result<f64> {
    check_dim(shifted.len(), init.len())?;
    let mut worst: f64 = 0.0;
    for (a, b) in init.iter().zip(shifted) {
        check_dim(b.len(), a.len())?;
        worst = worst.max(linalg::dist_sq(a, b));
    }
    Ok(worst)
}

/// `rho = min_i gamma_i mu_i`, requiring every `mu_i > 0` and
/// `gamma_i <= 2/(mu_i + L_i)`.
pub fn strong_rate(problem: &CompositeProblem, steps: &StepConfig) -> Result<f64> {
    check_dim(problem.workers(), steps.workers())?;
    let mut rho = f64::INFINITY;
    for (t, &g) in problem.terms().iter().zip(steps.gammas()) {
        if t.mu() <= 0.0 {
            return Err(invalid("linear envelope needs every mu_i > 0"));
        }
        if g > 2.0 / (t.mu() + t.lipschitz()) * (1.0 + 1e-12) {
            return Err(invalid(format!("stepsize {g} above 2/(mu+L)")));
        }
        rho = rho.min(g * t.mu());
    }
    Ok(rho)
}

/// `(1 - rho)^{2m} max_i |x_i^0 - x_i*|^2`
pub fn strong_rate_envelope(
    problem: &CompositeProblem,
    steps: &StepConfig,
    init: &[Vec<f64>],
    shifted: &[Vec<f64>],
    m: usize,
) -> Result<f64> {
    let rho = strong_rate(problem, steps)?;
    Ok((1.0 - rho).powi(2 * m as i32) * initial_spread(init, shifted)?)
}

/// `r(p) = 1 - gamma mu sum_{q=1}^{p-1} (1 - gamma mu)^{q-1} pi^q`
pub fn repetition_factor(gamma_mu: f64, pi: f64, p: usize) -> Result<f64> {
    check_factor_args(gamma_mu, pi)?;
    if p == 0 {
        return Err(invalid("repetitions must be at least 1"));
    }
    let mut sum = 0.0;
    let mut term = pi;
    for _ in 1..p {
        sum += term;
        term *= (1.0 - gamma_mu) * pi;
    }
    Ok(1.0 - gamma_mu * sum)
}

/// `r(inf) = 1 - gamma mu pi / (1 - (1 - gamma mu) pi)`
pub fn repetition_factor_limit(gamma_mu: f64, pi: f64) -> Result<f64> {
    check_factor_args(gamma_mu, pi)?;
    let denom = 1.0 - (1.0 - gamma_mu) * pi;
    if denom <= 0.0 {
        return Err(invalid("limit undefined for gamma mu = 0 and pi = 1"));
    }
    Ok(1.0 - gamma_mu * pi / denom)
}

fn check_factor_args(gamma_mu: f64, pi: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma_mu) {
        return Err(invalid(format!(
            "gamma mu must lie in [0, 1], got {gamma_mu}"
        )));
    }
    if !(pi > 0.0 && pi <= 1.0) {
        return Err(invalid(format!("pi must lie in (0, 1], got {pi}")));
    }
    Ok(())
}

/// Per-epoch factors `alpha_l = max_i (1 - gamma_i mu_i)^2 r_i(p_i)^2`, with
/// `p_i` the fewest passes worker `i` made in epoch `l` (one if it made
/// none).
pub fn epoch_alphas(
    problem: &CompositeProblem,
    trace: &Trace,
    epochs: &EpochSequence,
) -> Result<Vec<f64>> {
    let m = problem.workers();
    check_dim(m, trace.workers)?;
    let mut fewest: Vec<Vec<Option<usize>>> = vec![vec![None; m]; epochs.len()];
    for (t, r) in trace.records.iter().enumerate() {
        let slot = &mut fewest[epochs.epoch_of(t)][r.worker];
        *slot = Some(slot.map_or(r.reps, |p| p.min(r.reps)));
    }
    let steps = &trace.steps;
    fewest
        .iter()
        .map(|ps| {
            let mut alpha: f64 = 0.0;
            for (i, p) in ps.iter().enumerate() {
                let gm = steps.gammas()[i] * problem.terms()[i].mu();
                let r = repetition_factor(gm.min(1.0), steps.pis()[i], p.unwrap_or(1))?;
                alpha = alpha.max((1.0 - gm).powi(2) * r * r);
            }
            Ok(alpha)
        })
        .collect()
}

/// `prod_{l=1}^m alpha_l * spread`
pub fn tight_envelope(alphas: &[f64], m: usize, spread: f64) -> f64 {
    alphas.iter().skip(1).take(m).product::<f64>() * spread
}

/// `(2 sqrt 2 / sqrt m) max_i |x_i^0 - x_i*| / min_j gamma_j sqrt(2 - gamma_j L_j)`
pub fn sublinear_residual_bound(
    m: usize,
    init: &[Vec<f64>],
    shifted: &[Vec<f64>],
    gammas: &[f64],
    lipschitz: &[f64],
) -> Result<f64> {
    if m == 0 {
        return Err(invalid("epoch index must be at least 1"));
    }
    check_dim(gammas.len(), lipschitz.len())?;
    if gammas.is_empty() {
        return Err(invalid("need at least one stepsize"));
    }
    let mut denom = f64::INFINITY;
    for (&g, &l) in gammas.iter().zip(lipschitz) {
        if !(g > 0.0 && g * l < 2.0) {
            return Err(invalid(format!(
                "stepsize {g} outside (0, 2/L) for L = {l}"
            )));
        }
        denom = denom.min(g * (2.0 - g * l).sqrt());
    }
    let spread = initial_spread(init, shifted)?.sqrt();
    Ok(2.0 * std::f64::consts::SQRT_2 / (m as f64).sqrt() * spread / denom)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DelayBound {
    Uniform(f64),
    Average(f64),
}

/// Per-epoch gap bound and the slope `c` of `k_m <= c m`.
pub fn epoch_iteration_bound(workers: usize, bound: DelayBound) -> Result<(f64, f64)> {
    if workers == 0 {
        return Err(invalid("need at least one worker"));
    }
    let m = workers as f64;
    match bound {
        DelayBound::Uniform(d) => {
            if d < m {
                return Err(invalid(format!("uniform delay bound {d} below M = {m}")));
            }
            let tau = d - m;
            Ok((2.0 * d + 1.0, 2.0 * m + 2.0 * tau + 1.0))
        }
        DelayBound::Average(d_bar) => {
            let floor = (m - 1.0) / 2.0;
            if d_bar < floor {
                return Err(invalid(format!(
                    "average delay bound {d_bar} below (M-1)/2 = {floor}"
                )));
            }
            let tau = d_bar - floor;
            Ok((
                2.0 * m * (2.0 * d_bar - m + 3.0) - 3.0,
                4.0 * m * (tau + 1.0),
            ))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRow {
    pub k: usize,
    pub time: f64,
    /// `None` for the initial state.
    pub worker: Option<usize>,
    pub reps: usize,
    pub epoch: usize,
    pub d_max: usize,
    pub distance_sq: f64,
    pub suboptimality: f64,
    pub residual: f64,
    pub best_residual: f64,
    /// Larger of the squared distances of `x_bar^k` and of the average
    /// without the updating worker; DAve-RPG traces only.
    pub a: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRow {
    pub m: usize,
    /// First exchange number `k` in the epoch.
    pub first_k: usize,
    pub b: Option<f64>,
    pub max_distance_sq: f64,
    pub best_residual: f64,
    pub thm32: Option<f64>,
    pub cor33: Option<f64>,
    pub thm36: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<IterationRow>,
    pub epochs: Vec<EpochRow>,
    pub boundaries: Vec<usize>,
}

impl ConvergenceReport {
    /// Envelopes attached to the epoch of iteration row `k`.
    pub fn epoch_row(&self, k: usize) -> &EpochRow {
        &self.epochs[self.rows[k].epoch]
    }

    /// First `k` with `|x^k - x*| <= eps`.
    pub fn first_within(&self, eps: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.distance_sq.sqrt() <= eps)
            .map(|r| r.k)
    }
}

/// Epoch of iteration `k`; the initial state belongs to epoch 0.
pub fn epoch_of_iteration(epochs: &EpochSequence, k: usize) -> usize {
    if k == 0 {
        0
    } else {
        epochs.epoch_of(k - 1)
    }
}

/// Epoch boundaries for a trace: synchronous rounds are one epoch each.
pub fn trace_epochs(trace: &Trace, delays: &DelayTable) -> EpochSequence {
    match trace.algorithm {
        Algorithm::SyncPg => EpochSequence {
            boundaries: (0..trace.len().max(1)).collect(),
        },
        _ => crate::simulator::epoch_sequence(delays),
    }
}

pub fn report(
    problem: &CompositeProblem,
    trace: &Trace,
    reference: &ReferenceSolution,
) -> Result<ConvergenceReport> {
    check_dim(problem.workers(), trace.workers)?;
    check_dim(problem.dim(), trace.dim)?;
    if !trace.keeps_snapshots() || trace.records.iter().any(|r| r.snapshot.is_none()) {
        return Err(Error::MissingSnapshots);
    }
    let dave = trace.algorithm == Algorithm::DaveRpg;
    if dave && reference.steps != trace.steps {
        return Err(invalid(
            "reference solution was computed with different stepsizes",
        ));
    }
    let reg = problem.reg();
    let delays = trace.delays()?;
    let epochs = trace_epochs(trace, &delays);
    let pis = trace.steps.pis();

    let mut rows = Vec::with_capacity(trace.len() + 1);
    let mut best = f64::INFINITY;
    let mut d = vec![0usize; trace.workers];
    let mut locals = trace.initial_locals.clone();
    for k in 0..=trace.len() {
        let x = trace.iterate_at(k, &reg)?;
        let residual = problem.residual_norm(&x)?;
        best = best.min(residual);
        let record = (k > 0).then(|| &trace.records[k - 1]);
        if let Some(r) = record {
            d.iter_mut().for_each(|v| *v += 1);
            d[r.worker] = 0;
            if let Some(s) = &r.snapshot {
                locals[r.worker].clone_from(&s.local);
            }
        }
        let a = if dave {
            let master = trace.master_at(k)?;
            let full = linalg::dist_sq(master, &reference.x_bar_star);
            let leave_out = |i: usize| {
                if pis[i] >= 1.0 {
                    return 0.0;
                }
                let c = 1.0 / (1.0 - pis[i]);
                (0..master.len())
                    .map(|j| {
                        let v = c * (master[j] - pis[i] * locals[i][j]);
                        let s = c * (reference.x_bar_star[j] - pis[i] * reference.shifted[i][j]);
                        (v - s) * (v - s)
                    })
                    .sum::<f64>()
            };
            let other = match record {
                Some(r) => leave_out(r.worker),
                None => (0..trace.workers).map(leave_out).fold(0.0, f64::max),
            };
            Some(full.max(other))
        } else {
            None
        };
        rows.push(IterationRow {
            k,
            time: record.map_or(0.0, |r| r.time),
            worker: record.map(|r| r.worker),
            reps: record.map_or(0, |r| r.reps),
            epoch: epoch_of_iteration(&epochs, k),
            d_max: if k == 0 {
                0
            } else {
                *d.iter().max().unwrap_or(&0)
            },
            distance_sq: linalg::dist_sq(&x, &reference.x_star),
            suboptimality: problem.evaluate(&x)? - reference.f_star,
            residual,
            best_residual: best,
            a,
        });
    }

    let n_epochs = rows.last().map_or(1, |r| r.epoch + 1);
    let spread = initial_spread(&trace.initial_locals, &reference.shifted)?;
    let thm32_rate = if dave {
        strong_rate(problem, &trace.steps).ok()
    } else {
        None
    };
    let alphas = if dave && thm32_rate.is_some() {
        Some(epoch_alphas(problem, trace, &epochs)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(n_epochs);
    for m in 0..n_epochs {
        let in_epoch = rows.iter().filter(|r| r.epoch == m);
        let mut b: Option<f64> = None;
        let mut max_distance_sq: f64 = 0.0;
        let mut best_residual = f64::INFINITY;
        let mut first_k = usize::MAX;
        for r in in_epoch {
            first_k = first_k.min(r.k);
            max_distance_sq = max_distance_sq.max(r.distance_sq);
            best_residual = best_residual.min(r.best_residual);
            if let Some(a) = r.a {
                b = Some(b.map_or(a, |v| v.max(a)));
            }
        }
        let thm36 = if dave && m >= 1 {
            sublinear_residual_bound(
                m,
                &trace.initial_locals,
                &reference.shifted,
                trace.steps.gammas(),
                &problem.lipschitz_constants(),
            )
            .ok()
        } else {
            None
        };
        out.push(EpochRow {
            m,
            first_k,
            b,
            max_distance_sq,
            best_residual,
            thm32: thm32_rate.map(|rho| (1.0 - rho).powi(2 * m as i32) * spread),
            cor33: alphas.as_ref().map(|al| tight_envelope(al, m, spread)),
            thm36,
        });
    }
    Ok(ConvergenceReport {
        rows,
        epochs: out,
        boundaries: epochs.boundaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::configure_steps;
    use crate::problem::{Regularizer, SmoothTerm};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::{prop_assert, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(c: f64, reg: Regularizer) -> CompositeProblem {
        CompositeProblem::new(vec![SmoothTerm::centered(vec![c]).unwrap()], reg).unwrap()
    }

    #[test]
    fn reference_examples() {
        let p = single(1.0, Regularizer::Zero);
        let s = StepConfig::default_for(&p).unwrap();
        let r = reference_solution(&p, &s, DEFAULT_TOL, 1000).unwrap();
        assert_relative_eq!(r.x_star[0], 1.0, epsilon = 1e-12);
        assert!(r.f_star.abs() <= 1e-20);

        let p = single(0.0, Regularizer::l1(1.0).unwrap());
        let r = reference_solution(&p, &StepConfig::default_for(&p).unwrap(), DEFAULT_TOL, 1000)
            .unwrap();
        assert_eq!(r.x_star, vec![0.0]);
    }

    #[test]
    fn reference_reports_iteration_cap() {
        let p = single(1.0, Regularizer::Zero);
        let s = configure_steps(&[1e-3]).unwrap();
        assert!(matches!(
            reference_solution(&p, &s, DEFAULT_TOL, 10),
            Err(Error::IterationCap { cap: 10, .. })
        ));
    }

    #[test]
    fn reference_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 6;
        let mut terms = Vec::new();
        let mut h_sum = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for _ in 0..4 {
            let b = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
            let h = &b * b.transpose() + DMatrix::identity(n, n) * 0.5;
            let c = DVector::from_fn(n, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            h_sum += &h;
            rhs += &h * &c;
            terms.push(SmoothTerm::quadratic(h, c.as_slice().to_vec()).unwrap());
        }
        let p = CompositeProblem::new(terms, Regularizer::Zero).unwrap();
        let r = reference_solution(
            &p,
            &StepConfig::default_for(&p).unwrap(),
            DEFAULT_TOL,
            DEFAULT_MAX_ITERS,
        )
        .unwrap();
        let exact = h_sum.lu().solve(&rhs).unwrap();
        assert!(linalg::dist(&r.x_star, exact.as_slice()) <= 1e-9);
        assert!(p.residual_norm(&r.x_star).unwrap() <= 1e-9);
        // prox of the aggregate recovers x*
        let back = p.reg().prox(&r.x_bar_star, r.steps.gamma_bar()).unwrap();
        assert!(linalg::dist(&back, &r.x_star) <= 1e-10);
    }

    #[test]
    fn reference_lasso_is_a_fixed_point() {
        let terms = (0..3)
            .map(|i| SmoothTerm::centered(vec![i as f64 - 1.0, 2.0 * i as f64, 0.1]).unwrap())
            .collect();
        let p = CompositeProblem::new(terms, Regularizer::l1(0.5).unwrap()).unwrap();
        let s = configure_steps(&[0.5, 1.0, 1.5]).unwrap();
        let r = reference_solution(&p, &s, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert!(p.residual_norm(&r.x_star).unwrap() <= 1e-9);
        assert_eq!(
            p.reg().prox(&r.x_bar_star, s.gamma_bar()).unwrap(),
            r.x_star
        );
    }

    #[test]
    fn envelope_examples() {
        let t = SmoothTerm::quadratic(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0])),
            vec![0.0, 0.0],
        )
        .unwrap();
        let p = CompositeProblem::new(vec![t.clone(), t], Regularizer::Zero).unwrap();
        let s = StepConfig::default_for(&p).unwrap();
        let init = vec![vec![1.0, 2.0], vec![-1.0, 0.0]];
        let shifted = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert_eq!(
            strong_rate_envelope(&p, &s, &init, &shifted, 0).unwrap(),
            5.0
        );
        // 1 - 2/(1 + L/mu) with L/mu = 3
        let factor = (1.0 - 2.0 / (1.0 + 3.0f64)).powi(2);
        assert_relative_eq!(
            strong_rate_envelope(&p, &s, &init, &shifted, 1).unwrap(),
            5.0 * factor,
            max_relative = 1e-14
        );

        let flat = single(0.0, Regularizer::Zero);
        let lin = CompositeProblem::new(
            vec![SmoothTerm::with_constants(flat.terms()[0].kind().clone(), 0.0, 1.0).unwrap()],
            Regularizer::Zero,
        )
        .unwrap();
        assert!(strong_rate_envelope(
            &lin,
            &configure_steps(&[1.0]).unwrap(),
            &[vec![0.0]],
            &[vec![0.0]],
            1
        )
        .is_err());
    }

    #[test]
    fn repetition_factor_examples() {
        assert_eq!(repetition_factor(0.3, 0.4, 1).unwrap(), 1.0);
        assert_relative_eq!(
            repetition_factor(0.3, 0.4, 2).unwrap(),
            1.0 - 0.3 * 0.4,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            repetition_factor_limit(0.5, 0.5).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert!(repetition_factor(1.5, 0.5, 2).is_err());
        assert!(repetition_factor(0.5, 0.0, 2).is_err());
        assert!(repetition_factor(0.5, 0.5, 0).is_err());
        assert!(repetition_factor_limit(0.0, 1.0).is_err());
    }

    #[test]
    fn repetition_factor_closed_form() {
        // 1 - gm pi (1 - ((1-gm) pi)^{p-1}) / (1 - (1-gm) pi)
        for &(gm, pi) in &[(0.2, 0.3), (0.9, 0.5), (0.5, 0.99)] {
            for p in 1..20 {
                let beta: f64 = (1.0 - gm) * pi;
                let closed = 1.0 - gm * pi * (1.0 - beta.powi(p as i32 - 1)) / (1.0 - beta);
                assert_relative_eq!(
                    repetition_factor(gm, pi, p).unwrap(),
                    closed,
                    epsilon = 1e-14
                );
            }
        }
    }

    proptest! {
        #[test]
        fn repetition_factor_is_monotone(gm in 0.001f64..0.999, pi in 0.001f64..0.999) {
            let limit = repetition_factor_limit(gm, pi).unwrap();
            let mut prev = repetition_factor(gm, pi, 1).unwrap();
            for p in 2..40 {
                let r = repetition_factor(gm, pi, p).unwrap();
                prop_assert!(r <= prev + 1e-15);
                prop_assert!(r >= limit - 1e-12);
                prev = r;
            }
        }
    }

    #[test]
    fn sublinear_bound_examples() {
        let init = vec![vec![3.0, 4.0], vec![0.0, 0.0]];
        let shifted = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let l = 2.0;
        let b1 = sublinear_residual_bound(1, &init, &shifted, &[1.0 / l; 2], &[l; 2]).unwrap();
        let b4 = sublinear_residual_bound(4, &init, &shifted, &[1.0 / l; 2], &[l; 2]).unwrap();
        assert_relative_eq!(b4, b1 / 2.0, max_relative = 1e-15);
        assert_relative_eq!(
            b1,
            2.0 * std::f64::consts::SQRT_2 * l * 5.0,
            max_relative = 1e-15
        );
        assert!(sublinear_residual_bound(1, &init, &shifted, &[1.0, 1.0], &[2.0, 2.0]).is_err());
        assert!(sublinear_residual_bound(0, &init, &shifted, &[0.5; 2], &[l; 2]).is_err());
    }

    #[test]
    fn sublinear_bound_high_precision() {
        // frozen from 50-digit evaluation
        let init = vec![
            vec![1.5, -2.0, 0.25],
            vec![-0.75, 3.0, 1.0],
            vec![0.0, 0.5, -1.25],
        ];
        let shifted = vec![
            vec![0.1, 0.2, 0.3],
            vec![-0.4, 0.5, -0.6],
            vec![0.7, -0.8, 0.9],
        ];
        let gammas = [0.3, 0.45, 0.7];
        let ls = [3.0, 2.5, 1.9];
        let b = sublinear_residual_bound(7, &init, &shifted, &gammas, &ls).unwrap();
        assert_relative_eq!(b, SUBLINEAR_ORACLE, max_relative = 1e-12);
    }

    const SUBLINEAR_ORACLE: f64 = 10.154_648_350_232_671;

    #[test]
    fn epoch_iteration_bound_examples() {
        for m in 2..10 {
            let (gap, slope) = epoch_iteration_bound(m, DelayBound::Uniform(m as f64)).unwrap();
            assert_eq!(gap, 2.0 * m as f64 + 1.0);
            assert_eq!(slope, 2.0 * m as f64 + 1.0);
            let (gap, slope) =
                epoch_iteration_bound(m, DelayBound::Average((m as f64 - 1.0) / 2.0)).unwrap();
            assert_eq!(slope, 4.0 * m as f64);
            assert!(gap <= slope);
        }
        assert!(epoch_iteration_bound(4, DelayBound::Uniform(3.0)).is_err());
        assert!(epoch_iteration_bound(4, DelayBound::Average(1.0)).is_err());
    }
}
