//! Composite objectives `F(x) = (1/M) sum_i f_i(x) + g(x)`.
//!
//! Each smooth term carries its strong-convexity constant `mu` and smoothness
//! constant `L`, both used by the stepsize rules and the convergence
//! envelopes. Terms are immutable after construction so the oracles can be
//! shared across threads.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{self, CsrMatrix};

const POWER_ITERS: usize = 200;
const POWER_RTOL: f64 = 1e-8;
const POWER_INFLATION: f64 = 1.01;

#[derive(Clone, Debug)]
pub enum SmoothKind {
    /// `f(x) = (x - c)^T H (x - c) / 2`
    Quadratic {
        hessian: DMatrix<f64>,
        center: Vec<f64>,
    },
    /// `f(x) = sum_j log(1 + exp(-b_j a_j^T x)) + lambda2/2 |x|^2`
    Logistic {
        design: CsrMatrix,
        labels: Vec<f64>,
        lambda2: f64,
    },
}

#[derive(Clone, Debug)]
pub struct SmoothTerm {
    kind: SmoothKind,
    mu: f64,
    lipschitz: f64,
    dim: usize,
}

impl SmoothTerm {
    /// Quadratic term with exact constants taken from the Hessian spectrum.
    pub fn quadratic(hessian: DMatrix<f64>, center: Vec<f64>) -> Result<Self> {
        let dim = center.len();
        if hessian.nrows() != dim || hessian.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: hessian.nrows(),
            });
        }
        let kind = SmoothKind::Quadratic { hessian, center };
        let (mu, lipschitz) = estimate_constants(&kind)?;
        Self::with_constants(kind, mu, lipschitz)
    }

    /// `f(x) = |x - c|^2 / 2`
    pub fn centered(center: Vec<f64>) -> Result<Self> {
        let n = center.len();
        Self::quadratic(DMatrix::identity(n, n), center)
    }

    /// Logistic loss with ridge; `mu = lambda2`, `L` from power iteration.
    pub fn logistic(design: CsrMatrix, labels: Vec<f64>, lambda2: f64) -> Result<Self> {
        check_dim(design.n_rows(), labels.len())?;
        if !(lambda2 >= 0.0 && lambda2.is_finite()) {
            return Err(invalid(format!(
                "lambda2 must be nonnegative, got {lambda2}"
            )));
        }
        if labels.iter().any(|&b| b != 1.0 && b != -1.0) {
            return Err(invalid("logistic labels must be -1 or +1"));
        }
        let kind = SmoothKind::Logistic {
            design,
            labels,
            lambda2,
        };
        let (mu, lipschitz) = estimate_constants(&kind)?;
        Self::with_constants(kind, mu, lipschitz)
    }

    /// Builds a term with caller-supplied constants.
    pub fn with_constants(kind: SmoothKind, mu: f64, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(invalid(format!("L must be positive, got {lipschitz}")));
        }
        if !(0.0..=lipschitz).contains(&mu) {
            return Err(invalid(format!(
                "need 0 <= mu <= L, got mu={mu}, L={lipschitz}"
            )));
        }
        let dim = match &kind {
            SmoothKind::Quadratic { center, .. } => center.len(),
            SmoothKind::Logistic { design, .. } => design.n_cols(),
        };
        Ok(Self {
            kind,
            mu,
            lipschitz,
            dim,
        })
    }

    pub fn kind(&self) -> &SmoothKind {
        &self.kind
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(match &self.kind {
            SmoothKind::Quadratic { hessian, center } => {
                let r = linalg::sub(x, center);
                let hr = hessian_mul(hessian, &r);
                0.5 * linalg::dot(&r, &hr)
            }
            SmoothKind::Logistic {
                design,
                labels,
                lambda2,
            } => {
                let loss: f64 = labels
                    .iter()
                    .enumerate()
                    .map(|(j, &b)| log1p_exp(-b * design.row_dot(j, x)))
                    .sum();
                loss + 0.5 * lambda2 * linalg::norm_sq(x)
            }
        })
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.gradient_into(x, &mut out)?;
        Ok(out)
    }

    /// Writes the gradient at `x` into `out`.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, out.len())?;
        match &self.kind {
            SmoothKind::Quadratic { hessian, center } => {
                let r = linalg::sub(x, center);
                out.copy_from_slice(&hessian_mul(hessian, &r));
            }
            SmoothKind::Logistic {
                design,
                labels,
                lambda2,
            } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = lambda2 * xi;
                }
                for (j, &b) in labels.iter().enumerate() {
                    let t = b * design.row_dot(j, x);
                    // d/dt log(1 + exp(-t)) = -sigmoid(-t)
                    design.add_row(j, -b * sigmoid(-t), out);
                }
            }
        }
        Ok(())
    }
}

fn hessian_mul(h: &DMatrix<f64>, r: &[f64]) -> Vec<f64> {
    let n = r.len();
    let mut out = vec![0.0; n];
    for (j, &rj) in r.iter().enumerate() {
        if rj == 0.0 {
            continue;
        }
        let col = h.column(j);
        for i in 0..n {
            out[i] += col[i] * rj;
        }
    }
    out
}

/// `log(1 + exp(t))` without overflow.
pub(crate) fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Returns `(mu, L)` for a term's data.
///
/// Quadratics use the exact extreme eigenvalues of the Hessian. Logistic terms
/// use `mu = lambda2` and `L = lambda2 + 1.01 * lambda_max(A^T A) / 4`, with
/// `lambda_max` from power iteration.
pub fn estimate_constants(kind: &SmoothKind) -> Result<(f64, f64)> {
    match kind {
        SmoothKind::Quadratic { hessian, .. } => {
            if hessian.nrows() == 0 {
                return Err(Error::EmptyData("quadratic term has dimension 0".into()));
            }
            let sym = (hessian + hessian.transpose()) * 0.5;
            if (&sym - hessian).amax() > 1e-12 * (1.0 + hessian.amax()) {
                return Err(invalid("quadratic Hessian must be symmetric"));
            }
            let eig = SymmetricEigen::new(sym).eigenvalues;
            let lo = eig.min();
            let hi = eig.max();
            if lo < -1e-12 * hi.abs().max(1.0) {
                return Err(invalid(format!("Hessian is not PSD (min eigenvalue {lo})")));
            }
            Ok((lo.max(0.0), hi))
        }
        SmoothKind::Logistic {
            design, lambda2, ..
        } => {
            if design.n_rows() == 0 || design.n_cols() == 0 {
                return Err(Error::EmptyData("logistic term has no examples".into()));
            }
            let top = gram_top_eigenvalue(design);
            Ok((*lambda2, lambda2 + POWER_INFLATION * top / 4.0))
        }
    }
}

/// Power iteration on `A^T A`.
fn gram_top_eigenvalue(a: &CsrMatrix) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a3b);
    let mut v: Vec<f64> = (0..a.n_cols()).map(|_| rng.random::<f64>() + 0.5).collect();
    let nv = linalg::norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERS {
        let w = a.tmul_vec(&a.mul_vec(&v));
        let next = linalg::dot(&v, &w);
        let nw = linalg::norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let done = (next - estimate).abs() <= POWER_RTOL * next.abs();
        estimate = next;
        if done {
            break;
        }
    }
    // Rayleigh quotient at the final vector
    let w = a.tmul_vec(&a.mul_vec(&v));
    linalg::dot(&v, &w).max(estimate)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularizer {
    Zero,
    L1 { lambda1: f64 },
}

impl Regularizer {
    pub fn l1(lambda1: f64) -> Result<Self> {
        if !(lambda1 >= 0.0 && lambda1.is_finite()) {
            return Err(invalid(format!(
                "lambda1 must be nonnegative, got {lambda1}"
            )));
        }
        Ok(Regularizer::L1 { lambda1 })
    }

    pub fn lambda1(&self) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda1 } => *lambda1,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda1 } => lambda1 * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    /// `argmin_z g(z) + |z - v|^2 / (2 step)`
    pub fn prox(&self, v: &[f64], step: f64) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        self.prox_in_place(&mut out, step)?;
        Ok(out)
    }

    pub fn prox_in_place(&self, v: &mut [f64], step: f64) -> Result<()> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("prox step must be positive, got {step}")));
        }
        if let Regularizer::L1 { lambda1 } = self {
            let t = step * lambda1;
            for x in v.iter_mut() {
                *x = soft_threshold(*x, t);
            }
        }
        Ok(())
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

#[derive(Clone, Debug)]
pub struct CompositeProblem {
    terms: Vec<SmoothTerm>,
    reg: Regularizer,
}

impl CompositeProblem {
    pub fn new(terms: Vec<SmoothTerm>, reg: Regularizer) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::EmptyData("problem needs at least one smooth term".into()))?;
        let dim = first.dim();
        for t in &terms {
            check_dim(dim, t.dim())?;
        }
        Ok(Self { terms, reg })
    }

    pub fn terms(&self) -> &[SmoothTerm] {
        &self.terms
    }

    pub fn term(&self, i: usize) -> Result<&SmoothTerm> {
        self.terms.get(i).ok_or(Error::WorkerOutOfRange {
            id: i,
            workers: self.terms.len(),
        })
    }

    pub fn reg(&self) -> Regularizer {
        self.reg
    }

    pub fn workers(&self) -> usize {
        self.terms.len()
    }

    pub fn dim(&self) -> usize {
        self.terms[0].dim()
    }

    pub fn mus(&self) -> Vec<f64> {
        self.terms.iter().map(SmoothTerm::mu).collect()
    }

    pub fn lipschitz_constants(&self) -> Vec<f64> {
        self.terms.iter().map(SmoothTerm::lipschitz).collect()
    }

    /// `F(x) = (1/M) sum_i f_i(x) + g(x)`
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let mut s = 0.0;
        for t in &self.terms {
            s += t.value(x)?;
        }
        Ok(s / self.workers() as f64 + self.reg.value(x))
    }

    /// `(1/M) sum_i grad f_i(x)`
    pub fn smooth_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut acc = vec![0.0; self.dim()];
        let mut g = vec![0.0; self.dim()];
        for t in &self.terms {
            t.gradient_into(x, &mut g)?;
            linalg::axpy(1.0, &g, &mut acc);
        }
        let m = self.workers() as f64;
        acc.iter_mut().for_each(|v| *v /= m);
        Ok(acc)
    }

    /// Minimum-norm element of the subdifferential of `F` at `x`.
    pub fn min_norm_subgradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.smooth_gradient(x)?;
        if let Regularizer::L1 { lambda1 } = self.reg {
            for (gj, &xj) in g.iter_mut().zip(x) {
                *gj = if xj != 0.0 {
                    *gj + lambda1 * xj.signum()
                } else {
                    soft_threshold(*gj, lambda1)
                };
            }
        }
        Ok(g)
    }

    pub fn residual_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(linalg::norm(&self.min_norm_subgradient(x)?))
    }
}
