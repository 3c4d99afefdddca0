//! Seeded synthetic problems.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{logistic_problem, LibSvmDataset};
use crate::error::{invalid, Result};
use crate::linalg::CsrMatrix;
use crate::problem::{CompositeProblem, Regularizer, SmoothTerm};

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticParams {
    pub workers: usize,
    pub dim: usize,
    /// Hessian spectra lie in `[mu, lipschitz]`, both endpoints attained when
    /// `dim >= 2`.
    pub mu: f64,
    pub lipschitz: f64,
    /// Centers are uniform in `[-spread, spread]^dim`.
    pub center_spread: f64,
    /// Use identity Hessians, ignoring `mu` and `lipschitz`.
    pub identity: bool,
    pub lambda1: f64,
}

impl Default for QuadraticParams {
    fn default() -> Self {
        Self {
            workers: 5,
            dim: 2,
            mu: 1.0,
            lipschitz: 3.0,
            center_spread: 5.0,
            identity: false,
            lambda1: 0.0,
        }
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| standard_normal(rng));
    g.qr().q()
}

fn regularizer(lambda1: f64) -> Result<Regularizer> {
    if lambda1 == 0.0 {
        Ok(Regularizer::Zero)
    } else {
        Regularizer::l1(lambda1)
    }
}

/// Sum of rotated quadratics `(x - c_i)^T Q_i D_i Q_i^T (x - c_i) / 2`.
pub fn quadratic_sum(params: &QuadraticParams, seed: u64) -> Result<CompositeProblem> {
    let QuadraticParams {
        workers,
        dim,
        mu,
        lipschitz,
        center_spread,
        identity,
        lambda1,
    } = *params;
    if workers == 0 || dim == 0 {
        return Err(invalid("quadratic sum needs workers >= 1 and dim >= 1"));
    }
    if !identity && !(mu > 0.0 && lipschitz >= mu && lipschitz.is_finite()) {
        return Err(invalid(format!(
            "need 0 < mu <= L, got mu={mu}, L={lipschitz}"
        )));
    }
    if !(center_spread >= 0.0 && center_spread.is_finite()) {
        return Err(invalid("center spread must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::with_capacity(workers);
    for _ in 0..workers {
        let center: Vec<f64> = (0..dim)
            .map(|_| center_spread * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        let hessian = if identity {
            DMatrix::identity(dim, dim)
        } else {
            let mut eig: Vec<f64> = (0..dim)
                .map(|_| mu + (lipschitz - mu) * rng.random::<f64>())
                .collect();
            eig[0] = mu;
            if dim > 1 {
                eig[dim - 1] = lipschitz;
            }
            let q = random_orthogonal(dim, &mut rng);
            let h = &q * DMatrix::from_diagonal(&DVector::from_vec(eig)) * q.transpose();
            (&h + h.transpose()) * 0.5
        };
        terms.push(SmoothTerm::quadratic(hessian, center)?);
    }
    CompositeProblem::new(terms, regularizer(lambda1)?)
}

/// Five rotated two-dimensional quadratics with curvature in `[1, 3]` and
/// centers in `[-5, 5]^2`.
pub fn fig2_problem(seed: u64) -> Result<CompositeProblem> {
    quadratic_sum(&QuadraticParams::default(), seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticParams {
    pub workers: usize,
    pub examples: usize,
    pub features: usize,
    /// Probability that an entry of the design is nonzero.
    pub density: f64,
    /// Fraction of nonzero weights in the generating model.
    pub support: f64,
    /// Probability of flipping a label.
    pub label_noise: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            workers: 5,
            examples: 500,
            features: 50,
            density: 0.2,
            support: 0.3,
            label_noise: 0.1,
            lambda1: 0.01,
            lambda2: 0.0,
        }
    }
}

/// Sparse Gaussian design with labels drawn from a sparse linear model.
pub fn logistic_dataset(params: &LogisticParams, seed: u64) -> Result<LibSvmDataset> {
    let p = params;
    if p.examples == 0 || p.features == 0 {
        return Err(invalid("logistic data needs examples and features"));
    }
    for (name, v) in [
        ("density", p.density),
        ("support", p.support),
        ("label_noise", p.label_noise),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<f64> = (0..p.features)
        .map(|_| {
            if rng.random::<f64>() < p.support {
                standard_normal(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(p.examples);
    let mut labels = Vec::with_capacity(p.examples);
    for _ in 0..p.examples {
        let mut row = Vec::new();
        let mut score = 0.0;
        for (j, w) in truth.iter().enumerate() {
            if rng.random::<f64>() < p.density {
                let v = standard_normal(&mut rng);
                score += v * w;
                row.push((j, v));
            }
        }
        let mut label = if score >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < p.label_noise {
            label = -label;
        }
        rows.push(row);
        labels.push(label);
    }
    Ok(LibSvmDataset {
        rows: CsrMatrix::from_rows(rows, p.features),
        labels,
    })
}

pub fn logistic_synthetic(params: &LogisticParams, seed: u64) -> Result<CompositeProblem> {
    let data = logistic_dataset(params, seed)?;
    logistic_problem(&data, params.workers, params.lambda1, params.lambda2)
}
