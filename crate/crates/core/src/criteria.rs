//! Closed-form and semi-analytic extinction criteria, and the small linear
//! algebra kernels behind them.
//!
//! Every criterion is reported as an extinction index: positive means the
//! process goes extinct, at a rate at least the index. Where a family's usual
//! statement is the negated quantity (SIS, invasion rates) the sign is flipped
//! here so that all families share the convention of a positive `α`.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::{boundary_exponent, ExponentEstimate, Method};
use crate::integrators::SimConfig;
use crate::models::lorenz::{lorenz_boundary_h, LorenzParams};
use crate::process::{validate_rate_matrix, ModelSpec, Observable, StateFn, StateVector};

/// Generator of a finite continuous-time Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmcGenerator {
    q: DMatrix<f64>,
    irreducible: bool,
}

impl CtmcGenerator {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::NonSquare {
                rows: q.nrows(),
                cols: q.ncols(),
            });
        }
        validate_rate_matrix(&q, q.nrows())?;
        let irreducible = strongly_connected(&q);
        Ok(Self { q, irreducible })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn size(&self) -> usize {
        self.q.nrows()
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }
}

fn reach_all(q: &DMatrix<f64>, forward: bool) -> bool {
    let m = q.nrows();
    let mut seen = vec![false; m];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..m {
            let rate = if forward { q[(i, j)] } else { q[(j, i)] };
            if j != i && rate > 0.0 && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn strongly_connected(q: &DMatrix<f64>) -> bool {
    q.nrows() == 0 || (reach_all(q, true) && reach_all(q, false))
}

/// Stationary distribution `ρ Q = 0`, `Σ ρ = 1`, by a dense LU solve with
/// the last balance equation replaced by the normalisation row.
pub fn ctmc_stationary(gen: &CtmcGenerator) -> Result<Vec<f64>> {
    if !gen.irreducible {
        return Err(Error::Reducible);
    }
    let m = gen.size();
    let mut a = gen.q.transpose();
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(m);
    b[m - 1] = 1.0;
    let rho = a.lu().solve(&b).ok_or(Error::SingularSolve)?;
    let scale = gen.q.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
    let residual = (rho.transpose() * &gen.q).amax();
    if !residual.is_finite() || residual > 1e-10 * scale {
        return Err(Error::SingularSolve);
    }
    Ok(rho
        .iter()
        .map(|v| if *v < 0.0 && *v > -1e-14 { 0.0 } else { *v })
        .collect())
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let scale = a.amax().max(1.0);
    for i in 0..a.nrows() {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter(format!(
                    "matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

const POWER_MAX_ITER: usize = 1_000_000;

/// Largest eigenvalue and a unit eigenvector of a symmetric matrix by power
/// iteration on `A + cI`, with `c` the largest absolute row sum so that the
/// shifted spectrum is nonnegative. The vector is signed to have a
/// nonnegative sum, which makes it the Perron vector for irreducible
/// nonnegative input.
pub fn top_eigenvalue(a: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    check_symmetric(a)?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    let c = (0..n)
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.01 * ((i * 7919) % 97) as f64 / 97.0);
    v /= v.norm();
    if c == 0.0 {
        return Ok((0.0, v.iter().copied().collect()));
    }
    let mut lambda = (v.transpose() * a * &v)[(0, 0)];
    for _ in 0..POWER_MAX_ITER {
        let av = a * &v;
        let mut w = &av + &v * c;
        let norm = w.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NoConvergence { iterations: 0 });
        }
        w /= norm;
        let next = (w.transpose() * a * &w)[(0, 0)];
        let tol = 1e-12 * next.abs().max(1.0);
        let delta = (next - lambda).abs();
        v = w;
        lambda = next;
        if delta <= tol {
            let residual = (a * &v - &v * lambda).norm();
            if residual <= 1e-7 * lambda.abs().max(1.0) {
                if v.sum() < 0.0 {
                    v = -v;
                }
                return Ok((lambda, v.iter().copied().collect()));
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_ITER,
    })
}

/// Largest eigenvalue of a symmetric matrix from a dense symmetric eigensolver.
pub fn dense_top_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(a)?;
    Ok(a.clone().symmetric_eigen().eigenvalues.max())
}

/// Largest real part over the spectrum of a general square matrix.
pub fn max_real_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    Ok(a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `Σ_s ρ_s (δ(s) - β(s) λ₁(s))`; positive certifies extinction of the SIS model.
pub fn sis_extinction_index(
    delta: &[f64],
    beta: &[f64],
    lambda1: &[f64],
    rho: &[f64],
) -> Result<f64> {
    let m = rho.len();
    if delta.len() != m || beta.len() != m || lambda1.len() != m {
        return Err(Error::LengthMismatch(format!(
            "delta {}, beta {}, lambda1 {}, rho {}",
            delta.len(),
            beta.len(),
            lambda1.len(),
            m
        )));
    }
    let sum: f64 = rho.iter().sum();
    if rho.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(
            "rho is not a probability vector".into(),
        ));
    }
    Ok((0..m)
        .map(|s| rho[s] * (delta[s] - beta[s] * lambda1[s]))
        .sum())
}

/// `λ₀ = √(z* - 1) - 1` for `z* > 1`, else `-1`: the boundary exponent of
/// the noise-free Lorenz system (negative means extinction).
pub fn lorenz_lambda0(z_star: f64) -> f64 {
    if z_star > 1.0 {
        (z_star - 1.0).sqrt() - 1.0
    } else {
        -1.0
    }
}

/// An ergodic invariant measure of a boundary dynamics with its `H` average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryMeasure {
    pub label: String,
    pub h_average: f64,
}

/// Ergodic boundary measures of the noise-free Lorenz cylinder with `z = z*`.
/// For `z* ≤ 1` the angle rotates and the measure is symmetric under
/// `θ ↦ -θ`, giving `H = 1`; for `z* > 1` the angle has fixed points with
/// `H = 1 ∓ √(z* - 1)`.
pub fn lorenz_boundary_measures(z_star: f64) -> Vec<BoundaryMeasure> {
    if z_star > 1.0 {
        let s = (z_star - 1.0).sqrt();
        vec![
            BoundaryMeasure {
                label: "fixed point, sin 2θ > 0".into(),
                h_average: 1.0 - s,
            },
            BoundaryMeasure {
                label: "fixed point, sin 2θ < 0".into(),
                h_average: 1.0 + s,
            },
        ]
    } else {
        vec![BoundaryMeasure {
            label: "rotating circle".into(),
            h_average: 1.0,
        }]
    }
}

/// Minimum `H` average over the declared boundary measures.
pub fn min_over_measures(measures: &[BoundaryMeasure]) -> Option<f64> {
    measures.iter().map(|m| m.h_average).reduce(f64::min)
}

/// Default boundary initial conditions `(θ, R = 0, z)` for the Lorenz cylinder.
pub fn lorenz_default_ics(z_star: f64) -> Vec<StateVector> {
    vec![
        StateVector::new(vec![0.3, 0.0, z_star]),
        StateVector::new(vec![1.9, 0.0, z_star + 0.5]),
    ]
}

/// Monte Carlo `λ_{α₀}`: minus the boundary exponent of the Lorenz cylinder
/// dynamics (`R = 0`), so a negative value certifies extinction.
pub fn lorenz_lambda_mc(
    params: &LorenzParams,
    ics: &[StateVector],
    cfg: &SimConfig,
    reps: usize,
    seed: u64,
) -> Result<ExponentEstimate> {
    params.validate()?;
    let boundary = params.lifted_model()?;
    let est = boundary_exponent(&boundary, &lorenz_boundary_h(), ics, cfg, reps, seed)?;
    Ok(est.negated())
}

/// Invasion rate `r_i = -μ H_i` of species `i` along the boundary dynamics.
/// For chains the occupation average over integer steps is the step average.
pub fn invasion_rate(
    boundary_model: &ModelSpec,
    species: usize,
    h_i: &Observable,
    ics: &[StateVector],
    cfg: &SimConfig,
    reps: usize,
    seed: u64,
) -> Result<ExponentEstimate> {
    if species >= boundary_model.dim() {
        return Err(Error::IndexOutOfRange {
            index: species,
            len: boundary_model.dim(),
        });
    }
    if let Some(x) = ics.iter().find(|x| x.x.get(species).copied() != Some(0.0)) {
        return Err(Error::InvalidParameter(format!(
            "initial condition {:?} is not on the face x_{species} = 0",
            x.x
        )));
    }
    Ok(boundary_exponent(boundary_model, h_i, ics, cfg, reps, seed)?.negated())
}

/// Weighted invasion criterion `Σ p_i r_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvasionCriterion {
    pub value: f64,
    pub ci_high: f64,
    pub extinct: bool,
}

/// `Σ p_i r_i` with an upper confidence bound from the rates' half-widths
/// combined in quadrature; extinction is declared when that bound is negative.
pub fn weighted_invasion_criterion(
    p: &[f64],
    rates: &[ExponentEstimate],
) -> Result<InvasionCriterion> {
    if p.len() != rates.len() {
        return Err(Error::LengthMismatch(format!(
            "{} weights, {} rates",
            p.len(),
            rates.len()
        )));
    }
    if p.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidParameter(
            "weights must be strictly positive".into(),
        ));
    }
    let value: f64 = p.iter().zip(rates).map(|(w, r)| w * r.point).sum();
    let var: f64 = p
        .iter()
        .zip(rates)
        .map(|(w, r)| (w * r.half_width()).powi(2))
        .sum();
    let ci_high = value + var.sqrt();
    Ok(InvasionCriterion {
        value,
        ci_high,
        extinct: ci_high < 0.0,
    })
}

/// `H_i(x) = ½ Σ_ii g_i(x)² - f_i(x)` for a stochastic Kolmogorov system.
pub fn kolmogorov_h(
    f: StateFn<Vec<f64>>,
    g: StateFn<Vec<f64>>,
    sigma: &DMatrix<f64>,
    i: usize,
) -> Result<Observable> {
    let n = sigma.nrows().min(sigma.ncols());
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let s = sigma[(i, i)];
    Ok(Arc::new(move |x: &StateVector| {
        let gi = g(x)[i];
        0.5 * s * gi * gi - f(x)[i]
    }))
}

/// Exact estimate wrapper for closed-form criteria.
pub fn closed_form(value: f64) -> ExponentEstimate {
    ExponentEstimate::exact(Method::ClosedForm, value)
}
