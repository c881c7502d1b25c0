//! Stochastic Lorenz system in consolidated coordinates, with additive noise
//! in `z`. Extinction means convergence to the `z`-axis.
//!
//! The cylinder coordinates `(θ, R, z)` satisfy `x = R sin θ`,
//! `y = R (cos θ - sin θ)`.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use super::{check_positive, obs, ModelBundle, QuadrupleMap};
use crate::criteria::lorenz_lambda0;
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovSuite;
use crate::process::{Constraint, Domain, Family, ModelSpec, Observable, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorenzParams {
    pub gamma: f64,
    pub z_star: f64,
    pub eta: f64,
    pub alpha0: f64,
}

impl LorenzParams {
    pub fn new(gamma: f64, z_star: f64, eta: f64, alpha0: f64) -> Self {
        Self {
            gamma,
            z_star,
            eta,
            alpha0,
        }
    }

    /// Parameters of the classical system
    /// `dX = σ(Y - X)dt`, `dY = [X(ρ - Z) - Y]dt`, `dZ = [-βZ + XY]dt + α̂ dW`
    /// after the linear change of variables and time change by `2/(1+σ)`.
    /// `ρ < 1` gives `z* < 2`.
    pub fn from_classical(sigma: f64, rho: f64, beta: f64, alpha_hat: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        check_positive("rho", rho)?;
        check_positive("beta", beta)?;
        if !(alpha_hat.is_finite() && alpha_hat >= 0.0) {
            return Err(Error::NegativeParameter(format!("alpha_hat = {alpha_hat}")));
        }
        let chi = 2.0 / (1.0 + sigma);
        Ok(Self {
            gamma: chi * beta,
            z_star: 2.0 + chi * chi * sigma * (rho - 1.0),
            eta: 1.0 / (chi * sigma),
            alpha0: chi.powf(2.5) * sigma * alpha_hat,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("gamma", self.gamma)?;
        check_positive("z_star", self.z_star)?;
        check_positive("eta", self.eta)?;
        if !(self.alpha0.is_finite() && self.alpha0 >= 0.0) {
            return Err(Error::NegativeParameter(format!(
                "alpha0 = {}",
                self.alpha0
            )));
        }
        Ok(())
    }

    /// Cylinder model on `(θ, R, z)`; `R = 0` is the boundary.
    pub fn lifted_model(&self) -> Result<ModelSpec> {
        self.validate()?;
        let p = *self;
        ModelSpec::builder("lorenz-cylinder", Family::Sde, 3)
            .drift(move |st| {
                let (th, r, z) = (st.x[0], st.x[1], st.x[2]);
                let (s, c) = th.sin_cos();
                vec![
                    1.0 - z * s * s,
                    r * (-1.0 + z * s * c),
                    -(p.gamma * (z - p.z_star) + r * r * s * (s + p.eta * (c - s))),
                ]
            })
            .diffusion(1, move |_| {
                DMatrix::from_column_slice(3, 1, &[0.0, 0.0, p.alpha0])
            })
            .domain(Domain::unbounded().with(Constraint::NonNegative(1..2)))
            .extinction_distance(|st| st.x[1].abs())
            .build()
    }

    fn model(&self) -> Result<ModelSpec> {
        let p = *self;
        ModelSpec::builder("lorenz", Family::Sde, 3)
            .drift(move |st| {
                let (x, y, z) = (st.x[0], st.x[1], st.x[2]);
                vec![
                    y,
                    x * (z - 2.0) - 2.0 * y,
                    -(p.gamma * (z - p.z_star) + x * (x + p.eta * y)),
                ]
            })
            .diffusion(1, move |_| {
                DMatrix::from_column_slice(3, 1, &[0.0, 0.0, p.alpha0])
            })
            .extinction_distance(|st| st.x[0].hypot(st.x[1]))
            .build()
    }
}

/// `H(θ, R, z) = 1 - (z/2) sin 2θ` on cylinder states.
pub fn lorenz_boundary_h() -> Observable {
    obs(|st| 1.0 - 0.5 * st.x[2] * (2.0 * st.x[0]).sin())
}

/// Constants of the exponential-quadratic suite built from
/// `Q = (2+2η)x² + 2xy + ηy² + z²`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct QuadSuite {
    a: f64,
    c: f64,
    k: f64,
}

impl QuadSuite {
    fn new(p: &LorenzParams) -> Result<Self> {
        if p.eta <= 0.5 {
            return Err(Error::InvalidParameter(format!(
                "eta = {} must exceed 1/2 for the shipped suite",
                p.eta
            )));
        }
        let a2 = p.alpha0 * p.alpha0;
        let a = if a2 > 0.0 {
            0.1f64.min(p.gamma / (4.0 * a2))
        } else {
            0.1
        };
        let kk = 4.0f64.min(4.0 * p.eta - 2.0).min(p.gamma);
        let c0 = 4.0 * p.gamma * p.z_star * p.z_star / 3.0 + a2;
        let c = a * kk / 8.0;
        let lq = Matrix3::new(2.0 + 2.0 * p.eta, 1.0, 0.0, 1.0, p.eta, 0.0, 0.0, 0.0, 1.0)
            .symmetric_eigenvalues()
            .max();
        let r0 = 2.0 * c0 / kk + 1.0;
        let r1 = 4.0 * c0 / (3.0 * kk) + 1.0 / 3.0;
        let k_w = 1.0 + (0.25 * a * lq * r0).exp() * (0.25 * a * c0 + c);
        let k_u = (0.5 * a * lq * r1).exp() * (0.5 * a * c0 + c);
        let k_g = a2 * a * a / (4.0 * c);
        Ok(Self {
            a,
            c,
            k: k_w.max(k_u).max(k_g).max(1.0),
        })
    }
}

fn quad(eta: f64, x: &[f64]) -> f64 {
    (2.0 + 2.0 * eta) * x[0] * x[0] + 2.0 * x[0] * x[1] + eta * x[1] * x[1] + x[2] * x[2]
}

fn quad_drift(p: &LorenzParams, x: &[f64]) -> f64 {
    -4.0 * x[0] * x[0] - (4.0 * p.eta - 2.0) * x[1] * x[1] - 2.0 * p.gamma * x[2] * x[2]
        + 2.0 * p.gamma * p.z_star * x[2]
}

/// Builds the Lorenz model, its suite with `V = -½ log(x² + (x+y)²)` and
/// exponential-quadratic `W`, `U`, the cylinder model and the cylinder map.
///
/// The suite requires `η > ½`, which every classical parameter set satisfies.
pub fn make_lorenz(p: &LorenzParams) -> Result<ModelBundle> {
    p.validate()?;
    let qs = QuadSuite::new(p)?;
    let model = p.model()?;
    let lifted = p.lifted_model()?;

    let forward = Arc::new(|y: &StateVector| {
        let (s, c) = y.x[0].sin_cos();
        StateVector::new(vec![y.x[1] * s, y.x[1] * (c - s), y.x[2]])
    });
    let lift = Arc::new(|x: &StateVector| {
        let (u, w) = (x.x[0], x.x[0] + x.x[1]);
        StateVector::new(vec![u.atan2(w), u.hypot(w), x.x[2]])
    });
    let map = QuadrupleMap::new(
        forward,
        lift.clone(),
        "R = 0: the cylinder of angles times the z-axis",
    );

    let v = obs(|st| {
        let (u, w) = (st.x[0], st.x[0] + st.x[1]);
        -0.5 * (u * u + w * w).ln()
    });
    let gamma_v = obs(|_| 0.0);
    let mut suite =
        LyapunovSuite::compact(v, lorenz_boundary_h(), gamma_v, -lorenz_lambda0(p.z_star))
            .with_lift(lift);

    let (a, c, eta) = (qs.a, qs.c, p.eta);
    let a2 = p.alpha0 * p.alpha0;
    let expq = move |b: f64, x: &[f64]| (b * quad(eta, x)).exp();
    let pp = *p;
    let lexp = move |b: f64, x: &[f64]| {
        b * expq(b, x) * (quad_drift(&pp, x) + a2 + 2.0 * b * a2 * x[2] * x[2])
    };
    let r2 = |x: &[f64]| 1.0 + x.iter().map(|v| v * v).sum::<f64>();
    suite.w = obs(move |st| expq(0.25 * a, &st.x));
    suite.w_prime = obs(move |st| 1.0 + c * r2(&st.x) * expq(0.25 * a, &st.x));
    suite.u = obs(move |st| expq(0.5 * a, &st.x));
    suite.u_prime = obs(move |st| c * r2(&st.x) * expq(0.5 * a, &st.x));
    suite.lw = Some(obs(move |st| lexp(0.25 * a, &st.x)));
    suite.lu = Some(obs(move |st| lexp(0.5 * a, &st.x)));
    suite.gamma_w = Some(obs(move |st| {
        let w = expq(0.25 * a, &st.x);
        4.0 * a2 * (0.25 * a).powi(2) * st.x[2] * st.x[2] * w * w
    }));
    suite.k = qs.k;

    Ok(ModelBundle {
        model,
        suite,
        boundary: Some(lifted),
        map: Some(map),
        species_h: Vec::new(),
    })
}
