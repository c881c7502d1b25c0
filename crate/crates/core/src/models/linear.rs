//! Linear SDE `dx = Ax dt + Σx dW` with scalar Brownian motion, the ground
//! truth benchmark for exponent estimators.
//!
//! With `v = x/|x|`, `g(v) = vᵀAv + ½(|Σv|² - η²)` and `η(v) = vᵀΣv`, the
//! radius satisfies `dr = r (g dt + η dW)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{obs, ModelBundle, QuadrupleMap};
use crate::criteria::max_real_eigenvalue;
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovSuite;
use crate::process::{
    distance_to_origin, Constraint, Domain, Family, ModelSpec, RngStream, StateVector,
};

const SPHERE_SAMPLES: usize = 20_000;

struct Coeffs {
    a: DMatrix<f64>,
    s: DMatrix<f64>,
}

impl Coeffs {
    /// `(Av, Σv, g, η)` at a unit vector.
    fn at(&self, v: &[f64]) -> (DVector<f64>, DVector<f64>, f64, f64) {
        let v = DVector::from_column_slice(v);
        let av = &self.a * &v;
        let sv = &self.s * &v;
        let eta = v.dot(&sv);
        let g = v.dot(&av) + 0.5 * (sv.norm_squared() - eta * eta);
        (av, sv, g, eta)
    }

    fn h(&self, v: &[f64]) -> f64 {
        let (_, _, g, eta) = self.at(v);
        -g + 0.5 * eta * eta
    }
}

fn is_scalar_multiple_of_identity(s: &DMatrix<f64>) -> Option<f64> {
    let d = s[(0, 0)];
    let n = s.nrows();
    (0..n)
        .all(|i| (0..n).all(|j| s[(i, j)] == if i == j { d } else { 0.0 }))
        .then_some(d)
}

/// `inf μH` over invariant measures of the sphere process where it has a
/// closed form, else the minimum of `H` over a deterministic sample of the
/// sphere (a lower bound).
fn alpha_candidate(co: &Coeffs) -> Result<f64> {
    let n = co.a.nrows();
    if co.s.iter().all(|v| *v == 0.0) {
        return Ok(-max_real_eigenvalue(&co.a)?);
    }
    if n == 1 {
        return Ok(-co.a[(0, 0)] + 0.5 * co.s[(0, 0)].powi(2));
    }
    if let Some(sig) = is_scalar_multiple_of_identity(&co.s) {
        return Ok(-max_real_eigenvalue(&co.a)? + 0.5 * sig * sig);
    }
    let mut rng = RngStream::new(0, 0);
    let mut best = f64::INFINITY;
    let mut v = vec![0.0; n];
    for _ in 0..SPHERE_SAMPLES {
        rng.fill_standard_normal(&mut v);
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        best = best.min(co.h(&v));
    }
    Ok(best)
}

/// Builds the linear model, its suite with `V = -log |x|`, the `(v, r)`
/// model and the polar map.
///
/// The suite is the compact-space one with `K = max(1, max η²)` so that
/// `ΓV = η²` stays below `K U'`.
pub fn make_linear_sde(a: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<ModelBundle> {
    for m in [a, sigma] {
        if m.nrows() != m.ncols() {
            return Err(Error::NonSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
    }
    if sigma.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch {
            what: "noise matrix",
            expected: a.nrows(),
            got: sigma.nrows(),
        });
    }
    if a.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite matrix entry".into()));
    }
    let n = a.nrows();
    let co = Arc::new(Coeffs {
        a: a.clone(),
        s: sigma.clone(),
    });

    let c = co.clone();
    let c2 = co.clone();
    let model = ModelSpec::builder("linear", Family::Sde, n)
        .drift(move |st| {
            (&c.a * DVector::from_column_slice(&st.x))
                .as_slice()
                .to_vec()
        })
        .diffusion(1, move |st| {
            let sx = &c2.s * DVector::from_column_slice(&st.x);
            DMatrix::from_column_slice(n, 1, sx.as_slice())
        })
        .extinction_distance(distance_to_origin)
        .build()?;

    let c = co.clone();
    let c2 = co.clone();
    let lifted = ModelSpec::builder("linear-polar", Family::Sde, n + 1)
        .drift(move |st| {
            let (v, r) = (&st.x[..n], st.x[n]);
            let (av, sv, g, eta) = c.at(v);
            let mut out: Vec<f64> = (0..n)
                .map(|i| av[i] - g * v[i] + eta * eta * v[i] - eta * sv[i])
                .collect();
            out.push(r * g);
            out
        })
        .diffusion(1, move |st| {
            let (v, r) = (&st.x[..n], st.x[n]);
            let (_, sv, _, eta) = c2.at(v);
            let mut col: Vec<f64> = (0..n).map(|i| sv[i] - eta * v[i]).collect();
            col.push(r * eta);
            DMatrix::from_column_slice(n + 1, 1, &col)
        })
        .domain(
            Domain::unbounded()
                .with(Constraint::UnitSphere(0..n))
                .with(Constraint::NonNegative(n..n + 1)),
        )
        .extinction_distance(move |st| st.x[n].abs())
        .build()?;

    let forward = Arc::new(move |y: &StateVector| {
        StateVector::new(y.x[..n].iter().map(|v| v * y.x[n]).collect())
    });
    let lift = Arc::new(move |x: &StateVector| {
        let r = x.norm();
        let mut y: Vec<f64> = if r > 0.0 {
            x.x.iter().map(|v| v / r).collect()
        } else {
            vec![1.0 / (n as f64).sqrt(); n]
        };
        y.push(r);
        StateVector::new(y)
    });
    let map = QuadrupleMap::new(forward, lift.clone(), "r = 0: the unit sphere");

    let c = co.clone();
    let h = obs(move |y| c.h(&y.x[..n]));
    let c = co.clone();
    let gamma_v = obs(move |st| {
        let r = st.norm();
        let v: Vec<f64> = st.x.iter().map(|x| x / r).collect();
        c.at(&v).3.powi(2)
    });
    let v = obs(|st| -st.norm().ln());
    let sym = (sigma + sigma.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let eta_max = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut suite = LyapunovSuite::compact(v, h, gamma_v, alpha_candidate(&co)?).with_lift(lift);
    suite.k = (eta_max * eta_max).max(1.0);

    Ok(ModelBundle {
        model,
        suite,
        boundary: Some(lifted),
        map: Some(map),
        species_h: Vec::new(),
    })
}
