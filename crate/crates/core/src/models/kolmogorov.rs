//! Stochastic Kolmogorov systems `dX_i = X_i f_i(X) dt + X_i g_i(X) dE_i`
//! with correlated noise `E = AᵀB`, `B` a standard Brownian motion.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{check_positive, distance_to_faces, obs, ModelBundle};
use crate::criteria::kolmogorov_h;
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovSuite;
use crate::process::{Constraint, Domain, Family, ModelSpec, Observable, StateFn, StateVector};

/// Caller-supplied function `U ≥ 1` with `LU ≤ k - cU`, `ΓU ≤ κ U²` and
/// `ΓV ≤ gamma_v_bound · max(1, cU)`.
#[derive(Clone)]
pub struct TechnicalU {
    pub u: Observable,
    pub k: f64,
    pub c: f64,
    pub kappa: f64,
    pub gamma_v_bound: f64,
}

impl std::fmt::Debug for TechnicalU {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TechnicalU")
            .field("k", &self.k)
            .field("c", &self.c)
            .field("kappa", &self.kappa)
            .field("gamma_v_bound", &self.gamma_v_bound)
            .finish_non_exhaustive()
    }
}

/// Builds the model and its suite with `V = -Σ p_i log x_i`, `W = √U`,
/// `W' = max(1, (c/2)√U)`, `U' = max(1, cU)`.
///
/// `noise` is the `d × n` matrix `A`; `Σ = AᵀA` is the covariance of `E`.
pub fn make_kolmogorov(
    f: StateFn<Vec<f64>>,
    g: StateFn<Vec<f64>>,
    noise: &DMatrix<f64>,
    p: &[f64],
    tech: TechnicalU,
) -> Result<ModelBundle> {
    let n = noise.ncols();
    let d = noise.nrows();
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("empty noise matrix".into()));
    }
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            what: "weights",
            expected: n,
            got: p.len(),
        });
    }
    if p.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidParameter(
            "weights must be strictly positive".into(),
        ));
    }
    check_positive("c", tech.c)?;
    for (name, v) in [
        ("k", tech.k),
        ("kappa", tech.kappa),
        ("gamma_v_bound", tech.gamma_v_bound),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::NegativeParameter(format!("{name} = {v}")));
        }
    }
    let probe = StateVector::new(vec![1.0; n]);
    for (what, v) in [("f", f(&probe)), ("g", g(&probe))] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                got: v.len(),
            });
        }
    }

    let sigma = noise.transpose() * noise;
    let ff = f.clone();
    let gg = g.clone();
    let a = noise.clone();
    let model = ModelSpec::builder("kolmogorov", Family::Sde, n)
        .drift(move |st| {
            let fx = ff(st);
            st.x.iter().zip(&fx).map(|(x, f)| x * f).collect()
        })
        .diffusion(d, move |st| {
            let gx = gg(st);
            DMatrix::from_fn(n, d, |i, k| st.x[i] * gx[i] * a[(k, i)])
        })
        .domain(Domain::unbounded().with(Constraint::NonNegative(0..n)))
        .extinction_distance(distance_to_faces)
        .build()?;

    let species_h = (0..n)
        .map(|i| kolmogorov_h(f.clone(), g.clone(), &sigma, i))
        .collect::<Result<Vec<_>>>()?;
    let hs = species_h.clone();
    let pw = p.to_vec();
    let h = obs(move |st| pw.iter().zip(&hs).map(|(w, h)| w * h(st)).sum());
    let pw = p.to_vec();
    let gg = g.clone();
    let s2 = sigma.clone();
    let gamma_v = obs(move |st| {
        let gx = gg(st);
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += pw[i] * pw[j] * gx[i] * gx[j] * s2[(i, j)];
            }
        }
        total
    });
    let pw = p.to_vec();
    let v = obs(move |st| -pw.iter().zip(&st.x).map(|(w, x)| w * x.ln()).sum::<f64>());
    let alpha = h(&StateVector::new(vec![0.0; n]));

    let TechnicalU {
        u,
        k,
        c,
        kappa,
        gamma_v_bound,
    } = tech;
    let (u1, u2, u4) = (u.clone(), u.clone(), u.clone());
    let suite = LyapunovSuite {
        v,
        h,
        gamma_v,
        w: obs(move |st| u1(st).sqrt()),
        w_prime: obs(move |st| (0.5 * c * u2(st).sqrt()).max(1.0)),
        u,
        u_prime: obs(move |st| (c * u4(st)).max(1.0)),
        k: (k + 1.0).max(kappa / c).max(gamma_v_bound).max(1.0),
        alpha_candidate: alpha,
        lift: None,
        lw: None,
        lu: None,
        gamma_w: None,
    };

    Ok(ModelBundle {
        model,
        suite,
        boundary: None,
        map: None,
        species_h,
    })
}

/// Stochastic Lotka-Volterra system `f = r - Mx` with constant `g`, using
/// `U = 1 + Σx` and `c = 1`. Off-diagonal interactions must be
/// non-negative and self-limitation positive.
pub fn lotka_volterra_sde(
    r: &[f64],
    m: &DMatrix<f64>,
    g: &[f64],
    noise: &DMatrix<f64>,
    p: &[f64],
) -> Result<ModelBundle> {
    let n = r.len();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "interaction matrix",
            expected: n,
            got: m.nrows().max(m.ncols()),
        });
    }
    if g.len() != n {
        return Err(Error::DimensionMismatch {
            what: "noise intensities",
            expected: n,
            got: g.len(),
        });
    }
    if noise.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "noise matrix columns",
            expected: n,
            got: noise.ncols(),
        });
    }
    if m.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (0..n).any(|i| m[(i, i)] <= 0.0) {
        return Err(Error::InvalidParameter(
            "interactions must be competitive with positive self-limitation".into(),
        ));
    }
    let c = 1.0;
    let k = c
        + (0..n)
            .map(|i| (r[i] + c).max(0.0).powi(2) / (4.0 * m[(i, i)]))
            .sum::<f64>();
    let sigma = noise.transpose() * noise;
    let lmax = sigma.clone().symmetric_eigenvalues().max().max(0.0);
    let gmax = g.iter().fold(0.0f64, |a, b| a.max(b * b));
    let mut gv = 0.0;
    for i in 0..n {
        for j in 0..n {
            gv += p.get(i).copied().unwrap_or(0.0)
                * p.get(j).copied().unwrap_or(0.0)
                * g[i]
                * g[j]
                * sigma[(i, j)];
        }
    }
    let tech = TechnicalU {
        u: obs(|st| 1.0 + st.x.iter().sum::<f64>()),
        k,
        c,
        kappa: lmax * gmax,
        gamma_v_bound: gv,
    };
    let (rr, mm, gg) = (r.to_vec(), m.clone(), g.to_vec());
    let f: StateFn<Vec<f64>> = Arc::new(move |st: &StateVector| {
        (0..n)
            .map(|i| rr[i] - (0..n).map(|j| mm[(i, j)] * st.x[j]).sum::<f64>())
            .collect()
    });
    let gf: StateFn<Vec<f64>> = Arc::new(move |_| gg.clone());
    make_kolmogorov(f, gf, noise, p, tech)
}
