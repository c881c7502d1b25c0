//! Discrete-time ecological chains `X_i(t+1) = X_i(t) F_i(X(t), ξ(t))` with
//! i.i.d. standard normal `ξ`.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{distance_to_faces, obs, ModelBundle};
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovSuite;
use crate::process::{Constraint, Domain, Family, ModelSpec, Observable, RngStream, StateVector};

/// Per-capita growth factors `F(x, ξ)`.
pub type GrowthFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

pub const DEFAULT_INNER_SAMPLES: usize = 10_000;
const INNER_SEED: u64 = 0x5eed;

/// Lotka-Volterra map `F_i = exp(r_i - (Ax)_i + σ_i ξ_i)`; one species gives
/// the Ricker map.
pub fn lv_map(r: Vec<f64>, a: DMatrix<f64>, sigma: Vec<f64>) -> GrowthFn {
    Arc::new(move |x: &[f64], xi: &[f64]| {
        (0..r.len())
            .map(|i| {
                let ax: f64 = (0..x.len()).map(|j| a[(i, j)] * x[j]).sum();
                (r[i] - ax + sigma[i] * xi[i]).exp()
            })
            .collect()
    })
}

/// A generic ecological chain. `k` must make the suite built on
/// `Υ = 1 + Σx` valid: `PΥ ≤ K - 1`, `P(Υ²) ≤ K` and `ΓV ≤ K Υ²`.
#[derive(Clone)]
pub struct EcoChain {
    pub n_species: usize,
    pub noise_dim: usize,
    pub f: GrowthFn,
    /// Weights of `V = -Σ p_i log x_i`.
    pub p: Vec<f64>,
    pub k: f64,
    pub inner_samples: usize,
}

/// Stochastic Lotka-Volterra map with competitive interactions.
#[derive(Debug, Clone, PartialEq)]
pub struct EcoParams {
    pub r: Vec<f64>,
    pub a: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub p: Option<Vec<f64>>,
    pub inner_samples: usize,
}

impl EcoParams {
    pub fn ricker(r: f64, sigma: f64) -> Self {
        Self {
            r: vec![r],
            a: DMatrix::from_element(1, 1, 1.0),
            sigma: vec![sigma],
            p: None,
            inner_samples: DEFAULT_INNER_SAMPLES,
        }
    }

    pub fn n_species(&self) -> usize {
        self.r.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_species();
        if n == 0 {
            return Err(Error::InvalidParameter("no species".into()));
        }
        if self.a.nrows() != n || self.a.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "interaction matrix",
                expected: n,
                got: self.a.nrows().max(self.a.ncols()),
            });
        }
        if self.sigma.len() != n {
            return Err(Error::LengthMismatch(format!(
                "{n} species but {} noise levels",
                self.sigma.len()
            )));
        }
        if let Some(p) = &self.p {
            if p.len() != n {
                return Err(Error::LengthMismatch(format!(
                    "{n} species but {} weights",
                    p.len()
                )));
            }
        }
        if self.a.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || (0..n).any(|i| self.a[(i, i)] <= 0.0)
        {
            return Err(Error::InvalidParameter(
                "interactions must be competitive with positive self-limitation".into(),
            ));
        }
        if self.r.iter().chain(&self.sigma).any(|v| !v.is_finite())
            || self.sigma.iter().any(|s| *s < 0.0)
        {
            return Err(Error::InvalidParameter(
                "growth rates and noise levels must be finite, noise non-negative".into(),
            ));
        }
        Ok(())
    }

    fn weights(&self) -> Vec<f64> {
        self.p
            .clone()
            .unwrap_or_else(|| vec![1.0; self.n_species()])
    }

    /// `K` for `Υ = 1 + Σx` from `E[x e^{-ax}] ≤ 1/(ea)` and its square analogue.
    pub fn suite_constant(&self) -> f64 {
        let n = self.n_species();
        let e = std::f64::consts::E;
        let p = self.weights();
        let aii = |i: usize| self.a[(i, i)];
        let c2 = 1.0
            + (0..n)
                .map(|i| (self.r[i] + 0.5 * self.sigma[i].powi(2)).exp() / (e * aii(i)))
                .sum::<f64>();
        let b2 = 2.0
            + 2.0
                * n as f64
                * (0..n)
                    .map(|i| {
                        (2.0 * self.r[i] + 2.0 * self.sigma[i].powi(2)).exp()
                            / (e * e * aii(i).powi(2))
                    })
                    .sum::<f64>();
        let pr: f64 = (0..n).map(|i| p[i] * self.r[i].abs()).sum();
        let pa = (0..n)
            .map(|j| (0..n).map(|i| p[i] * self.a[(i, j)]).sum::<f64>().abs())
            .fold(0.0, f64::max);
        let ps: f64 = (0..n).map(|i| (p[i] * self.sigma[i]).powi(2)).sum();
        (c2 + 1.0)
            .max(b2 + 1.0)
            .max(2.0 * pr * pr + 2.0 * pa * pa + ps)
    }

    pub fn chain(&self) -> Result<EcoChain> {
        self.validate()?;
        Ok(EcoChain {
            n_species: self.n_species(),
            noise_dim: self.n_species(),
            f: lv_map(self.r.clone(), self.a.clone(), self.sigma.clone()),
            p: self.weights(),
            k: self.suite_constant(),
            inner_samples: self.inner_samples,
        })
    }

    pub fn bundle(&self) -> Result<ModelBundle> {
        make_ecological_discrete(&self.chain()?)
    }
}

/// Antithetic standard normal draws shared by every `H_i` evaluation.
fn inner_draws(noise_dim: usize, samples: usize) -> Vec<Vec<f64>> {
    let mut rng = RngStream::new(INNER_SEED, 0);
    let half = samples.div_ceil(2);
    let mut out = Vec::with_capacity(2 * half);
    for _ in 0..half {
        let mut z = vec![0.0; noise_dim];
        rng.fill_standard_normal(&mut z);
        let neg = z.iter().map(|v| -v).collect();
        out.push(z);
        out.push(neg);
    }
    out
}

fn check_growth(f: &GrowthFn, x: &[f64], draws: &[Vec<f64>], n: usize) -> Result<()> {
    for xi in draws {
        let v = f(x, xi);
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                what: "growth factors",
                expected: n,
                got: v.len(),
            });
        }
        if let Some(bad) = v.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NonPositiveF(*bad));
        }
    }
    Ok(())
}

/// Builds the chain and its suite with `V = -Σ p_i log x_i`,
/// `H_i(x) = -E[log F_i(x, ξ)]` by antithetic Monte Carlo, `W = Υ`,
/// `W' = 1 + Υ`, `U = U' = Υ²` where `Υ = 1 + Σx`.
pub fn make_ecological_discrete(chain: &EcoChain) -> Result<ModelBundle> {
    let n = chain.n_species;
    if n == 0 || chain.noise_dim == 0 {
        return Err(Error::InvalidParameter(
            "need at least one species and one noise component".into(),
        ));
    }
    if chain.p.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{n} species but {} weights",
            chain.p.len()
        )));
    }
    if chain.p.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidParameter(
            "weights must be strictly positive".into(),
        ));
    }
    if !(chain.k.is_finite() && chain.k >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "suite constant {} must be at least 1",
            chain.k
        )));
    }
    if chain.inner_samples < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 inner samples".into(),
        ));
    }
    let draws = Arc::new(inner_draws(chain.noise_dim, chain.inner_samples));
    for probe in [vec![0.0; n], vec![1.0; n]] {
        check_growth(&chain.f, &probe, &draws[..draws.len().min(64)], n)?;
    }

    let f = chain.f.clone();
    let model = ModelSpec::builder("eco-discrete", Family::DiscreteChain, n)
        .step_map(chain.noise_dim, move |z, xi| {
            let g = f(&z.x, xi);
            StateVector::new(z.x.iter().zip(&g).map(|(x, g)| x * g).collect())
        })
        .domain(Domain::unbounded().with(Constraint::NonNegative(0..n)))
        .extinction_distance(distance_to_faces)
        .build()?;

    let species_h: Vec<Observable> = (0..n)
        .map(|i| {
            let f = chain.f.clone();
            let d = draws.clone();
            obs(move |st| -d.iter().map(|xi| f(&st.x, xi)[i].ln()).sum::<f64>() / d.len() as f64)
        })
        .collect();

    let p = chain.p.clone();
    let (f, d) = (chain.f.clone(), draws.clone());
    let h = obs(move |st| {
        let mut total = 0.0;
        for xi in d.iter() {
            let g = f(&st.x, xi);
            total -= p.iter().zip(&g).map(|(w, g)| w * g.ln()).sum::<f64>();
        }
        total / d.len() as f64
    });
    let p = chain.p.clone();
    let (f, d) = (chain.f.clone(), draws.clone());
    let gamma_v = obs(move |st| {
        let mut total = 0.0;
        for xi in d.iter() {
            let g = f(&st.x, xi);
            total += p
                .iter()
                .zip(&g)
                .map(|(w, g)| w * g.ln())
                .sum::<f64>()
                .powi(2);
        }
        total / d.len() as f64
    });
    let p = chain.p.clone();
    let v = obs(move |st| -p.iter().zip(&st.x).map(|(w, x)| w * x.ln()).sum::<f64>());
    let alpha = h(&StateVector::new(vec![0.0; n]));

    let upsilon = |st: &StateVector| 1.0 + st.x.iter().sum::<f64>();
    let suite = LyapunovSuite {
        v,
        h,
        gamma_v,
        w: obs(upsilon),
        w_prime: obs(move |st| 1.0 + upsilon(st)),
        u: obs(move |st| upsilon(st).powi(2)),
        u_prime: obs(move |st| upsilon(st).powi(2)),
        k: chain.k,
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
