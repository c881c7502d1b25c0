//! SIS epidemic on a network whose topology and rates switch with a Markov
//! regime.
//!
//! Original coordinates are infection probabilities `x ∈ [0,1]^N`. The lifted
//! model uses polar coordinates `(v, r)` with `x = r v`, `|v| = 1`, and
//! carries the regime along unchanged.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{obs, ModelBundle, QuadrupleMap};
use crate::criteria::{ctmc_stationary, sis_extinction_index, top_eigenvalue, CtmcGenerator};
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovSuite;
use crate::process::{distance_to_origin, Constraint, Domain, Family, ModelSpec, StateVector};

/// Noise intensity `σ_i(x_i, s)`; must vanish at `x_i = 0`. Positivity on
/// `(0, 1)`, needed for accessibility, is not checked.
#[derive(Clone)]
pub enum SisNoise {
    Zero,
    /// `σ_i(x_i, s) = κ_s x_i`.
    Linear(Vec<f64>),
    Custom(Arc<dyn Fn(usize, f64, usize) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for SisNoise {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SisNoise::Zero => f.write_str("Zero"),
            SisNoise::Linear(k) => f.debug_tuple("Linear").field(k).finish(),
            SisNoise::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl SisNoise {
    fn eval(&self, node: usize, xi: f64, s: usize) -> f64 {
        match self {
            SisNoise::Zero => 0.0,
            SisNoise::Linear(k) => k[s] * xi,
            SisNoise::Custom(f) => f(node, xi, s),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SisParams {
    /// Adjacency matrix per regime.
    pub adjacency: Vec<DMatrix<f64>>,
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub noise: SisNoise,
    /// Regime generator; required when there is more than one regime.
    pub q: Option<DMatrix<f64>>,
}

impl SisParams {
    pub fn n_nodes(&self) -> usize {
        self.adjacency.first().map_or(0, |a| a.nrows())
    }

    pub fn n_regimes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.n_regimes();
        if m == 0 {
            return Err(Error::InvalidAdjacency("no regimes".into()));
        }
        let n = self.n_nodes();
        if n == 0 {
            return Err(Error::InvalidAdjacency("empty network".into()));
        }
        for (s, a) in self.adjacency.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::InvalidAdjacency(format!(
                    "regime {s}: expected {n}x{n}, got {}x{}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            for i in 0..n {
                for j in 0..n {
                    let v = a[(i, j)];
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::InvalidAdjacency(format!(
                            "regime {s}: entry ({i},{j}) = {v}"
                        )));
                    }
                    if v != a[(j, i)] {
                        return Err(Error::InvalidAdjacency(format!(
                            "regime {s}: not symmetric at ({i},{j})"
                        )));
                    }
                }
            }
        }
        if self.beta.len() != m || self.delta.len() != m {
            return Err(Error::LengthMismatch(format!(
                "{m} regimes but {} beta and {} delta values",
                self.beta.len(),
                self.delta.len()
            )));
        }
        for (name, vals) in [("beta", &self.beta), ("delta", &self.delta)] {
            if let Some(v) = vals.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::NegativeRate(format!("{name} = {v}")));
            }
        }
        match &self.noise {
            SisNoise::Linear(k) if k.len() != m => {
                return Err(Error::LengthMismatch(format!(
                    "{m} regimes but {} noise levels",
                    k.len()
                )));
            }
            SisNoise::Linear(k) if k.iter().any(|v| !(v.is_finite() && *v >= 0.0)) => {
                return Err(Error::NegativeRate("noise level".into()));
            }
            SisNoise::Custom(f) => {
                for s in 0..m {
                    for i in 0..n {
                        if f(i, 0.0, s) != 0.0 {
                            return Err(Error::InvalidParameter(format!(
                                "noise of node {i} in regime {s} does not vanish at 0"
                            )));
                        }
                    }
                }
            }
            _ => {}
        }
        match &self.q {
            Some(q) if q.nrows() != m || q.ncols() != m => Err(Error::DimensionMismatch {
                what: "regime generator",
                expected: m,
                got: q.nrows(),
            }),
            None if m > 1 => Err(Error::MissingField("switch_rates")),
            _ => Ok(()),
        }
    }

    /// Stationary regime distribution (1 for a single regime).
    pub fn regime_distribution(&self) -> Result<Vec<f64>> {
        match (&self.q, self.n_regimes()) {
            (_, 1) => Ok(vec![1.0]),
            (Some(q), _) => ctmc_stationary(&CtmcGenerator::new(q.clone())?),
            (None, _) => Err(Error::MissingField("switch_rates")),
        }
    }

    /// Largest adjacency eigenvalue per regime.
    pub fn lambda1(&self) -> Result<Vec<f64>> {
        self.adjacency
            .iter()
            .map(|a| top_eigenvalue(a).map(|(l, _)| l))
            .collect()
    }

    /// `Σ_s ρ_s (δ(s) - β(s) λ₁(s))`.
    pub fn extinction_index(&self) -> Result<f64> {
        sis_extinction_index(
            &self.delta,
            &self.beta,
            &self.lambda1()?,
            &self.regime_distribution()?,
        )
    }

    fn family(&self) -> Family {
        if self.n_regimes() > 1 {
            Family::SwitchingDiffusion
        } else {
            Family::Sde
        }
    }
}

struct Coeffs {
    adjacency: Vec<DMatrix<f64>>,
    beta: Vec<f64>,
    delta: Vec<f64>,
    noise: SisNoise,
}

impl Coeffs {
    fn b(&self, s: usize, x: &[f64]) -> Vec<f64> {
        let a = &self.adjacency[s];
        (0..x.len())
            .map(|i| (0..x.len()).map(|j| a[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Per-node `(f_i, g_i)` at `(v, r, s)`: drift and noise of `dx_i / r`.
    fn scaled(&self, v: &[f64], r: f64, s: usize) -> (Vec<f64>, Vec<f64>) {
        let b = self.b(s, v);
        let n = v.len();
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        for i in 0..n {
            let xi = r * v[i];
            f[i] = self.beta[s] * b[i] * (1.0 - xi) - self.delta[s] * v[i];
            g[i] = self.noise.eval(i, xi, s) * b[i] * (1.0 - xi);
        }
        (f, g)
    }
}

fn polar(x: &[f64]) -> (Vec<f64>, f64) {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r > 0.0 {
        (x.iter().map(|v| v / r).collect(), r)
    } else {
        let u = 1.0 / (x.len() as f64).sqrt();
        (vec![u; x.len()], 0.0)
    }
}

/// Builds the SIS model, its compact-space suite with `V = -log |x|`, the
/// lifted `(v, r, s)` model and the polar map.
pub fn make_sis(p: &SisParams) -> Result<ModelBundle> {
    p.validate()?;
    let n = p.n_nodes();
    let family = p.family();
    let co = Arc::new(Coeffs {
        adjacency: p.adjacency.clone(),
        beta: p.beta.clone(),
        delta: p.delta.clone(),
        noise: p.noise.clone(),
    });

    let c = co.clone();
    let c2 = co.clone();
    let mut b = ModelSpec::builder("sis", family, n)
        .drift(move |st| {
            let s = st.regime_or_zero();
            let b = c.b(s, &st.x);
            (0..n)
                .map(|i| c.beta[s] * b[i] * (1.0 - st.x[i]) - c.delta[s] * st.x[i])
                .collect()
        })
        .diffusion(n, move |st| {
            let s = st.regime_or_zero();
            let b = c2.b(s, &st.x);
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    c2.noise.eval(i, st.x[i], s) * b[i] * (1.0 - st.x[i])
                } else {
                    0.0
                }
            })
        })
        .domain(Domain::unbounded().with(Constraint::UnitInterval(0..n)))
        .extinction_distance(distance_to_origin);
    if let (Family::SwitchingDiffusion, Some(q)) = (family, &p.q) {
        b = b.constant_rates(q.clone());
    }
    let model = b.build()?;

    let c = co.clone();
    let c2 = co.clone();
    let mut b = ModelSpec::builder("sis-lifted", family, n + 1)
        .drift(move |st| {
            let s = st.regime_or_zero();
            let (v, r) = (&st.x[..n], st.x[n]);
            let (f, g) = c.scaled(v, r, s);
            let rho: f64 = (0..n)
                .map(|j| v[j] * f[j] + 0.5 * (1.0 - v[j] * v[j]) * g[j] * g[j])
                .sum();
            let s2: f64 = (0..n).map(|j| v[j] * v[j] * g[j] * g[j]).sum();
            let mut out: Vec<f64> = (0..n)
                .map(|i| f[i] - v[i] * rho + v[i] * s2 - v[i] * g[i] * g[i])
                .collect();
            out.push(r * rho);
            out
        })
        .diffusion(n, move |st| {
            let s = st.regime_or_zero();
            let (v, r) = (&st.x[..n], st.x[n]);
            let (_, g) = c2.scaled(v, r, s);
            DMatrix::from_fn(n + 1, n, |i, k| {
                if i < n {
                    let d = if i == k { g[i] } else { 0.0 };
                    d - v[i] * v[k] * g[k]
                } else {
                    r * v[k] * g[k]
                }
            })
        })
        .domain(
            Domain::unbounded()
                .with(Constraint::NonNegative(0..n))
                .with(Constraint::UnitSphere(0..n))
                .with(Constraint::NonNegative(n..n + 1)),
        )
        .extinction_distance(move |st| st.x[n].abs());
    if let (Family::SwitchingDiffusion, Some(q)) = (family, &p.q) {
        b = b.constant_rates(q.clone());
    }
    let lifted = b.build()?;

    let forward = Arc::new(move |y: &StateVector| StateVector {
        x: y.x[..n].iter().map(|v| v * y.x[n]).collect(),
        regime: y.regime,
    });
    let lift = Arc::new(move |x: &StateVector| {
        let (mut v, r) = polar(&x.x);
        v.push(r);
        StateVector {
            x: v,
            regime: x.regime,
        }
    });
    let map = QuadrupleMap::new(
        forward,
        lift.clone(),
        "r = 0: the unit sphere times the regime set",
    );

    let c = co.clone();
    let h = obs(move |y| {
        let s = y.regime_or_zero();
        let (v, r) = (&y.x[..n], y.x[n]);
        let (_, g) = c.scaled(v, r, s);
        let b = c.b(s, v);
        let mut out = c.delta[s];
        for i in 0..n {
            out += 0.5 * g[i] * g[i] * (2.0 * v[i] * v[i] - 1.0);
            out -= c.beta[s] * b[i] * (1.0 - r * v[i]) * v[i];
        }
        out
    });
    let c = co.clone();
    let gamma_v = obs(move |st| {
        let s = st.regime_or_zero();
        let b = c.b(s, &st.x);
        let r2: f64 = st.x.iter().map(|v| v * v).sum();
        (0..n)
            .map(|i| {
                let g = c.noise.eval(i, st.x[i], s) * b[i] * (1.0 - st.x[i]);
                g * g * st.x[i] * st.x[i] / (r2 * r2)
            })
            .sum()
    });
    let v = obs(|st| -st.norm().ln());
    let suite = LyapunovSuite::compact(v, h, gamma_v, p.extinction_index()?).with_lift(lift);
    Ok(ModelBundle {
        model,
        suite,
        boundary: Some(lifted),
        map: Some(map),
        species_h: Vec::new(),
    })
}

/// Adjacency matrix of the complete graph on `n` nodes.
pub fn complete_graph(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 })
}

/// Boundary initial conditions `(v, r = 0)` for a network of `n` nodes: the
/// uniform direction and each coordinate axis, in regime 0 when switching.
pub fn boundary_ics(p: &SisParams) -> Vec<StateVector> {
    let n = p.n_nodes();
    let regime = (p.n_regimes() > 1).then_some(0);
    let mut out = Vec::with_capacity(n + 1);
    let mut uniform = vec![1.0 / (n as f64).sqrt(); n];
    uniform.push(0.0);
    out.push(StateVector { x: uniform, regime });
    for i in 0..n.min(4) {
        let mut e = vec![0.0; n + 1];
        e[i] = 1.0;
        out.push(StateVector { x: e, regime });
    }
    out
}
