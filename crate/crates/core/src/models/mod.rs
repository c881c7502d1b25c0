//! Shipped model families, each bundled with its Lyapunov suite and, where the
//! extinction set needs blowing up, a lifted model and the map back.
//!
//! Lifted models live on the blown-up space and contain their boundary: the
//! boundary dynamics is the lifted model started with radius zero.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrators::drive;
use crate::lyapunov::LyapunovSuite;
use crate::process::{ModelSpec, Observable, StateFn, StateVector};

pub mod ecological;
pub mod kolmogorov;
pub mod linear;
pub mod lorenz;
pub mod sis;

pub use ecological::{lv_map, make_ecological_discrete, EcoParams};
pub use kolmogorov::{lotka_volterra_sde, make_kolmogorov, TechnicalU};
pub use linear::make_linear_sde;
pub use lorenz::{make_lorenz, LorenzParams};
pub use sis::{make_sis, SisNoise, SisParams};

/// Names under which the families are registered.
pub const MODEL_NAMES: [&str; 5] = ["sis", "lorenz", "eco-discrete", "kolmogorov", "linear"];

/// Map from a blown-up space onto the original one.
#[derive(Clone)]
pub struct QuadrupleMap {
    forward: StateFn<StateVector>,
    lift: StateFn<StateVector>,
    boundary: &'static str,
}

impl fmt::Debug for QuadrupleMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuadrupleMap")
            .field("boundary", &self.boundary)
            .finish_non_exhaustive()
    }
}

impl QuadrupleMap {
    pub fn new(
        forward: StateFn<StateVector>,
        lift: StateFn<StateVector>,
        boundary: &'static str,
    ) -> Self {
        Self {
            forward,
            lift,
            boundary,
        }
    }

    pub fn forward(&self, y: &StateVector) -> StateVector {
        (self.forward)(y)
    }

    /// A preimage of `x`; at the extinction set it picks a fixed direction.
    pub fn lift(&self, x: &StateVector) -> StateVector {
        (self.lift)(x)
    }

    pub fn lift_fn(&self) -> StateFn<StateVector> {
        self.lift.clone()
    }

    /// Description of the boundary preimage of the extinction set.
    pub fn boundary(&self) -> &'static str {
        self.boundary
    }
}

/// A model with everything needed to test its extinction criterion.
#[derive(Clone)]
pub struct ModelBundle {
    pub model: ModelSpec,
    pub suite: LyapunovSuite,
    /// Lifted model whose radius-zero states form the boundary.
    pub boundary: Option<ModelSpec>,
    pub map: Option<QuadrupleMap>,
    /// `H_i` per species for the ecological families.
    pub species_h: Vec<Observable>,
}

impl fmt::Debug for ModelBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelBundle")
            .field("model", &self.model)
            .field("suite", &self.suite)
            .field("map", &self.map)
            .finish_non_exhaustive()
    }
}

/// Drives the original and lifted models with the same Brownian increments
/// and returns `max_t |forward(Y_t) - X_t|`.
pub fn intertwining_gap(
    original: &ModelSpec,
    lifted: &ModelSpec,
    map: &QuadrupleMap,
    x0: &StateVector,
    dt: f64,
    increments: &[Vec<f64>],
) -> Result<f64> {
    if original.noise_dim() != lifted.noise_dim() {
        return Err(Error::DimensionMismatch {
            what: "lifted noise",
            expected: original.noise_dim(),
            got: lifted.noise_dim(),
        });
    }
    let x = drive(original, x0, dt, increments)?;
    let y = drive(lifted, &map.lift(x0), dt, increments)?;
    let mut gap = 0.0f64;
    for (a, b) in x.states.iter().zip(&y.states) {
        let fb = map.forward(b);
        let d =
            a.x.iter()
                .zip(&fb.x)
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                .sqrt();
        gap = gap.max(d);
    }
    Ok(gap)
}

pub(crate) fn obs<F>(f: F) -> Observable
where
    F: Fn(&StateVector) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeParameter(format!("{name} = {v}")))
    }
}

/// Minimum coordinate: the Euclidean distance from a point of the closed
/// orthant to the union of its coordinate faces.
pub fn distance_to_faces(x: &StateVector) -> f64 {
    x.x.iter().copied().fold(f64::INFINITY, f64::min).max(0.0)
}
