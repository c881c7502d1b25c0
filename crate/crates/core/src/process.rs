//! State spaces, trajectories, the model abstraction and reproducible randomness.
//!
//! All simulators share the types defined here. A [`ModelSpec`] is immutable once
//! built and can be shared across replica threads; randomness comes from
//! [`RngStream`], a counter-based ChaCha stream addressed by `(seed, stream_id)`.

use std::borrow::Cow;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A function of the state, shared between threads.
pub type StateFn<T> = Arc<dyn Fn(&StateVector) -> T + Send + Sync>;

/// Real-valued observable of the state.
pub type Observable = StateFn<f64>;

/// One step of a discrete-time chain: `(state, standard normal noise) -> next state`.
pub type StepMap = Arc<dyn Fn(&StateVector, &[f64]) -> StateVector + Send + Sync>;

/// Wraps a closure as an [`Observable`].
pub fn observable<F>(f: F) -> Observable
where
    F: Fn(&StateVector) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Continuous coordinates plus an optional regime index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub x: Vec<f64>,
    pub regime: Option<usize>,
}

impl StateVector {
    pub fn new(x: Vec<f64>) -> Self {
        Self { x, regime: None }
    }

    pub fn with_regime(x: Vec<f64>, regime: usize) -> Self {
        Self {
            x,
            regime: Some(regime),
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Regime index, treating regime-free states as regime 0.
    pub fn regime_or_zero(&self) -> usize {
        self.regime.unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A cadlag sample path recorded on a time grid.
///
/// `jumps` lists indices `k` at which the path is discontinuous, i.e. the state at
/// `times[k]` differs from the left limit. For switching diffusions these are the
/// regime changes; for poissonized chains every clock arrival is a jump.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub jumps: Vec<usize>,
    /// Set when the run stopped because the path came within `floor_epsilon` of
    /// the extinction set.
    pub stopped_early: bool,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn last_state(&self) -> Option<&StateVector> {
        self.states.last()
    }

    /// Appends a grid point. `jump` marks a discontinuity at this time.
    pub fn push(&mut self, t: f64, state: StateVector, jump: bool) {
        if jump {
            self.jumps.push(self.times.len());
        }
        self.times.push(t);
        self.states.push(state);
    }

    pub fn is_jump(&self, index: usize) -> bool {
        self.jumps.binary_search(&index).is_ok()
    }

    /// Checks the structural invariants: `times[0] = 0`, strictly increasing
    /// times, matching lengths, and constant regime between jumps.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.times.len() != self.states.len() {
            return Err(format!(
                "{} times but {} states",
                self.times.len(),
                self.states.len()
            ));
        }
        if let Some(&t0) = self.times.first() {
            if t0 != 0.0 {
                return Err(format!("first time is {t0}, expected 0"));
            }
        }
        for (k, w) in self.times.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(format!("times not increasing at index {}", k + 1));
            }
        }
        for (k, w) in self.states.windows(2).enumerate() {
            if w[0].regime != w[1].regime && !self.is_jump(k + 1) {
                return Err(format!("regime changed at index {} without a jump", k + 1));
            }
        }
        Ok(())
    }
}

/// Which kind of Markov process a [`ModelSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    SwitchingDiffusion,
    Sde,
    DiscreteChain,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::SwitchingDiffusion => "SwitchingDiffusion",
            Family::Sde => "Sde",
            Family::DiscreteChain => "DiscreteChain",
        }
    }
}

/// A coordinate constraint applied after every step.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    NonNegative(Range<usize>),
    UnitInterval(Range<usize>),
    /// Renormalises the coordinates in the range onto the unit sphere.
    UnitSphere(Range<usize>),
}

/// Domain description of a model: the constraints `domain_projection` enforces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Domain {
    constraints: Vec<Constraint>,
}

impl Domain {
    pub fn unbounded() -> Self {
        Self::default()
    }

    pub fn with(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn project(&self, x: &mut [f64]) {
        for c in &self.constraints {
            match c {
                Constraint::NonNegative(r) => {
                    for v in &mut x[r.clone()] {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
                Constraint::UnitInterval(r) => {
                    for v in &mut x[r.clone()] {
                        *v = v.clamp(0.0, 1.0);
                    }
                }
                Constraint::UnitSphere(r) => {
                    let n = x[r.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
                    if n > 0.0 && n.is_finite() {
                        for v in &mut x[r.clone()] {
                            *v /= n;
                        }
                    }
                }
            }
        }
    }

    /// True when every sign/box constraint holds (sphere constraints to 1e-9).
    pub fn contains(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|c| match c {
            Constraint::NonNegative(r) => x[r.clone()].iter().all(|&v| v >= 0.0),
            Constraint::UnitInterval(r) => x[r.clone()].iter().all(|&v| (0.0..=1.0).contains(&v)),
            Constraint::UnitSphere(r) => {
                let n2 = x[r.clone()].iter().map(|v| v * v).sum::<f64>();
                (n2 - 1.0).abs() < 1e-9
            }
        })
    }
}

/// Regime switching rates `Q(x)`.
#[derive(Clone)]
pub enum SwitchRates {
    Constant(DMatrix<f64>),
    StateDependent(StateFn<DMatrix<f64>>),
}

impl SwitchRates {
    pub fn at(&self, x: &StateVector) -> Cow<'_, DMatrix<f64>> {
        match self {
            SwitchRates::Constant(q) => Cow::Borrowed(q),
            SwitchRates::StateDependent(f) => Cow::Owned(f(x)),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, SwitchRates::Constant(_))
    }
}

impl fmt::Debug for SwitchRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwitchRates::Constant(q) => f.debug_tuple("Constant").field(q).finish(),
            SwitchRates::StateDependent(_) => f.write_str("StateDependent(..)"),
        }
    }
}

/// Checks that `q` is an `m x m` generator: nonnegative off-diagonal entries and
/// zero row sums within `1e-12` (relative to the largest entry when that exceeds 1).
pub fn validate_rate_matrix(q: &DMatrix<f64>, m: usize) -> Result<()> {
    if q.nrows() != m || q.ncols() != m {
        return Err(Error::InvalidRateMatrix(format!(
            "expected {m}x{m}, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    let scale = q.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    for i in 0..m {
        let mut sum = 0.0;
        for j in 0..m {
            let v = q[(i, j)];
            if !v.is_finite() {
                return Err(Error::InvalidRateMatrix(format!(
                    "entry ({i},{j}) is not finite"
                )));
            }
            if i != j && v < 0.0 {
                return Err(Error::InvalidRateMatrix(format!(
                    "negative off-diagonal rate {v} at ({i},{j})"
                )));
            }
            sum += v;
        }
        if sum.abs() > 1e-12 * scale {
            return Err(Error::InvalidRateMatrix(format!("row {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// A simulatable Markov process family with its extinction-set description.
#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    family: Family,
    dim: usize,
    noise_dim: usize,
    n_regimes: usize,
    drift: Option<StateFn<Vec<f64>>>,
    diffusion: Option<StateFn<DMatrix<f64>>>,
    switch_rates: Option<SwitchRates>,
    step_map: Option<StepMap>,
    domain: Domain,
    extinction_distance: Observable,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("family", &self.family)
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("n_regimes", &self.n_regimes)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    pub fn builder(name: impl Into<String>, family: Family, dim: usize) -> ModelBuilder {
        ModelBuilder {
            name: name.into(),
            family,
            dim,
            noise_dim: None,
            n_regimes: None,
            drift: None,
            diffusion: None,
            switch_rates: None,
            step_map: None,
            domain: Domain::unbounded(),
            extinction_distance: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    /// Number of regimes `m`; 1 for models without switching.
    pub fn n_regimes(&self) -> usize {
        self.n_regimes
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn switch_rates(&self) -> Option<&SwitchRates> {
        self.switch_rates.as_ref()
    }

    pub fn drift(&self, x: &StateVector) -> Vec<f64> {
        match &self.drift {
            Some(f) => f(x),
            None => vec![0.0; self.dim],
        }
    }

    pub fn diffusion(&self, x: &StateVector) -> DMatrix<f64> {
        match &self.diffusion {
            Some(f) => f(x),
            None => DMatrix::zeros(self.dim, self.noise_dim),
        }
    }

    pub fn rates(&self, x: &StateVector) -> Option<Cow<'_, DMatrix<f64>>> {
        self.switch_rates.as_ref().map(|q| q.at(x))
    }

    pub fn step_map(&self) -> Option<&StepMap> {
        self.step_map.as_ref()
    }

    pub fn project(&self, x: &mut [f64]) {
        self.domain.project(x);
    }

    pub fn distance_to_extinction(&self, x: &StateVector) -> f64 {
        (self.extinction_distance)(x)
    }

    /// A state of the right shape: zeros, in regime 0 when the model switches.
    pub fn probe_state(&self) -> StateVector {
        StateVector {
            x: vec![0.0; self.dim],
            regime: (self.family == Family::SwitchingDiffusion).then_some(0),
        }
    }

    /// Checks that `x` has the model's dimension and a valid regime index.
    pub fn check_state(&self, x: &StateVector) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "state",
                expected: self.dim,
                got: x.dim(),
            });
        }
        if let Some(r) = x.regime {
            if r >= self.n_regimes {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    len: self.n_regimes,
                });
            }
        }
        Ok(())
    }
}

/// Builder behind `make_model`; `build` validates every invariant eagerly.
pub struct ModelBuilder {
    name: String,
    family: Family,
    dim: usize,
    noise_dim: Option<usize>,
    n_regimes: Option<usize>,
    drift: Option<StateFn<Vec<f64>>>,
    diffusion: Option<StateFn<DMatrix<f64>>>,
    switch_rates: Option<SwitchRates>,
    step_map: Option<StepMap>,
    domain: Domain,
    extinction_distance: Option<Observable>,
}

impl ModelBuilder {
    pub fn drift<F>(mut self, f: F) -> Self
    where
        F: Fn(&StateVector) -> Vec<f64> + Send + Sync + 'static,
    {
        self.drift = Some(Arc::new(f));
        self
    }

    pub fn diffusion<F>(mut self, noise_dim: usize, f: F) -> Self
    where
        F: Fn(&StateVector) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.noise_dim = Some(noise_dim);
        self.diffusion = Some(Arc::new(f));
        self
    }

    pub fn constant_rates(mut self, q: DMatrix<f64>) -> Self {
        self.n_regimes = Some(q.nrows());
        self.switch_rates = Some(SwitchRates::Constant(q));
        self
    }

    pub fn state_rates<F>(mut self, m: usize, f: F) -> Self
    where
        F: Fn(&StateVector) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.n_regimes = Some(m);
        self.switch_rates = Some(SwitchRates::StateDependent(Arc::new(f)));
        self
    }

    pub fn step_map<F>(mut self, noise_dim: usize, f: F) -> Self
    where
        F: Fn(&StateVector, &[f64]) -> StateVector + Send + Sync + 'static,
    {
        self.noise_dim = Some(noise_dim);
        self.step_map = Some(Arc::new(f));
        self
    }

    pub fn domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn extinction_distance<F>(mut self, f: F) -> Self
    where
        F: Fn(&StateVector) -> f64 + Send + Sync + 'static,
    {
        self.extinction_distance = Some(Arc::new(f));
        self
    }

    pub fn build(self) -> Result<ModelSpec> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter(
                "model dimension must be positive".into(),
            ));
        }
        let extinction_distance = self
            .extinction_distance
            .ok_or(Error::MissingField("extinction_distance"))?;
        let (need_drift, need_diffusion, need_rates, need_step) = match self.family {
            Family::SwitchingDiffusion => (true, true, true, false),
            Family::Sde => (true, true, false, false),
            Family::DiscreteChain => (false, false, false, true),
        };
        let present = [
            ("drift", need_drift, self.drift.is_some()),
            ("diffusion", need_diffusion, self.diffusion.is_some()),
            ("switch_rates", need_rates, self.switch_rates.is_some()),
            ("step_map", need_step, self.step_map.is_some()),
        ];
        for (field, needed, has) in present {
            if needed && !has {
                return Err(Error::MissingField(field));
            }
            if !needed && has {
                return Err(Error::InvalidParameter(format!(
                    "field `{field}` is not used by the {} family",
                    self.family.as_str()
                )));
            }
        }
        for c in self.domain.constraints() {
            let r = match c {
                Constraint::NonNegative(r)
                | Constraint::UnitInterval(r)
                | Constraint::UnitSphere(r) => r,
            };
            if r.end > self.dim {
                return Err(Error::DimensionMismatch {
                    what: "domain constraint range",
                    expected: self.dim,
                    got: r.end,
                });
            }
        }

        let spec = ModelSpec {
            name: self.name,
            family: self.family,
            dim: self.dim,
            noise_dim: self.noise_dim.unwrap_or(0),
            n_regimes: self.n_regimes.unwrap_or(1),
            drift: self.drift,
            diffusion: self.diffusion,
            switch_rates: self.switch_rates,
            step_map: self.step_map,
            domain: self.domain,
            extinction_distance,
        };

        let probe = spec.probe_state();
        if let Some(f) = &spec.drift {
            let d = f(&probe);
            if d.len() != spec.dim {
                return Err(Error::DimensionMismatch {
                    what: "drift",
                    expected: spec.dim,
                    got: d.len(),
                });
            }
        }
        if let Some(f) = &spec.diffusion {
            let s = f(&probe);
            if s.nrows() != spec.dim {
                return Err(Error::DimensionMismatch {
                    what: "diffusion rows",
                    expected: spec.dim,
                    got: s.nrows(),
                });
            }
            if s.ncols() != spec.noise_dim {
                return Err(Error::DimensionMismatch {
                    what: "diffusion columns",
                    expected: spec.noise_dim,
                    got: s.ncols(),
                });
            }
        }
        if let Some(q) = &spec.switch_rates {
            if spec.n_regimes == 0 {
                return Err(Error::InvalidRateMatrix("empty regime set".into()));
            }
            validate_rate_matrix(&q.at(&probe), spec.n_regimes)?;
        }
        if let Some(f) = &spec.step_map {
            let noise = vec![0.0; spec.noise_dim];
            let next = f(&probe, &noise);
            if next.dim() != spec.dim {
                return Err(Error::DimensionMismatch {
                    what: "step_map output",
                    expected: spec.dim,
                    got: next.dim(),
                });
            }
        }
        Ok(spec)
    }
}

/// A reproducible random stream addressed by `(seed, stream_id)`.
///
/// Backed by ChaCha12 with the stream id mapped onto the cipher's stream counter,
/// so distinct ids give independent, non-overlapping keystreams for the same seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    /// Stream for replica `replica` of initial condition `ic`.
    pub fn for_replica(seed: u64, ic: usize, replica: usize) -> Self {
        Self::new(seed, ((ic as u64) << 32) | replica as u64)
    }

    /// Stream for replica `replica` started from `x0`. The id depends on the
    /// initial condition's value rather than its position in a list, so
    /// reordering a set of initial conditions leaves every run unchanged.
    pub fn for_state(seed: u64, x0: &StateVector, replica: usize) -> Self {
        let mut h = splitmix64(x0.regime.map_or(u64::MAX, |r| r as u64));
        for v in &x0.x {
            h = splitmix64(h ^ v.to_bits());
        }
        Self::new(seed, splitmix64(h ^ splitmix64(replica as u64)))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.rng.sample(StandardNormal);
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Exponential with the given rate.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        let e: f64 = self.rng.sample(Exp1);
        e / rate
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random::<u64>()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Euclidean distance to the origin, the extinction set `{0}` of several models.
pub fn distance_to_origin(x: &StateVector) -> f64 {
    x.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d_sde() -> ModelBuilder {
        ModelSpec::builder("test", Family::Sde, 1)
            .drift(|x| vec![-x.x[0]])
            .diffusion(1, |_| DMatrix::from_element(1, 1, 0.0))
            .extinction_distance(distance_to_origin)
    }

    #[test]
    fn builder_accepts_valid_sde() {
        let m = one_d_sde().build().unwrap();
        assert_eq!(m.dim(), 1);
        assert_eq!(m.n_regimes(), 1);
        assert_eq!(m.family(), Family::Sde);
    }

    #[test]
    fn zero_dimension_rejected() {
        let r = ModelSpec::builder("z", Family::Sde, 0)
            .drift(|_| vec![])
            .diffusion(0, |_| DMatrix::zeros(0, 0))
            .extinction_distance(|_| 0.0)
            .build();
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn missing_fields_reported() {
        let r = ModelSpec::builder("m", Family::Sde, 1)
            .drift(|_| vec![0.0])
            .extinction_distance(distance_to_origin)
            .build();
        assert_eq!(r.unwrap_err(), Error::MissingField("diffusion"));

        let r = ModelSpec::builder("m", Family::SwitchingDiffusion, 1)
            .drift(|_| vec![0.0])
            .diffusion(1, |_| DMatrix::zeros(1, 1))
            .extinction_distance(distance_to_origin)
            .build();
        assert_eq!(r.unwrap_err(), Error::MissingField("switch_rates"));

        let r = ModelSpec::builder("m", Family::DiscreteChain, 1)
            .extinction_distance(distance_to_origin)
            .build();
        assert_eq!(r.unwrap_err(), Error::MissingField("step_map"));
    }

    #[test]
    fn extra_field_rejected() {
        let r = one_d_sde()
            .constant_rates(DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]))
            .build();
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn drift_dimension_checked() {
        let r = ModelSpec::builder("m", Family::Sde, 2)
            .drift(|_| vec![0.0])
            .diffusion(1, |_| DMatrix::zeros(2, 1))
            .extinction_distance(distance_to_origin)
            .build();
        assert!(matches!(
            r,
            Err(Error::DimensionMismatch { what: "drift", .. })
        ));
    }

    #[test]
    fn rate_matrix_validation() {
        let good = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        assert!(validate_rate_matrix(&good, 2).is_ok());
        let bad_sum = DMatrix::from_row_slice(2, 2, &[-1.0, 1.1, 1.0, -1.0]);
        assert!(matches!(
            validate_rate_matrix(&bad_sum, 2),
            Err(Error::InvalidRateMatrix(_))
        ));
        let negative = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, -1.0]);
        assert!(matches!(
            validate_rate_matrix(&negative, 2),
            Err(Error::InvalidRateMatrix(_))
        ));
    }

    #[test]
    fn domain_projection() {
        let d = Domain::unbounded()
            .with(Constraint::UnitInterval(0..2))
            .with(Constraint::NonNegative(2..3));
        let mut x = [-0.5, 1.5, -2.0, -3.0];
        d.project(&mut x);
        assert_eq!(x, [0.0, 1.0, 0.0, -3.0]);
        assert!(d.contains(&x));

        let s = Domain::unbounded().with(Constraint::UnitSphere(0..2));
        let mut y = [3.0, 4.0, 7.0];
        s.project(&mut y);
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15 && y[2] == 7.0);
    }

    #[test]
    fn rng_streams_reproducible_and_distinct() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let mut c = RngStream::new(7, 4);
        let va: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let vb: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        let vc: Vec<u64> = (0..16).map(|_| c.next_u64()).collect();
        assert_eq!(va, vb);
        assert_ne!(va, vc);
    }

    #[test]
    fn trajectory_invariants() {
        let mut t = Trajectory::new();
        t.push(0.0, StateVector::with_regime(vec![0.0], 0), false);
        t.push(0.5, StateVector::with_regime(vec![0.0], 1), true);
        t.push(1.0, StateVector::with_regime(vec![0.0], 1), false);
        assert!(t.check_invariants().is_ok());
        t.jumps.clear();
        assert!(t.check_invariants().is_err());
    }
}
