//! Time stepping: Euler-Maruyama, thinned regime clocks, discrete chains and
//! Poissonization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{Family, ModelSpec, RngStream, StateVector, Trajectory};

/// Step size, horizon and stopping rules for a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Upper bound on `|q_ii(x)|` used by the thinning clock.
    #[serde(default = "default_rate_bound")]
    pub max_rate_bound: f64,
    /// Runs stop once the distance to the extinction set drops below this.
    #[serde(default = "default_floor")]
    pub floor_epsilon: f64,
    /// Time discarded before occupation averages start.
    #[serde(default)]
    pub burn_in: f64,
    /// Keep every `record_stride`-th grid point (jumps and the final point are
    /// always kept).
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_rate_bound() -> f64 {
    1.0
}

fn default_floor() -> f64 {
    1e-300
}

fn default_stride() -> usize {
    1
}

impl SimConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            max_rate_bound: default_rate_bound(),
            floor_epsilon: default_floor(),
            burn_in: 0.0,
            record_stride: 1,
        }
    }

    pub fn with_rate_bound(mut self, bound: f64) -> Self {
        self.max_rate_bound = bound;
        self
    }

    pub fn with_floor(mut self, eps: f64) -> Self {
        self.floor_epsilon = eps;
        self
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.dt) || !pos(self.t_final) {
            return Err(Error::InvalidParameter(
                "dt and t_final must be positive".into(),
            ));
        }
        if self.dt > self.t_final {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds t_final = {}",
                self.dt, self.t_final
            )));
        }
        if !pos(self.floor_epsilon) {
            return Err(Error::InvalidParameter(
                "floor_epsilon must be positive".into(),
            ));
        }
        if !pos(self.max_rate_bound) {
            return Err(Error::InvalidParameter(
                "max_rate_bound must be positive".into(),
            ));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.t_final) {
            return Err(Error::InvalidParameter(
                "burn_in must lie in [0, t_final)".into(),
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter(
                "record_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn check_finite(x: &StateVector, t: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteState { t })
    }
}

/// One Euler-Maruyama step. `noise` holds standard normals; the `sqrt(dt)`
/// scaling is applied here. The regime is left unchanged.
pub fn em_step(model: &ModelSpec, x: &StateVector, dt: f64, noise: &[f64]) -> Result<StateVector> {
    em_step_at(model, x, dt, noise, dt)
}

fn em_step_at(
    model: &ModelSpec,
    x: &StateVector,
    dt: f64,
    noise: &[f64],
    t: f64,
) -> Result<StateVector> {
    if noise.len() != model.noise_dim() {
        return Err(Error::DimensionMismatch {
            what: "noise",
            expected: model.noise_dim(),
            got: noise.len(),
        });
    }
    let drift = model.drift(x);
    let sigma = model.diffusion(x);
    let sq = dt.sqrt();
    let mut out = x.x.clone();
    for (i, v) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (k, z) in noise.iter().enumerate() {
            s += sigma[(i, k)] * z;
        }
        *v += drift[i] * dt + s * sq;
    }
    model.project(&mut out);
    let next = StateVector {
        x: out,
        regime: x.regime,
    };
    check_finite(&next, t)?;
    Ok(next)
}

/// Result of one switching step: the end state and every regime change inside
/// the step as `(offset from step start, state at the change)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchOutcome {
    pub state: StateVector,
    pub jumps: Vec<(f64, StateVector)>,
}

/// One step of a switching diffusion with regime changes drawn by thinning a
/// rate-`rate_bound` Poisson clock. Rates are evaluated at the step's start
/// coordinates and the current regime; the continuous part is advanced by
/// Euler-Maruyama between accepted events.
pub fn switch_step(
    model: &ModelSpec,
    x: &StateVector,
    dt: f64,
    rate_bound: f64,
    rng: &mut RngStream,
) -> Result<SwitchOutcome> {
    switch_step_at(model, x, dt, rate_bound, rng, 0.0)
}

fn switch_step_at(
    model: &ModelSpec,
    x: &StateVector,
    dt: f64,
    rate_bound: f64,
    rng: &mut RngStream,
    t0: f64,
) -> Result<SwitchOutcome> {
    if model.family() != Family::SwitchingDiffusion {
        return Err(Error::WrongFamily {
            expected: "SwitchingDiffusion",
        });
    }
    if !(dt > 0.0) || !(rate_bound > 0.0) || dt * rate_bound >= 0.1 {
        return Err(Error::InvalidParameter(format!(
            "switching step needs dt * max_rate_bound < 0.1, got {}",
            dt * rate_bound
        )));
    }
    let frozen = x.x.clone();
    let mut cur = x.clone();
    let mut noise = vec![0.0; model.noise_dim()];
    let mut jumps = Vec::new();
    let mut last = 0.0;
    let mut tau = 0.0;
    loop {
        tau += rng.exponential(rate_bound);
        if tau >= dt {
            break;
        }
        let regime = cur.regime_or_zero();
        let probe = StateVector {
            x: frozen.clone(),
            regime: Some(regime),
        };
        let q = model.rates(&probe).expect("switching model has rates");
        let out_rate = -q[(regime, regime)];
        if out_rate > rate_bound * (1.0 + 1e-12) {
            return Err(Error::RateBoundViolated {
                rate: out_rate,
                bound: rate_bound,
            });
        }
        if rng.uniform() * rate_bound >= out_rate {
            continue;
        }
        let pick = rng.uniform() * out_rate;
        let mut acc = 0.0;
        let mut target = regime;
        for j in 0..model.n_regimes() {
            if j == regime {
                continue;
            }
            let rate = q[(regime, j)];
            if rate <= 0.0 {
                continue;
            }
            acc += rate;
            target = j;
            if pick < acc {
                break;
            }
        }
        rng.fill_standard_normal(&mut noise);
        cur = em_step_at(model, &cur, tau - last, &noise, t0 + tau)?;
        cur.regime = Some(target);
        jumps.push((tau, cur.clone()));
        last = tau;
    }
    rng.fill_standard_normal(&mut noise);
    let state = em_step_at(model, &cur, dt - last, &noise, t0 + dt)?;
    Ok(SwitchOutcome { state, jumps })
}

/// One step of a discrete-time chain with freshly drawn standard normal noise.
pub fn discrete_step(
    model: &ModelSpec,
    z: &StateVector,
    rng: &mut RngStream,
) -> Result<StateVector> {
    discrete_step_at(model, z, rng, 1.0)
}

fn discrete_step_at(
    model: &ModelSpec,
    z: &StateVector,
    rng: &mut RngStream,
    t: f64,
) -> Result<StateVector> {
    let map = model.step_map().ok_or(Error::WrongFamily {
        expected: "DiscreteChain",
    })?;
    let mut noise = vec![0.0; model.noise_dim()];
    rng.fill_standard_normal(&mut noise);
    let mut next = map(z, &noise);
    model.project(&mut next.x);
    check_finite(&next, t)?;
    Ok(next)
}

/// Embeds a discrete chain in continuous time with a unit-rate Poisson clock.
/// Every arrival is a jump point; the path ends with a point at `t_final`.
pub fn poissonize(
    chain: &ModelSpec,
    x0: &StateVector,
    rng: &mut RngStream,
    t_final: f64,
) -> Result<Trajectory> {
    if chain.family() != Family::DiscreteChain {
        return Err(Error::WrongFamily {
            expected: "DiscreteChain",
        });
    }
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter("t_final must be positive".into()));
    }
    chain.check_state(x0)?;
    let mut traj = Trajectory::new();
    traj.push(0.0, x0.clone(), false);
    let mut cur = x0.clone();
    let mut t = 0.0;
    loop {
        t += rng.exponential(1.0);
        if t >= t_final {
            break;
        }
        cur = discrete_step_at(chain, &cur, rng, t)?;
        traj.push(t, cur.clone(), true);
    }
    traj.push(t_final, cur, false);
    Ok(traj)
}

/// Per-run outcome of [`simulate_observed`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub t_end: f64,
    pub stopped_early: bool,
    pub points: usize,
}

/// Runs the model and hands every recorded point `(t, state, is_jump)` to
/// `observe` instead of storing it. Grid points are the multiples of `dt`
/// (for discrete chains, the integers), thinned by `record_stride`; regime
/// jumps, early stops and the final point are always reported.
pub fn simulate_observed<F>(
    model: &ModelSpec,
    x0: &StateVector,
    cfg: &SimConfig,
    rng: &mut RngStream,
    mut observe: F,
) -> Result<RunSummary>
where
    F: FnMut(f64, &StateVector, bool),
{
    cfg.validate()?;
    model.check_state(x0)?;
    check_finite(x0, 0.0)?;
    let mut x0 = x0.clone();
    if model.family() == Family::SwitchingDiffusion && x0.regime.is_none() {
        x0.regime = Some(0);
    }
    let watch_floor = model.distance_to_extinction(&x0) > 0.0;
    let (step, n_steps) = match model.family() {
        Family::DiscreteChain => (1.0, (cfg.t_final + 1e-9).floor() as usize),
        _ => (cfg.dt, (cfg.t_final / cfg.dt - 1e-9).ceil() as usize),
    };
    if n_steps == 0 {
        return Err(Error::InvalidParameter(
            "horizon shorter than one chain step".into(),
        ));
    }
    let t_end = match model.family() {
        Family::DiscreteChain => n_steps as f64,
        _ => cfg.t_final,
    };

    observe(0.0, &x0, false);
    let mut points = 1;
    let mut last_t = 0.0;
    let mut cur = x0;
    let mut noise = vec![0.0; model.noise_dim()];
    for k in 0..n_steps {
        let t0 = k as f64 * step;
        let t1 = if k + 1 == n_steps {
            t_end
        } else {
            (k + 1) as f64 * step
        };
        let h = t1 - t0;
        let mut jump_pending = false;
        let next = match model.family() {
            Family::Sde => {
                rng.fill_standard_normal(&mut noise);
                em_step_at(model, &cur, h, &noise, t1)?
            }
            Family::SwitchingDiffusion => {
                let out = switch_step_at(model, &cur, h, cfg.max_rate_bound, rng, t0)?;
                for (tau, s) in &out.jumps {
                    let tj = t0 + tau;
                    if tj > last_t && tj < t1 {
                        observe(tj, s, true);
                        points += 1;
                        last_t = tj;
                    } else {
                        jump_pending = true;
                    }
                }
                out.state
            }
            Family::DiscreteChain => {
                jump_pending = true;
                discrete_step_at(model, &cur, rng, t1)?
            }
        };
        cur = next;
        let last_step = k + 1 == n_steps;
        let hit_floor = watch_floor && model.distance_to_extinction(&cur) < cfg.floor_epsilon;
        if last_step || hit_floor || jump_pending || (k + 1) % cfg.record_stride == 0 {
            observe(t1, &cur, jump_pending);
            points += 1;
            last_t = t1;
        }
        if hit_floor {
            return Ok(RunSummary {
                t_end: t1,
                stopped_early: !last_step,
                points,
            });
        }
    }
    Ok(RunSummary {
        t_end,
        stopped_early: false,
        points,
    })
}

/// Runs the model and records the path.
pub fn simulate(
    model: &ModelSpec,
    x0: &StateVector,
    cfg: &SimConfig,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    let mut traj = Trajectory::new();
    let summary = simulate_observed(model, x0, cfg, rng, |t, s, jump| {
        traj.push(t, s.clone(), jump)
    })?;
    traj.stopped_early = summary.stopped_early;
    Ok(traj)
}

/// Euler-Maruyama path of an SDE driven by caller-supplied standard normal
/// increments, one row of `noise_dim` values per step. Used to couple two
/// simulations through the same Brownian path.
pub fn drive(
    model: &ModelSpec,
    x0: &StateVector,
    dt: f64,
    increments: &[Vec<f64>],
) -> Result<Trajectory> {
    if model.family() != Family::Sde {
        return Err(Error::WrongFamily { expected: "Sde" });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    model.check_state(x0)?;
    let mut traj = Trajectory::new();
    traj.push(0.0, x0.clone(), false);
    let mut cur = x0.clone();
    for (k, z) in increments.iter().enumerate() {
        let t = (k + 1) as f64 * dt;
        cur = em_step_at(model, &cur, dt, z, t)?;
        traj.push(t, cur.clone(), false);
    }
    Ok(traj)
}

/// Merges consecutive pairs of standard normal increments into increments for
/// a step of twice the length: `(z1 + z2) / sqrt(2)`.
pub fn coarsen_increments(increments: &[Vec<f64>]) -> Vec<Vec<f64>> {
    increments
        .chunks_exact(2)
        .map(|p| {
            p[0].iter()
                .zip(&p[1])
                .map(|(a, b)| (a + b) / std::f64::consts::SQRT_2)
                .collect()
        })
        .collect()
}
