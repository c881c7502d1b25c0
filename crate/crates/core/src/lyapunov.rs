//! Average-Lyapunov machinery: the function suite attached to a model, Dynkin
//! and quadratic-variation residuals, occupation averages and pointwise checks
//! of the suite inequalities.
//!
//! Time integrals along a [`Trajectory`] use the trapezoid rule between grid
//! points and the left endpoint on any interval that ends in a jump, so a path
//! that is piecewise constant between jumps is integrated exactly.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{Family, ModelSpec, Observable, RngStream, StateFn, StateVector, Trajectory};

/// The functions `V, H, ΓV, W, W', U, U'` and constants `K, α` attached to a model.
///
/// When `lift` is set, `h` lives on the blown-up space and is evaluated at
/// `lift(x)`; everything else takes original states.
#[derive(Clone)]
pub struct LyapunovSuite {
    pub v: Observable,
    pub h: Observable,
    pub gamma_v: Observable,
    pub w: Observable,
    pub w_prime: Observable,
    pub u: Observable,
    pub u_prime: Observable,
    pub k: f64,
    pub alpha_candidate: f64,
    pub lift: Option<StateFn<StateVector>>,
    /// Closed forms of `LW`, `LU` and `ΓW`; finite differences are used when absent.
    pub lw: Option<Observable>,
    pub lu: Option<Observable>,
    pub gamma_w: Option<Observable>,
}

impl fmt::Debug for LyapunovSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovSuite")
            .field("k", &self.k)
            .field("alpha_candidate", &self.alpha_candidate)
            .field("lifted", &self.lift.is_some())
            .finish_non_exhaustive()
    }
}

impl LyapunovSuite {
    /// Suite for a compact state space: `W = W' = U = U' = 1` and `K = 1`.
    pub fn compact(
        v: Observable,
        h: Observable,
        gamma_v: Observable,
        alpha_candidate: f64,
    ) -> Self {
        let one: Observable = std::sync::Arc::new(|_: &StateVector| 1.0);
        let zero: Observable = std::sync::Arc::new(|_: &StateVector| 0.0);
        Self {
            v,
            h,
            gamma_v,
            w: one.clone(),
            w_prime: one.clone(),
            u: one.clone(),
            u_prime: one,
            k: 1.0,
            alpha_candidate,
            lift: None,
            lw: Some(zero.clone()),
            lu: Some(zero.clone()),
            gamma_w: Some(zero),
        }
    }

    pub fn with_lift(mut self, lift: StateFn<StateVector>) -> Self {
        self.lift = Some(lift);
        self
    }

    /// `H` at an original state, going through the lift when there is one.
    pub fn h_at(&self, x: &StateVector) -> f64 {
        match &self.lift {
            Some(l) => (self.h)(&l(x)),
            None => (self.h)(x),
        }
    }
}

fn eval(f: &Observable, x: &StateVector, t: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteObservable { t })
    }
}

fn series(traj: &Trajectory, f: &Observable) -> Result<Vec<f64>> {
    traj.states
        .iter()
        .zip(&traj.times)
        .map(|(s, &t)| eval(f, s, t))
        .collect()
}

/// `∫ g ds` over `[t_k, t_{k+1}]` given the endpoint values.
fn interval(traj: &Trajectory, k: usize, gk: f64, gk1: f64) -> f64 {
    let h = traj.times[k + 1] - traj.times[k];
    if traj.is_jump(k + 1) {
        gk * h
    } else {
        0.5 * (gk + gk1) * h
    }
}

fn cumulative_integral(traj: &Trajectory, g: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..g.len().saturating_sub(1) {
        acc += interval(traj, k, g[k], g[k + 1]);
        out.push(acc);
    }
    out
}

/// `M_t = f(X_t) - f(X_0) - ∫_0^t Lf(X_s) ds` on the trajectory grid.
pub fn dynkin_residual(traj: &Trajectory, f: &Observable, lf: &Observable) -> Result<Vec<f64>> {
    let fv = series(traj, f)?;
    let lv = series(traj, lf)?;
    let int = cumulative_integral(traj, &lv);
    Ok(fv.iter().zip(&int).map(|(v, i)| v - fv[0] - i).collect())
}

/// `(M_t)^2 - ∫_0^t Γf(X_s) ds` on the trajectory grid.
pub fn qv_residual(
    traj: &Trajectory,
    f: &Observable,
    lf: &Observable,
    gf: &Observable,
) -> Result<Vec<f64>> {
    let m = dynkin_residual(traj, f, lf)?;
    let gv = series(traj, gf)?;
    let int = cumulative_integral(traj, &gv);
    Ok(m.iter().zip(&int).map(|(m, i)| m * m - i).collect())
}

/// Streaming time averages `μ_t g` of named observables after a burn-in.
///
/// Integrals are kept relative to each observable's value at the start of the
/// window, so a constant observable averages to itself exactly.
pub struct OccupationAccumulator {
    burn_in: f64,
    elapsed: f64,
    names: Vec<String>,
    observables: Vec<Observable>,
    reference: Vec<f64>,
    integrals: Vec<f64>,
    last: Option<(f64, Vec<f64>)>,
}

impl OccupationAccumulator {
    pub fn new(burn_in: f64) -> Self {
        Self {
            burn_in,
            elapsed: 0.0,
            names: Vec::new(),
            observables: Vec::new(),
            reference: Vec::new(),
            integrals: Vec::new(),
            last: None,
        }
    }

    /// Registers an observable. Must be called before the first update.
    pub fn track(mut self, name: impl Into<String>, g: Observable) -> Self {
        self.names.push(name.into());
        self.observables.push(g);
        self
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    /// Feeds the next recorded point; `jump` marks a discontinuity at `t`.
    pub fn update(&mut self, t: f64, state: &StateVector, jump: bool) -> Result<()> {
        let vals = self
            .observables
            .iter()
            .map(|g| eval(g, state, t))
            .collect::<Result<Vec<f64>>>()?;
        if let Some((t0, prev)) = &self.last {
            let t0 = *t0;
            if t < t0 {
                return Err(Error::InvalidParameter(format!(
                    "time went backwards: {t} < {t0}"
                )));
            }
            let start = t0.max(self.burn_in);
            if t > start {
                let span = t - t0;
                let frac = if span > 0.0 { (start - t0) / span } else { 0.0 };
                let first = self.elapsed == 0.0 && self.reference.is_empty();
                let mut refs = Vec::new();
                for (j, (&a, &b)) in prev.iter().zip(&vals).enumerate() {
                    let a_start = if jump { a } else { a + (b - a) * frac };
                    if first {
                        refs.push(a_start);
                    }
                    let r = if first { a_start } else { self.reference[j] };
                    let piece = if jump {
                        (a_start - r) * (t - start)
                    } else {
                        0.5 * ((a_start - r) + (b - r)) * (t - start)
                    };
                    self.integrals[j] += piece;
                }
                if first {
                    self.reference = refs;
                }
                self.elapsed += t - start;
            }
        } else {
            self.integrals = vec![0.0; self.observables.len()];
        }
        self.last = Some((t, vals));
        Ok(())
    }

    pub fn average(&self, name: &str) -> Result<f64> {
        let j = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown observable `{name}`")))?;
        self.average_at(j)
    }

    fn average_at(&self, j: usize) -> Result<f64> {
        if self.elapsed <= 0.0 {
            return Err(Error::EmptyWindow);
        }
        Ok(self.reference[j] + self.integrals[j] / self.elapsed)
    }

    pub fn averages(&self) -> Result<BTreeMap<String, f64>> {
        (0..self.names.len())
            .map(|j| Ok((self.names[j].clone(), self.average_at(j)?)))
            .collect()
    }
}

/// `(1 / (t - burn_in)) ∫_{burn_in}^t g(X_s) ds` along the whole trajectory.
pub fn occupation_average(traj: &Trajectory, g: &Observable, burn_in: f64) -> Result<f64> {
    if traj.len() < 2 || !(burn_in < traj.duration()) {
        return Err(Error::EmptyWindow);
    }
    let mut acc = OccupationAccumulator::new(burn_in).track("g", g.clone());
    for (k, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        acc.update(*t, s, traj.is_jump(k))?;
    }
    acc.average("g")
}

fn fd_steps(x: &[f64], scale: f64) -> Vec<f64> {
    x.iter().map(|v| scale * (1.0 + v.abs())).collect()
}

fn shifted(x: &StateVector, moves: &[(usize, f64)]) -> StateVector {
    let mut y = x.clone();
    for &(i, d) in moves {
        y.x[i] += d;
    }
    y
}

fn gradient(f: &Observable, x: &StateVector) -> Vec<f64> {
    let h = fd_steps(&x.x, 1e-5);
    (0..x.dim())
        .map(|i| (f(&shifted(x, &[(i, h[i])])) - f(&shifted(x, &[(i, -h[i])]))) / (2.0 * h[i]))
        .collect()
}

fn regime_differences(model: &ModelSpec, f: &Observable, x: &StateVector) -> Vec<(f64, f64)> {
    let Some(q) = model.rates(x) else {
        return Vec::new();
    };
    let a = x.regime_or_zero();
    let fa = f(x);
    (0..model.n_regimes())
        .filter(|&b| b != a && q[(a, b)] != 0.0)
        .map(|b| {
            let mut y = x.clone();
            y.regime = Some(b);
            (q[(a, b)], f(&y) - fa)
        })
        .collect()
}

/// Finite-difference generator `Lf(x)` of a diffusion or switching diffusion:
/// `½ Σ a_ij ∂_ij f + F·∇f + Σ_b q_ab (f(x,b) - f(x,a))` with `a = σσᵀ`.
pub fn generator_fd(model: &ModelSpec, f: &Observable, x: &StateVector) -> Result<f64> {
    if model.family() == Family::DiscreteChain {
        return Err(Error::WrongFamily {
            expected: "SwitchingDiffusion or Sde",
        });
    }
    let n = x.dim();
    let drift = model.drift(x);
    let sigma = model.diffusion(x);
    let a = &sigma * sigma.transpose();
    let grad = gradient(f, x);
    let mut out: f64 = drift.iter().zip(&grad).map(|(d, g)| d * g).sum();
    let h = fd_steps(&x.x, 1e-4);
    let f0 = f(x);
    for i in 0..n {
        for j in i..n {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            let d2 = if i == j {
                (f(&shifted(x, &[(i, h[i])])) - 2.0 * f0 + f(&shifted(x, &[(i, -h[i])])))
                    / (h[i] * h[i])
            } else {
                (f(&shifted(x, &[(i, h[i]), (j, h[j])]))
                    - f(&shifted(x, &[(i, h[i]), (j, -h[j])]))
                    - f(&shifted(x, &[(i, -h[i]), (j, h[j])]))
                    + f(&shifted(x, &[(i, -h[i]), (j, -h[j])])))
                    / (4.0 * h[i] * h[j])
            };
            let weight = if i == j { 0.5 } else { 1.0 };
            out += weight * aij * d2;
        }
    }
    for (q, d) in regime_differences(model, f, x) {
        out += q * d;
    }
    Ok(out)
}

/// Finite-difference carré du champ `Γf(x) = ∇fᵀ a ∇f + Σ_b q_ab (f(x,b) - f(x,a))²`.
pub fn carre_du_champ_fd(model: &ModelSpec, f: &Observable, x: &StateVector) -> Result<f64> {
    if model.family() == Family::DiscreteChain {
        return Err(Error::WrongFamily {
            expected: "SwitchingDiffusion or Sde",
        });
    }
    let sigma = model.diffusion(x);
    let grad = gradient(f, x);
    let mut out = 0.0;
    for k in 0..sigma.ncols() {
        let s: f64 = (0..x.dim()).map(|i| grad[i] * sigma[(i, k)]).sum();
        out += s * s;
    }
    for (q, d) in regime_differences(model, f, x) {
        out += q * d * d;
    }
    Ok(out)
}

/// Monte Carlo `(Pf - f, E[(f(X_1) - f)^2])` for a discrete chain at `x`.
pub fn chain_generator_mc(
    model: &ModelSpec,
    f: &Observable,
    x: &StateVector,
    samples: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let map = model.step_map().ok_or(Error::WrongFamily {
        expected: "DiscreteChain",
    })?;
    if samples == 0 {
        return Err(Error::EmptyWindow);
    }
    let f0 = f(x);
    let mut noise = vec![0.0; model.noise_dim()];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        rng.fill_standard_normal(&mut noise);
        let mut y = map(x, &noise);
        model.project(&mut y.x);
        let d = f(&y) - f0;
        s1 += d;
        s2 += d * d;
    }
    let n = samples as f64;
    Ok((s1 / n, s2 / n))
}

/// Worst pointwise slack of each suite inequality (positive means violated).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteDiagnostics {
    pub lw_violation: f64,
    pub lu_violation: f64,
    pub gamma_w_violation: f64,
    pub gamma_v_violation: f64,
    pub points: usize,
    /// `(mean radius, max |H| / W')` per radial shell of the sample, innermost first.
    pub h_over_w_prime: Vec<(f64, f64)>,
}

impl SuiteDiagnostics {
    pub fn passes(&self) -> bool {
        [
            self.lw_violation,
            self.lu_violation,
            self.gamma_w_violation,
            self.gamma_v_violation,
        ]
        .iter()
        .all(|v| *v <= 0.0)
    }
}

const CHAIN_SAMPLES: usize = 4096;
const SHELLS: usize = 4;

/// Checks `LW ≤ K - W'`, `LU ≤ K - U'`, `ΓW ≤ K U'` and `ΓV ≤ K U'` at each
/// sample point, using the suite's closed forms where present and finite
/// differences (Monte Carlo for chains) otherwise. Finite-difference noise is
/// absorbed by a relative slack of `1e-6`.
pub fn suite_diagnostics(
    model: &ModelSpec,
    suite: &LyapunovSuite,
    points: &[StateVector],
) -> Result<SuiteDiagnostics> {
    let mut rng = RngStream::new(0, u64::MAX);
    let mut worst = [f64::NEG_INFINITY; 4];
    let mut shells: Vec<(f64, f64)> = Vec::new();
    for x in points {
        model.check_state(x)?;
        let (lw, lu, gw) = if model.family() == Family::DiscreteChain {
            let (lw, gw) = chain_generator_mc(model, &suite.w, x, CHAIN_SAMPLES, &mut rng)?;
            let (lu, _) = chain_generator_mc(model, &suite.u, x, CHAIN_SAMPLES, &mut rng)?;
            (lw, lu, gw)
        } else {
            let lw = match &suite.lw {
                Some(g) => g(x),
                None => generator_fd(model, &suite.w, x)?,
            };
            let lu = match &suite.lu {
                Some(g) => g(x),
                None => generator_fd(model, &suite.u, x)?,
            };
            let gw = match &suite.gamma_w {
                Some(g) => g(x),
                None => carre_du_champ_fd(model, &suite.w, x)?,
            };
            (lw, lu, gw)
        };
        let wp = (suite.w_prime)(x);
        let up = (suite.u_prime)(x);
        let gv = if model.distance_to_extinction(x) > 0.0 {
            (suite.gamma_v)(x)
        } else {
            0.0
        };
        let k = suite.k;
        let checks = [(lw, k - wp), (lu, k - up), (gw, k * up), (gv, k * up)];
        for (slot, (lhs, rhs)) in worst.iter_mut().zip(checks) {
            let slack = 1e-6 * (1.0 + lhs.abs().max(rhs.abs()));
            let v = if lhs.is_finite() && rhs.is_finite() {
                lhs - rhs - slack
            } else {
                f64::INFINITY
            };
            *slot = slot.max(v);
        }
        if model.distance_to_extinction(x) > 0.0 {
            shells.push((x.norm(), suite.h_at(x).abs() / wp));
        }
    }
    shells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let chunk = shells.len().div_ceil(SHELLS).max(1);
    let h_over_w_prime = shells
        .chunks(chunk)
        .map(|c| {
            let r = c.iter().map(|p| p.0).sum::<f64>() / c.len() as f64;
            let m = c.iter().map(|p| p.1).fold(0.0, f64::max);
            (r, m)
        })
        .collect();
    Ok(SuiteDiagnostics {
        lw_violation: worst[0],
        lu_violation: worst[1],
        gamma_w_violation: worst[2],
        gamma_v_violation: worst[3],
        points: points.len(),
        h_over_w_prime,
    })
}

/// Agreement between the finite-difference `LV` and the suite's `H`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HAgreement {
    pub checked: usize,
    pub max_abs_error: f64,
    /// Largest `|LV - H| / max(1e-3, 0.01 |H|)`; at most 1 means agreement.
    pub max_scaled_error: f64,
}

/// Compares `LV` (finite differences) with `H` at the points lying at least
/// `10 * floor_epsilon` from the extinction set.
pub fn h_agreement(
    model: &ModelSpec,
    suite: &LyapunovSuite,
    points: &[StateVector],
    floor_epsilon: f64,
) -> Result<HAgreement> {
    let mut out = HAgreement {
        checked: 0,
        max_abs_error: 0.0,
        max_scaled_error: 0.0,
    };
    for x in points {
        if model.distance_to_extinction(x) < 10.0 * floor_epsilon {
            continue;
        }
        let lv = generator_fd(model, &suite.v, x)?;
        let h = suite.h_at(x);
        let err = (lv - h).abs();
        out.checked += 1;
        out.max_abs_error = out.max_abs_error.max(err);
        out.max_scaled_error = out
            .max_scaled_error
            .max(err / (1e-3f64).max(0.01 * h.abs()));
    }
    Ok(out)
}

/// Running `μ_t W'` and whether its tail exceeds `K + slack`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub running: Vec<(f64, f64)>,
    pub final_average: f64,
    /// Largest running average over the second half of the horizon.
    pub tail_max: f64,
    pub k: f64,
    pub violated: bool,
}

pub fn tightness_check(
    traj: &Trajectory,
    suite: &LyapunovSuite,
    slack: f64,
) -> Result<TightnessReport> {
    if traj.len() < 2 {
        return Err(Error::EmptyWindow);
    }
    let g: Vec<f64> = traj.states.iter().map(|s| (suite.w_prime)(s)).collect();
    let int = cumulative_integral(traj, &g);
    let running: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&int)
        .skip(1)
        .map(|(&t, &i)| (t, i / t))
        .collect();
    let half = traj.duration() / 2.0;
    let tail_max = running
        .iter()
        .filter(|(t, _)| *t >= half)
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, |a, b| {
            if b.is_nan() {
                f64::INFINITY
            } else {
                a.max(b)
            }
        });
    let final_average = running.last().map(|p| p.1).unwrap_or(f64::NAN);
    let violated = !tail_max.is_finite() || tail_max > suite.k + slack;
    Ok(TightnessReport {
        running,
        final_average,
        tail_max,
        k: suite.k,
        violated,
    })
}

/// Growth of `|M_t^f| / t` across horizons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongLawReport {
    pub horizons: Vec<f64>,
    /// Max over replicas of `|M_h| / h` for each horizon.
    pub max_ratio: Vec<f64>,
    /// Consecutive quotients `max_ratio[i + 1] / max_ratio[i]`.
    pub shrink_factors: Vec<f64>,
    pub shrinking: bool,
}

pub const MIN_STRONG_LAW_REPLICAS: usize = 30;

/// Evaluates `max_r |M_h^f| / h` at increasing horizons `h`. The report counts
/// as shrinking when every consecutive quotient is below 0.8, or when all
/// values are already below `1e-12`.
pub fn strong_law_check(
    replicas: &[Trajectory],
    f: &Observable,
    lf: &Observable,
    horizons: &[f64],
) -> Result<StrongLawReport> {
    if replicas.len() < MIN_STRONG_LAW_REPLICAS {
        return Err(Error::InvalidParameter(format!(
            "strong law check needs at least {MIN_STRONG_LAW_REPLICAS} replicas, got {}",
            replicas.len()
        )));
    }
    if horizons.is_empty() || horizons.windows(2).any(|w| w[1] <= w[0]) || horizons[0] <= 0.0 {
        return Err(Error::InvalidParameter(
            "horizons must be positive and increasing".into(),
        ));
    }
    let mut max_ratio = vec![0.0f64; horizons.len()];
    for traj in replicas {
        if traj.duration() + 1e-9 < *horizons.last().unwrap() {
            return Err(Error::InvalidParameter(
                "replica shorter than the largest horizon".into(),
            ));
        }
        let m = dynkin_residual(traj, f, lf)?;
        for (slot, &h) in max_ratio.iter_mut().zip(horizons) {
            let idx = traj.times.partition_point(|&t| t <= h + 1e-9) - 1;
            *slot = slot.max(m[idx].abs() / traj.times[idx].max(f64::MIN_POSITIVE));
        }
    }
    let shrink_factors: Vec<f64> = max_ratio.windows(2).map(|w| w[1] / w[0]).collect();
    let converged = max_ratio.iter().all(|v| *v < 1e-12);
    let shrinking = converged || shrink_factors.iter().all(|r| *r < 0.8);
    Ok(StrongLawReport {
        horizons: horizons.to_vec(),
        max_ratio,
        shrink_factors,
        shrinking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::{simulate, SimConfig};
    use crate::process::{distance_to_origin, observable};
    use nalgebra::DMatrix;

    fn sde(a: f64, s: f64) -> ModelSpec {
        ModelSpec::builder("lin", Family::Sde, 1)
            .drift(move |x| vec![a * x.x[0]])
            .diffusion(1, move |_| DMatrix::from_element(1, 1, s))
            .extinction_distance(distance_to_origin)
            .build()
            .unwrap()
    }

    fn path(times: &[f64], xs: &[f64], jumps: &[usize]) -> Trajectory {
        let mut t = Trajectory::new();
        for (k, (&ti, &xi)) in times.iter().zip(xs).enumerate() {
            t.push(ti, StateVector::new(vec![xi]), jumps.contains(&k));
        }
        t
    }

    #[test]
    fn constant_average_is_exact() {
        let traj = path(&[0.0, 0.3, 0.7, 1.9], &[1.0, 5.0, -2.0, 3.0], &[2]);
        let g = observable(|_| 3.0);
        assert_eq!(occupation_average(&traj, &g, 0.0).unwrap(), 3.0);
        assert_eq!(occupation_average(&traj, &g, 0.5).unwrap(), 3.0);
        assert_eq!(occupation_average(&traj, &g, 1.9), Err(Error::EmptyWindow));
    }

    #[test]
    fn quadrature_rules() {
        // trapezoid on [0,1], left value on the jump interval [1,3]
        let traj = path(&[0.0, 1.0, 3.0], &[0.0, 2.0, 10.0], &[2]);
        let id = observable(|s| s.x[0]);
        let avg = occupation_average(&traj, &id, 0.0).unwrap();
        assert!((avg - (1.0 + 4.0) / 3.0).abs() < 1e-15);
        // partial window [0.5, 3]: ∫ = (1+2)/2*0.5 + 4
        let avg = occupation_average(&traj, &id, 0.5).unwrap();
        assert!((avg - 4.75 / 2.5).abs() < 1e-15);
    }

    #[test]
    fn refinement_invariance_for_piecewise_constant() {
        let coarse = path(&[0.0, 1.0, 2.5], &[1.0, 4.0, 4.0], &[1]);
        let fine = path(&[0.0, 0.5, 1.0, 1.7, 2.5], &[1.0, 1.0, 4.0, 4.0, 4.0], &[2]);
        let id = observable(|s| s.x[0]);
        let a = occupation_average(&coarse, &id, 0.0).unwrap();
        let b = occupation_average(&fine, &id, 0.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn ode_dynkin_small() {
        let model = sde(-1.0, 0.0);
        let cfg = SimConfig::new(1e-3, 2.0);
        let traj = simulate(
            &model,
            &StateVector::new(vec![1.0]),
            &cfg,
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        let m = dynkin_residual(&traj, &observable(|s| s.x[0]), &observable(|s| -s.x[0])).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-3));
        let q = qv_residual(
            &traj,
            &observable(|s| s.x[0]),
            &observable(|s| -s.x[0]),
            &observable(|_| 0.0),
        )
        .unwrap();
        assert!(q.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn constant_path_residual_zero() {
        let traj = path(&[0.0, 1.0, 2.0], &[2.0, 2.0, 2.0], &[]);
        let m =
            dynkin_residual(&traj, &observable(|s| s.x[0].sin()), &observable(|_| 0.0)).unwrap();
        assert!(m.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn non_finite_observable_reported() {
        let traj = path(&[0.0, 1.0], &[1.0, 0.0], &[]);
        let r = dynkin_residual(&traj, &observable(|s| -s.x[0].ln()), &observable(|_| 0.0));
        assert_eq!(r, Err(Error::NonFiniteObservable { t: 1.0 }));
    }

    #[test]
    fn brownian_martingales() {
        let bm = sde(0.0, 1.0);
        let cfg = SimConfig::new(0.01, 1.0);
        let n = 10_000;
        let (mut s, mut s2, mut q) = (0.0, 0.0, 0.0);
        for r in 0..n {
            let traj = simulate(
                &bm,
                &StateVector::new(vec![0.0]),
                &cfg,
                &mut RngStream::new(21, r),
            )
            .unwrap();
            let m = *dynkin_residual(
                &traj,
                &observable(|s| s.x[0] * s.x[0]),
                &observable(|_| 1.0),
            )
            .unwrap()
            .last()
            .unwrap();
            s += m;
            s2 += m * m;
            q += *qv_residual(
                &traj,
                &observable(|s| s.x[0]),
                &observable(|_| 0.0),
                &observable(|_| 1.0),
            )
            .unwrap()
            .last()
            .unwrap();
        }
        let nf = n as f64;
        let mean = s / nf;
        let se = ((s2 / nf - mean * mean) / nf).sqrt();
        assert!(
            mean.abs() < 0.05 && mean.abs() < 4.0 * se,
            "mean {mean} se {se}"
        );
        assert!((q / nf).abs() < 0.05, "qv mean {}", q / nf);
    }

    #[test]
    fn ou_isometry() {
        let ou = sde(-1.0, 2f64.sqrt());
        let cfg = SimConfig::new(0.01, 1.0);
        let n = 4000;
        let (mut s, mut s2) = (0.0, 0.0);
        for r in 0..n {
            let traj = simulate(
                &ou,
                &StateVector::new(vec![0.5]),
                &cfg,
                &mut RngStream::new(5, r),
            )
            .unwrap();
            let m = *dynkin_residual(&traj, &observable(|s| s.x[0]), &observable(|s| -s.x[0]))
                .unwrap()
                .last()
                .unwrap();
            s += m;
            s2 += m * m;
        }
        let nf = n as f64;
        let var = s2 / nf - (s / nf).powi(2);
        assert!((var - 2.0).abs() < 0.2, "variance {var}");
    }

    #[test]
    fn ou_occupation_variance() {
        let ou = sde(-1.0, 2f64.sqrt());
        let cfg = SimConfig::new(0.01, 5000.0);
        let mut acc = OccupationAccumulator::new(50.0).track("x2", observable(|s| s.x[0] * s.x[0]));
        crate::integrators::simulate_observed(
            &ou,
            &StateVector::new(vec![0.0]),
            &cfg,
            &mut RngStream::new(1, 0),
            |t, s, j| acc.update(t, s, j).unwrap(),
        )
        .unwrap();
        let v = acc.average("x2").unwrap();
        assert!((v - 1.0).abs() < 0.05, "average {v}");
        assert!((acc.elapsed() - 4950.0).abs() < 1e-6);
    }

    #[test]
    fn finite_difference_generator_matches_closed_form() {
        let ou = sde(-1.0, 2f64.sqrt());
        let f = observable(|s| s.x[0].powi(3));
        let x = StateVector::new(vec![0.7]);
        // Lf = -3x^3 + 6x, Γf = 2 (3x^2)^2
        let lf = generator_fd(&ou, &f, &x).unwrap();
        assert!((lf - (-3.0 * 0.343 + 4.2)).abs() < 1e-5, "{lf}");
        let gf = carre_du_champ_fd(&ou, &f, &x).unwrap();
        assert!((gf - 2.0 * (3.0 * 0.49f64).powi(2)).abs() < 1e-5, "{gf}");
    }

    #[test]
    fn switching_part_of_generator() {
        let m = ModelSpec::builder("s", Family::SwitchingDiffusion, 1)
            .drift(|_| vec![0.0])
            .diffusion(1, |_| DMatrix::zeros(1, 1))
            .constant_rates(DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]))
            .extinction_distance(|_| 1.0)
            .build()
            .unwrap();
        let f = observable(|s| if s.regime == Some(1) { 3.0 } else { 1.0 });
        let x = StateVector::with_regime(vec![0.0], 1);
        assert_eq!(generator_fd(&m, &f, &x).unwrap(), 2.0 * (1.0 - 3.0));
        assert_eq!(carre_du_champ_fd(&m, &f, &x).unwrap(), 2.0 * 4.0);
    }

    #[test]
    fn compact_suite_passes_and_bad_k_fails() {
        let m = sde(-1.0, 0.5);
        let v = observable(|s| -s.x[0].abs().ln());
        let suite =
            LyapunovSuite::compact(v.clone(), observable(|_| 1.0), observable(|_| 0.25), 1.0);
        let pts: Vec<StateVector> = (1..20)
            .map(|i| StateVector::new(vec![i as f64 / 10.0]))
            .collect();
        let d = suite_diagnostics(&m, &suite, &pts).unwrap();
        assert!(d.passes(), "{d:?}");
        let mut bad = suite.clone();
        bad.k = 0.0;
        let d = suite_diagnostics(&m, &bad, &pts).unwrap();
        assert!(!d.passes());
        assert!(d.lw_violation > 0.0);
    }

    #[test]
    fn tightness_cases() {
        let ou = sde(-1.0, 2f64.sqrt());
        let mut suite = LyapunovSuite::compact(
            observable(|_| 0.0),
            observable(|_| 0.0),
            observable(|_| 0.0),
            0.0,
        );
        suite.w_prime = observable(|s| 1.0 + s.x[0] * s.x[0]);
        suite.k = 2.5;
        let cfg = SimConfig::new(0.01, 1000.0).with_stride(10);
        let traj = simulate(
            &ou,
            &StateVector::new(vec![0.0]),
            &cfg,
            &mut RngStream::new(2, 0),
        )
        .unwrap();
        let rep = tightness_check(&traj, &suite, 0.0).unwrap();
        assert!(!rep.violated, "{}", rep.tail_max);

        let grow = sde(1.0, 0.0);
        let traj = simulate(
            &grow,
            &StateVector::new(vec![1.0]),
            &SimConfig::new(0.01, 20.0),
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert!(tightness_check(&traj, &suite, 0.5).unwrap().violated);

        let compact = LyapunovSuite::compact(
            observable(|_| 0.0),
            observable(|_| 0.0),
            observable(|_| 0.0),
            0.0,
        );
        assert!(!tightness_check(&traj, &compact, 0.0).unwrap().violated);
    }

    #[test]
    fn strong_law_brownian_and_ode() {
        let bm = sde(0.0, 1.0);
        let cfg = SimConfig::new(0.1, 400.0).with_stride(10);
        let reps: Vec<Trajectory> = (0..30)
            .map(|r| {
                simulate(
                    &bm,
                    &StateVector::new(vec![0.0]),
                    &cfg,
                    &mut RngStream::new(17, r),
                )
                .unwrap()
            })
            .collect();
        let rep = strong_law_check(
            &reps,
            &observable(|s| s.x[0]),
            &observable(|_| 0.0),
            &[100.0, 400.0],
        )
        .unwrap();
        assert!((rep.shrink_factors[0] - 0.5).abs() < 0.3, "{rep:?}");
        assert!(rep.shrinking);

        let ode = sde(-1.0, 0.0);
        let reps: Vec<Trajectory> = (0..30)
            .map(|r| {
                simulate(
                    &ode,
                    &StateVector::new(vec![1.0]),
                    &SimConfig::new(0.01, 40.0),
                    &mut RngStream::new(0, r),
                )
                .unwrap()
            })
            .collect();
        let rep = strong_law_check(
            &reps,
            &observable(|s| s.x[0]),
            &observable(|s| -s.x[0]),
            &[10.0, 20.0, 40.0],
        )
        .unwrap();
        assert!(rep.max_ratio.iter().all(|v| *v < 1e-3), "{rep:?}");
        assert!(strong_law_check(
            &reps[..5],
            &observable(|s| s.x[0]),
            &observable(|_| 0.0),
            &[1.0]
        )
        .is_err());
    }
}
