//! H-exponent and decay-slope estimation.

use serde::{Deserialize, Serialize};

use crate::criteria::max_real_eigenvalue;
use crate::error::{Error, Result};
use crate::integrators::{simulate_observed, SimConfig};
use crate::lyapunov::{LyapunovSuite, OccupationAccumulator};
use crate::parallel::map_indexed;
use crate::process::{ModelSpec, Observable, RngStream, StateVector, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BoundaryAverage,
    TrajectorySlope,
    ClosedForm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::BoundaryAverage => "boundary_average",
            Method::TrajectorySlope => "trajectory_slope",
            Method::ClosedForm => "closed_form",
        }
    }
}

/// Point estimate with a 95% confidence interval from the replica spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub method: Method,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_replicas: usize,
    pub horizon: f64,
}

impl ExponentEstimate {
    /// Mean of `samples` with interval `± 1.96 sd / √n` (degenerate for one sample).
    pub fn from_samples(method: Method, samples: &[f64], horizon: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let half = if samples.len() > 1 {
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            1.96 * (var / n).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            method,
            point: mean,
            ci_low: mean - half,
            ci_high: mean + half,
            n_replicas: samples.len(),
            horizon,
        })
    }

    pub fn exact(method: Method, value: f64) -> Self {
        Self {
            method,
            point: value,
            ci_low: value,
            ci_high: value,
            n_replicas: 1,
            horizon: 0.0,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    pub fn negated(&self) -> Self {
        Self {
            point: -self.point,
            ci_low: -self.ci_high,
            ci_high: -self.ci_low,
            ..*self
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.ci_low <= v && v <= self.ci_high
    }
}

fn check_runs(ics: &[StateVector], reps: usize) -> Result<()> {
    if ics.is_empty() {
        return Err(Error::InvalidParameter("no initial conditions".into()));
    }
    if reps == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    Ok(())
}

/// Post-burn-in occupation average of `h` along one run.
pub fn run_average(
    model: &ModelSpec,
    h: &Observable,
    x0: &StateVector,
    cfg: &SimConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    let mut acc = OccupationAccumulator::new(cfg.burn_in).track("h", h.clone());
    let mut err = None;
    simulate_observed(model, x0, cfg, rng, |t, s, jump| {
        if err.is_none() {
            if let Err(e) = acc.update(t, s, jump) {
                err = Some(e);
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    acc.average("h")
}

/// Per initial condition, the replica averages of `μ_t H` after burn-in.
pub fn boundary_averages(
    model: &ModelSpec,
    h: &Observable,
    ics: &[StateVector],
    cfg: &SimConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_runs(ics, reps)?;
    let flat = map_indexed(ics.len() * reps, |k| {
        let (i, r) = (k / reps, k % reps);
        let mut rng = RngStream::for_state(seed, &ics[i], r);
        run_average(model, h, &ics[i], cfg, &mut rng)
    });
    let flat = flat.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(flat.chunks(reps).map(|c| c.to_vec()).collect())
}

/// Minimum over initial conditions of the replica-mean boundary average of
/// `H`, approximating the infimum of `μH` over boundary invariant measures.
/// The interval is the replica spread at the minimising initial condition.
pub fn boundary_exponent(
    boundary_model: &ModelSpec,
    h: &Observable,
    ics: &[StateVector],
    cfg: &SimConfig,
    reps: usize,
    seed: u64,
) -> Result<ExponentEstimate> {
    let per_ic = boundary_averages(boundary_model, h, ics, cfg, reps, seed)?;
    let horizon = cfg.t_final - cfg.burn_in;
    let mut best: Option<ExponentEstimate> = None;
    for samples in &per_ic {
        let est = ExponentEstimate::from_samples(Method::BoundaryAverage, samples, horizon)?;
        if best.is_none_or(|b| est.point < b.point) {
            best = Some(est);
        }
    }
    Ok(best.expect("nonempty"))
}

/// Centered least-squares slope of `(t, v)` pairs.
fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let tm = points.iter().map(|p| p.0).sum::<f64>() / n;
    let vm = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in points {
        sxy += (t - tm) * (v - vm);
        sxx += (t - tm) * (t - tm);
    }
    sxy / sxx
}

pub const MIN_SLOPE_POINTS: usize = 100;

fn slope_from_points(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < MIN_SLOPE_POINTS {
        return Err(Error::WindowTooShort {
            points: points.len(),
            required: MIN_SLOPE_POINTS,
        });
    }
    Ok(ols_slope(points))
}

fn check_window(window: f64) -> Result<()> {
    if window > 0.0 && window <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "window fraction {window} not in (0, 1]"
        )))
    }
}

/// Least-squares slope of `V(X_t)` against `t` over the final `window`
/// fraction of the trajectory's duration.
pub fn trajectory_slope(
    traj: &Trajectory,
    v: &Observable,
    window: f64,
) -> Result<ExponentEstimate> {
    check_window(window)?;
    let start = traj.duration() * (1.0 - window);
    let mut pts = Vec::new();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        if *t >= start {
            let val = v(s);
            if !val.is_finite() {
                return Err(Error::NonFiniteObservable { t: *t });
            }
            pts.push((*t, val));
        }
    }
    let slope = slope_from_points(&pts)?;
    Ok(ExponentEstimate {
        method: Method::TrajectorySlope,
        point: slope,
        ci_low: slope,
        ci_high: slope,
        n_replicas: 1,
        horizon: traj.duration(),
    })
}

/// One run's slope of `V` over the final window, or `None` when the run
/// reached the extinction floor first.
pub fn run_slope(
    model: &ModelSpec,
    v: &Observable,
    x0: &StateVector,
    cfg: &SimConfig,
    window: f64,
    rng: &mut RngStream,
) -> Result<Option<f64>> {
    check_window(window)?;
    let start = cfg.t_final * (1.0 - window);
    let mut pts = Vec::new();
    let mut bad = None;
    let summary = simulate_observed(model, x0, cfg, rng, |t, s, _| {
        if t >= start && bad.is_none() {
            let val = v(s);
            if val.is_finite() {
                pts.push((t, val));
            } else {
                bad = Some(t);
            }
        }
    })?;
    if summary.stopped_early {
        return Ok(None);
    }
    if let Some(t) = bad {
        return Err(Error::NonFiniteObservable { t });
    }
    slope_from_points(&pts).map(Some)
}

/// Outcome of [`extinction_fraction`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionReport {
    pub fraction: f64,
    pub runs: usize,
    pub early_stops: usize,
    /// Slopes over all runs, early stops entered as `alpha_candidate`.
    pub slopes: ExponentEstimate,
}

/// Fraction of `(initial condition, replica)` runs whose slope of `V` is at
/// least `alpha_candidate - tol`, counting runs that reach the extinction
/// floor as successes.
#[allow(clippy::too_many_arguments)]
pub fn extinction_fraction(
    model: &ModelSpec,
    suite: &LyapunovSuite,
    ics: &[StateVector],
    cfg: &SimConfig,
    reps: usize,
    tol: f64,
    window: f64,
    seed: u64,
) -> Result<ExtinctionReport> {
    check_runs(ics, reps)?;
    let alpha = suite.alpha_candidate;
    let flat = map_indexed(ics.len() * reps, |k| {
        let (i, r) = (k / reps, k % reps);
        let mut rng = RngStream::for_state(seed, &ics[i], r);
        run_slope(model, &suite.v, &ics[i], cfg, window, &mut rng)
    });
    let flat = flat.into_iter().collect::<Result<Vec<Option<f64>>>>()?;
    let early_stops = flat.iter().filter(|s| s.is_none()).count();
    let slopes: Vec<f64> = flat.iter().map(|s| s.unwrap_or(alpha)).collect();
    let successes = slopes.iter().filter(|s| **s >= alpha - tol).count();
    Ok(ExtinctionReport {
        fraction: successes as f64 / slopes.len() as f64,
        runs: slopes.len(),
        early_stops,
        slopes: ExponentEstimate::from_samples(Method::TrajectorySlope, &slopes, cfg.t_final)?,
    })
}

/// Boundary exponents along a parameter grid with a lower-semicontinuity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub points: Vec<(f64, ExponentEstimate)>,
    /// Parameter values whose grid neighbour drops below them by more than
    /// the combined interval half-widths plus twice the local trend.
    pub flagged: Vec<f64>,
    pub lower_semicontinuous: bool,
}

/// A model family indexed by a scalar parameter: the boundary model and `H`.
pub type Family1d<'a> = dyn Fn(f64) -> Result<(ModelSpec, Observable)> + Sync + 'a;

/// Evaluates [`boundary_exponent`] along `grid`. For each grid value `θ` and
/// each nearest neighbour `θ'`, the estimate at `θ'` may sit below the one at
/// `θ` only by the two half-widths plus twice the change predicted by the
/// slope between `θ'` and its other neighbour (or, at the grid ends, the
/// slope on the far side of `θ`); larger drops are flagged.
pub fn robustness_scan(
    family: &Family1d<'_>,
    grid: &[f64],
    ics: &[StateVector],
    cfg: &SimConfig,
    reps: usize,
    seed: u64,
) -> Result<RobustnessReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut points = Vec::with_capacity(sorted.len());
    let mut dim = None;
    for &theta in &sorted {
        let (model, h) = family(theta)?;
        if *dim.get_or_insert(model.dim()) != model.dim() {
            return Err(Error::DimensionMismatch {
                what: "scan model",
                expected: dim.unwrap(),
                got: model.dim(),
            });
        }
        points.push((theta, boundary_exponent(&model, &h, ics, cfg, reps, seed)?));
    }
    let n = points.len();
    let mut flagged = Vec::new();
    for i in 0..n {
        let (ti, ei) = points[i];
        let mut neighbours = Vec::new();
        if i > 0 {
            neighbours.push((i - 1, i.checked_sub(2)));
        }
        if i + 1 < n {
            neighbours.push((i + 1, (i + 2 < n).then_some(i + 2)));
        }
        let opposite = |j: usize| {
            if j < i {
                (i + 1 < n).then_some(i + 1)
            } else {
                i.checked_sub(1)
            }
        };
        for (j, k) in neighbours {
            let (tj, ej) = points[j];
            // local slope beyond the neighbour, else on the far side of i
            let pair = k.map(|k| (j, k)).or_else(|| opposite(j).map(|o| (i, o)));
            let trend = pair.map_or(0.0, |(a, b)| {
                let ((ta, ea), (tb, eb)) = (points[a], points[b]);
                2.0 * (ea.point - eb.point).abs() / (ta - tb).abs() * (ti - tj).abs()
            });
            let allowance = ei.half_width() + ej.half_width() + trend;
            if ej.point < ei.point - allowance {
                flagged.push(ti);
                break;
            }
        }
    }
    Ok(RobustnessReport {
        lower_semicontinuous: flagged.is_empty(),
        points,
        flagged,
    })
}

/// Exponential decay rate `-max Re λ(A)` of the deterministic system `dx = Ax dt`.
pub fn linear_sde_exponent(a: &nalgebra::DMatrix<f64>) -> Result<f64> {
    Ok(-max_real_eigenvalue(a)?)
}
