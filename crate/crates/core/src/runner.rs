//! Executes an [`ExperimentConfig`] and writes its report files.
//!
//! Everything is computed in memory first; files are written only once the
//! experiment has succeeded, and any file written before an I/O failure is
//! removed again.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{BuildError, ConfigError, Experiment, ExperimentConfig, ModelConfig};
use crate::criteria::{
    invasion_rate, lorenz_default_ics, lorenz_lambda0, lorenz_lambda_mc,
    weighted_invasion_criterion,
};
use crate::error::Error;
use crate::exponents::{
    boundary_exponent, extinction_fraction, linear_sde_exponent, robustness_scan, ExponentEstimate,
    Method,
};
use crate::integrators::simulate;
use crate::lyapunov::{
    carre_du_champ_fd, dynkin_residual, generator_fd, h_agreement, qv_residual, suite_diagnostics,
    tightness_check,
};
use crate::models::{sis, ModelBundle};
use crate::parallel::map_indexed;
use crate::process::{
    observable, Family, ModelSpec, Observable, RngStream, StateVector, Trajectory,
};
use crate::report::{to_json, Cell, Csv};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

impl From<BuildError> for RunError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Config(c) => RunError::Config(c),
            BuildError::Model(m) => RunError::Model(m),
        }
    }
}

/// Report contents before they are written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: Value,
    /// `(file name, contents)` of the CSV tables.
    pub tables: Vec<(&'static str, String)>,
}

impl RunOutput {
    pub fn report_json(&self) -> String {
        to_json(&self.report)
    }
}

const TRAJECTORIES: &str = "trajectories.csv";
const RESIDUALS: &str = "residuals.csv";
const EXPONENTS: &str = "exponents.csv";
pub const REPORT: &str = "report.json";

/// Runs the experiment and writes `report.json` plus its tables into the
/// configured output directory. Returns the written paths.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, RunError> {
    let out = compute(cfg)?;
    write_outputs(&cfg.output, &out)
}

fn io_err(path: &Path, e: std::io::Error) -> RunError {
    RunError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_outputs(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files: Vec<(PathBuf, String)> = out
        .tables
        .iter()
        .map(|(name, text)| (dir.join(name), text.clone()))
        .collect();
    files.push((dir.join(REPORT), out.report_json()));
    let mut written = Vec::new();
    for (path, text) in files {
        if let Err(e) = fs::write(&path, text) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(io_err(&path, e));
        }
        written.push(path);
    }
    Ok(written)
}

struct Setup {
    bundle: ModelBundle,
    ics: Vec<StateVector>,
}

fn default_ic(cfg: &ModelConfig, model: &ModelSpec) -> StateVector {
    let n = model.dim();
    let mut s = model.probe_state();
    s.x = match cfg {
        ModelConfig::Lorenz { z_star, .. } => vec![1.0, 1.0, *z_star],
        ModelConfig::Linear { .. } => vec![1.0; n],
        _ => vec![0.5; n],
    };
    s
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup, RunError> {
    let bundle = cfg.model.build()?;
    let ics: Vec<StateVector> = if cfg.ics.is_empty() {
        vec![default_ic(&cfg.model, &bundle.model)]
    } else {
        cfg.ics.iter().map(StateVector::from).collect()
    };
    for x in &ics {
        bundle.model.check_state(x)?;
    }
    Ok(Setup { bundle, ics })
}

/// Index of the radial coordinate in lifted states.
fn radius_index(cfg: &ModelConfig, lifted: &ModelSpec) -> usize {
    match cfg {
        ModelConfig::Lorenz { .. } => 1,
        _ => lifted.dim() - 1,
    }
}

/// Model whose extinction-set dynamics define the boundary measures, its
/// `H`, and initial conditions on that set.
fn boundary_setup(
    cfg: &ExperimentConfig,
    s: &Setup,
) -> Result<(ModelSpec, Observable, Vec<StateVector>), RunError> {
    let b = &s.bundle;
    match (&b.boundary, &b.map) {
        (Some(lifted), Some(map)) => {
            let ics = if cfg.ics.is_empty() {
                match &cfg.model {
                    ModelConfig::Sis { .. } => {
                        sis::boundary_ics(&cfg.model.sis_params().expect("sis config")?)
                    }
                    ModelConfig::Lorenz { z_star, .. } => lorenz_default_ics(*z_star),
                    _ => {
                        let n = b.model.dim();
                        let mut out = vec![map.lift(&StateVector::new(vec![1.0; n]))];
                        for i in 0..n.min(4) {
                            let mut e = vec![0.0; n];
                            e[i] = 1.0;
                            out.push(map.lift(&StateVector::new(e)));
                        }
                        out
                    }
                }
            } else {
                s.ics.iter().map(|x| map.lift(x)).collect()
            };
            let k = radius_index(&cfg.model, lifted);
            let ics = ics
                .into_iter()
                .map(|mut y| {
                    y.x[k] = 0.0;
                    y
                })
                .collect();
            Ok((lifted.clone(), b.suite.h.clone(), ics))
        }
        _ => {
            let ics = if cfg.ics.is_empty() {
                vec![b.model.probe_state()]
            } else {
                s.ics.clone()
            };
            if let Some(x) = ics
                .iter()
                .find(|x| b.model.distance_to_extinction(x) != 0.0)
            {
                return Err(Error::InvalidParameter(format!(
                    "initial condition {:?} is not on the extinction set",
                    x.x
                ))
                .into());
            }
            Ok((b.model.clone(), b.suite.h.clone(), ics))
        }
    }
}

fn exponent_row(csv: &mut Csv, label: &str, e: &ExponentEstimate) {
    csv.row(&[
        Cell::Text(label),
        Cell::Text(e.method.as_str()),
        Cell::Float(e.point),
        Cell::Float(e.ci_low),
        Cell::Float(e.ci_high),
    ]);
}

fn exponents_csv() -> Csv {
    Csv::new(&["label", "method", "point", "ci_low", "ci_high"])
}

fn estimate_json(e: &ExponentEstimate) -> Value {
    serde_json::to_value(e).expect("estimate serializes")
}

/// Runs every `(ic, replica)` pair in parallel, in a fixed order.
fn runs<T: Send>(
    cfg: &ExperimentConfig,
    ics: &[StateVector],
    f: impl Fn(usize, usize, &mut RngStream) -> crate::error::Result<T> + Sync + Send,
) -> crate::error::Result<Vec<T>> {
    let reps = cfg.replicas;
    map_indexed(ics.len() * reps, |k| {
        let (i, r) = (k / reps, k % reps);
        let mut rng = RngStream::for_state(cfg.seed, &ics[i], r);
        f(i, r, &mut rng)
    })
    .into_iter()
    .collect()
}

/// Computes the report without touching the file system.
pub fn compute(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let s = setup(cfg)?;
    let mut tables = Vec::new();
    let results = match cfg.experiment {
        Experiment::Simulate => simulate_experiment(cfg, &s, &mut tables)?,
        Experiment::BoundaryExponent => {
            let (model, h, ics) = boundary_setup(cfg, &s)?;
            let est = boundary_exponent(&model, &h, &ics, &cfg.sim, cfg.replicas, cfg.seed)?;
            let mut csv = exponents_csv();
            exponent_row(&mut csv, "boundary_exponent", &est);
            let alpha = s.bundle.suite.alpha_candidate;
            exponent_row(
                &mut csv,
                "alpha_candidate",
                &ExponentEstimate::exact(Method::ClosedForm, alpha),
            );
            tables.push((EXPONENTS, csv.into_string()));
            json!({
                "estimate": estimate_json(&est),
                "alpha_candidate": alpha,
                "extinct": est.ci_low > 0.0,
                "boundary_ics": ics.len(),
            })
        }
        Experiment::Slope => {
            let rep = extinction_fraction(
                &s.bundle.model,
                &s.bundle.suite,
                &s.ics,
                &cfg.sim,
                cfg.replicas,
                cfg.options.tol,
                cfg.options.window,
                cfg.seed,
            )?;
            let mut csv = exponents_csv();
            exponent_row(&mut csv, "slope", &rep.slopes);
            tables.push((EXPONENTS, csv.into_string()));
            json!({
                "slope": estimate_json(&rep.slopes),
                "alpha_candidate": s.bundle.suite.alpha_candidate,
                "extinction_fraction": rep.fraction,
                "runs": rep.runs,
                "early_stops": rep.early_stops,
            })
        }
        Experiment::Criterion => criterion_experiment(cfg, &s, &mut tables)?,
        Experiment::RobustnessScan => {
            let scan = cfg.options.scan.as_ref().expect("validated scan");
            let (_, _, ics) = boundary_setup(cfg, &s)?;
            let family = |theta: f64| -> crate::error::Result<(ModelSpec, Observable)> {
                let m = cfg
                    .model
                    .with_parameter(&scan.parameter, theta)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let b = m.build().map_err(|e| match e {
                    BuildError::Model(e) => e,
                    BuildError::Config(c) => Error::InvalidParameter(c.to_string()),
                })?;
                Ok((b.boundary.unwrap_or(b.model), b.suite.h))
            };
            let rep = robustness_scan(
                &family,
                &scan.values,
                &ics,
                &cfg.sim,
                cfg.replicas,
                cfg.seed,
            )?;
            let mut csv = exponents_csv();
            for (theta, e) in &rep.points {
                exponent_row(&mut csv, &format!("{}={}", scan.parameter, theta), e);
            }
            tables.push((EXPONENTS, csv.into_string()));
            json!({
                "parameter": scan.parameter,
                "points": rep.points.iter().map(|(t, e)| json!({"value": t, "estimate": estimate_json(e)})).collect::<Vec<_>>(),
                "flagged": rep.flagged,
                "lower_semicontinuous": rep.lower_semicontinuous,
            })
        }
        Experiment::Diagnostics => diagnostics_experiment(cfg, &s, &mut tables)?,
    };
    let report = json!({
        "model": cfg.model.name(),
        "experiment": cfg.experiment.as_str(),
        "seed": cfg.seed,
        "replicas": cfg.replicas,
        "results": results,
    });
    Ok(RunOutput { report, tables })
}

fn simulate_experiment(
    cfg: &ExperimentConfig,
    s: &Setup,
    tables: &mut Vec<(&'static str, String)>,
) -> Result<Value, RunError> {
    let model = &s.bundle.model;
    let trajs = runs(cfg, &s.ics, |i, _, rng| {
        simulate(model, &s.ics[i], &cfg.sim, rng)
    })?;
    let d = model.dim();
    let mut header: Vec<String> = vec!["replica_id".into(), "t".into()];
    header.extend((0..d).map(|i| format!("x_{i}")));
    header.push("regime".into());
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    let mut summaries = Vec::new();
    for (k, traj) in trajs.iter().enumerate() {
        for (t, st) in traj.times.iter().zip(&traj.states) {
            let mut cells = vec![Cell::Int(k as u64), Cell::Float(*t)];
            cells.extend(st.x.iter().map(|v| Cell::Float(*v)));
            cells.push(st.regime.map_or(Cell::Empty, |r| Cell::Int(r as u64)));
            csv.row(&cells);
        }
        let last = traj.last_state().expect("non-empty trajectory");
        summaries.push(json!({
            "replica_id": k,
            "ic": k / cfg.replicas,
            "t_end": traj.duration(),
            "stopped_early": traj.stopped_early,
            "points": traj.len(),
            "final_distance": model.distance_to_extinction(last),
        }));
    }
    tables.push((TRAJECTORIES, csv.into_string()));
    Ok(json!({ "runs": summaries }))
}

fn criterion_experiment(
    cfg: &ExperimentConfig,
    s: &Setup,
    tables: &mut Vec<(&'static str, String)>,
) -> Result<Value, RunError> {
    let b = &s.bundle;
    let (index, extinct, detail) = match &cfg.model {
        ModelConfig::Sis { .. } => {
            let p = cfg.model.sis_params().expect("sis config")?;
            let index = p.extinction_index()?;
            let detail = json!({
                "lambda1": p.lambda1()?,
                "regime_distribution": p.regime_distribution()?,
            });
            (
                ExponentEstimate::exact(Method::ClosedForm, index),
                index > 0.0,
                detail,
            )
        }
        ModelConfig::Lorenz { z_star, alpha0, .. } => {
            if *alpha0 == 0.0 {
                let idx = -lorenz_lambda0(*z_star);
                (
                    ExponentEstimate::exact(Method::ClosedForm, idx),
                    idx > 0.0,
                    json!({ "lambda0": -idx }),
                )
            } else {
                let (_, _, ics) = boundary_setup(cfg, s)?;
                let p = cfg.model.lorenz_params().expect("lorenz config");
                let lambda = lorenz_lambda_mc(&p, &ics, &cfg.sim, cfg.replicas, cfg.seed)?;
                let idx = lambda.negated();
                (
                    idx,
                    lambda.ci_high < 0.0,
                    json!({ "lambda": estimate_json(&lambda) }),
                )
            }
        }
        ModelConfig::EcoDiscrete { weights, r, .. }
        | ModelConfig::Kolmogorov { weights, r, .. } => {
            let (model, _, ics) = boundary_setup(cfg, s)?;
            let p = weights.clone().unwrap_or_else(|| vec![1.0; r.len()]);
            let rates = (0..b.species_h.len())
                .map(|i| {
                    invasion_rate(
                        &model,
                        i,
                        &b.species_h[i],
                        &ics,
                        &cfg.sim,
                        cfg.replicas,
                        cfg.seed,
                    )
                })
                .collect::<crate::error::Result<Vec<_>>>()?;
            let crit = weighted_invasion_criterion(&p, &rates)?;
            let half = crit.ci_high - crit.value;
            let idx = ExponentEstimate {
                method: Method::BoundaryAverage,
                point: -crit.value,
                ci_low: -crit.value - half,
                ci_high: -crit.value + half,
                n_replicas: rates[0].n_replicas,
                horizon: rates[0].horizon,
            };
            let detail = json!({
                "invasion_rates": rates.iter().map(estimate_json).collect::<Vec<_>>(),
                "weights": p,
                "weighted_sum": crit.value,
            });
            (idx, crit.extinct, detail)
        }
        ModelConfig::Linear { a, sigma } => {
            let noiseless = sigma.iter().flatten().all(|v| *v == 0.0);
            let idx = if noiseless {
                let m = nalgebra::DMatrix::from_fn(a.len(), a.len(), |i, j| a[i][j]);
                linear_sde_exponent(&m)?
            } else {
                b.suite.alpha_candidate
            };
            (
                ExponentEstimate::exact(Method::ClosedForm, idx),
                idx > 0.0,
                json!({}),
            )
        }
    };
    let mut csv = exponents_csv();
    exponent_row(&mut csv, "index", &index);
    tables.push((EXPONENTS, csv.into_string()));
    Ok(json!({
        "index": index.point,
        "index_estimate": estimate_json(&index),
        "extinct": extinct,
        "detail": detail,
    }))
}

/// `(Lf, Γf)` observables for `W`, preferring the suite's closed forms.
fn w_generators(b: &ModelBundle) -> (Observable, Observable) {
    let model = b.model.clone();
    let w = b.suite.w.clone();
    let lw = b.suite.lw.clone().unwrap_or_else(|| {
        let (m, w) = (model.clone(), w.clone());
        observable(move |x| generator_fd(&m, &w, x).unwrap_or(f64::NAN))
    });
    let gw = b.suite.gamma_w.clone().unwrap_or_else(|| {
        let (m, w) = (model.clone(), w.clone());
        observable(move |x| carre_du_champ_fd(&m, &w, x).unwrap_or(f64::NAN))
    });
    (lw, gw)
}

fn sample_points(traj: &Trajectory, model: &ModelSpec, n: usize) -> Vec<StateVector> {
    let inside: Vec<&StateVector> = traj
        .states
        .iter()
        .filter(|s| model.distance_to_extinction(s) > 0.0)
        .collect();
    if inside.is_empty() {
        return Vec::new();
    }
    (0..n.min(inside.len()))
        .map(|k| inside[k * inside.len() / n.min(inside.len())].clone())
        .collect()
}

fn diagnostics_experiment(
    cfg: &ExperimentConfig,
    s: &Setup,
    tables: &mut Vec<(&'static str, String)>,
) -> Result<Value, RunError> {
    let b = &s.bundle;
    let model = &b.model;
    let trajs = runs(cfg, &s.ics, |i, _, rng| {
        simulate(model, &s.ics[i], &cfg.sim, rng)
    })?;
    let mut points = Vec::new();
    for i in 0..s.ics.len() {
        points.extend(sample_points(
            &trajs[i * cfg.replicas],
            model,
            cfg.options.points,
        ));
    }
    let suite = suite_diagnostics(model, &b.suite, &points)?;
    let agreement = if model.family() == Family::DiscreteChain {
        Value::Null
    } else {
        serde_json::to_value(h_agreement(
            model,
            &b.suite,
            &points,
            cfg.sim.floor_epsilon,
        )?)
        .expect("serializes")
    };
    let mut tight = Vec::new();
    for traj in &trajs {
        if traj.len() >= 2 {
            let t = tightness_check(traj, &b.suite, 0.0)?;
            tight.push(json!({
                "final_average": t.final_average,
                "tail_max": t.tail_max,
                "violated": t.violated,
            }));
        }
    }
    let residuals = if model.family() == Family::DiscreteChain {
        Value::Null
    } else {
        let (lw, gw) = w_generators(b);
        let mut csv = Csv::new(&["replica_id", "t", "dynkin", "qv"]);
        let mut final_m = Vec::new();
        for (k, traj) in trajs.iter().enumerate() {
            let m = dynkin_residual(traj, &b.suite.w, &lw)?;
            let q = qv_residual(traj, &b.suite.w, &lw, &gw)?;
            for ((t, m), q) in traj.times.iter().zip(&m).zip(&q) {
                csv.row(&[
                    Cell::Int(k as u64),
                    Cell::Float(*t),
                    Cell::Float(*m),
                    Cell::Float(*q),
                ]);
            }
            final_m.push(*m.last().unwrap_or(&0.0));
        }
        tables.push((RESIDUALS, csv.into_string()));
        let n = final_m.len() as f64;
        let mean = final_m.iter().sum::<f64>() / n;
        let sd = if final_m.len() > 1 {
            (final_m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        json!({ "mean_final_dynkin": mean, "standard_error": sd / n.sqrt() })
    };
    Ok(json!({
        "suite": serde_json::to_value(&suite).expect("serializes"),
        "suite_passes": suite.passes(),
        "h_agreement": agreement,
        "tightness": tight,
        "residuals": residuals,
        "k": b.suite.k,
        "alpha_candidate": b.suite.alpha_candidate,
    }))
}
