//! WebAssembly bindings for the browser demo: a Lorenz noise scan, an SIS
//! extinction path and a geometric Brownian motion slope estimate.

use nalgebra::DMatrix;
use wasm_bindgen::prelude::*;

use extinctd::criteria::{lorenz_default_ics, lorenz_lambda_mc};
use extinctd::exponents::{extinction_fraction, trajectory_slope};
use extinctd::integrators::{simulate, SimConfig};
use extinctd::models::linear::make_linear_sde;
use extinctd::models::lorenz::LorenzParams;
use extinctd::models::sis::{complete_graph, make_sis, SisNoise, SisParams};
use extinctd::{RngStream, StateVector};

fn js(e: extinctd::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Monte Carlo `λ` on an evenly spaced grid of `points` noise levels in
/// `[0, alpha_max]`. Negative values certify extinction.
#[wasm_bindgen]
pub fn lorenz_alpha_scan(
    z_star: f64,
    eta: f64,
    alpha_max: f64,
    points: usize,
    t_final: f64,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let cfg = SimConfig::new(0.01, t_final).with_burn_in(0.1 * t_final);
    let ics = lorenz_default_ics(z_star);
    (0..points.max(1))
        .map(|k| {
            let alpha0 = if points > 1 {
                alpha_max * k as f64 / (points - 1) as f64
            } else {
                0.0
            };
            let p = LorenzParams::new(1.0, z_star, eta, alpha0);
            lorenz_lambda_mc(&p, &ics, &cfg, 2, seed)
                .map(|e| e.point)
                .map_err(js)
        })
        .collect()
}

/// SIS on the complete graph with `n` nodes. Returns `[index, t0, v0, t1, v1, ...]`
/// where `v = -log |x|` along one path started at `x = 0.5`.
#[wasm_bindgen]
pub fn sis_path(
    n: usize,
    beta: f64,
    delta: f64,
    kappa: f64,
    t_final: f64,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let p = SisParams {
        adjacency: vec![complete_graph(n)],
        beta: vec![beta],
        delta: vec![delta],
        noise: SisNoise::Linear(vec![kappa]),
        q: None,
    };
    let b = make_sis(&p).map_err(js)?;
    let index = p.extinction_index().map_err(js)?;
    let stride = ((t_final / 1e-3) / 2000.0).ceil().max(1.0) as usize;
    let cfg = SimConfig::new(1e-3, t_final).with_stride(stride);
    let traj = simulate(
        &b.model,
        &StateVector::new(vec![0.5; n]),
        &cfg,
        &mut RngStream::new(seed, 0),
    )
    .map_err(js)?;
    let mut out = vec![index];
    for (t, s) in traj.times.iter().zip(&traj.states) {
        out.push(*t);
        out.push((b.suite.v)(s));
    }
    Ok(out)
}

/// Geometric Brownian motion `dX = aX dt + σX dW`. Returns
/// `[mean slope, ci_low, ci_high, -a + σ²/2, first path slope]`.
#[wasm_bindgen]
pub fn gbm_slope(
    a: f64,
    sigma: f64,
    replicas: usize,
    t_final: f64,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    let b = make_linear_sde(&one(a), &one(sigma)).map_err(js)?;
    let x0 = StateVector::new(vec![1.0]);
    let cfg = SimConfig::new(1e-3, t_final);
    let rep = extinction_fraction(
        &b.model,
        &b.suite,
        std::slice::from_ref(&x0),
        &cfg,
        replicas.max(2),
        0.0,
        0.5,
        seed,
    )
    .map_err(js)?;
    let traj =
        simulate(&b.model, &x0, &cfg, &mut RngStream::for_state(seed, &x0, 0)).map_err(js)?;
    let first = trajectory_slope(&traj, &b.suite.v, 0.5).map_err(js)?.point;
    let s = rep.slopes;
    Ok(vec![
        s.point,
        s.ci_low,
        s.ci_high,
        b.suite.alpha_candidate,
        first,
    ])
}
