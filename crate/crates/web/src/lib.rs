//! Browser bindings for the interactive page in `www/`.
//!
//! Curves cross the boundary as flat `Float64Array`s sampled on the grid
//! `x_i = i * L / (n - 1)`, so the page can rebuild the abscissae itself.

use bbmlab::bbm::{run_replicates, ModelSpec, SimConfig};
use bbmlab::pde::{evolve_snapshots, EvolveSpec, Grid1D, Scheme};
use bbmlab::stationary::{closed_form, shoot};
use bbmlab::OffspringPolynomial;
use wasm_bindgen::prelude::*;

fn law(coeffs: &[f64]) -> Result<OffspringPolynomial, String> {
    OffspringPolynomial::new(coeffs.to_vec()).map_err(|e| e.to_string())
}

fn grid(length: f64, dx: f64) -> Result<Grid1D, String> {
    Grid1D::with_spacing(length, dx).map_err(|e| e.to_string())
}

pub fn classify_law(coeffs: &[f64]) -> Result<String, String> {
    let g = law(coeffs)?;
    let c = g.classify();
    let q = g.extinction().map_err(|e| e.to_string())?;
    Ok(format!(
        "{}, m={:.6}, q*={:.6}",
        c.regime, c.mean_offspring, q
    ))
}

/// `[r(t_1), s(t_1), r(t_2), s(t_2), ...]`, each `n` values long.
pub fn pde_curves(
    lambda: f64,
    coeffs: &[f64],
    length: f64,
    dx: f64,
    times: &[f64],
) -> Result<Vec<f64>, String> {
    let g = law(coeffs)?;
    let grid = grid(length, dx)?;
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let run = |spec: EvolveSpec| evolve_snapshots(&spec, grid, &sorted).map_err(|e| e.to_string());
    let r = run(EvolveSpec::r_type(
        lambda,
        g.clone(),
        0.01,
        Scheme::SemiImplicitCN,
    ))?;
    let s = run(EvolveSpec::s_type(lambda, g, 0.01, Scheme::SemiImplicitCN))?;
    Ok(r.iter()
        .zip(&s)
        .flat_map(|((_, a), (_, b))| a.values.iter().chain(&b.values).copied())
        .collect())
}

/// Shooting profile followed by the binary closed form (NaN for other laws).
pub fn stationary_curves(
    lambda: f64,
    coeffs: &[f64],
    length: f64,
    dx: f64,
) -> Result<Vec<f64>, String> {
    let g = law(coeffs)?;
    let grid = grid(length, dx)?;
    let ode = shoot(lambda, &g, length, 1e-4).map_err(|e| e.to_string())?;
    let binary = g.coeffs() == [0.5, 0.0, 0.5];
    let mut out: Vec<f64> = grid.xs().map(|x| ode.profile.interpolate(x)).collect();
    out.extend(grid.xs().map(|x| {
        if binary {
            closed_form(lambda, x)
        } else {
            f64::NAN
        }
    }));
    Ok(out)
}

/// `[r, r_half_width, s, s_half_width, capped]` at the horizon.
pub fn monte_carlo(
    lambda: f64,
    coeffs: &[f64],
    x: f64,
    horizon: f64,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let model = ModelSpec::new(lambda, law(coeffs)?, x).map_err(|e| e.to_string())?;
    let cfg = SimConfig::new(model)
        .with_horizon(horizon)
        .with_seed(seed)
        .with_dt(1e-2);
    let set = run_replicates(&cfg, n_reps).map_err(|e| e.to_string())?;
    let b = set.p_bounds().map_err(|e| e.to_string())?;
    Ok(vec![
        b.lower.mean,
        b.lower.half_width_95,
        b.upper.mean,
        b.upper.half_width_95,
        set.tag_counts().cap_exceeded as f64,
    ])
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen]
pub fn classify(coeffs: &[f64]) -> Result<String, JsError> {
    classify_law(coeffs).map_err(js)
}

#[wasm_bindgen(js_name = pdeCurves)]
pub fn pde_curves_js(
    lambda: f64,
    coeffs: &[f64],
    length: f64,
    dx: f64,
    times: &[f64],
) -> Result<Vec<f64>, JsError> {
    pde_curves(lambda, coeffs, length, dx, times).map_err(js)
}

#[wasm_bindgen(js_name = stationaryCurves)]
pub fn stationary_curves_js(
    lambda: f64,
    coeffs: &[f64],
    length: f64,
    dx: f64,
) -> Result<Vec<f64>, JsError> {
    stationary_curves(lambda, coeffs, length, dx).map_err(js)
}

#[wasm_bindgen(js_name = monteCarlo)]
pub fn monte_carlo_js(
    lambda: f64,
    coeffs: &[f64],
    x: f64,
    horizon: f64,
    n_reps: u32,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    monte_carlo(lambda, coeffs, x, horizon, n_reps as usize, seed as u64).map_err(js)
}
