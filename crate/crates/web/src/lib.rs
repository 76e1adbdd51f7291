//! wasm-bindgen entry points for the browser demo in `www/`.
//!
//! Each export takes plain numbers, runs one computation from `spectra-core`
//! on a coarse grid and returns a JSON string ready for plotting. The
//! `*_json` functions are the same computations without the JS boundary.

use serde_json::{json, Value};
use spectra_core::nonlinear::{find_solution, Search};
use spectra_core::{make_grid, preset_potential, solve_explicit, spectrum, BoundaryAngle, GridFunction, Potential};
use wasm_bindgen::prelude::*;

/// Largest grid the page may request.
pub const MAX_GRID: usize = 4000;
/// Curves are thinned to at most this many points before leaving Rust.
const PLOT_POINTS: usize = 401;

fn setup(preset: &str, params: &[f64], seed: u64, grid_n: usize, alpha: f64) -> Result<(Potential, BoundaryAngle), String> {
    if !(8..=MAX_GRID).contains(&grid_n) {
        return Err(format!("grid_n must be in 8..={MAX_GRID}, got {grid_n}"));
    }
    let grid = make_grid(grid_n).map_err(|e| e.to_string())?;
    let q = preset_potential(preset, params, grid, Some(seed)).map_err(|e| e.to_string())?;
    let alpha = BoundaryAngle::new(alpha).map_err(|e| e.to_string())?;
    Ok((q, alpha))
}

fn curve(f: &GridFunction) -> Value {
    let grid = f.grid();
    let stride = grid.len().div_ceil(PLOT_POINTS).max(1);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in (0..grid.len()).step_by(stride).chain(std::iter::once(grid.len() - 1)) {
        if x.last() == Some(&grid.node(i)) {
            continue;
        }
        x.push(grid.node(i));
        y.push(f.values()[i]);
    }
    json!({ "x": x, "y": y })
}

/// First `k_max` eigenpairs of `q`.
pub fn eigenpairs_json(
    preset: &str,
    params: &[f64],
    seed: u64,
    grid_n: usize,
    alpha: f64,
    k_max: usize,
) -> Result<String, String> {
    if !(1..=12).contains(&k_max) {
        return Err(format!("k_max must be in 1..=12, got {k_max}"));
    }
    let (q, alpha) = setup(preset, params, seed, grid_n, alpha)?;
    let pairs = spectrum(&q, alpha, k_max).map_err(|e| e.to_string())?;
    let pairs: Vec<Value> = pairs
        .iter()
        .map(|p| {
            json!({
                "k": p.k,
                "lambda": p.lambda,
                "node_count": p.node_count,
                "phi": curve(&p.phi),
            })
        })
        .collect();
    Ok(json!({ "q": curve(q.samples()), "pairs": pairs }).to_string())
}

/// Solution of `-u'' + q u = lambda u + delta u^3` with `k - 1` interior zeros.
#[allow(clippy::too_many_arguments)]
pub fn nonlinear_json(
    preset: &str,
    params: &[f64],
    seed: u64,
    grid_n: usize,
    alpha: f64,
    lambda: f64,
    delta: i8,
    k: usize,
) -> Result<String, String> {
    let (q, alpha) = setup(preset, params, seed, grid_n, alpha)?;
    let out = match find_solution(&q, lambda, delta, k, alpha).map_err(|e| e.to_string())? {
        Search::Found(set) => json!({
            "found": true,
            "solutions": set.all().map(|s| json!({
                "u": curve(&s.u),
                "node_count": s.node_count,
                "max_abs": s.max_abs(),
                "shoot_param": s.shoot_param,
            })).collect::<Vec<_>>(),
        }),
        Search::NotFound(nf) => json!({
            "found": false,
            "node_histogram": nf.node_histogram,
            "s_min": nf.s_min,
            "s_max": nf.s_max,
        }),
    };
    Ok(json!({ "q": curve(q.samples()), "result": out }).to_string())
}

/// Nearest potential to `q0` whose `k`-th eigenvalue is `lambda_star`.
pub fn invert_json(
    preset: &str,
    params: &[f64],
    seed: u64,
    grid_n: usize,
    alpha: f64,
    k: usize,
    lambda_star: f64,
) -> Result<String, String> {
    let (q0, alpha) = setup(preset, params, seed, grid_n, alpha)?;
    let r = solve_explicit(&q0, k, lambda_star, alpha).map_err(|e| e.to_string())?;
    let lambda_k_q0 = r.diagnostics.get("lambda_k_q0").copied();
    Ok(json!({
        "q0": curve(q0.samples()),
        "q_hat": curve(r.q_hat.samples()),
        "u_hat": r.u_hat.as_ref().map(curve),
        "distance": r.distance,
        "delta": r.delta,
        "nu": r.nu,
        "lambda_k_q0": lambda_k_q0,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn eigenpairs(preset: &str, params: &[f64], seed: u32, grid_n: usize, alpha: f64, k_max: usize) -> Result<String, JsValue> {
    eigenpairs_json(preset, params, seed.into(), grid_n, alpha, k_max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn nonlinear(
    preset: &str,
    params: &[f64],
    seed: u32,
    grid_n: usize,
    alpha: f64,
    lambda: f64,
    delta: i8,
    k: usize,
) -> Result<String, JsValue> {
    nonlinear_json(preset, params, seed.into(), grid_n, alpha, lambda, delta, k).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn invert(
    preset: &str,
    params: &[f64],
    seed: u32,
    grid_n: usize,
    alpha: f64,
    k: usize,
    lambda_star: f64,
) -> Result<String, JsValue> {
    invert_json(preset, params, seed.into(), grid_n, alpha, k, lambda_star).map_err(|e| JsValue::from_str(&e))
}
