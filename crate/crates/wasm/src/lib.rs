//! Browser bindings for the threshold-cascade demo page in `www/`.
//!
//! Populations are passed as `w:k:r,...` strings. Every export has a plain
//! Rust twin returning `Result<_, String>` so the logic is testable natively.

use ltm_core::dynamics::{run, Mode, RunOptions};
use ltm_core::ensembles::sample_directed_cm;
use ltm_core::harness::parse_mixture;
use ltm_core::meanfield::{fixed_points, iterate, MeanFieldMaps, Stability, Term};
use ltm_core::statistics::synthesize_mixture;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest network the page may ask for.
pub const MAX_NODES: u64 = 200_000;

fn maps(mixture: &str) -> Result<MeanFieldMaps, String> {
    let terms = parse_mixture(mixture).map_err(|e| e.to_string())?;
    MeanFieldMaps::symmetric(terms.into_iter().map(|(w, k, r)| Term::new(k, r, w)).collect()).map_err(|e| e.to_string())
}

fn grid(points: usize) -> Vec<f64> {
    let m = points.max(2) - 1;
    (0..=m).map(|i| i as f64 / m as f64).collect()
}

#[derive(Serialize)]
struct Root {
    x: f64,
    stable: bool,
}

#[derive(Serialize)]
pub struct Curve {
    x: Vec<f64>,
    phi: Vec<f64>,
    roots: Vec<Root>,
}

/// `phi` on a uniform grid plus its fixed points.
pub fn curve(mixture: &str, points: usize) -> Result<Curve, String> {
    let m = maps(mixture)?;
    let profile = fixed_points(&m).map_err(|e| e.to_string())?;
    let x = grid(points);
    Ok(Curve {
        phi: x.iter().map(|&v| m.phi(v)).collect(),
        roots: profile
            .fixed_points
            .iter()
            .map(|p| Root {
                x: p.x,
                stable: p.stability == Stability::Stable,
            })
            .collect(),
        x,
    })
}

#[derive(Serialize)]
pub struct Staircase {
    xi: Vec<f64>,
    y_star: Vec<f64>,
    jumps: Vec<f64>,
}

/// Limit `y*` against the seed fraction.
pub fn staircase(mixture: &str, points: usize) -> Result<Staircase, String> {
    let m = maps(mixture)?;
    let profile = fixed_points(&m).map_err(|e| e.to_string())?;
    let xi = grid(points);
    let y_star = profile.tabulate(&m, &xi).into_iter().map(|p| p.y_star).collect();
    Ok(Staircase {
        jumps: profile.discontinuities.clone(),
        xi,
        y_star,
    })
}

#[derive(Serialize)]
pub struct Comparison {
    z: Vec<f64>,
    y: Vec<f64>,
}

/// One configuration-model draw simulated next to the recursion.
pub fn compare(mixture: &str, n: u64, upsilon: f64, horizon: usize, seed: u64) -> Result<Comparison, String> {
    if n == 0 || n > MAX_NODES {
        return Err(format!("n must be in 1..={MAX_NODES}"));
    }
    let mix = parse_mixture(mixture).map_err(|e| e.to_string())?;
    let stats = synthesize_mixture(&mix, upsilon, n).map_err(|e| e.to_string())?;
    let net = sample_directed_cm(&stats, n, seed).map_err(|e| e.to_string())?.network;
    let rec = run(&net, RunOptions::new(Mode::Ltm, horizon));
    let m = MeanFieldMaps::from_stats(&stats).map_err(|e| e.to_string())?;
    let traj = iterate(&m, stats.xi(), stats.upsilon(), horizon).map_err(|e| e.to_string())?;
    Ok(Comparison {
        z: (0..=horizon).map(|t| rec.z_at(t)).collect(),
        y: (0..=horizon).map(|t| traj.y_at(t)).collect(),
    })
}

fn js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsError::new(&e))
}

/// JSON `{x, phi, roots: [{x, stable}]}`.
#[wasm_bindgen(js_name = mapCurve)]
pub fn map_curve(mixture: &str, points: usize) -> Result<String, JsError> {
    js(curve(mixture, points))
}

/// JSON `{xi, y_star, jumps}`.
#[wasm_bindgen(js_name = limitStaircase)]
pub fn limit_staircase(mixture: &str, points: usize) -> Result<String, JsError> {
    js(staircase(mixture, points))
}

/// JSON `{z, y}` for `t = 0..=horizon`.
#[wasm_bindgen(js_name = simulateVsRecursion)]
pub fn simulate_vs_recursion(mixture: &str, n: u32, upsilon: f64, horizon: usize, seed: u32) -> Result<String, JsError> {
    js(compare(mixture, n as u64, upsilon, horizon, seed as u64))
}
