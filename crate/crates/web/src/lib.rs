//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export is a thin wrapper over a plain function returning
//! `Result<String, String>`, so the logic is testable natively.

use serde::Serialize;
use ugc_equilibrium::fullinfo::{perturbed_dynamics, solve, DynamicsOptions, EquilibriumOutcome, SolveOptions};
use ugc_equilibrium::partialinfo::{calibrate_beta, win_probability, win_probability_derivative, SegmentLabel};
use ugc_equilibrium::svg::strategy_svg;
use ugc_equilibrium::verify::verify_pne;
use ugc_equilibrium::{GameConfig, Mechanism, TypeDistribution};
use wasm_bindgen::prelude::*;

/// Largest curve resolution the page may ask for.
pub const MAX_POINTS: usize = 5000;

#[derive(Serialize)]
struct CurveResponse {
    svg: String,
    kinds: Vec<SegmentLabel>,
    fallback: bool,
    crossings: Vec<f64>,
    slope_one_points: Vec<f64>,
}

/// Calibrated M6 bid curve under uniform types: JSON with the SVG plot and
/// the calibration summary.
pub fn calibrated_curve(n: usize, k: usize, reward: f64, cost: f64, grid: usize) -> Result<String, String> {
    let cfg = GameConfig::partial_information(Mechanism::M6, n, TypeDistribution::uniform(), reward, cost, Some(k))
        .map_err(|e| e.to_string())?;
    let strategy = calibrate_beta(&cfg, grid.clamp(1000, MAX_POINTS)).map_err(|e| e.to_string())?;
    let response = CurveResponse {
        svg: strategy_svg(&strategy).map_err(|e| e.to_string())?,
        kinds: strategy.kinds_present(),
        fallback: strategy.fallback,
        crossings: strategy.calibrations.iter().map(|c| c.crossing).collect(),
        slope_one_points: strategy.calibrations.iter().filter_map(|c| c.slope_one).collect(),
    };
    Ok(serde_json::to_string(&response).expect("serializable"))
}

#[derive(Serialize)]
struct WinCurve {
    x: Vec<f64>,
    t: Vec<f64>,
    dt: Vec<f64>,
}

/// `T(x)` and its derivative on `points + 1` evenly spaced types, for
/// uniform types or a piecewise-linear CDF through `(0,0)`, `(mid, mass)`
/// and `(1,1)` when `mid` lies strictly inside (0, 1).
pub fn win_curve(n: usize, k: usize, mid: f64, mass: f64, points: usize) -> Result<String, String> {
    let dist = if mid > 0.0 && mid < 1.0 {
        TypeDistribution::piecewise(vec![(0.0, 0.0), (mid, mass), (1.0, 1.0)]).map_err(|e| e.to_string())?
    } else {
        TypeDistribution::uniform()
    };
    // R and c do not enter T; any admissible pair will do.
    let cfg = GameConfig::partial_information(Mechanism::M5, n, dist, 1.0, 1.0, Some(k)).map_err(|e| e.to_string())?;
    let points = points.clamp(2, MAX_POINTS);
    let x: Vec<f64> = (0..=points).map(|i| i as f64 / points as f64).collect();
    let t = x.iter().map(|&v| win_probability(v, &cfg)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let dt = x.iter().map(|&v| win_probability_derivative(v, &cfg)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&WinCurve { x, t, dt }).expect("serializable"))
}

#[derive(Serialize)]
struct M4Response {
    outcome: EquilibriumOutcome,
    gain: f64,
    dynamics: Vec<f64>,
    dynamics_iterations: usize,
    dynamics_converged: bool,
}

/// Proportional-reward equilibrium for the given types, with its deviation
/// gain and the perturbed best-response limit for comparison.
pub fn m4_equilibrium(types: Vec<f64>, reward: f64, cost: f64) -> Result<String, String> {
    let mut types = types;
    ugc_equilibrium::model::sort_types(&mut types);
    let cfg = GameConfig::full_information(Mechanism::M4, types, reward, cost, None).map_err(|e| e.to_string())?;
    let outcome = solve(&cfg, SolveOptions::default()).map_err(|e| e.to_string())?;
    let gain = verify_pne(&outcome.profiles[0], &cfg, 1e-9).map_err(|e| e.to_string())?.gain;
    let dynamics = perturbed_dynamics(&cfg, DynamicsOptions::default()).map_err(|e| e.to_string())?;
    let response = M4Response {
        outcome,
        gain,
        dynamics: dynamics.profile.0,
        dynamics_iterations: dynamics.iterations,
        dynamics_converged: dynamics.converged,
    };
    Ok(serde_json::to_string(&response).expect("serializable"))
}

#[wasm_bindgen(js_name = calibratedCurve)]
pub fn calibrated_curve_js(n: usize, k: usize, reward: f64, cost: f64, grid: usize) -> Result<String, JsValue> {
    calibrated_curve(n, k, reward, cost, grid).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = winCurve)]
pub fn win_curve_js(n: usize, k: usize, mid: f64, mass: f64, points: usize) -> Result<String, JsValue> {
    win_curve(n, k, mid, mass, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = m4Equilibrium)]
pub fn m4_equilibrium_js(types: Vec<f64>, reward: f64, cost: f64) -> Result<String, JsValue> {
    m4_equilibrium(types, reward, cost).map_err(|e| JsValue::from_str(&e))
}
