//! WebAssembly bindings for a static demo page. Each export takes plain
//! numbers and returns a JSON string.

use purcell::atom_env::{build_profile, linear_grid, EnvModel, EnvSpec};
use purcell::fiber::{alpha_profile, solve_he11, FiberSpec};
use purcell::tcspc::{fit_decay, synthesize, MixtureModel, WindowPolicy};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct ModeView {
    pub beta_over_k: f64,
    pub q_over_k: f64,
    pub v_number: f64,
    pub single_mode: bool,
    pub cutoff_radius_nm: f64,
    pub distances_nm: Vec<f64>,
    pub alpha_z: Vec<f64>,
    pub alpha_phi: Vec<f64>,
    pub alpha_r: Vec<f64>,
}

/// HE11 mode and `alpha_i` out to `max_distance_nm`.
pub fn mode_view(radius_nm: f64, core_index: f64, wavelength_nm: f64, max_distance_nm: f64) -> Result<ModeView, String> {
    let spec = FiberSpec::new(radius_nm, core_index, 1.0, wavelength_nm).map_err(|e| e.to_string())?;
    let mode = solve_he11(&spec).map_err(|e| e.to_string())?;
    let p = alpha_profile(&mode, &linear_grid(0.0, max_distance_nm.max(1.0), 121)).map_err(|e| e.to_string())?;
    Ok(ModeView {
        beta_over_k: mode.beta / mode.k,
        q_over_k: mode.q / mode.k,
        v_number: mode.v_number,
        single_mode: mode.single_mode,
        cutoff_radius_nm: spec.single_mode_cutoff_radius(),
        distances_nm: p.distances_nm,
        alpha_z: p.alpha_z,
        alpha_phi: p.alpha_phi,
        alpha_r: p.alpha_r,
    })
}

#[derive(Debug, Serialize)]
pub struct EnvView {
    pub r_nm: Vec<f64>,
    pub rho_rel: Vec<f64>,
    pub p_abs: Vec<f64>,
    pub delta_mhz: Vec<f64>,
}

/// Density and absorption versus distance for a cloud at `temperature_uk`.
pub fn env_view(temperature_uk: f64, saturation: f64, max_distance_nm: f64) -> Result<EnvView, String> {
    let model = EnvModel { spec: EnvSpec { temperature_uk, saturation, ..Default::default() }, ..Default::default() };
    model.validate().map_err(|e| e.to_string())?;
    let p = build_profile(&model, &linear_grid(5.0, max_distance_nm.max(10.0), 200)).map_err(|e| e.to_string())?;
    Ok(EnvView { r_nm: p.grid_nm, rho_rel: p.rho_rel, p_abs: p.p_abs, delta_mhz: p.delta_mhz })
}

#[derive(Debug, Serialize)]
pub struct DecayView {
    pub t_ns: Vec<f64>,
    pub counts: Vec<u64>,
    pub gamma_ratio: f64,
    pub gamma_ratio_sigma: f64,
    pub reduced_chi2: f64,
    pub accepted: bool,
    pub window_ns: (f64, f64),
    pub mean_rate: f64,
}

/// Synthesizes a histogram for rates spread uniformly over `rate * (1 +- spread)`
/// and fits it.
pub fn decay_view(rate: f64, spread: f64, photons: f64, seed: u64) -> Result<DecayView, String> {
    let mut model = MixtureModel::uniform_spread(rate, spread, if spread > 0.0 { 51 } else { 1 });
    model.photons = photons;
    model.validate().map_err(|e| e.to_string())?;
    let hist = synthesize(&model, seed).map_err(|e| e.to_string())?;
    let fit = fit_decay(&hist, &WindowPolicy::default()).map_err(|e| e.to_string())?;
    Ok(DecayView {
        t_ns: hist.times(),
        counts: hist.counts,
        gamma_ratio: fit.gamma_ratio,
        gamma_ratio_sigma: fit.gamma_ratio_sigma,
        reduced_chi2: fit.fit.reduced_chi2,
        accepted: fit.accepted,
        window_ns: fit.fit.window,
        mean_rate: model.mean_rate(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn mode_solve(radius_nm: f64, core_index: f64, wavelength_nm: f64, max_distance_nm: f64) -> Result<String, JsValue> {
    to_js(mode_view(radius_nm, core_index, wavelength_nm, max_distance_nm))
}

#[wasm_bindgen]
pub fn env_profile(temperature_uk: f64, saturation: f64, max_distance_nm: f64) -> Result<String, JsValue> {
    to_js(env_view(temperature_uk, saturation, max_distance_nm))
}

#[wasm_bindgen]
pub fn decay_fit(rate: f64, spread: f64, photons: f64, seed: u32) -> Result<String, JsValue> {
    to_js(decay_view(rate, spread, photons, seed as u64))
}
