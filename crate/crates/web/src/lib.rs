//! WebAssembly bindings behind `www/index.html`: concentration profiles across
//! the slab and the Damköhler regime of a parameter set.
//!
//! Errors cross the boundary as plain strings so the functions also run (and
//! are tested) natively.

use rdlab::analytic::{reaction_diffusion_series, steady_state_profile, ProblemSpec, SeriesOptions, SpaceTimePoint};
use rdlab::evaluation::{damkohler, Regime, RegimeThresholds};
use rdlab::fd::{self, Grid};
use rdlab::SECONDS_PER_YEAR;
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 2001;

fn spec(de: f64, k: f64, c0: f64, half_thickness: f64) -> Result<ProblemSpec, String> {
    ProblemSpec::new(de, k, c0, half_thickness).map_err(|e| e.to_string())
}

fn check_points(points: usize) -> Result<(), String> {
    if (2..=MAX_POINTS).contains(&points) {
        Ok(())
    } else {
        Err(format!("points must lie in 2..={MAX_POINTS}, got {points}"))
    }
}

/// `points` evenly spaced positions spanning `[−L, L]`.
#[wasm_bindgen]
pub fn positions(half_thickness: f64, points: usize) -> Result<Vec<f64>, String> {
    check_points(points)?;
    let step = 2.0 * half_thickness / (points - 1) as f64;
    Ok((0..points).map(|i| -half_thickness + i as f64 * step).collect())
}

/// Series concentration at [`positions`] after `t_years`.
#[wasm_bindgen]
pub fn series_profile(
    de: f64,
    k: f64,
    c0: f64,
    half_thickness: f64,
    t_years: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let spec = spec(de, k, c0, half_thickness)?;
    let opts = SeriesOptions::labelling();
    let t = t_years * SECONDS_PER_YEAR;
    positions(half_thickness, points)?
        .into_iter()
        .map(|x| {
            let x = x.clamp(-half_thickness, half_thickness);
            reaction_diffusion_series(&spec, SpaceTimePoint::new(x, t), &opts).map_err(|e| e.to_string())
        })
        .collect()
}

/// Crank–Nicolson concentration at [`positions`] after `t_years`, on the
/// default 201-node lattice.
#[wasm_bindgen]
pub fn fd_profile(
    de: f64,
    k: f64,
    c0: f64,
    half_thickness: f64,
    t_years: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let spec = spec(de, k, c0, half_thickness)?;
    let t = t_years * SECONDS_PER_YEAR;
    if !(t > 0.0 && t.is_finite()) {
        return Err(format!("time must be positive, got {t_years} years"));
    }
    let grid = Grid::for_horizon(&spec, t).map_err(|e| e.to_string())?;
    let field = fd::solve(&spec, &grid).map_err(|e| e.to_string())?;
    positions(half_thickness, points)?
        .into_iter()
        .map(|x| field.probe(x.clamp(-half_thickness, half_thickness), t).map_err(|e| e.to_string()))
        .collect()
}

/// Long-time cosh profile at [`positions`].
#[wasm_bindgen]
pub fn steady_profile(de: f64, k: f64, c0: f64, half_thickness: f64, points: usize) -> Result<Vec<f64>, String> {
    let spec = spec(de, k, c0, half_thickness)?;
    Ok(positions(half_thickness, points)?
        .into_iter()
        .map(|x| steady_state_profile(&spec, x))
        .collect())
}

#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeInfo {
    pub da: f64,
    /// `pure-diffusion`, `reaction-diffusion` or `pure-reaction`.
    pub regime: String,
}

/// Damköhler number `kL²/De` and its regime (cut-offs 0.1 and 10).
#[wasm_bindgen]
pub fn damkohler_regime(de: f64, k: f64, half_thickness: f64) -> Result<RegimeInfo, String> {
    let spec = spec(de, k, 1.0, half_thickness)?;
    let r = damkohler(&spec, &RegimeThresholds::default());
    let regime = match r.regime {
        Regime::PureDiffusion => "pure-diffusion",
        Regime::ReactionDiffusion => "reaction-diffusion",
        Regime::PureReaction => "pure-reaction",
    };
    Ok(RegimeInfo {
        da: r.da,
        regime: regime.into(),
    })
}
