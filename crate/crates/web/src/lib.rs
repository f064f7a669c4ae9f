//! Browser bindings: each export takes plain numbers and returns a JSON
//! string for the page to plot.

use fracstrich::estimates::{DataShape, Resolution, MAX_GRID_ENTRIES};
use fracstrich::propagator::{evolution_grids, evolve};
use fracstrich::radial::HankelPlan;
use fracstrich::specfun::{remainder_slope_scan, BesselOrder};
use fracstrich::weights::{mc_norm, CubeLattice, McParams, Weight};
use fracstrich::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Remainder {
    pub nu: f64,
    pub r: Vec<f64>,
    pub envelope: Vec<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub identically_zero: bool,
}

pub fn bessel_remainder(nu: f64, r_min: f64, r_max: f64, samples: usize) -> Result<Remainder> {
    if samples > 4096 {
        return Err(Error::InvalidInput(format!("at most 4096 samples, got {samples}")));
    }
    let scan = remainder_slope_scan(BesselOrder::new(nu)?, r_min, r_max, samples)?;
    Ok(Remainder {
        nu,
        slope: scan.fit.as_ref().map(|f| f.slope),
        intercept: scan.fit.as_ref().map(|f| f.intercept),
        r: scan.r,
        envelope: scan.envelope,
        identically_zero: scan.identically_zero,
    })
}

#[derive(Debug, Serialize)]
pub struct Evolution {
    pub r: Vec<f64>,
    pub initial: Vec<f64>,
    pub evolved: Vec<f64>,
    /// ‖u(t)‖₂ / ‖f‖₂
    pub norm_ratio: f64,
}

/// |f| and |e^{it(−Δ)^{a/2}} f| for a Gaussian of the given width in R^n.
pub fn evolve_gaussian(n: usize, a: f64, width: f64, t: f64) -> Result<Evolution> {
    let shape = DataShape::Gaussian { width };
    shape.validate()?;
    let res = Resolution::for_shape(&shape, a, t.abs());
    let (r, rho) = evolution_grids(res.r_max, res.rho_max, t, a, res.r_grading)?;
    if r.len() * rho.len() > MAX_GRID_ENTRIES / 4 {
        return Err(Error::Resolution(format!("{} x {} transform is too large for the page", r.len(), rho.len())));
    }
    let plan = HankelPlan::new(n, r, rho)?;
    let f = shape.profile(n, plan.r_grid())?;
    let u = evolve(&plan, &f, t, a)?;
    Ok(Evolution {
        r: plan.r_grid().nodes().to_vec(),
        initial: f.values().iter().map(|v| v.norm()).collect(),
        evolved: u.values().iter().map(|v| v.norm()).collect(),
        norm_ratio: u.l2_norm() / f.l2_norm(),
    })
}

#[derive(Debug, Serialize)]
pub struct PowerNorm {
    pub value: f64,
    pub m_min: i32,
    /// Largest cube value at each radius 2^m.
    pub per_m: Vec<f64>,
    pub growth: bool,
}

/// Morrey–Campanato norm of |x|^{−γx}|t|^{−γt} on a small cube lattice.
pub fn power_weight_norm(n: usize, a: f64, alpha: f64, p: f64, gamma_x: f64, gamma_t: f64) -> Result<PowerNorm> {
    let lattice = CubeLattice {
        m_min: -4,
        m_max: 4,
        space_offsets: 6,
        time_offsets: 3,
    };
    let rep = mc_norm(&Weight::power(gamma_x, gamma_t), &McParams::new(alpha, p, a, n)?, &lattice)?;
    Ok(PowerNorm {
        value: rep.value,
        m_min: lattice.m_min,
        per_m: rep.per_m,
        growth: rep.growth,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = besselRemainder)]
pub fn bessel_remainder_js(nu: f64, r_min: f64, r_max: f64, samples: usize) -> std::result::Result<String, JsError> {
    to_js(bessel_remainder(nu, r_min, r_max, samples))
}

#[wasm_bindgen(js_name = evolveGaussian)]
pub fn evolve_gaussian_js(n: usize, a: f64, width: f64, t: f64) -> std::result::Result<String, JsError> {
    to_js(evolve_gaussian(n, a, width, t))
}

#[wasm_bindgen(js_name = powerWeightNorm)]
pub fn power_weight_norm_js(n: usize, a: f64, alpha: f64, p: f64, gamma_x: f64, gamma_t: f64) -> std::result::Result<String, JsError> {
    to_js(power_weight_norm(n, a, alpha, p, gamma_x, gamma_t))
}
