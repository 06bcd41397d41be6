//! Browser bindings for three interactive views: the rates of `N(t)` for a
//! biased tight-binding chain, the non-Markovianity of the steady state as
//! the bias grows, and the correlation profile of a driven XY chain.
//!
//! The `*_values` functions do the work and are plain Rust so they can be
//! tested natively; the exported wrappers only convert errors.

use wasm_bindgen::prelude::*;

use nonmarkov::dynamics::{rate_decomposition, OpenSystem};
use nonmarkov::models::{tight_binding_chain, xy_chain, Lead, TightBindingSpec, XYSpec};
use nonmarkov::observables::{classify_decay, correlation_profile, DecayOptions};
use nonmarkov::steadystate::{infinite_bias_noise, n_infinity, steady_chi_for_noise, DEFAULT_GAP_THRESHOLD};
use nonmarkov::Result;

const ZERO_RATE: f64 = 1e-10;
const STEADY_TOL: f64 = 1e-8;

fn lead(temperature: f64, mu: f64) -> Lead {
    if temperature.is_infinite() {
        Lead::infinite_temperature()
    } else {
        Lead::new(temperature, mu)
    }
}

fn chain(sites: usize, gamma_left: f64, gamma_right: f64, temperature: f64, mu_left: f64, mu_right: f64) -> Result<OpenSystem> {
    let spec = TightBindingSpec { sites, gamma_left, gamma_right, left: lead(temperature, mu_left), right: lead(temperature, mu_right) };
    OpenSystem::new(tight_binding_chain(&spec)?)
}

fn grid(start: f64, stop: f64, points: usize, log: bool) -> Vec<f64> {
    if points < 2 {
        return vec![start];
    }
    (0..points)
        .map(|i| {
            let s = i as f64 / (points - 1) as f64;
            if log {
                (start.ln() + s * (stop.ln() - start.ln())).exp()
            } else {
                start + s * (stop - start)
            }
        })
        .collect()
}

/// Rows `[t, γ_1 … γ_2n, f_nM]` flattened, preceded by the row length.
#[allow(clippy::too_many_arguments)]
pub fn rate_trace_values(
    sites: usize,
    gamma_left: f64,
    gamma_right: f64,
    temperature: f64,
    mu_left: f64,
    mu_right: f64,
    t_max: f64,
    points: usize,
) -> Result<Vec<f64>> {
    let system = chain(sites, gamma_left, gamma_right, temperature, mu_left, mu_right)?;
    let stride = 2 * sites + 2;
    let mut out = Vec::with_capacity(1 + stride * points);
    out.push(stride as f64);
    for t in grid(0.0, t_max, points, false) {
        let rd = rate_decomposition(&system.noise(t)?.matrix, ZERO_RATE)?;
        out.push(t);
        out.extend_from_slice(rd.rates());
        out.push(rd.non_markovianity());
    }
    Ok(out)
}

/// Pairs `[V, f_nM(N_∞)]` for `μ_L = −μ_R = V/2` on a log grid of biases.
pub fn nonmarkovianity_values(
    sites: usize,
    gamma_left: f64,
    gamma_right: f64,
    temperature: f64,
    bias_min: f64,
    bias_max: f64,
    points: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * points);
    for v in grid(bias_min, bias_max, points, true) {
        let system = chain(sites, gamma_left, gamma_right, temperature, v / 2.0, -v / 2.0)?;
        let rd = rate_decomposition(&n_infinity(&system)?.matrix, ZERO_RATE)?;
        out.push(v);
        out.push(rd.non_markovianity());
    }
    Ok(out)
}

/// Averaged correlation profile of the XY steady state with its fitted decay.
#[wasm_bindgen]
#[derive(Clone, Debug)]
pub struct Profile {
    distances: Vec<f64>,
    values: Vec<f64>,
    kind: String,
    exponent: f64,
    length: f64,
}

#[wasm_bindgen]
impl Profile {
    #[wasm_bindgen(getter)]
    pub fn distances(&self) -> Vec<f64> {
        self.distances.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// `algebraic`, `exponential`, or `unresolved` when too few points lie
    /// above the numerical floor.
    #[wasm_bindgen(getter)]
    pub fn kind(&self) -> String {
        self.kind.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    #[wasm_bindgen(getter)]
    pub fn length(&self) -> f64 {
        self.length
    }
}

/// With `infinite_bias` the reservoirs are replaced by their limit of
/// completely filled and completely empty leads, where the noise is Markovian.
pub fn xy_profile_values(sites: usize, anisotropy: f64, field: f64, delta_h: f64, gamma: f64, infinite_bias: bool) -> Result<Profile> {
    let system = OpenSystem::new(xy_chain(&XYSpec::new(sites, anisotropy, field, delta_h, gamma))?)?;
    let noise = if infinite_bias { infinite_bias_noise(&system) } else { n_infinity(&system)?.matrix };
    let state = steady_chi_for_noise(&system, &noise, STEADY_TOL, DEFAULT_GAP_THRESHOLD)?;
    let profile = correlation_profile(&state.chi_inf)?;
    let (kind, exponent, length) = match classify_decay(&profile, &DecayOptions::for_chain(sites)) {
        Ok(fit) => (fit.kind.to_string(), fit.exponent, fit.length),
        Err(_) => ("unresolved".to_string(), f64::NAN, f64::NAN),
    };
    Ok(Profile {
        distances: profile.iter().map(|&(r, _)| r as f64).collect(),
        values: profile.iter().map(|&(_, v)| v).collect(),
        kind,
        exponent,
        length,
    })
}

fn js(e: nonmarkov::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn rate_trace(
    sites: usize,
    gamma_left: f64,
    gamma_right: f64,
    temperature: f64,
    mu_left: f64,
    mu_right: f64,
    t_max: f64,
    points: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    rate_trace_values(sites, gamma_left, gamma_right, temperature, mu_left, mu_right, t_max, points).map_err(js)
}

#[wasm_bindgen]
pub fn nonmarkovianity_vs_bias(
    sites: usize,
    gamma_left: f64,
    gamma_right: f64,
    temperature: f64,
    bias_min: f64,
    bias_max: f64,
    points: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    nonmarkovianity_values(sites, gamma_left, gamma_right, temperature, bias_min, bias_max, points).map_err(js)
}

#[wasm_bindgen]
pub fn xy_profile(
    sites: usize,
    anisotropy: f64,
    field: f64,
    delta_h: f64,
    gamma: f64,
    infinite_bias: bool,
) -> std::result::Result<Profile, JsError> {
    xy_profile_values(sites, anisotropy, field, delta_h, gamma, infinite_bias).map_err(js)
}
