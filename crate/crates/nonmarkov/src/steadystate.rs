//! Asymptotic noise matrix `N_∞` and the steady state `χ_∞`.
//!
//! With `K = V Λ W`, `W = V⁻¹`, the stationary solution of
//! `−iKχ + iχK† + N_∞ = 0` is `χ_∞ = V X V†` with
//! `X_βγ = −i (W N_∞ W†)_βγ / (λ_β − λ̄_γ)`.

use faer::Mat;

use crate::dynamics::{CorrelationMatrix, KernelTime, NoiseMatrix, OpenSystem};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, I};
use crate::nambu::NambuMatrix;

/// Modes coupled to a reservoir must satisfy `Im λ < −DEFAULT_EPS_GAP`.
pub const DEFAULT_EPS_GAP: f64 = 1e-8;

/// Smallest admissible `|λ_β − λ̄_γ|`.
pub const DEFAULT_GAP_THRESHOLD: f64 = 1e-10;

/// Default bound on the residual of the stationarity equation.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// `N_∞ = lim_{t→∞} N(t)`.
///
/// The `ln t/π` growth of the kernel multiplies the identity and cancels in
/// every bracket, so the limit is taken with the subtracted kernel
/// [`crate::kernels::kernel_R_infinity`].
pub fn n_infinity(system: &OpenSystem) -> Result<NoiseMatrix> {
    system.noise_at(KernelTime::Infinity)
}

/// Time at which `N(t)` is expected to have converged:
/// `50 / min |Im λ|` over the spectrum of `K`.
pub fn t_big(system: &OpenSystem) -> f64 {
    let min_im = system.generator().spectral().eigenvalues().iter().map(|l| l.im.abs()).fold(f64::INFINITY, f64::min);
    50.0 / min_im
}

/// `χ_∞` with the quantities needed to judge it.
#[derive(Clone, Debug)]
pub struct SteadyStateResult {
    pub chi_inf: CorrelationMatrix,
    pub n_inf: NambuMatrix,
    /// `min_{βγ} |λ_β − λ̄_γ|`
    pub min_gap: f64,
    /// `‖−iKχ_∞ + iχ_∞K† + N_∞‖_max`
    pub residual: f64,
}

/// `‖−iKχ + iχK† + N‖_max`.
pub fn stationarity_residual(k: &CMat, chi: &CMat, n: &CMat) -> f64 {
    let kc = k * chi;
    let d = chi.nrows();
    let mut worst = 0.0f64;
    for j in 0..d {
        for i in 0..d {
            let v = -I * kc[(i, j)] + I * kc[(j, i)].conj() + n[(i, j)];
            worst = worst.max(v.norm());
        }
    }
    worst
}

/// Solves for the steady state with the default gap threshold.
pub fn steady_chi(system: &OpenSystem, tolerance: f64) -> Result<SteadyStateResult> {
    steady_chi_with(system, tolerance, DEFAULT_GAP_THRESHOLD)
}

pub fn steady_chi_with(system: &OpenSystem, tolerance: f64, gap_threshold: f64) -> Result<SteadyStateResult> {
    let min_gap = spectral_gap(system);
    if !(min_gap > gap_threshold) {
        return Err(Error::IllConditionedSteadyState { min_gap });
    }
    let n_inf = n_infinity(system)?.matrix;
    steady_chi_for_noise(system, &n_inf, tolerance, gap_threshold)
}

fn spectral_gap(system: &OpenSystem) -> f64 {
    let values = system.generator().spectral().eigenvalues();
    let mut min_gap = f64::INFINITY;
    for &a in values {
        for &b in values {
            min_gap = min_gap.min((a - b.conj()).norm());
        }
    }
    min_gap
}

/// Stationary state of `−iKχ + iχK† + N = 0` for a prescribed constant
/// noise matrix, e.g. [`infinite_bias_noise`].
pub fn steady_chi_for_noise(system: &OpenSystem, n_inf: &NambuMatrix, tolerance: f64, gap_threshold: f64) -> Result<SteadyStateResult> {
    if n_inf.n() != system.n() {
        return Err(Error::Dimension { expected: 2 * system.n(), found: n_inf.dim() });
    }
    let min_gap = spectral_gap(system);
    if !(min_gap > gap_threshold) {
        return Err(Error::IllConditionedSteadyState { min_gap });
    }
    let sd = system.generator().spectral();
    let values = sd.eigenvalues();
    let w = sd.left();
    let v = sd.right();
    let x = &(w * n_inf.as_mat()) * w.adjoint();
    let d = values.len();
    let x = Mat::from_fn(d, d, |b, g| -I * x[(b, g)] / (values[b] - values[g].conj()));
    let chi = &(v * &x) * v.adjoint();
    let chi = linalg::hermitian_part(&chi);
    let residual = stationarity_residual(system.generator().matrix().as_mat(), &chi, n_inf.as_mat());
    if !(residual <= tolerance) {
        return Err(Error::Residual { residual, tolerance });
    }
    let chi_inf = CorrelationMatrix::new(NambuMatrix::new(chi)?).map_err(|e| match e {
        Error::InvariantViolation { what, defect, .. } => Error::InvariantViolation { what, t: f64::INFINITY, defect },
        other => other,
    })?;
    Ok(SteadyStateResult { chi_inf, n_inf: n_inf.clone(), min_gap, residual })
}

/// `N_ν(∞)` of a single reservoir, symmetrized.
pub fn reservoir_n_infinity(system: &OpenSystem, idx: usize) -> Result<NambuMatrix> {
    if idx >= system.reservoir_count() {
        return Err(Error::IndexOutOfRange { index: idx, limit: system.reservoir_count() });
    }
    let raw = system.reservoir_noise_raw(idx, KernelTime::Infinity).map_err(|e| e.in_reservoir(idx))?;
    Ok(NambuMatrix::from_mat_unchecked(linalg::hermitian_part(&raw)))
}

/// Noise in the limit of infinite bias: a reservoir with `μ > 0` is
/// completely filled and contributes `2Γ̂_ν`, one with `μ < 0` is empty and
/// contributes `2Γ_ν`. Reservoirs at `μ = 0` keep the infinite-temperature
/// value `Γ_ν + Γ̂_ν`.
pub fn infinite_bias_noise(system: &OpenSystem) -> NambuMatrix {
    let mut acc = NambuMatrix::zeros(system.n());
    for r in system.model().reservoirs() {
        let g = r.gamma().matrix();
        let gh = r.gamma().hat();
        let term = if r.mu() > 0.0 {
            gh.scale(C64::new(2.0, 0.0))
        } else if r.mu() < 0.0 {
            g.scale(C64::new(2.0, 0.0))
        } else {
            g + &gh
        };
        acc = &acc + &term;
    }
    acc
}

/// Dense solution of `−iKχ + iχK† = −N` through the Kronecker form
/// `(−i(1⊗K) + i(K̄⊗1)) vec χ = −vec N`. Cost `O(d⁶)`; meant as an
/// independent check of [`steady_chi`].
pub fn sylvester_dense(k: &CMat, n: &CMat) -> Result<CMat> {
    let d = k.nrows();
    if k.ncols() != d || n.nrows() != d || n.ncols() != d {
        return Err(Error::Dimension { expected: d, found: n.nrows() });
    }
    let dd = d * d;
    let a = Mat::from_fn(dd, dd, |row, col| {
        // vec index: i + d*j  (column-major)
        let (i, j) = (row % d, row / d);
        let (p, q) = (col % d, col / d);
        let mut v = C64::new(0.0, 0.0);
        if j == q {
            v += -I * k[(i, p)];
        }
        if i == p {
            v += I * k[(j, q)].conj();
        }
        v
    });
    let rhs = Mat::from_fn(dd, 1, |row, _| -n[(row % d, row / d)]);
    let sol = linalg::solve(&a, &rhs);
    Ok(Mat::from_fn(d, d, |i, j| sol[(i + d * j, 0)]))
}
