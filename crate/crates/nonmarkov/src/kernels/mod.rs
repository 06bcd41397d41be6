//! Reservoir memory kernels `r`, `s`, `R` and the functional calculus of the
//! non-Hermitian generator `K`.
//!
//! The kernel `R[ω, β, t] = s[βω, t/β] + r[ωt]` encodes the memory of a
//! wide-band reservoir after the logarithmic bandwidth divergence has been
//! subtracted. Here `β` is the kernel inverse temperature, which is half of
//! the physical one (see [`crate::dynamics::Reservoir`]).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{C64, I};

pub mod quad;
pub mod special;
mod spectral;

pub use spectral::{matrix_function, SpectralDecomposition, DEFAULT_CONDITION_LIMIT};

use quad::QuadOptions;
use special::{digamma, ein, exp_moments, EULER_GAMMA, LN_4_OVER_PI};

/// Largest imaginary part accepted for kernel arguments that must lie in the
/// closed lower half plane.
pub const IMAG_TOL: f64 = 1e-8;

/// Terms kept in the small-`τ` Taylor expansion of the inner function;
/// enough for `2^{-2k+1} < 1e-17` at `τ = 1`.
const TAYLOR_TERMS: usize = 30;

/// Kernel evaluation point.
///
/// `beta` is the kernel inverse temperature (`∞` for zero temperature,
/// `0` for infinite temperature), `t ≥ 0` the time since the coupling was
/// switched on. `mu` is carried along for the matrix shifts `K ± μ`; the
/// scalar kernel itself does not read it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub beta: f64,
    pub mu: f64,
    pub t: f64,
}

impl KernelParams {
    pub fn new(beta: f64, mu: f64, t: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 {
            return Err(Error::InvalidParameter(format!("kernel beta must be >= 0, got {beta}")));
        }
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
        }
        if !mu.is_finite() {
            return Err(Error::NonFinite("chemical potential"));
        }
        Ok(Self { beta, mu, t })
    }
}

fn check_finite(z: C64, what: &'static str) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `r[x] = [ln(ix) + Γ(0, ix) + γ + ln(4/π)] / π`, an entire function of `x`.
pub fn kernel_r(x: C64) -> Result<C64> {
    check_finite(x, "kernel_r argument")?;
    Ok(r_unchecked(x))
}

fn r_unchecked(x: C64) -> C64 {
    (ein(I * x) + LN_4_OVER_PI) / PI
}

/// Large-`|x|` expansion of [`kernel_r`], using
/// `Γ(0, w) ≈ e^{−w}/w · Σ_k (−1)^k k!/w^k` truncated at its smallest term.
///
/// Meaningful for `|x| ≳ 20` away from the positive imaginary axis; kept
/// public as an independent cross-check of the main evaluator.
pub fn kernel_r_asymptotic(x: C64) -> C64 {
    let w = I * x;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let next = term * (-(k as f64)) / w;
        if next.norm() >= last {
            break;
        }
        last = next.norm();
        term = next;
        sum += term;
    }
    let gamma0 = (-w).exp() / w * sum;
    (w.ln() + gamma0 + EULER_GAMMA + LN_4_OVER_PI) / PI
}

/// Inner memory function
/// `g(u) = (1/π) ∫_0^∞ (tanh x − 1) sin(xu) dx = ½ csch(πu/2) − 1/(πu)`.
pub fn inner_g(u: f64) -> f64 {
    if u.abs() < 1.0 {
        // odd Taylor series, converging like 4^{-k} inside |u| < 1
        let u2 = u * u;
        return u * taylor_coefficients().iter().rev().fold(0.0, |acc, a| acc * u2 + a);
    }
    0.5 / (0.5 * PI * u).sinh() - 1.0 / (PI * u)
}

/// The same function from its Lorentzian expansion
/// `g(u) = −(2/π) Σ_{k≥1} (−1)^{k+1} u / (u² + 4k²)`.
///
/// The series alternates with terms decaying like `1/k²`; averaging
/// consecutive compensated partial sums accelerates it enough for a
/// test-grade evaluator.
pub fn inner_g_lorentzian(u: f64, terms: usize) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut prev = 0.0;
    for k in 1..=terms.max(2) {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * u / (u * u + 4.0 * (k * k) as f64);
        // Kahan summation
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if k + 1 == terms.max(2) {
            prev = sum;
        }
    }
    -(2.0 / PI) * 0.5 * (sum + prev)
}

/// Dirichlet eta `η(2k) = Σ_j (−1)^{j+1} j^{−2k}` for `k ≥ 1`.
fn eta_even(k: usize) -> f64 {
    if k == 1 {
        return PI * PI / 12.0;
    }
    let s = (2 * k) as f64;
    // ζ(s) by direct summation with an Euler–Maclaurin tail.
    let big = 1000usize;
    let mut zeta = 0.0;
    for j in (1..big).rev() {
        zeta += (j as f64).powf(-s);
    }
    let n = big as f64;
    zeta +=
        n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s / 12.0 * n.powf(-s - 1.0) - s * (s + 1.0) * (s + 2.0) / 720.0 * n.powf(-s - 3.0);
    (1.0 - 2f64.powf(1.0 - s)) * zeta
}

fn taylor_coefficients() -> &'static [f64; TAYLOR_TERMS] {
    use std::sync::OnceLock;
    static COEF: OnceLock<[f64; TAYLOR_TERMS]> = OnceLock::new();
    COEF.get_or_init(|| {
        // g(u) = Σ_{k≥1} a_k u^{2k−1},  a_k = (−1)^k η(2k) / (π 2^{2k−1})
        let mut a = [0.0; TAYLOR_TERMS];
        for (i, slot) in a.iter_mut().enumerate() {
            let k = i + 1;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *slot = sign * eta_even(k) / (PI * 2f64.powi(2 * k as i32 - 1));
        }
        a
    })
}

/// `s` for `τ ≤ 1` from the Taylor series of `g`, integrated exactly.
fn s_series(z: C64, tau: f64) -> C64 {
    let a = taylor_coefficients();
    let w = I * z * tau;
    let moments = exp_moments(w, 2 * TAYLOR_TERMS - 1);
    let mut sum = C64::new(0.0, 0.0);
    let mut tpow = tau * tau;
    for (i, ak) in a.iter().enumerate() {
        sum += ak * tpow * moments[2 * i + 1];
        tpow *= tau * tau;
    }
    -sum
}

/// `Σ_{k≥0} e^{−izτ} e^{−(2k+1)πτ/2} / (iz + (2k+1)π/2)`, the contribution of
/// the hyperbolic part of `g` beyond `τ`.
fn s_tail(z: C64, tau: f64) -> C64 {
    let phase = (-I * z * tau).exp();
    let mut sum = C64::new(0.0, 0.0);
    for k in 0..200 {
        let p = (2 * k + 1) as f64 * 0.5 * PI;
        let term = phase * (-p * tau).exp() / (I * z + p);
        sum += term;
        if term.norm() < 1e-18 * sum.norm().max(1e-300) {
            break;
        }
    }
    sum
}

/// `[ψ(½ + iz/π) + ln(πτ) + γ] / π + tail`, i.e. `s[z, τ] + (Ein(izτ))/π`.
fn s_plus_ein(z: C64, tau: f64) -> C64 {
    (digamma(0.5 + I * z / PI) + (PI * tau).ln() + EULER_GAMMA) / PI + s_tail(z, tau)
}

fn check_lower_half(z: C64) -> Result<()> {
    check_finite(z, "kernel argument")?;
    if z.im > IMAG_TOL * (1.0 + z.norm()) {
        return Err(Error::InvalidParameter(format!("kernel argument must satisfy Im z <= 0, got {z}")));
    }
    Ok(())
}

/// `s[z, τ] = −∫_0^τ dτ' e^{−izτ'} g(τ')` with `g` from [`inner_g`].
///
/// Uses the Taylor series of `g` with exact exponential moments for
/// `τ ≤ 1` and an exact digamma closed form for `τ > 1`; both are accurate to
/// a few ulps of the result scale. [`kernel_s_quadrature`] evaluates the
/// same integral by adaptive quadrature.
pub fn kernel_s(z: C64, tau: f64) -> Result<C64> {
    check_lower_half(z)?;
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be finite and >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    if tau <= 1.0 {
        Ok(s_series(z, tau))
    } else {
        Ok(s_plus_ein(z, tau) - ein(I * z * tau) / PI)
    }
}

/// [`kernel_s`] by globally adaptive Gauss–Kronrod quadrature of the outer
/// integral, with breakpoints every oscillation period `2π/|Re z|`.
///
/// Returns the value and the achieved error estimate.
pub fn kernel_s_quadrature(z: C64, tau: f64, opts: QuadOptions) -> Result<(C64, f64)> {
    kernel_s_quadrature_with(z, tau, opts, inner_g)
}

/// Same as [`kernel_s_quadrature`] with a caller-supplied inner function.
pub fn kernel_s_quadrature_with(z: C64, tau: f64, opts: QuadOptions, g: impl Fn(f64) -> f64) -> Result<(C64, f64)> {
    check_lower_half(z)?;
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be finite and >= 0, got {tau}")));
    }
    let mut breaks = Vec::new();
    if z.re.abs() > 0.0 {
        let period = 2.0 * PI / z.re.abs();
        let count = (tau / period).floor() as usize;
        if count > 100_000 {
            return Err(Error::InvalidParameter(format!("{count} oscillation periods exceed the quadrature budget")));
        }
        breaks.extend((1..=count).map(|k| k as f64 * period));
    }
    let opts = QuadOptions { max_intervals: opts.max_intervals.max(2 * breaks.len() + 16), ..opts };
    let (v, e) = quad::integrate(|u| -(-I * z * u).exp() * g(u), 0.0, tau, &breaks, opts)?;
    Ok((v, e))
}

/// `R[ω, β, t] = s[βω, t/β] + r[ωt]` with kernel inverse temperature `β`.
///
/// `β = ∞` gives `r[ωt]`; `β = 0` is rejected because the infinite
/// temperature limit is handled at the level of the noise matrix.
#[allow(non_snake_case)]
pub fn kernel_R(omega: C64, params: &KernelParams) -> Result<C64> {
    kernel_R_raw(omega, params.beta, params.t)
}

#[allow(non_snake_case)]
pub(crate) fn kernel_R_raw(omega: C64, beta: f64, t: f64) -> Result<C64> {
    check_lower_half(omega)?;
    if beta == 0.0 {
        return Err(Error::InvalidParameter("kernel R is undefined at beta = 0; use the infinite-temperature limit".into()));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(r_unchecked(C64::new(0.0, 0.0)));
    }
    if beta.is_infinite() {
        return Ok(r_unchecked(omega * t));
    }
    let z = beta * omega;
    let tau = t / beta;
    if tau > 1.0 {
        // Ein cancels between s and r.
        Ok(s_plus_ein(z, tau) + LN_4_OVER_PI / PI)
    } else {
        Ok(s_series(z, tau) + r_unchecked(omega * t))
    }
}

/// Long-time limit of `R` with the real `ln(t)/π` divergence removed.
///
/// That divergence multiplies the identity and cancels from the noise
/// matrix, so this is the kernel entering the asymptotic noise `N_∞`.
#[allow(non_snake_case)]
pub fn kernel_R_infinity(omega: C64, beta: f64) -> Result<C64> {
    check_lower_half(omega)?;
    if beta == 0.0 {
        return Err(Error::InvalidParameter("kernel R is undefined at beta = 0; use the infinite-temperature limit".into()));
    }
    if beta.is_infinite() {
        if omega.norm() == 0.0 {
            return Err(Error::InvalidParameter("zero-temperature asymptotic kernel is singular at omega = 0".into()));
        }
        return Ok(((I * omega).ln() + EULER_GAMMA + LN_4_OVER_PI) / PI);
    }
    Ok((digamma(0.5 + I * beta * omega / PI) + (PI / beta).ln() + EULER_GAMMA + LN_4_OVER_PI) / PI)
}
