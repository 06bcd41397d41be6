//! Complex special functions needed by the memory kernels.

use std::f64::consts::PI;

use crate::linalg::C64;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `ln(4/π)`.
pub const LN_4_OVER_PI: f64 = 0.241_564_475_270_490_44;

/// Below this modulus `Ein` is always summed from its power series.
const SERIES_RADIUS: f64 = 2.0;

/// Entire exponential integral `Ein(w) = Σ_{k≥1} (−1)^{k+1} w^k / (k·k!)`,
/// equal to `E1(w) + ln w + γ` off the branch cut.
pub fn ein(w: C64) -> C64 {
    if w.norm() <= SERIES_RADIUS || w.arg().abs() > 0.75 * PI {
        // Near the negative real axis the terms share a sign pattern with the
        // (exponentially large) result, so the series does not cancel.
        ein_series(w)
    } else {
        e1_continued_fraction(w) + w.ln() + EULER_GAMMA
    }
}

fn ein_series(w: C64) -> C64 {
    let mut term = C64::new(1.0, 0.0);
    let mut sum = C64::new(0.0, 0.0);
    let limit = 60 + (4.0 * w.norm()) as usize;
    for k in 1..=limit {
        term *= -w / k as f64;
        let add = -term / k as f64;
        sum += add;
        if add.norm() <= 1e-17 * sum.norm() && k as f64 > w.norm() {
            break;
        }
    }
    sum
}

/// Exponential integral `E1(w)` (principal branch), `|arg w| < π`.
pub fn e1(w: C64) -> C64 {
    if w.norm() <= SERIES_RADIUS || w.arg().abs() > 0.75 * PI {
        ein_series(w) - w.ln() - EULER_GAMMA
    } else {
        e1_continued_fraction(w)
    }
}

/// Modified Lentz evaluation of the even continued fraction
/// `E1(w) = e^{−w} / (w + 1 − 1²/(w + 3 − 2²/(w + 5 − …)))`.
fn e1_continued_fraction(w: C64) -> C64 {
    const TINY: f64 = 1e-300;
    let mut b = w + 1.0;
    let mut c = C64::new(1.0 / TINY, 0.0);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = an * d + b;
        if d.norm() < TINY {
            d = C64::new(TINY, 0.0);
        }
        c = b + an / c;
        if c.norm() < TINY {
            c = C64::new(TINY, 0.0);
        }
        d = 1.0 / d;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h * (-w).exp()
}

/// Complex digamma `ψ(z)`, by upward recurrence and the asymptotic series,
/// with reflection for `Re z < 1/2`.
pub fn digamma(z: C64) -> C64 {
    if z.re < 0.5 {
        // ψ(1 − z) − ψ(z) = π cot(πz)
        let pz = PI * z;
        return digamma(1.0 - z) - PI * pz.cos() / pz.sin();
    }
    let mut z = z;
    let mut acc = C64::new(0.0, 0.0);
    while z.norm() < 12.0 {
        acc -= 1.0 / z;
        z += 1.0;
    }
    // Bernoulli coefficients B_{2k} / (2k).
    const B: [f64; 7] = [1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0, 1.0 / 132.0, -691.0 / 32760.0, 1.0 / 12.0];
    let zi2 = 1.0 / (z * z);
    let mut pow = zi2;
    let mut series = C64::new(0.0, 0.0);
    for b in B {
        series += b * pow;
        pow *= zi2;
    }
    acc + z.ln() - 0.5 / z - series
}

/// `∫_0^1 e^{−w v} v^m dv` for `m = 0..=m_max`.
///
/// The three-term recursion `w I_m = m I_{m−1} − e^{−w}` is stable upwards
/// while `m < |w|` and downwards above that, so the low orders come from the
/// forward sweep and the rest from a backward sweep started well above
/// `m_max`, where the start error is damped away.
pub fn exp_moments(w: C64, m_max: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m_max + 1];
    let ew = (-w).exp();
    let mut lowest = 0;
    if w.norm() > 0.5 {
        let split = (w.norm().floor() as usize).min(m_max);
        out[0] = (1.0 - ew) / w;
        for m in 1..=split {
            out[m] = (m as f64 * out[m - 1] - ew) / w;
        }
        lowest = split + 1;
    }
    if lowest > m_max {
        return out;
    }
    let top = m_max + 100 + 2 * w.norm() as usize;
    let mut cur = C64::new(0.0, 0.0);
    for m in (lowest + 1..=top).rev() {
        // I_{m−1} = (w I_m + e^{−w}) / m
        cur = (w * cur + ew) / m as f64;
        if m - 1 <= m_max {
            out[m - 1] = cur;
        }
    }
    out
}
