//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex and
//! vector-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::linalg::C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and limits for [`integrate`] and [`integrate_vec`].
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 2000 }
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: Vec<C64>,
    pub error: f64,
    pub evaluations: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: Vec<C64>,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

fn gk15<F: FnMut(f64, &mut [C64])>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [C64]) -> (Vec<C64>, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![C64::new(0.0, 0.0); dim];
    let mut gauss = vec![C64::new(0.0, 0.0); dim];
    f(c, buf);
    for k in 0..dim {
        kron[k] += WGK[7] * buf[k];
        gauss[k] += WG[3] * buf[k];
    }
    for j in 0..7 {
        for x in [c - h * XGK[j], c + h * XGK[j]] {
            f(x, buf);
            for k in 0..dim {
                kron[k] += WGK[j] * buf[k];
                if j % 2 == 1 {
                    gauss[k] += WG[j / 2] * buf[k];
                }
            }
        }
    }
    let mut err = 0.0f64;
    for k in 0..dim {
        kron[k] *= h;
        gauss[k] *= h;
        err = err.max((kron[k] - gauss[k]).norm());
    }
    (kron, err)
}

/// Integrates a vector-valued function over `[a, b]`, starting from the
/// given breakpoints (which must lie inside the interval, sorted or not).
///
/// `f(x, out)` writes the integrand at `x` into `out` (length `dim`). The
/// error estimate is the max-norm over components of the Kronrod–Gauss
/// difference, summed over subintervals.
pub fn integrate_vec<F: FnMut(f64, &mut [C64])>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: vec![C64::new(0.0, 0.0); dim], error: 0.0, evaluations: 0 });
    }
    let mut cuts: Vec<f64> = vec![a];
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > a.min(b) && x < a.max(b)));
    cuts.push(b);
    let last = cuts.len() - 1;
    if b < a {
        cuts[1..last].sort_by(|x, y| y.total_cmp(x));
    } else {
        cuts[1..last].sort_by(|x, y| x.total_cmp(y));
    }
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in cuts.windows(2) {
        let (value, error) = gk15(&mut f, w[0], w[1], dim, &mut buf);
        evaluations += 15;
        heap.push(Piece { a: w[0], b: w[1], value, error });
    }
    loop {
        let mut total = vec![C64::new(0.0, 0.0); dim];
        let mut err = 0.0;
        for p in heap.iter() {
            for (t, v) in total.iter_mut().zip(&p.value) {
                *t += v;
            }
            err += p.error;
        }
        let target = opts.abs_tol.max(opts.rel_tol * max_norm(&total));
        if err <= target {
            return Ok(QuadResult { value: total, error: err, evaluations });
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature { estimate: err, requested: target });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid == worst.a || mid == worst.b {
            return Err(Error::Quadrature { estimate: err, requested: target });
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(&mut f, lo, hi, dim, &mut buf);
            evaluations += 15;
            heap.push(Piece { a: lo, b: hi, value, error });
        }
    }
}

/// Scalar convenience wrapper around [`integrate_vec`]; returns the value and
/// the error estimate.
pub fn integrate<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, breakpoints: &[f64], opts: QuadOptions) -> Result<(C64, f64)> {
    let r = integrate_vec(|x, out| out[0] = f(x), 1, a, b, breakpoints, opts)?;
    Ok((r.value[0], r.error))
}
