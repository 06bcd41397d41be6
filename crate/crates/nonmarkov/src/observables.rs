//! Quadratic observables, connected correlators, decay classification of
//! correlation profiles and currents of conserved quantities.
//!
//! A quadratic observable is `Ô = ½ C† O C` with a traceless Hermitian
//! Nambu matrix `O`; its mean is `½ tr{O(1 − χ)}`.

use std::ops::RangeInclusive;

use faer::Mat;

use crate::dynamics::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, ONE, ZERO};
use crate::nambu::{HamiltonianMatrix, NambuMatrix};

/// Tolerance for the trace and Hermiticity checks of an observable.
pub const OBSERVABLE_TOL: f64 = 1e-12;

/// Largest imaginary part tolerated in a real expectation value.
pub const IMAGINARY_TOL: f64 = 1e-10;

/// Tolerance of the commutator check in [`boundary_current`].
pub const CONSERVATION_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct QuadraticObservable {
    matrix: NambuMatrix,
    label: String,
}

impl QuadraticObservable {
    pub fn new(matrix: NambuMatrix, label: impl Into<String>) -> Result<Self> {
        let tr = matrix.trace().norm();
        if tr > OBSERVABLE_TOL * (1.0 + matrix.max_abs()) {
            return Err(Error::Symmetry { condition: "tr O = 0", violation: tr });
        }
        let herm = matrix.hermiticity_defect();
        if herm > OBSERVABLE_TOL * (1.0 + matrix.max_abs()) {
            return Err(Error::Symmetry { condition: "O = O^dagger", violation: herm });
        }
        Ok(Self { matrix, label: label.into() })
    }

    pub fn matrix(&self) -> &NambuMatrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }
}

fn check_dims(chi: &CorrelationMatrix, n: usize) -> Result<()> {
    if chi.n() != n {
        return Err(Error::Dimension { expected: 2 * n, found: 2 * chi.n() });
    }
    Ok(())
}

/// `½ tr{O(1 − χ)}`.
pub fn quadratic_expectation(chi: &CorrelationMatrix, o: &QuadraticObservable) -> Result<f64> {
    check_dims(chi, o.n())?;
    let om = o.matrix.as_mat();
    let x = chi.as_mat();
    let d = x.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            let one_minus = if i == j { ONE - x[(j, i)] } else { -x[(j, i)] };
            acc += om[(i, j)] * one_minus;
        }
    }
    let v = 0.5 * acc;
    if v.im.abs() > IMAGINARY_TOL * (1.0 + v.re.abs()) {
        return Err(Error::ImaginaryResidue(v.im));
    }
    Ok(v.re)
}

/// `S_m = |m⟩⟨m| − |m̂⟩⟨m̂|`, so that `Ŝ_m = c_m†c_m − ½`.
pub fn s_operator(n: usize, m: usize) -> Result<QuadraticObservable> {
    if m >= n {
        return Err(Error::IndexOutOfRange { index: m, limit: n });
    }
    let mut s = linalg::zeros(2 * n);
    s[(m, m)] = ONE;
    s[(n + m, n + m)] = -ONE;
    QuadraticObservable::new(NambuMatrix::new(s)?, format!("S_{m}"))
}

/// `C_{l,m} = ½ tr{S_l χ S_m (1 − χ)}`.
///
/// Because the `S` are diagonal this reduces to
/// `−½ Σ s_l(i) s_m(j) |χ_ij|²` plus, for `l = m`, `½ Σ s(i)² χ_ii`, and is
/// real for any Hermitian `χ`.
pub fn zz_correlator(chi: &CorrelationMatrix, l: usize, m: usize) -> Result<f64> {
    let n = chi.n();
    for idx in [l, m] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, limit: n });
        }
    }
    let x = chi.as_mat();
    let legs = |s: usize| [(s, 1.0), (n + s, -1.0)];
    let mut acc = 0.0;
    for (i, si) in legs(l) {
        for (j, sj) in legs(m) {
            acc -= si * sj * x[(i, j)].norm_sqr();
        }
    }
    if l == m {
        for (i, _) in legs(l) {
            acc += x[(i, i)].re;
        }
    }
    Ok(0.5 * acc)
}

/// `½ tr{O₁ χ O₂ (1 − χ)}`, the connected correlator of two quadratic
/// observables (complex when they do not commute).
pub fn connected_correlator(chi: &CorrelationMatrix, o1: &QuadraticObservable, o2: &QuadraticObservable) -> Result<C64> {
    check_dims(chi, o1.n())?;
    check_dims(chi, o2.n())?;
    let x = chi.as_mat();
    let d = x.nrows();
    let one_minus = Mat::from_fn(d, d, |i, j| if i == j { ONE - x[(i, j)] } else { -x[(i, j)] });
    let prod = &(&(o1.matrix.as_mat() * x) * o2.matrix.as_mat()) * &one_minus;
    Ok(0.5 * linalg::trace(&prod))
}

/// The same correlator from the generating function
/// `F(z₁, z₂) = ln √det{χ + e^{z₁O₁} e^{z₂O₂} (1 − χ)}` as the mixed second
/// derivative at the origin. Central differences at steps `h` and `h/2`
/// are combined by Richardson extrapolation.
pub fn generating_function_correlator(chi: &CorrelationMatrix, o1: &QuadraticObservable, o2: &QuadraticObservable, h: f64) -> Result<C64> {
    check_dims(chi, o1.n())?;
    check_dims(chi, o2.n())?;
    let x = chi.as_mat();
    let d = x.nrows();
    let one_minus = Mat::from_fn(d, d, |i, j| if i == j { ONE - x[(i, j)] } else { -x[(i, j)] });
    let (v1, u1) = linalg::eigh(o1.matrix.as_mat())?;
    let (v2, u2) = linalg::eigh(o2.matrix.as_mat())?;
    let expo = |vals: &[f64], u: &CMat, z: f64| {
        let e: Vec<C64> = vals.iter().map(|&v| c((z * v).exp(), 0.0)).collect();
        linalg::sandwich(u, &e, &u.adjoint().to_owned())
    };
    let f = |z1: f64, z2: f64| {
        let e = &(&expo(&v1, &u1, z1) * &expo(&v2, &u2, z2)) * &one_minus;
        let a = Mat::from_fn(d, d, |i, j| x[(i, j)] + e[(i, j)]);
        0.5 * linalg::determinant(&a).ln()
    };
    let mixed = |h: f64| (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
    Ok((4.0 * mixed(0.5 * h) - mixed(h)) / 3.0)
}

/// Mean of `|C_{r+m, m}|` over `m ∈ [M/2, M)` with `r + m ≤ M − 1`.
///
/// Returns `None` when no `m` is valid. With a single valid `m` the result
/// is `|C|` itself.
pub fn averaged_correlation(chi: &CorrelationMatrix, r: usize) -> Result<Option<f64>> {
    let n = chi.n();
    let mut sum = 0.0;
    let mut count = 0usize;
    for m in n / 2..n {
        if r + m > n - 1 {
            break;
        }
        sum += zz_correlator(chi, r + m, m)?.abs();
        count += 1;
    }
    Ok(if count == 0 { None } else { Some(sum / count as f64) })
}

/// `(r, C̄_r)` for every `r ≥ 1` with at least one valid `m`.
pub fn correlation_profile(chi: &CorrelationMatrix) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for r in 1..chi.n() {
        match averaged_correlation(chi, r)? {
            Some(v) => out.push((r, v)),
            None => break,
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecayKind {
    Algebraic,
    Exponential,
}

impl std::fmt::Display for DecayKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecayKind::Algebraic => "algebraic",
            DecayKind::Exponential => "exponential",
        })
    }
}

/// Both least-squares fits and the one chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub kind: DecayKind,
    /// `a` in `C̄ ∝ r^{−a}`.
    pub exponent: f64,
    /// `ξ` in `C̄ ∝ e^{−r/ξ}`.
    pub length: f64,
    pub rss_algebraic: f64,
    pub rss_exponential: f64,
    pub points: usize,
}

/// Fit window and noise floor for [`classify_decay`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayOptions {
    /// Points at or below this value are treated as numerical noise.
    ///
    /// `C̄` is bilinear in `χ`, so its rounding noise sits near `ε²` rather
    /// than `ε`; the default keeps exponential tails usable down to there.
    pub floor: f64,
    /// Smallest distance included.
    pub r_min: usize,
    /// Number of largest distances dropped from the end of the profile.
    pub tail_cut: usize,
    pub min_points: usize,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self { floor: 1e-24, r_min: 3, tail_cut: 0, min_points: 8 }
    }
}

impl DecayOptions {
    /// Default window for a chain of `sites`: drops the last `sites/10`
    /// distances.
    pub fn for_chain(sites: usize) -> Self {
        Self { tail_cut: sites / 10, ..Self::default() }
    }
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    (slope, icpt, rss)
}

/// Fits `ln C̄` against `ln r` and against `r` and picks the smaller
/// residual sum of squares.
pub fn classify_decay(profile: &[(usize, f64)], opts: &DecayOptions) -> Result<DecayFit> {
    let end = profile.len().saturating_sub(opts.tail_cut);
    let pts: Vec<(f64, f64)> = profile[..end]
        .iter()
        .filter(|&&(r, v)| r >= opts.r_min && v > opts.floor && v.is_finite())
        .map(|&(r, v)| (r as f64, v.ln()))
        .collect();
    if pts.len() < opts.min_points.max(3) {
        return Err(Error::InsufficientPoints { found: pts.len(), needed: opts.min_points.max(3) });
    }
    let r: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let lr: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope_a, _, rss_a) = line_fit(&lr, &y);
    let (slope_e, _, rss_e) = line_fit(&r, &y);
    Ok(DecayFit {
        kind: if rss_a <= rss_e { DecayKind::Algebraic } else { DecayKind::Exponential },
        exponent: -slope_a,
        length: -1.0 / slope_e,
        rss_algebraic: rss_a,
        rss_exponential: rss_e,
        points: pts.len(),
    })
}

/// Energy current of the XY chain through the bond `(m−1, m)`, with the
/// four blocks written out explicitly:
///
/// ```text
/// j_pp = −iJ²(1−γ²)(|m−1⟩⟨m+1| − |m+1⟩⟨m−1|) − 2ihJ(|m−1⟩⟨m| − |m⟩⟨m−1|)
/// j_hh =  iJ²(1−γ²)(|m̂+1⟩⟨m̂−1| − |m̂−1⟩⟨m̂+1|) + 2ihJ(|m̂⟩⟨m̂−1| − |m̂−1⟩⟨m̂|)
/// j_hp =  2iγhJ(|m̂⟩⟨m−1| − |m̂−1⟩⟨m|)
/// j_ph = −2iγhJ(|m−1⟩⟨m̂| − |m⟩⟨m̂−1|)
/// ```
pub fn energy_current_xy(sites: usize, coupling: f64, anisotropy: f64, field: f64, m: usize) -> Result<QuadraticObservable> {
    let n = sites;
    if m < 1 || m + 2 > n {
        return Err(Error::IndexOutOfRange { index: m, limit: n.saturating_sub(1) });
    }
    let (jj, g, h) = (coupling, anisotropy, field);
    let a = jj * jj * (1.0 - g * g);
    let b = 2.0 * h * jj;
    let p = 2.0 * g * h * jj;
    let mut j = linalg::zeros(2 * n);
    let mut put = |r: usize, col: usize, v: f64| j[(r, col)] += c(0.0, v);
    let hat = |s: usize| n + s;
    put(m - 1, m + 1, -a);
    put(m + 1, m - 1, a);
    put(m - 1, m, -b);
    put(m, m - 1, b);
    put(hat(m + 1), hat(m - 1), a);
    put(hat(m - 1), hat(m + 1), -a);
    put(hat(m), hat(m - 1), b);
    put(hat(m - 1), hat(m), -b);
    put(hat(m), m - 1, p);
    put(hat(m - 1), m, -p);
    put(m - 1, hat(m), -p);
    put(m, hat(m - 1), p);
    QuadraticObservable::new(NambuMatrix::new(j)?, format!("J_e[{m}]"))
}

/// Which boundary of the segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Left,
    Right,
}

fn restrict(m: &CMat, n: usize, keep: impl Fn(usize, usize) -> bool) -> CMat {
    Mat::from_fn(2 * n, 2 * n, |i, j| if keep(i % n, j % n) { m[(i, j)] } else { ZERO })
}

/// Current `−i[H_∂Σ, Q_Σ]` of a quadratic quantity `Q` through one
/// boundary of the segment `Σ = sites`, as a quadratic observable. Its mean
/// is the rate `−d⟨Q_Σ⟩/dt` due to that boundary, so it is positive when `Q`
/// leaves `Σ`.
///
/// `Q_Σ` and `H_Σ` are the restrictions of `Q` and `H` to `Σ`; the boundary
/// Hamiltonian collects the terms of `H` coupling `Σ` to the sites beyond
/// the chosen side. Fails unless `[H_Σ, Q_Σ] = 0`.
pub fn boundary_current(
    hamiltonian: &HamiltonianMatrix,
    sites: RangeInclusive<usize>,
    q: &QuadraticObservable,
    side: Boundary,
) -> Result<QuadraticObservable> {
    let n = hamiltonian.n();
    if q.n() != n {
        return Err(Error::Dimension { expected: 2 * n, found: 2 * q.n() });
    }
    let (lo, hi) = (*sites.start(), *sites.end());
    if lo > hi || hi >= n {
        return Err(Error::IndexOutOfRange { index: hi, limit: n });
    }
    let inside = |s: usize| s >= lo && s <= hi;
    let beyond = |s: usize| match side {
        Boundary::Left => s < lo,
        Boundary::Right => s > hi,
    };
    let h = hamiltonian.matrix().as_mat();
    let h_sigma = restrict(h, n, |a, b| inside(a) && inside(b));
    let q_sigma = restrict(q.matrix().as_mat(), n, |a, b| inside(a) && inside(b));
    let comm = &(&h_sigma * &q_sigma) - &(&q_sigma * &h_sigma);
    let defect = linalg::max_abs(&comm);
    if defect > CONSERVATION_TOL * (1.0 + linalg::max_abs(&h_sigma) * linalg::max_abs(&q_sigma)) {
        return Err(Error::NotConserved(defect));
    }
    let h_edge = restrict(h, n, |a, b| (inside(a) && beyond(b)) || (beyond(a) && inside(b)));
    let comm = &(&h_edge * &q_sigma) - &(&q_sigma * &h_edge);
    let j = linalg::scale(&comm, c(0.0, -1.0));
    let tag = if side == Boundary::Left { "L" } else { "R" };
    QuadraticObservable::new(NambuMatrix::new(linalg::hermitian_part(&j))?, format!("J^{tag}[{lo}..={hi}]({})", q.label()))
}

/// The system Hamiltonian as an observable (energy).
pub fn energy_observable(hamiltonian: &HamiltonianMatrix) -> Result<QuadraticObservable> {
    QuadraticObservable::new(hamiltonian.matrix().clone(), "H")
}

/// Particle number `Σ c†c − n/2` as an observable.
pub fn number_observable(n: usize) -> Result<QuadraticObservable> {
    let d: Vec<C64> = (0..2 * n).map(|i| if i < n { ONE } else { -ONE }).collect();
    QuadraticObservable::new(NambuMatrix::new(linalg::diag(&d))?, "N")
}
