//! Generator, noise matrix and decoherence rates, and the evolution of the
//! correlation matrix.
//!
//! For a model with system Hamiltonian `H_c` and reservoirs `ν` with
//! hybridizations `Γ_ν`, the correlation matrix obeys
//! `∂_t χ = −iKχ + iχK† + N(t)` with `K = H_c − iΓ`, `Γ = Σ_ν (Γ_ν + Γ̂_ν)`
//! and
//!
//! ```text
//! N_ν(t) = Γ_ν + Γ̂_ν − i(R[K−μ_ν] Γ_ν − Γ_ν R[K−μ_ν]†)
//!                    − i(R[K+μ_ν] Γ̂_ν − Γ̂_ν R[K+μ_ν]†)
//! ```
//!
//! where `R[·] = R[·, β_ν/2, t]` is the memory kernel of [`crate::kernels`].
//! The eigenvalues of `N(t)` are the decoherence rates; a negative rate is
//! the signature of non-Markovian dynamics.

use faer::Mat;

use crate::error::{Error, Result};
use crate::kernels::quad::{self, QuadOptions};
use crate::kernels::{self, SpectralDecomposition};
use crate::linalg::{self, CMat, C64, I, ONE, ZERO};
use crate::nambu::{HamiltonianMatrix, HybridizationMatrix, NambuMatrix, Sector};

/// Default threshold below which a rate counts as zero.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-10;

/// A wide-band fermionic reservoir.
///
/// `beta` is the physical inverse temperature of the reservoir's initial
/// Gibbs state: `∞` at zero temperature, `0` at infinite temperature.
#[derive(Clone, Debug)]
pub struct Reservoir {
    gamma: HybridizationMatrix,
    beta: f64,
    mu: f64,
}

impl Reservoir {
    pub fn new(gamma: HybridizationMatrix, beta: f64, mu: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 {
            return Err(Error::InvalidParameter(format!("reservoir beta must be >= 0, got {beta}")));
        }
        if !mu.is_finite() {
            return Err(Error::NonFinite("reservoir chemical potential"));
        }
        Ok(Self { gamma, beta, mu })
    }

    /// Same as [`Reservoir::new`] with a temperature (`0` and `∞` allowed).
    pub fn with_temperature(gamma: HybridizationMatrix, temperature: f64, mu: f64) -> Result<Self> {
        if temperature.is_nan() || temperature < 0.0 {
            return Err(Error::InvalidParameter(format!("temperature must be >= 0, got {temperature}")));
        }
        Self::new(gamma, 1.0 / temperature, mu)
    }

    pub fn gamma(&self) -> &HybridizationMatrix {
        &self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Inverse temperature entering the memory kernel, `β/2`.
    ///
    /// The kernel is built around `tanh(β_k ε)` while the reservoir
    /// distribution function is `1 − 2n_F(ε) = tanh(β ε / 2)`.
    pub fn kernel_beta(&self) -> f64 {
        0.5 * self.beta
    }
}

/// System Hamiltonian plus reservoirs: the complete problem definition.
#[derive(Clone, Debug)]
pub struct QuadraticModel {
    hamiltonian: HamiltonianMatrix,
    reservoirs: Vec<Reservoir>,
}

impl QuadraticModel {
    pub fn new(hamiltonian: HamiltonianMatrix, reservoirs: Vec<Reservoir>) -> Result<Self> {
        let n = hamiltonian.n();
        for r in &reservoirs {
            if r.gamma.n() != n {
                return Err(Error::Dimension { expected: n, found: r.gamma.n() });
            }
        }
        Ok(Self { hamiltonian, reservoirs })
    }

    pub fn n(&self) -> usize {
        self.hamiltonian.n()
    }

    pub fn hamiltonian(&self) -> &HamiltonianMatrix {
        &self.hamiltonian
    }

    pub fn reservoirs(&self) -> &[Reservoir] {
        &self.reservoirs
    }

    /// `Γ = Σ_ν (Γ_ν + Γ̂_ν)`.
    pub fn gamma_total(&self) -> NambuMatrix {
        let mut g = NambuMatrix::zeros(self.n());
        for r in &self.reservoirs {
            g = &(&g + r.gamma.matrix()) + &r.gamma.hat();
        }
        g
    }
}

/// `K = H_c − iΓ` together with its spectral decomposition.
#[derive(Clone, Debug)]
pub struct Generator {
    k: NambuMatrix,
    spectral: SpectralDecomposition,
}

impl Generator {
    pub fn matrix(&self) -> &NambuMatrix {
        &self.k
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    /// `e^{−iKt}`.
    pub fn propagator(&self, t: f64) -> CMat {
        self.spectral.apply(|l| (-I * l * t).exp())
    }
}

/// Builds `K = H_c − iΓ` and decomposes it.
pub fn build_k(model: &QuadraticModel) -> Result<Generator> {
    let g = model.gamma_total();
    let k = NambuMatrix::new(model.hamiltonian().matrix().as_mat() - &linalg::scale(g.as_mat(), I))?;
    let spectral = SpectralDecomposition::new(&k)?;
    Ok(Generator { k, spectral })
}

/// Defects of the correlation-matrix invariants, all in max-norm.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InvariantReport {
    /// `‖χ − χ†‖`
    pub hermiticity: f64,
    /// `‖hat(χ) − (1 − χ)‖`
    pub particle_hole: f64,
    /// `|tr χ − n|`
    pub trace: f64,
    /// Distance of the spectrum outside `[0, 1]`.
    pub spectrum: f64,
}

impl InvariantReport {
    pub fn worst(&self) -> f64 {
        self.hermiticity.max(self.particle_hole).max(self.trace).max(self.spectrum)
    }

    fn merge(&mut self, other: &InvariantReport) {
        self.hermiticity = self.hermiticity.max(other.hermiticity);
        self.particle_hole = self.particle_hole.max(other.particle_hole);
        self.trace = self.trace.max(other.trace);
        self.spectrum = self.spectrum.max(other.spectrum);
    }

    fn first_violation(&self, limit: f64) -> Option<(&'static str, f64)> {
        [("hermiticity", self.hermiticity), ("particle-hole", self.particle_hole), ("trace", self.trace), ("spectrum", self.spectrum)]
            .into_iter()
            .find(|&(_, d)| d > limit)
    }
}

/// Tolerance used when validating user-supplied correlation matrices.
pub const CORRELATION_TOL: f64 = 1e-8;

/// The single-particle correlation matrix `χ = ⟨C C†⟩`.
#[derive(Clone, Debug)]
pub struct CorrelationMatrix(NambuMatrix);

impl CorrelationMatrix {
    /// Validates Hermiticity, `hat(χ) = 1 − χ`, `tr χ = n` and spectrum in
    /// `[0, 1]` to [`CORRELATION_TOL`].
    pub fn new(m: NambuMatrix) -> Result<Self> {
        let chi = Self(m);
        let rep = chi.invariants()?;
        if let Some((what, defect)) = rep.first_violation(CORRELATION_TOL) {
            return Err(Error::InvariantViolation { what, t: 0.0, defect });
        }
        Ok(chi)
    }

    pub(crate) fn from_unchecked(m: NambuMatrix) -> Self {
        Self(m)
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn matrix(&self) -> &NambuMatrix {
        &self.0
    }

    pub fn as_mat(&self) -> &CMat {
        self.0.as_mat()
    }

    /// Measures all invariants, including the spectrum (one Hermitian
    /// eigensolve).
    pub fn invariants(&self) -> Result<InvariantReport> {
        let mut rep = cheap_invariants(self.0.as_mat());
        let (vals, _) = linalg::eigh(&linalg::hermitian_part(self.0.as_mat()))?;
        let lo = vals.first().copied().unwrap_or(0.0);
        let hi = vals.last().copied().unwrap_or(0.0);
        rep.spectrum = (-lo).max(hi - 1.0).max(0.0);
        Ok(rep)
    }

    /// Occupation numbers `⟨c_i† c_i⟩`.
    pub fn occupations(&self) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| self.0.as_mat()[(n + i, n + i)].re).collect()
    }
}

fn cheap_invariants(chi: &CMat) -> InvariantReport {
    let d = chi.nrows();
    let n = d / 2;
    let sw = |i: usize| (i + n) % d;
    let mut ph = 0.0f64;
    for j in 0..d {
        for i in 0..d {
            let hat = chi[(sw(j), sw(i))];
            let one = if i == j { ONE } else { ZERO };
            ph = ph.max((hat - (one - chi[(i, j)])).norm());
        }
    }
    InvariantReport {
        hermiticity: linalg::hermiticity_defect(chi),
        particle_hole: ph,
        trace: (linalg::trace(chi) - n as f64).norm(),
        spectrum: 0.0,
    }
}

/// Noise matrix together with the Hermiticity defect measured before
/// symmetrization.
#[derive(Clone, Debug)]
pub struct NoiseMatrix {
    pub matrix: NambuMatrix,
    pub hermiticity_defect: f64,
}

#[derive(Clone, Debug)]
struct ReservoirTerms {
    gamma: CMat,
    gamma_hat: CMat,
    beta_kernel: f64,
    mu: f64,
}

/// A model with its generator decomposed once; the entry point for
/// repeated noise, rate and evolution queries.
#[derive(Clone, Debug)]
pub struct OpenSystem {
    model: QuadraticModel,
    generator: Generator,
    terms: Vec<ReservoirTerms>,
}

/// Reservoir-resolved memory kernel at time `t` (or `t = ∞`).
#[derive(Clone, Copy, Debug)]
pub(crate) enum KernelTime {
    At(f64),
    Infinity,
}

impl OpenSystem {
    pub fn new(model: QuadraticModel) -> Result<Self> {
        let generator = build_k(&model)?;
        let terms = model
            .reservoirs()
            .iter()
            .map(|r| ReservoirTerms {
                gamma: r.gamma().matrix().as_mat().clone(),
                gamma_hat: r.gamma().hat().into_mat(),
                beta_kernel: r.kernel_beta(),
                mu: r.mu(),
            })
            .collect();
        Ok(Self { model, generator, terms })
    }

    pub fn model(&self) -> &QuadraticModel {
        &self.model
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn reservoir_count(&self) -> usize {
        self.terms.len()
    }

    /// The memory kernel `R[K + shift]` of one reservoir as a matrix.
    /// The memory kernel `R[K + shift]` of one reservoir as a matrix.
    ///
    /// At `t = ∞` only modes with a nonzero row in `W·visible` are
    /// evaluated: the kernel is always multiplied by `visible` from the right,
    /// and modes the reservoir cannot see may sit on the real axis where the
    /// asymptotic kernel is singular.
    pub(crate) fn kernel_matrix(&self, idx: usize, shift: f64, time: KernelTime, visible: &CMat) -> Result<CMat> {
        let term = &self.terms[idx];
        let sd = self.generator.spectral();
        match time {
            KernelTime::At(t) => sd.try_apply(|l| kernels::kernel_R_raw(l + shift, term.beta_kernel, t)),
            KernelTime::Infinity => {
                let rows = sd.row_norms_of(visible);
                let scale = linalg::max_abs(visible).max(f64::MIN_POSITIVE);
                let mut d = Vec::with_capacity(sd.dim());
                for (a, &l) in sd.eigenvalues().iter().enumerate() {
                    if rows[a] <= 1e-12 * scale {
                        d.push(ZERO);
                        continue;
                    }
                    if l.im > -crate::steadystate::DEFAULT_EPS_GAP {
                        return Err(Error::NoSteadyState { re: l.re, im: l.im });
                    }
                    d.push(kernels::kernel_R_infinity(l + shift, term.beta_kernel)?);
                }
                Ok(linalg::sandwich(sd.right(), &d, sd.left()))
            }
        }
    }

    /// Raw (unsymmetrized) `N_ν` at the given time.
    pub(crate) fn reservoir_noise_raw(&self, idx: usize, time: KernelTime) -> Result<CMat> {
        let term = &self.terms[idx];
        let base = &term.gamma + &term.gamma_hat;
        if term.beta_kernel == 0.0 {
            return Ok(base);
        }
        let r_minus = self.kernel_matrix(idx, -term.mu, time, &term.gamma).map_err(|e| e.in_reservoir(idx))?;
        let r_plus = self.kernel_matrix(idx, term.mu, time, &term.gamma_hat).map_err(|e| e.in_reservoir(idx))?;
        let yp = &r_minus * &term.gamma;
        let zp = &term.gamma * r_minus.adjoint();
        let yh = &r_plus * &term.gamma_hat;
        let zh = &term.gamma_hat * r_plus.adjoint();
        let mi = -I;
        Ok(Mat::from_fn(base.nrows(), base.ncols(), |i, j| base[(i, j)] + mi * (yp[(i, j)] - zp[(i, j)]) + mi * (yh[(i, j)] - zh[(i, j)])))
    }

    /// `N_ν(t)` for one reservoir, symmetrized.
    pub fn reservoir_noise(&self, idx: usize, t: f64) -> Result<NambuMatrix> {
        if idx >= self.terms.len() {
            return Err(Error::IndexOutOfRange { index: idx, limit: self.terms.len() });
        }
        check_time(t)?;
        let raw = self.reservoir_noise_raw(idx, KernelTime::At(t))?;
        Ok(NambuMatrix::from_mat_unchecked(linalg::hermitian_part(&raw)))
    }

    /// `N(t) = Σ_ν N_ν(t)`, symmetrized after assembly.
    ///
    /// `t = 0` is evaluated literally: the kernel is finite there and
    /// `N(0) = Γ`.
    pub fn noise(&self, t: f64) -> Result<NoiseMatrix> {
        check_time(t)?;
        self.noise_at(KernelTime::At(t))
    }

    pub(crate) fn noise_at(&self, time: KernelTime) -> Result<NoiseMatrix> {
        let d = 2 * self.n();
        let mut raw = linalg::zeros(d);
        for idx in 0..self.terms.len() {
            raw = &raw + &self.reservoir_noise_raw(idx, time)?;
        }
        let hermiticity_defect = linalg::hermiticity_defect(&raw);
        Ok(NoiseMatrix { matrix: NambuMatrix::from_mat_unchecked(linalg::hermitian_part(&raw)), hermiticity_defect })
    }

    /// Rates and jump modes at time `t`.
    pub fn rates(&self, t: f64) -> Result<RateDecomposition> {
        rate_decomposition(&self.noise(t)?.matrix, DEFAULT_ZERO_THRESHOLD)
    }

    /// Jump operators with non-null rates at time `t`.
    pub fn jump_operators(&self, t: f64) -> Result<Vec<JumpOperator>> {
        Ok(self.rates(t)?.jump_operators())
    }

    /// Right-hand side `−iKχ + iχK† + N(t)`.
    pub fn rhs(&self, t: f64, chi: &CMat) -> Result<CMat> {
        let k = self.generator.matrix().as_mat();
        let kc = k * chi;
        let n = self.noise(t)?.matrix.into_mat();
        Ok(Mat::from_fn(chi.nrows(), chi.ncols(), |i, j| -I * kc[(i, j)] + I * kc[(j, i)].conj() + n[(i, j)]))
    }

    /// Integrates the evolution equation with an embedded Dormand–Prince
    /// 5(4) pair, reporting the state at each grid time.
    pub fn evolve(&self, chi0: &CorrelationMatrix, grid: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
        evolve_impl(self, chi0, grid, opts)
    }

    /// Second evaluator:
    /// `χ(t) = U(t) χ(0) U(t)† + ∫_0^t U(t−s) N(s) U(t−s)† ds`, `U = e^{−iKt}`.
    pub fn propagate(&self, chi0: &CorrelationMatrix, t: f64, opts: QuadOptions) -> Result<CorrelationMatrix> {
        check_time(t)?;
        let sd = self.generator.spectral();
        let d = 2 * self.n();
        let u = self.generator.propagator(t);
        let free = &(&u * chi0.as_mat()) * u.adjoint();
        let mut failure = None;
        let pieces: Vec<f64> = (1..8).map(|k| t * k as f64 / 8.0).collect();
        let res = quad::integrate_vec(
            |s, out| {
                if failure.is_some() {
                    out.iter_mut().for_each(|z| *z = ZERO);
                    return;
                }
                match self.noise(s) {
                    Ok(nm) => {
                        let us = sd.apply(|l| (-I * l * (t - s)).exp());
                        let m = &(&us * nm.matrix.as_mat()) * us.adjoint();
                        for j in 0..d {
                            for i in 0..d {
                                out[j * d + i] = m[(i, j)];
                            }
                        }
                    }
                    Err(e) => failure = Some(e),
                }
            },
            d * d,
            0.0,
            t,
            &pieces,
            opts,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let res = res?;
        let total = Mat::from_fn(d, d, |i, j| free[(i, j)] + res.value[j * d + i]);
        Ok(CorrelationMatrix::from_unchecked(NambuMatrix::from_mat_unchecked(linalg::hermitian_part(&total))))
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// `N(t)` for a model. Builds the decomposition of `K` on every call; use
/// [`OpenSystem`] for repeated queries.
pub fn noise_matrix(model: &QuadraticModel, t: f64) -> Result<NoiseMatrix> {
    OpenSystem::new(model.clone())?.noise(t)
}

/// Eigenpairs of a Hermitian noise matrix, rates in descending order.
#[derive(Clone, Debug)]
pub struct RateDecomposition {
    rates: Vec<f64>,
    modes: CMat,
    zero_threshold: f64,
}

/// Diagonalizes `N`. Rates with `|γ| < zero_threshold` are null modes.
pub fn rate_decomposition(n: &NambuMatrix, zero_threshold: f64) -> Result<RateDecomposition> {
    let (vals, vecs) = linalg::eigh(&linalg::hermitian_part(n.as_mat()))?;
    let d = vals.len();
    let rates: Vec<f64> = vals.iter().rev().copied().collect();
    let modes = Mat::from_fn(d, d, |i, j| vecs[(i, d - 1 - j)]);
    Ok(RateDecomposition { rates, modes, zero_threshold })
}

/// A jump operator `L = Σ_i coefficients[i] C_i` with its rate.
#[derive(Clone, Debug)]
pub struct JumpOperator {
    pub rate: f64,
    pub coefficients: Vec<C64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// Localization label of a jump mode: left/right half of the chain and
/// particle/hole sector, each by majority weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModeLabel {
    pub side: Side,
    pub sector: Sector,
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = if self.side == Side::Left { "L" } else { "R" };
        let p = if self.sector == Sector::Particle { "p" } else { "h" };
        write!(f, "{p}{s}")
    }
}

impl RateDecomposition {
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Eigenvectors `|ℓ⟩` as columns, in the order of [`RateDecomposition::rates`].
    pub fn modes(&self) -> &CMat {
        &self.modes
    }

    pub fn mode(&self, l: usize) -> Vec<C64> {
        (0..self.modes.nrows()).map(|i| self.modes[(i, l)]).collect()
    }

    pub fn zero_threshold(&self) -> f64 {
        self.zero_threshold
    }

    pub fn is_null(&self, l: usize) -> bool {
        self.rates[l].abs() < self.zero_threshold
    }

    /// Indices of rates above the threshold in magnitude.
    pub fn active(&self) -> Vec<usize> {
        (0..self.rates.len()).filter(|&l| !self.is_null(l)).collect()
    }

    pub fn null_count(&self) -> usize {
        self.rates.len() - self.active().len()
    }

    /// `f_nM = ½ Σ_ℓ (|γ_ℓ| − γ_ℓ)` over rates below `−zero_threshold`.
    pub fn non_markovianity(&self) -> f64 {
        self.rates.iter().filter(|&&g| g < -self.zero_threshold).map(|g| -g).sum()
    }

    /// `Σ_ℓ γ_ℓ |ℓ⟩⟨ℓ|`.
    pub fn reconstruct(&self) -> CMat {
        let d: Vec<C64> = self.rates.iter().map(|&g| C64::new(g, 0.0)).collect();
        linalg::sandwich(&self.modes, &d, &self.modes.adjoint().to_owned())
    }

    /// `L_ℓ = Σ_i ⟨ℓ|i⟩ C_i` for every non-null mode.
    pub fn jump_operators(&self) -> Vec<JumpOperator> {
        self.active()
            .into_iter()
            .map(|l| JumpOperator { rate: self.rates[l], coefficients: self.mode(l).iter().map(|z| z.conj()).collect() })
            .collect()
    }

    /// Majority-weight label of mode `l`; sites `< n/2` count as left.
    pub fn label(&self, l: usize) -> ModeLabel {
        let d = self.modes.nrows();
        let n = d / 2;
        let (mut particle, mut left) = (0.0, 0.0);
        for i in 0..d {
            let w = self.modes[(i, l)].norm_sqr();
            let site = i % n;
            if i < n {
                particle += w;
            }
            if site < n / 2 {
                left += w;
            }
        }
        ModeLabel {
            side: if left >= 0.5 { Side::Left } else { Side::Right },
            sector: if particle >= 0.5 { Sector::Particle } else { Sector::Hole },
        }
    }
}

/// `f_nM` of a decomposition.
pub fn non_markovianity(rd: &RateDecomposition) -> f64 {
    rd.non_markovianity()
}

/// Jump operators of a model at time `t`.
pub fn jump_operators(model: &QuadraticModel, t: f64) -> Result<Vec<JumpOperator>> {
    OpenSystem::new(model.clone())?.jump_operators(t)
}

/// Which reading of the printed rate-pair formula to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatePairReading {
    /// `γ± = Re a ± sqrt((Re a)² + b − |a|²)` with `a = ⟨ν|y⟩`, `b = ⟨y|y⟩`,
    /// the exact eigenvalues of `|y⟩⟨ν| + |ν⟩⟨y|`.
    Symmetric,
    /// The formula with the asymmetric `½⟨y|ν⟩` taken literally; its real
    /// part is reported.
    Literal,
}

/// Closed-form rate pairs `(γ⁺_p, γ⁻_p, γ⁺_h, γ⁻_h)` of a single reservoir
/// whose hybridization is rank one, `Γ_ν = g|ν⟩⟨ν|`, in a model without
/// pairing terms.
///
/// With `|y^p⟩ = g(½ − iR[K−μ])|ν⟩` and `|y^h⟩ = g(½ − iR[K+μ])|ν̂⟩` one has
/// `N_ν = |y^p⟩⟨ν| + |ν⟩⟨y^p| + |y^h⟩⟨ν̂| + |ν̂⟩⟨y^h|`.
pub fn rate_pairs_closed_form(system: &OpenSystem, idx: usize, t: f64, reading: RatePairReading) -> Result<[f64; 4]> {
    if idx >= system.terms.len() {
        return Err(Error::IndexOutOfRange { index: idx, limit: system.terms.len() });
    }
    let n = system.n();
    let gp = system.model.reservoirs()[idx].gamma().particle_block().clone();
    let (vals, vecs) = linalg::eigh(&gp)?;
    let g = *vals.last().unwrap_or(&0.0);
    if vals.iter().rev().skip(1).any(|v| v.abs() > 1e-12 * g.abs().max(1.0)) {
        return Err(Error::InvalidParameter("closed-form rate pairs need a rank-one hybridization".into()));
    }
    let term = &system.terms[idx];
    let mut out = [0.0; 4];
    for (k, (shift, offset)) in [(-term.mu, 0usize), (term.mu, n)].into_iter().enumerate() {
        let mut nu = Mat::<C64>::zeros(2 * n, 1);
        for i in 0..n {
            nu[(offset + i, 0)] = vecs[(i, n - 1)];
        }
        let r = if term.beta_kernel == 0.0 {
            linalg::zeros(2 * n)
        } else {
            system.kernel_matrix(idx, shift, KernelTime::At(t), &linalg::zeros(2 * n))?
        };
        let half = Mat::from_fn(2 * n, 2 * n, |i, j| {
            let id = if i == j { C64::new(0.5, 0.0) } else { ZERO };
            (id - I * r[(i, j)]) * g
        });
        let y = &half * &nu;
        let a: C64 = (0..2 * n).map(|i| nu[(i, 0)].conj() * y[(i, 0)]).sum();
        let b: f64 = (0..2 * n).map(|i| y[(i, 0)].norm_sqr()).sum();
        let (plus, minus) = match reading {
            RatePairReading::Symmetric => {
                let root = (a.re * a.re + b - a.norm_sqr()).max(0.0).sqrt();
                (a.re + root, a.re - root)
            }
            RatePairReading::Literal => {
                let disc = (a + a.conj()) * (a + a.conj()) + 4.0 * (b - a.norm_sqr());
                let root = disc.sqrt();
                let base = a + 0.5 * a.conj();
                ((0.5 * (base + root)).re, (0.5 * (base - root)).re)
            }
        };
        out[2 * k] = plus;
        out[2 * k + 1] = minus;
    }
    Ok(out)
}

/// Controls for [`OpenSystem::evolve`].
#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// First trial step; `None` picks one from the tolerances.
    pub initial_step: Option<f64>,
    pub min_step: f64,
    pub max_steps: usize,
    /// Abort when any invariant defect exceeds this.
    pub invariant_limit: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-10, initial_step: None, min_step: 1e-12, max_steps: 2_000_000, invariant_limit: 1e-6 }
    }
}

/// States at the requested times plus integration diagnostics.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CorrelationMatrix>,
    /// Invariant defects at each output time.
    pub defects: Vec<InvariantReport>,
    /// Worst cheap defects (no spectrum) over all accepted steps.
    pub step_defects: InvariantReport,
    pub accepted: usize,
    pub rejected: usize,
}

/// Evolves `chi0` over `grid` (increasing, `grid[0] ≥ 0`) with default
/// options.
pub fn evolve_chi(model: &QuadraticModel, chi0: &CorrelationMatrix, grid: &[f64]) -> Result<Trajectory> {
    OpenSystem::new(model.clone())?.evolve(chi0, grid, &EvolveOptions::default())
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo(y: &CMat, h: f64, terms: &[(f64, &CMat)]) -> CMat {
    Mat::from_fn(y.nrows(), y.ncols(), |i, j| {
        let mut acc = y[(i, j)];
        for &(a, k) in terms {
            if a != 0.0 {
                acc += k[(i, j)] * (a * h);
            }
        }
        acc
    })
}

fn evolve_impl(sys: &OpenSystem, chi0: &CorrelationMatrix, grid: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if !(grid[0] >= 0.0) || grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("time grid must be finite, start at t >= 0 and increase strictly".into()));
    }
    if chi0.n() != sys.n() {
        return Err(Error::Dimension { expected: 2 * sys.n(), found: 2 * chi0.n() });
    }
    let mut t = grid[0];
    let mut y = chi0.as_mat().clone();
    let mut k1 = sys.rhs(t, &y)?;
    let span = grid[grid.len() - 1] - grid[0];
    let mut h = opts.initial_step.unwrap_or_else(|| (1e-3 * span.max(1e-3)).min(0.01));
    let mut out = Trajectory {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        defects: Vec::with_capacity(grid.len()),
        step_defects: InvariantReport::default(),
        accepted: 0,
        rejected: 0,
    };
    let record = |t: f64, y: &CMat, out: &mut Trajectory| -> Result<()> {
        let chi = CorrelationMatrix::from_unchecked(NambuMatrix::from_mat_unchecked(y.clone()));
        let rep = chi.invariants()?;
        if let Some((what, defect)) = rep.first_violation(opts.invariant_limit) {
            return Err(Error::InvariantViolation { what, t, defect });
        }
        out.times.push(t);
        out.states.push(chi);
        out.defects.push(rep);
        Ok(())
    };
    record(t, &y, &mut out)?;
    for &target in &grid[1..] {
        while t < target {
            if out.accepted + out.rejected >= opts.max_steps {
                return Err(Error::StepUnderflow { t, h });
            }
            let last = t + h >= target - 1e-12 * target.abs().max(1.0);
            let hs = if last { target - t } else { h };
            let k2 = sys.rhs(t + C2 * hs, &combo(&y, hs, &[(A21, &k1)]))?;
            let k3 = sys.rhs(t + C3 * hs, &combo(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = sys.rhs(t + C4 * hs, &combo(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = sys.rhs(t + C5 * hs, &combo(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let k6 = sys.rhs(t + hs, &combo(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
            let y_new = combo(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let t_new = if last { target } else { t + hs };
            let k7 = sys.rhs(t_new, &y_new)?;
            let mut err = 0.0f64;
            for j in 0..y.ncols() {
                for i in 0..y.nrows() {
                    let e =
                        (k1[(i, j)] * E1 + k3[(i, j)] * E3 + k4[(i, j)] * E4 + k5[(i, j)] * E5 + k6[(i, j)] * E6 + k7[(i, j)] * E7) * hs;
                    let sc = opts.abs_tol + opts.rel_tol * y[(i, j)].norm().max(y_new[(i, j)].norm());
                    err = err.max(e.norm() / sc);
                }
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = t_new;
                y = linalg::hermitian_part(&y_new);
                k1 = if y == y_new { k7 } else { sys.rhs(t, &y)? };
                out.accepted += 1;
                let rep = cheap_invariants(&y);
                if let Some((what, defect)) = rep.first_violation(opts.invariant_limit) {
                    return Err(Error::InvariantViolation { what, t, defect });
                }
                out.step_defects.merge(&rep);
                if !last {
                    h = hs * factor;
                } else {
                    h = h.max(hs * factor);
                }
            } else {
                out.rejected += 1;
                h = hs * factor.min(1.0);
                if h < opts.min_step {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        record(t, &y, &mut out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::nambu::build_hamiltonian;

    fn chain(m: usize) -> HamiltonianMatrix {
        let h = Mat::from_fn(m, m, |i, j| if i.abs_diff(j) == 1 { c(-1.0, 0.0) } else { ZERO });
        build_hamiltonian(&h, &linalg::zeros(m)).unwrap()
    }

    fn two_leads(m: usize, gl: f64, gr: f64, beta: f64, mul: f64, mur: f64) -> QuadraticModel {
        let l = Reservoir::new(HybridizationMatrix::site(m, 0, gl).unwrap(), beta, mul).unwrap();
        let r = Reservoir::new(HybridizationMatrix::site(m, m - 1, gr).unwrap(), beta, mur).unwrap();
        QuadraticModel::new(chain(m), vec![l, r]).unwrap()
    }

    fn vacuum(n: usize) -> CorrelationMatrix {
        let d: Vec<C64> = (0..2 * n).map(|i| if i < n { ONE } else { ZERO }).collect();
        CorrelationMatrix::new(NambuMatrix::new(linalg::diag(&d)).unwrap()).unwrap()
    }

    #[test]
    fn closed_system_generator_is_hamiltonian() {
        let model = QuadraticModel::new(chain(3), vec![]).unwrap();
        let g = build_k(&model).unwrap();
        assert_eq!(g.matrix().max_abs_diff(model.hamiltonian().matrix()), 0.0);
    }

    #[test]
    fn generator_conjugation_identities() {
        let model = two_leads(4, 0.4, 0.2, f64::INFINITY, 0.3, -0.1);
        let k = build_k(&model).unwrap();
        let k = k.matrix();
        // linear map: hat(K) = −K†
        assert!(k.hat().max_abs_diff(&k.adjoint().scale(-ONE)) < 1e-14);
        // antilinear map J conj(K) J: −K
        let j = NambuMatrix::exchange(4);
        let conj = NambuMatrix::new(Mat::from_fn(8, 8, |i, l| k.as_mat()[(i, l)].conj())).unwrap();
        assert!((&(&j * &conj) * &j).max_abs_diff(&k.scale(-ONE)) < 1e-14);
    }

    #[test]
    fn generator_spectrum_in_lower_half_plane() {
        let model = two_leads(2, 0.4, 0.0, f64::INFINITY, 0.0, 0.0);
        let k = build_k(&model).unwrap();
        assert!(k.spectral().eigenvalues().iter().all(|l| l.im <= 1e-12));
    }

    #[test]
    fn infinite_temperature_noise_is_gamma() {
        let model = two_leads(4, 0.4, 0.2, 0.0, 0.3, -0.2);
        let sys = OpenSystem::new(model.clone()).unwrap();
        for t in [0.0, 0.3, 5.0] {
            let n = sys.noise(t).unwrap();
            assert!(n.matrix.max_abs_diff(&model.gamma_total()) < 1e-15);
        }
    }

    #[test]
    fn noise_at_time_zero_is_gamma() {
        let model = two_leads(3, 0.4, 0.2, 2.0, 0.3, -0.2);
        let sys = OpenSystem::new(model.clone()).unwrap();
        assert!(sys.noise(0.0).unwrap().matrix.max_abs_diff(&model.gamma_total()) < 1e-14);
        let near = sys.noise(1e-9).unwrap().matrix;
        assert!(near.max_abs_diff(&model.gamma_total()) < 1e-6);
    }

    #[test]
    fn q_equals_k_consistency() {
        let model = two_leads(4, 0.4, 0.2, 3.0, 0.7, -0.4);
        let sys = OpenSystem::new(model.clone()).unwrap();
        let n = sys.noise(0.7).unwrap();
        assert!(n.hermiticity_defect < 1e-9);
        let sym = (&n.matrix + &n.matrix.hat()).scale(c(0.5, 0.0));
        assert!(sym.max_abs_diff(&model.gamma_total()) < 1e-8);
    }

    #[test]
    fn filled_and_empty_limits() {
        let m = 3;
        let g = HybridizationMatrix::site(m, 0, 0.3).unwrap();
        for (mu, filled) in [(1e3, true), (-1e3, false)] {
            let res = Reservoir::new(g.clone(), f64::INFINITY, mu).unwrap();
            let model = QuadraticModel::new(chain(m), vec![res]).unwrap();
            let n = OpenSystem::new(model).unwrap().reservoir_noise(0, 2.0).unwrap();
            let expect = if filled { g.hat().scale(c(2.0, 0.0)) } else { g.matrix().scale(c(2.0, 0.0)) };
            assert!(n.max_abs_diff(&expect) < 5e-3, "mu={mu}: {}", n.max_abs_diff(&expect));
        }
    }

    #[test]
    fn rate_decomposition_of_diagonal() {
        let d = [c(0.2, 0.0), c(-0.4, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let rd = rate_decomposition(&NambuMatrix::new(linalg::diag(&d)).unwrap(), 1e-10).unwrap();
        assert_eq!(rd.rates(), &[1.0, 0.2, 0.0, -0.4]);
        assert_eq!(rd.mode(0)[3].norm(), 1.0);
        assert_eq!(rd.null_count(), 1);
        assert!((rd.non_markovianity() - 0.4).abs() < 1e-15);
        assert!(linalg::max_abs_diff(&rd.reconstruct(), &linalg::diag(&d)) < 1e-15);
        assert_eq!(rd.jump_operators().len(), 3);
    }

    #[test]
    fn f_nm_sums_negative_rates() {
        let d = [c(-0.2, 0.0), c(0.5, 0.0), c(-0.1, 0.0), c(0.0, 0.0)];
        let rd = rate_decomposition(&NambuMatrix::new(linalg::diag(&d)).unwrap(), 1e-10).unwrap();
        assert!((non_markovianity(&rd) - 0.3).abs() < 1e-15);
        let pos = [c(0.2, 0.0), c(0.5, 0.0), c(-1e-12, 0.0), c(0.0, 0.0)];
        let rd = rate_decomposition(&NambuMatrix::new(linalg::diag(&pos)).unwrap(), 1e-10).unwrap();
        assert_eq!(non_markovianity(&rd), 0.0);
    }

    #[test]
    fn closed_system_preserves_spectrum() {
        let model = QuadraticModel::new(chain(3), vec![]).unwrap();
        let mut chi = linalg::zeros(6);
        // thermal-like state with coherences
        let h = model.hamiltonian().matrix().as_mat().clone();
        let th = linalg::hermitian_function(&h, |e| c(1.0 / (1.0 + (-0.7 * e).exp()), 0.0)).unwrap();
        chi.copy_from(&th);
        let chi0 = CorrelationMatrix::new(NambuMatrix::new(chi).unwrap()).unwrap();
        let traj = evolve_chi(&model, &chi0, &[0.0, 1.0, 3.0]).unwrap();
        let (v0, _) = linalg::eigh(chi0.as_mat()).unwrap();
        for s in &traj.states {
            let (v, _) = linalg::eigh(s.as_mat()).unwrap();
            for (a, b) in v.iter().zip(&v0) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn infinite_temperature_fixed_point() {
        let model = two_leads(3, 0.5, 0.3, 0.0, 0.0, 0.0);
        let half = CorrelationMatrix::new(NambuMatrix::identity(3).scale(c(0.5, 0.0))).unwrap();
        let traj = evolve_chi(&model, &half, &[0.0, 2.0, 10.0]).unwrap();
        for s in &traj.states {
            assert!(s.matrix().max_abs_diff(half.matrix()) < 1e-12);
        }
    }

    #[test]
    fn ode_and_propagated_evaluators_agree() {
        let model = two_leads(3, 0.4, 0.2, 1.5, 0.5, -0.3);
        let sys = OpenSystem::new(model).unwrap();
        let chi0 = vacuum(3);
        let traj = sys.evolve(&chi0, &[0.0, 1.0, 4.0], &EvolveOptions::default()).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states).skip(1) {
            let p = sys.propagate(&chi0, *t, QuadOptions { abs_tol: 1e-10, rel_tol: 1e-10, max_intervals: 500 }).unwrap();
            let dev = p.matrix().max_abs_diff(s.matrix());
            assert!(dev < 1e-6, "t={t}: {dev:e}");
        }
    }

    #[test]
    fn rejects_bad_grid_and_state() {
        let model = two_leads(2, 0.4, 0.2, 1.0, 0.0, 0.0);
        let sys = OpenSystem::new(model).unwrap();
        assert!(sys.evolve(&vacuum(2), &[1.0, 0.5], &EvolveOptions::default()).is_err());
        assert!(sys.evolve(&vacuum(3), &[0.0, 1.0], &EvolveOptions::default()).is_err());
        let bad = NambuMatrix::new(linalg::identity(4)).unwrap();
        assert!(matches!(CorrelationMatrix::new(bad), Err(Error::InvariantViolation { .. })));
    }

    #[test]
    fn rate_pair_readings() {
        let model = two_leads(6, 0.4, 0.2, f64::INFINITY, 0.3, 0.5);
        let sys = OpenSystem::new(model).unwrap();
        let t = 2.0;
        let nl = sys.reservoir_noise(0, t).unwrap();
        let rd = rate_decomposition(&nl, 1e-10).unwrap();
        let mut dense: Vec<f64> = rd.active().iter().map(|&l| rd.rates()[l]).collect();
        dense.sort_by(f64::total_cmp);
        let mut closed = rate_pairs_closed_form(&sys, 0, t, RatePairReading::Symmetric).unwrap().to_vec();
        closed.sort_by(f64::total_cmp);
        assert_eq!(dense.len(), 4);
        for (a, b) in dense.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-12, "{dense:?} vs {closed:?}");
        }
    }
}
