//! Nambu-space data model.
//!
//! A system of `n` fermionic modes is described through the doubled vector
//! `C = (c_0, …, c_{n-1}, c_0†, …, c_{n-1}†)`. Flat index `i < n` is the
//! particle state of site `i`, flat index `n + i` its hole partner. Every
//! single-particle operator is a `2n × 2n` complex matrix in this basis and
//! every file the crate writes uses this layout.

use std::ops::{Add, Mul, Sub};

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ONE, ZERO};

/// Absolute max-norm tolerance for the symmetry checks of constructors.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sector {
    Particle,
    Hole,
}

/// A (site, sector) label, bijective with the flat index in `[0, 2n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NambuIndex {
    pub site: usize,
    pub sector: Sector,
}

impl NambuIndex {
    pub fn particle(site: usize) -> Self {
        Self { site, sector: Sector::Particle }
    }

    pub fn hole(site: usize) -> Self {
        Self { site, sector: Sector::Hole }
    }

    pub fn flat(self, n: usize) -> usize {
        debug_assert!(self.site < n);
        match self.sector {
            Sector::Particle => self.site,
            Sector::Hole => n + self.site,
        }
    }

    pub fn from_flat(i: usize, n: usize) -> Result<Self> {
        if i >= 2 * n {
            return Err(Error::IndexOutOfRange { index: i, limit: 2 * n });
        }
        Ok(if i < n { Self::particle(i) } else { Self::hole(i - n) })
    }

    /// The particle-hole partner `â`.
    pub fn conjugate(self) -> Self {
        let sector = match self.sector {
            Sector::Particle => Sector::Hole,
            Sector::Hole => Sector::Particle,
        };
        Self { site: self.site, sector }
    }
}

/// A `2n × 2n` complex matrix with particle/hole block structure.
#[derive(Clone, Debug)]
pub struct NambuMatrix {
    n: usize,
    m: CMat,
}

impl NambuMatrix {
    /// Wraps a dense matrix, checking that it is square, of even dimension
    /// and finite.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension { expected: m.nrows(), found: m.ncols() });
        }
        if m.nrows() % 2 != 0 {
            return Err(Error::Dimension { expected: m.nrows() + 1, found: m.nrows() });
        }
        if !linalg::is_finite(&m) {
            return Err(Error::NonFinite("Nambu matrix"));
        }
        Ok(Self { n: m.nrows() / 2, m })
    }

    pub(crate) fn from_mat_unchecked(m: CMat) -> Self {
        debug_assert!(m.nrows() == m.ncols() && m.nrows() % 2 == 0);
        Self { n: m.nrows() / 2, m }
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, m: linalg::zeros(2 * n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { n, m: linalg::identity(2 * n) }
    }

    /// The exchange matrix `J = Σ_a (|a⟩⟨â| + |â⟩⟨a|)`.
    pub fn exchange(n: usize) -> Self {
        let m = Mat::from_fn(2 * n, 2 * n, |i, j| if (i + n) % (2 * n) == j { ONE } else { ZERO });
        Self { n, m }
    }

    /// Assembles `[[pp, ph], [hp, hh]]` from four `n × n` blocks.
    pub fn from_blocks(pp: &CMat, ph: &CMat, hp: &CMat, hh: &CMat) -> Result<Self> {
        let n = pp.nrows();
        for b in [pp, ph, hp, hh] {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::Dimension { expected: n, found: b.nrows().max(b.ncols()) });
            }
        }
        let m = Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => pp[(i, j)],
            (true, false) => ph[(i, j - n)],
            (false, true) => hp[(i - n, j)],
            (false, false) => hh[(i - n, j - n)],
        });
        Self::new(m)
    }

    /// Number of modes `n`; the matrix dimension is `2n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn as_mat(&self) -> &CMat {
        &self.m
    }

    pub fn into_mat(self) -> CMat {
        self.m
    }

    pub fn get(&self, row: NambuIndex, col: NambuIndex) -> C64 {
        self.m[(row.flat(self.n), col.flat(self.n))]
    }

    /// Copy of the `n × n` block with the given row and column sectors.
    pub fn block(&self, rows: Sector, cols: Sector) -> CMat {
        let off = |s| if s == Sector::Particle { 0 } else { self.n };
        let (r0, c0) = (off(rows), off(cols));
        Mat::from_fn(self.n, self.n, |i, j| self.m[(r0 + i, c0 + j)])
    }

    /// Particle-hole conjugate `J Aᵀ J`. See [`ph_conjugate`].
    pub fn hat(&self) -> Self {
        let n = self.n;
        let sw = |i: usize| (i + n) % (2 * n);
        let m = Mat::from_fn(2 * n, 2 * n, |i, j| self.m[(sw(j), sw(i))]);
        Self { n, m }
    }

    pub fn adjoint(&self) -> Self {
        Self { n: self.n, m: linalg::adjoint(&self.m) }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { n: self.n, m: linalg::scale(&self.m, s) }
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.m)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        linalg::max_abs_diff(&self.m, &other.m)
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.m)
    }

    /// `‖A − A†‖_max`.
    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.m)
    }

    /// `‖hat(A) + A‖_max`, zero for particle-hole odd operators.
    pub fn ph_odd_defect(&self) -> f64 {
        self.hat().max_abs_diff(&self.scale(-ONE))
    }

    pub fn hermitian_part(&self) -> Self {
        Self { n: self.n, m: linalg::hermitian_part(&self.m) }
    }

    /// True when both anomalous (particle-hole mixing) blocks vanish exactly.
    pub fn is_block_diagonal(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| (0..n).all(|j| self.m[(i, n + j)] == ZERO && self.m[(n + i, j)] == ZERO))
    }

    fn check_same(&self, other: &Self) {
        assert_eq!(self.n, other.n, "Nambu dimension mismatch");
    }
}

impl Add for &NambuMatrix {
    type Output = NambuMatrix;
    fn add(self, rhs: Self) -> NambuMatrix {
        self.check_same(rhs);
        NambuMatrix { n: self.n, m: &self.m + &rhs.m }
    }
}

impl Sub for &NambuMatrix {
    type Output = NambuMatrix;
    fn sub(self, rhs: Self) -> NambuMatrix {
        self.check_same(rhs);
        NambuMatrix { n: self.n, m: &self.m - &rhs.m }
    }
}

impl Mul for &NambuMatrix {
    type Output = NambuMatrix;
    fn mul(self, rhs: Self) -> NambuMatrix {
        self.check_same(rhs);
        NambuMatrix { n: self.n, m: &self.m * &rhs.m }
    }
}

/// Particle-hole conjugation `hat(A) = J Aᵀ J`.
///
/// The map is linear, involutive and reverses products:
/// `hat(AB) = hat(B) hat(A)`.
pub fn ph_conjugate(a: &NambuMatrix) -> NambuMatrix {
    a.hat()
}

/// Hermitian, particle-hole odd single-particle Hamiltonian.
#[derive(Clone, Debug)]
pub struct HamiltonianMatrix(NambuMatrix);

impl HamiltonianMatrix {
    /// Validates an already assembled `2n × 2n` matrix.
    pub fn new(m: NambuMatrix) -> Result<Self> {
        let herm = m.hermiticity_defect();
        if herm > SYMMETRY_TOL {
            return Err(Error::Symmetry { condition: "H = H^dagger", violation: herm });
        }
        let odd = m.ph_odd_defect();
        if odd > SYMMETRY_TOL {
            return Err(Error::Symmetry { condition: "hat(H) = -H", violation: odd });
        }
        Ok(Self(m))
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn matrix(&self) -> &NambuMatrix {
        &self.0
    }

    /// The normal block `h`.
    pub fn h(&self) -> CMat {
        self.0.block(Sector::Particle, Sector::Particle)
    }

    /// The anomalous block `Δ`.
    pub fn delta(&self) -> CMat {
        self.0.block(Sector::Particle, Sector::Hole)
    }
}

/// Assembles `[[h, Δ], [Δ†, −hᵀ]]` after checking `h† = h` and `Δᵀ = −Δ`.
pub fn build_hamiltonian(h: &CMat, delta: &CMat) -> Result<HamiltonianMatrix> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::Dimension { expected: n, found: h.ncols() });
    }
    if delta.nrows() != n || delta.ncols() != n {
        return Err(Error::Dimension { expected: n, found: delta.nrows().max(delta.ncols()) });
    }
    if !linalg::is_finite(h) || !linalg::is_finite(delta) {
        return Err(Error::NonFinite("Hamiltonian block"));
    }
    let herm = linalg::hermiticity_defect(h);
    if herm > SYMMETRY_TOL {
        return Err(Error::Symmetry { condition: "h = h^dagger", violation: herm });
    }
    let mut anti = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            anti = anti.max((delta[(i, j)] + delta[(j, i)]).norm());
        }
    }
    if anti > SYMMETRY_TOL {
        return Err(Error::Symmetry { condition: "Delta^T = -Delta", violation: anti });
    }
    let hh = Mat::from_fn(n, n, |i, j| -h[(j, i)]);
    let m = NambuMatrix::from_blocks(h, delta, &linalg::adjoint(delta), &hh)?;
    Ok(HamiltonianMatrix(m))
}

/// Hermitian positive-semidefinite hybridization matrix `Γ_ν`, supported on
/// the particle block. Its hole partner `Γ̂_ν` is [`HybridizationMatrix::hat`].
#[derive(Clone, Debug)]
pub struct HybridizationMatrix {
    particle: CMat,
    full: NambuMatrix,
}

impl HybridizationMatrix {
    /// Builds `Γ_ν` from its `n × n` particle block, checking Hermiticity and
    /// positive semidefiniteness.
    pub fn new(gamma: &CMat) -> Result<Self> {
        let n = gamma.nrows();
        if gamma.ncols() != n {
            return Err(Error::Dimension { expected: n, found: gamma.ncols() });
        }
        if !linalg::is_finite(gamma) {
            return Err(Error::NonFinite("hybridization matrix"));
        }
        let herm = linalg::hermiticity_defect(gamma);
        if herm > SYMMETRY_TOL {
            return Err(Error::Symmetry { condition: "Gamma = Gamma^dagger", violation: herm });
        }
        let (vals, _) = linalg::eigh(&linalg::hermitian_part(gamma))?;
        let min = vals.first().copied().unwrap_or(0.0);
        if min < -SYMMETRY_TOL {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        let z = linalg::zeros(n);
        let full = NambuMatrix::from_blocks(gamma, &z, &z, &z)?;
        Ok(Self { particle: gamma.clone(), full })
    }

    /// `Γ = strength · |site⟩⟨site|`, the lead contact used by the chain models.
    pub fn site(n: usize, site: usize, strength: f64) -> Result<Self> {
        if site >= n {
            return Err(Error::IndexOutOfRange { index: site, limit: n });
        }
        if !(strength >= 0.0) || !strength.is_finite() {
            return Err(Error::InvalidParameter(format!("coupling strength must be finite and >= 0, got {strength}")));
        }
        let mut g = linalg::zeros(n);
        g[(site, site)] = C64::new(strength, 0.0);
        Self::new(&g)
    }

    pub fn n(&self) -> usize {
        self.particle.nrows()
    }

    /// The `n × n` particle block.
    pub fn particle_block(&self) -> &CMat {
        &self.particle
    }

    /// `Γ_ν` as a `2n × 2n` Nambu matrix.
    pub fn matrix(&self) -> &NambuMatrix {
        &self.full
    }

    /// The hole-block partner `Γ̂_ν`.
    pub fn hat(&self) -> NambuMatrix {
        self.full.hat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn random_matrix(n: usize, seed: u64) -> NambuMatrix {
        // Small deterministic LCG; keeps this module free of dev-deps.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let m = Mat::from_fn(2 * n, 2 * n, |_, _| c(next(), next()));
        NambuMatrix::new(m).unwrap()
    }

    fn chain_h(m: usize) -> CMat {
        Mat::from_fn(m, m, |i, j| if i.abs_diff(j) == 1 { c(-1.0, 0.0) } else { ZERO })
    }

    #[test]
    fn flat_index_roundtrip() {
        let n = 5;
        for i in 0..2 * n {
            let idx = NambuIndex::from_flat(i, n).unwrap();
            assert_eq!(idx.flat(n), i);
            assert_eq!(idx.conjugate().conjugate(), idx);
        }
        assert_eq!(NambuIndex::hole(2).flat(n), 7);
        assert!(NambuIndex::from_flat(10, n).is_err());
    }

    #[test]
    fn exchange_is_self_conjugate() {
        let j = NambuMatrix::exchange(3);
        assert_eq!(j.hat().max_abs_diff(&j), 0.0);
        assert!((&j * &j).max_abs_diff(&NambuMatrix::identity(3)) == 0.0);
    }

    #[test]
    fn hat_matches_explicit_product() {
        let a = random_matrix(3, 7);
        let j = NambuMatrix::exchange(3);
        let at = NambuMatrix::new(linalg::transpose(a.as_mat())).unwrap();
        let explicit = &(&j * &at) * &j;
        assert!(a.hat().max_abs_diff(&explicit) < 1e-15);
    }

    #[test]
    fn hat_is_involutive_and_reverses_products() {
        for seed in 0..10 {
            let a = random_matrix(3, seed);
            let b = random_matrix(3, seed + 100);
            assert_eq!(a.hat().hat().max_abs_diff(&a), 0.0);
            let lhs = (&a * &b).hat();
            let rhs = &b.hat() * &a.hat();
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
    }

    #[test]
    fn particle_projector_maps_to_hole_projector() {
        let n = 3;
        let one = linalg::identity(n);
        let z = linalg::zeros(n);
        let p = NambuMatrix::from_blocks(&one, &z, &z, &z).unwrap();
        let h = NambuMatrix::from_blocks(&z, &z, &z, &one).unwrap();
        assert_eq!(p.hat().max_abs_diff(&h), 0.0);
    }

    #[test]
    fn tight_binding_hamiltonian_is_ph_odd() {
        let h = chain_h(3);
        let ham = build_hamiltonian(&h, &linalg::zeros(3)).unwrap();
        let m = ham.matrix();
        assert!(m.hat().max_abs_diff(&m.scale(-ONE)) < 1e-15);
    }

    #[test]
    fn single_mode_hamiltonian() {
        let mut h = linalg::zeros(1);
        h[(0, 0)] = c(0.7, 0.0);
        let ham = build_hamiltonian(&h, &linalg::zeros(1)).unwrap();
        let expect = linalg::diag(&[c(0.7, 0.0), c(-0.7, 0.0)]);
        assert_eq!(linalg::max_abs_diff(ham.matrix().as_mat(), &expect), 0.0);
    }

    #[test]
    fn symmetric_pairing_is_rejected() {
        let delta = Mat::from_fn(2, 2, |i, j| if i != j { ONE } else { ZERO });
        let err = build_hamiltonian(&chain_h(2), &delta).unwrap_err();
        match err {
            Error::Symmetry { condition, violation } => {
                assert!(condition.contains("Delta"));
                assert!((violation - 2.0).abs() < 1e-15);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_hermitian_h_is_rejected() {
        let mut h = chain_h(2);
        h[(0, 1)] = c(-1.0, 0.1);
        assert!(matches!(build_hamiltonian(&h, &linalg::zeros(2)), Err(Error::Symmetry { .. })));
    }

    #[test]
    fn pairing_hamiltonian_invariants() {
        let n = 4;
        let mut h = chain_h(n);
        h[(1, 1)] = c(0.3, 0.0);
        let delta = Mat::from_fn(n, n, |i, j| {
            if j == i + 1 {
                c(0.5, 0.2)
            } else if i == j + 1 {
                c(-0.5, -0.2)
            } else {
                ZERO
            }
        });
        let ham = build_hamiltonian(&h, &delta).unwrap();
        assert!(ham.matrix().hermiticity_defect() < 1e-12);
        assert!(ham.matrix().ph_odd_defect() < 1e-12);
        assert_eq!(linalg::max_abs_diff(&ham.delta(), &delta), 0.0);
    }

    #[test]
    fn hybridization_checks() {
        let g = HybridizationMatrix::site(3, 0, 0.4).unwrap();
        assert_eq!(g.matrix().get(NambuIndex::particle(0), NambuIndex::particle(0)), c(0.4, 0.0));
        assert_eq!(g.hat().get(NambuIndex::hole(0), NambuIndex::hole(0)), c(0.4, 0.0));
        assert!(HybridizationMatrix::site(3, 0, -0.1).is_err());
        let mut bad = linalg::zeros(2);
        bad[(0, 0)] = c(1.0, 0.0);
        bad[(1, 1)] = c(-0.5, 0.0);
        assert!(matches!(HybridizationMatrix::new(&bad), Err(Error::NotPositiveSemidefinite { .. })));
    }
}
