use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::nambu::{NambuMatrix, Sector};

/// Default ceiling on the eigenvector condition number.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e8;

/// Right/left eigensystem `K = Σ_α |α⟩ λ_α ⟨α'|` of a diagonalizable matrix.
///
/// Eigenvalues are ordered by real part, then imaginary part, so that every
/// quantity derived from the decomposition is reproducible. Right vectors
/// have unit norm; the left vectors are the rows of the inverse eigenvector
/// matrix, so `⟨α'|β⟩ = δ_αβ`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    values: Vec<C64>,
    right: CMat,
    left: CMat,
    condition: f64,
}

impl SpectralDecomposition {
    pub fn new(k: &NambuMatrix) -> Result<Self> {
        Self::with_limit(k, DEFAULT_CONDITION_LIMIT)
    }

    /// Decomposes a Nambu matrix. Matrices without particle-hole mixing are
    /// split into their two blocks first, which keeps the exact degeneracies
    /// between particle and hole spectra from spoiling the eigenvectors.
    pub fn with_limit(k: &NambuMatrix, limit: f64) -> Result<Self> {
        if !k.is_block_diagonal() {
            return Self::of_matrix(k.as_mat(), limit);
        }
        let n = k.n();
        let (vp, rp) = eigen_sorted(&k.block(Sector::Particle, Sector::Particle))?;
        let (vh, rh) = eigen_sorted(&k.block(Sector::Hole, Sector::Hole))?;
        let mut right = linalg::zeros(2 * n);
        for j in 0..n {
            for i in 0..n {
                right[(i, j)] = rp[(i, j)];
                right[(n + i, n + j)] = rh[(i, j)];
            }
        }
        let mut values = vp;
        values.extend(vh);
        Self::finish(values, right, limit)
    }

    /// Decomposes an arbitrary square matrix.
    pub fn of_matrix(k: &CMat, limit: f64) -> Result<Self> {
        if k.nrows() != k.ncols() {
            return Err(Error::Dimension { expected: k.nrows(), found: k.ncols() });
        }
        let (values, right) = eigen_sorted(k)?;
        Self::finish(values, right, limit)
    }

    fn finish(values: Vec<C64>, right: CMat, limit: f64) -> Result<Self> {
        let d = values.len();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re).then(values[a].im.total_cmp(&values[b].im)));
        let values: Vec<C64> = order.iter().map(|&i| values[i]).collect();
        let right = Mat::from_fn(d, d, |i, j| right[(i, order[j])]);
        let condition = condition_number(&right)?;
        if !(condition <= limit) {
            return Err(Error::Defective { condition, threshold: limit });
        }
        let left = linalg::inverse(&right);
        Ok(Self { values, right, left, condition })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.values
    }

    /// Right eigenvectors as columns.
    pub fn right(&self) -> &CMat {
        &self.right
    }

    /// Left eigenvectors `⟨α'|` as rows.
    pub fn left(&self) -> &CMat {
        &self.left
    }

    /// 2-norm condition number of the right eigenvector matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Largest imaginary part over the spectrum.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ_α |α⟩ f(λ_α) ⟨α'|`.
    pub fn apply(&self, mut f: impl FnMut(C64) -> C64) -> CMat {
        let d: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        linalg::sandwich(&self.right, &d, &self.left)
    }

    /// Fallible variant of [`SpectralDecomposition::apply`].
    pub fn try_apply(&self, mut f: impl FnMut(C64) -> Result<C64>) -> Result<CMat> {
        let d = self.values.iter().map(|&l| f(l)).collect::<Result<Vec<C64>>>()?;
        Ok(linalg::sandwich(&self.right, &d, &self.left))
    }

    /// `max |⟨α'|β⟩ − δ_αβ|`.
    pub fn biorthogonality_defect(&self) -> f64 {
        linalg::max_abs_diff(&(&self.left * &self.right), &linalg::identity(self.dim()))
    }

    /// `max |Σ_α |α⟩⟨α'| − 1|`.
    pub fn completeness_defect(&self) -> f64 {
        linalg::max_abs_diff(&(&self.right * &self.left), &linalg::identity(self.dim()))
    }
}

fn eigen_sorted(k: &CMat) -> Result<(Vec<C64>, CMat)> {
    let evd = k.eigen().map_err(|_| Error::EigenFailure)?;
    let s = evd.S().column_vector();
    let values: Vec<C64> = (0..k.nrows()).map(|i| s[i]).collect();
    let mut right = evd.U().to_owned();
    for j in 0..right.ncols() {
        let norm = (0..right.nrows()).map(|i| right[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::EigenFailure);
        }
        for i in 0..right.nrows() {
            right[(i, j)] /= norm;
        }
    }
    Ok((values, right))
}

fn condition_number(v: &CMat) -> Result<f64> {
    let s = v.singular_values().map_err(|_| Error::EigenFailure)?;
    let max = s.iter().copied().fold(0.0f64, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if min > 0.0 { max / min } else { f64::INFINITY })
}

/// `f(K) = Σ_α |α⟩ f(λ_α) ⟨α'|` for a diagonalizable Nambu matrix.
pub fn matrix_function(k: &NambuMatrix, f: impl FnMut(C64) -> C64) -> Result<NambuMatrix> {
    let sd = SpectralDecomposition::new(k)?;
    NambuMatrix::new(sd.apply(f))
}

impl SpectralDecomposition {
    /// Norms of the rows of `W X`. A vanishing row means mode `α` does not
    /// see the operator `X`.
    pub(crate) fn row_norms_of(&self, x: &CMat) -> Vec<f64> {
        let wx = &self.left * x;
        (0..wx.nrows()).map(|i| (0..wx.ncols()).map(|j| wx[(i, j)].norm_sqr()).sum::<f64>().sqrt()).collect()
    }
}
