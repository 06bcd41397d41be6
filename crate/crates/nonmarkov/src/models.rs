//! Ready-made models: the tight-binding chain between two leads, the XY
//! spin chain in its fermionic form, and Gaussian initial states.

use faer::Mat;

use crate::dynamics::{CorrelationMatrix, QuadraticModel, Reservoir};
use crate::error::{Error, Result};
use crate::linalg::{self, c, C64, ZERO};
use crate::nambu::{build_hamiltonian, HamiltonianMatrix, HybridizationMatrix, NambuMatrix};

/// Temperature and chemical potential of a lead.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lead {
    pub temperature: f64,
    pub mu: f64,
}

impl Lead {
    pub fn new(temperature: f64, mu: f64) -> Self {
        Self { temperature, mu }
    }

    pub fn zero_temperature(mu: f64) -> Self {
        Self { temperature: 0.0, mu }
    }

    pub fn infinite_temperature() -> Self {
        Self { temperature: f64::INFINITY, mu: 0.0 }
    }

    fn reservoir(&self, n: usize, site: usize, gamma: f64, which: &str) -> Result<Reservoir> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("{which} coupling must be finite and >= 0, got {gamma}")));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::InvalidParameter(format!("{which} temperature must be >= 0, got {}", self.temperature)));
        }
        Reservoir::with_temperature(HybridizationMatrix::site(n, site, gamma)?, self.temperature, self.mu)
    }
}

/// Chain `h = −Σ_j (|j⟩⟨j+1| + h.c.)` with leads on the first and last site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TightBindingSpec {
    pub sites: usize,
    pub gamma_left: f64,
    pub gamma_right: f64,
    pub left: Lead,
    pub right: Lead,
}

fn hopping(m: usize, amplitude: f64) -> Mat<C64> {
    Mat::from_fn(m, m, |i, j| if i.abs_diff(j) == 1 { c(-amplitude, 0.0) } else { ZERO })
}

pub fn tight_binding_chain(spec: &TightBindingSpec) -> Result<QuadraticModel> {
    let m = spec.sites;
    if m < 2 {
        return Err(Error::InvalidParameter(format!("a chain needs at least 2 sites, got {m}")));
    }
    let ham = build_hamiltonian(&hopping(m, 1.0), &linalg::zeros(m))?;
    let left = spec.left.reservoir(m, 0, spec.gamma_left, "left")?;
    let right = spec.right.reservoir(m, m - 1, spec.gamma_right, "right")?;
    QuadraticModel::new(ham, vec![left, right])
}

/// Anisotropic XY chain in a transverse field, after the Jordan–Wigner
/// transformation. The reservoir fields `h ± Δh` enter through effective
/// chemical potentials `μ_{L/R} = ±2Δh`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XYSpec {
    pub sites: usize,
    /// `J_c`, the energy unit.
    pub coupling: f64,
    /// `γ_c ∈ [0, 1]`.
    pub anisotropy: f64,
    /// `h_c`.
    pub field: f64,
    /// `Δh`.
    pub delta_h: f64,
    pub gamma_left: f64,
    pub gamma_right: f64,
    pub temperature_left: f64,
    pub temperature_right: f64,
}

impl XYSpec {
    /// Zero-temperature spec with symmetric couplings.
    pub fn new(sites: usize, anisotropy: f64, field: f64, delta_h: f64, gamma: f64) -> Self {
        Self {
            sites,
            coupling: 1.0,
            anisotropy,
            field,
            delta_h,
            gamma_left: gamma,
            gamma_right: gamma,
            temperature_left: 0.0,
            temperature_right: 0.0,
        }
    }
}

/// `h = −J_c Σ(|m⟩⟨m+1| + h.c.) − 2h_c`, `Δ = J_cγ_c Σ(|m⟩⟨m+1| − |m+1⟩⟨m|)`.
pub fn xy_hamiltonian(sites: usize, coupling: f64, anisotropy: f64, field: f64) -> Result<HamiltonianMatrix> {
    let m = sites;
    if m < 2 {
        return Err(Error::InvalidParameter(format!("a chain needs at least 2 sites, got {m}")));
    }
    if !(0.0..=1.0).contains(&anisotropy) {
        return Err(Error::InvalidParameter(format!("anisotropy must lie in [0, 1], got {anisotropy}")));
    }
    if !coupling.is_finite() || !field.is_finite() {
        return Err(Error::NonFinite("XY coupling or field"));
    }
    let mut h = hopping(m, coupling);
    for i in 0..m {
        h[(i, i)] = c(-2.0 * field, 0.0);
    }
    let g = coupling * anisotropy;
    let delta = Mat::from_fn(m, m, |i, j| {
        if j == i + 1 {
            c(g, 0.0)
        } else if i == j + 1 {
            c(-g, 0.0)
        } else {
            ZERO
        }
    });
    build_hamiltonian(&h, &delta)
}

pub fn xy_chain(spec: &XYSpec) -> Result<QuadraticModel> {
    let m = spec.sites;
    let ham = xy_hamiltonian(m, spec.coupling, spec.anisotropy, spec.field)?;
    if !spec.delta_h.is_finite() {
        return Err(Error::NonFinite("delta_h"));
    }
    let left = Lead::new(spec.temperature_left, 2.0 * spec.delta_h).reservoir(m, 0, spec.gamma_left, "left")?;
    let right = Lead::new(spec.temperature_right, -2.0 * spec.delta_h).reservoir(m, m - 1, spec.gamma_right, "right")?;
    QuadraticModel::new(ham, vec![left, right])
}

/// Gaussian initial states `χ(0) = [1 + e^{−Ω₀}]^{−1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    /// All modes empty: particle block 1, hole block 0.
    Vacuum,
    /// All modes occupied.
    Filled,
    /// `χ = ½`.
    InfiniteTemperature,
    /// Gibbs state of `H_c` with `Ω₀ = β(H_c − μ·diag(1, −1))`.
    Thermal { beta: f64, mu: f64 },
}

pub fn gaussian_initial_state(kind: InitialState, hamiltonian: &HamiltonianMatrix) -> Result<CorrelationMatrix> {
    let n = hamiltonian.n();
    let diag = |p: f64, h: f64| {
        let d: Vec<C64> = (0..2 * n).map(|i| c(if i < n { p } else { h }, 0.0)).collect();
        linalg::diag(&d)
    };
    let m = match kind {
        InitialState::Vacuum => diag(1.0, 0.0),
        InitialState::Filled => diag(0.0, 1.0),
        InitialState::InfiniteTemperature => diag(0.5, 0.5),
        InitialState::Thermal { beta, mu } => {
            if beta.is_nan() || beta < 0.0 || !mu.is_finite() {
                return Err(Error::InvalidParameter(format!("thermal state needs beta >= 0 and finite mu, got ({beta}, {mu})")));
            }
            let shift = diag(mu, -mu);
            let omega_over_beta = hamiltonian.matrix().as_mat() - &shift;
            linalg::hermitian_function(&omega_over_beta, |e| {
                let x = beta * e;
                // logistic 1/(1 + e^{−x}), with β = ∞ and e = 0 giving ½
                let v = if x.is_nan() {
                    0.5
                } else if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let ex = x.exp();
                    ex / (1.0 + ex)
                };
                c(v, 0.0)
            })?
        }
    };
    CorrelationMatrix::new(NambuMatrix::new(linalg::hermitian_part(&m))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(m: usize) -> TightBindingSpec {
        TightBindingSpec {
            sites: m,
            gamma_left: 0.4,
            gamma_right: 0.2,
            left: Lead::zero_temperature(0.0),
            right: Lead::zero_temperature(0.5),
        }
    }

    #[test]
    fn two_site_chain() {
        let model = tight_binding_chain(&spec(2)).unwrap();
        let h = model.hamiltonian().h();
        assert_eq!(h[(0, 1)], c(-1.0, 0.0));
        assert_eq!(h[(1, 0)], c(-1.0, 0.0));
        assert_eq!(h[(0, 0)], ZERO);
        assert_eq!(model.reservoirs().len(), 2);
        assert_eq!(model.reservoirs()[1].mu(), 0.5);
        assert!(model.reservoirs()[0].beta().is_infinite());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = spec(4);
        s.gamma_left = -0.1;
        assert!(tight_binding_chain(&s).is_err());
        assert!(tight_binding_chain(&spec(1)).is_err());
        let mut x = XYSpec::new(6, 1.5, 1.0, 0.1, 0.5);
        assert!(xy_chain(&x).is_err());
        x.anisotropy = 0.5;
        x.temperature_left = -1.0;
        assert!(xy_chain(&x).is_err());
    }

    #[test]
    fn xy_without_anisotropy_is_a_shifted_chain() {
        let xy = xy_chain(&XYSpec::new(5, 0.0, 0.3, 0.2, 0.5)).unwrap();
        let h = xy.hamiltonian();
        assert_eq!(linalg::max_abs(&h.delta()), 0.0);
        for i in 0..5 {
            assert_eq!(h.h()[(i, i)], c(-0.6, 0.0));
        }
        assert_eq!(xy.reservoirs()[0].mu(), 0.4);
        assert_eq!(xy.reservoirs()[1].mu(), -0.4);
        // with no field either it coincides with the tight-binding chain
        let xy0 = xy_chain(&XYSpec::new(5, 0.0, 0.0, 0.0, 0.5)).unwrap();
        let tb = tight_binding_chain(&TightBindingSpec {
            sites: 5,
            gamma_left: 0.5,
            gamma_right: 0.5,
            left: Lead::zero_temperature(0.0),
            right: Lead::zero_temperature(0.0),
        })
        .unwrap();
        assert_eq!(xy0.hamiltonian().matrix().max_abs_diff(tb.hamiltonian().matrix()), 0.0);
    }

    #[test]
    fn xy_hamiltonian_symmetries() {
        let xy = xy_chain(&XYSpec::new(6, 0.5, 1.2, 3.0, 0.5)).unwrap();
        let h = xy.hamiltonian().matrix();
        assert_eq!(h.hermiticity_defect(), 0.0);
        assert!(h.hat().max_abs_diff(&h.scale(c(-1.0, 0.0))) < 1e-15);
        assert_eq!(xy.hamiltonian().delta()[(2, 3)], c(0.5, 0.0));
        assert_eq!(xy.hamiltonian().delta()[(3, 2)], c(-0.5, 0.0));
    }

    #[test]
    fn preset_states() {
        let h = tight_binding_chain(&spec(3)).unwrap().hamiltonian().clone();
        let vac = gaussian_initial_state(InitialState::Vacuum, &h).unwrap();
        assert_eq!(vac.occupations(), vec![0.0; 3]);
        let full = gaussian_initial_state(InitialState::Filled, &h).unwrap();
        assert_eq!(full.occupations(), vec![1.0; 3]);
        let half = gaussian_initial_state(InitialState::InfiniteTemperature, &h).unwrap();
        assert!(half.matrix().max_abs_diff(&NambuMatrix::identity(3).scale(c(0.5, 0.0))) == 0.0);
        let zero_beta = gaussian_initial_state(InitialState::Thermal { beta: 0.0, mu: 1.0 }, &h).unwrap();
        assert!(zero_beta.matrix().max_abs_diff(half.matrix()) < 1e-15);
    }

    #[test]
    fn thermal_occupations_follow_fermi_function() {
        let h = tight_binding_chain(&spec(4)).unwrap().hamiltonian().clone();
        let (beta, mu) = (2.0, 0.3);
        let chi = gaussian_initial_state(InitialState::Thermal { beta, mu }, &h).unwrap();
        let (eps, _) = linalg::eigh(&h.h()).unwrap();
        let total: f64 = chi.occupations().iter().sum();
        let expect: f64 = eps.iter().map(|e| 1.0 / (1.0 + (beta * (e - mu)).exp())).sum();
        assert!((total - expect).abs() < 1e-12);
        let inv = chi.invariants().unwrap();
        assert!(inv.worst() < 1e-12);
    }

    #[test]
    fn zero_temperature_thermal_state_is_the_fermi_sea() {
        let h = tight_binding_chain(&spec(4)).unwrap().hamiltonian().clone();
        let chi = gaussian_initial_state(InitialState::Thermal { beta: f64::INFINITY, mu: 0.0 }, &h).unwrap();
        let total: f64 = chi.occupations().iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
    }
}
