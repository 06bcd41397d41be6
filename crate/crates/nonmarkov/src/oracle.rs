//! Brute-force references: closed evolution of the system together with a
//! finite discretized bath, and exact many-body checks in Fock space for a
//! handful of modes.

use faer::Mat;

use crate::dynamics::{CorrelationMatrix, EvolveOptions, OpenSystem, QuadraticModel};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, ONE, ZERO};
use crate::nambu::{HamiltonianMatrix, NambuMatrix};

/// Largest total number of modes (system plus bath) accepted.
pub const MAX_MODES: usize = 2000;

/// Largest number of modes for the Fock-space oracle.
pub const MAX_FOCK_MODES: usize = 8;

/// Flat band of `modes` equally spaced levels across `[−W/2, W/2]`, coupled
/// with `π ρ |v|² = Γ`, `ρ = modes/W`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscretizedBath {
    pub modes: usize,
    pub bandwidth: f64,
}

impl DiscretizedBath {
    pub fn new(modes: usize, bandwidth: f64) -> Result<Self> {
        if modes == 0 || !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidParameter(format!("bath needs modes > 0 and finite W > 0, got ({modes}, {bandwidth})")));
        }
        Ok(Self { modes, bandwidth })
    }

    pub fn spacing(&self) -> f64 {
        self.bandwidth / self.modes as f64
    }

    /// Midpoint levels `ε_k = −W/2 + (k + ½)δ`.
    pub fn levels(&self) -> Vec<f64> {
        let d = self.spacing();
        (0..self.modes).map(|k| -0.5 * self.bandwidth + (k as f64 + 0.5) * d).collect()
    }

    /// Amplitude `v = √(Γδ/π)` reproducing a wide-band width `Γ`.
    pub fn amplitude(&self, gamma: f64) -> f64 {
        (gamma * self.spacing() / std::f64::consts::PI).sqrt()
    }

    /// `2π/δ`, the time after which the discrete bath revives.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.spacing()
    }
}

/// `χ(t) = U χ(0) U†` with `U = e^{−iHt}`.
pub fn closed_evolve(h: &HamiltonianMatrix, chi0: &CorrelationMatrix, t: f64) -> Result<CorrelationMatrix> {
    if chi0.n() != h.n() {
        return Err(Error::Dimension { expected: 2 * h.n(), found: 2 * chi0.n() });
    }
    let (e, v) = linalg::eigh(h.matrix().as_mat())?;
    let phases: Vec<C64> = e.iter().map(|&x| C64::from_polar(1.0, -x * t)).collect();
    let u = linalg::sandwich(&v, &phases, &v.adjoint().to_owned());
    let chi = &(&u * chi0.as_mat()) * u.adjoint();
    Ok(CorrelationMatrix::from_unchecked(NambuMatrix::new(linalg::hermitian_part(&chi))?))
}

/// Fermi function `n_F(ε) = 1/(e^{β(ε−μ)} + 1)` with `β = ∞` allowed.
fn fermi(beta: f64, e: f64) -> f64 {
    let x = beta * e;
    if x.is_nan() {
        0.5
    } else if x >= 0.0 {
        let ex = (-x).exp();
        ex / (1.0 + ex)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Comparison of the master equation against the discretized-bath oracle.
#[derive(Clone, Debug)]
pub struct BathReport {
    /// `(t, max |χ_oracle − χ_master|)`
    pub rows: Vec<(f64, f64)>,
    pub max_deviation: f64,
    pub recurrence_time: f64,
    /// Set when the grid reaches half the recurrence time, past which the
    /// finite bath is no longer a faithful reservoir.
    pub recurrence_warning: bool,
    pub total_modes: usize,
}

struct Channel {
    vector: Vec<C64>,
    amplitude: f64,
    beta: f64,
    mu: f64,
}

/// Single-particle Hamiltonian of system plus bath channels and the initial
/// particle-block correlation `⟨c c†⟩` of the baths. Each reservoir
/// contributes one channel per nonzero eigenvalue of `Γ_ν`.
fn assemble(model: &QuadraticModel, bath: &DiscretizedBath) -> Result<(usize, CMat, Vec<f64>, Vec<Channel>)> {
    let n = model.n();
    let mut channels = Vec::new();
    for r in model.reservoirs() {
        let (vals, vecs) = linalg::eigh(r.gamma().particle_block())?;
        for (a, &g) in vals.iter().enumerate() {
            if g > 1e-14 {
                channels.push(Channel {
                    vector: (0..n).map(|i| vecs[(i, a)]).collect(),
                    amplitude: bath.amplitude(g),
                    beta: r.beta(),
                    mu: r.mu(),
                });
            }
        }
    }
    let total = n + channels.len() * bath.modes;
    if total > MAX_MODES {
        return Err(Error::InvalidParameter(format!("{total} modes exceed the oracle cap of {MAX_MODES}")));
    }
    let levels = bath.levels();
    let h = model.hamiltonian().h();
    let mut ht = linalg::zeros(total);
    for i in 0..n {
        for j in 0..n {
            ht[(i, j)] = h[(i, j)];
        }
    }
    let mut bath_diag = Vec::with_capacity(total - n);
    for (ch, chan) in channels.iter().enumerate() {
        for (k, &e) in levels.iter().enumerate() {
            let b = n + ch * bath.modes + k;
            ht[(b, b)] = c(e, 0.0);
            for i in 0..n {
                let v = chan.vector[i] * chan.amplitude;
                ht[(i, b)] += v;
                ht[(b, i)] += v.conj();
            }
            bath_diag.push(1.0 - fermi(chan.beta, e - chan.mu));
        }
    }
    Ok((total, ht, bath_diag, channels))
}

/// Evolves system and discretized baths exactly and compares the reduced
/// system state with the master equation on `grid`.
///
/// Models without pairing terms are evolved in the particle sector alone;
/// otherwise the full Nambu problem is propagated.
pub fn bath_benchmark(model: &QuadraticModel, chi0: &CorrelationMatrix, bath: &DiscretizedBath, grid: &[f64]) -> Result<BathReport> {
    let n = model.n();
    if chi0.n() != n {
        return Err(Error::Dimension { expected: 2 * n, found: 2 * chi0.n() });
    }
    let system = OpenSystem::new(model.clone())?;
    let traj = system.evolve(chi0, grid, &EvolveOptions::default())?;
    let (total, ht, bath_diag, _) = assemble(model, bath)?;
    let delta = model.hamiltonian().delta();
    let block_chi0 = chi0.matrix().is_block_diagonal();
    let particle_only = linalg::max_abs(&delta) == 0.0 && block_chi0;

    // Generator and initial state in whichever representation is used.
    let (gen, init, rows) = if particle_only {
        let chi_pp = chi0.matrix().block(crate::nambu::Sector::Particle, crate::nambu::Sector::Particle);
        let init = Mat::from_fn(total, total, |i, j| {
            if i < n && j < n {
                chi_pp[(i, j)]
            } else if i == j {
                c(bath_diag[i - n], 0.0)
            } else {
                ZERO
            }
        });
        (ht, init, n)
    } else {
        let big = Mat::from_fn(2 * total, 2 * total, |i, j| {
            let (si, sj) = (i / total, j / total);
            let (a, b) = (i % total, j % total);
            match (si, sj) {
                (0, 0) => ht[(a, b)],
                (1, 1) => -ht[(b, a)],
                (0, 1) if a < n && b < n => delta[(a, b)],
                (1, 0) if a < n && b < n => delta[(b, a)].conj(),
                _ => ZERO,
            }
        });
        let x = chi0.as_mat();
        let init = Mat::from_fn(2 * total, 2 * total, |i, j| {
            let (si, sj) = (i / total, j / total);
            let (a, b) = (i % total, j % total);
            if a < n && b < n {
                x[(si * n + a, sj * n + b)]
            } else if i == j {
                let occ_c = bath_diag[a - n];
                c(if si == 0 { occ_c } else { 1.0 - occ_c }, 0.0)
            } else {
                ZERO
            }
        });
        (big, init, 2 * n)
    };
    let (e, v) = linalg::eigh(&gen)?;
    let d = gen.nrows();
    // rows of V that belong to the system, in Nambu order
    let sys_index = |r: usize| if particle_only || r < n { r } else { total + (r - n) };
    let v_sys = Mat::from_fn(rows, d, |r, k| v[(sys_index(r), k)]);
    let vh_init_v = &(v.adjoint() * &init) * &v;
    let mut out = Vec::with_capacity(grid.len());
    let mut worst = 0.0f64;
    for (idx, &t) in grid.iter().enumerate() {
        let a = Mat::from_fn(rows, d, |r, k| v_sys[(r, k)] * C64::from_polar(1.0, -e[k] * t));
        let sys = &(&a * &vh_init_v) * a.adjoint();
        let chi_sys = if particle_only {
            let mut full = linalg::zeros(2 * n);
            for i in 0..n {
                for j in 0..n {
                    full[(i, j)] = sys[(i, j)];
                    full[(n + i, n + j)] = if i == j { ONE } else { ZERO } - sys[(j, i)];
                }
            }
            full
        } else {
            sys
        };
        let dev = linalg::max_abs_diff(&chi_sys, traj.states[idx].as_mat());
        worst = worst.max(dev);
        out.push((t, dev));
    }
    let t_max = grid.iter().copied().fold(0.0, f64::max);
    Ok(BathReport {
        rows: out,
        max_deviation: worst,
        recurrence_time: bath.recurrence_time(),
        recurrence_warning: t_max >= 0.5 * bath.recurrence_time(),
        total_modes: total,
    })
}

/// Exact many-body representation of `n` fermionic modes (Jordan–Wigner,
/// basis state bit `i` = occupation of mode `i`).
pub struct FockSpace {
    n: usize,
    annihilators: Vec<CMat>,
}

impl FockSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_FOCK_MODES {
            return Err(Error::InvalidParameter(format!("Fock oracle supports 1..={MAX_FOCK_MODES} modes, got {n}")));
        }
        let dim = 1usize << n;
        let annihilators = (0..n)
            .map(|i| {
                Mat::from_fn(dim, dim, |row, col| {
                    // c_i |col⟩ = sign |col − 2^i⟩ if mode i is occupied
                    if col & (1 << i) != 0 && row == col ^ (1 << i) {
                        let parity = (col & ((1 << i) - 1)).count_ones();
                        c(if parity % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
                    } else {
                        ZERO
                    }
                })
            })
            .collect();
        Ok(Self { n, annihilators })
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    /// `C_i`: `c_i` for `i < n`, `c_{i−n}†` otherwise.
    pub fn nambu_operator(&self, i: usize) -> CMat {
        if i < self.n {
            self.annihilators[i].clone()
        } else {
            self.annihilators[i - self.n].adjoint().to_owned()
        }
    }

    /// `½ C† A C`.
    pub fn quadratic(&self, a: &NambuMatrix) -> Result<CMat> {
        if a.n() != self.n {
            return Err(Error::Dimension { expected: 2 * self.n, found: a.dim() });
        }
        let dim = 1usize << self.n;
        let ops: Vec<CMat> = (0..2 * self.n).map(|i| self.nambu_operator(i)).collect();
        let mut out = linalg::zeros(dim);
        let m = a.as_mat();
        for i in 0..2 * self.n {
            for j in 0..2 * self.n {
                let w = m[(i, j)];
                if w != ZERO {
                    let prod = ops[i].adjoint() * &ops[j];
                    out = &out + &linalg::scale(&prod, 0.5 * w);
                }
            }
        }
        Ok(out)
    }

    /// `e^{−½C†ΩC}/Z`.
    pub fn gibbs(&self, omega: &NambuMatrix) -> Result<CMat> {
        let q = self.quadratic(omega)?;
        let (vals, _) = linalg::eigh(&q)?;
        let shift = vals.first().copied().unwrap_or(0.0);
        let rho = linalg::hermitian_function(&q, |x| c((-(x - shift)).exp(), 0.0))?;
        let z = linalg::trace(&rho);
        Ok(linalg::scale(&rho, 1.0 / z))
    }

    /// `χ_ij = tr(ρ C_i C_j†)`.
    pub fn correlation(&self, rho: &CMat) -> CMat {
        let ops: Vec<CMat> = (0..2 * self.n).map(|i| self.nambu_operator(i)).collect();
        Mat::from_fn(2 * self.n, 2 * self.n, |i, j| linalg::trace(&(rho * &(&ops[i] * ops[j].adjoint()))))
    }

    pub fn expectation(&self, rho: &CMat, op: &CMat) -> C64 {
        linalg::trace(&(rho * op))
    }

    /// `c_m† c_m`.
    pub fn number(&self, m: usize) -> CMat {
        self.annihilators[m].adjoint() * &self.annihilators[m]
    }
}
