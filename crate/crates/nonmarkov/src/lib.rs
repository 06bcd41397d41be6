//! Exact time-local master equations for quadratic fermionic systems coupled
//! to wide-band reservoirs.
//!
//! The state of a Gaussian system of `n` modes is its correlation matrix
//! `χ = ⟨C C†⟩` in Nambu space (see [`nambu`]). Coupling to reservoirs gives
//! the linear evolution `∂_t χ = −iKχ + iχK† + N(t)` with the non-Hermitian
//! generator `K = H_c − iΓ` and a time-dependent noise matrix `N(t)` whose
//! eigenvalues are the decoherence rates. Negative rates signal
//! non-Markovian dynamics.
//!
//! ```
//! use nonmarkov::models::{tight_binding_chain, Lead, TightBindingSpec};
//! use nonmarkov::dynamics::OpenSystem;
//!
//! let spec = TightBindingSpec {
//!     sites: 4,
//!     gamma_left: 0.4,
//!     gamma_right: 0.2,
//!     left: Lead::zero_temperature(0.5),
//!     right: Lead::zero_temperature(-0.5),
//! };
//! let system = OpenSystem::new(tight_binding_chain(&spec).unwrap()).unwrap();
//! let rates = system.rates(2.0).unwrap();
//! assert!(rates.non_markovianity() >= 0.0);
//! ```

// Reference values are frozen with all the digits they were computed with,
// and `!(x > 0.0)` is the idiom used to reject NaN along with bad values.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod models;
pub mod nambu;
pub mod observables;
pub mod oracle;
pub mod steadystate;

pub use error::{Error, Result};
