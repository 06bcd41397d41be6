use thiserror::Error;

/// Everything that can go wrong in the library.
///
/// Variants fall in two families: [`Error::is_input`] marks malformed or
/// inconsistent input, everything else is a numerical failure.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("symmetry violation: {condition} (max violation {violation:.3e})")]
    Symmetry { condition: &'static str, violation: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error("near-defective matrix: eigenvector condition estimate {condition:.3e} exceeds {threshold:.1e}")]
    Defective { condition: f64, threshold: f64 },

    #[error("quadrature did not converge (achieved error estimate {estimate:.3e}, requested {requested:.1e})")]
    Quadrature { estimate: f64, requested: f64 },

    #[error("reservoir {reservoir}: {source}")]
    Reservoir { reservoir: usize, source: Box<Error> },

    #[error("no steady state: mode with eigenvalue {re:.6e}{im:+.6e}i couples to a reservoir but does not decay")]
    NoSteadyState { re: f64, im: f64 },

    #[error("ill-conditioned steady state: min |lambda_b - conj(lambda_c)| = {min_gap:.3e}")]
    IllConditionedSteadyState { min_gap: f64 },

    #[error("steady-state residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("invariant '{what}' violated at t = {t}: defect {defect:.3e}")]
    InvariantViolation { what: &'static str, t: f64, defect: f64 },

    #[error("expectation value has imaginary residue {0:.3e}")]
    ImaginaryResidue(f64),

    #[error("quantity is not conserved inside the partition: commutator norm {0:.3e}")]
    NotConserved(f64),

    #[error("insufficient points for a decay fit: found {found}, need {needed}")]
    InsufficientPoints { found: usize, needed: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    /// True when the error points at bad input rather than a numerical
    /// breakdown.
    pub fn is_input(&self) -> bool {
        match self {
            Error::Dimension { .. }
            | Error::Symmetry { .. }
            | Error::NonFinite(_)
            | Error::InvalidParameter(_)
            | Error::IndexOutOfRange { .. }
            | Error::NotPositiveSemidefinite { .. }
            | Error::Parse { .. } => true,
            Error::Reservoir { source, .. } => source.is_input(),
            _ => false,
        }
    }

    pub(crate) fn in_reservoir(self, reservoir: usize) -> Error {
        Error::Reservoir { reservoir, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
