use std::fmt;

use crate::data::FitResult;

/// Constraint families of the sparsity-adaptive program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintFamily {
    /// `‖n⁻¹Zᵀ(t − Zγ)‖∞ ≤ η`
    Gradient,
    /// `‖t − Zγ‖∞ ≤ μ`
    Residual,
    /// `n⁻¹tᵀ(t − Zγ) ≥ ρ`
    InnerProduct,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintFamily::Gradient => "gradient (eta)",
            ConstraintFamily::Residual => "residual bound (mu)",
            ConstraintFamily::InnerProduct => "inner product (rho)",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {what} has {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("measurement error variance must be nonnegative, got {0}")]
    NegativeVariance(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("design matrix is singular (pivot ratio {pivot_ratio:.3e}, n = {n}, p = {p})")]
    SingularDesign { pivot_ratio: f64, n: usize, p: usize },
    #[error("matrix is not positive definite (failed at pivot {index})")]
    NotPositiveDefinite { index: usize },
    #[error("probability {0} outside (0, 1)")]
    DomainError(f64),
    #[error("coordinate descent did not converge after {} sweeps", .0.iterations)]
    DidNotConverge(Box<FitResult>),
    #[error("simplex pivot magnitude {0:.3e} below breakdown threshold")]
    NumericalBreakdown(f64),
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
    #[error("linear program is infeasible; violated constraint families: {}", join_families(.0))]
    InfeasibleProgram(Vec<ConstraintFamily>),
    #[error("linear program is unbounded")]
    UnboundedProgram,
    #[error("score variance estimate {0:.3e} is degenerate")]
    DegenerateVariance(f64),
    #[error("no grid point was accepted; widen the grid")]
    EmptyRegion,
    #[error("need at least 2 replicate measurements per subject, got {0}")]
    TooFewReplicates(usize),
    #[error("unknown simulation design `{0}`")]
    UnknownDesign(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_families(families: &[ConstraintFamily]) -> String {
    families
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
