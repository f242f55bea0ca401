use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A Laplace-transform argument lies on a branch cut.
    #[error("argument {arg} lies on the branch cut (-inf, {cut_start}]")]
    BranchCut { arg: String, cut_start: f64 },

    /// A disk-limited series was asked for a value outside its disk.
    #[error("series argument with modulus {modulus} is outside the convergence disk")]
    OutsideDisk { modulus: f64 },

    /// A convergent series would lose too many digits to cancellation.
    #[error("series cancellation: largest term {largest_term:e} against sum {sum:e}")]
    PrecisionLoss { largest_term: f64, sum: f64 },

    /// The requested combination is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical routine did not reach its tolerance.
    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: &'static str, detail: String },

    /// Moment conditions admit no solution.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical { context, detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
