//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Infinite product hit its term cap before the tail bound was met.
    #[error("q-Pochhammer product did not converge: tail bound {bound:.3e} > eps {eps:.3e} after {max_terms} terms")]
    ProductNonConvergent {
        max_terms: u32,
        bound: f64,
        eps: f64,
    },

    /// Intermediate product magnitude left the representable range.
    #[error("q-Pochhammer product overflowed at |z| = {arg_abs:.3e}")]
    ProductOverflow { arg_abs: f64 },

    /// A denominator Pochhammer evaluated to zero (argument on the pole ladder).
    #[error("zero denominator: ({arg_re:+.6e}{arg_im:+.6e}i; q)_inf vanishes")]
    ZeroDenominator { arg_re: f64, arg_im: f64 },

    /// A denominator argument lies within the guard distance of a pole.
    #[error("pole proximity: argument {arg_re:+.6e}{arg_im:+.6e}i within {delta:.2e} of pole ladder point q^-{ladder_r}")]
    PoleProximity {
        arg_re: f64,
        arg_im: f64,
        delta: f64,
        ladder_r: i64,
    },

    /// The contour admissibility check failed; message lists offending poles.
    #[error("pole guard: {0}")]
    PoleGuard(String),

    /// The symmetric m-window hit its cap before the two-shell rule was met.
    #[error("Z-sum tail did not converge within window |m| <= {window}; last shell {last_shell:.3e} vs scale {scale:.3e}")]
    TailNonConvergent {
        window: i64,
        last_shell: f64,
        scale: f64,
    },

    /// Grid doubling never brought successive estimates within quad_eps.
    #[error("quadrature did not stabilize: |delta| = {delta:.3e} relative at K = {nodes}")]
    QuadratureNonConvergent { nodes: u32, delta: f64 },

    /// Rejection sampling gave up.
    #[error("sampling exhausted after {attempts} attempts")]
    SamplingExhausted { attempts: u32 },

    /// Bad run configuration (CLI flags or config file).
    #[error("configuration error: {0}")]
    Config(String),

    /// I/O failure, with the path that caused it.
    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },

    /// Report (de)serialization failure.
    #[error("report format error: {0}")]
    Format(String),
}

impl Error {
    /// True for errors that mean "this configuration is outside the
    /// admissible region", as opposed to a numerical failure.
    pub fn is_rejection(&self) -> bool {
        matches!(
            self,
            Error::PoleGuard(_) | Error::PoleProximity { .. } | Error::ZeroDenominator { .. }
        )
    }

    /// True for errors that mean "the numerics did not settle at the
    /// configured truncation policy".
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            Error::ProductNonConvergent { .. }
                | Error::ProductOverflow { .. }
                | Error::TailNonConvergent { .. }
                | Error::QuadratureNonConvergent { .. }
        )
    }
}
