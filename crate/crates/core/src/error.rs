use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spectral measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid triple: {0}")]
    InvalidTriple(String),

    #[error("invalid jump kernel: {0}")]
    InvalidKernel(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("lattice does not resolve the exponent at t={t}: |exp(-t psi(u_max))| = {tail:.3e}; try N >= {suggested_n}")]
    Resolution {
        t: f64,
        tail: f64,
        suggested_n: usize,
    },

    #[error("lattice extent too small: boundary value {boundary:.3e} exceeds {tolerance:.3e} at the largest admissible padding")]
    Extent { boundary: f64, tolerance: f64 },

    #[error("resolvent tail bound {bound:.3e} exceeds tolerance {tolerance:.3e}")]
    TailBound { bound: f64, tolerance: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("ledger has no entry for {0}")]
    MissingLedgerEntry(String),

    #[error("no lambda on the grid satisfies k_lambda < 1/2 (smallest value {best:.4}); enlarge the lambda range")]
    GridExhausted { best: f64 },

    #[error("contraction constant k_lambda = {k:.4} is not below 1/2")]
    Contraction { k: f64 },

    #[error("inadmissible exponents: {0}")]
    Inadmissible(String),

    #[error("state-jump rate {rate:.4e} exceeds the thinning envelope {envelope:.4e}")]
    ModelBound { rate: f64, envelope: f64 },

    #[error("step size too large: per-step jump probability {prob:.3} (must be < 0.1)")]
    StepSize { prob: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),
}
