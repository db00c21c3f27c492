use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: String, index: usize },

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("tail divergence{}: Re(beta + zeta) = {exponent_sum} must exceed 2", mode_suffix(*.mode))]
    TailDivergence { mode: Option<i64>, exponent_sum: f64 },

    #[error("missing tail model{}: |f(R_max)| = {last_value:e} is above the decay floor", mode_suffix(*.mode))]
    MissingTail { mode: Option<i64>, last_value: f64 },

    #[error("tail model does not match the last grid value (relative gap {gap:e})")]
    TailMismatch { gap: f64 },

    #[error("mu_0 = {mu0} is not above the critical value mu_crit = sqrt(48) = {:.12}", crate::mode_algebra::MU_CRIT)]
    Subcritical { mu0: f64 },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("mode cutoff mismatch: {0} vs {1}")]
    CutoffMismatch(usize, usize),

    #[error("{what}: zero mode must vanish, got {value}")]
    NonzeroZeroMode { what: String, value: String },

    #[error("field is not conjugate symmetric: imaginary residue {residue:e} at mode {mode}")]
    Asymmetric { mode: i64, residue: f64 },

    #[error("theta resolution M = {m} is below 2N+1 = {}", 2 * .n_max + 1)]
    InsufficientSampling { m: usize, n_max: usize },

    #[error("fixed point not converged after {iterations} iterations (last contraction factor {last_ratio:.3e}, residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        last_ratio: f64,
        residual: f64,
    },

    #[error("iteration blow-up, boundary data outside the contraction ball: norm {norm:.3e} exceeds 1e6 x initial {initial:.3e} at iteration {iteration}")]
    BlowUp {
        iteration: usize,
        norm: f64,
        initial: f64,
    },

    #[error("mu* root not bracketed in [{lo}, {hi}]: g(lo) = {g_lo:e}, g(hi) = {g_hi:e}")]
    NotBracketed {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    #[error("mu* matching did not converge after {iterations} evaluations (|g| = {residual:e})")]
    MatchNotConverged { iterations: usize, residual: f64 },
}

fn mode_suffix(mode: Option<i64>) -> String {
    match mode {
        Some(n) => format!(" in mode n = {n}"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a mode index to quadrature failures raised below the mode solvers.
    pub fn in_mode(self, n: i64) -> Self {
        match self {
            Error::TailDivergence { exponent_sum, .. } => Error::TailDivergence {
                mode: Some(n),
                exponent_sum,
            },
            Error::MissingTail { last_value, .. } => Error::MissingTail {
                mode: Some(n),
                last_value,
            },
            other => other,
        }
    }
}
