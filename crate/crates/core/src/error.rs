use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {msg}")]
    Syntax { offset: usize, msg: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    #[error("evaluation domain error: {0}")]
    EvalDomain(String),

    #[error("z = {z} outside domain [{lo}, {hi}]")]
    OutOfDomain { z: f64, lo: f64, hi: f64 },

    #[error("invalid sample table: {0}")]
    InvalidTable(String),

    #[error("quadrature did not converge on [{a}, {b}]")]
    NonConvergence { a: f64, b: f64 },

    #[error("invalid bracket [{a}, {b}]: f(a) = {fa}, f(b) = {fb}")]
    InvalidBracket { a: f64, b: f64, fa: f64, fb: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("trajectory left the guard interval at t = {t} (z = {z})")]
    BlowUp { t: f64, z: f64 },

    #[error("bang authority c = {c} cannot reach z_f")]
    CTooSmall { c: f64 },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("cross-check failed for {what}: {a} vs {b}")]
    CrossCheck { what: String, a: f64, b: f64 },

    #[error("the T = T_Gamma branch needs the horizontal drift profile b")]
    MissingB,

    #[error("drift a0 must be positive on [0, z_f] (min found {min})")]
    NonPositiveDrift { min: f64 },

    #[error("drift decomposition failed: omega(curve tangent) vanishes at s = {s}")]
    NotTransverse { s: f64 },

    #[error("not a Martinet point: |d omega(X1, X2)| = {alpha}")]
    NotMartinet { alpha: f64 },

    #[error("frame precondition violated: {0}")]
    Frame(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("arc 2 lost the sign of z (z = {z})")]
    ArcSignLoss { z: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("kappa values must be positive (got {0})")]
    NonPositiveKappa(f64),

    #[error("configuration mismatch: {0}")]
    ConfigurationMismatch(String),
}

impl Error {
    /// True for errors caused by flat a0/alpha level sets.
    pub fn is_degeneracy(&self) -> bool {
        matches!(self, Error::Degenerate(_))
    }
}
