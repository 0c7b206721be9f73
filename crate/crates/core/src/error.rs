use thiserror::Error;

/// Errors surfaced by the game library.
#[derive(Debug, Error)]
pub enum GameError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("parameter role mismatch: {0}")]
    Role(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("selection constraint violated: |w|_1 = {ones}, expected K = {k}")]
    Constraint { ones: usize, k: usize },

    #[error("rejection envelope violated: ratio/M = {ratio_over_m} > 1")]
    Envelope { ratio_over_m: f64 },

    #[error("brute-force guard exceeded: N = {n}, K = {k} (limits N <= 20, K <= 5)")]
    SizeGuard { n: usize, k: usize },

    #[error("unsupported dimension {0} for plotting (need 2)")]
    UnsupportedDimension(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GameError>;
