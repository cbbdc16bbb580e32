//! Error type shared by the whole pipeline.

use thiserror::Error;

/// Errors raised by the lattice machinery, the codec, and the identifier.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had a different size than the operation requires.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// An input contained NaN or an infinity.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A configuration value violated its documented constraints.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The vectors at hand span fewer than `ambient_dim` dimensions, so some
    /// coefficients cannot be identified (e.g. a transform coefficient
    /// quantized to zero in every observed block).
    #[error(
        "rank-deficient input: rank {rank} < ambient dimension {ambient_dim} \
         ({} unidentifiable dimension(s))",
        ambient_dim - rank
    )]
    RankDeficient { ambient_dim: usize, rank: usize },

    /// The basis merge did not settle within its iteration cap. This cannot
    /// happen on noiseless lattice data with sane tolerances; it signals a
    /// tolerance misconfiguration or off-lattice input.
    #[error(
        "merge failed to converge after {swaps} of {cap} allowed swaps \
         (last max fractional part {max_fractional:.3e}, \
         basis covolume {covolume:.3e})"
    )]
    NonConvergence {
        swaps: usize,
        cap: usize,
        max_fractional: f64,
        covolume: f64,
    },

    /// An observation file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Underlying I/O failure, with the offending path in the message.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
