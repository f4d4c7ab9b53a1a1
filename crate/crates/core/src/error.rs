use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("effective channel of user {user} is zero")]
    ZeroChannel { user: usize },

    #[error("effective channel matrix is rank deficient (K = {users}, M = {antennas}, condition ratio {ratio:.3e})")]
    RankDeficient { users: usize, antennas: usize, ratio: f64 },

    #[error("allocation counts sum to {sum}, expected {expected}")]
    CountMismatch { sum: usize, expected: usize },

    #[error("phase update requires a complete allocation; {remaining} element(s) still in the pool")]
    PoolNotEmpty { remaining: usize },

    #[error("oracle search space of {levels}^{elements} configurations exceeds the {max_bits}-bit limit")]
    SearchSpaceTooLarge {
        levels: usize,
        elements: usize,
        max_bits: u32,
    },

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error at {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }
}
