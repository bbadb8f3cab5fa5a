use thiserror::Error;

/// Errors produced by network ingestion, validation and the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    /// A row of an input file failed to parse.
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    /// The parsed network violates a structural invariant (cycle, duplicate
    /// feed, disconnected bus, ...).
    #[error("structural error at line {line}: {reason}")]
    Structure { line: usize, reason: String },

    /// A bus id outside the network was referenced.
    #[error("unknown bus id {0}")]
    UnknownBus(usize),

    /// The substation root has no upstream impedance, so its short-circuit
    /// power is unbounded. Signalled distinctly so callers can treat root
    /// placements as forbidden or exempt.
    #[error("bus {0} is the substation root: short-circuit power is unbounded")]
    RootBus(usize),

    /// A placement vector does not fit the network or catalog.
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),

    /// A capacitor catalog violates its ordering invariants.
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),

    /// A solver or experiment configuration value is out of range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
