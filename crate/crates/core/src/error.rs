use thiserror::Error;

/// Errors produced anywhere in the emulation, receiver and localization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("advertising payload is {len} bytes, at most {max} allowed")]
    PayloadTooLong { len: usize, max: usize },

    #[error("invalid iBeacon identity: {0}")]
    InvalidIdentity(String),

    #[error("invalid advertising channel index {0}, expected 37, 38 or 39")]
    InvalidChannel(u8),

    #[error("malformed packet: {0}")]
    MalformedPacket(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("multilateration needs at least 3 anchors, got {0}")]
    InsufficientAnchors(usize),

    #[error("anchors are collinear, no unique 2-D fix")]
    DegenerateGeometry,

    #[error("fingerprint database is empty")]
    EmptyDatabase,

    #[error("unknown beacon id {0:?}")]
    UnknownBeacon(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
