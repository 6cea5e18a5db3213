use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: `{field}` {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine did not reach its tolerance. `estimate` is the best
    /// value available when it gave up.
    #[error("numeric failure in {routine}: {detail} (best estimate {estimate:e})")]
    Numeric {
        routine: &'static str,
        detail: String,
        estimate: f64,
    },

    #[error("degenerate channel: serving channel norm is zero")]
    DegenerateChannel,

    #[error("partition covers {partition} interferers but realization has {realization}")]
    PartitionMismatch {
        partition: usize,
        realization: usize,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
