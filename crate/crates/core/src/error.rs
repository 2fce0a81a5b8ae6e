use thiserror::Error;

/// Errors raised by the simulator and the calibration estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RhevError {
    #[error("invalid array: {0}")]
    InvalidArray(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "harmonic order {order} cannot be represented with {samples_per_period} samples per period"
    )]
    Aliasing {
        order: i32,
        samples_per_period: usize,
    },

    #[error("degenerate power curve: the test channel contributes no variation")]
    DegenerateCurve,

    #[error("dead channel: measured harmonic power is zero")]
    DeadChannel,

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("channel {channel}: {source}")]
    Channel {
        channel: usize,
        #[source]
        source: Box<RhevError>,
    },
}

impl RhevError {
    pub(crate) fn at_channel(self, channel: usize) -> Self {
        RhevError::Channel {
            channel,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, RhevError>;
