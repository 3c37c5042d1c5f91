use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("{quantity} = {value} outside valid range [{min}, {max}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("differential group index is zero; gain envelope unbounded")]
    DegenerateDispersion,

    #[error("signal and idler free spectral ranges are equal; cluster spacing undefined")]
    DegenerateComb,

    #[error("unresolved comb: linewidth {linewidth_hz} Hz >= FSR {fsr_hz} Hz")]
    UnresolvedComb { linewidth_hz: f64, fsr_hz: f64 },

    #[error("no doubly resonant pair to select")]
    NoMode,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("window [{lo}, {hi}] s holds less than 99.99% of the density; use at least [{suggested_lo}, {suggested_hi}] s")]
    WindowTooSmall {
        lo: f64,
        hi: f64,
        suggested_lo: f64,
        suggested_hi: f64,
    },

    #[error("estimator undefined: {0}")]
    UndefinedEstimator(&'static str),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
