use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors produced by the DSP core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated an operation's precondition.
    InvalidParameter(String),
    /// A combination of rates or sizes cannot be realized (e.g. a non-integer
    /// resampling factor).
    Configuration(String),
    /// An interpolation neighborhood fell outside the sample buffer.
    Boundary { index: i64, len: usize },
    /// Input signal has zero power where a power reference is needed.
    ZeroPower,
    /// Two sequences that must be aligned have different lengths.
    LengthMismatch { left: usize, right: usize },
    /// The timing loop received a non-finite error or produced a non-finite
    /// state.
    LoopFault { block: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Configuration(msg) => write!(f, "configuration error: {msg}"),
            Error::Boundary { index, len } => {
                write!(
                    f,
                    "interpolation index {index} out of range for buffer of {len} samples"
                )
            }
            Error::ZeroPower => f.write_str("input has zero power"),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::LoopFault { block } => write!(f, "timing loop fault at block {block}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! param_err {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidParameter(alloc::format!($($arg)*))
    };
}
pub(crate) use param_err;
