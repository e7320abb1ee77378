use alloc::string::String;
use core::fmt;

/// Errors surfaced by the fallible operations in this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A dimension disagreed with what the receiving structure expects.
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A precondition on how the API must be used was violated.
    Contract(String),
    /// Input values were structurally fine but numerically unusable.
    Data(String),
    /// A batch loss evaluated to NaN or infinity during training.
    NonFiniteLoss { epoch: usize, batch: usize },
    /// A parameter gradient in the given layer (0 = first hidden layer)
    /// evaluated to NaN or infinity.
    NonFiniteGradient { layer: usize },
    /// Exact tree extraction was asked to enumerate more split levels than
    /// the configured ceiling allows.
    TreeTooLarge { levels: usize, max: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                what,
                expected,
                got,
            } => write!(f, "shape mismatch for {what}: expected {expected}, got {got}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Data(msg) => write!(f, "bad data: {msg}"),
            Error::NonFiniteLoss { epoch, batch } => {
                write!(f, "loss became non-finite at epoch {epoch}, batch {batch}")
            }
            Error::NonFiniteGradient { layer } => {
                write!(f, "non-finite gradient in layer {layer}")
            }
            Error::TreeTooLarge { levels, max } => write!(
                f,
                "exact tree extraction would enumerate {levels} split levels, ceiling is {max}"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
