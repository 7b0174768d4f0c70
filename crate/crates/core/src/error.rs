use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "qubit {qubit} is out of range for a {n_qubits}-qubit register (valid: 1..={n_qubits})"
    )]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("qubit {0} is used more than once in a single gate")]
    DuplicateQubit(usize),

    #[error("gate payload is not unitary (deviation {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{requested} qubits exceeds the configured limit of {limit}")]
    TooManyQubits { requested: usize, limit: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("shot count must be at least 1")]
    ZeroShots,

    #[error("input vector is empty")]
    EmptyInput,

    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    #[error("segment starting at index {start} (length {len}) has zero norm")]
    ZeroNormBlock { start: usize, len: usize },

    #[error("complex amplitude at index {index} cannot be encoded by the real-valued encoder")]
    ComplexAmplitude { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "approximation at level q={level}, block {block} kept no component \
         (all {observed} observed amplitudes rounded to zero; increase chi)"
    )]
    NoSurvivingComponents {
        level: usize,
        block: usize,
        observed: usize,
    },

    #[error("both segment norms are zero at level q={level}, block {block}")]
    DegenerateFuse { level: usize, block: usize },

    #[error("objective returned a non-finite value {value} at theta = {theta:?}")]
    NonFiniteObjective { value: f64, theta: Vec<f64> },

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),

    #[error("malformed data at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("digit {0} does not occur in the dataset")]
    DigitAbsent(u8),

    #[error("split ratio {ratio} leaves the {side} set empty")]
    EmptySplit { ratio: f64, side: &'static str },

    #[error("malformed PGM: {0}")]
    MalformedPgm(String),

    #[error(
        "image is {width}x{height}; encoding needs power-of-two sides \
         (pad the image, e.g. to {padded_width}x{padded_height})"
    )]
    ImageNotPowerOfTwo {
        width: usize,
        height: usize,
        padded_width: usize,
        padded_height: usize,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed or inconsistent inputs, as opposed
    /// to failures of the numerical pipeline itself.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyInput
                | Error::InvalidEpsilon(_)
                | Error::InvalidParameter(_)
                | Error::InvalidLabel(_)
                | Error::MalformedRow { .. }
                | Error::DigitAbsent(_)
                | Error::EmptySplit { .. }
                | Error::EmptySampleSet
                | Error::MalformedPgm(_)
                | Error::ImageNotPowerOfTwo { .. }
                | Error::NotPowerOfTwo(_)
                | Error::DimensionMismatch { .. }
                | Error::TooManyQubits { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
