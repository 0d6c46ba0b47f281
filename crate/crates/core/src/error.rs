use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for {len} factors")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("lattice too large for dense treatment: dimension 2^{qubits}")]
    LatticeTooLarge { qubits: usize },

    #[error("indeterminate syndrome: stabilizer {index} has expectation {value:.6}")]
    IndeterminateSyndrome { index: usize, value: f64 },

    #[error("non-cyclic evolution: |<in|out>| = {0:.6}")]
    NonCyclic(f64),

    #[error("pulse sequence error: {0}")]
    Sequence(String),

    #[error("time step {dt:.3e} s exceeds limit {limit:.3e} s")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("unphysical noise on qubit {qubit}: t2eff {t2eff:.3e} s > 2*t1 {two_t1:.3e} s")]
    UnphysicalNoise { qubit: usize, t2eff: f64, two_t1: f64 },

    #[error("integration unstable: trace drifted by {0:.3e}")]
    TraceDrift(f64),

    #[error("calibration target {target:.4} unreachable within [{low:.4}, {high:.4}]")]
    Unreachable { target: f64, low: f64, high: f64 },

    #[error("fidelity is not monotone in t2eff over the bracket: {0}")]
    NonMonotone(String),

    #[error("unknown gate label: {0}")]
    UnknownGate(String),

    #[error("missing tomography setting {0}")]
    MissingSetting(String),

    #[error("degenerate design matrix: {0}")]
    Degenerate(String),

    #[error("backend failure at gamma index {index}: {source}")]
    AtGamma {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
