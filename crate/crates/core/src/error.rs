use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series caps do not match: {0}")]
    CapMismatch(String),
    #[error("term ({l1},{l2};{k1},{k2}) violates the parity lattice")]
    ParityViolation { l1: u8, l2: u8, k1: i8, k2: i8 },
    #[error("negative action {0} under a square root")]
    NegativeAction(f64),
    #[error("reality invariant violated: imaginary residue {residue:e} above {scale:e}")]
    RealityViolation { residue: f64, scale: f64 },
    #[error("small divisor |k.omega| = {value:e} at k = ({k1},{k2}) below floor {floor:e}")]
    SmallDivisor { k1: i32, k2: i32, value: f64, floor: f64 },
    #[error("quadratic part is not elliptic: {0}")]
    NonElliptic(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("chart mismatch: expected {expected}, got {got}")]
    ChartMismatch { expected: String, got: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
