use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("category document is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("conjugation is not an involution: conj(conj({label})) = {image}")]
    NonInvolutiveConj { label: String, image: String },

    #[error("unit constraint violated at N[{gamma}][{beta}][{alpha}] = {found}, expected {expected}")]
    UnitConstraint {
        gamma: String,
        beta: String,
        alpha: String,
        found: u32,
        expected: u32,
    },

    #[error("Frobenius reciprocity violated at (gamma, beta, alpha) = ({gamma}, {beta}, {alpha}): {detail}")]
    Frobenius {
        gamma: String,
        beta: String,
        alpha: String,
        detail: String,
    },

    #[error("fusion ring is not associative at (a, b, c, g) = ({a}, {b}, {c}, {g}): {lhs} != {rhs}")]
    Associativity {
        a: String,
        b: String,
        c: String,
        g: String,
        lhs: u64,
        rhs: u64,
    },

    #[error("dimension data inconsistent: {0}")]
    Dimensions(String),

    #[error("invalid lambda assignment: {0}")]
    Lambda(String),

    #[error("Fock basis would exceed the cap of {cap} paths (degree {degree} alone reaches {count})")]
    BasisCap { cap: usize, degree: usize, count: usize },

    #[error("vectors do not compose: {0}")]
    NotComposable(String),

    #[error("depth {depth} is too small for an exact evaluation of a word of length {length}")]
    DepthTooSmall { depth: usize, length: usize },

    #[error("path {0} is missing from the Fock basis")]
    MissingPath(String),

    #[error("non-crossing pairing cap exceeded: n = {n}, cap = {cap}")]
    PairingCap { n: usize, cap: usize },

    #[error("numerical integration disagrees with the analytic moment m_{k}: {numeric} vs {analytic}")]
    Integration { k: usize, numeric: f64, analytic: f64 },

    #[error("freeness groups overlap on basis vector {0}")]
    GroupOverlap(String),

    #[error("word is not alternating at position {0}")]
    NotAlternating(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
