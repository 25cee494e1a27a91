use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("not definite: clause has {positives} positive literals")]
    NotDefinite { positives: usize },

    #[error("ill-formed metarule: {0}")]
    IllFormed(String),

    #[error("order too high: {0}")]
    OrderTooHigh(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("reserved symbol `{0}` used at the object level")]
    ReservedSymbol(String),

    #[error("wrong taxon: expected {expected}, found {found}")]
    WrongTaxon { expected: String, found: String },

    #[error("non-ground input: {0}")]
    NonGround(String),

    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("unknown metarule `{0}`")]
    UnknownMetarule(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("enumeration refused: projected count {projected} exceeds the guard of {guard}")]
    GuardExceeded { projected: u128, guard: u128 },

    #[error("invention depth exceeded")]
    InventionDepthExceeded,
}

pub type Result<T> = std::result::Result<T, Error>;
