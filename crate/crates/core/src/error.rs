use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{users} users exceed the exact-enumeration limit of {max}")]
    Capacity { users: usize, max: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("receive filter of user {0} has zero magnitude")]
    ZeroFilter(usize),

    #[error("beam of user {0} is (numerically) orthogonal to its channel")]
    DegenerateBeam(usize),

    #[error("column {0} of the direction matrix is not unit norm")]
    NonUnitColumn(usize),

    #[error("channel of user {0} has zero norm")]
    ZeroNorm(usize),

    #[error("channel matrix is rank deficient")]
    RankDeficient,

    #[error("{users} users cannot be served by {antennas} antennas with this precoder")]
    TooManyUsers { users: usize, antennas: usize },

    #[error("no receive filter of user {0} avoids the error floor")]
    FloorUnavoidable(usize),

    #[error("no feasible starting point found after {0} attempts")]
    InfeasibleStart(usize),

    #[error("objective evaluated to a non-finite value")]
    NonFinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed CSV input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
