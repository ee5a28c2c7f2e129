use thiserror::Error;

use crate::coalition::lp::LpError;
use crate::network::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid network: {}", join_violations(.0))]
    InvalidNetwork(Vec<Violation>),

    #[error("unknown area `{0}`")]
    UnknownArea(String),

    #[error("unknown link `{0}`")]
    UnknownLink(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("bid of area `{area}` is {value} at the default allocation, expected 0")]
    DefaultNotZero { area: String, value: f64 },

    #[error("bid of area `{area}` has no entry for tuple {tuple:?}")]
    TupleNotInDomain { area: String, tuple: Vec<f64> },

    #[error("value {value} is not on the grid of link `{link}`")]
    OffGrid { link: String, value: f64 },

    #[error("bid of area `{area}` lists tuple {tuple:?} twice")]
    DuplicateEntry { area: String, tuple: Vec<f64> },

    #[error("bid of area `{area}` refers to link `{link}` which is not incident to it")]
    NonIncidentLink { area: String, link: String },

    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("no bid for area `{0}`")]
    MissingBid(String),

    #[error("profile does not match network/grid: {0}")]
    ProfileMismatch(String),

    #[error("no feasible allocation")]
    NoFeasibleAllocation,

    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),

    #[error("utility vector is not in the least core (worst violation {violation:.3e})")]
    NotInLeastCore { violation: f64 },

    #[error("network is not a star")]
    NotAStar,

    #[error("{n} areas exceed the coalition enumeration limit of {limit}")]
    TooManyAreas { n: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Stable short code, used in scenario diagnostics and across the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidNetwork(v) => v.first().map_or("invalid-network", Violation::code),
            Error::UnknownArea(_) => "unknown-area",
            Error::UnknownLink(_) => "unknown-link",
            Error::InvalidGrid(_) => "invalid-grid",
            Error::DefaultNotZero { .. } => "default-not-zero",
            Error::TupleNotInDomain { .. } => "tuple-not-in-domain",
            Error::OffGrid { .. } => "off-grid",
            Error::DuplicateEntry { .. } => "duplicate-entry",
            Error::NonIncidentLink { .. } => "non-incident-link",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::MissingBid(_) => "missing-bid",
            Error::ProfileMismatch(_) => "profile-mismatch",
            Error::NoFeasibleAllocation => "no-feasible-allocation",
            Error::Lp(_) => "lp-failure",
            Error::NotInLeastCore { .. } => "not-in-least-core",
            Error::NotAStar => "not-a-star",
            Error::TooManyAreas { .. } => "too-many-areas",
            Error::InvalidArgument(_) => "invalid-argument",
        }
    }
}
