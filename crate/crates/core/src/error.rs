use crate::game::StateId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("game has no states")]
    EmptyGame,
    #[error("state {0} has no outgoing edge")]
    DanglingState(StateId),
    #[error("edge ({0}, {1}) references an unknown state")]
    BadEdge(StateId, StateId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(StateId, StateId),
    #[error("bad reward function: {0}")]
    BadReward(String),
    #[error("bad lasso: {0}")]
    BadLasso(String),
    #[error("bad objective: {0}")]
    BadObjective(String),
    #[error("unknown state {0}")]
    UnknownState(StateId),
    #[error("strategy scheme invalid: box pair (state {0}, memory {1}) is reachable but unconstrained")]
    SchemeInvalid(StateId, usize),
    #[error("pair (state {0}, memory {1}) lies outside the materialized scheme")]
    Unmaterialized(StateId, usize),
    #[error("objective is not achievable from state {0}")]
    NotWinning(StateId),
    #[error("positional strategy is inconsistent with the product game: {0}")]
    BadStrategy(String),
    #[error("affine shift does not produce non-negative rewards: {0}")]
    BadShift(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("arithmetic overflow: {0}")]
    Overflow(String),
    #[error("size cap exceeded: {0}")]
    TooLarge(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("n must be even (got {0})")]
    OddN(usize),
    #[error("clause {0} has more than three literals")]
    ClauseTooBig(usize),
    #[error("formula is malformed: {0}")]
    BadFormula(String),
    #[error("path is not an assignment path: {0}")]
    NotAssignmentPath(String),
    #[error("frequency vector is not a distribution: {0}")]
    NotDistribution(String),
    #[error("flow conservation fails at state {0}")]
    FlowViolation(StateId),
    #[error("support of the frequency vector is not strongly connected: {0}")]
    SupportNotScc(String),
    #[error("multigraph is not Eulerian: {0}")]
    NotEulerian(String),
    #[error("bad epsilon schedule: {0}")]
    BadSchedule(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
