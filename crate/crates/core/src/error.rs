use thiserror::Error;

/// Errors produced by graph analysis, the leader LP, the learners and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("transition graph is not strongly connected: state {to} unreachable from state {from}")]
    NotStronglyConnected { from: usize, to: usize },

    #[error("MDP is not communicating: state {to} unreachable from state {from}")]
    NotCommunicating { from: usize, to: usize },

    #[error("{what} exceeded cap of {cap}")]
    CapExceeded { what: &'static str, cap: usize },

    #[error("no path of length {length} from state {from} to state {to}")]
    NoPath { from: usize, to: usize, length: usize },

    #[error("no closed walk of length {k} through state {start}")]
    Infeasible { start: usize, k: usize },

    #[error("walk decomposition failed at position {position}: no edge with positive weight")]
    DecompositionFailed { position: usize },

    #[error("no feasible closed walk for any (start, length) pair")]
    NoExpert,

    #[error("MDP has no state with a deterministic self-loop action")]
    AssumptionViolated,

    #[error("start distribution mass {min_mass} is below exploring-starts level {alpha}")]
    ExploringStartsViolated { min_mass: f64, alpha: f64 },

    #[error("catching routine did not terminate within {cap} iterations")]
    NonTermination { cap: usize },

    #[error("bad instance shape: {0}")]
    BadShape(String),

    #[error("degenerate regression: {0}")]
    DegenerateFit(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid loss: {0}")]
    InvalidLoss(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
