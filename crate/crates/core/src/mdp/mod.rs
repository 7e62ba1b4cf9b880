//! MDP domain types and the graph and probability analysis the learners rely on.

pub mod catching;
pub mod graph;
pub mod io;
pub mod policy;
pub mod stochastic;
pub mod walk;

pub use catching::{CatchTarget, CatchingPlan};
pub use graph::{compute_critical_length, compute_period, AdmdpGraph};
pub use io::{load_model, MdpFile, MdpKind, MdpModel};
pub use policy::{enumerate_policies, policy_count, DeterministicPolicy, LossFunction};
pub use stochastic::{sample_index, Diameter, StateDistributions, StochasticMdp};
pub use walk::{ClosedWalk, Edge};
