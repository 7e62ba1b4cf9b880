//! The three learners: deterministic (closed-walk FPL with fixed-length
//! transits), stochastic (policy FPL with catching) and oracle-based.

pub mod det;
pub mod oracle;
pub mod stoch;
