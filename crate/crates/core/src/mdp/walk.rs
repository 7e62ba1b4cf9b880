use std::fmt;

use crate::error::{Error, Result};
use crate::mdp::graph::AdmdpGraph;

/// One labelled edge `(from, action, to)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: usize,
    pub action: usize,
    pub to: usize,
}

/// A closed walk of length `k` starting and ending at `start`: the expert unit of
/// the deterministic learner. Followed from time 1, it repeats with period `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClosedWalk {
    start: usize,
    edges: Vec<Edge>,
}

impl ClosedWalk {
    /// Builds the walk that takes `actions` from `start`, checking it closes.
    pub fn from_actions(graph: &AdmdpGraph, start: usize, actions: &[usize]) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidMdp("closed walk must have at least one edge".into()));
        }
        if start >= graph.num_states() {
            return Err(Error::InvalidMdp(format!("walk start {start} out of range")));
        }
        let mut edges = Vec::with_capacity(actions.len());
        let mut state = start;
        for &action in actions {
            if action >= graph.num_actions() {
                return Err(Error::InvalidMdp(format!("walk action {action} out of range")));
            }
            let to = graph.next(state, action);
            edges.push(Edge {
                from: state,
                action,
                to,
            });
            state = to;
        }
        if state != start {
            return Err(Error::InvalidMdp(format!(
                "walk from {start} ends at {state}, not closed"
            )));
        }
        Ok(Self { start, edges })
    }

    /// Checks chaining, closure and consistency with `N(s, a)`.
    pub fn validate(&self, graph: &AdmdpGraph) -> Result<()> {
        let k = self.edges.len();
        if k == 0 || self.edges[0].from != self.start || self.edges[k - 1].to != self.start {
            return Err(Error::Invariant(format!("walk {self} is not closed at its start")));
        }
        for (i, e) in self.edges.iter().enumerate() {
            if graph.next(e.from, e.action) != e.to {
                return Err(Error::Invariant(format!("walk {self} edge {i} inconsistent")));
            }
            if i + 1 < k && e.to != self.edges[i + 1].from {
                return Err(Error::Invariant(format!("walk {self} breaks at edge {i}")));
            }
        }
        if !k.is_multiple_of(graph.period()) {
            return Err(Error::Invariant(format!(
                "walk length {k} not a multiple of the period"
            )));
        }
        Ok(())
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().map(|e| e.action)
    }

    /// `s_t(c)`: the state at time `t ≥ 1` when following the walk from time 1.
    #[inline]
    pub fn state_at(&self, t: usize) -> usize {
        debug_assert!(t >= 1);
        self.edges[(t - 1) % self.edges.len()].from
    }

    /// `a_t(c)`: the action at time `t ≥ 1`.
    #[inline]
    pub fn action_at(&self, t: usize) -> usize {
        debug_assert!(t >= 1);
        self.edges[(t - 1) % self.edges.len()].action
    }
}

impl fmt::Display for ClosedWalk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.start)?;
        for (i, e) in self.edges.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{}", e.action)?;
        }
        Ok(())
    }
}
