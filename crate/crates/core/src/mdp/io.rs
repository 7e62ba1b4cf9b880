//! JSON description files for deterministic and stochastic MDPs.
//!
//! ```json
//! {"states": 2, "actions": 2, "kind": "stochastic",
//!  "kernel": [[[1, 0], ["0.5", "0.5"]], [[0, 1], [1, 0]]],
//!  "start_dist": [1, 0], "loop_state": 0, "loop_action": 0}
//! ```
//!
//! Probabilities may be JSON numbers or decimal strings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::graph::AdmdpGraph;
use crate::mdp::stochastic::StochasticMdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MdpKind {
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Probability {
    Number(f64),
    Decimal(String),
}

impl Probability {
    fn value(&self) -> Result<f64> {
        match self {
            Self::Number(v) => Ok(*v),
            Self::Decimal(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::InvalidMdp(format!("cannot parse probability {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub states: usize,
    pub actions: usize,
    pub kind: MdpKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<Vec<Vec<Probability>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_dist: Option<Vec<Probability>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_state: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_action: Option<usize>,
}

/// A validated MDP loaded from a description file.
#[derive(Debug, Clone)]
pub enum MdpModel {
    Deterministic {
        graph: AdmdpGraph,
        /// The same dynamics as a degenerate stochastic MDP.
        stochastic: StochasticMdp,
    },
    Stochastic(StochasticMdp),
}

impl MdpModel {
    pub fn stochastic(&self) -> &StochasticMdp {
        match self {
            Self::Deterministic { stochastic, .. } => stochastic,
            Self::Stochastic(m) => m,
        }
    }

    /// A deterministic model started surely in `start`.
    pub fn deterministic(graph: AdmdpGraph, start: usize) -> Result<Self> {
        if start >= graph.num_states() {
            return Err(Error::InvalidMdp(format!("start state {start} out of range")));
        }
        let mut dist = vec![0.0; graph.num_states()];
        dist[start] = 1.0;
        let stochastic = StochasticMdp::from_admdp(&graph, dist, None)?;
        Ok(Self::Deterministic { graph, stochastic })
    }

    pub fn graph(&self) -> Option<&AdmdpGraph> {
        match self {
            Self::Deterministic { graph, .. } => Some(graph),
            Self::Stochastic(_) => None,
        }
    }
}

impl MdpFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn from_graph(graph: &AdmdpGraph, loop_state: Option<(usize, usize)>) -> Self {
        Self {
            states: graph.num_states(),
            actions: graph.num_actions(),
            kind: MdpKind::Deterministic,
            next: Some(graph.next_map()),
            kernel: None,
            start_dist: None,
            loop_state: loop_state.map(|l| l.0),
            loop_action: loop_state.map(|l| l.1),
        }
    }

    pub fn from_stochastic(mdp: &StochasticMdp) -> Self {
        let n = mdp.num_states();
        let kernel = (0..n)
            .map(|s| {
                (0..mdp.num_actions())
                    .map(|a| mdp.row(s, a).iter().map(|&p| Probability::Number(p)).collect())
                    .collect()
            })
            .collect();
        let loop_state = mdp.loop_state();
        Self {
            states: n,
            actions: mdp.num_actions(),
            kind: MdpKind::Stochastic,
            next: None,
            kernel: Some(kernel),
            start_dist: Some(mdp.start_dist().iter().map(|&p| Probability::Number(p)).collect()),
            loop_state: loop_state.map(|l| l.0),
            loop_action: loop_state.map(|l| l.1),
        }
    }

    fn loop_pair(&self) -> Result<Option<(usize, usize)>> {
        match (self.loop_state, self.loop_action) {
            (None, None) => Ok(None),
            (Some(s), Some(a)) => Ok(Some((s, a))),
            _ => Err(Error::InvalidMdp(
                "loop_state and loop_action must be given together".into(),
            )),
        }
    }

    pub fn into_model(self) -> Result<MdpModel> {
        let loop_pair = self.loop_pair()?;
        let start_dist = match &self.start_dist {
            Some(d) => d.iter().map(Probability::value).collect::<Result<Vec<_>>>()?,
            None if self.kind == MdpKind::Deterministic => {
                let mut d = vec![0.0; self.states];
                if let Some(first) = d.first_mut() {
                    *first = 1.0;
                }
                d
            }
            None => return Err(Error::InvalidMdp("stochastic MDP needs start_dist".into())),
        };
        match self.kind {
            MdpKind::Deterministic => {
                if self.kernel.is_some() {
                    return Err(Error::InvalidMdp("deterministic MDP takes `next`, not `kernel`".into()));
                }
                let next = self
                    .next
                    .ok_or_else(|| Error::InvalidMdp("deterministic MDP needs `next`".into()))?;
                check_shape(self.states, self.actions, next.len(), next.iter().map(Vec::len))?;
                let graph = AdmdpGraph::new(&next)?;
                let stochastic = StochasticMdp::from_admdp(&graph, start_dist, loop_pair)?;
                Ok(MdpModel::Deterministic { graph, stochastic })
            }
            MdpKind::Stochastic => {
                if self.next.is_some() {
                    return Err(Error::InvalidMdp("stochastic MDP takes `kernel`, not `next`".into()));
                }
                let raw = self
                    .kernel
                    .ok_or_else(|| Error::InvalidMdp("stochastic MDP needs `kernel`".into()))?;
                check_shape(self.states, self.actions, raw.len(), raw.iter().map(Vec::len))?;
                let kernel = raw
                    .iter()
                    .map(|per_action| {
                        per_action
                            .iter()
                            .map(|row| row.iter().map(Probability::value).collect::<Result<Vec<_>>>())
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(MdpModel::Stochastic(StochasticMdp::new(
                    &kernel, start_dist, loop_pair,
                )?))
            }
        }
    }
}

fn check_shape(states: usize, actions: usize, rows: usize, mut row_lens: impl Iterator<Item = usize>) -> Result<()> {
    if rows != states {
        return Err(Error::InvalidMdp(format!("declared {states} states, found {rows}")));
    }
    if let Some(len) = row_lens.find(|&l| l != actions) {
        return Err(Error::InvalidMdp(format!("declared {actions} actions, found {len}")));
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MdpModel> {
    MdpFile::load(path)?.into_model()
}
