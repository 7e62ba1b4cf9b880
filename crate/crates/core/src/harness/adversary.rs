//! Oblivious loss sequences and the lower-bound instance.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{AdmdpGraph, LossFunction, StochasticMdp};
use crate::rng::{stream_rng, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversarySpec {
    /// Every `ℓ_t(s, a)` i.i.d. uniform on `[0, 1]`.
    IidUniform,
    /// Every `ℓ_t(s, a)` i.i.d. Bernoulli(1/2).
    BernoulliExpertsLb,
    /// Loss 1 on a single `(s, a)` cell that advances every `period` steps, 0 elsewhere.
    EdgePunisher {
        period: usize,
    },
    Constant {
        value: f64,
    },
    /// JSON array of `|S| x |A|` matrices, one per step.
    File {
        path: PathBuf,
    },
}

impl AdversarySpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::IidUniform => "iid_uniform",
            Self::BernoulliExpertsLb => "bernoulli_experts_lb",
            Self::EdgePunisher { .. } => "edge_punisher",
            Self::Constant { .. } => "constant",
            Self::File { .. } => "file",
        }
    }

    /// `ℓ_1..ℓ_T`. File paths are resolved against `base_dir`.
    pub fn generate(
        &self,
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        seed: u64,
        base_dir: &Path,
    ) -> Result<Vec<LossFunction>> {
        let cells = num_states * num_actions;
        let mut rng = stream_rng(seed, streams::ADVERSARY);
        let table = |values: Vec<f64>| LossFunction::new(num_states, num_actions, values);
        match self {
            Self::IidUniform => (0..horizon)
                .map(|_| table((0..cells).map(|_| rng.random::<f64>()).collect()))
                .collect(),
            Self::BernoulliExpertsLb => (0..horizon)
                .map(|_| {
                    table(
                        (0..cells)
                            .map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 })
                            .collect(),
                    )
                })
                .collect(),
            Self::EdgePunisher { period } => {
                if *period == 0 {
                    return Err(Error::Config("adversary.period: must be positive".into()));
                }
                (0..horizon)
                    .map(|t| {
                        let mut v = vec![0.0; cells];
                        v[(t / period) % cells] = 1.0;
                        table(v)
                    })
                    .collect()
            }
            Self::Constant { value } => {
                let l = LossFunction::constant(num_states, num_actions, *value)?;
                Ok(vec![l; horizon])
            }
            Self::File { path } => {
                let path = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                let raw: Vec<Vec<Vec<f64>>> = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
                if raw.len() < horizon {
                    return Err(Error::Config(format!(
                        "adversary.path: {} holds {} steps, horizon is {horizon}",
                        path.display(),
                        raw.len()
                    )));
                }
                raw.into_iter()
                    .take(horizon)
                    .map(|m| {
                        if m.len() != num_states || m.iter().any(|r| r.len() != num_actions) {
                            return Err(Error::BadShape(format!(
                                "loss file entries must be {num_states}x{num_actions}"
                            )));
                        }
                        table(m.into_iter().flatten().collect())
                    })
                    .collect()
            }
        }
    }
}

/// States on a cycle where every action advances, with Bernoulli(1/2) losses.
pub fn gen_lower_bound_instance(num_states: usize, num_actions: usize) -> Result<(AdmdpGraph, AdversarySpec)> {
    if num_states <= 3 || num_actions == 0 {
        return Err(Error::BadShape(format!(
            "lower-bound instance needs |S| > 3 and |A| >= 1, got {num_states} and {num_actions}"
        )));
    }
    let next: Vec<Vec<usize>> = (0..num_states)
        .map(|s| vec![(s + 1) % num_states; num_actions])
        .collect();
    Ok((AdmdpGraph::new(&next)?, AdversarySpec::BernoulliExpertsLb))
}

/// The lower-bound cycle with one extra action that stays put in state 0 and
/// advances elsewhere, so the loop-state assumption holds. Uniform start.
pub fn gen_lower_bound_loop_instance(num_states: usize, num_actions: usize) -> Result<(StochasticMdp, AdversarySpec)> {
    let (graph, adversary) = gen_lower_bound_instance(num_states, num_actions)?;
    let mut next = graph.next_map();
    for (s, row) in next.iter_mut().enumerate() {
        row.push(if s == 0 { 0 } else { (s + 1) % num_states });
    }
    let graph = AdmdpGraph::new(&next)?;
    let uniform = vec![1.0 / num_states as f64; num_states];
    let mdp = StochasticMdp::from_admdp(&graph, uniform, Some((0, num_actions)))?;
    Ok((mdp, adversary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_shape() {
        assert!(matches!(gen_lower_bound_instance(3, 2), Err(Error::BadShape(_))));
        let (g, _) = gen_lower_bound_instance(4, 2).unwrap();
        assert_eq!(g.period(), 4);
        assert_eq!(g.next(3, 1), 0);
        let (m, _) = gen_lower_bound_loop_instance(4, 2).unwrap();
        assert_eq!(m.num_actions(), 3);
        assert_eq!(m.loop_state(), Some((0, 2)));
    }

    #[test]
    fn bernoulli_cells_are_fair() {
        let losses = AdversarySpec::BernoulliExpertsLb
            .generate(4, 2, 10_000, 1, Path::new("."))
            .unwrap();
        for cell in 0..8 {
            let mean = losses.iter().map(|l| l.values()[cell]).sum::<f64>() / 10_000.0;
            assert!((0.45..=0.55).contains(&mean), "cell {cell}: {mean}");
        }
    }

    #[test]
    fn generators_are_seeded_and_bounded() {
        let spec = AdversarySpec::IidUniform;
        let a = spec.generate(2, 2, 50, 9, Path::new(".")).unwrap();
        assert_eq!(a, spec.generate(2, 2, 50, 9, Path::new(".")).unwrap());
        assert_ne!(a, spec.generate(2, 2, 50, 10, Path::new(".")).unwrap());
        let p = AdversarySpec::EdgePunisher { period: 3 }
            .generate(2, 2, 7, 0, Path::new("."))
            .unwrap();
        assert_eq!(p[6].values(), &[0.0, 0.0, 1.0, 0.0]);
        assert!(AdversarySpec::Constant { value: 1.5 }
            .generate(1, 1, 1, 0, Path::new("."))
            .is_err());
    }

    #[test]
    fn spec_json() {
        let spec: AdversarySpec = serde_json::from_str(r#"{"kind": "edge_punisher", "period": 4}"#).unwrap();
        assert_eq!(spec, AdversarySpec::EdgePunisher { period: 4 });
        assert!(serde_json::from_str::<AdversarySpec>(r#"{"kind": "constant", "value": 0.1, "x": 1}"#).is_err());
    }
}
