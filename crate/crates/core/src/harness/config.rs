//! Versioned JSON experiment configuration.
//!
//! ```json
//! {
//!   "version": 1,
//!   "mdp": "ring.json",
//!   "algorithm": "det",
//!   "adversary": {"kind": "iid_uniform"},
//!   "horizons": [1024, 2048, 4096, 8192],
//!   "seeds": [1, 2, 3],
//!   "lambda": {"mode": "horizon_tuned"}
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpl::LambdaMode;
use crate::harness::adversary::{gen_lower_bound_instance, gen_lower_bound_loop_instance, AdversarySpec};
use crate::harness::record::Algorithm;
use crate::mdp::{load_model, MdpFile, MdpModel};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundSpec {
    pub states: usize,
    pub actions: usize,
    /// Add the self-looping extra action needed by the stochastic learners.
    #[serde(default)]
    pub with_loop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MdpSource {
    Path(PathBuf),
    LowerBound { lower_bound: LowerBoundSpec },
    Inline(Box<MdpFile>),
}

impl MdpSource {
    pub fn load(&self, base_dir: &Path) -> Result<MdpModel> {
        match self {
            Self::Path(p) => load_model(&if p.is_absolute() { p.clone() } else { base_dir.join(p) }),
            Self::LowerBound { lower_bound: lb } => {
                if lb.with_loop {
                    let (mdp, _) = gen_lower_bound_loop_instance(lb.states, lb.actions)?;
                    Ok(MdpModel::Stochastic(mdp))
                } else {
                    let (graph, _) = gen_lower_bound_instance(lb.states, lb.actions)?;
                    MdpModel::deterministic(graph, 0)
                }
            }
            Self::Inline(file) => (**file).clone().into_model(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaSpec {
    Fixed {
        value: f64,
    },
    /// Tuned to each run's horizon.
    #[default]
    HorizonTuned,
    FirstOrder {
        loss_bound: f64,
    },
    Doubling,
}

impl LambdaSpec {
    pub fn mode(self, horizon: usize) -> LambdaMode {
        match self {
            Self::Fixed { value } => LambdaMode::Fixed(value),
            Self::HorizonTuned => LambdaMode::HorizonTuned(horizon),
            Self::FirstOrder { loss_bound } => LambdaMode::FirstOrder { loss_bound },
            Self::Doubling => LambdaMode::Doubling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub mdp: MdpSource,
    pub algorithm: Algorithm,
    pub adversary: AdversarySpec,
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub lambda: LambdaSpec,
    /// Start state of the deterministic learner; defaults to the most likely start state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_state: Option<usize>,
    /// Exploring-starts mass for the oracle learner; defaults to `min_s d_1(s)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Write one `runs.csv` per run.
    #[serde(default = "yes")]
    pub traces: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: &str| Err(Error::Config(format!("{field}: {msg}")));
        if self.version != CONFIG_VERSION {
            return fail(
                "version",
                &format!("unsupported version {}, expected {CONFIG_VERSION}", self.version),
            );
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return fail("horizons", "must be a non-empty list of positive integers");
        }
        if self.seeds.is_empty() {
            return fail("seeds", "must be non-empty");
        }
        match self.lambda {
            LambdaSpec::Fixed { value } if !(value > 0.0) => return fail("lambda.value", "must be positive"),
            LambdaSpec::FirstOrder { loss_bound } if !(loss_bound > 0.0) => {
                return fail("lambda.loss_bound", "must be positive")
            }
            _ => {}
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return fail("alpha", "must lie in (0, 1]");
            }
        }
        if let AdversarySpec::Constant { value } = self.adversary {
            if !(0.0..=1.0).contains(&value) {
                return fail("adversary.value", "must lie in [0, 1]");
            }
        }
        Ok(())
    }

    /// Stable digest of the configuration.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
