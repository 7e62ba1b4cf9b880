//! Oracle-efficient learner under exploring starts. The perturbation table
//! `ε(s, a)` is handed to the best-policy oracle as a time-zero loss, so
//! `ℓ̂_0(π) = Σ_s d_1(s) ε(s, π(s))` and one oracle call per step finds the
//! perturbed leader.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fpl::{draw_exponentials, log_size, LambdaMode, TIE_TOLERANCE};
use crate::harness::record::{Algorithm, RunRecord};
use crate::learner::stoch::{run_with_experts, PolicyExperts, POLICY_CAP};
use crate::mdp::{
    enumerate_policies, CatchingPlan, DeterministicPolicy, LossFunction, StateDistributions, StochasticMdp,
};
use crate::rng::{stream_rng, streams};

/// Best stationary deterministic policy for `time_zero` followed by `losses`.
///
/// `time_zero` is a flat `|S|·|A|` table of non-negative values that may exceed 1.
pub trait PolicyOracle {
    /// `argmin_π Σ_s d_1(s) time_zero(s, π(s)) + Σ_t ℓ̂_t(π)` and its value.
    fn best_policy(
        &mut self,
        mdp: &StochasticMdp,
        time_zero: &[f64],
        losses: &[LossFunction],
    ) -> Result<(DeterministicPolicy, f64)>;

    /// The same objective for one given policy.
    fn evaluate(
        &mut self,
        mdp: &StochasticMdp,
        time_zero: &[f64],
        losses: &[LossFunction],
        policy: &DeterministicPolicy,
    ) -> Result<f64>;
}

/// Exhaustive oracle. Calls that extend the previous loss sequence reuse the
/// running per-policy sums; anything else recomputes from scratch.
#[derive(Debug, Clone, Default)]
pub struct EnumerationOracle {
    cap: usize,
    time_zero: Vec<f64>,
    streams: Vec<StateDistributions>,
    totals: Vec<f64>,
    processed: usize,
    last: Option<LossFunction>,
}

impl EnumerationOracle {
    pub fn new(cap: usize) -> Self {
        Self { cap, ..Self::default() }
    }

    fn sync(&mut self, mdp: &StochasticMdp, time_zero: &[f64], losses: &[LossFunction]) -> Result<()> {
        let na = mdp.num_actions();
        if time_zero.len() != mdp.num_states() * na {
            return Err(Error::BadShape(format!(
                "time-zero table has {} entries",
                time_zero.len()
            )));
        }
        if time_zero.iter().any(|v| !(*v >= 0.0) || v.is_infinite()) {
            return Err(Error::InvalidLoss(
                "time-zero losses must be finite and non-negative".into(),
            ));
        }
        let extends = !self.streams.is_empty()
            && self.time_zero == time_zero
            && losses.len() >= self.processed
            && (self.processed == 0 || self.last.as_ref() == Some(&losses[self.processed - 1]));
        if !extends {
            let policies = enumerate_policies(mdp.num_states(), na, self.cap)?;
            let d1 = mdp.start_dist();
            self.totals = policies
                .iter()
                .map(|p| (0..d1.len()).map(|s| d1[s] * time_zero[s * na + p.action(s)]).sum())
                .collect();
            self.streams = policies.iter().map(|p| StateDistributions::new(mdp, p)).collect();
            self.time_zero = time_zero.to_vec();
            self.processed = 0;
        }
        for loss in &losses[self.processed..] {
            for (stream, total) in self.streams.iter_mut().zip(&mut self.totals) {
                *total += stream.expected_loss(loss);
                stream.advance(mdp)?;
            }
        }
        self.processed = losses.len();
        self.last = losses.last().cloned();
        Ok(())
    }
}

impl PolicyOracle for EnumerationOracle {
    fn best_policy(
        &mut self,
        mdp: &StochasticMdp,
        time_zero: &[f64],
        losses: &[LossFunction],
    ) -> Result<(DeterministicPolicy, f64)> {
        self.sync(mdp, time_zero, losses)?;
        let best = (0..self.totals.len()).fold(0, |b, i| if self.totals[i] < self.totals[b] { i } else { b });
        Ok((self.streams[best].policy().clone(), self.totals[best]))
    }

    fn evaluate(
        &mut self,
        mdp: &StochasticMdp,
        time_zero: &[f64],
        losses: &[LossFunction],
        policy: &DeterministicPolicy,
    ) -> Result<f64> {
        self.sync(mdp, time_zero, losses)?;
        Ok(self.totals[policy.index(mdp.num_actions())])
    }
}

/// Order-sensitive FNV-1a over the bit patterns of the oracle inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputHash(u64);

impl InputHash {
    pub fn new(time_zero: &[f64]) -> Self {
        let mut h = Self(0xcbf2_9ce4_8422_2325);
        h.absorb(time_zero);
        h
    }

    pub fn absorb(&mut self, values: &[f64]) {
        for v in values {
            for byte in v.to_bits().to_le_bytes() {
                self.0 ^= u64::from(byte);
                self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

/// `λ = min(√(α ln(|S||A|) / (|S| L)), α / (2|S|))`, with `L` the horizon,
/// a supplied loss bound, or `2^m` in doubling epoch `m`.
pub fn oracle_rate(mode: LambdaMode, num_states: usize, num_actions: usize, alpha: f64, epoch: u32) -> f64 {
    let n = num_states as f64;
    let rate = |l: f64| {
        (alpha * log_size(num_states * num_actions) / (n * l.max(1.0)))
            .sqrt()
            .min(alpha / (2.0 * n))
    };
    match mode {
        LambdaMode::Fixed(l) => l,
        LambdaMode::HorizonTuned(t) => rate(t as f64),
        LambdaMode::FirstOrder { loss_bound } => rate(loss_bound),
        LambdaMode::Doubling => rate(2f64.powi(epoch as i32)),
    }
}

#[derive(Debug, Clone)]
pub struct OracleFplState<O: PolicyOracle> {
    oracle: O,
    mode: LambdaMode,
    rng: ChaCha8Rng,
    alpha: f64,
    lambda: f64,
    eps: Vec<f64>,
    losses: Vec<LossFunction>,
    leader: DeterministicPolicy,
    leader_index: usize,
    switches: usize,
    epoch: u32,
    expert_loss: f64,
    last_leader_loss: f64,
    hash: InputHash,
    leader_dist: StateDistributions,
}

impl<O: PolicyOracle> OracleFplState<O> {
    /// Fails with `ExploringStartsViolated` unless `min_s d_1(s) ≥ α`.
    pub fn new(mdp: &StochasticMdp, oracle: O, alpha: f64, mode: LambdaMode, seed: u64) -> Result<Self> {
        let min_mass = mdp.min_start_mass();
        if !(alpha > 0.0) || min_mass < alpha {
            return Err(Error::ExploringStartsViolated { min_mass, alpha });
        }
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let mut rng = stream_rng(seed, streams::PERTURBATION);
        let lambda = oracle_rate(mode, ns, na, alpha, 0);
        let eps = draw_exponentials(ns * na, lambda, &mut rng)?;
        Self::with_table(mdp, oracle, alpha, mode, rng, lambda, eps)
    }

    /// Uses a given perturbation table instead of drawing one.
    pub fn with_perturbation(mdp: &StochasticMdp, oracle: O, alpha: f64, eps: Vec<f64>) -> Result<Self> {
        let min_mass = mdp.min_start_mass();
        if !(alpha > 0.0) || min_mass < alpha {
            return Err(Error::ExploringStartsViolated { min_mass, alpha });
        }
        Self::with_table(
            mdp,
            oracle,
            alpha,
            LambdaMode::Fixed(f64::INFINITY),
            stream_rng(0, 0),
            f64::NAN,
            eps,
        )
    }

    fn with_table(
        mdp: &StochasticMdp,
        mut oracle: O,
        alpha: f64,
        mode: LambdaMode,
        rng: ChaCha8Rng,
        lambda: f64,
        eps: Vec<f64>,
    ) -> Result<Self> {
        let (leader, _) = oracle.best_policy(mdp, &eps, &[])?;
        let hash = InputHash::new(&eps);
        log::debug!("oracle call inputs={:016x} t=0 -> {:?}", hash.value(), leader.actions());
        Ok(Self {
            leader_dist: StateDistributions::new(mdp, &leader),
            oracle,
            mode,
            rng,
            alpha,
            lambda,
            eps,
            losses: Vec::new(),
            leader,
            leader_index: 0,
            switches: 0,
            epoch: 0,
            expert_loss: 0.0,
            last_leader_loss: 0.0,
            hash,
        })
    }

    /// Feeds `ℓ_t` and returns `(π_{t+1}, switched)`.
    pub fn step(&mut self, mdp: &StochasticMdp, loss: &LossFunction) -> Result<(&DeterministicPolicy, bool)> {
        let leader_loss = self.leader_dist.expected_loss(loss);
        self.last_leader_loss = leader_loss;
        self.expert_loss += leader_loss;
        self.losses.push(loss.clone());
        self.hash.absorb(loss.values());

        if self.mode == LambdaMode::Doubling {
            let mut redraw = false;
            while self.expert_loss > 2f64.powi(self.epoch as i32) {
                self.epoch += 1;
                redraw = true;
            }
            if redraw {
                let (ns, na) = (mdp.num_states(), mdp.num_actions());
                self.lambda = oracle_rate(self.mode, ns, na, self.alpha, self.epoch);
                self.eps = draw_exponentials(ns * na, self.lambda, &mut self.rng)?;
                self.hash = InputHash::new(&self.eps);
                for l in &self.losses {
                    self.hash.absorb(l.values());
                }
            }
        }

        let (best, best_value) = self.oracle.best_policy(mdp, &self.eps, &self.losses)?;
        log::debug!(
            "oracle call inputs={:016x} t={} -> {:?}",
            self.hash.value(),
            self.losses.len(),
            best.actions()
        );
        let incumbent = self.oracle.evaluate(mdp, &self.eps, &self.losses, &self.leader)?;
        let switched = best != self.leader && incumbent > best_value + TIE_TOLERANCE;
        if switched {
            self.leader = best;
            self.leader_index += 1;
            self.switches += 1;
            self.leader_dist = mdp_stream_at(mdp, &self.leader, self.losses.len() + 1)?;
        } else {
            self.leader_dist.advance(mdp)?;
        }
        Ok((&self.leader, switched))
    }

    pub fn leader(&self) -> &DeterministicPolicy {
        &self.leader
    }

    pub fn switches(&self) -> usize {
        self.switches
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn perturbation(&self) -> &[f64] {
        &self.eps
    }

    /// `ℓ̂_t(π_t)` for the most recent step.
    pub fn last_leader_loss(&self) -> f64 {
        self.last_leader_loss
    }
}

fn mdp_stream_at(mdp: &StochasticMdp, policy: &DeterministicPolicy, t: usize) -> Result<StateDistributions> {
    let mut stream = StateDistributions::new(mdp, policy);
    while stream.time() < t {
        stream.advance(mdp)?;
    }
    Ok(stream)
}

impl<O: PolicyOracle> PolicyExperts for OracleFplState<O> {
    fn leader(&self) -> &DeterministicPolicy {
        &self.leader
    }

    fn leader_index(&self) -> usize {
        self.leader_index
    }

    fn observe(&mut self, mdp: &StochasticMdp, loss: &LossFunction) -> Result<bool> {
        self.step(mdp, loss).map(|(_, s)| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub alpha: f64,
    pub lambda: LambdaMode,
    pub seed: u64,
}

pub fn run_oracle(mdp: &StochasticMdp, losses: &[LossFunction], config: OracleConfig) -> Result<RunRecord> {
    let mut fpl = OracleFplState::new(
        mdp,
        EnumerationOracle::new(POLICY_CAP),
        config.alpha,
        config.lambda,
        config.seed,
    )?;
    let plan = CatchingPlan::build(mdp)?;
    run_with_experts(mdp, &plan, losses, &mut fpl, Algorithm::Oracle, config.seed)
}

/// Monte-Carlo estimate of `Pr[π_{t+1} ≠ π_t]` over fresh `ε` draws, where
/// `losses` holds `ℓ_1..ℓ_t`. Returns `(switch count, mean of (|S|/α)·λ·ℓ̂_t(π_t))`.
///
/// The per-policy loss sums are computed once; each trial only re-scores the
/// time-zero term, which keeps the oracle objective but skips its cache.
pub fn estimate_oracle_switch_probability(
    mdp: &StochasticMdp,
    losses: &[LossFunction],
    alpha: f64,
    lambda: f64,
    trials: usize,
    seed: u64,
) -> Result<(usize, f64)> {
    let last = losses
        .last()
        .ok_or_else(|| Error::Config("need at least one loss function".into()))?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let policies = enumerate_policies(ns, na, POLICY_CAP)?;
    let mut before = Vec::with_capacity(policies.len());
    let mut hat_last = Vec::with_capacity(policies.len());
    for p in &policies {
        let (total, per_step) = mdp.expected_policy_loss(p, losses)?;
        let l = per_step.last().copied().unwrap_or(0.0);
        before.push(total - l);
        hat_last.push(l);
    }
    debug_assert!(last.num_states() == ns);
    let d1 = mdp.start_dist();
    let mut rng = stream_rng(seed, streams::PERTURBATION);
    let mut switches = 0;
    let mut bound = 0.0;
    let argmin = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] < v[b] { i } else { b });
    for _ in 0..trials {
        let eps = draw_exponentials(ns * na, lambda, &mut rng)?;
        let time_zero: Vec<f64> = policies
            .iter()
            .map(|p| (0..ns).map(|s| d1[s] * eps[s * na + p.action(s)]).sum())
            .collect();
        let old: Vec<f64> = time_zero.iter().zip(&before).map(|(a, b)| a + b).collect();
        let new: Vec<f64> = old.iter().zip(&hat_last).map(|(a, b)| a + b).collect();
        let current = argmin(&old);
        let next = argmin(&new);
        if next != current && new[current] > new[next] + TIE_TOLERANCE {
            switches += 1;
        }
        bound += ns as f64 / alpha * lambda * hat_last[current];
    }
    Ok((switches, bound / trials.max(1) as f64))
}
