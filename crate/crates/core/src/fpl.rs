//! Follow-the-perturbed-leader over closed-walk experts.
//!
//! The perturbed objective of a walk `c` with start `s` and length `k` after
//! `t` losses is `δ(s, k) + Σ_{i ≤ k} ε_i(s_i(c), a_i(c)) + Σ_{j ≤ t} ℓ_j(s_j(c), a_j(c))`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::cycle_opt::{best_cycle_overall, FoldSet};
use crate::error::{Error, Result};
use crate::mdp::{AdmdpGraph, ClosedWalk, LossFunction};
use crate::rng::{stream_rng, streams};

/// `n` i.i.d. Exponential(λ) draws; `λ = ∞` gives zeros.
pub fn draw_exponentials<R: Rng + ?Sized>(n: usize, lambda: f64, rng: &mut R) -> Result<Vec<f64>> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::Config(format!(
            "perturbation rate must be positive, got {lambda}"
        )));
    }
    if lambda.is_infinite() {
        return Ok(vec![0.0; n]);
    }
    let exp = Exp::new(lambda).map_err(|e| Error::Config(e.to_string()))?;
    Ok((0..n).map(|_| exp.sample(rng)).collect())
}

/// Tolerance under which the incumbent is kept.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// `ln(n)` with `n` clamped to at least 2, so tuned rates never collapse to zero.
pub fn log_size(n: usize) -> f64 {
    (n.max(2) as f64).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    Fixed(f64),
    /// `λ = ln(|S||A|) / √T`.
    HorizonTuned(usize),
    /// `λ = min(√(ln(|S||A|) / L), 1 / (4|S|))` for a known loss bound `L`.
    FirstOrder {
        loss_bound: f64,
    },
    /// First-order rate with `L_m = 2^m`, advancing the epoch when the incurred loss passes `L_m`.
    Doubling,
}

impl LambdaMode {
    pub fn rate(&self, num_states: usize, num_actions: usize, epoch: u32) -> f64 {
        let log = log_size(num_states * num_actions);
        let first_order = |l: f64| (log / l.max(1.0)).sqrt().min(1.0 / (4.0 * num_states as f64));
        match *self {
            Self::Fixed(l) => l,
            Self::HorizonTuned(t) => log / (t.max(1) as f64).sqrt(),
            Self::FirstOrder { loss_bound } => first_order(loss_bound),
            Self::Doubling => first_order(2f64.powi(epoch as i32)),
        }
    }
}

/// Exponential(λ) draws: `ε_i(s, a)` for positions `1..=|S|` and `δ(s, k)` for lengths `1..=|S|`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSet {
    pub lambda: f64,
    num_states: usize,
    num_actions: usize,
    eps: Vec<f64>,
    delta: Vec<f64>,
}

impl PerturbationSet {
    /// `λ = ∞` yields all-zero tables.
    pub fn draw<R: Rng + ?Sized>(num_states: usize, num_actions: usize, lambda: f64, rng: &mut R) -> Result<Self> {
        let eps = draw_exponentials(num_states * num_states * num_actions, lambda, rng)?;
        let delta = draw_exponentials(num_states * num_states, lambda, rng)?;
        Ok(Self {
            lambda,
            num_states,
            num_actions,
            eps,
            delta,
        })
    }

    pub fn zero(num_states: usize, num_actions: usize) -> Self {
        Self {
            lambda: f64::INFINITY,
            num_states,
            num_actions,
            eps: vec![0.0; num_states * num_states * num_actions],
            delta: vec![0.0; num_states * num_states],
        }
    }

    /// Builds a set from explicit tables (`eps[i-1][s][a]`, `delta[s][k-1]`).
    pub fn from_tables(lambda: f64, eps: &[Vec<Vec<f64>>], delta: &[Vec<f64>]) -> Result<Self> {
        let ns = delta.len();
        let na = eps.first().and_then(|p| p.first()).map_or(0, Vec::len);
        let shape_ok = eps.len() == ns
            && eps.iter().all(|p| p.len() == ns && p.iter().all(|r| r.len() == na))
            && delta.iter().all(|r| r.len() == ns);
        if !shape_ok {
            return Err(Error::BadShape(
                "perturbation tables must be |S|x|S|x|A| and |S|x|S|".into(),
            ));
        }
        let flat_eps: Vec<f64> = eps.iter().flatten().flatten().copied().collect();
        let flat_delta: Vec<f64> = delta.iter().flatten().copied().collect();
        if flat_eps.iter().chain(&flat_delta).any(|v| !(v >= &0.0)) {
            return Err(Error::Config("perturbations must be non-negative".into()));
        }
        Ok(Self {
            lambda,
            num_states: ns,
            num_actions: na,
            eps: flat_eps,
            delta: flat_delta,
        })
    }

    /// `ε_i(s, a)`, position `i ∈ 1..=|S|`.
    #[inline]
    pub fn eps(&self, position: usize, state: usize, action: usize) -> f64 {
        self.eps[((position - 1) * self.num_states + state) * self.num_actions + action]
    }

    /// `δ(s, k)`, length `k ∈ 1..=|S|`.
    #[inline]
    pub fn delta(&self, state: usize, k: usize) -> f64 {
        self.delta[state * self.num_states + k - 1]
    }

    /// `δ(start, k) + Σ_i ε_i(s_i, a_i)` for a walk.
    pub fn walk_perturbation(&self, walk: &ClosedWalk) -> f64 {
        self.delta(walk.start(), walk.len())
            + walk
                .edges()
                .iter()
                .enumerate()
                .map(|(i, e)| self.eps(i + 1, e.from, e.action))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct FplState {
    graph: AdmdpGraph,
    start_class: usize,
    mode: LambdaMode,
    rng: ChaCha8Rng,
    perturbations: PerturbationSet,
    folds: FoldSet,
    leader: ClosedWalk,
    leader_index: usize,
    /// Losses folded so far (`t`).
    steps: usize,
    switches: usize,
    epoch: u32,
    /// `Σ_t ℓ_t(s_t(C_t), a_t(C_t))`.
    expert_loss: f64,
}

impl FplState {
    /// Draws perturbations and computes the leader for an empty loss history.
    /// Walks are restricted to start states in `start_class`.
    pub fn init(graph: &AdmdpGraph, mode: LambdaMode, seed: u64, start_class: usize) -> Result<Self> {
        let (ns, na) = (graph.num_states(), graph.num_actions());
        if start_class >= graph.period() {
            return Err(Error::Config(format!("start class {start_class} out of range")));
        }
        let mut rng = stream_rng(seed, streams::PERTURBATION);
        let perturbations = PerturbationSet::draw(ns, na, mode.rate(ns, na, 0), &mut rng)?;
        let folds = FoldSet::new(ns, na, ns);
        let (_, leader) = best_cycle_overall(graph, &folds, Some(&perturbations), start_class)?;
        Ok(Self {
            graph: graph.clone(),
            start_class,
            mode,
            rng,
            perturbations,
            folds,
            leader,
            leader_index: 0,
            steps: 0,
            switches: 0,
            epoch: 0,
            expert_loss: 0.0,
        })
    }

    /// Feeds `ℓ_t` for `t = steps() + 1` and returns `(C_{t+1}, switched)`.
    pub fn step(&mut self, loss: &LossFunction) -> Result<(&ClosedWalk, bool)> {
        let t = self.steps + 1;
        self.expert_loss += loss.get(self.leader.state_at(t), self.leader.action_at(t));
        self.folds.push(loss);
        self.steps = t;

        let mut redrawn = false;
        if self.mode == LambdaMode::Doubling {
            while self.expert_loss > 2f64.powi(self.epoch as i32) {
                self.epoch += 1;
                redrawn = true;
            }
            if redrawn {
                let (ns, na) = (self.graph.num_states(), self.graph.num_actions());
                let lambda = self.mode.rate(ns, na, self.epoch);
                self.perturbations = PerturbationSet::draw(ns, na, lambda, &mut self.rng)?;
                log::debug!("epoch {} at t={t}, lambda={lambda}", self.epoch);
            }
        }

        let (best_value, best) =
            best_cycle_overall(&self.graph, &self.folds, Some(&self.perturbations), self.start_class)?;
        let incumbent = self.objective(&self.leader);
        let switched = incumbent > best_value + TIE_TOLERANCE && best != self.leader;
        if switched {
            self.leader = best;
            self.leader_index += 1;
            self.switches += 1;
        }
        Ok((&self.leader, switched))
    }

    /// Perturbed cumulative objective of a walk under the current state.
    pub fn objective(&self, walk: &ClosedWalk) -> f64 {
        self.folds.get(walk.len()).walk_loss(walk) + self.perturbations.walk_perturbation(walk)
    }

    pub fn leader(&self) -> &ClosedWalk {
        &self.leader
    }

    /// Increments on every switch; identifies the current leader in traces.
    pub fn leader_index(&self) -> usize {
        self.leader_index
    }

    pub fn switches(&self) -> usize {
        self.switches
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn expert_loss(&self) -> f64 {
        self.expert_loss
    }

    pub fn perturbations(&self) -> &PerturbationSet {
        &self.perturbations
    }

    pub fn graph(&self) -> &AdmdpGraph {
        &self.graph
    }
}

/// Per-leader Monte-Carlo switch statistics at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderSwitchStats {
    pub walk: ClosedWalk,
    pub times_leader: usize,
    pub switches: usize,
    /// `(|S|+1)·λ·ℓ_t(s_t(c), a_t(c))`.
    pub bound: f64,
}

impl LeaderSwitchStats {
    pub fn rate(&self) -> f64 {
        self.switches as f64 / self.times_leader.max(1) as f64
    }

    /// Binomial standard error of `rate()`, floored at one trial's worth.
    pub fn sigma(&self) -> f64 {
        let n = self.times_leader.max(1) as f64;
        let p = self.rate();
        (p * (1.0 - p) / n).sqrt().max(1.0 / n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchEstimate {
    pub trials: usize,
    pub switches: usize,
    /// Mean of the bound over the sampled leaders `C_t`.
    pub mean_bound: f64,
    pub per_leader: Vec<LeaderSwitchStats>,
}

impl SwitchEstimate {
    pub fn rate(&self) -> f64 {
        self.switches as f64 / self.trials as f64
    }

    pub fn sigma(&self) -> f64 {
        let n = self.trials as f64;
        let p = self.rate();
        (p * (1.0 - p) / n).sqrt().max(1.0 / n)
    }
}

/// Estimates `Pr[C_{t+1} ≠ C_t]` over fresh perturbation draws, where `losses`
/// holds `ℓ_1..ℓ_t` and the last entry is the step under test.
pub fn estimate_switch_probability(
    graph: &AdmdpGraph,
    losses: &[LossFunction],
    lambda: f64,
    trials: usize,
    seed: u64,
    start_class: usize,
) -> Result<SwitchEstimate> {
    let (ns, na) = (graph.num_states(), graph.num_actions());
    let (last, history) = losses
        .split_last()
        .ok_or_else(|| Error::Config("need at least one loss function".into()))?;
    let t = losses.len();
    let before = FoldSet::from_losses(ns, na, ns, history);
    let mut after = before.clone();
    after.push(last);

    let mut rng = stream_rng(seed, streams::PERTURBATION);
    let mut per_leader: Vec<LeaderSwitchStats> = Vec::new();
    let mut switches = 0;
    let mut bound_sum = 0.0;
    for _ in 0..trials {
        let p = PerturbationSet::draw(ns, na, lambda, &mut rng)?;
        let (_, current) = best_cycle_overall(graph, &before, Some(&p), start_class)?;
        let (next_value, next) = best_cycle_overall(graph, &after, Some(&p), start_class)?;
        let incumbent = after.get(current.len()).walk_loss(&current) + p.walk_perturbation(&current);
        let switched = incumbent > next_value + TIE_TOLERANCE && next != current;
        let bound = (ns + 1) as f64 * lambda * last.get(current.state_at(t), current.action_at(t));
        bound_sum += bound;
        switches += usize::from(switched);
        match per_leader.iter_mut().find(|s| s.walk == current) {
            Some(stats) => {
                stats.times_leader += 1;
                stats.switches += usize::from(switched);
            }
            None => per_leader.push(LeaderSwitchStats {
                walk: current,
                times_leader: 1,
                switches: usize::from(switched),
                bound,
            }),
        }
    }
    per_leader.sort_by_key(|s| std::cmp::Reverse(s.times_leader));
    Ok(SwitchEstimate {
        trials,
        switches,
        mean_bound: bound_sum / trials.max(1) as f64,
        per_leader,
    })
}
