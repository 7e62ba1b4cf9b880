//! Learner for communicating MDPs with a loop state: FPL over every stationary
//! deterministic policy, switching through the catching routine.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fpl::{draw_exponentials, LambdaMode, TIE_TOLERANCE};
use crate::harness::record::{Algorithm, RunRecord, StepRow};
use crate::mdp::{
    enumerate_policies, sample_index, CatchingPlan, DeterministicPolicy, LossFunction, StateDistributions,
    StochasticMdp,
};
use crate::rng::{stream_rng, streams};

/// Default cap on `|A|^|S|`.
pub const POLICY_CAP: usize = 1 << 16;

/// Rate for FPL over `num_policies` experts with losses in `[0, 1]`.
pub fn policy_rate(mode: LambdaMode, num_policies: usize, epoch: u32) -> f64 {
    let log = crate::fpl::log_size(num_policies);
    let first_order = |l: f64| (log / l.max(1.0)).sqrt().min(0.25);
    match mode {
        LambdaMode::Fixed(l) => l,
        LambdaMode::HorizonTuned(t) => (log / t.max(1) as f64).sqrt(),
        LambdaMode::FirstOrder { loss_bound } => first_order(loss_bound),
        LambdaMode::Doubling => first_order(2f64.powi(epoch as i32)),
    }
}

/// The expert side of the stochastic learners: anything that names a leader
/// policy and updates it from full-information losses.
pub trait PolicyExperts {
    fn leader(&self) -> &DeterministicPolicy;
    /// Increments on every switch.
    fn leader_index(&self) -> usize;
    /// Feeds `ℓ_t`; returns whether the leader changed.
    fn observe(&mut self, mdp: &StochasticMdp, loss: &LossFunction) -> Result<bool>;
}

/// FPL with one Exponential(λ) perturbation per policy.
#[derive(Debug, Clone)]
pub struct PolicyFplState {
    mode: LambdaMode,
    rng: ChaCha8Rng,
    streams: Vec<StateDistributions>,
    cumulative: Vec<f64>,
    perturbation: Vec<f64>,
    leader: usize,
    leader_index: usize,
    switches: usize,
    steps: usize,
    epoch: u32,
    /// `Σ_t ℓ̂_t(π_t)`.
    expert_loss: f64,
    last_leader_loss: f64,
}

impl PolicyFplState {
    pub fn new(mdp: &StochasticMdp, mode: LambdaMode, seed: u64, cap: usize) -> Result<Self> {
        let policies = enumerate_policies(mdp.num_states(), mdp.num_actions(), cap)?;
        let mut rng = stream_rng(seed, streams::PERTURBATION);
        let perturbation = draw_exponentials(policies.len(), policy_rate(mode, policies.len(), 0), &mut rng)?;
        let streams: Vec<_> = policies.iter().map(|p| StateDistributions::new(mdp, p)).collect();
        let mut state = Self {
            mode,
            rng,
            cumulative: vec![0.0; streams.len()],
            streams,
            perturbation,
            leader: 0,
            leader_index: 0,
            switches: 0,
            steps: 0,
            epoch: 0,
            expert_loss: 0.0,
            last_leader_loss: 0.0,
        };
        state.leader = state.argmin();
        Ok(state)
    }

    fn objective(&self, i: usize) -> f64 {
        self.perturbation[i] + self.cumulative[i]
    }

    /// First index attaining the minimum perturbed cumulative loss.
    fn argmin(&self) -> usize {
        (0..self.streams.len()).fold(0, |best, i| {
            if self.objective(i) < self.objective(best) {
                i
            } else {
                best
            }
        })
    }

    /// Feeds `ℓ_t` and returns `(leader index into the policy table, switched)`.
    pub fn step(&mut self, mdp: &StochasticMdp, loss: &LossFunction) -> Result<(usize, bool)> {
        let mut leader_loss = 0.0;
        for (i, (stream, cum)) in self.streams.iter_mut().zip(&mut self.cumulative).enumerate() {
            let l = stream.expected_loss(loss);
            if i == self.leader {
                leader_loss = l;
            }
            *cum += l;
            stream.advance(mdp)?;
        }
        self.last_leader_loss = leader_loss;
        self.expert_loss += leader_loss;
        self.steps += 1;
        if self.mode == LambdaMode::Doubling {
            let mut redraw = false;
            while self.expert_loss > 2f64.powi(self.epoch as i32) {
                self.epoch += 1;
                redraw = true;
            }
            if redraw {
                let lambda = policy_rate(self.mode, self.streams.len(), self.epoch);
                self.perturbation = draw_exponentials(self.streams.len(), lambda, &mut self.rng)?;
            }
        }
        let best = self.argmin();
        let switched = best != self.leader && self.objective(self.leader) > self.objective(best) + TIE_TOLERANCE;
        if switched {
            self.leader = best;
            self.leader_index += 1;
            self.switches += 1;
        }
        Ok((self.leader, switched))
    }

    pub fn leader_policy_index(&self) -> usize {
        self.leader
    }

    pub fn switches(&self) -> usize {
        self.switches
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn perturbation(&self) -> &[f64] {
        &self.perturbation
    }

    pub fn policy(&self, i: usize) -> &DeterministicPolicy {
        self.streams[i].policy()
    }

    /// `ℓ̂_t(π_t)` for the most recent step.
    pub fn last_leader_loss(&self) -> f64 {
        self.last_leader_loss
    }
}

impl PolicyExperts for PolicyFplState {
    fn leader(&self) -> &DeterministicPolicy {
        self.policy(self.leader)
    }

    fn leader_index(&self) -> usize {
        self.leader_index
    }

    fn observe(&mut self, mdp: &StochasticMdp, loss: &LossFunction) -> Result<bool> {
        self.step(mdp, loss).map(|(_, s)| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CatchPhase {
    Navigate,
    Attempt { target: usize, step: usize },
}

/// The catching routine as a resumable state machine: called once per step
/// with the current time and state, it returns the action to play or `None`
/// once the agent's state is distributed as the target policy's.
#[derive(Debug, Clone)]
pub struct SwitchPolicy {
    target: DeterministicPolicy,
    cursor: StateDistributions,
    phase: CatchPhase,
    attempts: usize,
    cap: usize,
    started: usize,
    done: Option<usize>,
}

impl SwitchPolicy {
    /// Starts catching `target` at time `t0`.
    pub fn new(mdp: &StochasticMdp, plan: &CatchingPlan, target: &DeterministicPolicy, t0: usize) -> Self {
        let ceil_d = plan.diameter.ceil().max(1);
        Self {
            target: target.clone(),
            cursor: StateDistributions::new(mdp, target),
            phase: CatchPhase::Navigate,
            attempts: 0,
            cap: 10_000 * ceil_d * ceil_d,
            started: t0,
            done: None,
        }
    }

    pub fn target(&self) -> &DeterministicPolicy {
        &self.target
    }

    pub fn attempts(&self) -> usize {
        self.attempts
    }

    /// `T_switch`, once reached.
    pub fn finished_at(&self) -> Option<usize> {
        self.done
    }

    pub fn started_at(&self) -> usize {
        self.started
    }

    fn distribution_at(&mut self, mdp: &StochasticMdp, t: usize) -> Result<&[f64]> {
        while self.cursor.time() < t {
            self.cursor.advance(mdp)?;
        }
        Ok(self.cursor.current())
    }

    /// Action for time `t` in `state`, or `None` when the catch has completed.
    pub fn act<R: Rng + ?Sized>(
        &mut self,
        mdp: &StochasticMdp,
        plan: &CatchingPlan,
        t: usize,
        state: usize,
        rng: &mut R,
    ) -> Result<Option<usize>> {
        if self.done.is_some() {
            return Ok(None);
        }
        loop {
            match self.phase {
                CatchPhase::Navigate => {
                    if state != plan.loop_state {
                        return Ok(Some(plan.navigation_policy().action(state)));
                    }
                    self.attempts += 1;
                    if self.attempts > self.cap {
                        return Err(Error::NonTermination { cap: self.cap });
                    }
                    let dist = self.distribution_at(mdp, t + plan.ell_star)?;
                    let target = sample_index(dist, rng);
                    self.phase = CatchPhase::Attempt { target, step: 0 };
                }
                CatchPhase::Attempt { target, step } if step == plan.ell_star => {
                    if state == target && rng.random::<f64>() < plan.acceptance(target) {
                        self.done = Some(t);
                        return Ok(None);
                    }
                    self.phase = CatchPhase::Navigate;
                }
                CatchPhase::Attempt { target, step } => {
                    self.phase = CatchPhase::Attempt { target, step: step + 1 };
                    return Ok(Some(plan.attempt_action(target, step, state)));
                }
            }
        }
    }
}

/// Outcome of one standalone catch.
#[derive(Debug, Clone, PartialEq)]
pub struct CatchOutcome {
    pub t_switch: usize,
    pub final_state: usize,
    /// `(state, action)` for times `t0..t_switch`.
    pub trajectory: Vec<(usize, usize)>,
    pub attempts: usize,
}

/// Runs the catching routine from `state` at time `t0` until it hands over to `policy`.
pub fn switch_policy<R: Rng + ?Sized>(
    mdp: &StochasticMdp,
    plan: &CatchingPlan,
    policy: &DeterministicPolicy,
    t0: usize,
    state: usize,
    rng: &mut R,
) -> Result<CatchOutcome> {
    let mut routine = SwitchPolicy::new(mdp, plan, policy, t0);
    let mut trajectory = Vec::new();
    let (mut t, mut s) = (t0, state);
    while let Some(a) = routine.act(mdp, plan, t, s, rng)? {
        trajectory.push((s, a));
        s = mdp.sample_next(s, a, rng);
        t += 1;
    }
    Ok(CatchOutcome {
        t_switch: t,
        final_state: s,
        trajectory,
        attempts: routine.attempts(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatchTimeStats {
    pub trials: usize,
    /// Mean of `T_switch - t0`.
    pub mean: f64,
    pub std_dev: f64,
}

impl CatchTimeStats {
    pub fn std_error(&self) -> f64 {
        self.std_dev / (self.trials as f64).sqrt()
    }
}

/// Monte-Carlo catch time, each trial starting in `state` at time `t0`.
pub fn expected_catch_time_stats(
    mdp: &StochasticMdp,
    plan: &CatchingPlan,
    policy: &DeterministicPolicy,
    t0: usize,
    state: usize,
    trials: usize,
    seed: u64,
) -> Result<CatchTimeStats> {
    let mut rng = stream_rng(seed, streams::CATCHING);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let out = switch_policy(mdp, plan, policy, t0, state, &mut rng)?;
        let d = (out.t_switch - t0) as f64;
        sum += d;
        sum_sq += d * d;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(CatchTimeStats {
        trials,
        mean,
        std_dev: var.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochConfig {
    pub lambda: LambdaMode,
    pub seed: u64,
}

/// The shared interaction loop: follow the leader policy, catch it after every switch.
pub fn run_with_experts<E: PolicyExperts>(
    mdp: &StochasticMdp,
    plan: &CatchingPlan,
    losses: &[LossFunction],
    experts: &mut E,
    algo: Algorithm,
    seed: u64,
) -> Result<RunRecord> {
    let mut env = stream_rng(seed, streams::ENVIRONMENT);
    let mut catch_rng = stream_rng(seed, streams::CATCHING);
    let mut state = mdp.sample_start(&mut env);
    let mut catching: Option<SwitchPolicy> = None;
    let mut rows = Vec::with_capacity(losses.len());
    for (i, loss) in losses.iter().enumerate() {
        let t = i + 1;
        let leader_index = experts.leader_index();
        let caught = match catching.as_mut() {
            Some(routine) => routine.act(mdp, plan, t, state, &mut catch_rng)?,
            None => None,
        };
        let (action, in_transit) = match caught {
            Some(a) => (a, true),
            None => {
                catching = None;
                (experts.leader().action(state), false)
            }
        };
        let incurred = loss.get(state, action);
        let from = state;
        state = mdp.sample_next(state, action, &mut env);
        let switched = experts.observe(mdp, loss)?;
        if switched {
            // a running catch is abandoned and restarted for the new leader
            catching = Some(SwitchPolicy::new(mdp, plan, experts.leader(), t + 1));
        }
        rows.push(StepRow {
            t,
            state: from,
            action,
            loss: incurred,
            leader: leader_index,
            transit: in_transit,
            switch: switched,
        });
    }
    Ok(RunRecord::new(algo, seed, rows, catching.is_some()))
}

pub fn run_stochastic(mdp: &StochasticMdp, losses: &[LossFunction], config: StochConfig) -> Result<RunRecord> {
    let plan = CatchingPlan::build(mdp)?;
    let mut fpl = PolicyFplState::new(mdp, config.lambda, config.seed, POLICY_CAP)?;
    run_with_experts(mdp, &plan, losses, &mut fpl, Algorithm::Stoch, config.seed)
}

/// `(L*, best policy)` by exact evaluation of every policy.
pub fn best_policy_expected(
    mdp: &StochasticMdp,
    losses: &[LossFunction],
    cap: usize,
) -> Result<(f64, DeterministicPolicy)> {
    let mut best: Option<(f64, DeterministicPolicy)> = None;
    for policy in enumerate_policies(mdp.num_states(), mdp.num_actions(), cap)? {
        let (loss, _) = mdp.expected_policy_loss(&policy, losses)?;
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, policy));
        }
    }
    best.ok_or(Error::NoExpert)
}
