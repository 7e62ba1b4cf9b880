//! Learner for deterministic MDPs: mirror the FPL leader walk and spend `γd`
//! steps catching up whenever the leader changes.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::fpl::{FplState, LambdaMode};
use crate::harness::record::{Algorithm, RunRecord, StepRow};
use crate::mdp::{enumerate_policies, AdmdpGraph, ClosedWalk, DeterministicPolicy, LossFunction};

/// Default bound on `|S|` for exhaustive hindsight baselines.
pub const EXHAUSTIVE_STATE_CAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FplConfig {
    pub lambda: LambdaMode,
    pub seed: u64,
}

/// Plays `losses.len()` rounds from `start_state`.
pub fn run(graph: &AdmdpGraph, losses: &[LossFunction], config: FplConfig, start_state: usize) -> Result<RunRecord> {
    if start_state >= graph.num_states() {
        return Err(Error::Config(format!("start state {start_state} out of range")));
    }
    let mut fpl = FplState::init(graph, config.lambda, config.seed, graph.class_of(start_state))?;
    let transit = graph.transit_length();
    let mut state = start_state;
    let mut plan: VecDeque<usize> = VecDeque::new();
    if state != fpl.leader().state_at(1) {
        plan = plan_transit(graph, fpl.leader(), state, 1, transit)?;
    }

    let mut rows = Vec::with_capacity(losses.len());
    for (i, loss) in losses.iter().enumerate() {
        let t = i + 1;
        let leader_index = fpl.leader_index();
        let (action, in_transit) = match plan.pop_front() {
            Some(a) => (a, true),
            None => {
                let leader = fpl.leader();
                if leader.state_at(t) != state {
                    return Err(Error::Invariant(format!(
                        "out of phase at t = {t}: in state {state}, leader {leader} is in {}",
                        leader.state_at(t)
                    )));
                }
                (leader.action_at(t), false)
            }
        };
        let (from, incurred) = (state, loss.get(state, action));
        state = graph.next(state, action);
        let (leader, switched) = fpl.step(loss)?;
        if switched {
            // a running transit is abandoned and replanned towards the newest leader
            plan = if state == leader.state_at(t + 1) {
                VecDeque::new()
            } else {
                plan_transit(graph, leader, state, t + 1, transit)?
            };
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
    let truncated = !plan.is_empty();
    Ok(RunRecord::new(Algorithm::Det, config.seed, rows, truncated))
}

/// Actions moving from `state` at time `t` onto `walk` at time `t + length`.
fn plan_transit(
    graph: &AdmdpGraph,
    walk: &ClosedWalk,
    state: usize,
    t: usize,
    length: usize,
) -> Result<VecDeque<usize>> {
    let target = walk.state_at(t + length);
    Ok(graph.path_of_length(state, target, length)?.into())
}

/// Best stationary deterministic policy in hindsight.
#[derive(Debug, Clone, PartialEq)]
pub struct Hindsight {
    pub loss: f64,
    pub policy: DeterministicPolicy,
    /// The cycle the policy settles into from the start state.
    pub cycle: ClosedWalk,
}

/// Total loss of following `policy` from `start_state`.
pub fn policy_loss(
    graph: &AdmdpGraph,
    policy: &DeterministicPolicy,
    losses: &[LossFunction],
    start_state: usize,
) -> f64 {
    let mut state = start_state;
    let mut total = 0.0;
    for loss in losses {
        let a = policy.action(state);
        total += loss.get(state, a);
        state = graph.next(state, a);
    }
    total
}

/// The cycle `policy` eventually repeats when started in `start_state`.
pub fn policy_cycle(graph: &AdmdpGraph, policy: &DeterministicPolicy, start_state: usize) -> Result<ClosedWalk> {
    let mut seen = vec![usize::MAX; graph.num_states()];
    let mut order = Vec::new();
    let mut state = start_state;
    while seen[state] == usize::MAX {
        seen[state] = order.len();
        order.push(state);
        state = graph.next(state, policy.action(state));
    }
    let actions: Vec<usize> = order[seen[state]..].iter().map(|&s| policy.action(s)).collect();
    ClosedWalk::from_actions(graph, state, &actions)
}

/// Enumerates every stationary deterministic policy; `CapExceeded` above `state_cap` states.
pub fn best_policy_in_hindsight(
    graph: &AdmdpGraph,
    losses: &[LossFunction],
    start_state: usize,
    state_cap: usize,
) -> Result<Hindsight> {
    if graph.num_states() > state_cap {
        return Err(Error::CapExceeded {
            what: "hindsight state count",
            cap: state_cap,
        });
    }
    let policies = enumerate_policies(graph.num_states(), graph.num_actions(), usize::MAX)?;
    let mut best: Option<(f64, DeterministicPolicy)> = None;
    for policy in policies {
        let loss = policy_loss(graph, &policy, losses, start_state);
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, policy));
        }
    }
    let (loss, policy) = best.ok_or(Error::NoExpert)?;
    let cycle = policy_cycle(graph, &policy, start_state)?;
    Ok(Hindsight { loss, policy, cycle })
}
