use crate::error::{Error, Result};
use crate::mdp::policy::DeterministicPolicy;
use crate::mdp::stochastic::{Diameter, StochasticMdp};

/// How to land on one target exactly `ℓ*` steps after leaving the loop state.
#[derive(Debug, Clone, PartialEq)]
pub struct CatchTarget {
    /// Steps spent on the loop action before heading out.
    pub wait: usize,
    /// `ℓ_{s'}`: steps of the goto policy after waiting.
    pub goto_len: usize,
    /// `Pr[T(s' | goto, s*) = ℓ_{s'}]`, the first-passage mass used to pick `ℓ_{s'}`.
    pub first_passage_prob: f64,
    /// `p_{s'}`: probability of standing on the target after `ℓ*` steps.
    pub hit_prob: f64,
}

/// Nonstationary catching policies out of the loop state `s*`.
#[derive(Debug, Clone)]
pub struct CatchingPlan {
    pub loop_state: usize,
    pub loop_action: usize,
    pub ell_star: usize,
    pub targets: Vec<CatchTarget>,
    pub p_star: f64,
    pub diameter: Diameter,
}

impl CatchingPlan {
    pub fn build(mdp: &StochasticMdp) -> Result<Self> {
        let (loop_state, loop_action) = mdp.loop_state().ok_or(Error::AssumptionViolated)?;
        let diameter = mdp.diameter()?;
        let horizon = 2 * diameter.ceil();
        let n = mdp.num_states();

        let mut goto_len = vec![0; n];
        let mut first_passage = vec![1.0; n];
        for target in (0..n).filter(|&s| s != loop_state) {
            let pmf = mdp.hitting_time_pmf(&diameter.goto[target], loop_state, target, horizon);
            let (best, &mass) =
                pmf.iter().enumerate().fold(
                    (0, &f64::NEG_INFINITY),
                    |acc, cur| if cur.1 > acc.1 { cur } else { acc },
                );
            goto_len[target] = best + 1;
            first_passage[target] = mass;
        }
        let ell_star = goto_len.iter().copied().max().unwrap_or(0);

        let targets: Vec<CatchTarget> = (0..n)
            .map(|target| {
                let hit_prob = if target == loop_state {
                    1.0
                } else {
                    landing_prob(mdp, &diameter.goto[target], loop_state, target, goto_len[target])
                };
                CatchTarget {
                    wait: ell_star - goto_len[target],
                    goto_len: goto_len[target],
                    first_passage_prob: first_passage[target],
                    hit_prob,
                }
            })
            .collect();
        let p_star = targets.iter().map(|t| t.hit_prob).fold(1.0, f64::min);

        let plan = Self {
            loop_state,
            loop_action,
            ell_star,
            targets,
            p_star,
            diameter,
        };
        plan.check_bounds()?;
        Ok(plan)
    }

    /// `ℓ* ≤ 2⌈D⌉` and `p_{s'} ≥ 1/(4⌈D⌉)` for every target other than `s*`.
    pub fn check_bounds(&self) -> Result<()> {
        let ceil_d = self.diameter.ceil();
        if self.ell_star > 2 * ceil_d {
            return Err(Error::Invariant(format!(
                "l* = {} exceeds 2 ceil(D) = {}",
                self.ell_star,
                2 * ceil_d
            )));
        }
        for (s, t) in self.targets.iter().enumerate() {
            if s == self.loop_state {
                continue;
            }
            let floor = 1.0 / (4.0 * ceil_d as f64);
            if t.first_passage_prob < floor || t.hit_prob < t.first_passage_prob - 1e-15 {
                return Err(Error::Invariant(format!(
                    "target {s} catch probability {} below 1/(4 ceil(D)) = {floor}",
                    t.first_passage_prob
                )));
            }
        }
        Ok(())
    }

    /// Optimal first-passage policy towards `s*`.
    pub fn navigation_policy(&self) -> &DeterministicPolicy {
        &self.diameter.goto[self.loop_state]
    }

    /// Action of `π_target` at `step` (0-based, `< ℓ*`) of an attempt, in `state`.
    pub fn attempt_action(&self, target: usize, step: usize, state: usize) -> usize {
        if step < self.targets[target].wait {
            self.loop_action
        } else {
            self.diameter.goto[target].action(state)
        }
    }

    /// Acceptance probability `p* / p_target`.
    pub fn acceptance(&self, target: usize) -> f64 {
        (self.p_star / self.targets[target].hit_prob).min(1.0)
    }
}

/// Probability of standing on `target` after exactly `steps` steps of `policy` from `from`.
fn landing_prob(mdp: &StochasticMdp, policy: &DeterministicPolicy, from: usize, target: usize, steps: usize) -> f64 {
    let mut dist = vec![0.0; mdp.num_states()];
    dist[from] = 1.0;
    for _ in 0..steps {
        dist = mdp.propagate(policy, &dist);
    }
    dist[target]
}
