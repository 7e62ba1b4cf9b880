//! Stochastic MDPs with known kernels: diameter, first-passage laws and exact
//! policy state distributions.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::graph::{check_strongly_connected, AdmdpGraph};
use crate::mdp::policy::{DeterministicPolicy, LossFunction};

const PROB_TOL: f64 = 1e-12;
const VALUE_ITERATION_TOL: f64 = 1e-10;
const VALUE_ITERATION_CAP: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMdp {
    num_states: usize,
    num_actions: usize,
    kernel: Vec<f64>,
    start_dist: Vec<f64>,
    loop_state: Option<(usize, usize)>,
}

impl StochasticMdp {
    /// `kernel[s][a][s']` is `P(s, a, s')`; `loop_state` is `(s*, a)` with `P(s*, a, s*) = 1`.
    pub fn new(kernel: &[Vec<Vec<f64>>], start_dist: Vec<f64>, loop_state: Option<(usize, usize)>) -> Result<Self> {
        let num_states = kernel.len();
        if num_states == 0 {
            return Err(Error::InvalidMdp("MDP has no states".into()));
        }
        let num_actions = kernel[0].len();
        if num_actions == 0 {
            return Err(Error::InvalidMdp("MDP has no actions".into()));
        }
        let mut flat = Vec::with_capacity(num_states * num_actions * num_states);
        for (s, per_action) in kernel.iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(Error::InvalidMdp(format!(
                    "state {s} has {} actions, expected {num_actions}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.iter().enumerate() {
                check_distribution(row, num_states, &format!("P({s}, {a}, .)"))?;
                flat.extend_from_slice(row);
            }
        }
        check_distribution(&start_dist, num_states, "start distribution")?;

        let mdp = Self {
            num_states,
            num_actions,
            kernel: flat,
            start_dist,
            loop_state,
        };
        if let Some((s, a)) = loop_state {
            if s >= num_states || a >= num_actions {
                return Err(Error::InvalidMdp(format!("loop ({s}, {a}) out of range")));
            }
            if mdp.prob(s, a, s) != 1.0 {
                return Err(Error::InvalidMdp(format!(
                    "loop action {a} at state {s} does not stay with probability 1"
                )));
            }
        }
        check_strongly_connected(num_states, |u| mdp.support_successors(u).into_iter()).map_err(|e| match e {
            Error::NotStronglyConnected { from, to } => Error::NotCommunicating { from, to },
            other => other,
        })?;
        Ok(mdp)
    }

    /// Embeds a deterministic graph as a degenerate stochastic MDP.
    pub fn from_admdp(graph: &AdmdpGraph, start_dist: Vec<f64>, loop_state: Option<(usize, usize)>) -> Result<Self> {
        let n = graph.num_states();
        let kernel: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|s| {
                (0..graph.num_actions())
                    .map(|a| {
                        let mut row = vec![0.0; n];
                        row[graph.next(s, a)] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        Self::new(&kernel, start_dist, loop_state)
    }

    fn support_successors(&self, s: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for a in 0..self.num_actions {
            for t in 0..self.num_states {
                if self.prob(s, a, t) > 0.0 && !out.contains(&t) {
                    out.push(t);
                }
            }
        }
        out
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.kernel[(s * self.num_actions + a) * self.num_states + next]
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.num_actions + a) * self.num_states;
        &self.kernel[base..base + self.num_states]
    }

    pub fn start_dist(&self) -> &[f64] {
        &self.start_dist
    }

    pub fn min_start_mass(&self) -> f64 {
        self.start_dist.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn with_start_dist(&self, start_dist: Vec<f64>) -> Result<Self> {
        check_distribution(&start_dist, self.num_states, "start distribution")?;
        Ok(Self {
            start_dist,
            ..self.clone()
        })
    }

    /// The declared loop, or the first `(s, a)` with `P(s, a, s) = 1`.
    pub fn loop_state(&self) -> Option<(usize, usize)> {
        self.loop_state.or_else(|| {
            (0..self.num_states).find_map(|s| {
                (0..self.num_actions)
                    .find(|&a| self.prob(s, a, s) == 1.0)
                    .map(|a| (s, a))
            })
        })
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        sample_index(self.row(s, a), rng)
    }

    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.start_dist, rng)
    }

    /// `d · P_π`.
    pub fn propagate(&self, policy: &DeterministicPolicy, dist: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_states];
        for (s, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(s, policy.action(s))) {
                *o += mass * p;
            }
        }
        out
    }

    /// Exact diameter and optimal first-passage policies.
    pub fn diameter(&self) -> Result<Diameter> {
        let n = self.num_states;
        let mut hitting = Vec::with_capacity(n);
        let mut goto = Vec::with_capacity(n);
        for target in 0..n {
            let (h, policy) = self.first_passage(target)?;
            hitting.push(h);
            goto.push(policy);
        }
        let mut value = 0.0_f64;
        for (target, h) in hitting.iter().enumerate() {
            for (s, &v) in h.iter().enumerate() {
                if s != target {
                    value = value.max(v);
                }
            }
        }
        Ok(Diameter { value, hitting, goto })
    }

    /// Minimum expected hitting times of `target` from every state: value
    /// iteration to tolerance, then policy iteration for an exact fixed point.
    fn first_passage(&self, target: usize) -> Result<(Vec<f64>, DeterministicPolicy)> {
        let n = self.num_states;
        let mut h = vec![0.0; n];
        let sweep_cost = (n * n * self.num_actions).max(1);
        let cap = VALUE_ITERATION_CAP / sweep_cost;
        let mut converged = false;
        for _ in 0..cap.max(1) {
            let (next, _) = self.bellman(&h, target);
            let delta = next.iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            h = next;
            if delta < VALUE_ITERATION_TOL {
                converged = true;
                break;
            }
            if h.iter().any(|&v| v > 1e8) {
                break;
            }
        }
        if !converged {
            let from = (0..n).find(|&s| s != target).unwrap_or(target);
            return Err(Error::NotCommunicating { from, to: target });
        }

        let (_, mut actions) = self.bellman(&h, target);
        for _ in 0..100 {
            let policy = DeterministicPolicy::new(actions.clone(), self.num_actions)?;
            let Some(exact) = self.evaluate_hitting(&policy, target) else {
                break;
            };
            h = exact;
            let (improved, _) = self.bellman(&h, target);
            let mut changed = false;
            for s in 0..n {
                if s == target {
                    continue;
                }
                let current = self.q_value(&h, s, actions[s]);
                if improved[s] < current - 1e-12 {
                    actions[s] = (0..self.num_actions)
                        .min_by(|&a, &b| self.q_value(&h, s, a).total_cmp(&self.q_value(&h, s, b)))
                        .unwrap_or(0);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let policy = DeterministicPolicy::new(actions, self.num_actions)?;
        Ok((h, policy))
    }

    fn q_value(&self, h: &[f64], s: usize, a: usize) -> f64 {
        1.0 + self.row(s, a).iter().zip(h).map(|(p, v)| p * v).sum::<f64>()
    }

    fn bellman(&self, h: &[f64], target: usize) -> (Vec<f64>, Vec<usize>) {
        let n = self.num_states;
        let mut out = vec![0.0; n];
        let mut actions = vec![0; n];
        for s in 0..n {
            if s == target {
                continue;
            }
            let (best_a, best) = (0..self.num_actions)
                .map(|a| (a, self.q_value(h, s, a)))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            out[s] = best;
            actions[s] = best_a;
        }
        (out, actions)
    }

    /// Solves `(I - Q) h = 1` on non-target states; `None` if the policy is improper.
    fn evaluate_hitting(&self, policy: &DeterministicPolicy, target: usize) -> Option<Vec<f64>> {
        let n = self.num_states;
        let others: Vec<usize> = (0..n).filter(|&s| s != target).collect();
        let m = others.len();
        if m == 0 {
            return Some(vec![0.0; n]);
        }
        let mut a = DMatrix::<f64>::identity(m, m);
        for (i, &s) in others.iter().enumerate() {
            let row = self.row(s, policy.action(s));
            for (j, &u) in others.iter().enumerate() {
                a[(i, j)] -= row[u];
            }
        }
        let solution = a.lu().solve(&DVector::from_element(m, 1.0))?;
        if solution.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return None;
        }
        let mut h = vec![0.0; n];
        for (i, &s) in others.iter().enumerate() {
            h[s] = solution[i];
        }
        Some(h)
    }

    /// `Pr[T(to | policy, from) = ℓ]` for `ℓ = 1..=max_len` (index `ℓ - 1`).
    pub fn hitting_time_pmf(&self, policy: &DeterministicPolicy, from: usize, to: usize, max_len: usize) -> Vec<f64> {
        let mut mass = vec![0.0; self.num_states];
        mass[from] = 1.0;
        let mut pmf = Vec::with_capacity(max_len);
        for _ in 0..max_len {
            let mut next = self.propagate(policy, &mass);
            pmf.push(next[to]);
            next[to] = 0.0;
            mass = next;
        }
        pmf
    }

    /// `d_π^t`, with `d_π^1 = d_1`.
    pub fn policy_state_distribution(&self, policy: &DeterministicPolicy, t: usize) -> Result<Vec<f64>> {
        assert!(t >= 1, "time steps start at 1");
        let mut stream = StateDistributions::new(self, policy);
        for _ in 1..t {
            stream.advance(self)?;
        }
        Ok(stream.current().to_vec())
    }

    /// `(L^π, [ℓ̂_1(π), ..., ℓ̂_T(π)])`, computed exactly.
    pub fn expected_policy_loss(
        &self,
        policy: &DeterministicPolicy,
        losses: &[LossFunction],
    ) -> Result<(f64, Vec<f64>)> {
        let mut stream = StateDistributions::new(self, policy);
        let mut per_step = Vec::with_capacity(losses.len());
        for (i, loss) in losses.iter().enumerate() {
            if i > 0 {
                stream.advance(self)?;
            }
            per_step.push(stream.expected_loss(loss));
        }
        Ok((per_step.iter().sum(), per_step))
    }
}

/// Successive `d_π^1, d_π^2, ...` for one policy.
#[derive(Debug, Clone)]
pub struct StateDistributions {
    policy: DeterministicPolicy,
    dist: Vec<f64>,
    t: usize,
}

impl StateDistributions {
    pub fn new(mdp: &StochasticMdp, policy: &DeterministicPolicy) -> Self {
        Self {
            policy: policy.clone(),
            dist: mdp.start_dist.clone(),
            t: 1,
        }
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn current(&self) -> &[f64] {
        &self.dist
    }

    pub fn policy(&self) -> &DeterministicPolicy {
        &self.policy
    }

    /// `ℓ̂_t(π) = Σ_s d_π^t(s) ℓ_t(s, π(s))` at the current time.
    pub fn expected_loss(&self, loss: &LossFunction) -> f64 {
        self.dist
            .iter()
            .enumerate()
            .map(|(s, &m)| m * loss.get(s, self.policy.action(s)))
            .sum()
    }

    pub fn advance(&mut self, mdp: &StochasticMdp) -> Result<()> {
        self.dist = mdp.propagate(&self.policy, &self.dist);
        self.t += 1;
        let total: f64 = self.dist.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invariant(format!(
                "state distribution drifted to mass {total} at t = {}",
                self.t
            )));
        }
        Ok(())
    }
}

/// Output of [`StochasticMdp::diameter`].
#[derive(Debug, Clone)]
pub struct Diameter {
    /// `max_{s ≠ s'} min_π E[T(s' | π, s)]`.
    pub value: f64,
    /// `hitting[target][s]`: optimal expected first-passage time.
    pub hitting: Vec<Vec<f64>>,
    /// `goto[target]`: a stationary policy attaining `hitting[target]`.
    pub goto: Vec<DeterministicPolicy>,
}

impl Diameter {
    /// `ceil(D)`, the integral diameter used by all catching bounds.
    pub fn ceil(&self) -> usize {
        (self.value - 1e-9).ceil().max(0.0) as usize
    }
}

fn check_distribution(row: &[f64], len: usize, what: &str) -> Result<()> {
    if row.len() != len {
        return Err(Error::InvalidMdp(format!(
            "{what} has {} entries, expected {len}",
            row.len()
        )));
    }
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidMdp(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidMdp(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_lazy(p: f64) -> StochasticMdp {
        // action 0 stays, action 1 moves with probability p
        StochasticMdp::new(
            &[
                vec![vec![1.0, 0.0], vec![1.0 - p, p]],
                vec![vec![0.0, 1.0], vec![p, 1.0 - p]],
            ],
            vec![1.0, 0.0],
            Some((0, 0)),
        )
        .unwrap()
    }

    #[test]
    fn deterministic_two_cycle_has_unit_diameter() {
        let g = AdmdpGraph::new(&[vec![1], vec![0]]).unwrap();
        let mdp = StochasticMdp::from_admdp(&g, vec![1.0, 0.0], None).unwrap();
        assert!((mdp.diameter().unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lazy_chain_diameter_is_geometric_mean() {
        let d = two_state_lazy(0.5).diameter().unwrap();
        assert!((d.value - 2.0).abs() < 1e-9);
        assert_eq!(d.ceil(), 2);
        assert_eq!(d.goto[1].action(0), 1);
    }

    #[test]
    fn geometric_hitting_pmf() {
        let mdp = two_state_lazy(0.3);
        let policy = DeterministicPolicy::new(vec![1, 1], 2).unwrap();
        let pmf = mdp.hitting_time_pmf(&policy, 0, 1, 20);
        for (i, &v) in pmf.iter().enumerate() {
            assert!((v - 0.3 * 0.7f64.powi(i as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_path_pmf_is_point_mass() {
        let g = AdmdpGraph::new(&[vec![1], vec![2], vec![3], vec![0]]).unwrap();
        let mdp = StochasticMdp::from_admdp(&g, vec![1.0, 0.0, 0.0, 0.0], None).unwrap();
        let policy = DeterministicPolicy::new(vec![0; 4], 1).unwrap();
        assert_eq!(mdp.hitting_time_pmf(&policy, 0, 3, 5), vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(
            mdp.policy_state_distribution(&policy, 3).unwrap(),
            vec![0.0, 0.0, 1.0, 0.0]
        );
        assert_eq!(mdp.policy_state_distribution(&policy, 1).unwrap(), mdp.start_dist());
    }

    #[test]
    fn validation() {
        assert!(StochasticMdp::new(&[vec![vec![0.5, 0.4]], vec![vec![0.0, 1.0]]], vec![1.0, 0.0], None).is_err());
        assert!(
            StochasticMdp::new(&[vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]], vec![1.0, 0.0], None)
                .is_err_and(|e| matches!(e, Error::NotCommunicating { .. }))
        );
        assert!(StochasticMdp::new(
            &[vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            vec![1.0, 0.0],
            Some((0, 0))
        )
        .is_err());
    }

    #[test]
    fn zero_losses_have_zero_expected_loss() {
        let mdp = two_state_lazy(0.5);
        let policy = DeterministicPolicy::new(vec![1, 0], 2).unwrap();
        let losses = vec![LossFunction::zeros(2, 2); 5];
        assert_eq!(mdp.expected_policy_loss(&policy, &losses).unwrap().0, 0.0);
    }
}
