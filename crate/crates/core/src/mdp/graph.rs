//! Deterministic MDPs as action-labelled digraphs.
//!
//! Construction validates strong connectivity and precomputes everything the
//! deterministic learner needs: predecessor sets `I(s)`, the period `γ`, the
//! cycle-class labelling and the critical length `d` such that every pair of
//! same-class states is joined by a walk of length `γℓ` for all `ℓ ≥ d`.

use std::collections::VecDeque;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmdpGraph {
    num_states: usize,
    num_actions: usize,
    next: Vec<usize>,
    predecessors: Vec<Vec<(usize, usize)>>,
    period: usize,
    classes: Vec<usize>,
    critical_length: usize,
}

impl AdmdpGraph {
    /// Builds the graph from `next_map[s][a] = N(s, a)`.
    pub fn new(next_map: &[Vec<usize>]) -> Result<Self> {
        let num_states = next_map.len();
        if num_states == 0 {
            return Err(Error::InvalidMdp("graph has no states".into()));
        }
        let num_actions = next_map[0].len();
        if num_actions == 0 {
            return Err(Error::InvalidMdp("graph has no actions".into()));
        }
        let mut next = Vec::with_capacity(num_states * num_actions);
        for (s, row) in next_map.iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::InvalidMdp(format!(
                    "state {s} has {} actions, expected {num_actions}",
                    row.len()
                )));
            }
            for &t in row {
                if t >= num_states {
                    return Err(Error::InvalidMdp(format!("successor {t} of state {s} out of range")));
                }
                next.push(t);
            }
        }

        let mut predecessors = vec![Vec::new(); num_states];
        for s in 0..num_states {
            for a in 0..num_actions {
                predecessors[next[s * num_actions + a]].push((s, a));
            }
        }

        let next_ref = &next;
        check_strongly_connected(num_states, |u| {
            (0..num_actions).map(move |a| next_ref[u * num_actions + a])
        })?;

        let (period, classes) = period_and_classes(num_states, num_actions, &next);
        let mut graph = Self {
            num_states,
            num_actions,
            next,
            predecessors,
            period,
            classes,
            critical_length: 0,
        };
        graph.critical_length = compute_critical_length(&graph)?;
        Ok(graph)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `N(s, a)`.
    #[inline]
    pub fn next(&self, state: usize, action: usize) -> usize {
        self.next[state * self.num_actions + action]
    }

    /// `I(s)`: all `(s', a)` with `N(s', a) = s`, sorted.
    pub fn predecessors(&self, state: usize) -> &[(usize, usize)] {
        &self.predecessors[state]
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn class_of(&self, state: usize) -> usize {
        self.classes[state]
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn critical_length(&self) -> usize {
        self.critical_length
    }

    /// Length `γd` of every catch-up path used by the deterministic learner.
    pub fn transit_length(&self) -> usize {
        self.period * self.critical_length
    }

    pub fn next_map(&self) -> Vec<Vec<usize>> {
        self.next.chunks(self.num_actions).map(<[usize]>::to_vec).collect()
    }

    fn successor_set(&self, from: &FixedBitSet) -> FixedBitSet {
        let mut out = FixedBitSet::with_capacity(self.num_states);
        for u in from.ones() {
            for a in 0..self.num_actions {
                out.insert(self.next(u, a));
            }
        }
        out
    }

    /// Actions of a walk of exactly `length` steps from `from` to `to`, built
    /// backwards through the exact-length forward reachability layers.
    pub fn path_of_length(&self, from: usize, to: usize, length: usize) -> Result<Vec<usize>> {
        let no_path = Error::NoPath { from, to, length };
        if from >= self.num_states || to >= self.num_states {
            return Err(no_path);
        }
        if self.classes[to] != (self.classes[from] + length) % self.period {
            return Err(no_path);
        }
        let mut layers = Vec::with_capacity(length + 1);
        let mut first = FixedBitSet::with_capacity(self.num_states);
        first.insert(from);
        layers.push(first);
        for i in 1..=length {
            let layer = self.successor_set(&layers[i - 1]);
            layers.push(layer);
        }
        if !layers[length].contains(to) {
            return Err(no_path);
        }
        let mut actions = vec![0; length];
        let mut current = to;
        for i in (1..=length).rev() {
            let &(prev, action) = self.predecessors[current]
                .iter()
                .find(|(u, _)| layers[i - 1].contains(*u))
                .ok_or_else(|| Error::Invariant("reachability layer without predecessor".into()))?;
            actions[i - 1] = action;
            current = prev;
        }
        debug_assert_eq!(current, from);
        Ok(actions)
    }

    /// Follows `actions` from `from` and returns the final state.
    pub fn replay(&self, from: usize, actions: &[usize]) -> usize {
        actions.iter().fold(from, |s, &a| self.next(s, a))
    }
}

/// Forward and backward BFS from state 0.
pub(crate) fn check_strongly_connected<F, I>(num_states: usize, successors: F) -> Result<()>
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    let mut reverse = vec![Vec::new(); num_states];
    for u in 0..num_states {
        for v in successors(u) {
            reverse[v].push(u);
        }
    }
    let forward = bfs_levels(num_states, 0, &successors);
    if let Some(v) = forward.iter().position(Option::is_none) {
        return Err(Error::NotStronglyConnected { from: 0, to: v });
    }
    let backward = bfs_levels(num_states, 0, |u| reverse[u].clone().into_iter());
    if let Some(v) = backward.iter().position(Option::is_none) {
        return Err(Error::NotStronglyConnected { from: v, to: 0 });
    }
    Ok(())
}

fn bfs_levels<F, I>(num_states: usize, root: usize, successors: F) -> Vec<Option<usize>>
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    let mut level = vec![None; num_states];
    level[root] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].unwrap_or(0);
        for v in successors(u) {
            if level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Period as the gcd of `level(u) + 1 - level(v)` over all edges `u -> v`, with
/// BFS levels from state 0; classes are levels mod the period.
fn period_and_classes(num_states: usize, num_actions: usize, next: &[usize]) -> (usize, Vec<usize>) {
    let levels: Vec<usize> = bfs_levels(num_states, 0, |u| {
        (0..num_actions).map(move |a| next[u * num_actions + a])
    })
    .into_iter()
    .map(|l| l.expect("strongly connected"))
    .collect();
    let mut period = 0;
    for u in 0..num_states {
        for a in 0..num_actions {
            let v = next[u * num_actions + a];
            let diff = (levels[u] + 1).abs_diff(levels[v]);
            period = gcd(period, diff);
        }
    }
    let classes = levels.iter().map(|l| l % period).collect();
    (period, classes)
}

/// Period of a strongly connected graph (recomputed from the transition map).
pub fn compute_period(graph: &AdmdpGraph) -> usize {
    period_and_classes(graph.num_states, graph.num_actions, &graph.next).0
}

/// Smallest `d` such that every same-class pair is joined by a walk of length
/// `γℓ` for every `ℓ ≥ d`, via powers of the `γ`-step reachability relation.
pub fn compute_critical_length(graph: &AdmdpGraph) -> Result<usize> {
    let n = graph.num_states;
    let gamma = graph.period;
    let cap = (n * n).max(1);

    // gamma_step[u]: states reachable from u in exactly γ steps.
    let gamma_step: Vec<FixedBitSet> = (0..n)
        .map(|u| {
            let mut set = FixedBitSet::with_capacity(n);
            set.insert(u);
            (0..gamma).fold(set, |acc, _| graph.successor_set(&acc))
        })
        .collect();
    let class_sets: Vec<FixedBitSet> = (0..gamma)
        .map(|c| {
            let mut set = FixedBitSet::with_capacity(n);
            (0..n).filter(|&v| graph.classes[v] == c).for_each(|v| set.insert(v));
            set
        })
        .collect();

    let mut reach = gamma_step.clone();
    for ell in 1..=cap {
        if (0..n).all(|u| reach[u] == class_sets[graph.classes[u]]) {
            return Ok(ell);
        }
        reach = reach
            .iter()
            .map(|row| {
                let mut out = FixedBitSet::with_capacity(n);
                row.ones().for_each(|w| out.union_with(&gamma_step[w]));
                out
            })
            .collect();
    }
    Err(Error::CapExceeded {
        what: "critical length search",
        cap,
    })
}
