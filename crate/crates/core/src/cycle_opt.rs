//! Offline leader finding over closed walks.
//!
//! For a start state `s` and length `k`, the best walk in `C(s, k)` minimises
//! `⟨x, l⟩` over the convex hull of walk indicator vectors `x(c)`, where
//! `x(c)[u, a, i] = 1` iff the walk takes action `a` in state `u` at position `i`.
//! That hull is a layered unit-flow polytope, so the LP optimum is attained by a
//! walk and any positive-weight chain through an optimal solution is optimal.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fpl::PerturbationSet;
use crate::lp::{EqualityLp, LpOutcome};
use crate::mdp::{AdmdpGraph, ClosedWalk, LossFunction};

/// Running sums `Σ_{j ≡ i mod k} ℓ_j(s, a)` for one walk length.
#[derive(Debug, Clone)]
pub struct CumulativeFold {
    k: usize,
    num_actions: usize,
    cells: usize,
    sums: Vec<f64>,
    steps: usize,
}

impl CumulativeFold {
    pub fn new(num_states: usize, num_actions: usize, k: usize) -> Self {
        assert!(k >= 1);
        let cells = num_states * num_actions;
        Self {
            k,
            num_actions,
            cells,
            sums: vec![0.0; k * cells],
            steps: 0,
        }
    }

    pub fn push(&mut self, loss: &LossFunction) {
        let base = (self.steps % self.k) * self.cells;
        for (acc, v) in self.sums[base..base + self.cells].iter_mut().zip(loss.values()) {
            *acc += v;
        }
        self.steps += 1;
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Unperturbed cumulative loss of a walk of length `k`.
    pub fn walk_loss(&self, walk: &ClosedWalk) -> f64 {
        debug_assert_eq!(walk.len(), self.k);
        walk.edges()
            .iter()
            .enumerate()
            .map(|(i, e)| self.sums[i * self.cells + e.from * self.num_actions + e.action])
            .sum()
    }

    /// Number of loss functions folded so far.
    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Cumulative folds for every length `1..=max_k`.
#[derive(Debug, Clone)]
pub struct FoldSet {
    folds: Vec<CumulativeFold>,
}

impl FoldSet {
    pub fn new(num_states: usize, num_actions: usize, max_k: usize) -> Self {
        Self {
            folds: (1..=max_k)
                .map(|k| CumulativeFold::new(num_states, num_actions, k))
                .collect(),
        }
    }

    pub fn from_losses(num_states: usize, num_actions: usize, max_k: usize, losses: &[LossFunction]) -> Self {
        let mut set = Self::new(num_states, num_actions, max_k);
        losses.iter().for_each(|l| set.push(l));
        set
    }

    pub fn push(&mut self, loss: &LossFunction) {
        self.folds.iter_mut().for_each(|f| f.push(loss));
    }

    pub fn get(&self, k: usize) -> &CumulativeFold {
        &self.folds[k - 1]
    }
}

/// LP objective for one `(s, k)` subproblem: folded losses plus position
/// perturbations `ε_i(u, a)`, with `δ(s, k)` carried as a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedLossVector {
    pub k: usize,
    pub start: usize,
    num_states: usize,
    num_actions: usize,
    entries: Vec<f64>,
    pub offset: f64,
}

impl FoldedLossVector {
    /// `l[u, a, i]` for position `i ∈ 1..=k`.
    #[inline]
    pub fn get(&self, state: usize, action: usize, position: usize) -> f64 {
        self.entries[((position - 1) * self.num_states + state) * self.num_actions + action]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `⟨x(c), l⟩` for a walk of this length.
    pub fn walk_value(&self, walk: &ClosedWalk) -> f64 {
        walk.edges()
            .iter()
            .enumerate()
            .map(|(i, e)| self.get(e.from, e.action, i + 1))
            .sum()
    }
}

/// Folds `ℓ_1..ℓ_{t-1}` for walks of length `k` from `start`, adding the
/// position perturbations and reporting `δ(start, k)` as the offset.
pub fn fold_losses(
    losses: &[LossFunction],
    num_states: usize,
    num_actions: usize,
    start: usize,
    k: usize,
    perturbations: Option<&PerturbationSet>,
) -> FoldedLossVector {
    let mut fold = CumulativeFold::new(num_states, num_actions, k);
    losses.iter().for_each(|l| fold.push(l));
    perturbed_fold(&fold, num_states, num_actions, start, perturbations)
}

pub fn perturbed_fold(
    fold: &CumulativeFold,
    num_states: usize,
    num_actions: usize,
    start: usize,
    perturbations: Option<&PerturbationSet>,
) -> FoldedLossVector {
    let mut entries = fold.sums.clone();
    let mut offset = 0.0;
    if let Some(p) = perturbations {
        for i in 1..=fold.k {
            for s in 0..num_states {
                for a in 0..num_actions {
                    entries[((i - 1) * num_states + s) * num_actions + a] += p.eps(i, s, a);
                }
            }
        }
        offset = p.delta(start, fold.k);
    }
    FoldedLossVector {
        k: fold.k,
        start,
        num_states,
        num_actions,
        entries,
        offset,
    }
}

/// The cycle polytope for `C(s, k)` in variables `x[u, a, i]`:
///
/// * `x ≥ 0`
/// * `Σ_a x[s, a, 1] = 1`
/// * `x[u, a, 1] = 0` for `u ≠ s`
/// * `x[u, a, k] = 0` for `(u, a) ∉ I(s)`
/// * `Σ_{(v, a) ∈ I(u)} x[v, a, i-1] = Σ_a x[u, a, i]` for every `u` and `2 ≤ i ≤ k`
///
/// Variables pinned to zero by the third and fourth families are eliminated
/// before solving.
#[derive(Debug, Clone)]
pub struct CyclePolytopeLp {
    pub start: usize,
    pub k: usize,
    num_states: usize,
    num_actions: usize,
    /// Full index `(i, u, a)` of each free variable.
    free: Vec<usize>,
    lp: EqualityLp,
}

impl CyclePolytopeLp {
    pub fn new(graph: &AdmdpGraph, start: usize, k: usize, objective: &FoldedLossVector) -> Self {
        let (ns, na) = (graph.num_states(), graph.num_actions());
        let full = |i: usize, u: usize, a: usize| ((i - 1) * ns + u) * na + a;
        let allowed = |i: usize, u: usize, a: usize| (i != 1 || u == start) && (i != k || graph.next(u, a) == start);
        let mut column = vec![usize::MAX; ns * na * k];
        let mut free = Vec::new();
        for i in 1..=k {
            for u in 0..ns {
                for a in 0..na {
                    if allowed(i, u, a) {
                        column[full(i, u, a)] = free.len();
                        free.push(full(i, u, a));
                    }
                }
            }
        }
        let nv = free.len();
        let mut rows = Vec::new();
        let mut first = vec![0.0; nv];
        for a in 0..na {
            if let Some(&c) = column.get(full(1, start, a)).filter(|&&c| c != usize::MAX) {
                first[c] = 1.0;
            }
        }
        rows.push((first, 1.0));
        for i in 2..=k {
            for u in 0..ns {
                let mut row = vec![0.0; nv];
                let mut touched = false;
                for &(v, a) in graph.predecessors(u) {
                    let c = column[full(i - 1, v, a)];
                    if c != usize::MAX {
                        row[c] += 1.0;
                        touched = true;
                    }
                }
                for a in 0..na {
                    let c = column[full(i, u, a)];
                    if c != usize::MAX {
                        row[c] -= 1.0;
                        touched = true;
                    }
                }
                if touched {
                    rows.push((row, 0.0));
                }
            }
        }
        let cost = free.iter().map(|&f| objective.entries[f]).collect();
        Self {
            start,
            k,
            num_states: ns,
            num_actions: na,
            free,
            lp: EqualityLp {
                num_vars: nv,
                rows,
                objective: cost,
            },
        }
    }

    /// Dimension `|S|·|A|·k` of the unreduced variable space.
    pub fn dimension(&self) -> usize {
        self.num_states * self.num_actions * self.k
    }

    pub fn num_free_vars(&self) -> usize {
        self.free.len()
    }

    pub fn solve(&self) -> Result<(f64, Vec<f64>)> {
        match self.lp.solve() {
            LpOutcome::Optimal { value, x } => {
                let mut full = vec![0.0; self.dimension()];
                for (c, &f) in self.free.iter().enumerate() {
                    full[f] = x[c];
                }
                Ok((value, full))
            }
            LpOutcome::Infeasible => Err(Error::Infeasible {
                start: self.start,
                k: self.k,
            }),
            LpOutcome::Unbounded => Err(Error::Invariant("bounded cycle LP reported unbounded".into())),
        }
    }

    /// CPLEX-style text rendering for cross-checking with external solvers.
    pub fn to_lp_format(&self) -> String {
        let name = |f: usize| {
            let a = f % self.num_actions;
            let u = (f / self.num_actions) % self.num_states;
            let i = f / (self.num_actions * self.num_states) + 1;
            format!("x_{u}_{a}_{i}")
        };
        let term_list = |coeffs: &[f64]| {
            let mut out = String::new();
            for (c, &v) in coeffs.iter().enumerate() {
                if v != 0.0 {
                    let _ = write!(
                        out,
                        " {} {} {}",
                        if v < 0.0 { "-" } else { "+" },
                        v.abs(),
                        name(self.free[c])
                    );
                }
            }
            if out.is_empty() {
                out.push_str(" 0");
            }
            out
        };
        let mut out = String::from("Minimize\n obj:");
        out.push_str(&term_list(&self.lp.objective));
        out.push_str("\nSubject To\n");
        for (r, (coeffs, b)) in self.lp.rows.iter().enumerate() {
            let _ = writeln!(out, " c{r}:{} = {b}", term_list(coeffs));
        }
        out.push_str("End\n");
        out
    }
}

/// Minimises `⟨x, l⟩` over the cycle polytope for `(start, k)`.
pub fn solve_best_cycle(
    graph: &AdmdpGraph,
    start: usize,
    k: usize,
    folded: &FoldedLossVector,
) -> Result<(f64, Vec<f64>)> {
    if k == 0 || !k.is_multiple_of(graph.period()) {
        return Err(Error::Infeasible { start, k });
    }
    CyclePolytopeLp::new(graph, start, k, folded).solve()
}

/// Extracts one closed walk from a (possibly fractional) optimal solution by
/// taking, position by position, the heaviest edge out of the current state.
pub fn decompose_to_walk(graph: &AdmdpGraph, start: usize, k: usize, x: &[f64]) -> Result<ClosedWalk> {
    let (ns, na) = (graph.num_states(), graph.num_actions());
    let mut actions = Vec::with_capacity(k);
    let mut state = start;
    for i in 1..=k {
        let weight = |a: usize| x[((i - 1) * ns + state) * na + a];
        let best = (0..na)
            .filter(|&a| i < k || graph.next(state, a) == start)
            .fold(None, |best: Option<usize>, a| match best {
                Some(b) if weight(b) >= weight(a) => Some(b),
                _ => Some(a),
            })
            .filter(|&a| weight(a) > 1e-8)
            .ok_or(Error::DecompositionFailed { position: i })?;
        actions.push(best);
        state = graph.next(state, best);
    }
    ClosedWalk::from_actions(graph, start, &actions)
}

/// Best walk for one `(s, k)`: `(δ(s, k) + LP value, walk)`.
pub fn best_walk_for(graph: &AdmdpGraph, folded: &FoldedLossVector) -> Result<(f64, ClosedWalk)> {
    let (value, x) = solve_best_cycle(graph, folded.start, folded.k, folded)?;
    let walk = decompose_to_walk(graph, folded.start, folded.k, &x)?;
    let walk_value = folded.walk_value(&walk);
    if walk_value > value + 1e-6 {
        return Err(Error::Invariant(format!(
            "extracted walk {walk} has loss {walk_value} above LP optimum {value}"
        )));
    }
    Ok((folded.offset + walk_value, walk))
}

/// Minimum perturbed-loss walk over every start `s` in `start_class` and every
/// length `k ∈ {γ, 2γ, ...} ≤ |S|`; ties go to the lexicographically first `(s, k)`.
pub fn best_cycle_overall(
    graph: &AdmdpGraph,
    folds: &FoldSet,
    perturbations: Option<&PerturbationSet>,
    start_class: usize,
) -> Result<(f64, ClosedWalk)> {
    let (ns, na) = (graph.num_states(), graph.num_actions());
    let mut best: Option<(f64, ClosedWalk)> = None;
    for s in (0..ns).filter(|&s| graph.class_of(s) == start_class) {
        for k in (graph.period()..=ns).step_by(graph.period()) {
            let folded = perturbed_fold(folds.get(k), ns, na, s, perturbations);
            match best_walk_for(graph, &folded) {
                Ok((value, walk)) => {
                    if best.as_ref().is_none_or(|(v, _)| value < *v) {
                        best = Some((value, walk));
                    }
                }
                Err(Error::Infeasible { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    best.ok_or(Error::NoExpert)
}

/// Convenience wrapper folding a loss slice from scratch.
pub fn best_cycle_overall_from_losses(
    graph: &AdmdpGraph,
    losses: &[LossFunction],
    perturbations: Option<&PerturbationSet>,
    start_class: usize,
) -> Result<(f64, ClosedWalk)> {
    let folds = FoldSet::from_losses(graph.num_states(), graph.num_actions(), graph.num_states(), losses);
    best_cycle_overall(graph, &folds, perturbations, start_class)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss(ns: usize, na: usize, v: &[f64]) -> LossFunction {
        LossFunction::new(ns, na, v.to_vec()).unwrap()
    }

    #[test]
    fn fold_aligns_positions() {
        let losses = vec![LossFunction::constant(1, 1, 0.5).unwrap(); 10];
        let f = fold_losses(&losses, 1, 1, 0, 1, None);
        assert_eq!(f.get(0, 0, 1), 5.0);
        let empty = fold_losses(&[], 2, 2, 0, 3, None);
        assert!(empty.entries().iter().all(|&v| v == 0.0));
        let f3 = fold_losses(&vec![LossFunction::constant(1, 1, 1.0).unwrap(); 7], 1, 1, 0, 3, None);
        assert_eq!([f3.get(0, 0, 1), f3.get(0, 0, 2), f3.get(0, 0, 3)], [3.0, 2.0, 2.0]);
    }

    #[test]
    fn single_self_loop() {
        let g = AdmdpGraph::new(&[vec![0]]).unwrap();
        let f = fold_losses(&[loss(1, 1, &[0.3])], 1, 1, 0, 1, None);
        let (value, x) = solve_best_cycle(&g, 0, 1, &f).unwrap();
        assert!((value - 0.3).abs() < 1e-12);
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn two_cycle_with_two_actions() {
        // both actions move to the other state
        let g = AdmdpGraph::new(&[vec![1, 1], vec![0, 0]]).unwrap();
        let f = fold_losses(
            &[loss(2, 2, &[0.9, 0.2, 0.4, 0.7]), loss(2, 2, &[0.1, 0.1, 0.5, 0.8])],
            2,
            2,
            0,
            2,
            None,
        );
        let (value, walk) = best_walk_for(&g, &f).unwrap();
        // position 1 from state 0 under l_1, position 2 from state 1 under l_2
        assert!((value - (0.2 + 0.5)).abs() < 1e-12);
        assert_eq!(walk.actions().collect::<Vec<_>>(), vec![1, 0]);
    }

    #[test]
    fn period_mismatch_is_infeasible() {
        let g = AdmdpGraph::new(&[vec![1], vec![2], vec![0]]).unwrap();
        let f = fold_losses(&[], 3, 1, 0, 2, None);
        assert!(matches!(solve_best_cycle(&g, 0, 2, &f), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn integral_solution_decomposes_to_itself() {
        let g = AdmdpGraph::new(&[vec![1, 0], vec![0, 1]]).unwrap();
        let walk = ClosedWalk::from_actions(&g, 0, &[0, 1, 0]).unwrap();
        let mut x = vec![0.0; 2 * 2 * 3];
        for (i, e) in walk.edges().iter().enumerate() {
            x[(i * 2 + e.from) * 2 + e.action] = 1.0;
        }
        assert_eq!(decompose_to_walk(&g, 0, 3, &x).unwrap(), walk);
    }

    #[test]
    fn symmetric_mixture_decomposes_to_either_walk() {
        let g = AdmdpGraph::new(&[vec![1, 1], vec![0, 0]]).unwrap();
        let mut x = vec![0.0; 8];
        x[0] = 0.5; // (0, 0, 1)
        x[1] = 0.5; // (0, 1, 1)
        x[4 + 2] = 1.0; // (1, 0, 2)
        let walk = decompose_to_walk(&g, 0, 2, &x).unwrap();
        walk.validate(&g).unwrap();
        assert_eq!(walk.start(), 0);
    }

    #[test]
    fn lp_text_dump_mentions_every_row() {
        let g = AdmdpGraph::new(&[vec![1, 0], vec![0, 1]]).unwrap();
        let f = fold_losses(&[], 2, 2, 0, 2, None);
        let lp = CyclePolytopeLp::new(&g, 0, 2, &f);
        let text = lp.to_lp_format();
        assert!(text.starts_with("Minimize"));
        assert!(text.contains("c0:") && text.trim_end().ends_with("End"));
        assert_eq!(lp.dimension(), 8);
    }
}
