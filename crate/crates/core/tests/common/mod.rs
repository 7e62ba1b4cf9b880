//! Brute-force references and random instance generators shared by the
//! integration tests. Nothing here calls into the analysis code under test.

#![allow(dead_code)]

use admdp::fpl::PerturbationSet;
use admdp::mdp::{AdmdpGraph, LossFunction, StochasticMdp};
use rand::Rng;

pub type Reach = Vec<Vec<bool>>;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn adjacency(next: &[Vec<usize>]) -> Reach {
    let n = next.len();
    let mut m = vec![vec![false; n]; n];
    for (u, row) in next.iter().enumerate() {
        for &v in row {
            m[u][v] = true;
        }
    }
    m
}

fn multiply(a: &Reach, b: &Reach) -> Reach {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).any(|k| a[i][k] && b[k][j])).collect())
        .collect()
}

/// `powers[L][u][v]`: a walk of exactly `L` steps joins `u` to `v`.
pub fn reach_powers(next: &[Vec<usize>], max_len: usize) -> Vec<Reach> {
    let n = next.len();
    let adj = adjacency(next);
    let identity: Reach = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
    let mut out = vec![identity];
    for l in 1..=max_len {
        let next_power = multiply(&out[l - 1], &adj);
        out.push(next_power);
    }
    out
}

/// gcd of all closed-walk lengths up to `|S|`, which covers every simple cycle.
pub fn brute_period(next: &[Vec<usize>]) -> usize {
    let n = next.len();
    let powers = reach_powers(next, n);
    (1..=n).filter(|&l| (0..n).any(|s| powers[l][s][s])).fold(0, gcd)
}

/// Shortest walk length from state 0, reduced mod the period.
pub fn brute_classes(next: &[Vec<usize>], period: usize) -> Vec<usize> {
    let n = next.len();
    let powers = reach_powers(next, n);
    (0..n)
        .map(|s| (0..n).find(|&l| powers[l][0][s]).expect("reachable") % period)
        .collect()
}

/// Smallest `d` such that all same-class pairs are joined at every length
/// `γℓ`, `ℓ ∈ [d, d + |S|²]`.
pub fn brute_critical_length(next: &[Vec<usize>], period: usize, classes: &[usize]) -> usize {
    let n = next.len();
    let window = n * n;
    let limit = 2 * window + 2;
    let powers = reach_powers(next, period * (limit + window));
    let full = |l: usize| (0..n).all(|u| (0..n).all(|v| classes[u] != classes[v] || powers[period * l][u][v]));
    (1..=limit)
        .find(|&d| (d..=d + window).all(full))
        .expect("critical length within search range")
}

/// All action sequences of length `k` that return to `start`.
pub fn closed_walks(next: &[Vec<usize>], start: usize, k: usize) -> Vec<Vec<usize>> {
    let na = next[0].len();
    let mut out = Vec::new();
    let total = na.pow(k as u32);
    for mut code in 0..total {
        let mut actions = Vec::with_capacity(k);
        let mut s = start;
        for _ in 0..k {
            let a = code % na;
            code /= na;
            actions.push(a);
            s = next[s][a];
        }
        if s == start {
            out.push(actions);
        }
    }
    out
}

/// Perturbed cumulative loss of repeating a closed walk for `losses.len()` steps.
pub fn walk_objective(
    next: &[Vec<usize>],
    start: usize,
    actions: &[usize],
    losses: &[LossFunction],
    pert: Option<&PerturbationSet>,
) -> f64 {
    let k = actions.len();
    let mut states = vec![start];
    for &a in actions {
        states.push(next[*states.last().unwrap()][a]);
    }
    let mut value: f64 = losses
        .iter()
        .enumerate()
        .map(|(j, l)| l.get(states[j % k], actions[j % k]))
        .sum();
    if let Some(p) = pert {
        value += p.delta(start, k);
        value += (0..k).map(|i| p.eps(i + 1, states[i], actions[i])).sum::<f64>();
    }
    value
}

/// Random strongly connected graph; half the draws are layered so that
/// periods above one show up often.
pub fn random_admdp<R: Rng>(rng: &mut R, max_states: usize, max_actions: usize) -> AdmdpGraph {
    loop {
        let n = rng.random_range(1..=max_states);
        let na = rng.random_range(1..=max_actions);
        let layered = rng.random_bool(0.5);
        let gamma = if layered { rng.random_range(1..=n) } else { 1 };
        let layer: Vec<usize> = (0..n)
            .map(|s| if s < gamma { s } else { rng.random_range(0..gamma) })
            .collect();
        let next: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                (0..na)
                    .map(|_| {
                        if layered {
                            let want = (layer[s] + 1) % gamma;
                            let pool: Vec<usize> = (0..n).filter(|&v| layer[v] == want).collect();
                            pool[rng.random_range(0..pool.len())]
                        } else {
                            rng.random_range(0..n)
                        }
                    })
                    .collect()
            })
            .collect();
        if let Ok(g) = AdmdpGraph::new(&next) {
            return g;
        }
    }
}

pub fn random_losses<R: Rng>(rng: &mut R, ns: usize, na: usize, t: usize) -> Vec<LossFunction> {
    (0..t)
        .map(|_| LossFunction::new(ns, na, (0..ns * na).map(|_| rng.random()).collect()).unwrap())
        .collect()
}

/// Random communicating MDP whose state 0 has a deterministic self-loop on action 0.
pub fn random_loop_mdp<R: Rng>(rng: &mut R, min_states: usize, max_states: usize, max_actions: usize) -> StochasticMdp {
    loop {
        let n = rng.random_range(min_states..=max_states);
        let na = rng.random_range(2..=max_actions.max(2));
        let kernel: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|s| {
                (0..na)
                    .map(|a| {
                        let mut row = vec![0.0; n];
                        if s == 0 && a == 0 {
                            row[0] = 1.0;
                            return row;
                        }
                        let support = rng.random_range(1..=n.min(3));
                        for _ in 0..support {
                            row[rng.random_range(0..n)] += rng.random_range(0.1..1.0);
                        }
                        let total: f64 = row.iter().sum();
                        row.iter_mut().for_each(|p| *p /= total);
                        row
                    })
                    .collect()
            })
            .collect();
        let mut start: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = start.iter().sum();
        start.iter_mut().for_each(|p| *p /= total);
        if let Ok(m) = StochasticMdp::new(&kernel, start, Some((0, 0))) {
            return m;
        }
    }
}

/// Total variation distance between an empirical count vector and a law.
pub fn total_variation(counts: &[usize], law: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    0.5 * counts
        .iter()
        .zip(law)
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .sum::<f64>()
}
