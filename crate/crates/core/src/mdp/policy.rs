use crate::error::{Error, Result};

/// One adversary loss table `(state, action) -> [0, 1]`, stored row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct LossFunction {
    num_actions: usize,
    values: Vec<f64>,
}

impl LossFunction {
    pub fn new(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::InvalidLoss(format!(
                "expected {} entries, got {}",
                num_states * num_actions,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidLoss(format!("entry {v} outside [0, 1]")));
        }
        Ok(Self { num_actions, values })
    }

    pub fn constant(num_states: usize, num_actions: usize, value: f64) -> Result<Self> {
        Self::new(num_states, num_actions, vec![value; num_states * num_actions])
    }

    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_actions,
            values: vec![0.0; num_states * num_actions],
        }
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Stationary deterministic policy: one action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeterministicPolicy {
    actions: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn new(actions: Vec<usize>, num_actions: usize) -> Result<Self> {
        if let Some(&a) = actions.iter().find(|&&a| a >= num_actions) {
            return Err(Error::InvalidMdp(format!(
                "policy action {a} out of range for {num_actions} actions"
            )));
        }
        Ok(Self { actions })
    }

    /// Decodes the `index`-th policy in mixed radix `num_actions` (state 0 is the least
    /// significant digit).
    pub fn from_index(mut index: usize, num_states: usize, num_actions: usize) -> Self {
        let mut actions = Vec::with_capacity(num_states);
        for _ in 0..num_states {
            actions.push(index % num_actions);
            index /= num_actions;
        }
        Self { actions }
    }

    pub fn index(&self, num_actions: usize) -> usize {
        self.actions.iter().rev().fold(0, |acc, &a| acc * num_actions + a)
    }

    #[inline]
    pub fn action(&self, state: usize) -> usize {
        self.actions[state]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }
}

/// Number of stationary deterministic policies, or `None` if it overflows or exceeds `cap`.
pub fn policy_count(num_states: usize, num_actions: usize, cap: usize) -> Option<usize> {
    let mut n: usize = 1;
    for _ in 0..num_states {
        n = n.checked_mul(num_actions)?;
        if n > cap {
            return None;
        }
    }
    Some(n)
}

/// All policies in index order, failing with `CapExceeded` above `cap`.
pub fn enumerate_policies(num_states: usize, num_actions: usize, cap: usize) -> Result<Vec<DeterministicPolicy>> {
    let n = policy_count(num_states, num_actions, cap).ok_or(Error::CapExceeded {
        what: "policy enumeration",
        cap,
    })?;
    Ok((0..n)
        .map(|i| DeterministicPolicy::from_index(i, num_states, num_actions))
        .collect())
}
