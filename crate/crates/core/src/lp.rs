//! Dense two-phase primal simplex for small equality-form LPs.
//!
//! `minimize cᵀx subject to Ax = b, x ≥ 0`. Pivoting uses Bland's rule, so the
//! result is fully determined by the input and degenerate problems cannot cycle.

const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EqualityLp {
    pub num_vars: usize,
    pub rows: Vec<(Vec<f64>, f64)>,
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    rows: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    /// Row `rows` holds the reduced costs; its last entry is `-objective`.
    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.at(pr, pc);
        for c in 0..w {
            self.data[pr * w + c] *= inv;
        }
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let factor = row[pc];
            if factor != 0.0 {
                for (x, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= factor * p;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    /// Bland's rule over columns `< enterable`. Returns false when unbounded.
    fn optimize(&mut self, enterable: usize) -> bool {
        let obj = self.rows;
        loop {
            let Some(pc) = (0..enterable).find(|&c| self.at(obj, c) < -PIVOT_TOL) else {
                return true;
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-12 || (ratio <= bratio + 1e-12 && self.basis[r] < self.basis[br]) {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            match best {
                Some((pr, _)) => self.pivot(pr, pc),
                None => return false,
            }
        }
    }
}

impl EqualityLp {
    pub fn solve(&self) -> LpOutcome {
        let n = self.num_vars;
        let m = self.rows.len();
        let width = n + m + 1;
        let mut data = vec![0.0; (m + 1) * width];
        for (r, (coeffs, b)) in self.rows.iter().enumerate() {
            let sign = if *b < 0.0 { -1.0 } else { 1.0 };
            for (c, &v) in coeffs.iter().enumerate() {
                data[r * width + c] = sign * v;
            }
            data[r * width + n + r] = 1.0;
            data[r * width + width - 1] = sign * b;
        }
        // phase one: minimise the sum of artificials
        for r in 0..m {
            for c in 0..n {
                data[m * width + c] -= data[r * width + c];
            }
            data[m * width + width - 1] -= data[r * width + width - 1];
        }
        let mut t = Tableau {
            width,
            data,
            basis: (n..n + m).collect(),
            rows: m,
        };
        t.optimize(n);
        if -t.at(m, width - 1) > 1e-7 {
            return LpOutcome::Infeasible;
        }

        // drive artificials out of the basis, dropping redundant rows
        let mut r = 0;
        while r < t.rows {
            if t.basis[r] >= n {
                match (0..n).find(|&c| t.at(r, c).abs() > PIVOT_TOL) {
                    Some(c) => t.pivot(r, c),
                    None => {
                        remove_row(&mut t, r);
                        continue;
                    }
                }
            }
            r += 1;
        }

        // phase two
        let obj = t.rows;
        for c in 0..width {
            t.data[obj * width + c] = if c < n { self.objective[c] } else { 0.0 };
        }
        for r in 0..t.rows {
            let cb = self.objective[t.basis[r]];
            if cb != 0.0 {
                for c in 0..width {
                    t.data[obj * width + c] -= cb * t.data[r * width + c];
                }
            }
        }
        if !t.optimize(n) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![0.0; n];
        for r in 0..t.rows {
            x[t.basis[r]] = t.rhs(r).max(0.0);
        }
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        LpOutcome::Optimal { value, x }
    }
}

fn remove_row(t: &mut Tableau, r: usize) {
    let w = t.width;
    t.data.drain(r * w..(r + 1) * w);
    t.basis.remove(r);
    t.rows -= 1;
}
