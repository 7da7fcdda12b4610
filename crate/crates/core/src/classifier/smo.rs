//! Sequential minimal optimization for the binary C-SVM dual
//!
//! ```text
//! min_a  1/2 a^T Q a - e^T a   s.t.  y^T a = 0,  0 <= a_i <= C,
//! ```
//!
//! with `Q_ij = y_i y_j K_ij`. Working pairs are chosen with second-order
//! information; variables stuck at a bound are shrunk from the active set and
//! their gradients rebuilt before the final optimality check.

use super::kernel::KernelRows;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    /// Stop once the maximal KKT violation drops below this.
    pub tolerance: f64,
    pub max_iterations: u64,
    pub shrinking: bool,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self { c: 1.0, tolerance: 1e-3, max_iterations: 10_000_000, shrinking: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision function `f(x) = sum_i alpha_i y_i K(x_i, x) + bias`.
    pub bias: f64,
    /// Value of `1/2 a^T Q a - e^T a` at the solution.
    pub objective: f64,
    pub iterations: u64,
    /// Maximal KKT violation at exit.
    pub violation: f64,
    pub converged: bool,
}

struct Solver<'a> {
    kernel: &'a KernelRows<'a>,
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    /// `sum_{i at upper bound} C Q_i`, used to rebuild shrunk gradients.
    grad_bar: Vec<f64>,
    active: Vec<usize>,
    active_size: usize,
    unshrink: bool,
}

impl Solver<'_> {
    fn upper(&self, i: usize) -> bool {
        self.alpha[i] >= self.c
    }

    fn lower(&self, i: usize) -> bool {
        self.alpha[i] <= 0.0
    }

    /// Row `i` of `Q` over all variables.
    fn q_row(&self, i: usize) -> Vec<f64> {
        let k = self.kernel.row(i);
        let yi = self.y[i];
        k.iter().zip(self.y).map(|(kv, yj)| yi * yj * kv).collect()
    }

    /// Returns the working pair, or `None` when the violation is below
    /// `tolerance`. Also returns the violation.
    fn select(&self, tolerance: f64) -> (Option<(usize, usize)>, f64) {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = None;
        for &t in &self.active[..self.active_size] {
            if self.y[t] > 0.0 {
                if !self.upper(t) && -self.grad[t] >= gmax {
                    gmax = -self.grad[t];
                    gmax_idx = Some(t);
                }
            } else if !self.lower(t) && self.grad[t] >= gmax {
                gmax = self.grad[t];
                gmax_idx = Some(t);
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = None;
        let mut obj_min = f64::INFINITY;
        let q_i = gmax_idx.map(|i| self.q_row(i));
        for &j in &self.active[..self.active_size] {
            let (grad_diff, side) = if self.y[j] > 0.0 {
                if self.lower(j) {
                    continue;
                }
                gmax2 = gmax2.max(self.grad[j]);
                (gmax + self.grad[j], -1.0)
            } else {
                if self.upper(j) {
                    continue;
                }
                gmax2 = gmax2.max(-self.grad[j]);
                (gmax - self.grad[j], 1.0)
            };
            if let (Some(i), Some(q)) = (gmax_idx, &q_i) {
                if grad_diff > 0.0 {
                    let quad = 2.0 + 2.0 * side * self.y[i] * q[j];
                    let quad = if quad > 0.0 { quad } else { TAU };
                    let obj = -grad_diff * grad_diff / quad;
                    if obj <= obj_min {
                        obj_min = obj;
                        best = Some(j);
                    }
                }
            }
        }
        let violation = gmax + gmax2;
        match (gmax_idx, best) {
            (Some(i), Some(j)) if violation >= tolerance => (Some((i, j)), violation),
            _ => (None, violation.max(0.0)),
        }
    }

    fn update(&mut self, i: usize, j: usize) {
        let q_i = self.q_row(i);
        let q_j = self.q_row(j);
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (upper_i, upper_j) = (self.upper(i), self.upper(j));
        let (mut ai, mut aj) = (old_i, old_j);
        if self.y[i] != self.y[j] {
            let quad = 2.0 + 2.0 * q_i[j];
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = 2.0 - 2.0 * q_i[j];
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for &k in &self.active[..self.active_size] {
            self.grad[k] += q_i[k] * di + q_j[k] * dj;
        }
        for (idx, was_upper, q) in [(i, upper_i, &q_i), (j, upper_j, &q_j)] {
            if was_upper != self.upper(idx) {
                let sign = if was_upper { -c } else { c };
                self.grad_bar.iter_mut().zip(q.iter()).for_each(|(g, qv)| *g += sign * qv);
            }
        }
    }

    fn reconstruct_gradient(&mut self) {
        let n = self.alpha.len();
        if self.active_size == n {
            return;
        }
        let inactive: Vec<usize> = self.active[self.active_size..].to_vec();
        for &k in &inactive {
            self.grad[k] = self.grad_bar[k] - 1.0;
        }
        let free: Vec<usize> = (0..n).filter(|&i| !self.upper(i) && !self.lower(i)).collect();
        for i in free {
            let q = self.q_row(i);
            for &k in &inactive {
                self.grad[k] += self.alpha[i] * q[k];
            }
        }
    }

    fn shrinkable(&self, i: usize, gmax1: f64, gmax2: f64) -> bool {
        if self.upper(i) {
            if self.y[i] > 0.0 {
                -self.grad[i] > gmax1
            } else {
                -self.grad[i] > gmax2
            }
        } else if self.lower(i) {
            if self.y[i] > 0.0 {
                self.grad[i] > gmax2
            } else {
                self.grad[i] > gmax1
            }
        } else {
            false
        }
    }

    fn shrink(&mut self, tolerance: f64) {
        let mut gmax1 = f64::NEG_INFINITY;
        let mut gmax2 = f64::NEG_INFINITY;
        for &i in &self.active[..self.active_size] {
            let g = self.grad[i];
            if self.y[i] > 0.0 {
                if !self.upper(i) {
                    gmax1 = gmax1.max(-g);
                }
                if !self.lower(i) {
                    gmax2 = gmax2.max(g);
                }
            } else {
                if !self.upper(i) {
                    gmax2 = gmax2.max(-g);
                }
                if !self.lower(i) {
                    gmax1 = gmax1.max(g);
                }
            }
        }
        if !self.unshrink && gmax1 + gmax2 <= tolerance * 10.0 {
            self.unshrink = true;
            self.reconstruct_gradient();
            self.active_size = self.alpha.len();
        }
        let mut pos = 0;
        while pos < self.active_size {
            if self.shrinkable(self.active[pos], gmax1, gmax2) {
                self.active_size -= 1;
                self.active.swap(pos, self.active_size);
            } else {
                pos += 1;
            }
        }
    }

    fn bias(&self) -> f64 {
        let (mut upper_bound, mut lower_bound) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free_sum, mut free_count) = (0.0, 0usize);
        for i in 0..self.alpha.len() {
            let yg = self.y[i] * self.grad[i];
            if self.upper(i) {
                if self.y[i] < 0.0 {
                    upper_bound = upper_bound.min(yg);
                } else {
                    lower_bound = lower_bound.max(yg);
                }
            } else if self.lower(i) {
                if self.y[i] > 0.0 {
                    upper_bound = upper_bound.min(yg);
                } else {
                    lower_bound = lower_bound.max(yg);
                }
            } else {
                free_sum += yg;
                free_count += 1;
            }
        }
        let rho = if free_count > 0 {
            free_sum / free_count as f64
        } else if upper_bound.is_finite() && lower_bound.is_finite() {
            (upper_bound + lower_bound) / 2.0
        } else if upper_bound.is_finite() {
            upper_bound
        } else {
            lower_bound
        };
        -rho
    }
}

/// Solves one binary problem. `y` holds `+1` / `-1` labels.
pub fn solve_binary(kernel: &KernelRows<'_>, y: &[f64], params: &SmoParams) -> SmoSolution {
    let n = y.len();
    let mut s = Solver {
        kernel,
        y,
        c: params.c,
        alpha: vec![0.0; n],
        grad: vec![-1.0; n],
        grad_bar: vec![0.0; n],
        active: (0..n).collect(),
        active_size: n,
        unshrink: false,
    };
    let mut iterations = 0u64;
    let mut counter = n.min(1000) + 1;
    let mut violation;
    let converged = loop {
        if iterations >= params.max_iterations {
            s.reconstruct_gradient();
            s.active_size = n;
            violation = s.select(params.tolerance).1;
            break false;
        }
        counter -= 1;
        if counter == 0 {
            counter = n.min(1000);
            if params.shrinking {
                s.shrink(params.tolerance);
            }
        }
        let (i, j) = match s.select(params.tolerance).0 {
            Some(p) => p,
            None => {
                s.reconstruct_gradient();
                s.active_size = n;
                let (pair, v) = s.select(params.tolerance);
                violation = v;
                match pair {
                    Some(p) => {
                        counter = 1;
                        p
                    }
                    None => break true,
                }
            }
        };
        iterations += 1;
        s.update(i, j);
    };
    let objective = 0.5 * s.alpha.iter().zip(&s.grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    let bias = s.bias();
    SmoSolution { alpha: s.alpha, bias, objective, iterations, violation, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::kernel::{gaussian_kernel, FULL_MATRIX_LIMIT};
    use crate::features::FeatureMatrix;

    fn toy() -> (FeatureMatrix, Vec<f64>) {
        let pts = [[0.0, 0.0], [0.2, 0.1], [0.1, 0.3], [2.0, 2.0], [2.1, 1.8], [1.9, 2.2]];
        let f = FeatureMatrix::new(6, 2, pts.concat(), vec![0; 6], 1).unwrap();
        (f, vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0])
    }

    #[test]
    fn separable_problem_is_solved() {
        let (f, y) = toy();
        let k = KernelRows::new(&f, 1.0, FULL_MATRIX_LIMIT, 0);
        let sol = solve_binary(&k, &y, &SmoParams::default());
        assert!(sol.converged);
        let sum: f64 = sol.alpha.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!(sum.abs() < 1e-12);
        for i in 0..6 {
            let f_i: f64 =
                (0..6).map(|j| sol.alpha[j] * y[j] * gaussian_kernel(f.row(i), f.row(j), 1.0)).sum::<f64>() + sol.bias;
            assert!(f_i * y[i] > 0.0);
        }
    }

    #[test]
    fn shrinking_does_not_change_the_solution() {
        let mut pts = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let t = i as f64 * 0.37;
            pts.extend([t.sin() * (1.0 + (i % 3) as f64), t.cos()]);
            y.push(if (i * 7) % 5 < 2 { 1.0 } else { -1.0 });
        }
        let f = FeatureMatrix::new(60, 2, pts, vec![0; 60], 1).unwrap();
        let k = KernelRows::new(&f, 0.3, FULL_MATRIX_LIMIT, 0);
        let params = SmoParams { tolerance: 1e-6, ..SmoParams::default() };
        let a = solve_binary(&k, &y, &params);
        let b = solve_binary(&k, &y, &SmoParams { shrinking: false, ..params });
        assert!(a.converged && b.converged);
        assert!((a.objective - b.objective).abs() < 1e-6);
        assert!(a.alpha.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let (f, y) = toy();
        let k = KernelRows::new(&f, 1.0, FULL_MATRIX_LIMIT, 0);
        let sol = solve_binary(&k, &y, &SmoParams { max_iterations: 1, tolerance: 1e-12, ..SmoParams::default() });
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
        assert!(sol.violation > 0.0);
    }
}
