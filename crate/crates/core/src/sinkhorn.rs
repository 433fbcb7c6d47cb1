//! Entropic optimal transport between uniform marginals (Sinkhorn-Knopp).
//!
//! Solves `min <M, T> - eps * H(T)` over plans with row sums `1/rows` and
//! column sums `1/cols`, where `H(T) = sum T (log T - 1)`. The optimum is
//! `T = diag(u) K diag(v)` with `K = exp(-M / eps)`.
//!
//! Two numerically different routes reach the same iterates:
//!
//! * log-domain (default): dual potentials `f = eps log u`, `g = eps log v`
//!   updated through log-sum-exp. Safe at any `eps`.
//! * direct: multiplicative scalings of a precomputed kernel. Faster, but
//!   the kernel underflows once `1 / eps` approaches the exponent range.
//!
//! Both run the same alternation (rows first) and the same stopping rule, so
//! for a given iteration count they agree to rounding.

use rayon::prelude::*;

use crate::cost::CostMatrix;
use crate::error::{Error, Result};

/// Below this many cost entries the updates run on the calling thread.
const PARALLEL_MIN_ENTRIES: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Entropic regularization, > 0.
    pub epsilon: f64,
    /// Hard cap on scaling iterations (one row plus one column update).
    pub max_iters: usize,
    /// L-infinity tolerance on both marginal residuals.
    pub marginal_tol: f64,
    pub log_domain: bool,
    /// Log-domain only: reach `epsilon` through a halving schedule starting
    /// at the cost range, each stage warm-started from the previous
    /// potentials. Same fixed point, far fewer iterations at small
    /// `epsilon`. All stages share the `max_iters` budget.
    pub eps_scaling: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            max_iters: 100,
            marginal_tol: 1e-6,
            log_domain: true,
            eps_scaling: false,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon {} must be > 0", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.marginal_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("marginal_tol {} must be >= 0", self.marginal_tol)));
        }
        Ok(())
    }
}

/// A coupling between `rows` embeddings and `cols` prototypes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    epsilon: f64,
    iterations: usize,
    converged: bool,
}

impl TransportPlan {
    /// Wraps an explicit dense plan (row-major). Entries must be finite and
    /// nonnegative. Solver metadata is zeroed.
    pub fn from_dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::ZeroDim("transport plan"));
        }
        if data.len() != rows * cols {
            return Err(Error::dims("transport plan entries", rows * cols, data.len()));
        }
        if let Some(index) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            rows,
            cols,
            data,
            epsilon: 0.0,
            iterations: 0,
            converged: false,
        })
    }

    /// The independent coupling `mu x nu` of the uniform marginals.
    pub fn product(rows: usize, cols: usize) -> Result<Self> {
        let mass = 1.0 / (rows as f64 * cols as f64);
        Self::from_dense(rows, cols, vec![mass; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row_mass(&self) -> f64 {
        1.0 / self.rows as f64
    }

    pub fn col_mass(&self) -> f64 {
        1.0 / self.cols as f64
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Column sums of the plan.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            for (s, &t) in sums.iter_mut().zip(row) {
                *s += t;
            }
        }
        sums
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks_exact(self.cols).map(|r| r.iter().sum()).collect()
    }

    /// Frobenius product `<M, T>` against a cost buffer of the same shape.
    pub fn transport_cost(&self, costs: &[f64]) -> f64 {
        self.data.iter().zip(costs).map(|(t, m)| t * m).sum()
    }

    /// Mutable entries, for tests that perturb a plan.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// L-infinity norms of `T 1 - mu` and `T^t 1 - nu` for uniform `mu`, `nu`.
pub fn marginal_residuals(plan: &TransportPlan) -> (f64, f64) {
    let mu = plan.row_mass();
    let nu = plan.col_mass();
    let row = plan.row_sums().into_iter().map(|s| (s - mu).abs()).fold(0.0, f64::max);
    let col = plan.col_sums().into_iter().map(|s| (s - nu).abs()).fold(0.0, f64::max);
    (row, col)
}

/// Solves entropic OT for a batch cost matrix.
pub fn solve(costs: &CostMatrix, params: &SolverParams) -> Result<TransportPlan> {
    solve_costs(costs.rows(), costs.cols(), costs.data(), params)
}

/// Solves entropic OT for an arbitrary dense `rows x cols` cost buffer
/// (row-major) with uniform marginals.
pub fn solve_costs(rows: usize, cols: usize, costs: &[f64], params: &SolverParams) -> Result<TransportPlan> {
    params.validate()?;
    if rows == 0 || cols == 0 {
        return Err(Error::ZeroDim("cost matrix"));
    }
    if costs.len() != rows * cols {
        return Err(Error::dims("cost buffer", rows * cols, costs.len()));
    }
    if let Some(index) = costs.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let transposed = transpose(costs, rows, cols);
    let (data, iterations) = if params.log_domain {
        log_domain(rows, cols, costs, &transposed, params)
    } else {
        direct(rows, cols, costs, &transposed, params)?
    };
    let mut plan = TransportPlan {
        rows,
        cols,
        data,
        epsilon: params.epsilon,
        iterations,
        converged: false,
    };
    let (row_res, col_res) = marginal_residuals(&plan);
    plan.converged = row_res <= params.marginal_tol && col_res <= params.marginal_tol;
    Ok(plan)
}

fn transpose(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for (r, row) in data.chunks_exact(cols).enumerate() {
        for (c, &v) in row.iter().enumerate() {
            out[c * rows + r] = v;
        }
    }
    out
}

/// `max_k (pot_k - cost_k)` and `log sum_k exp((pot_k - cost_k - max) / eps)`.
#[inline]
fn soft_min(potential: &[f64], costs: &[f64], eps: f64) -> f64 {
    let max = potential
        .iter()
        .zip(costs)
        .map(|(p, c)| p - c)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = potential
        .iter()
        .zip(costs)
        .map(|(p, c)| ((p - c - max) / eps).exp())
        .sum();
    max / eps + sum.ln()
}

/// Dual-potential iterations. Returns the plan and the number of full
/// iterations performed.
fn log_domain(rows: usize, cols: usize, costs: &[f64], costs_t: &[f64], params: &SolverParams) -> (Vec<f64>, usize) {
    let eps = params.epsilon;
    let mut f = vec![0.0; rows];
    let mut g = vec![0.0; cols];
    let mut used = 0;
    if params.eps_scaling {
        let (lo, hi) = costs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| (lo.min(c), hi.max(c)));
        let mut stage = hi - lo;
        // Leave at least one iteration for the target epsilon.
        while stage > 2.0 * eps && used + 1 < params.max_iters {
            let budget = params.max_iters - used - 1;
            used += potential_iterations(rows, cols, costs, costs_t, stage, budget, params.marginal_tol, &mut f, &mut g);
            stage /= 2.0;
        }
    }
    used += potential_iterations(rows, cols, costs, costs_t, eps, params.max_iters - used, params.marginal_tol, &mut f, &mut g);

    let mut plan = vec![0.0; rows * cols];
    plan.par_chunks_exact_mut(cols)
        .zip(costs.par_chunks_exact(cols))
        .zip(&f)
        .for_each(|((out, row), fi)| {
            for ((t, m), gj) in out.iter_mut().zip(row).zip(&g) {
                *t = ((fi + gj - m) / eps).exp();
            }
        });
    (plan, used)
}

/// Runs up to `budget` row/column updates of the potentials at `eps`,
/// starting from the given `f`, `g`. Returns the number performed.
#[allow(clippy::too_many_arguments)]
fn potential_iterations(
    rows: usize,
    cols: usize,
    costs: &[f64],
    costs_t: &[f64],
    eps: f64,
    budget: usize,
    tol: f64,
    f: &mut [f64],
    g: &mut [f64],
) -> usize {
    let log_mu = -(rows as f64).ln();
    let log_nu = -(cols as f64).ln();
    let mu = 1.0 / rows as f64;
    let mut lse = vec![0.0; rows];
    let mut iterations = 0;
    let parallel = rows * cols >= PARALLEL_MIN_ENTRIES;
    for it in 0..budget {
        if parallel {
            lse.par_iter_mut()
                .zip(costs.par_chunks_exact(cols))
                .for_each(|(out, row)| *out = soft_min(g, row, eps));
        } else {
            for (out, row) in lse.iter_mut().zip(costs.chunks_exact(cols)) {
                *out = soft_min(g, row, eps);
            }
        }
        if it > 0 {
            // Columns are exact after the previous g update; rows carry the residual.
            let row_res = f
                .iter()
                .zip(&lse)
                .map(|(fi, l)| ((fi / eps + l).exp() - mu).abs())
                .fold(0.0, f64::max);
            if row_res <= tol {
                break;
            }
        }
        for (fi, l) in f.iter_mut().zip(&lse) {
            *fi = eps * (log_mu - l);
        }
        if parallel {
            g.par_iter_mut()
                .zip(costs_t.par_chunks_exact(rows))
                .for_each(|(gj, col)| *gj = eps * (log_nu - soft_min(f, col, eps)));
        } else {
            for (gj, col) in g.iter_mut().zip(costs_t.chunks_exact(rows)) {
                *gj = eps * (log_nu - soft_min(f, col, eps));
            }
        }
        iterations = it + 1;
    }
    iterations
}

/// Multiplicative scaling iterations on the Gibbs kernel.
fn direct(
    rows: usize,
    cols: usize,
    costs: &[f64],
    costs_t: &[f64],
    params: &SolverParams,
) -> Result<(Vec<f64>, usize)> {
    let eps = params.epsilon;
    let overflow = || Error::NumericOverflow { epsilon: eps };
    let kernel: Vec<f64> = costs.par_iter().map(|m| (-m / eps).exp()).collect();
    let kernel_t: Vec<f64> = costs_t.par_iter().map(|m| (-m / eps).exp()).collect();
    let mu = 1.0 / rows as f64;
    let nu = 1.0 / cols as f64;
    let mut u = vec![1.0; rows];
    let mut v = vec![1.0; cols];
    let mut kv = vec![0.0; rows];
    let mut iterations = 0;

    for it in 0..params.max_iters {
        kv.par_iter_mut()
            .zip(kernel.par_chunks_exact(cols))
            .for_each(|(out, row)| *out = row.iter().zip(&v).map(|(k, vj)| k * vj).sum());
        if it > 0 {
            let row_res = u.iter().zip(&kv).map(|(ui, s)| (ui * s - mu).abs()).fold(0.0, f64::max);
            if row_res <= params.marginal_tol {
                break;
            }
        }
        for (ui, s) in u.iter_mut().zip(&kv) {
            *ui = mu / s;
            if !(ui.is_finite() && *ui > 0.0) {
                return Err(overflow());
            }
        }
        v.par_iter_mut().zip(kernel_t.par_chunks_exact(rows)).for_each(|(vj, col)| {
            let s: f64 = col.iter().zip(&u).map(|(k, ui)| k * ui).sum();
            *vj = nu / s;
        });
        if v.iter().any(|vj| !(vj.is_finite() && *vj > 0.0)) {
            return Err(overflow());
        }
        iterations = it + 1;
    }

    let mut plan = vec![0.0; rows * cols];
    for (r, (out, krow)) in plan.chunks_exact_mut(cols).zip(kernel.chunks_exact(cols)).enumerate() {
        for ((t, k), vj) in out.iter_mut().zip(krow).zip(&v) {
            *t = u[r] * k * vj;
        }
    }
    if plan.iter().any(|t| !t.is_finite()) {
        return Err(overflow());
    }
    Ok((plan, iterations))
}
