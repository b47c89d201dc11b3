//! The two time steppers.
//!
//! Both discretise the integrated form
//!
//! ```text
//! y(t) = y0 - sum_i 1/Gamma(1-alpha_i) int_0^t (t-s)^{-alpha_i} y(s) ds
//!           + int_0^t f(s, y) ds + int_0^t g(s, y) dW(s)
//! ```
//!
//! with a left-point rectangle rule on the memory term. The direct scheme
//! sums the whole history at every step; the fast scheme splits off the
//! last cell, approximates the remaining kernel `(t_{n+1} - t_k)^{-alpha}`
//! (argument `>= 2h`) by a sum of exponentials and carries one accumulator
//! per exponential.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::brownian::BrownianPath;
use crate::error::{Error, Result};
use crate::model::{FractionalOrders, ProblemSpec, TimeGrid, Trajectory};
use crate::soe::{build_soe, SoeApproximation};
use crate::special::gamma;

pub const DEFAULT_SOE_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Fast,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Direct, Method::Fast];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Fast => "fast",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Method::Direct),
            "fast" => Ok(Method::Fast),
            other => Err(format!("unknown method {other:?} (expected direct or fast)")),
        }
    }
}

/// Method choice plus the per-order constants `Gamma(1 - alpha_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    method: Method,
    soe_epsilon: f64,
    orders: FractionalOrders,
    gamma_values: Vec<f64>,
    include_memory: bool,
}

impl SolverConfig {
    pub fn new(method: Method, orders: &FractionalOrders) -> Self {
        SolverConfig {
            method,
            soe_epsilon: DEFAULT_SOE_EPSILON,
            gamma_values: orders.iter().map(|a| gamma(1.0 - a)).collect(),
            orders: orders.clone(),
            include_memory: true,
        }
    }

    pub fn with_soe_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidSoeParameter(format!(
                "epsilon = {epsilon} outside (0, 1)"
            )));
        }
        self.soe_epsilon = epsilon;
        Ok(self)
    }

    /// Drops the fractional memory term. Only useful for exercising plumbing:
    /// with zero drift and diffusion the solution is then constant.
    pub fn without_memory(mut self) -> Self {
        self.include_memory = false;
        self
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn soe_epsilon(&self) -> f64 {
        self.soe_epsilon
    }

    pub fn orders(&self) -> &FractionalOrders {
        &self.orders
    }

    /// `Gamma(1 - alpha_i)` for each order.
    pub fn gamma_values(&self) -> &[f64] {
        &self.gamma_values
    }

    pub fn include_memory(&self) -> bool {
        self.include_memory
    }

    /// Builds whatever the method needs for `grid`: nothing for the direct
    /// scheme, one SOE per order valid on `[h, T]` for the fast scheme.
    pub fn prepare(&self, grid: &TimeGrid) -> Result<PreparedSolver> {
        let soes = match self.method {
            Method::Direct => Vec::new(),
            Method::Fast => {
                let h = grid.step();
                // with a single step the window [h, T] is empty and no SOE is ever evaluated
                let delta = if grid.steps() == 1 { 0.5 * h } else { h };
                self.orders
                    .iter()
                    .map(|alpha| build_soe(alpha, self.soe_epsilon, delta, grid.horizon()))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        PreparedSolver::new(self.clone(), *grid, soes)
    }
}

/// One SOE term set with its per-step decay factors.
#[derive(Debug, Clone)]
struct FastKernel {
    weights: Vec<f64>,
    /// `exp(-h s_j)`
    decay: Vec<f64>,
    /// `h * exp(-2 h s_j)`
    inject: Vec<f64>,
}

/// Solver bound to one grid, reusable across Brownian paths.
#[derive(Debug, Clone)]
pub struct PreparedSolver {
    config: SolverConfig,
    grid: TimeGrid,
    inv_gamma: Vec<f64>,
    soes: Vec<SoeApproximation>,
    kernels: Vec<FastKernel>,
}

impl PreparedSolver {
    fn new(config: SolverConfig, grid: TimeGrid, soes: Vec<SoeApproximation>) -> Result<Self> {
        let h = grid.step();
        let m = config.orders.len();
        if config.method == Method::Fast {
            if soes.len() != m {
                return Err(Error::SoeCountMismatch {
                    expected: m,
                    got: soes.len(),
                });
            }
            for (alpha, soe) in config.orders.iter().zip(&soes) {
                if soe.alpha() != alpha {
                    return Err(Error::GridMismatch(format!(
                        "SOE built for alpha = {} used for alpha = {alpha}",
                        soe.alpha()
                    )));
                }
                if soe.delta() > h {
                    return Err(Error::SoeWindowTooNarrow {
                        alpha,
                        delta: soe.delta(),
                        step: h,
                    });
                }
                if soe.horizon() < grid.horizon() {
                    return Err(Error::GridMismatch(format!(
                        "SOE valid up to {} but grid horizon is {}",
                        soe.horizon(),
                        grid.horizon()
                    )));
                }
            }
        }
        let kernels = soes
            .iter()
            .map(|soe| FastKernel {
                weights: soe.terms().iter().map(|t| t.weight).collect(),
                decay: soe.terms().iter().map(|t| (-h * t.exponent).exp()).collect(),
                inject: soe
                    .terms()
                    .iter()
                    .map(|t| h * (-2.0 * h * t.exponent).exp())
                    .collect(),
            })
            .collect();
        Ok(PreparedSolver {
            inv_gamma: config.gamma_values.iter().map(|g| 1.0 / g).collect(),
            config,
            grid,
            soes,
            kernels,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn method(&self) -> Method {
        self.config.method
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn soes(&self) -> &[SoeApproximation] {
        &self.soes
    }

    /// Total number of exponentials across all orders.
    pub fn n_exp_total(&self) -> usize {
        self.soes.iter().map(|s| s.n_exp()).sum()
    }

    pub fn solve(&self, problem: &ProblemSpec, path: &BrownianPath) -> Result<Trajectory> {
        self.check_inputs(problem, path)?;
        match self.config.method {
            Method::Direct => self.run_direct(problem, path),
            Method::Fast => self.run_fast(problem, path),
        }
    }

    fn check_inputs(&self, problem: &ProblemSpec, path: &BrownianPath) -> Result<()> {
        if path.grid() != &self.grid {
            return Err(Error::GridMismatch(format!(
                "path has {} steps on [0, {}], solver grid has {} steps on [0, {}]",
                path.grid().steps(),
                path.grid().horizon(),
                self.grid.steps(),
                self.grid.horizon()
            )));
        }
        if problem.horizon() != self.grid.horizon() {
            return Err(Error::GridMismatch(format!(
                "problem horizon {} differs from grid horizon {}",
                problem.horizon(),
                self.grid.horizon()
            )));
        }
        Ok(())
    }

    fn run_direct(&self, problem: &ProblemSpec, path: &BrownianPath) -> Result<Trajectory> {
        let grid = &self.grid;
        let d = problem.dim();
        let h = grid.step();
        let steps = grid.steps();
        let alphas = self.config.orders.as_slice();
        let dw = path.increments();

        let mut values = vec![0.0; (steps + 1) * d];
        values[..d].copy_from_slice(problem.y0());
        let mut sums = ExplicitSums::new(d);
        let mut memory = vec![0.0; alphas.len() * d];

        for n in 1..=steps {
            sums.add(problem, grid.t(n - 1), &values[(n - 1) * d..n * d], h, dw[n - 1]);
            memory.fill(0.0);
            if self.config.include_memory {
                let t_n = grid.t(n);
                for (j, state) in values[..n * d].chunks_exact(d).enumerate() {
                    let log_lag = (t_n - grid.t(j)).ln();
                    for (i, &alpha) in alphas.iter().enumerate() {
                        let w = (-alpha * log_lag).exp() * h;
                        for (acc, &y) in memory[i * d..(i + 1) * d].iter_mut().zip(state) {
                            *acc += w * y;
                        }
                    }
                }
            }
            let next = &mut values[n * d..(n + 1) * d];
            self.combine(problem.y0(), &memory, &sums, next);
            if !next.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteState { step: n });
            }
        }
        Ok(Trajectory::from_parts(*grid, d, values))
    }

    fn run_fast(&self, problem: &ProblemSpec, path: &BrownianPath) -> Result<Trajectory> {
        let grid = &self.grid;
        let d = problem.dim();
        let h = grid.step();
        let steps = grid.steps();
        let alphas = self.config.orders.as_slice();
        let dw = path.increments();

        let mut values = vec![0.0; (steps + 1) * d];
        values[..d].copy_from_slice(problem.y0());
        let mut sums = ExplicitSums::new(d);
        let mut memory = vec![0.0; alphas.len() * d];
        let mut history = HistoryState::from_kernels(&self.kernels, d);

        for n in 0..steps {
            // computes X(t_{n+1})
            sums.add(problem, grid.t(n), &values[n * d..(n + 1) * d], h, dw[n]);
            memory.fill(0.0);
            if self.config.include_memory {
                if n >= 1 {
                    history.advance_with(&self.kernels, &values[(n - 1) * d..n * d]);
                    history.weighted_sums(&self.kernels, &mut memory);
                }
                // last cell, kept exact; same arithmetic as the direct scheme
                let log_lag = (grid.t(n + 1) - grid.t(n)).ln();
                let current = &values[n * d..(n + 1) * d];
                for (i, &alpha) in alphas.iter().enumerate() {
                    let w = (-alpha * log_lag).exp() * h;
                    for (acc, &y) in memory[i * d..(i + 1) * d].iter_mut().zip(current) {
                        *acc += w * y;
                    }
                }
            }
            let next = &mut values[(n + 1) * d..(n + 2) * d];
            self.combine(problem.y0(), &memory, &sums, next);
            if !next.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteState { step: n + 1 });
            }
        }
        Ok(Trajectory::from_parts(*grid, d, values))
    }

    #[inline]
    fn combine(&self, y0: &[f64], memory: &[f64], sums: &ExplicitSums, out: &mut [f64]) {
        let d = y0.len();
        for k in 0..d {
            let mut v = y0[k];
            for (i, c) in self.inv_gamma.iter().enumerate() {
                v -= c * memory[i * d + k];
            }
            out[k] = v + sums.drift[k] + sums.noise[k];
        }
    }
}

/// Running `sum_j f(t_j, y_j) h` and `sum_j g(t_j, y_j) dW_j`.
struct ExplicitSums {
    drift: Vec<f64>,
    noise: Vec<f64>,
    f_buf: Vec<f64>,
    g_buf: Vec<f64>,
}

impl ExplicitSums {
    fn new(d: usize) -> Self {
        ExplicitSums {
            drift: vec![0.0; d],
            noise: vec![0.0; d],
            f_buf: vec![0.0; d],
            g_buf: vec![0.0; d],
        }
    }

    #[inline]
    fn add(&mut self, problem: &ProblemSpec, t: f64, y: &[f64], h: f64, dw: f64) {
        problem.drift(t, y, &mut self.f_buf);
        problem.diffusion(t, y, &mut self.g_buf);
        for k in 0..y.len() {
            self.drift[k] += self.f_buf[k] * h;
            self.noise[k] += self.g_buf[k] * dw;
        }
    }
}

/// Per-order, per-exponential history accumulators
/// `U_j(t_{n+1}) = sum_{k <= n-1} exp(-s_j (t_{n+1} - t_k)) X(t_k) h`,
/// stored componentwise for a `d`-dimensional state.
#[derive(Debug, Clone)]
pub struct HistoryState {
    dim: usize,
    /// `acc[i][j * dim + k]`
    acc: Vec<Vec<f64>>,
}

impl HistoryState {
    /// Zero accumulators, i.e. `U(t_1) = 0`.
    pub fn new(soes: &[SoeApproximation], dim: usize) -> Self {
        HistoryState {
            dim,
            acc: soes.iter().map(|s| vec![0.0; s.n_exp() * dim]).collect(),
        }
    }

    fn from_kernels(kernels: &[FastKernel], dim: usize) -> Self {
        HistoryState {
            dim,
            acc: kernels.iter().map(|k| vec![0.0; k.weights.len() * dim]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.acc.iter().map(|a| a.len() / self.dim).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Accumulator of order `i`, term `j`.
    pub fn accumulator(&self, i: usize, j: usize) -> &[f64] {
        &self.acc[i][j * self.dim..(j + 1) * self.dim]
    }

    /// Advances every accumulator one step with [`update_history`], given
    /// `X(t_{n-1})`.
    pub fn advance(&mut self, soes: &[SoeApproximation], h: f64, x_prev: &[f64]) {
        for (acc, soe) in self.acc.iter_mut().zip(soes) {
            for (term, u) in soe.terms().iter().zip(acc.chunks_exact_mut(self.dim)) {
                for (u_k, &x_k) in u.iter_mut().zip(x_prev) {
                    *u_k = update_history(*u_k, x_k, h, term.exponent);
                }
            }
        }
    }

    /// `sum_j w_j U_j` for each order, written to `out[i * dim + k]`.
    pub fn weighted(&self, soes: &[SoeApproximation], out: &mut [f64]) {
        let d = self.dim;
        for (i, (acc, soe)) in self.acc.iter().zip(soes).enumerate() {
            let dst = &mut out[i * d..(i + 1) * d];
            dst.fill(0.0);
            for (term, u) in soe.terms().iter().zip(acc.chunks_exact(d)) {
                for (o, &u_k) in dst.iter_mut().zip(u) {
                    *o += term.weight * u_k;
                }
            }
        }
    }

    #[inline]
    fn advance_with(&mut self, kernels: &[FastKernel], x_prev: &[f64]) {
        let d = self.dim;
        for (acc, kernel) in self.acc.iter_mut().zip(kernels) {
            if d == 1 {
                let x = x_prev[0];
                for ((u, &a), &b) in acc.iter_mut().zip(&kernel.decay).zip(&kernel.inject) {
                    *u = a * *u + b * x;
                }
            } else {
                for ((u, &a), &b) in acc
                    .chunks_exact_mut(d)
                    .zip(&kernel.decay)
                    .zip(&kernel.inject)
                {
                    for (u_k, &x_k) in u.iter_mut().zip(x_prev) {
                        *u_k = a * *u_k + b * x_k;
                    }
                }
            }
        }
    }

    #[inline]
    fn weighted_sums(&self, kernels: &[FastKernel], out: &mut [f64]) {
        let d = self.dim;
        for (i, (acc, kernel)) in self.acc.iter().zip(kernels).enumerate() {
            let dst = &mut out[i * d..(i + 1) * d];
            if d == 1 {
                dst[0] = acc.iter().zip(&kernel.weights).map(|(u, w)| w * u).sum();
            } else {
                dst.fill(0.0);
                for (u, &w) in acc.chunks_exact(d).zip(&kernel.weights) {
                    for (o, &u_k) in dst.iter_mut().zip(u) {
                        *o += w * u_k;
                    }
                }
            }
        }
    }
}

/// One step of the exponential history recurrence:
/// `exp(-h s) U + exp(-2 h s) x_prev h`.
#[inline]
pub fn update_history(u: f64, x_prev: f64, h: f64, s: f64) -> f64 {
    (-h * s).exp() * u + (-2.0 * h * s).exp() * x_prev * h
}

/// Direct modified Euler-Maruyama scheme, `O(N^2)` work.
pub fn solve_direct(
    problem: &ProblemSpec,
    orders: &FractionalOrders,
    grid: &TimeGrid,
    path: &BrownianPath,
) -> Result<Trajectory> {
    SolverConfig::new(Method::Direct, orders)
        .prepare(grid)?
        .solve(problem, path)
}

/// Fast scheme with caller-supplied SOE approximations, one per order,
/// each valid from some `delta <= h`.
pub fn solve_fast(
    problem: &ProblemSpec,
    orders: &FractionalOrders,
    grid: &TimeGrid,
    path: &BrownianPath,
    soes: &[SoeApproximation],
) -> Result<Trajectory> {
    let config = SolverConfig::new(Method::Fast, orders);
    PreparedSolver::new(config, *grid, soes.to_vec())?.solve(problem, path)
}
