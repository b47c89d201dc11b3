//! Domain types shared by the solvers and the Monte Carlo harness.
//!
//! The model problem is the multi-term equation
//!
//! ```text
//! y'(t) + sum_i D^{alpha_i} y(t) = f(t, y) + g(t, y) dW/dt,   y(0) = y0,
//! ```
//!
//! with Riemann-Liouville derivatives of orders `0 < alpha_1 < ... < alpha_m < 1`
//! and a single scalar Brownian driver. Everything here is immutable after
//! construction and can be shared across worker threads.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing derivative orders, each in the open interval (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FractionalOrders(Vec<f64>);

impl FractionalOrders {
    pub fn new(raw: &[f64]) -> Result<Self> {
        validate_orders(raw)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    /// The largest order, which controls the strong convergence rate.
    pub fn max_order(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Theoretical strong order `min(1 - alpha_max, 1/2)`.
    pub fn strong_order(&self) -> f64 {
        (1.0 - self.max_order()).min(0.5)
    }
}

impl TryFrom<Vec<f64>> for FractionalOrders {
    type Error = Error;

    fn try_from(raw: Vec<f64>) -> Result<Self> {
        validate_orders(&raw)
    }
}

impl From<FractionalOrders> for Vec<f64> {
    fn from(orders: FractionalOrders) -> Self {
        orders.0
    }
}

impl fmt::Display for FractionalOrders {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

pub fn validate_orders(raw: &[f64]) -> Result<FractionalOrders> {
    if raw.is_empty() {
        return Err(Error::EmptyOrders);
    }
    for (index, &value) in raw.iter().enumerate() {
        // NaN fails both comparisons.
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::OrderOutOfRange { index, value });
        }
    }
    for (index, pair) in raw.windows(2).enumerate() {
        if pair[0] >= pair[1] {
            return Err(Error::OrdersNotStrictlyIncreasing {
                index,
                prev: pair[0],
                next: pair[1],
            });
        }
    }
    Ok(FractionalOrders(raw.to_vec()))
}

/// Uniform grid `t_n = n h`, `h = T / N`, on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    step: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        make_grid(horizon, steps)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Grid node `t_n`, computed as `n * h` rather than by accumulation.
    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|n| self.t(n))
    }

    /// Index `n` of the left node of the cell `(t_n, t_{n+1}]` containing `s`,
    /// with `s = 0` mapped to `0`.
    pub fn left_index(&self, s: f64) -> Result<usize> {
        if !(s >= 0.0 && s <= self.horizon) {
            return Err(Error::OutOfDomain {
                s,
                horizon: self.horizon,
            });
        }
        if s == 0.0 {
            return Ok(0);
        }
        let last = self.steps - 1;
        let mut n = ((s / self.step).ceil() as usize).saturating_sub(1).min(last);
        // the division can land one cell off when s sits on a node
        while n > 0 && s <= self.t(n) {
            n -= 1;
        }
        while n < last && s > self.t(n + 1) {
            n += 1;
        }
        Ok(n)
    }

    /// `tau_N(s)`: the left endpoint of the left-open, right-closed cell holding `s`.
    pub fn left_node(&self, s: f64) -> Result<f64> {
        self.left_index(s).map(|n| self.t(n))
    }

    /// Whether `other` has `factor` times as many steps on the same horizon.
    pub fn refines(&self, coarse: &TimeGrid) -> Option<usize> {
        if self.horizon != coarse.horizon || self.steps % coarse.steps != 0 {
            return None;
        }
        Some(self.steps / coarse.steps)
    }
}

pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::NonPositiveHorizon(horizon));
    }
    if steps == 0 {
        return Err(Error::ZeroSteps);
    }
    Ok(TimeGrid {
        horizon,
        steps,
        step: horizon / steps as f64,
    })
}

pub fn left_node(grid: &TimeGrid, s: f64) -> Result<f64> {
    grid.left_node(s)
}

/// A coefficient function `(t, y, out)` writing `d` components into `out`.
pub type VectorField = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// Drift, diffusion and initial data for one equation. The noise is a single
/// scalar Brownian motion, so the diffusion returns one column in `R^d`.
#[derive(Clone)]
pub struct ProblemSpec {
    dim: usize,
    y0: Vec<f64>,
    drift: VectorField,
    diffusion: VectorField,
    horizon: f64,
}

impl ProblemSpec {
    pub fn new(
        y0: Vec<f64>,
        horizon: f64,
        drift: VectorField,
        diffusion: VectorField,
    ) -> Result<Self> {
        if y0.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if !y0.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInitialState);
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::NonPositiveHorizon(horizon));
        }
        Ok(ProblemSpec {
            dim: y0.len(),
            y0,
            drift,
            diffusion,
            horizon,
        })
    }

    /// Scalar problem from plain closures.
    pub fn scalar<F, G>(y0: f64, horizon: f64, drift: F, diffusion: G) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            vec![y0],
            horizon,
            Arc::new(move |t, y, out| out[0] = drift(t, y[0])),
            Arc::new(move |t, y, out| out[0] = diffusion(t, y[0])),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::NonPositiveHorizon(horizon));
        }
        self.horizon = horizon;
        Ok(self)
    }

    #[inline]
    pub fn drift(&self, t: f64, y: &[f64], out: &mut [f64]) {
        (self.drift)(t, y, out)
    }

    #[inline]
    pub fn diffusion(&self, t: f64, y: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, y, out)
    }
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("dim", &self.dim)
            .field("y0", &self.y0)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

/// Numerical solution on the grid nodes, stored row-major (`N + 1` rows of `d`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl Trajectory {
    pub(crate) fn from_parts(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), (grid.steps() + 1) * dim);
        Trajectory { grid, dim, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.steps() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.grid.steps())
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Flat row-major storage.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn orders_from_table_setup() {
        let orders = validate_orders(&[0.6, 0.8]).unwrap();
        assert_eq!(orders.len(), 2);
        assert_eq!(orders.max_order(), 0.8);
        assert!((orders.strong_order() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn orders_rejections() {
        assert!(matches!(
            validate_orders(&[0.5, 0.5]),
            Err(Error::OrdersNotStrictlyIncreasing { index: 0, .. })
        ));
        assert!(matches!(
            validate_orders(&[0.3, 1.2]),
            Err(Error::OrderOutOfRange { index: 1, .. })
        ));
        assert!(matches!(validate_orders(&[]), Err(Error::EmptyOrders)));
        assert!(matches!(
            validate_orders(&[0.0]),
            Err(Error::OrderOutOfRange { .. })
        ));
        assert!(matches!(
            validate_orders(&[f64::NAN]),
            Err(Error::OrderOutOfRange { .. })
        ));
        assert!(matches!(
            validate_orders(&[0.8, 0.6]),
            Err(Error::OrdersNotStrictlyIncreasing { .. })
        ));
    }

    #[test]
    fn orders_serde_validates() {
        let ok: FractionalOrders = serde_json::from_str("[0.1, 0.2]").unwrap();
        assert_eq!(ok.as_slice(), &[0.1, 0.2]);
        assert!(serde_json::from_str::<FractionalOrders>("[0.2, 0.1]").is_err());
        assert_eq!(serde_json::to_string(&ok).unwrap(), "[0.1,0.2]");
    }

    #[test]
    fn grid_nodes() {
        let g = make_grid(1.0, 4).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = make_grid(1.0, 1).unwrap();
        assert_eq!(g.nodes().collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert!(matches!(make_grid(0.0, 4), Err(Error::NonPositiveHorizon(_))));
        assert!(matches!(make_grid(-1.0, 4), Err(Error::NonPositiveHorizon(_))));
        assert!(matches!(make_grid(1.0, 0), Err(Error::ZeroSteps)));
    }

    #[test]
    fn final_node_hits_horizon() {
        for &(t, n) in &[(1.0, 3usize), (0.7, 1000), (3.3, 2048), (1.0, 1 << 20)] {
            let g = make_grid(t, n).unwrap();
            let end = g.t(n);
            assert!((end - t).abs() <= f64::EPSILON * t, "T={t} N={n} t_N={end}");
        }
    }

    #[test]
    fn left_node_examples() {
        let g = make_grid(1.0, 4).unwrap();
        assert_eq!(g.left_node(0.3).unwrap(), 0.25);
        assert_eq!(g.left_node(0.25).unwrap(), 0.0);
        assert_eq!(g.left_node(0.0).unwrap(), 0.0);
        assert_eq!(g.left_node(1.0).unwrap(), 0.75);
        assert!(matches!(g.left_node(-0.1), Err(Error::OutOfDomain { .. })));
        assert!(matches!(g.left_node(1.5), Err(Error::OutOfDomain { .. })));
        assert!(matches!(g.left_node(f64::NAN), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn left_node_on_every_node() {
        let g = make_grid(0.7, 97).unwrap();
        for n in 1..=97 {
            assert_eq!(g.left_index(g.t(n)).unwrap(), n - 1);
        }
    }

    proptest! {
        #[test]
        fn left_node_cells(t in 0.1f64..10.0, n_steps in 1usize..500, cell in 0usize..500, frac in 0.0f64..1.0) {
            let g = make_grid(t, n_steps).unwrap();
            let n = cell % n_steps;
            let lo = g.t(n);
            let hi = g.t(n + 1).min(t);
            // a point in (t_n, t_{n+1}]
            let s = lo + (1.0 - frac) * (hi - lo);
            prop_assume!(s > lo && s <= hi);
            prop_assert_eq!(g.left_node(s).unwrap(), lo);
        }

        #[test]
        fn left_node_monotone_and_close(t in 0.1f64..10.0, n_steps in 1usize..500, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let g = make_grid(t, n_steps).unwrap();
            let (s1, s2) = if a <= b { (a * t, b * t) } else { (b * t, a * t) };
            let l1 = g.left_node(s1).unwrap();
            let l2 = g.left_node(s2).unwrap();
            prop_assert!(l1 <= l2);
            prop_assert!(s2 - l2 <= g.step() * (1.0 + 1e-12));
            prop_assert!(l2 <= s2);
        }

        #[test]
        fn validate_orders_idempotent(raw in proptest::collection::vec(0.001f64..0.999, 1..6)) {
            let mut sorted = raw.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sorted.dedup();
            let first = validate_orders(&sorted).unwrap();
            let second = validate_orders(first.as_slice()).unwrap();
            prop_assert_eq!(first, second);
        }
    }

    #[test]
    fn problem_rejects_bad_data() {
        let f: VectorField = Arc::new(|_, _, out| out.fill(0.0));
        assert!(matches!(
            ProblemSpec::new(vec![], 1.0, f.clone(), f.clone()),
            Err(Error::ZeroDimension)
        ));
        assert!(matches!(
            ProblemSpec::new(vec![f64::INFINITY], 1.0, f.clone(), f.clone()),
            Err(Error::NonFiniteInitialState)
        ));
        assert!(matches!(
            ProblemSpec::new(vec![1.0], 0.0, f.clone(), f),
            Err(Error::NonPositiveHorizon(_))
        ));
    }
}
