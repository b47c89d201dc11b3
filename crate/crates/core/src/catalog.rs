//! Named test problems for the CLI and the acceptance suite.
//!
//! Every entry has bounded, globally Lipschitz drift and diffusion that are
//! also Lipschitz in `t`, so the usual existence and convergence results
//! apply. This is documented here, not checked at run time.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{FractionalOrders, ProblemSpec};

/// Overrides applied when instantiating a catalog problem.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProblemParams {
    pub horizon: Option<f64>,
    pub y0: Option<Vec<f64>>,
}

pub struct CatalogEntry {
    pub id: &'static str,
    pub description: &'static str,
    pub default_orders: &'static [f64],
    construct: fn(&ProblemParams) -> Result<ProblemSpec>,
}

impl CatalogEntry {
    pub fn build(&self, params: &ProblemParams) -> Result<ProblemSpec> {
        (self.construct)(params)
    }

    pub fn default_orders(&self) -> FractionalOrders {
        FractionalOrders::new(self.default_orders).expect("catalog orders are valid")
    }
}

impl std::fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("id", &self.id)
            .field("default_orders", &self.default_orders)
            .finish_non_exhaustive()
    }
}

const EXAMPLE_Y0: f64 = 0.1;

fn scalar_y0(params: &ProblemParams) -> Result<f64> {
    match params.y0.as_deref() {
        None => Ok(EXAMPLE_Y0),
        Some([v]) => Ok(*v),
        Some(other) => Err(Error::DimensionMismatch {
            expected: 1,
            got: other.len(),
        }),
    }
}

/// `f(t, y) = sin(t y)`, `g(t, y) = sin(y)`, `y0 = 0.1` on `[0, 1]`.
fn sine_problem(params: &ProblemParams) -> Result<ProblemSpec> {
    ProblemSpec::scalar(
        scalar_y0(params)?,
        params.horizon.unwrap_or(1.0),
        |t, y| (t * y).sin(),
        |_, y| y.sin(),
    )
}

fn coupled_problem(params: &ProblemParams) -> Result<ProblemSpec> {
    let y0 = params.y0.clone().unwrap_or_else(|| vec![0.5, -0.25]);
    if y0.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: y0.len(),
        });
    }
    ProblemSpec::new(
        y0,
        params.horizon.unwrap_or(1.0),
        Arc::new(|t, y, out| {
            out[0] = (t * y[1]).sin() - 0.5 * y[0].sin();
            out[1] = y[0].cos() - y[1].sin();
        }),
        Arc::new(|_, y, out| {
            out[0] = 0.5 * y[1].cos();
            out[1] = 0.3 * (y[0] + y[1]).sin();
        }),
    )
}

pub static CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        id: "example1",
        description: "two-term equation y' + D^a1 y + D^a2 y = sin(t y) + sin(y) dW/dt, y(0) = 0.1, t in [0, 1]",
        default_orders: &[0.1, 0.2],
        construct: sine_problem,
    },
    CatalogEntry {
        id: "example2",
        description: "three-term variant with the same f = sin(t y), g = sin(y), y(0) = 0.1; \
                      solved in the full model form (including the y' term) with m = 3 orders",
        default_orders: &[0.1, 0.5, 0.85],
        construct: sine_problem,
    },
    CatalogEntry {
        id: "coupled2d",
        description: "two-component system with bounded trigonometric drift and diffusion, y(0) = (0.5, -0.25)",
        default_orders: &[0.3, 0.6],
        construct: coupled_problem,
    },
];

pub fn lookup(id: &str) -> Result<&'static CatalogEntry> {
    CATALOG
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Error::UnknownProblem(id.to_string()))
}

pub fn ids() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|e| e.id)
}
