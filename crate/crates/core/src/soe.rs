//! Sum-of-exponentials approximation of the power kernel `t^{-alpha}`.
//!
//! The kernel has the integral representation
//!
//! ```text
//! t^{-alpha} = 1/Gamma(alpha) * int_0^inf exp(-s t) s^{alpha - 1} ds
//! ```
//!
//! which is discretised with a Gauss-Jacobi rule on a low-frequency panel
//! `[0, 2^k0]` (weight `s^{alpha-1}` absorbed by the rule) followed by
//! Gauss-Legendre rules on dyadic panels `[2^k, 2^{k+1}]` up to a cutoff
//! where the neglected tail is below the tolerance at `t = delta`. Every
//! quadrature node becomes one `(weight, exponent)` pair, so all weights
//! and exponents are positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_jacobi, gauss_legendre};
use crate::special::gamma;

/// Sample count of the dense sweep run after construction.
pub const BUILD_VALIDATION_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoeTerm {
    pub weight: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoeApproximation {
    alpha: f64,
    terms: Vec<SoeTerm>,
    epsilon: f64,
    delta: f64,
    horizon: f64,
}

impl SoeApproximation {
    /// Wraps explicit terms. Weights and exponents must be positive and finite.
    pub fn from_terms(
        alpha: f64,
        terms: Vec<SoeTerm>,
        epsilon: f64,
        delta: f64,
        horizon: f64,
    ) -> Result<Self> {
        check_params(alpha, epsilon, delta, horizon)?;
        if terms.is_empty() {
            return Err(Error::InvalidSoeParameter("no terms".into()));
        }
        if let Some(bad) = terms.iter().find(|term| {
            !(term.weight > 0.0 && term.exponent > 0.0)
                || !term.weight.is_finite()
                || !term.exponent.is_finite()
        }) {
            return Err(Error::InvalidSoeParameter(format!(
                "non-positive term (weight {}, exponent {})",
                bad.weight, bad.exponent
            )));
        }
        Ok(SoeApproximation {
            alpha,
            terms,
            epsilon,
            delta,
            horizon,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn terms(&self) -> &[SoeTerm] {
        &self.terms
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_exp(&self) -> usize {
        self.terms.len()
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        eval_soe(self, t)
    }

    pub fn validate(&self, samples: usize) -> f64 {
        validate_soe(self, samples)
    }

    #[inline]
    fn sum_at(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| term.weight * (-term.exponent * t).exp())
            .sum()
    }
}

fn check_params(alpha: f64, epsilon: f64, delta: f64, horizon: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidSoeParameter(format!(
            "alpha = {alpha} outside (0, 1)"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidSoeParameter(format!(
            "epsilon = {epsilon} outside (0, 1)"
        )));
    }
    if !(delta > 0.0 && delta < horizon && horizon.is_finite()) {
        return Err(Error::InvalidWindow { delta, horizon });
    }
    Ok(())
}

/// Gauss-Legendre nodes per dyadic panel for a target tolerance.
fn panel_nodes(epsilon: f64) -> usize {
    let digits = -epsilon.log10();
    (digits * 0.4 + 6.0).ceil() as usize
}

/// Gauss-Jacobi nodes on the low-frequency panel.
fn low_panel_nodes(epsilon: f64) -> usize {
    let digits = -epsilon.log10();
    (digits * 0.4 + 4.0).ceil() as usize
}

fn assemble(
    alpha: f64,
    epsilon: f64,
    delta: f64,
    horizon: f64,
    panel: usize,
    low: usize,
) -> Vec<SoeTerm> {
    let inv_gamma = 1.0 / gamma(alpha);
    // low panel ends at 2^k0 <= 1/T so that s t <= 1 there
    let k0 = (1.0 / horizon).log2().floor() as i32;
    let tail_target = epsilon / 8.0;
    let tail = |s_cut: f64| s_cut.powf(alpha - 1.0) * (-s_cut * delta).exp() * inv_gamma / delta;
    let mut k_end = k0;
    while tail(2f64.powi(k_end)) > tail_target {
        k_end += 1;
    }

    let mut terms = Vec::with_capacity(low + panel * (k_end - k0) as usize);

    let a_low = 2f64.powi(k0);
    let jacobi = gauss_jacobi(low, 0.0, alpha - 1.0);
    let half = 0.5 * a_low;
    let scale = half.powf(alpha) * inv_gamma;
    for (&x, &w) in jacobi.nodes.iter().zip(&jacobi.weights) {
        terms.push(SoeTerm {
            weight: scale * w,
            exponent: half * (1.0 + x),
        });
    }

    let legendre = gauss_legendre(panel);
    for k in k0..k_end {
        let a = 2f64.powi(k);
        let half = 0.5 * a;
        for (&x, &w) in legendre.nodes.iter().zip(&legendre.weights) {
            let s = a + half * (1.0 + x);
            terms.push(SoeTerm {
                weight: half * w * s.powf(alpha - 1.0) * inv_gamma,
                exponent: s,
            });
        }
    }
    terms
}

/// Builds an approximation with `|t^{-alpha} - sum_j w_j exp(-s_j t)| <= epsilon`
/// on `[delta, T]`, verified by a dense log-spaced sweep.
pub fn build_soe(alpha: f64, epsilon: f64, delta: f64, horizon: f64) -> Result<SoeApproximation> {
    check_params(alpha, epsilon, delta, horizon)?;
    let mut panel = panel_nodes(epsilon);
    let mut low = low_panel_nodes(epsilon);
    let mut achieved = f64::INFINITY;
    // one retry with denser panels before giving up
    for _ in 0..2 {
        let soe = SoeApproximation {
            alpha,
            terms: assemble(alpha, epsilon, delta, horizon, panel, low),
            epsilon,
            delta,
            horizon,
        };
        achieved = validate_soe(&soe, BUILD_VALIDATION_SAMPLES);
        if achieved <= epsilon {
            return Ok(soe);
        }
        panel += panel / 2;
        low += low / 2;
    }
    Err(Error::ToleranceNotMet {
        alpha,
        epsilon,
        achieved,
    })
}

pub fn eval_soe(soe: &SoeApproximation, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    Ok(soe.sum_at(t))
}

/// `samples` log-spaced points covering `[delta, T]`, endpoints exact.
pub fn log_spaced(delta: f64, horizon: f64, samples: usize) -> Vec<f64> {
    let samples = samples.max(2);
    let ratio = (horizon / delta).ln();
    (0..samples)
        .map(|k| {
            if k == 0 {
                delta
            } else if k == samples - 1 {
                horizon
            } else {
                delta * (ratio * k as f64 / (samples - 1) as f64).exp()
            }
        })
        .collect()
}

/// Maximum absolute kernel error over `samples` log-spaced points in `[delta, T]`.
/// `samples` below 2 is treated as 2 (the two endpoints).
pub fn validate_soe(soe: &SoeApproximation, samples: usize) -> f64 {
    log_spaced(soe.delta, soe.horizon, samples)
        .into_iter()
        .map(|t| (t.powf(-soe.alpha) - soe.sum_at(t)).abs())
        .fold(0.0, f64::max)
}
