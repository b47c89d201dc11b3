//! Reference implementations written independently of the library code.
#![allow(dead_code)]

use fsde::ProblemSpec;

/// Gamma via the Stirling series after shifting the argument past 20.
pub fn stirling_gamma(x: f64) -> f64 {
    let shift = 20.0;
    let z = x + shift;
    let zi = 1.0 / z;
    let zi2 = zi * zi;
    let series = zi
        * (1.0 / 12.0
            - zi2 * (1.0 / 360.0 - zi2 * (1.0 / 1260.0 - zi2 * (1.0 / 1680.0 - zi2 / 1188.0))));
    let ln_gamma_z =
        (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series;
    let mut prod = 1.0;
    for k in 0..20 {
        prod *= x + k as f64;
    }
    ln_gamma_z.exp() / prod
}

/// Brute-force direct scheme straight from its definition, returning
/// `Y_0..=Y_N` for a `dim`-dimensional state.
pub fn brute_force_direct(
    problem: &ProblemSpec,
    alphas: &[f64],
    horizon: f64,
    increments: &[f64],
) -> Vec<Vec<f64>> {
    let n_steps = increments.len();
    let h = horizon / n_steps as f64;
    let d = problem.dim();
    let coef: Vec<f64> = alphas.iter().map(|a| 1.0 / stirling_gamma(1.0 - a)).collect();
    let mut ys: Vec<Vec<f64>> = vec![problem.y0().to_vec()];
    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d];
    for n in 1..=n_steps {
        let tn = n as f64 * h;
        let mut y = problem.y0().to_vec();
        for j in 0..n {
            let tj = j as f64 * h;
            problem.drift(tj, &ys[j], &mut f);
            problem.diffusion(tj, &ys[j], &mut g);
            let mut kernel = 0.0;
            for (a, c) in alphas.iter().zip(&coef) {
                kernel += c * (tn - tj).powf(-a);
            }
            for k in 0..d {
                y[k] += -kernel * ys[j][k] * h + f[k] * h + g[k] * increments[j];
            }
        }
        ys.push(y);
    }
    ys
}

/// `U(t_n) = sum_{k=0}^{n-2} exp(-s (t_n - t_k)) x_k h`.
pub fn literal_history(s: f64, h: f64, xs: &[f64], n: usize) -> f64 {
    (0..n.saturating_sub(1))
        .map(|k| (-s * (n - k) as f64 * h).exp() * xs[k] * h)
        .sum()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
