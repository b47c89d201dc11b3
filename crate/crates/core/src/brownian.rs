//! Seeded, grid-aligned Brownian increments.
//!
//! A study samples every path once at its finest resolution and obtains the
//! coarser levels with [`coarsen`], so all resolutions see the same `W`.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::TimeGrid;

/// Identification of the generator, echoed into report metadata.
pub const RNG_ID: &str =
    "rand_chacha 0.9 ChaCha8Rng::seed_from_u64(seed) -> rand_distr 0.5 StandardNormal (ziggurat), scaled by sqrt(h)";

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: TimeGrid,
    increments: Vec<f64>,
    seed: u64,
}

impl BrownianPath {
    /// Wraps externally supplied increments (e.g. a path dump from another tool).
    pub fn from_increments(grid: TimeGrid, increments: Vec<f64>, seed: u64) -> Result<Self> {
        if increments.len() != grid.steps() {
            return Err(Error::GridMismatch(format!(
                "{} increments for a grid of {} steps",
                increments.len(),
                grid.steps()
            )));
        }
        if let Some(j) = increments.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: j });
        }
        Ok(BrownianPath {
            grid,
            increments,
            seed,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `increments[j] = W(t_{j+1}) - W(t_j)`.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `W(T)` as the left-to-right sum of the increments.
    pub fn terminal_value(&self) -> f64 {
        self.increments.iter().sum()
    }

    pub fn coarsen(&self, factor: usize) -> Result<BrownianPath> {
        coarsen(self, factor)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "j,t_j,dW")?;
        for (j, dw) in self.increments.iter().enumerate() {
            writeln!(out, "{},{:e},{:e}", j, self.grid.t(j), dw)?;
        }
        Ok(())
    }

    /// Raw little-endian `f64` increments, no header.
    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        for dw in &self.increments {
            out.write_all(&dw.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Seed of path `index` in a batch: `base + index` with wraparound.
#[inline]
pub fn path_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_add(index as u64)
}

/// `N` i.i.d. `Normal(0, h)` increments; bit-identical for equal `(seed, grid)`.
pub fn sample_path(seed: u64, grid: &TimeGrid) -> BrownianPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = grid.step().sqrt();
    let increments = (0..grid.steps())
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z * scale
        })
        .collect();
    BrownianPath {
        grid: *grid,
        increments,
        seed,
    }
}

/// Sums consecutive blocks of `factor` increments onto the grid with
/// `N / factor` steps over the same horizon.
pub fn coarsen(path: &BrownianPath, factor: usize) -> Result<BrownianPath> {
    let steps = path.grid.steps();
    if factor == 0 || steps % factor != 0 {
        return Err(Error::FactorDoesNotDivideN { factor, steps });
    }
    if factor == 1 {
        return Ok(path.clone());
    }
    let grid = TimeGrid::new(path.grid.horizon(), steps / factor)?;
    let increments = path
        .increments
        .chunks_exact(factor)
        .map(|block| block.iter().sum())
        .collect();
    Ok(BrownianPath {
        grid,
        increments,
        seed: path.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn deterministic_and_sized() {
        let g = grid(4);
        let a = sample_path(7, &g);
        let b = sample_path(7, &g);
        assert_eq!(a.increments().len(), 4);
        assert_eq!(
            a.increments().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.increments().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_ne!(sample_path(8, &g).increments(), a.increments());
    }

    #[test]
    fn increment_variance_matches_step() {
        // 10^6 increments with h = 0.01
        let g = TimeGrid::new(100.0, 10_000).unwrap();
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for i in 0..100 {
            let p = sample_path(path_seed(12345, i), &g);
            sum_sq += p.increments().iter().map(|d| d * d).sum::<f64>();
            count += p.increments().len();
        }
        assert_eq!(count, 1_000_000);
        let mean_sq = sum_sq / count as f64;
        assert!((0.0097..=0.0103).contains(&mean_sq), "E[dW^2] = {mean_sq}");
    }

    #[test]
    fn coarsen_examples() {
        let g = grid(4);
        let p = BrownianPath::from_increments(g, vec![1.0, 2.0, 3.0, 4.0], 0).unwrap();
        let c = coarsen(&p, 2).unwrap();
        assert_eq!(c.increments(), &[3.0, 7.0]);
        assert_eq!(c.grid().steps(), 2);
        assert_eq!(c.grid().horizon(), 1.0);
        assert_eq!(coarsen(&p, 1).unwrap(), p);
        assert!(matches!(
            coarsen(&p, 3),
            Err(Error::FactorDoesNotDivideN { factor: 3, steps: 4 })
        ));
        assert!(matches!(coarsen(&p, 0), Err(Error::FactorDoesNotDivideN { .. })));
    }

    #[test]
    fn from_increments_checks() {
        let g = grid(3);
        assert!(BrownianPath::from_increments(g, vec![0.0; 2], 0).is_err());
        assert!(BrownianPath::from_increments(g, vec![0.0, f64::NAN, 0.0], 0).is_err());
    }

    #[test]
    fn terminal_variance_within_three_standard_errors() {
        let g = TimeGrid::new(1.5, 8).unwrap();
        let paths = 100_000;
        let values: Vec<f64> = (0..paths)
            .map(|i| sample_path(path_seed(99, i), &g).terminal_value())
            .collect();
        let mean = values.iter().sum::<f64>() / paths as f64;
        let var = values.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
        // for Gaussian W(T), Var(sample variance) = 2 T^2 / (P - 1)
        let se = (2.0 * 1.5f64.powi(2) / (paths - 1) as f64).sqrt();
        assert!((var - 1.5).abs() < 3.0 * se, "var {var}, se {se}");
    }

    #[test]
    fn dumps() {
        let p = BrownianPath::from_increments(grid(2), vec![0.5, -0.25], 3).unwrap();
        let mut csv = Vec::new();
        p.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "j,t_j,dW\n0,0e0,5e-1\n1,5e-1,-2.5e-1\n");
        let mut bin = Vec::new();
        p.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 16);
        assert_eq!(f64::from_le_bytes(bin[8..].try_into().unwrap()), -0.25);
    }

    proptest! {
        #[test]
        fn coarsening_preserves_terminal_value(seed in any::<u64>(), log_n in 1u32..9, log_f in 0u32..9) {
            let n = 1usize << log_n;
            let factor = 1usize << log_f.min(log_n);
            let p = sample_path(seed, &grid(n));
            let c = coarsen(&p, factor).unwrap();
            let fine = p.terminal_value();
            let coarse = c.terminal_value();
            // different summation trees; a few ulps of the increment magnitude
            let scale: f64 = p.increments().iter().map(|v| v.abs()).sum();
            prop_assert!((fine - coarse).abs() <= 4.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE));
            // whole-path coarsening sums left to right, matching terminal_value exactly
            let whole = coarsen(&p, n).unwrap();
            prop_assert_eq!(whole.increments()[0].to_bits(), fine.to_bits());
        }

        #[test]
        fn coarsening_composes(seed in any::<u64>(), a in 0u32..4, b in 0u32..4) {
            let (fa, fb) = (1usize << a, 1usize << b);
            let p = sample_path(seed, &grid(64));
            let two_step = coarsen(&coarsen(&p, fa).unwrap(), fb).unwrap();
            let one_step = coarsen(&p, fa * fb).unwrap();
            prop_assert_eq!(two_step.grid(), one_step.grid());
            let scale: f64 = p.increments().iter().map(|v| v.abs()).sum();
            for (x, y) in two_step.increments().iter().zip(one_step.increments()) {
                prop_assert!((x - y).abs() <= 8.0 * f64::EPSILON * scale);
            }
        }
    }
}
