//! Monte Carlo measurement of strong errors, convergence orders and
//! run time.
//!
//! The error at resolution `n` compares the solutions at `n` and `2n`
//! steps driven by the same Brownian path:
//!
//! ```text
//! e_n = max_{1<=k<=n} ( mean_i |Y^(n)(t_k, w_i) - Y^(2n)(t_k, w_i)|^2 )^{1/2}
//! ```
//!
//! Each path is sampled once at the finest level of the study and coarsened
//! to every other level. Paths are processed in fixed blocks of
//! [`REDUCTION_BLOCK`] consecutive indices; block partial sums are taken in
//! ascending path order and then combined pairwise, so the result does not
//! depend on how many workers ran the blocks.

use std::collections::BTreeSet;
use std::hint::black_box;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::{coarsen, path_seed, sample_path, BrownianPath, RNG_ID};
use crate::catalog::{self, ProblemParams};
use crate::error::{Error, Result};
use crate::model::{FractionalOrders, ProblemSpec, TimeGrid};
use crate::solver::{Method, PreparedSolver, SolverConfig, DEFAULT_SOE_EPSILON};

pub const REDUCTION_BLOCK: usize = 64;
pub const DEFAULT_PATH_COUNT: usize = 1000;
pub const MIN_TIMING_REPEATS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub problem: String,
    pub orders: FractionalOrders,
    /// Coarse resolutions `n`; each is compared against `2n`.
    pub resolutions: Vec<usize>,
    pub path_count: usize,
    pub base_seed: u64,
    pub soe_epsilon: f64,
    pub methods: Vec<Method>,
    pub horizon: f64,
    /// Worker threads for the path loop, 0 for one per core.
    pub workers: usize,
    /// Timing repetitions per resolution, 0 to skip benchmarking.
    pub timing_repeats: usize,
    /// Paths per timed batch.
    pub bench_paths: usize,
}

impl StudyConfig {
    pub fn new(problem: &str, orders: FractionalOrders, resolutions: Vec<usize>) -> Self {
        StudyConfig {
            problem: problem.to_string(),
            orders,
            resolutions,
            path_count: DEFAULT_PATH_COUNT,
            base_seed: 0,
            soe_epsilon: DEFAULT_SOE_EPSILON,
            methods: vec![Method::Fast],
            horizon: 1.0,
            workers: 0,
            timing_repeats: 0,
            bench_paths: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.methods.is_empty() {
            return bad("no solver methods selected".into());
        }
        if self.resolutions.is_empty() {
            return bad("resolution list is empty".into());
        }
        if self.resolutions.contains(&0) {
            return bad("resolutions must be positive".into());
        }
        for pair in self.resolutions.windows(2) {
            if pair[1] <= pair[0] || pair[1] % pair[0] != 0 {
                return bad(format!(
                    "resolutions must increase and each must divide the next ({} then {})",
                    pair[0], pair[1]
                ));
            }
        }
        if self.path_count < 2 {
            return bad(format!("path count must be at least 2, got {}", self.path_count));
        }
        if self.methods.contains(&Method::Fast) && !(self.soe_epsilon > 0.0 && self.soe_epsilon < 1.0)
        {
            return bad(format!("SOE tolerance {} outside (0, 1)", self.soe_epsilon));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::NonPositiveHorizon(self.horizon));
        }
        if self.timing_repeats > 0 {
            if self.timing_repeats < MIN_TIMING_REPEATS {
                return bad(format!(
                    "timing needs at least {MIN_TIMING_REPEATS} repeats (or 0 to disable), got {}",
                    self.timing_repeats
                ));
            }
            if self.bench_paths == 0 {
                return bad("bench_paths must be positive when timing is enabled".into());
            }
        }
        Ok(())
    }

    fn sorted_methods(&self) -> Vec<Method> {
        self.methods.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }
}

/// Every grid size a study touches: each `n` and its `2n`.
pub fn study_levels(resolutions: &[usize]) -> Vec<usize> {
    resolutions
        .iter()
        .flat_map(|&n| [n, 2 * n])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledError {
    pub value: f64,
    /// Delta-method standard error at the maximising node.
    pub std_err: f64,
    /// Coarse node index `k` attaining the maximum.
    pub argmax_k: usize,
}

/// Per-method sums over a set of paths.
#[derive(Debug, Clone)]
struct Partial {
    /// `[resolution][k-1]` sums of squared differences
    sum: Vec<Vec<f64>>,
    sum_sq: Vec<Vec<f64>>,
    /// `[level]` sums of `|Y(T)|^2`
    final_sq: Vec<f64>,
}

impl Partial {
    fn zero(resolutions: &[usize], levels: usize) -> Self {
        Partial {
            sum: resolutions.iter().map(|&n| vec![0.0; n]).collect(),
            sum_sq: resolutions.iter().map(|&n| vec![0.0; n]).collect(),
            final_sq: vec![0.0; levels],
        }
    }

    fn merge(mut self, other: &Partial) -> Self {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.final_sq.iter_mut().zip(&other.final_sq).for_each(|(x, y)| *x += y);
        self
    }
}

#[derive(Debug, Clone)]
struct BlockResult {
    per_method: Vec<Partial>,
    max_gap: f64,
}

fn pairwise(parts: &[BlockResult]) -> BlockResult {
    match parts {
        [] => unreachable!("at least one block"),
        [only] => only.clone(),
        _ => {
            let (left, right) = parts.split_at(parts.len() / 2);
            let l = pairwise(left);
            let r = pairwise(right);
            BlockResult {
                per_method: l
                    .per_method
                    .into_iter()
                    .zip(&r.per_method)
                    .map(|(a, b)| a.merge(b))
                    .collect(),
                max_gap: l.max_gap.max(r.max_gap),
            }
        }
    }
}

/// Solvers for every (method, level) pair of a measurement.
struct Bench<'a> {
    problem: &'a ProblemSpec,
    resolutions: Vec<usize>,
    levels: Vec<usize>,
    /// `[method][level]`
    solvers: Vec<Vec<PreparedSolver>>,
    finest: TimeGrid,
}

impl<'a> Bench<'a> {
    fn new(problem: &'a ProblemSpec, configs: &[SolverConfig], resolutions: &[usize]) -> Result<Self> {
        let levels = study_levels(resolutions);
        let horizon = problem.horizon();
        let solvers = configs
            .iter()
            .map(|config| {
                levels
                    .iter()
                    .map(|&n| config.prepare(&TimeGrid::new(horizon, n)?))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let finest = TimeGrid::new(horizon, *levels.last().expect("nonempty"))?;
        Ok(Bench {
            problem,
            resolutions: resolutions.to_vec(),
            levels,
            solvers,
            finest,
        })
    }

    fn level_index(&self, n: usize) -> usize {
        self.levels.binary_search(&n).expect("level present")
    }

    fn run_block(&self, base_seed: u64, paths: std::ops::Range<usize>) -> Result<BlockResult> {
        let d = self.problem.dim();
        let mut per_method: Vec<Partial> = self
            .solvers
            .iter()
            .map(|_| Partial::zero(&self.resolutions, self.levels.len()))
            .collect();
        let mut max_gap = 0.0f64;
        for index in paths {
            let fine = sample_path(path_seed(base_seed, index), &self.finest);
            let finest_steps = self.finest.steps();
            let coarse_paths = self
                .levels
                .iter()
                .map(|&n| coarsen(&fine, finest_steps / n))
                .collect::<Result<Vec<BrownianPath>>>()?;

            let mut all_trajectories = Vec::with_capacity(self.solvers.len());
            for (solvers, partial) in self.solvers.iter().zip(per_method.iter_mut()) {
                let trajectories = solvers
                    .iter()
                    .zip(&coarse_paths)
                    .map(|(solver, path)| solver.solve(self.problem, path))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::PathFailed {
                        path: index,
                        source: Box::new(e),
                    })?;
                for (r, &n) in self.resolutions.iter().enumerate() {
                    let coarse = &trajectories[self.level_index(n)];
                    let fine = &trajectories[self.level_index(2 * n)];
                    for k in 1..=n {
                        let sq: f64 = coarse
                            .state(k)
                            .iter()
                            .zip(fine.state(2 * k))
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        partial.sum[r][k - 1] += sq;
                        partial.sum_sq[r][k - 1] += sq * sq;
                    }
                }
                for (l, traj) in trajectories.iter().enumerate() {
                    partial.final_sq[l] += traj.final_state().iter().map(|v| v * v).sum::<f64>();
                }
                all_trajectories.push(trajectories);
            }
            if all_trajectories.len() == 2 {
                for (a, b) in all_trajectories[0].iter().zip(&all_trajectories[1]) {
                    for (x, y) in a.states().zip(b.states()) {
                        let gap = x
                            .iter()
                            .zip(y)
                            .map(|(p, q)| (p - q) * (p - q))
                            .sum::<f64>()
                            .sqrt();
                        max_gap = max_gap.max(gap);
                    }
                }
                debug_assert_eq!(all_trajectories[0][0].dim(), d);
            }
        }
        Ok(BlockResult {
            per_method,
            max_gap,
        })
    }
}

/// Raw result of a coupled measurement across methods.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub resolutions: Vec<usize>,
    pub levels: Vec<usize>,
    pub path_count: usize,
    /// Indexed like the `configs` passed to [`measure`].
    pub methods: Vec<MethodMeasurement>,
    /// Max over paths, levels and nodes of the state gap between the two
    /// methods when exactly two were measured.
    pub max_method_gap: Option<f64>,
    /// Total SOE terms per level, per method (0 for the direct scheme).
    pub n_exp: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct MethodMeasurement {
    pub method: Method,
    /// One per resolution.
    pub errors: Vec<CoupledError>,
    /// Mean `|Y(T)|^2` per level.
    pub mean_square_final: Vec<f64>,
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

/// Runs `path_count` coupled paths for every solver configuration.
pub fn measure(
    problem: &ProblemSpec,
    configs: &[SolverConfig],
    resolutions: &[usize],
    path_count: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Measurement> {
    if configs.is_empty() {
        return Err(Error::InvalidConfig("no solver configurations".into()));
    }
    if path_count == 0 {
        return Err(Error::InvalidConfig("path count must be positive".into()));
    }
    let bench = Bench::new(problem, configs, resolutions)?;
    let blocks: Vec<std::ops::Range<usize>> = (0..path_count)
        .step_by(REDUCTION_BLOCK)
        .map(|start| start..(start + REDUCTION_BLOCK).min(path_count))
        .collect();
    let pool = build_pool(workers)?;
    let partials = pool.install(|| {
        blocks
            .par_iter()
            .map(|range| bench.run_block(base_seed, range.clone()))
            .collect::<Result<Vec<_>>>()
    })?;
    let total = pairwise(&partials);

    let p = path_count as f64;
    let methods = configs
        .iter()
        .zip(&total.per_method)
        .map(|(config, partial)| {
            let errors = resolutions
                .iter()
                .enumerate()
                .map(|(r, _)| {
                    let (k, mean) = partial.sum[r]
                        .iter()
                        .map(|s| s / p)
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |best, (k, m)| {
                            if m > best.1 {
                                (k, m)
                            } else {
                                best
                            }
                        });
                    let second = partial.sum_sq[r][k] / p;
                    let var = ((second - mean * mean) * p / (p - 1.0).max(1.0)).max(0.0);
                    let se_mean = (var / p).sqrt();
                    let value = mean.sqrt();
                    CoupledError {
                        value,
                        std_err: if value > 0.0 { se_mean / (2.0 * value) } else { 0.0 },
                        argmax_k: k + 1,
                    }
                })
                .collect();
            MethodMeasurement {
                method: config.method(),
                errors,
                mean_square_final: partial.final_sq.iter().map(|s| s / p).collect(),
            }
        })
        .collect();
    Ok(Measurement {
        resolutions: resolutions.to_vec(),
        levels: bench.levels.clone(),
        path_count,
        methods,
        max_method_gap: (configs.len() == 2).then_some(total.max_gap),
        n_exp: bench
            .solvers
            .iter()
            .map(|per_level| per_level.iter().map(|s| s.n_exp_total()).collect())
            .collect(),
    })
}

/// Coupled two-level error `e_n` for one solver configuration.
pub fn coupled_error(
    problem: &ProblemSpec,
    config: &SolverConfig,
    n: usize,
    path_count: usize,
    base_seed: u64,
) -> Result<CoupledError> {
    let m = measure(problem, std::slice::from_ref(config), &[n], path_count, base_seed, 1)?;
    Ok(m.methods[0].errors[0])
}

/// Per-path squared differences `|Y^(n)(t_k) - Y^(2n)(t_k)|^2`, `[path][k-1]`.
/// Sequential; meant for diagnostics such as bootstrap error bars.
pub fn coupled_squared_differences(
    problem: &ProblemSpec,
    config: &SolverConfig,
    n: usize,
    path_count: usize,
    base_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let coarse_solver = config.prepare(&TimeGrid::new(problem.horizon(), n)?)?;
    let fine_grid = TimeGrid::new(problem.horizon(), 2 * n)?;
    let fine_solver = config.prepare(&fine_grid)?;
    (0..path_count)
        .map(|i| {
            let fine_path = sample_path(path_seed(base_seed, i), &fine_grid);
            let coarse_path = coarsen(&fine_path, 2)?;
            let fine = fine_solver.solve(problem, &fine_path)?;
            let coarse = coarse_solver.solve(problem, &coarse_path)?;
            Ok((1..=n)
                .map(|k| {
                    coarse
                        .state(k)
                        .iter()
                        .zip(fine.state(2 * k))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                })
                .collect())
        })
        .collect()
}

/// `order[k] = log2(errors[k] / errors[k+1])`.
pub fn estimate_orders(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::InvalidConfig(
            "order estimation needs at least two errors".into(),
        ));
    }
    if let Some((index, &value)) = errors.iter().enumerate().find(|(_, &e)| !(e > 0.0)) {
        return Err(Error::NonPositiveError { index, value });
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub direct_s: f64,
    pub fast_s: f64,
}

impl Timing {
    pub fn ratio(&self) -> f64 {
        self.direct_s / self.fast_s
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median wall-clock seconds to solve a batch of `path_count` paths with
/// each method, over `repeats` repetitions. Path sampling and SOE
/// construction happen before the clock starts; both methods see the same
/// paths. Runs on the calling thread.
pub fn benchmark(
    problem: &ProblemSpec,
    orders: &FractionalOrders,
    n: usize,
    path_count: usize,
    base_seed: u64,
    repeats: usize,
    soe_epsilon: f64,
) -> Result<Timing> {
    if repeats == 0 || path_count == 0 {
        return Err(Error::InvalidConfig(
            "benchmark needs at least one repeat and one path".into(),
        ));
    }
    let grid = TimeGrid::new(problem.horizon(), n)?;
    let direct = SolverConfig::new(Method::Direct, orders).prepare(&grid)?;
    let fast = SolverConfig::new(Method::Fast, orders)
        .with_soe_epsilon(soe_epsilon)?
        .prepare(&grid)?;
    let paths: Vec<BrownianPath> = (0..path_count)
        .map(|i| sample_path(path_seed(base_seed, i), &grid))
        .collect();

    let time_batch = |solver: &PreparedSolver| -> Result<f64> {
        let start = Instant::now();
        for path in &paths {
            let traj = solver.solve(problem, path)?;
            black_box(traj.final_state()[0]);
        }
        Ok(start.elapsed().as_secs_f64())
    };

    let mut direct_s = Vec::with_capacity(repeats);
    let mut fast_s = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        direct_s.push(time_batch(&direct)?);
        fast_s.push(time_batch(&fast)?);
    }
    Ok(Timing {
        direct_s: median(direct_s),
        fast_s: median(fast_s),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub errors: Vec<f64>,
    pub std_errs: Vec<f64>,
    /// One fewer entry than `errors`.
    pub orders: Vec<f64>,
    pub mean_order: f64,
    /// Mean `|Y(T)|^2` at each level of the study.
    pub mean_square_final: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub rng: String,
    pub timestamp_unix: u64,
    pub base_seed: u64,
    pub config: StudyConfig,
    pub levels: Vec<usize>,
    pub theoretical_order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub metadata: ReportMetadata,
    pub resolutions: Vec<usize>,
    pub methods: Vec<MethodSummary>,
    /// Per resolution; `None` when timing was disabled.
    pub timings: Vec<Option<Timing>>,
    /// Total SOE terms of the fast solver per resolution, when it ran.
    pub n_exp: Option<Vec<usize>>,
    pub max_fast_direct_gap: Option<f64>,
}

impl ConvergenceReport {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// The method whose errors fill the single `error`/`order` CSV columns:
    /// direct when it ran, otherwise fast.
    pub fn primary(&self) -> &MethodSummary {
        self.method(Method::Direct).unwrap_or(&self.methods[0])
    }
}

/// Looks up the study's problem in the catalog and runs it.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let problem = catalog::lookup(&config.problem)?.build(&ProblemParams {
        horizon: Some(config.horizon),
        y0: None,
    })?;
    run_study_with(&problem, config)
}

/// Runs a study on an explicit problem; `config.problem` is only echoed.
pub fn run_study_with(problem: &ProblemSpec, config: &StudyConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    if problem.horizon() != config.horizon {
        return Err(Error::GridMismatch(format!(
            "problem horizon {} differs from study horizon {}",
            problem.horizon(),
            config.horizon
        )));
    }
    let methods = config.sorted_methods();
    let configs = methods
        .iter()
        .map(|&m| {
            let c = SolverConfig::new(m, &config.orders);
            if m == Method::Fast {
                c.with_soe_epsilon(config.soe_epsilon)
            } else {
                Ok(c)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let measured = measure(
        problem,
        &configs,
        &config.resolutions,
        config.path_count,
        config.base_seed,
        config.workers,
    )
    .map_err(|e| Error::StageFailed {
        stage: "coupled error",
        resolution: *config.resolutions.last().expect("validated"),
        source: Box::new(e),
    })?;

    let summaries = measured
        .methods
        .iter()
        .map(|mm| {
            let errors: Vec<f64> = mm.errors.iter().map(|e| e.value).collect();
            let orders = if errors.len() >= 2 {
                estimate_orders(&errors).map_err(|e| Error::StageFailed {
                    stage: "order estimation",
                    resolution: config.resolutions[0],
                    source: Box::new(e),
                })?
            } else {
                Vec::new()
            };
            let mean_order = if orders.is_empty() {
                f64::NAN
            } else {
                orders.iter().sum::<f64>() / orders.len() as f64
            };
            Ok(MethodSummary {
                method: mm.method,
                std_errs: mm.errors.iter().map(|e| e.std_err).collect(),
                errors,
                orders,
                mean_order,
                mean_square_final: mm.mean_square_final.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let timings = if config.timing_repeats > 0 {
        config
            .resolutions
            .iter()
            .map(|&n| {
                benchmark(
                    problem,
                    &config.orders,
                    n,
                    config.bench_paths,
                    config.base_seed,
                    config.timing_repeats,
                    config.soe_epsilon,
                )
                .map(Some)
                .map_err(|e| Error::StageFailed {
                    stage: "benchmark",
                    resolution: n,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![None; config.resolutions.len()]
    };

    let n_exp = methods.iter().position(|&m| m == Method::Fast).map(|i| {
        config
            .resolutions
            .iter()
            .map(|&n| measured.n_exp[i][measured.levels.binary_search(&n).expect("level")])
            .collect()
    });

    Ok(ConvergenceReport {
        metadata: ReportMetadata {
            tool: format!("fsde {}", env!("CARGO_PKG_VERSION")),
            rng: RNG_ID.to_string(),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            base_seed: config.base_seed,
            config: config.clone(),
            levels: measured.levels.clone(),
            theoretical_order: config.orders.strong_order(),
        },
        resolutions: config.resolutions.clone(),
        methods: summaries,
        timings,
        n_exp,
        max_fast_direct_gap: measured.max_method_gap,
    })
}
