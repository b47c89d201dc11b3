//! Command-line front end.
//!
//! Every study flag can also be given through an environment variable with
//! the `FSDE_` prefix (`--soe-eps` is `FSDE_SOE_EPS`, `--out-dir` is
//! `FSDE_OUT_DIR`, and so on) or through a flat JSON config file passed
//! with `--config`. Command-line flags and environment variables win over
//! the file, which wins over the built-in defaults.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::brownian::{path_seed, sample_path};
use crate::catalog::{self, ProblemParams};
use crate::error::Error;
use crate::harness::{run_study, StudyConfig};
use crate::model::{validate_orders, FractionalOrders, TimeGrid};
use crate::report;
use crate::soe::{build_soe, validate_soe};
use crate::solver::{Method, SolverConfig, DEFAULT_SOE_EPSILON};

pub const ENV_PREFIX: &str = "FSDE_";

pub const DEFAULT_PROBLEM: &str = "example1";
pub const DEFAULT_RESOLUTIONS: [usize; 2] = [128, 256];
pub const DEFAULT_PATHS: usize = 200;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_REPEAT: usize = 3;
pub const DEFAULT_BENCH_PATHS: usize = 10;
pub const DEFAULT_OUT_DIR: &str = "fsde-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSelection {
    Direct,
    Fast,
    Both,
}

impl MethodSelection {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodSelection::Direct => vec![Method::Direct],
            MethodSelection::Fast => vec![Method::Fast],
            MethodSelection::Both => vec![Method::Direct, Method::Fast],
        }
    }

    fn uses_fast(self) -> bool {
        self != MethodSelection::Direct
    }
}

impl std::str::FromStr for MethodSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" => Ok(MethodSelection::Direct),
            "fast" => Ok(MethodSelection::Fast),
            "both" => Ok(MethodSelection::Both),
            other => Err(format!("expected direct, fast or both, got {other:?}")),
        }
    }
}

impl fmt::Display for MethodSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodSelection::Direct => "direct",
            MethodSelection::Fast => "fast",
            MethodSelection::Both => "both",
        })
    }
}

/// Effective configuration of a study run. Serialises to the same flat
/// layout the config file accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfiguration {
    pub problem: String,
    pub alphas: Vec<f64>,
    pub n: Vec<usize>,
    pub paths: usize,
    pub seed: u64,
    pub method: MethodSelection,
    pub soe_eps: f64,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub repeat: usize,
    pub bench_paths: usize,
    pub horizon: f64,
}

impl RunConfiguration {
    pub fn study_config(&self) -> Result<StudyConfig, CliError> {
        let orders = validate_orders(&self.alphas).map_err(|e| CliError::MalformedValue {
            flag: "--alphas".into(),
            value: join(&self.alphas),
            reason: e.to_string(),
        })?;
        let config = StudyConfig {
            problem: self.problem.clone(),
            orders,
            resolutions: self.n.clone(),
            path_count: self.paths,
            base_seed: self.seed,
            soe_epsilon: self.soe_eps,
            methods: self.method.methods(),
            horizon: self.horizon,
            workers: self.workers,
            timing_repeats: self.repeat,
            bench_paths: self.bench_paths,
        };
        config.validate().map_err(|e| CliError::MalformedValue {
            flag: "configuration".into(),
            value: String::new(),
            reason: e.to_string(),
        })?;
        Ok(config)
    }

    pub fn banner(&self) -> String {
        let mut s = String::from("fsde study configuration:\n");
        let rows = [
            ("problem", self.problem.clone()),
            ("alphas", join(&self.alphas)),
            ("n", join(&self.n)),
            ("paths", self.paths.to_string()),
            ("seed", self.seed.to_string()),
            ("method", self.method.to_string()),
            ("soe_eps", format!("{:e}", self.soe_eps)),
            ("horizon", self.horizon.to_string()),
            ("workers", self.workers.to_string()),
            ("repeat", self.repeat.to_string()),
            ("bench_paths", self.bench_paths.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
        ];
        for (k, v) in rows {
            s.push_str(&format!("  {k:<12} {v}\n"));
        }
        s
    }
}

/// Config file contents; every key optional, unknown keys rejected.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: Option<String>,
    pub alphas: Option<Vec<f64>>,
    pub n: Option<Vec<usize>>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub method: Option<MethodSelection>,
    pub soe_eps: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub repeat: Option<usize>,
    pub bench_paths: Option<usize>,
    pub horizon: Option<f64>,
}

impl ConfigFile {
    /// Reads a flat config object, or the `"config"` member of a JSON
    /// report written by an earlier run.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text).map_err(|reason| CliError::ConfigFile {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if let Some(obj) = value.as_object_mut() {
            if obj.contains_key("report") {
                if let Some(inner) = obj.remove("config") {
                    value = inner;
                }
            }
        }
        serde_json::from_value(value).map_err(|e| e.to_string())
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(clap::Error),
    MalformedValue {
        flag: String,
        value: String,
        reason: String,
    },
    ConflictingOptions(String),
    ConfigFile {
        path: PathBuf,
        reason: String,
    },
    Run(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(_) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "{}", e.render()),
            CliError::MalformedValue { flag, value, reason } if value.is_empty() => {
                write!(f, "invalid {flag}: {reason}")
            }
            CliError::MalformedValue { flag, value, reason } => {
                write!(f, "invalid value {value:?} for {flag}: {reason}")
            }
            CliError::ConflictingOptions(msg) => write!(f, "conflicting options: {msg}"),
            CliError::ConfigFile { path, reason } => {
                write!(f, "cannot use config file {}: {reason}", path.display())
            }
            CliError::Run(e) => {
                write!(f, "{e}")?;
                let mut source = std::error::Error::source(e);
                while let Some(s) = source {
                    write!(f, "\n  caused by: {s}")?;
                    source = s.source();
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fsde",
    version,
    about = "Euler-Maruyama and fast sum-of-exponentials solvers for multi-term stochastic fractional differential equations",
    args_conflicts_with_subcommands = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub study: StudyArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure strong errors and convergence orders (the default).
    Study(StudyArgs),
    /// Check sum-of-exponentials approximations of t^-alpha.
    SoeValidate(SoeArgs),
    /// Solve one path and print the trajectory as CSV.
    Trajectory(TrajectoryArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct StudyArgs {
    /// Flat JSON config file; also accepts a JSON report from a previous run.
    #[arg(long, env = "FSDE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Catalog problem id.
    #[arg(long, env = "FSDE_PROBLEM")]
    pub problem: Option<String>,
    /// Comma-separated fractional orders, strictly increasing in (0, 1).
    #[arg(long, env = "FSDE_ALPHAS", allow_hyphen_values = true)]
    pub alphas: Option<String>,
    /// Comma-separated coarse resolutions; each must divide the next.
    #[arg(long, env = "FSDE_N")]
    pub n: Option<String>,
    #[arg(long, env = "FSDE_PATHS")]
    pub paths: Option<String>,
    #[arg(long, env = "FSDE_SEED")]
    pub seed: Option<String>,
    /// direct, fast or both.
    #[arg(long, env = "FSDE_METHOD")]
    pub method: Option<String>,
    #[arg(long, env = "FSDE_SOE_EPS", allow_hyphen_values = true)]
    pub soe_eps: Option<String>,
    #[arg(long, env = "FSDE_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, env = "FSDE_WORKERS")]
    pub workers: Option<String>,
    /// Timing repetitions per resolution (0 disables timing).
    #[arg(long, env = "FSDE_REPEAT")]
    pub repeat: Option<String>,
    /// Paths per timed batch.
    #[arg(long, env = "FSDE_BENCH_PATHS")]
    pub bench_paths: Option<String>,
    #[arg(long, env = "FSDE_HORIZON", allow_hyphen_values = true)]
    pub horizon: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SoeArgs {
    /// Comma-separated orders in (0, 1).
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub alpha: String,
    #[arg(long, default_value_t = 1e-9)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TrajectoryArgs {
    #[arg(long, default_value = DEFAULT_PROBLEM)]
    pub problem: String,
    /// Defaults to the problem's catalog orders.
    #[arg(long)]
    pub alphas: Option<String>,
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Path index; the path seed is derived from seed and index.
    #[arg(long, default_value_t = 0)]
    pub path: usize,
    #[arg(long, default_value = "fast")]
    pub method: Method,
    #[arg(long, default_value_t = DEFAULT_SOE_EPSILON)]
    pub soe_eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Also write the Brownian increments: CSV, or raw little-endian f64
    /// when the file name ends in `.bin`.
    #[arg(long)]
    pub dump_path: Option<PathBuf>,
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_scalar<T: std::str::FromStr>(flag: &str, raw: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    raw.trim().parse().map_err(|e: T::Err| CliError::MalformedValue {
        flag: flag.into(),
        value: raw.into(),
        reason: e.to_string(),
    })
}

fn parse_list<T: std::str::FromStr>(flag: &str, raw: &str) -> Result<Vec<T>, CliError>
where
    T::Err: fmt::Display,
{
    raw.split(',')
        .map(|part| parse_scalar(flag, part))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| match e {
            CliError::MalformedValue { flag, reason, .. } => CliError::MalformedValue {
                flag,
                value: raw.into(),
                reason,
            },
            other => other,
        })
}

fn opt<T>(raw: Option<&str>, parse: impl FnOnce(&str) -> Result<T, CliError>) -> Result<Option<T>, CliError> {
    raw.map(parse).transpose()
}

/// Merges flags (and their environment variables) over the config file over
/// the defaults, then checks the result.
pub fn resolve_study(args: &StudyArgs) -> Result<RunConfiguration, CliError> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };

    let problem = args
        .problem
        .clone()
        .or(file.problem)
        .unwrap_or_else(|| DEFAULT_PROBLEM.to_string());
    let entry = catalog::lookup(&problem).map_err(|e| CliError::MalformedValue {
        flag: "--problem".into(),
        value: problem.clone(),
        reason: format!("{e}; known problems: {}", catalog::ids().collect::<Vec<_>>().join(", ")),
    })?;

    let alphas = match opt(args.alphas.as_deref(), |s| parse_list("--alphas", s))? {
        Some(a) => {
            validate_orders(&a).map_err(|e| CliError::MalformedValue {
                flag: "--alphas".into(),
                value: args.alphas.clone().unwrap_or_default(),
                reason: e.to_string(),
            })?;
            a
        }
        None => file.alphas.unwrap_or_else(|| entry.default_orders.to_vec()),
    };
    let method = opt(args.method.as_deref(), |s| parse_scalar("--method", s))?
        .or(file.method)
        .unwrap_or(MethodSelection::Both);
    let soe_eps = opt(args.soe_eps.as_deref(), |s| parse_scalar("--soe-eps", s))?
        .or(file.soe_eps)
        .unwrap_or(DEFAULT_SOE_EPSILON);

    let config = RunConfiguration {
        problem,
        alphas,
        n: opt(args.n.as_deref(), |s| parse_list("--n", s))?
            .or(file.n)
            .unwrap_or_else(|| DEFAULT_RESOLUTIONS.to_vec()),
        paths: opt(args.paths.as_deref(), |s| parse_scalar("--paths", s))?
            .or(file.paths)
            .unwrap_or(DEFAULT_PATHS),
        seed: opt(args.seed.as_deref(), |s| parse_scalar("--seed", s))?
            .or(file.seed)
            .unwrap_or(DEFAULT_SEED),
        method,
        soe_eps,
        out_dir: args
            .out_dir
            .clone()
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        workers: opt(args.workers.as_deref(), |s| parse_scalar("--workers", s))?
            .or(file.workers)
            .unwrap_or(0),
        repeat: opt(args.repeat.as_deref(), |s| parse_scalar("--repeat", s))?
            .or(file.repeat)
            .unwrap_or(DEFAULT_REPEAT),
        bench_paths: opt(args.bench_paths.as_deref(), |s| parse_scalar("--bench-paths", s))?
            .or(file.bench_paths)
            .unwrap_or(DEFAULT_BENCH_PATHS),
        horizon: opt(args.horizon.as_deref(), |s| parse_scalar("--horizon", s))?
            .or(file.horizon)
            .unwrap_or(1.0),
    };

    if config.method.uses_fast() && !(config.soe_eps > 0.0 && config.soe_eps < 1.0) {
        return Err(CliError::ConflictingOptions(format!(
            "--method {} needs --soe-eps in (0, 1), got {}",
            config.method, config.soe_eps
        )));
    }
    config.study_config()?;
    Ok(config)
}

/// Parses `argv` (including the program name) into the requested command.
pub fn parse_args<I, T>(argv: I) -> Result<Command, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Usage)?;
    Ok(cli.command.unwrap_or(Command::Study(cli.study)))
}

/// Parses a study invocation into its effective configuration.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfiguration, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match parse_args(argv)? {
        Command::Study(args) => resolve_study(&args),
        _ => Err(CliError::ConflictingOptions("not a study invocation".into())),
    }
}

pub fn run_configuration(
    config: &RunConfiguration,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let study = config.study_config()?;
    let report = run_study(&study)?;
    let written = report::write_reports(&config.out_dir, config, &report)?;
    let primary = report.primary();
    let _ = writeln!(
        stdout,
        "{} ({} paths): mean order {:.3}, theory {:.3}",
        primary.method,
        study.path_count,
        primary.mean_order,
        report.metadata.theoretical_order
    );
    for path in written {
        let _ = writeln!(stdout, "wrote {}", path.display());
    }
    Ok(())
}

fn run_soe_validate(args: &SoeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let alphas: Vec<f64> = parse_list("--alpha", &args.alpha)?;
    let _ = writeln!(stdout, "alpha,epsilon,delta,n_exp,max_error");
    for alpha in alphas {
        let soe = build_soe(alpha, args.eps, args.delta, args.horizon)?;
        let err = validate_soe(&soe, args.samples);
        let _ = writeln!(
            stdout,
            "{alpha},{:e},{:e},{},{:e}",
            args.eps,
            args.delta,
            soe.n_exp(),
            err
        );
    }
    Ok(())
}

fn run_trajectory(args: &TrajectoryArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let entry = catalog::lookup(&args.problem)?;
    let orders = match &args.alphas {
        Some(raw) => {
            let a: Vec<f64> = parse_list("--alphas", raw)?;
            FractionalOrders::new(&a).map_err(|e| CliError::MalformedValue {
                flag: "--alphas".into(),
                value: raw.clone(),
                reason: e.to_string(),
            })?
        }
        None => entry.default_orders(),
    };
    let problem = entry.build(&ProblemParams {
        horizon: Some(args.horizon),
        y0: None,
    })?;
    let grid = TimeGrid::new(args.horizon, args.n)?;
    let mut config = SolverConfig::new(args.method, &orders);
    if args.method == Method::Fast {
        config = config.with_soe_epsilon(args.soe_eps)?;
    }
    let path = sample_path(path_seed(args.seed, args.path), &grid);
    let traj = config.prepare(&grid)?.solve(&problem, &path)?;

    if let Some(dump) = &args.dump_path {
        let binary = dump.extension().is_some_and(|e| e == "bin");
        let mut buf = Vec::new();
        let res = if binary {
            path.write_binary(&mut buf)
        } else {
            path.write_csv(&mut buf)
        };
        res.map_err(|e| Error::io(dump, e))?;
        let dir = dump.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let name = dump
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| CliError::MalformedValue {
                flag: "--dump-path".into(),
                value: dump.display().to_string(),
                reason: "not a file name".into(),
            })?;
        report::write_atomic_all(dir, &[(name, &buf)])?;
    }

    let header: Vec<String> = (0..traj.dim()).map(|i| format!("y{i}")).collect();
    let _ = writeln!(stdout, "n,t,{}", header.join(","));
    for (n, state) in traj.states().enumerate() {
        let values: Vec<String> = state.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(stdout, "{n},{:e},{}", grid.t(n), values.join(","));
    }
    Ok(())
}

/// Runs the program; returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let command = match parse_args(argv) {
        Ok(c) => c,
        Err(CliError::Usage(e)) if !e.use_stderr() => {
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
        Err(CliError::Usage(e)) => {
            let _ = write!(stderr, "{}", e.render());
            return 2;
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let result = match command {
        Command::Study(args) => resolve_study(&args).and_then(|config| {
            let _ = write!(stderr, "{}", config.banner());
            run_configuration(&config, stdout)
        }),
        Command::SoeValidate(args) => run_soe_validate(&args, stdout),
        Command::Trajectory(args) => run_trajectory(&args, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
