//! Command-line front end.
//!
//! Every invocation is resolved into a [`RunConfig`], validated before any
//! computation and embedded verbatim in the JSON output. Exit codes: 0 on
//! success, 1 on configuration errors, 2 on numeric failure or
//! non-convergence, 3 when a verification suite fails.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::level::{
    compare_rooted_unrooted, detect_threshold, level_sweep, radial_correspondence, LevelCurve, MuStar,
    RadialCorrespondence, RootedUnrootedComparison, SweepSetup, ThresholdSearch,
};
use crate::analysis::verify::{run_suite, Suite, VerifyConfig, VerifyReport};
use crate::error::{Error, Result};
use crate::fem::check_exponent;
use crate::io::{level_curve_csv, mesh_profile_csv, radial_profile_csv, to_json, write_text};
use crate::shooting::{shooting_verify, ShootingOptions, ShootingReport};
use crate::solver::{minimize_on, GroundStateResult, SolverOptions};
use crate::spectral::{lambda1_full, lambda1_radial, lambda1_reference, ReferenceBudget, ReferenceLambda};
use crate::tree::{build_mesh_capped, build_radial_grid_bc, LeafBc, TreeKind, TreeSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Environment variable setting the number of worker threads.
pub const THREADS_VAR: &str = "TREEGS_THREADS";

#[derive(Parser, Debug)]
#[command(name = "treegs", version, about = "NLS ground states on homogeneous metric trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bottom of the Dirichlet spectrum of a truncated tree.
    Lambda1 {
        #[command(flatten)]
        tree: TreeArgs,
        /// Eigensolver tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Use the radial reduction instead of the full tree.
        #[arg(long)]
        radial: bool,
        /// Also compute the extrapolated infinite-tree value.
        #[arg(long)]
        reference: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Ground state at fixed mass on the full truncated tree.
    Minimize {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        mu: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Radial ground state at fixed mass, checked against shooting.
    Radial {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        mu: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Level function over a mass grid.
    Sweep {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        masses: MassArgs,
        /// Restrict to radial functions.
        #[arg(long)]
        radial: bool,
        /// Locate the critical mass.
        #[arg(long)]
        threshold: bool,
        #[command(flatten)]
        detect: DetectArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Verification suite over seeded random fields.
    Verify {
        /// poincare, weighted, surgery, symmetrize, decay, gn, apriori or all.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        branching: u32,
        #[arg(long, default_value_t = 1.0)]
        edge_length: f64,
        #[arg(long, default_value_t = 5)]
        depth: u32,
        #[arg(long, default_value_t = 8)]
        nodes_per_edge: usize,
        /// Resolution the random values are drawn on.
        #[arg(long, default_value_t = 2)]
        coarse: usize,
        /// Infinite-tree λ₁ to test against; computed when absent.
        #[arg(long)]
        lambda1: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Rooted against unrooted levels, and the radial correspondence.
    Compare {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        masses: MassArgs,
        /// Also locate both critical masses on this grid.
        #[arg(long)]
        threshold: bool,
        #[command(flatten)]
        detect: DetectArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args, Debug)]
struct TreeArgs {
    /// rooted or unrooted.
    #[arg(long, default_value = "rooted")]
    kind: String,
    #[arg(long, default_value_t = 2)]
    branching: u32,
    #[arg(long, default_value_t = 1.0)]
    edge_length: f64,
    #[arg(long, default_value_t = 10)]
    depth: u32,
    #[arg(long, default_value_t = 8)]
    nodes_per_edge: usize,
    /// dirichlet or neumann, at the truncation leaves.
    #[arg(long, default_value = "dirichlet")]
    bc: String,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    grad_tol: f64,
    #[arg(long, default_value_t = 0)]
    random_starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct MassArgs {
    #[arg(long, default_value_t = 0.5)]
    mu_min: f64,
    #[arg(long, default_value_t = 8.0)]
    mu_max: f64,
    #[arg(long, default_value_t = 16)]
    points: usize,
    /// Explicit comma-separated masses, replacing the uniform grid.
    #[arg(long, value_delimiter = ',')]
    masses: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// Gap threshold; defaults to the discretization floor.
    #[arg(long)]
    eps: Option<f64>,
    /// Width of the final bracket.
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV output path (profile or level curve).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON file whose keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Fully resolved invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub kind: TreeKind,
    pub branching: u32,
    pub edge_length: f64,
    pub depth: u32,
    pub nodes_per_edge: usize,
    pub bc: LeafBc,
    pub p: f64,
    pub mu: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub points: usize,
    pub masses: Option<Vec<f64>>,
    pub radial: bool,
    pub reference: bool,
    pub threshold: bool,
    pub eps: Option<f64>,
    pub delta: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub random_starts: usize,
    pub seed: u64,
    pub suite: String,
    pub samples: usize,
    pub coarse: usize,
    pub max_dofs: usize,
    pub lambda1: Option<f64>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            kind: TreeKind::Rooted,
            branching: 2,
            edge_length: 1.0,
            depth: 10,
            nodes_per_edge: 8,
            bc: LeafBc::Dirichlet,
            p: 4.0,
            mu: 1.0,
            mu_min: 0.5,
            mu_max: 8.0,
            points: 16,
            masses: None,
            radial: false,
            reference: false,
            threshold: false,
            eps: None,
            delta: 1e-2,
            tol: 1e-10,
            max_iters: 5000,
            grad_tol: 1e-9,
            random_starts: 0,
            seed: 0,
            suite: "all".into(),
            samples: 1000,
            coarse: 2,
            max_dofs: crate::tree::DEFAULT_DOF_CAP,
            lambda1: None,
            out: None,
            csv: None,
            threads: None,
        }
    }
}

fn parse_enum<T: for<'de> Deserialize<'de>>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(Value::String(s.to_ascii_lowercase()))
        .map_err(|_| Error::Config(format!("unknown {what} {s:?}")))
}

impl RunConfig {
    fn from_command(cmd: Command) -> Result<(Self, Option<PathBuf>)> {
        let mut c = RunConfig::default();
        let tree = |c: &mut RunConfig, t: TreeArgs| -> Result<()> {
            c.kind = parse_enum("tree kind", &t.kind)?;
            c.branching = t.branching;
            c.edge_length = t.edge_length;
            c.depth = t.depth;
            c.nodes_per_edge = t.nodes_per_edge;
            c.bc = parse_enum("boundary condition", &t.bc)?;
            Ok(())
        };
        let solver = |c: &mut RunConfig, s: SolverArgs| {
            c.p = s.p;
            c.max_iters = s.max_iters;
            c.grad_tol = s.grad_tol;
            c.random_starts = s.random_starts;
            c.seed = s.seed;
        };
        let masses = |c: &mut RunConfig, m: MassArgs| {
            c.mu_min = m.mu_min;
            c.mu_max = m.mu_max;
            c.points = m.points;
            c.masses = m.masses;
        };
        let common = |c: &mut RunConfig, o: CommonArgs| {
            c.out = o.out;
            c.csv = o.csv;
            o.config
        };
        let cmd_name = match &cmd {
            Command::Radial { .. } => "radial",
            _ => "",
        };
        let config = match cmd {
            Command::Lambda1 { tree: t, tol, radial, reference, common: o } => {
                c.command = "lambda1".into();
                tree(&mut c, t)?;
                c.tol = tol;
                c.radial = radial;
                c.reference = reference;
                common(&mut c, o)
            }
            Command::Minimize { tree: t, solver: s, mu, common: o } | Command::Radial { tree: t, solver: s, mu, common: o } => {
                c.command = if matches!(cmd_name, "radial") { "radial" } else { "minimize" }.into();
                tree(&mut c, t)?;
                solver(&mut c, s);
                c.mu = mu;
                common(&mut c, o)
            }
            Command::Sweep { tree: t, solver: s, masses: m, radial, threshold, detect, common: o } => {
                c.command = "sweep".into();
                tree(&mut c, t)?;
                solver(&mut c, s);
                masses(&mut c, m);
                c.radial = radial;
                c.threshold = threshold;
                c.eps = detect.eps;
                c.delta = detect.delta;
                common(&mut c, o)
            }
            Command::Verify { suite, samples, seed, branching, edge_length, depth, nodes_per_edge, coarse, lambda1, common: o } => {
                c.command = "verify".into();
                c.suite = suite;
                c.samples = samples;
                c.seed = seed;
                c.branching = branching;
                c.edge_length = edge_length;
                c.depth = depth;
                c.nodes_per_edge = nodes_per_edge;
                c.coarse = coarse;
                c.lambda1 = lambda1;
                common(&mut c, o)
            }
            Command::Compare { tree: t, solver: s, masses: m, threshold, detect, common: o } => {
                c.command = "compare".into();
                tree(&mut c, t)?;
                solver(&mut c, s);
                masses(&mut c, m);
                c.threshold = threshold;
                c.eps = detect.eps;
                c.delta = detect.delta;
                common(&mut c, o)
            }
        };
        Ok((c, config))
    }

    /// Applies the keys of a JSON object on top of this configuration.
    pub fn overridden_by(&self, overrides: &Value) -> Result<Self> {
        let Value::Object(map) = overrides else {
            return Err(Error::Config("run configuration file must hold a JSON object".into()));
        };
        let mut base = serde_json::to_value(self).expect("RunConfig serializes");
        let obj = base.as_object_mut().expect("RunConfig is an object");
        for (k, v) in map {
            if k == "command" && v != &obj["command"] {
                return Err(Error::Config(format!("configuration is for {v}, not {}", obj["command"])));
            }
            obj.insert(k.clone(), v.clone());
        }
        serde_json::from_value(base).map_err(|e| Error::Config(format!("invalid run configuration: {e}")))
    }

    pub fn spec(&self) -> Result<TreeSpec> {
        TreeSpec::new(self.kind, self.branching, self.edge_length, self.depth)
    }

    pub fn solver(&self, mu: f64) -> SolverOptions {
        SolverOptions {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            random_starts: self.random_starts,
            seed: self.seed,
            ..SolverOptions::new(self.p, mu)
        }
    }

    /// Explicit masses, or the uniform grid `mu_min..=mu_max`.
    pub fn mass_grid(&self) -> Vec<f64> {
        match &self.masses {
            Some(m) => m.clone(),
            None if self.points == 1 => vec![self.mu_min],
            None => (0..self.points)
                .map(|k| self.mu_min + (self.mu_max - self.mu_min) * k as f64 / (self.points - 1) as f64)
                .collect(),
        }
    }

    pub fn verify_config(&self) -> VerifyConfig {
        VerifyConfig {
            samples: self.samples,
            seed: self.seed,
            branching: self.branching,
            edge_length: self.edge_length,
            depth: self.depth,
            nodes_per_edge: self.nodes_per_edge,
            coarse: self.coarse,
            lambda1: self.lambda1,
            ..VerifyConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        if self.nodes_per_edge == 0 {
            return Err(Error::Config("nodes-per-edge must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config(format!("{THREADS_VAR} must be a positive integer")));
        }
        match self.command.as_str() {
            "lambda1" => {
                if !(self.tol > 0.0) {
                    return Err(Error::Config("tol must be positive".into()));
                }
            }
            "minimize" | "radial" => {
                check_exponent(self.p).map_err(config_error)?;
                self.solver(self.mu).validate().map_err(config_error)?;
            }
            "sweep" | "compare" => {
                check_exponent(self.p).map_err(config_error)?;
                self.solver(0.0).validate().map_err(config_error)?;
                let grid = self.mass_grid();
                if grid.is_empty() || grid[0] <= 0.0 || grid.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("masses must be positive and strictly increasing".into()));
                }
                if !(self.delta > 0.0) {
                    return Err(Error::Config("delta must be positive".into()));
                }
            }
            "verify" => {
                if self.suite != "all" {
                    self.suite.parse::<Suite>()?;
                }
                if self.samples == 0 {
                    return Err(Error::Config("samples must be positive".into()));
                }
                if self.lambda1.is_some_and(|l| !(l > 0.0 && l.is_finite())) {
                    return Err(Error::Config("lambda1 must be positive".into()));
                }
            }
            other => return Err(Error::Config(format!("unknown command {other:?}"))),
        }
        Ok(())
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        e => e,
    }
}

#[derive(Serialize)]
struct Output<'a, T: Serialize> {
    config: &'a RunConfig,
    result: T,
}

#[derive(Serialize)]
struct Lambda1Output {
    lambda1: f64,
    residual: f64,
    iterations: usize,
    dofs: usize,
    reference: Option<ReferenceLambda>,
}

#[derive(Serialize)]
struct RadialOutput<'a> {
    ground_state: &'a GroundStateResult,
    shooting: Option<ShootingReport>,
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    curve: &'a LevelCurve,
    threshold: Option<MuStar>,
}

#[derive(Serialize)]
struct CompareOutput {
    rooted_unrooted: RootedUnrootedComparison,
    radial_correspondence: RadialCorrespondence,
}

/// Result of one dispatched command.
struct Outcome {
    json: String,
    csv: Option<String>,
    code: i32,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric { .. } | Error::Accuracy(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match resolve(cli).and_then(|cfg| execute(&cfg).map(|o| (cfg, o))) {
        Ok((cfg, outcome)) => match emit(&cfg, &outcome) {
            Ok(()) => outcome.code,
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve(cli: Cli) -> Result<RunConfig> {
    let (mut cfg, config_path) = RunConfig::from_command(cli.command)?;
    if let Ok(s) = std::env::var(THREADS_VAR) {
        let n = s
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_VAR} must be a positive integer, got {s:?}")))?;
        cfg.threads = Some(n);
    }
    if let Some(path) = config_path {
        let overrides: Value = crate::io::read_json(&path)?;
        cfg = cfg.overridden_by(&overrides)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    pool.install(|| dispatch(cfg))
}

fn dispatch(cfg: &RunConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    match cfg.command.as_str() {
        "lambda1" => {
            let eig = if cfg.radial {
                let grid = build_radial_grid_bc(&spec, cfg.depth, cfg.nodes_per_edge, cfg.bc)?;
                lambda1_radial(&grid, cfg.tol)?
            } else {
                let mesh = build_mesh_capped(&spec, cfg.nodes_per_edge, cfg.bc, cfg.max_dofs)?;
                lambda1_full(&mesh, cfg.tol)?
            };
            let reference = if cfg.reference {
                Some(lambda1_reference(&spec, &ReferenceBudget::default())?)
            } else {
                None
            };
            let result = Lambda1Output {
                lambda1: eig.lambda1,
                residual: eig.residual,
                iterations: eig.iterations,
                dofs: eig.eigenfield.len(),
                reference,
            };
            Ok(Outcome {
                json: render(cfg, &result)?,
                csv: None,
                code: EXIT_OK,
            })
        }
        "minimize" => {
            let mesh = build_mesh_capped(&spec, cfg.nodes_per_edge, cfg.bc, cfg.max_dofs)?;
            let r = minimize_on(&mesh, &cfg.solver(cfg.mu))?;
            Ok(Outcome {
                json: render(cfg, &r)?,
                csv: Some(mesh_profile_csv(&mesh, &r.u)?),
                code: if r.converged { EXIT_OK } else { EXIT_NUMERIC },
            })
        }
        "radial" => {
            let grid = build_radial_grid_bc(&spec, cfg.depth, cfg.nodes_per_edge, cfg.bc)?;
            let r = minimize_on(&grid, &cfg.solver(cfg.mu))?;
            let shooting = if r.converged {
                Some(shooting_verify(&r, &grid, &ShootingOptions::default())?)
            } else {
                None
            };
            let result = RadialOutput {
                ground_state: &r,
                shooting,
            };
            Ok(Outcome {
                json: render(cfg, &result)?,
                csv: Some(radial_profile_csv(&grid, &r.u)?),
                code: if r.converged { EXIT_OK } else { EXIT_NUMERIC },
            })
        }
        "sweep" => {
            let setup = sweep_setup(cfg, spec)?;
            let curve = level_sweep(&setup, &cfg.mass_grid())?;
            let threshold = if cfg.threshold {
                Some(detect_threshold(&curve, cfg.eps, cfg.delta)?)
            } else {
                None
            };
            let all_converged = curve.diagnostics.unconverged.is_empty();
            let csv = level_curve_csv(&curve);
            let result = SweepOutput {
                curve: &curve,
                threshold,
            };
            Ok(Outcome {
                json: render(cfg, &result)?,
                csv: Some(csv),
                code: if all_converged { EXIT_OK } else { EXIT_NUMERIC },
            })
        }
        "verify" => {
            let suites: Vec<Suite> = if cfg.suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![cfg.suite.parse()?]
            };
            let vc = cfg.verify_config();
            let reports = suites
                .into_iter()
                .map(|s| run_suite(s, &vc))
                .collect::<Result<Vec<VerifyReport>>>()?;
            for r in &reports {
                for c in &r.checks {
                    eprintln!(
                        "{} {}: worst {:e}, threshold {:e}",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.name,
                        c.worst_ratio,
                        c.threshold
                    );
                }
            }
            let passed = reports.iter().all(VerifyReport::passed);
            Ok(Outcome {
                json: render(cfg, &reports)?,
                csv: None,
                code: if passed { EXIT_OK } else { EXIT_VERIFY },
            })
        }
        "compare" => {
            let setup = sweep_setup(cfg, spec)?;
            let grid = cfg.mass_grid();
            let search = ThresholdSearch {
                grid: grid.clone(),
                delta: cfg.delta,
            };
            let rooted_unrooted = compare_rooted_unrooted(&setup, &grid, cfg.threshold.then_some(&search))?;
            let radial_correspondence = radial_correspondence(&setup, &grid)?;
            let converged = rooted_unrooted.all_converged && radial_correspondence.all_converged;
            let result = CompareOutput {
                rooted_unrooted,
                radial_correspondence,
            };
            Ok(Outcome {
                json: render(cfg, &result)?,
                csv: None,
                code: if converged { EXIT_OK } else { EXIT_NUMERIC },
            })
        }
        other => Err(Error::Config(format!("unknown command {other:?}"))),
    }
}

fn sweep_setup(cfg: &RunConfig, spec: TreeSpec) -> Result<SweepSetup> {
    let lambda1 = lambda1_reference(&spec, &ReferenceBudget::default())?.lambda1;
    Ok(SweepSetup {
        spec,
        nodes_per_edge: cfg.nodes_per_edge,
        leaf_bc: cfg.bc,
        radial: cfg.radial,
        solver: cfg.solver(0.0),
        lambda1,
    })
}


fn render<T: Serialize>(cfg: &RunConfig, result: &T) -> Result<String> {
    to_json(&Output { config: cfg, result })
}

fn emit(cfg: &RunConfig, outcome: &Outcome) -> Result<()> {
    match &cfg.out {
        Some(path) => write_text(path, &outcome.json)?,
        None => print!("{}", outcome.json),
    }
    if let (Some(path), Some(csv)) = (&cfg.csv, &outcome.csv) {
        write_text(Path::new(path), csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str]) -> Result<RunConfig> {
        let cli = Cli::try_parse_from(std::iter::once("treegs").chain(args.iter().copied()))
            .map_err(|e| Error::Config(e.to_string()))?;
        resolve(cli)
    }

    #[test]
    fn out_of_range_exponent_is_a_configuration_error() {
        let e = cfg(&["minimize", "--p", "7", "--mu", "1"]).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
        assert!(e.to_string().contains("p must lie in (2,6)"));
    }

    #[test]
    fn overrides_replace_flags() {
        let c = cfg(&["sweep", "--p", "3"]).unwrap();
        let o = c.overridden_by(&serde_json::json!({"p": 5.0, "masses": [1.0, 2.0]})).unwrap();
        assert_eq!(o.p, 5.0);
        assert_eq!(o.mass_grid(), vec![1.0, 2.0]);
        assert!(c.overridden_by(&serde_json::json!({"bogus": 1})).is_err());
        assert!(c.overridden_by(&serde_json::json!({"command": "verify"})).is_err());
    }

    #[test]
    fn mass_grid_is_uniform() {
        let c = cfg(&["sweep", "--mu-min", "1", "--mu-max", "2", "--points", "3"]).unwrap();
        assert_eq!(c.mass_grid(), vec![1.0, 1.5, 2.0]);
        assert!(cfg(&["sweep", "--masses", "2,1"]).is_err());
    }

    #[test]
    fn enums_parse_case_insensitively() {
        let c = cfg(&["lambda1", "--kind", "Unrooted", "--bc", "NEUMANN"]).unwrap();
        assert_eq!((c.kind, c.bc), (TreeKind::Unrooted, LeafBc::Neumann));
        assert!(cfg(&["lambda1", "--kind", "forest"]).is_err());
    }
}
