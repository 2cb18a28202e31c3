//! Verification suites: empirical constants of the functional inequalities
//! over seeded corpora.
//!
//! Samples are evaluated in parallel and reduced in sample order, so a
//! report depends only on its configuration.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Field;
use crate::solver::{minimize_on, SolverOptions};
use crate::spectral::{lambda1_radial, lambda1_reference, ReferenceBudget};
use crate::tree::{build_mesh, build_radial_grid, LeafBc, Mesh, TreeKind, TreeSpec};

use super::fields::{random_mesh_field, random_radial_field, SMOOTHING_PASSES};
use super::inequalities::{
    apriori_sample, decay_check, gagliardo_nirenberg_ratio, poincare_remainder, sup_gradient_ratio,
    weighted_remainder,
};
use super::surgery::{surgery_duplicate, surgery_identities};
use super::symmetry::{matching_grid, symmetrize_check};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Poincare,
    Weighted,
    Surgery,
    Symmetrize,
    Decay,
    Gn,
    Apriori,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Poincare,
        Suite::Weighted,
        Suite::Surgery,
        Suite::Symmetrize,
        Suite::Decay,
        Suite::Gn,
        Suite::Apriori,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Poincare => "poincare",
            Suite::Weighted => "weighted",
            Suite::Surgery => "surgery",
            Suite::Symmetrize => "symmetrize",
            Suite::Decay => "decay",
            Suite::Gn => "gn",
            Suite::Apriori => "apriori",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
    pub branching: u32,
    pub edge_length: f64,
    /// Truncation depth of the full trees.
    pub depth: u32,
    pub nodes_per_edge: usize,
    /// Resolution the random values are drawn on before interpolation.
    pub coarse: usize,
    pub exponents: Vec<f64>,
    /// Depths compared by the decay stability check.
    pub decay_depths: (u32, u32),
    /// Masses of the ground-state corpus, per exponent.
    pub apriori_masses: Vec<(f64, Vec<f64>)>,
    /// Radial depth of the ground-state corpus.
    pub apriori_depth: u32,
    /// Infinite-tree `λ₁`; computed from the deep radial reference when absent.
    pub lambda1: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: 1000,
            seed: 1,
            branching: 2,
            edge_length: 1.0,
            depth: 5,
            nodes_per_edge: 8,
            coarse: 2,
            exponents: vec![3.0, 4.0, 5.0],
            decay_depths: (100, 200),
            apriori_masses: vec![
                (3.0, vec![1.5, 2.0, 3.0]),
                (4.0, vec![2.0, 2.5, 3.0]),
                (5.0, vec![2.0, 2.5, 3.0]),
            ],
            apriori_depth: 20,
            lambda1: None,
        }
    }
}

impl VerifyConfig {
    fn spec(&self, kind: TreeKind) -> Result<TreeSpec> {
        TreeSpec::new(kind, self.branching, self.edge_length, self.depth)
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("a verification corpus needs at least one sample".into()));
        }
        for &p in &self.exponents {
            crate::fem::check_exponent(p)?;
        }
        Ok(())
    }

    fn sample_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(i as u64)
    }
}

/// One inequality checked over a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyCheck {
    pub name: String,
    /// The extreme sample value of the checked quantity.
    pub worst_ratio: f64,
    /// The constant for which every sample satisfies the inequality.
    pub empirical_constant: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyEnvironment {
    pub branching: u32,
    pub edge_length: f64,
    pub depth: u32,
    pub nodes_per_edge: usize,
    pub lambda1: f64,
    /// Relative accuracy of `lambda1`, used as slack in the thresholds.
    pub tol_lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub samples: usize,
    pub seed: u64,
    pub environment: VerifyEnvironment,
    pub checks: Vec<VerifyCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// `λ₁` and its relative accuracy for the configured tree.
pub fn reference_lambda(config: &VerifyConfig) -> Result<(f64, f64)> {
    match config.lambda1 {
        Some(l) => Ok((l, 0.0)),
        None => {
            let r = lambda1_reference(&config.spec(TreeKind::Rooted)?, &ReferenceBudget::default())?;
            Ok((r.lambda1, r.relative_error()))
        }
    }
}

pub fn run_suite(suite: Suite, config: &VerifyConfig) -> Result<VerifyReport> {
    config.validate()?;
    let (lambda1, tol_lambda) = reference_lambda(config)?;
    let env = VerifyEnvironment {
        branching: config.branching,
        edge_length: config.edge_length,
        depth: config.depth,
        nodes_per_edge: config.nodes_per_edge,
        lambda1,
        tol_lambda,
    };
    let checks = match suite {
        Suite::Poincare => poincare_suite(config, &env)?,
        Suite::Weighted => weighted_suite(config, &env)?,
        Suite::Surgery => surgery_suite(config, &env)?,
        Suite::Symmetrize => symmetrize_suite(config)?,
        Suite::Decay => decay_suite(config)?,
        Suite::Gn => gn_suite(config)?,
        Suite::Apriori => apriori_suite(config, &env)?,
    };
    Ok(VerifyReport {
        suite,
        samples: config.samples,
        seed: config.seed,
        environment: env,
        checks,
    })
}

fn mesh(config: &VerifyConfig, kind: TreeKind, n: usize) -> Result<Mesh> {
    build_mesh(&config.spec(kind)?, n, LeafBc::Dirichlet)
}

/// Evaluates `f` on every sample of the corpus, in sample order.
fn over_samples<T: Send>(config: &VerifyConfig, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    let out: Vec<Result<T>> = (0..config.samples)
        .into_par_iter()
        .map(|i| f(config.sample_seed(i)))
        .collect();
    out.into_iter().collect()
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn lower_bound_check(name: &str, ratios: &[f64], threshold: f64) -> VerifyCheck {
    let worst = min(ratios);
    VerifyCheck {
        name: name.into(),
        worst_ratio: worst,
        empirical_constant: worst,
        threshold,
        passed: worst >= threshold,
    }
}

/// `R / ‖u‖∞² ≥ 3λ₁/2` on the unrooted tree and `λ₁/2` on the rooted one.
fn poincare_suite(config: &VerifyConfig, env: &VerifyEnvironment) -> Result<Vec<VerifyCheck>> {
    let mut checks = Vec::new();
    for (kind, constant) in [(TreeKind::Unrooted, 1.5), (TreeKind::Rooted, 0.5)] {
        let m = mesh(config, kind, config.nodes_per_edge)?;
        let ratios = over_samples(config, |seed| {
            let u = random_mesh_field(&m, seed, config.coarse, SMOOTHING_PASSES)?;
            Ok(poincare_remainder(&m, &u, env.lambda1)?.ratio)
        })?;
        let threshold = constant * env.lambda1 * (1.0 - env.tol_lambda);
        checks.push(lower_bound_check(&format!("poincare_{}", kind_name(kind)), &ratios, threshold));
    }
    Ok(checks)
}

fn kind_name(kind: TreeKind) -> &'static str {
    match kind {
        TreeKind::Rooted => "rooted",
        TreeKind::Unrooted => "unrooted",
    }
}

/// Relative change of the extreme value between successive resolutions.
fn refinement_growth(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] / w[0] - 1.0).fold(f64::NEG_INFINITY, f64::max)
}

/// `R ≥ C ∫|u|²/(1+|x|)²` with `C > 0`, stable within 10% from `n` to `2n`.
fn weighted_suite(config: &VerifyConfig, env: &VerifyEnvironment) -> Result<Vec<VerifyCheck>> {
    let mut checks = Vec::new();
    for kind in [TreeKind::Unrooted, TreeKind::Rooted] {
        let mut per_level = Vec::new();
        for n in [config.nodes_per_edge, 2 * config.nodes_per_edge] {
            let m = mesh(config, kind, n)?;
            let ratios = over_samples(config, |seed| {
                let u = random_mesh_field(&m, seed, config.coarse, SMOOTHING_PASSES)?;
                Ok(weighted_remainder(&m, &u, env.lambda1)?.ratio)
            })?;
            per_level.push(min(&ratios));
        }
        let name = kind_name(kind);
        checks.push(VerifyCheck {
            name: format!("weighted_{name}"),
            worst_ratio: per_level[0],
            empirical_constant: per_level[0],
            threshold: 0.0,
            passed: per_level[0] > 0.0,
        });
        let change = (per_level[1] / per_level[0] - 1.0).abs();
        checks.push(VerifyCheck {
            name: format!("weighted_{name}_refinement"),
            worst_ratio: change,
            empirical_constant: per_level[1],
            threshold: 0.1,
            passed: change <= 0.1,
        });
    }
    Ok(checks)
}

/// Both surgery identities to `1e−12`, and the Poincaré inequality for the
/// duplicated field, which is what yields the constant `3λ₁/2`.
fn surgery_suite(config: &VerifyConfig, env: &VerifyEnvironment) -> Result<Vec<VerifyCheck>> {
    let m = mesh(config, TreeKind::Unrooted, config.nodes_per_edge)?;
    let rows = over_samples(config, |seed| {
        let u = random_mesh_field(&m, seed, config.coarse, SMOOTHING_PASSES)?;
        let s = surgery_duplicate(&m, &u)?;
        let id = surgery_identities(&m, &u, &s);
        let rayleigh = id.kinetic_v / (env.lambda1 * id.mass_v);
        Ok((id.kinetic_error(), id.mass_error(), rayleigh))
    })?;
    let kinetic: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mass: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let rayleigh: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let upper = |name: &str, v: &[f64]| {
        let worst = max(v);
        VerifyCheck {
            name: name.into(),
            worst_ratio: worst,
            empirical_constant: worst,
            threshold: 1e-12,
            passed: worst <= 1e-12,
        }
    };
    Ok(vec![
        upper("surgery_kinetic_identity", &kinetic),
        upper("surgery_mass_identity", &mass),
        lower_bound_check("surgery_poincare", &rayleigh, 1.0 - env.tol_lambda),
    ])
}

/// Mass equality and kinetic and `L^p` non-increase, to `1e−10`.
fn symmetrize_suite(config: &VerifyConfig) -> Result<Vec<VerifyCheck>> {
    let mut checks = Vec::new();
    for kind in [TreeKind::Unrooted, TreeKind::Rooted] {
        let m = mesh(config, kind, config.nodes_per_edge)?;
        let grid = matching_grid(&m)?;
        let worst = over_samples(config, |seed| {
            let u = random_mesh_field(&m, seed, config.coarse, SMOOTHING_PASSES)?;
            Ok(symmetrize_check(&m, &grid, &u, &config.exponents)?.worst_violation())
        })?;
        let w = max(&worst);
        checks.push(VerifyCheck {
            name: format!("symmetrize_{}", kind_name(kind)),
            worst_ratio: w,
            empirical_constant: w,
            threshold: 1e-10,
            passed: w <= 1e-10,
        });
    }
    Ok(checks)
}

/// Decay constant over radial eigenfields and random radial fields, and
/// its stability between two depths.
fn decay_suite(config: &VerifyConfig) -> Result<Vec<VerifyCheck>> {
    let (d0, d1) = config.decay_depths;
    let mut checks = Vec::new();
    let mut corpus = Vec::new();
    let mut eigen = Vec::new();
    for kind in [TreeKind::Rooted, TreeKind::Unrooted] {
        let spec = config.spec(kind)?;
        for depth in [d0, d1] {
            let grid = build_radial_grid(&spec, depth, config.nodes_per_edge)?;
            let e = lambda1_radial(&grid, 1e-11)?;
            let c = decay_check(&grid, &e.eigenfield)?.constant;
            eigen.push(c);
            corpus.push(c);
        }
        let grid = build_radial_grid(&spec, d0, config.nodes_per_edge)?;
        corpus.extend(over_samples(config, |seed| {
            let u = random_radial_field(&grid, seed, config.coarse, SMOOTHING_PASSES)?;
            Ok(decay_check(&grid, &u)?.constant)
        })?);
    }
    let c = max(&corpus);
    checks.push(VerifyCheck {
        name: "decay_corpus".into(),
        worst_ratio: c,
        empirical_constant: c,
        threshold: f64::INFINITY,
        passed: c.is_finite(),
    });
    // Ratio C(d0)/C(d1) for each kind; must stay within a factor 2.
    let ratios = [eigen[0] / eigen[1], eigen[2] / eigen[3]];
    let worst = ratios.iter().map(|r| r.max(1.0 / r)).fold(1.0, f64::max);
    checks.push(VerifyCheck {
        name: "decay_depth_stability".into(),
        worst_ratio: worst,
        empirical_constant: max(&eigen),
        threshold: 2.0,
        passed: worst <= 2.0,
    });
    Ok(checks)
}

/// Gagliardo–Nirenberg and `L∞` ratios, whose corpus supremum may grow by
/// less than 5% per refinement level.
fn gn_suite(config: &VerifyConfig) -> Result<Vec<VerifyCheck>> {
    let levels = [config.nodes_per_edge, 2 * config.nodes_per_edge, 4 * config.nodes_per_edge];
    let mut checks = Vec::new();
    for kind in [TreeKind::Unrooted, TreeKind::Rooted] {
        let mut sups: Vec<Vec<f64>> = vec![Vec::new(); config.exponents.len() + 1];
        for &n in &levels {
            let m = mesh(config, kind, n)?;
            let rows = over_samples(config, |seed| {
                let u = random_mesh_field(&m, seed, config.coarse, SMOOTHING_PASSES)?;
                let mut row = config
                    .exponents
                    .iter()
                    .map(|&p| gagliardo_nirenberg_ratio(&m, &u, p))
                    .collect::<Result<Vec<_>>>()?;
                row.push(sup_gradient_ratio(&m, &u)?);
                Ok(row)
            })?;
            for (k, s) in sups.iter_mut().enumerate() {
                s.push(rows.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max));
            }
        }
        for (k, s) in sups.iter().enumerate() {
            let label = match config.exponents.get(k) {
                Some(p) => format!("gn_p{p}"),
                None => "linf".into(),
            };
            let growth = refinement_growth(s);
            checks.push(VerifyCheck {
                name: format!("{label}_{}", kind_name(kind)),
                worst_ratio: growth,
                empirical_constant: *s.last().unwrap(),
                threshold: 0.05,
                passed: s.iter().all(|v| v.is_finite()) && growth < 0.05,
            });
        }
    }
    Ok(checks)
}

/// A priori estimates over radial ground states below the line `½λ₁μ`,
/// at two resolutions.
fn apriori_suite(config: &VerifyConfig, env: &VerifyEnvironment) -> Result<Vec<VerifyCheck>> {
    if config.apriori_masses.iter().all(|(_, m)| m.is_empty()) {
        return Err(Error::Precondition("a priori corpus is empty".into()));
    }
    let spec = config.spec(TreeKind::Rooted)?;
    let mut per_level = Vec::new();
    let mut counts = Vec::new();
    for n in [config.nodes_per_edge, 2 * config.nodes_per_edge] {
        let grid = build_radial_grid(&spec, config.apriori_depth, n)?;
        let jobs: Vec<(f64, f64)> = config
            .apriori_masses
            .iter()
            .flat_map(|(p, ms)| ms.iter().map(move |&mu| (*p, mu)))
            .collect();
        let samples: Vec<Result<Option<[f64; 3]>>> = jobs
            .par_iter()
            .map(|&(p, mu)| {
                let r = minimize_on(&grid, &SolverOptions::new(p, mu))?;
                if !r.converged {
                    return Ok(None);
                }
                let s = apriori_sample(&grid, &r.u, p, env.lambda1)?;
                Ok(s.below_line.then_some([s.coercivity, s.sup_lower, s.weighted_over_lp]))
            })
            .collect();
        let samples: Vec<[f64; 3]> = samples.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
        counts.push(samples.len());
        per_level.push([0, 1, 2].map(|k| samples.iter().map(|s| s[k]).fold(0.0, f64::max)));
    }
    if counts.contains(&0) {
        return Err(Error::Precondition("no converged ground state lies below the line".into()));
    }
    let names = ["apriori_coercivity", "apriori_sup_lower", "apriori_weighted"];
    Ok(names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let (a, b) = (per_level[0][k], per_level[1][k]);
            // Constants are clamped at 0; compare with an absolute floor.
            let change = (b - a).abs() / a.max(b).max(1e-3);
            VerifyCheck {
                name: (*name).into(),
                worst_ratio: change,
                empirical_constant: a.max(b),
                threshold: 0.1,
                passed: a.is_finite() && b.is_finite() && change <= 0.1,
            }
        })
        .collect())
}

/// Ratio `R/‖u‖∞²` for the Dirichlet eigenfield of each truncation depth.
pub fn eigenfield_remainders(spec: &TreeSpec, depths: &[u32], nodes_per_edge: usize, lambda1: f64) -> Result<Vec<(u32, f64, f64)>> {
    depths
        .iter()
        .map(|&d| {
            let m = build_mesh(&spec.with_depth(d), nodes_per_edge, LeafBc::Dirichlet)?;
            let e = crate::spectral::lambda1_full(&m, 1e-11)?;
            let u: &Field = &e.eigenfield;
            let r = poincare_remainder(&m, u, lambda1)?;
            let mass = crate::fem::FemModel::new(&m).mass_of(u);
            Ok((d, r.ratio, r.remainder / mass))
        })
        .collect()
}
