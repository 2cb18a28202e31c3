//! The level function `μ ↦ ℰ(μ)` and its critical mass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::solver::{minimize_on, GroundStateResult, SolverDomain, SolverOptions};
use crate::spectral::{smallest_eigenpair, EigenOptions};
use crate::tree::{build_mesh, build_radial_grid_bc, ElementTree, LeafBc, Mesh, RadialGrid, TreeKind, TreeSpec};

/// Discretization and solver settings shared by every point of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSetup {
    /// Tree; `depth` is the truncation depth (radial depth for radial sweeps).
    pub spec: TreeSpec,
    pub nodes_per_edge: usize,
    pub leaf_bc: LeafBc,
    /// Restrict to radial functions.
    pub radial: bool,
    /// Solver settings; `mass` is replaced at every point.
    pub solver: SolverOptions,
    /// `λ₁` of the infinite tree.
    pub lambda1: f64,
}

impl SweepSetup {
    pub fn new(spec: TreeSpec, nodes_per_edge: usize, p: f64, lambda1: f64) -> Self {
        SweepSetup {
            spec,
            nodes_per_edge,
            leaf_bc: LeafBc::Dirichlet,
            radial: false,
            solver: SolverOptions::new(p, 0.0),
            lambda1,
        }
    }

    pub fn radial(mut self) -> Self {
        self.radial = true;
        self
    }

    pub fn with_kind(&self, kind: TreeKind) -> Self {
        SweepSetup {
            spec: self.spec.with_kind(kind),
            ..self.clone()
        }
    }

    pub fn build(&self) -> Result<Domain> {
        Ok(if self.radial {
            Domain::Radial(build_radial_grid_bc(
                &self.spec,
                self.spec.depth,
                self.nodes_per_edge,
                self.leaf_bc,
            )?)
        } else {
            Domain::Full(build_mesh(&self.spec, self.nodes_per_edge, self.leaf_bc)?)
        })
    }

    fn options(&self, mu: f64) -> SolverOptions {
        SolverOptions {
            mass: mu,
            ..self.solver.clone()
        }
    }
}

/// A full mesh or a radial grid.
#[derive(Clone, Debug)]
pub enum Domain {
    Full(Mesh),
    Radial(RadialGrid),
}

impl Discretization for Domain {
    fn elements(&self) -> &ElementTree {
        match self {
            Domain::Full(m) => m.elements(),
            Domain::Radial(g) => g.elements(),
        }
    }

    fn zero_extendable(&self) -> bool {
        match self {
            Domain::Full(m) => m.zero_extendable(),
            Domain::Radial(g) => g.zero_extendable(),
        }
    }
}

impl SolverDomain for Domain {
    fn bump_centers(&self) -> Vec<usize> {
        match self {
            Domain::Full(m) => m.bump_centers(),
            Domain::Radial(g) => g.bump_centers(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelPoint {
    pub mu: f64,
    pub energy: f64,
    pub lambda: f64,
    pub sup_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub init: String,
}

impl LevelPoint {
    fn from_result(r: &GroundStateResult) -> Self {
        LevelPoint {
            mu: r.mass,
            energy: r.energy,
            lambda: r.lambda,
            sup_norm: r.report.sup_norm,
            converged: r.converged,
            iterations: r.iterations,
            grad_norm: r.projected_grad_norm,
            init: r.init.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    /// `ℰ(0)` from a zero-mass solve.
    pub energy_at_zero: f64,
    /// Interior triples with `ℰ(μ_{i+1})` below the chord by more than `2·grad_tol`.
    pub concavity_violations: usize,
    /// Largest amount by which a midpoint falls below its chord.
    pub worst_concavity: f64,
    /// `max_i ℰ(μ_i) − ½λ₁(D)μ_i`
    pub max_above_truncated_line: f64,
    /// `max_i ℰ(μ_i) − ½λ₁μ_i`
    pub max_above_line: f64,
    /// Least-squares slope through the origin on the three smallest masses.
    pub slope_at_zero: Option<f64>,
    pub unconverged: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCurve {
    pub setup: SweepSetup,
    /// Bottom of the spectrum of the truncated problem.
    pub lambda1_truncated: f64,
    pub points: Vec<LevelPoint>,
    pub diagnostics: LevelDiagnostics,
}

impl LevelCurve {
    pub fn p(&self) -> f64 {
        self.setup.solver.p
    }

    pub fn converged(&self) -> impl Iterator<Item = &LevelPoint> + '_ {
        self.points.iter().filter(|p| p.converged)
    }

    /// `½λ₁μ − ℰ(μ)` with the infinite-tree `λ₁`.
    pub fn gap(&self, mu: f64, energy: f64) -> f64 {
        0.5 * self.setup.lambda1 * mu - energy
    }

    /// Smallest `ε` allowed by [`mu_star_detect`]: twice the truncation gap
    /// at the largest mass plus the solver tolerance.
    pub fn min_threshold(&self) -> f64 {
        let mu_max = self.converged().map(|p| p.mu).fold(0.0, f64::max);
        2.0 * (0.5 * (self.lambda1_truncated - self.setup.lambda1).abs() * mu_max + self.setup.solver.grad_tol)
    }
}

/// Solves at every mass of `grid` (in parallel) and fills the diagnostics.
pub fn level_sweep(setup: &SweepSetup, grid: &[f64]) -> Result<LevelCurve> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) || !(grid[0] > 0.0) {
        return Err(Error::Config("mass grid must be positive and strictly increasing".into()));
    }
    setup.solver.validate()?;
    let domain = setup.build()?;
    let lambda1_truncated = smallest_eigenpair(&domain, EigenOptions::default())?.lambda1;
    let results: Vec<Result<LevelPoint>> = grid
        .par_iter()
        .map(|&mu| minimize_on(&domain, &setup.options(mu)).map(|r| LevelPoint::from_result(&r)))
        .collect();
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    let zero = minimize_on(&domain, &setup.options(0.0))?;
    let diagnostics = diagnose(setup, lambda1_truncated, &points, zero.energy);
    Ok(LevelCurve {
        setup: setup.clone(),
        lambda1_truncated,
        points,
        diagnostics,
    })
}

fn diagnose(setup: &SweepSetup, lambda1_truncated: f64, points: &[LevelPoint], energy_at_zero: f64) -> LevelDiagnostics {
    let tol = setup.solver.grad_tol;
    let ok: Vec<&LevelPoint> = points.iter().filter(|p| p.converged).collect();
    let mut violations = 0;
    let mut worst = 0.0f64;
    for w in ok.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        let chord = ((c.mu - b.mu) * a.energy + (b.mu - a.mu) * c.energy) / (c.mu - a.mu);
        let deficit = chord - b.energy;
        worst = worst.max(deficit);
        if deficit > 2.0 * tol {
            violations += 1;
        }
    }
    let max_over = |lambda: f64| {
        ok.iter()
            .map(|p| p.energy - 0.5 * lambda * p.mu)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let slope_at_zero = (ok.len() >= 3).then(|| {
        let (num, den) = ok[..3]
            .iter()
            .fold((0.0, 0.0), |(n, d), p| (n + p.mu * p.energy, d + p.mu * p.mu));
        num / den
    });
    LevelDiagnostics {
        energy_at_zero,
        concavity_violations: violations,
        worst_concavity: worst,
        max_above_truncated_line: max_over(lambda1_truncated),
        max_above_line: max_over(setup.lambda1),
        slope_at_zero,
        unconverged: points.iter().filter(|p| !p.converged).map(|p| p.mu).collect(),
    }
}

/// Estimated critical mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuStar {
    /// Whether `½λ₁μ − ℰ(μ)` exceeded `ε` anywhere on the range.
    pub detected: bool,
    pub eps: f64,
    /// Last mass with gap `≤ ε` and first with gap `> ε`.
    pub bracket: Option<(f64, f64)>,
    pub estimate: Option<f64>,
    /// Every `(μ, ℰ(μ))` evaluated during refinement.
    pub refinements: Vec<(f64, f64)>,
}

impl MuStar {
    pub fn lower(&self) -> Option<f64> {
        self.bracket.map(|b| b.0)
    }
}

/// Locates the smallest mass whose gap `½λ₁μ − ℰ(μ)` exceeds `eps`, then
/// bisects with `energy_at` until the bracket is at most `delta` wide.
pub fn mu_star_detect(
    curve: &LevelCurve,
    eps: f64,
    delta: f64,
    mut energy_at: impl FnMut(f64) -> Result<f64>,
) -> Result<MuStar> {
    let ok: Vec<&LevelPoint> = curve.converged().collect();
    if ok.len() < 8 {
        return Err(Error::Precondition(format!(
            "threshold detection needs at least 8 converged points, got {}",
            ok.len()
        )));
    }
    let min_eps = curve.min_threshold();
    if !(eps >= min_eps) {
        return Err(Error::Config(format!(
            "threshold {eps} is below the discretization floor {min_eps}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::Config("bracket width must be positive".into()));
    }
    let Some(k) = ok.iter().position(|p| curve.gap(p.mu, p.energy) > eps) else {
        return Ok(MuStar {
            detected: false,
            eps,
            bracket: None,
            estimate: None,
            refinements: Vec::new(),
        });
    };
    let mut lo = if k == 0 { 0.0 } else { ok[k - 1].mu };
    let mut hi = ok[k].mu;
    let mut refinements = Vec::new();
    while hi - lo > delta {
        let mid = 0.5 * (lo + hi);
        let e = energy_at(mid)?;
        refinements.push((mid, e));
        if curve.gap(mid, e) > eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(MuStar {
        detected: true,
        eps,
        bracket: Some((lo, hi)),
        estimate: Some(0.5 * (lo + hi)),
        refinements,
    })
}

/// [`mu_star_detect`] refined with the sweep's own solver. `eps` defaults to
/// the discretization floor.
pub fn detect_threshold(curve: &LevelCurve, eps: Option<f64>, delta: f64) -> Result<MuStar> {
    let domain = curve.setup.build()?;
    let eps = eps.unwrap_or_else(|| curve.min_threshold());
    mu_star_detect(curve, eps, delta, |mu| {
        let r = minimize_on(&domain, &curve.setup.options(mu))?;
        if !r.converged {
            return Err(Error::numeric(format!("solver did not converge at μ = {mu}")));
        }
        Ok(r.energy)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootedUnrootedComparison {
    pub p: f64,
    /// `(μ, ℰ_rooted, ℰ_unrooted)`
    pub levels: Vec<(f64, f64, f64)>,
    /// `max_μ ℰ_rooted − ℰ_unrooted`
    pub worst_excess: f64,
    pub all_converged: bool,
    pub rooted_threshold: Option<MuStar>,
    pub unrooted_threshold: Option<MuStar>,
}

impl RootedUnrootedComparison {
    /// Whether both thresholds were found with the rooted bracket strictly
    /// below the unrooted one.
    pub fn thresholds_ordered(&self) -> Option<bool> {
        let a = self.rooted_threshold.as_ref()?.bracket?;
        let b = self.unrooted_threshold.as_ref()?.bracket?;
        Some(a.1 < b.0)
    }
}

/// Thresholds to locate in [`compare_rooted_unrooted`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub grid: Vec<f64>,
    pub delta: f64,
}

/// Levels of the rooted and unrooted trees at equal truncation.
pub fn compare_rooted_unrooted(
    setup: &SweepSetup,
    masses: &[f64],
    thresholds: Option<&ThresholdSearch>,
) -> Result<RootedUnrootedComparison> {
    let rooted = setup.with_kind(TreeKind::Rooted);
    let unrooted = setup.with_kind(TreeKind::Unrooted);
    let (dr, du) = (rooted.build()?, unrooted.build()?);
    let results: Vec<Result<(f64, GroundStateResult, GroundStateResult)>> = masses
        .par_iter()
        .map(|&mu| {
            let a = minimize_on(&dr, &rooted.options(mu))?;
            let b = minimize_on(&du, &unrooted.options(mu))?;
            Ok((mu, a, b))
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let all_converged = results.iter().all(|(_, a, b)| a.converged && b.converged);
    let levels: Vec<(f64, f64, f64)> = results.iter().map(|(mu, a, b)| (*mu, a.energy, b.energy)).collect();
    let worst_excess = levels.iter().map(|(_, a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    let (mut rooted_threshold, mut unrooted_threshold) = (None, None);
    if let Some(search) = thresholds {
        let cr = level_sweep(&rooted, &search.grid)?;
        let cu = level_sweep(&unrooted, &search.grid)?;
        // One ε for both trees so the brackets are comparable.
        let eps = cr.min_threshold().max(cu.min_threshold());
        rooted_threshold = Some(detect_threshold(&cr, Some(eps), search.delta)?);
        unrooted_threshold = Some(detect_threshold(&cu, Some(eps), search.delta)?);
    }
    Ok(RootedUnrootedComparison {
        p: setup.solver.p,
        levels,
        worst_excess,
        all_converged,
        rooted_threshold,
        unrooted_threshold,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialCorrespondence {
    /// `(μ, ℰ_rooted,r(μ), ℰ_unrooted,r((b+1)μ) / (b+1))`
    pub levels: Vec<(f64, f64, f64)>,
    pub worst_difference: f64,
    pub all_converged: bool,
}

/// Checks `ℰ_{rooted,r}(μ) = ℰ_{unrooted,r}((b+1)μ) / (b+1)` on matched radial grids.
pub fn radial_correspondence(setup: &SweepSetup, masses: &[f64]) -> Result<RadialCorrespondence> {
    let rooted = setup.with_kind(TreeKind::Rooted).radial();
    let unrooted = setup.with_kind(TreeKind::Unrooted).radial();
    let c = setup.spec.branching as f64 + 1.0;
    let (dr, du) = (rooted.build()?, unrooted.build()?);
    let results: Vec<Result<(f64, GroundStateResult, GroundStateResult)>> = masses
        .par_iter()
        .map(|&mu| {
            let a = minimize_on(&dr, &rooted.options(mu))?;
            let b = minimize_on(&du, &unrooted.options(c * mu))?;
            Ok((mu, a, b))
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let levels: Vec<(f64, f64, f64)> = results.iter().map(|(mu, a, b)| (*mu, a.energy, b.energy / c)).collect();
    Ok(RadialCorrespondence {
        worst_difference: levels.iter().map(|(_, a, b)| (a - b).abs()).fold(0.0, f64::max),
        all_converged: results.iter().all(|(_, a, b)| a.converged && b.converged),
        levels,
    })
}

/// `max_μ ℰ_{D+2}(μ) − ℰ_D(μ)` over `masses`; nonpositive up to solver
/// tolerance because zero extension embeds the shallower problem.
pub fn truncation_monotonicity(setup: &SweepSetup, masses: &[f64]) -> Result<f64> {
    let deeper = SweepSetup {
        spec: setup.spec.with_depth(setup.spec.depth + 2),
        ..setup.clone()
    };
    let (a, b) = (setup.build()?, deeper.build()?);
    let diffs: Vec<Result<f64>> = masses
        .par_iter()
        .map(|&mu| {
            let ea = minimize_on(&a, &setup.options(mu))?.energy;
            let eb = minimize_on(&b, &deeper.options(mu))?.energy;
            Ok(eb - ea)
        })
        .collect();
    Ok(diffs
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> SweepSetup {
        SweepSetup::new(TreeSpec::binary(TreeKind::Rooted, 6), 4, 4.0, 0.115_489_125)
    }

    #[test]
    fn rejects_bad_grids() {
        let s = setup();
        assert!(level_sweep(&s, &[]).is_err());
        assert!(level_sweep(&s, &[1.0, 1.0]).is_err());
        assert!(level_sweep(&s, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn small_sweep_diagnostics() {
        let s = setup();
        let grid: Vec<f64> = (1..=8).map(|k| k as f64).collect();
        let c = level_sweep(&s, &grid).unwrap();
        assert_eq!(c.diagnostics.energy_at_zero, 0.0);
        assert!(c.diagnostics.unconverged.is_empty());
        assert!(c.diagnostics.max_above_truncated_line <= s.solver.grad_tol);
        assert_eq!(c.diagnostics.concavity_violations, 0, "{}", c.diagnostics.worst_concavity);
        let slope = c.diagnostics.slope_at_zero.unwrap();
        assert!(slope <= 0.5 * c.lambda1_truncated);
    }

    #[test]
    fn detection_on_a_synthetic_curve() {
        // ℰ(μ) = ½λ₁μ up to μ = 2.5, then falls off; exact gap available.
        let s = setup();
        let l = s.lambda1;
        let energy = move |mu: f64| 0.5 * l * mu - (mu - 2.5).max(0.0).powi(2);
        let points = (1..=10)
            .map(|k| {
                let mu = k as f64;
                LevelPoint {
                    mu,
                    energy: energy(mu),
                    lambda: 0.0,
                    sup_norm: 0.0,
                    converged: true,
                    iterations: 0,
                    grad_norm: 0.0,
                    init: String::new(),
                }
            })
            .collect();
        let curve = LevelCurve {
            setup: s,
            lambda1_truncated: l,
            points,
            diagnostics: LevelDiagnostics {
                energy_at_zero: 0.0,
                concavity_violations: 0,
                worst_concavity: 0.0,
                max_above_truncated_line: 0.0,
                max_above_line: 0.0,
                slope_at_zero: None,
                unconverged: Vec::new(),
            },
        };
        let eps = 0.01;
        let m = mu_star_detect(&curve, eps, 1e-6, |mu| Ok(energy(mu))).unwrap();
        let (lo, hi) = m.bracket.unwrap();
        let exact = 2.5 + eps.sqrt();
        assert!(lo <= exact && exact <= hi && hi - lo <= 1e-6);
        let none = mu_star_detect(&curve, 1e3, 1e-6, |mu| Ok(energy(mu))).unwrap();
        assert!(!none.detected);
        assert!(mu_star_detect(&curve, 0.0, 1e-6, |mu| Ok(energy(mu))).is_err());
    }

    #[test]
    fn radial_correspondence_is_exact() {
        let s = SweepSetup::new(TreeSpec::binary(TreeKind::Rooted, 8), 8, 4.0, 0.115_489_125);
        let c = radial_correspondence(&s, &[0.5, 1.7, 3.0]).unwrap();
        assert!(c.all_converged);
        assert!(c.worst_difference <= 3.0 * s.solver.grad_tol, "{}", c.worst_difference);
    }

    #[test]
    fn deeper_truncation_lowers_the_level() {
        let s = setup();
        let d = truncation_monotonicity(&s, &[1.0, 4.0, 8.0]).unwrap();
        assert!(d <= s.solver.grad_tol, "{d}");
    }
}
