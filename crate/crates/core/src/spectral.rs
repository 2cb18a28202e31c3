//! Bottom of the spectrum of the Laplacian on truncated trees.
//!
//! The smallest generalized eigenvalue of `K x = λ M x` is bracketed by
//! bisection on Sylvester inertia counts of `K - σ M` (exact for tree
//! patterns, see [`crate::operator`]), then polished by shifted inverse
//! iteration from just below the bracket.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, Discretization, Field};
use crate::operator::SparseSymOperator;
use crate::tree::{build_mesh, build_radial_grid, LeafBc, Mesh, RadialGrid, TreeSpec};

/// One solve in an extrapolation study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSample {
    pub depth: u32,
    pub nodes_per_edge: usize,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda1: f64,
    /// Unit mass, sign normalized to be nonnegative.
    pub eigenfield: Field,
    /// `‖K x - λ M x‖ / ‖x‖` in the lumped-mass dual/primal norms.
    pub residual: f64,
    pub iterations: usize,
    pub record: Vec<EigenSample>,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            max_iters: 200,
            seed: 0,
        }
    }
}

/// Smallest eigenpair of the stiffness/mass pencil of `domain`.
pub fn smallest_eigenpair(domain: &impl Discretization, opts: EigenOptions) -> Result<EigenResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::Config(format!("eigen tolerance must be positive, got {}", opts.tol)));
    }
    let el = domain.elements();
    let n = el.dof_count();
    if n == 0 {
        return Err(Error::Domain("discretization has no free DOFs".into()));
    }
    let k = assemble_stiffness(domain);
    let m = assemble_mass(domain, false);
    let lumped = assemble_mass(domain, true);
    let m_lumped = lumped.diag();

    // K is positive semidefinite and M positive definite, so every eigenvalue
    // exceeds any negative shift. The Rayleigh quotient of a positive vector
    // bounds the smallest one from above.
    let ones = vec![1.0; n];
    let mut hi = k.quadratic_form(&ones) / m.quadratic_form(&ones);
    hi = hi * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    let mut lo = -(1.0 + hi.abs());
    while count_below(&k, &m, hi) == 0 {
        hi = 2.0 * hi + 1.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-10 * hi.abs().max(1e-300) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if count_below(&k, &m, mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Shift strictly below the eigenvalue so the factor stays definite.
    let mut width = (hi - lo).max(1e-14 * hi.abs());
    let mut shift = lo - width;
    let mut factor = k.factor_shifted(&m, shift);
    let mut attempts = 0;
    while !factor.is_positive_definite() {
        attempts += 1;
        if attempts > 60 || !shift.is_finite() {
            return Err(Error::numeric(format!("no definite shift found below λ ≈ {hi}")));
        }
        width *= 4.0;
        shift -= width;
        factor = k.factor_shifted(&m, shift);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            1.0 + 0.1 * z
        })
        .collect();
    normalize(&m, &mut x);
    let mut trace = Vec::new();
    let mut lambda = k.quadratic_form(&x);
    for it in 1..=opts.max_iters {
        let rhs = m.apply(&x);
        x = factor.try_solve(&rhs)?;
        normalize(&m, &mut x);
        lambda = k.quadratic_form(&x);
        let res = residual_norm(&k, &m, m_lumped, &x, lambda);
        trace.push(res);
        if res <= opts.tol {
            let (lambda, x) = finish(lambda, x);
            return Ok(EigenResult {
                lambda1: lambda,
                eigenfield: Field::from_vec_unchecked(x),
                residual: res,
                iterations: it,
                record: Vec::new(),
            });
        }
    }
    Err(Error::Numeric {
        message: format!(
            "inverse iteration did not reach residual {} in {} iterations (λ ≈ {lambda})",
            opts.tol, opts.max_iters
        ),
        trace,
    })
}

fn finish(lambda: f64, mut x: Vec<f64>) -> (f64, Vec<f64>) {
    let total: f64 = x.iter().sum();
    if total < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    (lambda, x)
}

fn count_below(k: &SparseSymOperator, m: &SparseSymOperator, sigma: f64) -> usize {
    k.factor_shifted(m, sigma).negative_count()
}

fn normalize(m: &SparseSymOperator, x: &mut [f64]) {
    let s = m.quadratic_form(x).sqrt();
    x.iter_mut().for_each(|v| *v /= s);
}

pub(crate) fn residual_norm(
    k: &SparseSymOperator,
    m: &SparseSymOperator,
    m_lumped: &[f64],
    x: &[f64],
    lambda: f64,
) -> f64 {
    let kx = k.apply(x);
    let mx = m.apply(x);
    let mut r2 = 0.0;
    let mut x2 = 0.0;
    for i in 0..x.len() {
        let r = kx[i] - lambda * mx[i];
        r2 += r * r / m_lumped[i];
        x2 += x[i] * x[i] * m_lumped[i];
    }
    (r2 / x2).sqrt()
}

/// `λ₁` of a full-tree mesh.
pub fn lambda1_full(mesh: &Mesh, tol: f64) -> Result<EigenResult> {
    let mut r = smallest_eigenpair(mesh, EigenOptions { tol, ..Default::default() })?;
    r.record.push(EigenSample {
        depth: mesh.spec.depth,
        nodes_per_edge: mesh.nodes_per_edge,
        lambda: r.lambda1,
    });
    Ok(r)
}

/// `λ₁` of the weighted half-line problem for radial functions.
pub fn lambda1_radial(grid: &RadialGrid, tol: f64) -> Result<EigenResult> {
    let mut r = smallest_eigenpair(grid, EigenOptions { tol, ..Default::default() })?;
    r.record.push(EigenSample {
        depth: grid.depth_r,
        nodes_per_edge: grid.nodes_per_edge,
        lambda: r.lambda1,
    });
    Ok(r)
}

/// Bottom of the spectrum of the infinite homogeneous tree with branching
/// `b` and edge length `ℓ`: `arccos(2√b / (b+1))² / ℓ²`. Used only as an
/// independent sanity check of the finite-element values.
pub fn band_edge(branching: u32, edge_length: f64) -> f64 {
    let b = branching as f64;
    let theta = (2.0 * b.sqrt() / (b + 1.0)).acos();
    theta * theta / (edge_length * edge_length)
}

/// Model used to extrapolate `λ₁(D)` to infinite depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthModel {
    /// `λ + a / D²`
    InverseSquare,
    /// `λ + a / (D + δ)²`
    ShiftedInverseSquare,
    /// `λ + a ρ^D` (equally spaced depths only)
    Geometric,
    /// Chain of identical generation cells: `cos(ℓ√λ_D) = cos(k_D) / c` with
    /// `tan(D k_D) = -γ tan(k_D)`, so that `λ = arccos(1/c)² / ℓ²`.
    Bloch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub lambda1: f64,
    pub error_estimate: f64,
    pub model: DepthModel,
    /// `h → 0` extrapolated value at each depth.
    pub per_depth: Vec<(u32, f64)>,
    pub record: Vec<EigenSample>,
}

/// Richardson extrapolation in `h` (assuming `O(h²)`) followed by a depth fit.
///
/// The depth model is chosen by how well each candidate, fitted on the
/// deepest samples, predicts the shallowest one. The error estimate combines
/// the spread of the `h` extrapolation with the change of the chosen model
/// when the depth window is shifted one sample shallower.
pub fn extrapolate(record: &[EigenSample], edge_length: f64) -> Result<Extrapolation> {
    let mut depths: Vec<u32> = record.iter().map(|s| s.depth).collect();
    depths.sort_unstable();
    depths.dedup();
    if depths.len() < 3 {
        return Err(Error::Config("extrapolation needs at least three depths".into()));
    }
    let mut per_depth = Vec::with_capacity(depths.len());
    let mut h_error = 0.0f64;
    for &d in &depths {
        let mut at: Vec<&EigenSample> = record.iter().filter(|s| s.depth == d).collect();
        at.sort_by_key(|s| s.nodes_per_edge);
        let value = match at.len() {
            0 => unreachable!(),
            1 => at[0].lambda,
            len => {
                let r = richardson(at[len - 2], at[len - 1]);
                if len >= 3 {
                    let coarse = richardson(at[len - 3], at[len - 2]);
                    h_error = h_error.max((r - coarse).abs());
                }
                r
            }
        };
        per_depth.push((d, value));
    }

    let candidates = [
        DepthModel::InverseSquare,
        DepthModel::ShiftedInverseSquare,
        DepthModel::Geometric,
        DepthModel::Bloch,
    ];
    let mut best: Option<(f64, DepthModel, f64)> = None;
    for model in candidates {
        let needed = model_points(model);
        if per_depth.len() < needed + 1 {
            continue;
        }
        let window = &per_depth[per_depth.len() - needed..];
        let Some(fit) = fit_model(model, window, edge_length) else { continue };
        let (d0, v0) = per_depth[per_depth.len() - needed - 1];
        let score = (fit.predict(d0 as f64) - v0).abs();
        if best.is_none_or(|(s, _, _)| score < s) {
            best = Some((score, model, fit.lambda));
        }
    }
    let (_, model, lambda1) = best.ok_or_else(|| Error::Accuracy("no depth model could be fitted".into()))?;
    let needed = model_points(model);
    let shifted = &per_depth[per_depth.len() - needed - 1..per_depth.len() - 1];
    let shift_error = fit_model(model, shifted, edge_length).map_or(f64::INFINITY, |f| (f.lambda - lambda1).abs());
    Ok(Extrapolation {
        lambda1,
        error_estimate: shift_error + h_error,
        model,
        per_depth,
        record: record.to_vec(),
    })
}

fn richardson(coarse: &EigenSample, fine: &EigenSample) -> f64 {
    let r = fine.nodes_per_edge as f64 / coarse.nodes_per_edge as f64;
    let r2 = r * r;
    (r2 * fine.lambda - coarse.lambda) / (r2 - 1.0)
}

fn model_points(model: DepthModel) -> usize {
    match model {
        DepthModel::InverseSquare | DepthModel::Bloch => 2,
        DepthModel::ShiftedInverseSquare | DepthModel::Geometric => 3,
    }
}

struct Fit {
    lambda: f64,
    a: f64,
    shape: f64,
    edge_length: f64,
    model: DepthModel,
}

impl Fit {
    fn predict(&self, d: f64) -> f64 {
        match self.model {
            DepthModel::InverseSquare => self.lambda + self.a / (d * d),
            DepthModel::ShiftedInverseSquare => self.lambda + self.a / ((d + self.shape) * (d + self.shape)),
            DepthModel::Geometric => self.lambda + self.a * self.shape.powf(d),
            DepthModel::Bloch => {
                let k = bloch_wavenumber(d, self.shape);
                (k.cos() / self.a).acos().powi(2) / (self.edge_length * self.edge_length)
            }
        }
    }
}

fn fit_model(model: DepthModel, pts: &[(u32, f64)], edge_length: f64) -> Option<Fit> {
    let xs: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    match model {
        DepthModel::InverseSquare => {
            let (u0, u1) = (1.0 / (xs[0] * xs[0]), 1.0 / (xs[1] * xs[1]));
            let a = (ys[0] - ys[1]) / (u0 - u1);
            Some(Fit {
                lambda: ys[1] - a * u1,
                a,
                shape: 0.0,
                edge_length,
                model,
            })
        }
        DepthModel::ShiftedInverseSquare => {
            // For fixed δ the model is linear in (λ, a); choose δ so that the
            // third point is interpolated. g(δ) is solved by bisection.
            let two_point = |delta: f64| {
                let u = |x: f64| 1.0 / ((x + delta) * (x + delta));
                let a = (ys[1] - ys[2]) / (u(xs[1]) - u(xs[2]));
                let lambda = ys[2] - a * u(xs[2]);
                (lambda, a, lambda + a * u(xs[0]) - ys[0])
            };
            let lo_limit = -xs[0] * 0.9;
            let hi_limit = 10.0 * xs[2];
            let mut lo = lo_limit;
            let mut hi = hi_limit;
            let g_lo = two_point(lo).2;
            let g_hi = two_point(hi).2;
            if !(g_lo.is_finite() && g_hi.is_finite()) || g_lo.signum() == g_hi.signum() {
                return None;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if two_point(mid).2.signum() == g_lo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let delta = 0.5 * (lo + hi);
            let (lambda, a, _) = two_point(delta);
            Some(Fit {
                lambda,
                a,
                shape: delta,
                edge_length,
                model,
            })
        }
        DepthModel::Geometric => {
            let step = xs[1] - xs[0];
            if (xs[2] - xs[1] - step).abs() > 1e-12 {
                return None;
            }
            let (d1, d2) = (ys[1] - ys[0], ys[2] - ys[1]);
            if d1 == 0.0 || d2 == 0.0 {
                return None;
            }
            let q = d2 / d1;
            if !(q > 0.0 && q < 1.0) {
                return None;
            }
            let lambda = ys[2] - d2 * q / (1.0 - q);
            let rho = q.powf(1.0 / step);
            let a = (ys[2] - lambda) / rho.powf(xs[2]);
            Some(Fit {
                lambda,
                a,
                shape: rho,
                edge_length,
                model,
            })
        }
        DepthModel::Bloch => {
            // Each sample gives c(γ) = cos k_D(γ) / cos(ℓ√λ_D); pick γ so the
            // two samples agree.
            let c_of = |gamma: f64, i: usize| {
                let k = bloch_wavenumber(xs[i], gamma);
                k.cos() / (edge_length * ys[i].max(0.0).sqrt()).cos()
            };
            let g = |log_gamma: f64| {
                let gamma = log_gamma.exp();
                c_of(gamma, 0) - c_of(gamma, 1)
            };
            let (mut lo, mut hi) = (-12.0f64, 12.0f64);
            let g_lo = g(lo);
            if !(g_lo.is_finite() && g(hi).is_finite()) || g_lo.signum() == g(hi).signum() {
                return None;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid).signum() == g_lo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let gamma = (0.5 * (lo + hi)).exp();
            let c = c_of(gamma, 1);
            if !(c > 1.0) {
                return None;
            }
            Some(Fit {
                lambda: (1.0 / c).acos().powi(2) / (edge_length * edge_length),
                a: c,
                shape: gamma,
                edge_length,
                model,
            })
        }
    }
}

/// Smallest root of `tan(D k) = -γ tan k` in `(π/2D, π/D)`.
fn bloch_wavenumber(depth: f64, gamma: f64) -> f64 {
    let f = |k: f64| (depth * k).sin() * k.cos() + gamma * (depth * k).cos() * k.sin();
    let mut lo = std::f64::consts::FRAC_PI_2 / depth;
    let mut hi = std::f64::consts::PI / depth;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Depths and resolutions used for the deep radial reference value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBudget {
    pub depths: Vec<u32>,
    pub nodes_per_edge: Vec<usize>,
    pub tol: f64,
}

impl Default for ReferenceBudget {
    fn default() -> Self {
        ReferenceBudget {
            depths: vec![50, 100, 200, 400],
            nodes_per_edge: vec![8, 16, 32],
            tol: 1e-11,
        }
    }
}

impl ReferenceBudget {
    /// Caps the depths so that element weights stay in floating-point range.
    fn depths_for(&self, spec: &TreeSpec) -> Vec<u32> {
        let b = spec.branching as f64;
        let max_depth = (240.0 * std::f64::consts::LN_10 / b.ln()).floor() as u32;
        let deepest = *self.depths.iter().max().unwrap_or(&1);
        if deepest <= max_depth {
            return self.depths.clone();
        }
        let scale = max_depth as f64 / deepest as f64;
        let mut out: Vec<u32> = self
            .depths
            .iter()
            .map(|&d| ((d as f64 * scale).round() as u32).max(2))
            .collect();
        out.dedup();
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLambda {
    pub spec: TreeSpec,
    pub lambda1: f64,
    pub error_estimate: f64,
    pub extrapolation: Extrapolation,
}

impl ReferenceLambda {
    /// Relative uncertainty of the reference value.
    pub fn relative_error(&self) -> f64 {
        self.error_estimate / self.lambda1
    }
}

/// Canonical `λ₁` of the infinite tree from deep radial grids.
pub fn lambda1_reference(spec: &TreeSpec, budget: &ReferenceBudget) -> Result<ReferenceLambda> {
    spec.validate()?;
    let depths = budget.depths_for(spec);
    let jobs: Vec<(u32, usize)> = depths
        .iter()
        .flat_map(|&d| budget.nodes_per_edge.iter().map(move |&n| (d, n)))
        .collect();
    use rayon::prelude::*;
    let samples: Result<Vec<EigenSample>> = jobs
        .par_iter()
        .map(|&(d, n)| {
            let grid = build_radial_grid(spec, d, n)?;
            let r = lambda1_radial(&grid, budget.tol)?;
            Ok(EigenSample {
                depth: d,
                nodes_per_edge: n,
                lambda: r.lambda1,
            })
        })
        .collect();
    let extrapolation = extrapolate(&samples?, spec.edge_length)?;
    let lambda1 = extrapolation.lambda1;
    let error_estimate = extrapolation.error_estimate;
    if !(lambda1 > 0.0) || error_estimate > 1e-4 * lambda1 {
        return Err(Error::Accuracy(format!(
            "reference λ₁ = {lambda1} has error estimate {error_estimate} above 1e-4 relative"
        )));
    }
    Ok(ReferenceLambda {
        spec: *spec,
        lambda1,
        error_estimate,
        extrapolation,
    })
}

/// Full-tree eigenvalues over a `(D, n)` grid, extrapolated to `D, h → ∞, 0`.
pub fn lambda1_full_extrapolated(
    spec: &TreeSpec,
    depths: &[u32],
    nodes_per_edge: &[usize],
    tol: f64,
) -> Result<Extrapolation> {
    use rayon::prelude::*;
    let jobs: Vec<(u32, usize)> = depths
        .iter()
        .flat_map(|&d| nodes_per_edge.iter().map(move |&n| (d, n)))
        .collect();
    let samples: Result<Vec<EigenSample>> = jobs
        .par_iter()
        .map(|&(d, n)| {
            let mesh = build_mesh(&spec.with_depth(d), n, LeafBc::Dirichlet)?;
            let r = lambda1_full(&mesh, tol)?;
            Ok(r.record[0])
        })
        .collect();
    extrapolate(&samples?, spec.edge_length)
}
