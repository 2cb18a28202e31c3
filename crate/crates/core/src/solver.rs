//! Minimization of the NLS energy on the mass sphere.
//!
//! Preconditioned projected gradient descent: the gradient of
//! `E(u) = ½‖u'‖² − (1/p)‖u‖_p^p` is preconditioned by `(K + M)⁻¹`, projected
//! onto the tangent space of `{uᵀMu = μ}`, and the step is retracted by taking
//! absolute values and rescaling the mass. The trial step length comes from
//! the second-order model along the search direction, then Armijo
//! backtracking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{check_exponent, Discretization, EnergyReport, FemModel, Field};
use crate::operator::{dot, TreeFactor};
use crate::spectral::{smallest_eigenpair, EigenOptions};
use crate::tree::{ElementTree, Mesh, RadialGrid};

/// Starting point of one minimization run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Ground eigenfield of the truncated problem scaled to mass `μ`.
    Eigenfield,
    /// `sech`-shaped bump centered at the given node, width from soliton scaling.
    EdgeBump(usize),
    /// Absolute values of seeded standard normal nodal values.
    Random(u64),
    Provided(Field),
}

impl Init {
    pub fn label(&self) -> String {
        match self {
            Init::Eigenfield => "eigenfield".into(),
            Init::EdgeBump(node) => format!("bump@{node}"),
            Init::Random(seed) => format!("random:{seed}"),
            Init::Provided(_) => "provided".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    /// `K + M`
    H1,
    /// `M`: plain L² gradient flow, slow; for debugging.
    L2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub p: f64,
    pub mass: f64,
    /// Starting points; empty means the domain's defaults.
    pub inits: Vec<Init>,
    /// Extra random starts appended to `inits`, seeded `seed, seed+1, ...`.
    pub random_starts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop when the projected gradient, relative to `‖u‖_{H¹}`, is below this.
    pub grad_tol: f64,
    pub backtrack: f64,
    pub armijo: f64,
    pub preconditioner: Preconditioner,
    /// Polak–Ribière+ conjugate directions on top of the preconditioned gradient.
    pub conjugate: bool,
}

impl SolverOptions {
    pub fn new(p: f64, mass: f64) -> Self {
        SolverOptions {
            p,
            mass,
            inits: Vec::new(),
            random_starts: 0,
            seed: 0,
            max_iters: 5000,
            grad_tol: 1e-9,
            backtrack: 0.5,
            armijo: 1e-4,
            preconditioner: Preconditioner::H1,
            conjugate: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(Error::Config(format!("mass must be nonnegative and finite, got {}", self.mass)));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::Config("grad_tol must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Config("backtracking ratio must lie in (0,1)".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(Error::Config("sufficient-decrease constant must lie in (0,1/2)".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateResult {
    pub p: f64,
    pub mass: f64,
    /// Nonnegative minimizer with mass exactly `μ` up to rounding.
    pub u: Field,
    pub energy: f64,
    pub report: EnergyReport,
    /// Lagrange multiplier `(‖u'‖² − ‖u‖_p^p)/μ`.
    pub lambda: f64,
    pub projected_grad_norm: f64,
    /// Max over edge-interior nodes of `|u'' + |u|^{p−2}u + λu|` by second differences.
    pub ode_residual: f64,
    /// Max over vertices of the (weighted) sum of outgoing one-sided derivatives.
    pub kirchhoff_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub init: String,
    /// Energy of every starting point, in the order they were run.
    pub init_energies: Vec<f64>,
    /// Energy after each accepted step of the winning run.
    pub energy_trace: Vec<f64>,
}

/// Domains the solver runs on.
pub trait SolverDomain: Discretization + Sync {
    /// Node indices used as bump centers by default.
    fn bump_centers(&self) -> Vec<usize>;
}

impl SolverDomain for ElementTree {
    fn bump_centers(&self) -> Vec<usize> {
        vec![0]
    }
}

impl SolverDomain for Mesh {
    fn bump_centers(&self) -> Vec<usize> {
        let n = self.nodes_per_edge;
        match self.spec.kind {
            crate::tree::TreeKind::Rooted => vec![0, self.edge_node(0, n / 2), self.vertex_node(1)],
            crate::tree::TreeKind::Unrooted => vec![0, self.edge_node(0, n / 2)],
        }
    }
}

impl SolverDomain for RadialGrid {
    fn bump_centers(&self) -> Vec<usize> {
        let n = self.nodes_per_edge;
        vec![0, n / 2, n.min(self.node_count() - 1)]
    }
}

/// Ground state of the full truncated tree.
pub fn minimize(mesh: &Mesh, opts: &SolverOptions) -> Result<GroundStateResult> {
    minimize_on(mesh, opts)
}

/// Ground state among radial functions, on the weighted half-line.
pub fn minimize_radial(grid: &RadialGrid, opts: &SolverOptions) -> Result<GroundStateResult> {
    minimize_on(grid, opts)
}

/// Best-of-multistart minimization on any element tree.
pub fn minimize_on(domain: &impl SolverDomain, opts: &SolverOptions) -> Result<GroundStateResult> {
    opts.validate()?;
    let model = FemModel::new(domain);
    let n = model.dof_count();
    if n == 0 {
        return Err(Error::Domain("discretization has no free DOFs".into()));
    }
    if opts.mass == 0.0 {
        return zero_mass_result(&model, opts);
    }
    let mut inits = opts.inits.clone();
    if inits.is_empty() {
        inits.push(Init::Eigenfield);
        inits.extend(domain.bump_centers().into_iter().map(Init::EdgeBump));
    }
    inits.extend((0..opts.random_starts as u64).map(|i| Init::Random(opts.seed.wrapping_add(i))));

    let precond = match opts.preconditioner {
        Preconditioner::H1 => model.stiffness.combine(1.0, &model.mass, 1.0).factor(),
        Preconditioner::L2 => model.mass.factor(),
    };
    let starts: Vec<Field> = inits
        .iter()
        .map(|init| initial_field(domain, &model, init, opts))
        .collect::<Result<_>>()?;
    let runs: Vec<Result<Run>> = starts
        .par_iter()
        .map(|u0| descend(&model, &precond, u0.clone(), opts))
        .collect();
    let mut runs: Vec<(usize, Run)> = runs
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map(|r| (i, r)))
        .collect::<Result<_>>()?;
    let init_energies: Vec<f64> = runs.iter().map(|(_, r)| r.start_energy).collect();

    // Deterministic winner: lowest energy; among runs within 1e-10 of it,
    // lowest sup norm, then lowest index.
    let e_min = runs.iter().map(|(_, r)| r.report.energy).fold(f64::INFINITY, f64::min);
    let tie = 1e-10 * (1.0 + e_min.abs());
    let pick = runs
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| r.report.energy <= e_min + tie)
        .min_by(|(_, (ia, a)), (_, (ib, b))| a.report.sup_norm.total_cmp(&b.report.sup_norm).then(ia.cmp(ib)))
        .map(|(k, _)| k)
        .unwrap();
    let (index, best) = runs.swap_remove(pick);
    let lambda = model.multiplier(&best.u, opts.p)?;
    let (ode_residual, kirchhoff_residual) = residuals(domain.elements(), &best.u, opts.p, lambda);
    Ok(GroundStateResult {
        p: opts.p,
        mass: opts.mass,
        energy: best.report.energy,
        report: best.report,
        lambda,
        projected_grad_norm: best.grad_norm,
        ode_residual,
        kirchhoff_residual,
        iterations: best.iterations,
        converged: best.converged,
        init: inits[index].label(),
        init_energies,
        energy_trace: best.trace,
        u: best.u,
    })
}

fn zero_mass_result(model: &FemModel, opts: &SolverOptions) -> Result<GroundStateResult> {
    let u = Field::from_vec_unchecked(vec![0.0; model.dof_count()]);
    let report = model.energy(&u, opts.p)?;
    // The multiplier of vanishing-mass minimizers tends to the bottom of the
    // truncated spectrum.
    let lambda = smallest_eigenpair(model.elements(), EigenOptions::default())?.lambda1;
    Ok(GroundStateResult {
        p: opts.p,
        mass: 0.0,
        u,
        energy: 0.0,
        report,
        lambda,
        projected_grad_norm: 0.0,
        ode_residual: 0.0,
        kirchhoff_residual: 0.0,
        iterations: 0,
        converged: true,
        init: "zero".into(),
        init_energies: vec![0.0],
        energy_trace: vec![0.0],
    })
}

fn initial_field(domain: &impl SolverDomain, model: &FemModel, init: &Init, opts: &SolverOptions) -> Result<Field> {
    let el = domain.elements();
    let n = el.dof_count();
    let mut values = match init {
        Init::Eigenfield => smallest_eigenpair(el, EigenOptions::default())?.eigenfield.into_values(),
        Init::EdgeBump(center) => {
            if *center >= el.node_count() {
                return Err(Error::Config(format!("bump center {center} is not a node")));
            }
            let dist = distances_from(el, *center);
            let min_h = (1..el.node_count()).map(|i| el.length(i)).fold(f64::INFINITY, f64::min);
            let extent = dist.iter().cloned().fold(0.0, f64::max).max(min_h);
            // A center whose incident elements carry total weight W hosts W
            // half-solitons of mass μ/W each.
            let incident: f64 = el.parent(*center).map_or(0.0, |_| el.weight(*center))
                + el.children()[*center].iter().map(|&c| el.weight(c)).sum::<f64>();
            let width = (2.0 * incident / opts.mass)
                .powf((opts.p - 2.0) / (6.0 - opts.p))
                .clamp(2.0 * min_h, extent);
            (0..n)
                .map(|i| {
                    let r = dist[el.node_of_dof(i)] / width;
                    (1.0 / r.cosh()).powf(2.0 / (opts.p - 2.0))
                })
                .collect()
        }
        Init::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z.abs()
                })
                .collect()
        }
        Init::Provided(field) => {
            if field.len() != n {
                return Err(Error::Config(format!(
                    "provided field has {} values, expected {n}",
                    field.len()
                )));
            }
            field.values().iter().map(|v| v.abs()).collect()
        }
    };
    let mass = model.mass.quadratic_form(&values);
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Domain(format!("initialization {} has zero mass", init.label())));
    }
    let s = (opts.mass / mass).sqrt();
    values.iter_mut().for_each(|v| *v *= s);
    Field::new(el, values)
}

/// Geodesic distance from `center` to every node.
fn distances_from(el: &ElementTree, center: usize) -> Vec<f64> {
    let children = el.children();
    let mut dist = vec![f64::INFINITY; el.node_count()];
    dist[center] = 0.0;
    let mut stack = vec![center];
    while let Some(v) = stack.pop() {
        let mut nbrs: Vec<(usize, f64)> = children[v].iter().map(|&c| (c, el.length(c))).collect();
        if let Some(p) = el.parent(v) {
            nbrs.push((p, el.length(v)));
        }
        for (w, len) in nbrs {
            if dist[w].is_infinite() {
                dist[w] = dist[v] + len;
                stack.push(w);
            }
        }
    }
    dist
}

struct Run {
    u: Field,
    report: EnergyReport,
    start_energy: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn retract(model: &FemModel, x: Vec<f64>, mass: f64) -> Option<Field> {
    let mut x: Vec<f64> = x.into_iter().map(f64::abs).collect();
    let m = model.mass.quadratic_form(&x);
    if !(m > 0.0 && m.is_finite()) {
        return None;
    }
    let s = (mass / m).sqrt();
    x.iter_mut().for_each(|v| *v *= s);
    Some(Field::from_vec_unchecked(x))
}

/// Projected gradient information at one point of the sphere.
struct Direction {
    /// `g − αMu`, the gradient minus its preconditioned normal component.
    r: Vec<f64>,
    /// `P⁻¹ r`, tangent to the sphere.
    s: Vec<f64>,
    /// `rᵀ P⁻¹ r`
    rs: f64,
    grad_norm: f64,
    lambda: f64,
}

fn direction(model: &FemModel, precond: &TreeFactor, u: &Field, p: f64) -> Result<Direction> {
    let g = model.energy_gradient(u, p)?.into_values();
    let mu = model.mass.apply(u.values());
    let z = precond.try_solve(&g)?;
    let q = precond.try_solve(&mu)?;
    let alpha = dot(&mu, &z) / dot(&mu, &q);
    // Form the projected residual before solving again: taking the difference
    // of the two preconditioned vectors instead loses all relative accuracy
    // once g is nearly parallel to Mu.
    let r: Vec<f64> = g.iter().zip(&mu).map(|(g, m)| g - alpha * m).collect();
    let s = precond.try_solve(&r)?;
    let rs = dot(&r, &s);
    let lambda = dot(&g, u.values()) / dot(&mu, u.values());
    Ok(Direction {
        grad_norm: (rs.max(0.0) / model.h1_norm_sq(u)).sqrt(),
        r,
        s,
        rs,
        lambda,
    })
}


/// Removes the component of `d` normal to the sphere at `u`.
fn project_tangent(model: &FemModel, u: &Field, d: &mut [f64]) {
    let mu = model.mass.apply(u.values());
    let c = dot(&mu, d) / dot(&mu, u.values());
    d.iter_mut().zip(u.values()).for_each(|(d, u)| *d -= c * u);
}

fn descend(model: &FemModel, precond: &TreeFactor, u0: Field, opts: &SolverOptions) -> Result<Run> {
    let p = opts.p;
    let mut u = retract(model, u0.into_values(), opts.mass)
        .ok_or_else(|| Error::numeric("initial field could not be normalized"))?;
    let mut report = model.energy(&u, p)?;
    let start_energy = report.energy;
    let mut trace = vec![report.energy];
    let mut cur = direction(model, precond, &u, p)?;
    let mut d: Vec<f64> = cur.s.iter().map(|v| -v).collect();
    let mut step = 1.0;
    let mut iterations = 0;
    let mut best_grad = cur.grad_norm;
    let mut since_best = 0;
    while cur.grad_norm > opts.grad_tol && iterations < opts.max_iters {
        iterations += 1;
        let mut slope = -dot(&cur.r, &d);
        if !(slope > 0.0) {
            d = cur.s.iter().map(|v| -v).collect();
            slope = cur.rs;
        }
        // Curvature of the energy on the sphere along d.
        let kd = model.stiffness.apply(&d);
        let nd = model.nonlinear_hessian_apply(&u, &d, p);
        let md = model.mass.apply(&d);
        let hd: Vec<f64> = (0..d.len()).map(|i| kd[i] - nd[i] - cur.lambda * md[i]).collect();
        let curv = dot(&d, &hd);
        let mut t = if curv > 0.0 { slope / curv } else { 2.0 * step };
        // Energy differences below this are rounding noise: the quadratic
        // form cancels large per-element terms.
        let noise = 1e-13 * (report.kinetic.abs() + report.potential.abs());
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = u.values().iter().zip(&d).map(|(a, b)| a + t * b).collect();
            if let Some(v) = retract(model, trial, opts.mass) {
                let r = model.energy(&v, p)?;
                if !r.energy.is_finite() {
                    return Err(Error::Numeric {
                        message: "non-finite energy in line search".into(),
                        trace,
                    });
                }
                if r.energy <= report.energy - opts.armijo * t * slope {
                    accepted = Some((v, r, None));
                    break;
                }
                if t * slope <= noise && r.energy <= report.energy + noise {
                    // The energy cannot resolve this step; require the
                    // gradient to shrink instead.
                    let next = direction(model, precond, &v, p)?;
                    if next.grad_norm < cur.grad_norm {
                        accepted = Some((v, r, Some(next)));
                        break;
                    }
                }
            }
            t *= opts.backtrack;
        }
        let Some((v, r, next)) = accepted else { break };
        let next = match next {
            Some(n) => n,
            None => direction(model, precond, &v, p)?,
        };
        // Polak–Ribière+ with the preconditioned residuals; the previous
        // direction is projected onto the new tangent space.
        let beta = if opts.conjugate && iterations % 100 != 0 {
            let num = next.rs - dot(&next.r, &cur.s);
            (num / cur.rs).max(0.0)
        } else {
            0.0
        };
        let mut new_d: Vec<f64> = next.s.iter().zip(&d).map(|(s, d)| -s + beta * d).collect();
        project_tangent(model, &v, &mut new_d);
        d = new_d;
        step = t;
        u = v;
        report = r;
        cur = next;
        trace.push(report.energy);
        if cur.grad_norm < 0.999 * best_grad {
            best_grad = cur.grad_norm;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 200 {
                break;
            }
        }
    }
    Ok(Run {
        converged: cur.grad_norm <= opts.grad_tol,
        grad_norm: cur.grad_norm,
        u,
        report,
        start_energy,
        iterations,
        trace,
    })
}

/// ODE residual at edge-interior nodes and Kirchhoff (flux) residual at
/// vertices and breakpoints.
///
/// A node is edge-interior if it has a parent and exactly one child and both
/// adjacent elements carry the same weight; every other free node is treated
/// as a vertex, where the weighted sum of outgoing one-sided derivatives is
/// divided by the largest incident weight.
pub fn residuals(el: &ElementTree, u: &Field, p: f64, lambda: f64) -> (f64, f64) {
    let nodes = el.node_values(u.values());
    let children = el.children();
    let mut ode = 0.0f64;
    let mut kirchhoff = 0.0f64;
    for v in 0..el.node_count() {
        if el.is_fixed(v) {
            continue;
        }
        let uv = nodes[v];
        let interior = match (el.parent(v), children[v].as_slice()) {
            (Some(_), [c]) => el.weight(*c) == el.weight(v),
            _ => false,
        };
        if interior {
            let par = el.parent(v).unwrap();
            let c = children[v][0];
            let (h1, h2) = (el.length(v), el.length(c));
            let upp = 2.0 / (h1 + h2) * ((nodes[c] - uv) / h2 - (uv - nodes[par]) / h1);
            let r = upp + uv.abs().powf(p - 2.0) * uv + lambda * uv;
            ode = ode.max(r.abs());
        } else {
            let mut flux = 0.0;
            let mut wmax = 0.0f64;
            for &c in &children[v] {
                flux += el.weight(c) * (nodes[c] - uv) / el.length(c);
                wmax = wmax.max(el.weight(c));
            }
            if let Some(par) = el.parent(v) {
                flux += el.weight(v) * (nodes[par] - uv) / el.length(v);
                wmax = wmax.max(el.weight(v));
            }
            if wmax > 0.0 {
                kirchhoff = kirchhoff.max((flux / wmax).abs());
            }
        }
    }
    (ode, kirchhoff)
}
