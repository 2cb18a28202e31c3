//! Independent check of radial minimizers by shooting.
//!
//! The radial Euler–Lagrange equation is integrated cell by cell with
//! classical RK4 starting from `v(0) = u(0)`, `v'(0) = 0`. At every
//! breakpoint the weighted flux `w v'` is continuous, so `v'` is divided by
//! the branching number. The integrated profile is then compared with the
//! finite-element one.
//!
//! With the multiplier convention `λ = (‖u'‖² − ‖u‖_p^p)/μ` the equation
//! reads `v'' = −λ v − |v|^{p−2} v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::GroundStateResult;
use crate::tree::RadialGrid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    /// RK4 steps per finite element.
    pub substeps: usize,
    /// Compare only where the FEM profile exceeds this fraction of its maximum.
    /// Forward shooting amplifies any error in `v(0)` along the decaying tail,
    /// so far-field values carry no information.
    pub cutoff: f64,
    /// `|v|` above this multiple of `max |u|` counts as blow-up.
    pub blowup: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            substeps: 16,
            cutoff: 1e-3,
            blowup: 1e3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingReport {
    /// Max of `|v − u|` over the compared nodes.
    pub max_deviation: f64,
    /// `max_deviation / max |u|`
    pub relative_deviation: f64,
    /// Radial coordinate of the last compared node.
    pub compared_until: f64,
    /// `|v|` at the deepest node reached.
    pub tail_value: f64,
    pub diverged: bool,
    pub diverged_at: Option<f64>,
    /// Integrated values at the grid nodes reached.
    pub profile: Vec<f64>,
}

/// Integrates the radial equation from `(v0, 0)` and returns `v` at every
/// grid node until the solution leaves `[-limit, limit]`.
///
/// `p = None` drops the nonlinearity.
pub fn shoot(grid: &RadialGrid, v0: f64, lambda: f64, p: Option<f64>, substeps: usize, limit: f64) -> Vec<f64> {
    let n = grid.nodes_per_edge;
    let h = grid.h();
    let b = grid.spec.branching as f64;
    let steps = substeps.max(1);
    let dt = h / steps as f64;
    let rhs = |v: f64| -> f64 {
        let nl = match p {
            Some(p) => v.abs().powf(p - 2.0) * v,
            None => 0.0,
        };
        -lambda * v - nl
    };
    let nodes = grid.node_count();
    let mut out = Vec::with_capacity(nodes);
    let (mut v, mut dv) = (v0, 0.0);
    out.push(v);
    for i in 1..nodes {
        for _ in 0..steps {
            let (k1v, k1d) = (dv, rhs(v));
            let (k2v, k2d) = (dv + 0.5 * dt * k1d, rhs(v + 0.5 * dt * k1v));
            let (k3v, k3d) = (dv + 0.5 * dt * k2d, rhs(v + 0.5 * dt * k2v));
            let (k4v, k4d) = (dv + dt * k3d, rhs(v + dt * k3v));
            v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            dv += dt / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        }
        if !(v.abs() <= limit) {
            break;
        }
        out.push(v);
        if i % n == 0 {
            dv /= b;
        }
    }
    out
}

/// Compares a converged radial minimizer with the shooting solution that
/// starts from its value at the root.
pub fn shooting_verify(result: &GroundStateResult, grid: &RadialGrid, opts: &ShootingOptions) -> Result<ShootingReport> {
    if !result.converged {
        return Err(Error::Precondition("shooting needs a converged minimizer".into()));
    }
    if result.u.len() != grid.dof_count() {
        return Err(Error::Precondition("minimizer does not live on this radial grid".into()));
    }
    let p = if result.mass > 0.0 { Some(result.p) } else { None };
    compare_profile(&result.u.node_values(grid), grid, result.lambda, p, opts)
}

/// Shooting comparison against an arbitrary nodal profile.
pub fn compare_profile(
    u: &[f64],
    grid: &RadialGrid,
    lambda: f64,
    p: Option<f64>,
    opts: &ShootingOptions,
) -> Result<ShootingReport> {
    if u.len() != grid.node_count() {
        return Err(Error::Domain("profile length does not match the grid".into()));
    }
    let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if umax == 0.0 {
        return Err(Error::Domain("shooting from a zero profile is trivial".into()));
    }
    let profile = shoot(grid, u[0], lambda, p, opts.substeps, opts.blowup * umax);
    let diverged = profile.len() < grid.node_count();
    let window = u
        .iter()
        .position(|v| v.abs() < opts.cutoff * umax)
        .unwrap_or(u.len())
        .min(profile.len());
    let max_deviation = (0..window).map(|i| (profile[i] - u[i]).abs()).fold(0.0, f64::max);
    Ok(ShootingReport {
        max_deviation,
        relative_deviation: max_deviation / umax,
        compared_until: grid.coordinate(window.saturating_sub(1)),
        tail_value: profile.last().map_or(0.0, |v| v.abs()),
        diverged,
        diverged_at: diverged.then(|| grid.coordinate(profile.len())),
        profile,
    })
}
