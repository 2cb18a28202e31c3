//! Functional inequalities evaluated on discrete fields.
//!
//! Every quantity is an exact integral of the piecewise-linear interpolant
//! (kinetic and mass terms) or a high-order quadrature of it, so the
//! ratios below are those of genuine `H¹` functions on the tree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{check_exponent, lp_integral, weighted_l2, Discretization, FemModel, Field};
use crate::quadrature::Quadrature;
use crate::tree::RadialGrid;

/// `R = ‖u'‖² − λ₁‖u‖²` against a lower-order norm of `u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Remainder {
    pub remainder: f64,
    /// `‖u‖∞²` or `∫|u|²/(1+|x|)²`.
    pub reference: f64,
    pub ratio: f64,
}

fn require_extendable(domain: &impl Discretization) -> Result<()> {
    if domain.zero_extendable() {
        Ok(())
    } else {
        Err(Error::Precondition(
            "remainder estimates need fields vanishing at the truncation leaves".into(),
        ))
    }
}

/// Poincaré remainder against the squared sup norm.
pub fn poincare_remainder(domain: &impl Discretization, u: &Field, lambda1: f64) -> Result<Remainder> {
    require_extendable(domain)?;
    let model = FemModel::new(domain);
    let sup = u.sup_norm();
    if sup == 0.0 {
        return Err(Error::Domain("remainder ratio is undefined for the zero field".into()));
    }
    let remainder = model.dirichlet_of(u) - lambda1 * model.mass_of(u);
    Ok(Remainder {
        remainder,
        reference: sup * sup,
        ratio: remainder / (sup * sup),
    })
}

/// `∫ |u|² / (1 + |x|)²`, with `|x|` the distance from the root or center.
pub fn decaying_l2(domain: &impl Discretization, u: &Field) -> f64 {
    weighted_l2(domain, u, |r| 1.0 / ((1.0 + r) * (1.0 + r)), Quadrature::Gauss5)
}

/// Poincaré remainder against the power-weighted `L²` norm.
pub fn weighted_remainder(domain: &impl Discretization, u: &Field, lambda1: f64) -> Result<Remainder> {
    require_extendable(domain)?;
    let model = FemModel::new(domain);
    let reference = decaying_l2(domain, u);
    if reference == 0.0 {
        return Err(Error::Domain("remainder ratio is undefined for the zero field".into()));
    }
    let remainder = model.dirichlet_of(u) - lambda1 * model.mass_of(u);
    Ok(Remainder {
        remainder,
        reference,
        ratio: remainder / reference,
    })
}

/// `‖u‖_p^p / (‖u‖₂^{p/2+1} ‖u'‖₂^{p/2−1})`
pub fn gagliardo_nirenberg_ratio(domain: &impl Discretization, u: &Field, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let model = FemModel::new(domain);
    let l2 = model.mass_of(u).sqrt();
    let grad = model.dirichlet_of(u).sqrt();
    if l2 == 0.0 || grad == 0.0 {
        return Err(Error::Domain("Gagliardo–Nirenberg ratio is undefined for constant fields".into()));
    }
    Ok(model.lp_power(u, p) / (l2.powf(0.5 * p + 1.0) * grad.powf(0.5 * p - 1.0)))
}

/// `‖u‖∞ / ‖u'‖₂`
pub fn sup_gradient_ratio(domain: &impl Discretization, u: &Field) -> Result<f64> {
    let grad = FemModel::new(domain).dirichlet_of(u).sqrt();
    if grad == 0.0 {
        return Err(Error::Domain("sup/gradient ratio is undefined for constant fields".into()));
    }
    Ok(u.sup_norm() / grad)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    /// `max_t |u(t)|² b^{⌊t/ℓ⌋} / ‖u'‖₂²`
    pub constant: f64,
    /// Radial coordinate where the maximum is attained.
    pub at: f64,
}

/// Empirical constant of the exponential decay of radial functions.
pub fn decay_check(grid: &RadialGrid, u: &Field) -> Result<Decay> {
    let model = FemModel::new(grid);
    let grad = model.dirichlet_of(u);
    if grad == 0.0 {
        return Err(Error::Domain("decay constant is undefined for constant fields".into()));
    }
    let el = grid.elements();
    let nodes = u.node_values(grid);
    let b = grid.spec.branching as f64;
    let mut best = Decay { constant: 0.0, at: 0.0 };
    for (i, v) in nodes.iter().enumerate() {
        let c = v * v * b.powi(el.generation(i) as i32) / grad;
        if c > best.constant {
            best = Decay {
                constant: c,
                at: grid.coordinate(i),
            };
        }
    }
    Ok(best)
}

/// Empirical constants of the a priori estimates for one field of mass `μ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriSample {
    pub mass: f64,
    pub energy: f64,
    pub sup_norm: f64,
    /// `(‖u'‖² − 4E) / μ^{(p+2)/(6−p)}`; the estimate holds with any larger `C`.
    pub coercivity: f64,
    /// `1 / (‖u‖∞^{p−4} μ)`
    pub sup_lower: f64,
    /// `∫|u|²/(1+|x|)² / ‖u‖_p^p`
    pub weighted_over_lp: f64,
    /// Whether `E ≤ ½ λ₁ μ`, the hypothesis of the last two estimates.
    pub below_line: bool,
}

pub fn apriori_sample(domain: &impl Discretization, u: &Field, p: f64, lambda1: f64) -> Result<AprioriSample> {
    let model = FemModel::new(domain);
    let report = model.energy(u, p)?;
    let mass = report.mass;
    if !(mass > 0.0) {
        return Err(Error::Domain("a priori estimates need positive mass".into()));
    }
    let kinetic = 2.0 * report.kinetic;
    let lp = p * report.potential;
    Ok(AprioriSample {
        mass,
        energy: report.energy,
        sup_norm: report.sup_norm,
        coercivity: (kinetic - 4.0 * report.energy) / mass.powf((p + 2.0) / (6.0 - p)),
        sup_lower: 1.0 / (report.sup_norm.powf(p - 4.0) * mass),
        weighted_over_lp: decaying_l2(domain, u) / lp,
        below_line: report.energy <= 0.5 * lambda1 * mass,
    })
}

/// `∫ w |u|^p` and `∫ w |u|²` by the trapezoidal rule on the nodes.
pub fn nodal_norms(domain: &impl Discretization, u: &Field, p: f64) -> (f64, f64) {
    (
        lp_integral(domain, u, 2.0, Quadrature::Nodal),
        lp_integral(domain, u, p, Quadrature::Nodal),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::lambda1_radial;
    use crate::tree::{build_mesh, build_radial_grid, ElementTree, LeafBc, TreeKind, TreeSpec};

    #[test]
    fn zero_field_is_signalled() {
        let mesh = build_mesh(&TreeSpec::binary(TreeKind::Unrooted, 3), 4, LeafBc::Dirichlet).unwrap();
        let z = Field::zeros(&mesh);
        assert!(poincare_remainder(&mesh, &z, 0.1).is_err());
        assert!(weighted_remainder(&mesh, &z, 0.1).is_err());
    }

    #[test]
    fn neumann_fields_are_rejected() {
        let mesh = build_mesh(&TreeSpec::binary(TreeKind::Unrooted, 3), 4, LeafBc::Neumann).unwrap();
        let u = Field::from_fn(&mesh, |_| 1.0);
        assert!(matches!(poincare_remainder(&mesh, &u, 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn weighted_norm_of_linear_profile_on_first_edge() {
        // u = 1 − t on the pendant of a rooted tree, zero elsewhere:
        // ‖u'‖² = 1 and ∫₀¹ (1−t)²/(1+t)² dt = 3 − 4 ln 2.
        let mesh = build_mesh(&TreeSpec::binary(TreeKind::Rooted, 3), 16, LeafBc::Dirichlet).unwrap();
        let el = mesh.elements();
        let u = Field::from_fn(&mesh, |node| {
            let r = el.radius(node);
            if r < 1.0 {
                1.0 - r
            } else {
                0.0
            }
        });
        let lambda = 0.115;
        let w = weighted_remainder(&mesh, &u, lambda).unwrap();
        let exact_weighted = 3.0 - 4.0 * std::f64::consts::LN_2;
        let exact_remainder = 1.0 - lambda / 3.0;
        assert!((w.reference - exact_weighted).abs() < 1e-10, "{}", w.reference - exact_weighted);
        assert!((w.remainder - exact_remainder).abs() < 1e-12);
    }

    #[test]
    fn decay_of_a_field_on_the_first_edge() {
        // Radial u = 1 − t on [0, 1]: max of |u|² b^⌊t⌋ is 1 at t = 0 and ‖u'‖² = 1.
        let grid = build_radial_grid(&TreeSpec::binary(TreeKind::Rooted, 3), 3, 8).unwrap();
        let u = Field::from_fn(&grid, |i| (1.0 - grid.coordinate(i)).max(0.0));
        let d = decay_check(&grid, &u).unwrap();
        assert!((d.constant - 1.0).abs() < 1e-14 && d.at == 0.0);
    }

    #[test]
    fn gagliardo_nirenberg_ratio_is_scale_invariant() {
        let grid = build_radial_grid(&TreeSpec::binary(TreeKind::Rooted, 3), 6, 8).unwrap();
        let u = lambda1_radial(&grid, 1e-10).unwrap().eigenfield;
        for p in [3.0, 4.0, 5.0] {
            let a = gagliardo_nirenberg_ratio(&grid, &u, p).unwrap();
            let b = gagliardo_nirenberg_ratio(&grid, &u.scaled(3.7), p).unwrap();
            assert!((a - b).abs() < 1e-12 * a);
        }
        let a = sup_gradient_ratio(&grid, &u).unwrap();
        assert!((a - sup_gradient_ratio(&grid, &u.scaled(0.2)).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn element_tree_extension_check() {
        let open = ElementTree::new(
            vec![None, Some(0), Some(1)],
            vec![1.0; 3],
            vec![1.0; 3],
            vec![0; 3],
            vec![false; 3],
        )
        .unwrap();
        assert!(!open.zero_extendable());
        let closed = ElementTree::new(
            vec![None, Some(0), Some(1)],
            vec![1.0; 3],
            vec![1.0; 3],
            vec![0; 3],
            vec![false, false, true],
        )
        .unwrap();
        assert!(closed.zero_extendable());
    }
}
