//! Quadratic-average symmetrization of full-tree fields.
//!
//! The radial value at distance `t` is `sqrt(mean of u² over X(t))`, the
//! root-mean-square over the mesh nodes at that distance. On a homogeneous
//! mesh all nodes at one distance carry the same lumped mass, so the rule
//! preserves the trapezoidal `L²` norm exactly and, by Jensen, does not
//! increase the trapezoidal `L^p` norms for `p ≥ 2`. The kinetic term of the
//! interpolant does not increase either: per layer of elements it is a
//! reverse triangle inequality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FemModel, Field};
use crate::tree::{build_radial_grid_bc, Mesh, RadialGrid};

use super::inequalities::nodal_norms;

/// Radial grid matching `mesh` (same kind, depth, resolution and leaves).
pub fn matching_grid(mesh: &Mesh) -> Result<RadialGrid> {
    build_radial_grid_bc(&mesh.spec, mesh.spec.depth, mesh.nodes_per_edge, mesh.leaf_bc)
}

/// Quadratic average of `u` over the spheres around the root or center.
pub fn symmetrize(mesh: &Mesh, grid: &RadialGrid, u: &Field) -> Result<Field> {
    check_match(mesh, grid)?;
    if u.len() != mesh.dof_count() {
        return Err(Error::Domain("field does not live on this mesh".into()));
    }
    let nodes = u.node_values(mesh);
    let m = grid.node_count();
    let mut sum = vec![0.0; m];
    let mut count = vec![0usize; m];
    for (node, v) in nodes.iter().enumerate() {
        let i = mesh.radial_index(node);
        sum[i] += v * v;
        count[i] += 1;
    }
    let radial: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| (s / c as f64).sqrt()).collect();
    Field::from_nodes(grid, &radial)
}

/// The full-tree field that equals the radial field `w` at every distance.
pub fn lift(mesh: &Mesh, grid: &RadialGrid, w: &Field) -> Result<Field> {
    check_match(mesh, grid)?;
    if w.len() != grid.dof_count() {
        return Err(Error::Domain("field does not live on this radial grid".into()));
    }
    let radial = w.node_values(grid);
    Ok(Field::from_fn(mesh, |node| radial[mesh.radial_index(node)]))
}

fn check_match(mesh: &Mesh, grid: &RadialGrid) -> Result<()> {
    if grid.spec.kind != mesh.spec.kind
        || grid.spec.branching != mesh.spec.branching
        || grid.spec.edge_length != mesh.spec.edge_length
        || grid.depth_r != mesh.spec.depth
        || grid.nodes_per_edge != mesh.nodes_per_edge
        || grid.leaf_bc != mesh.leaf_bc
    {
        return Err(Error::Config("radial grid does not match the mesh".into()));
    }
    Ok(())
}

/// Norms of a field and of its symmetrization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizeCheck {
    /// Trapezoidal `‖u‖₂²`, `‖w‖₂²`.
    pub mass: (f64, f64),
    /// Exact `‖u'‖₂²`, `‖w'‖₂²`.
    pub kinetic: (f64, f64),
    /// `(p, ‖u‖_p, ‖w‖_p)` with the trapezoidal rule.
    pub lp: Vec<(f64, f64, f64)>,
}

impl SymmetrizeCheck {
    /// Largest violation among mass equality, kinetic and `L^p` non-increase.
    pub fn worst_violation(&self) -> f64 {
        let mut worst = (self.mass.0 - self.mass.1).abs() / self.mass.0.max(f64::MIN_POSITIVE);
        worst = worst.max((self.kinetic.1 - self.kinetic.0) / self.kinetic.0.max(f64::MIN_POSITIVE));
        for &(_, a, b) in &self.lp {
            worst = worst.max((b - a) / a.max(f64::MIN_POSITIVE));
        }
        worst
    }
}

pub fn symmetrize_check(mesh: &Mesh, grid: &RadialGrid, u: &Field, exponents: &[f64]) -> Result<SymmetrizeCheck> {
    let w = symmetrize(mesh, grid, u)?;
    let full = FemModel::new(mesh);
    let radial = FemModel::new(grid);
    let mut lp = Vec::with_capacity(exponents.len());
    let mut mass = (0.0, 0.0);
    for &p in exponents {
        let (mu, lu) = nodal_norms(mesh, u, p);
        let (mw, lw) = nodal_norms(grid, &w, p);
        mass = (mu, mw);
        lp.push((p, lu.powf(1.0 / p), lw.powf(1.0 / p)));
    }
    if exponents.is_empty() {
        let (mu, _) = nodal_norms(mesh, u, 2.0);
        let (mw, _) = nodal_norms(grid, &w, 2.0);
        mass = (mu, mw);
    }
    Ok(SymmetrizeCheck {
        mass,
        kinetic: (full.dirichlet_of(u), radial.dirichlet_of(&w)),
        lp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::fields::{random_mesh_field, SMOOTHING_PASSES};
    use crate::spectral::lambda1_full;
    use crate::tree::{build_mesh, LeafBc, TreeKind, TreeSpec};
    use proptest::prelude::*;

    fn setup(kind: TreeKind) -> (Mesh, RadialGrid) {
        let mesh = build_mesh(&TreeSpec::binary(kind, 4), 4, LeafBc::Dirichlet).unwrap();
        let grid = matching_grid(&mesh).unwrap();
        (mesh, grid)
    }

    #[test]
    fn radial_input_is_a_fixed_point() {
        let (mesh, grid) = setup(TreeKind::Unrooted);
        let w = Field::from_fn(&grid, |i| (0.3 * i as f64).sin().abs() + 0.1);
        let u = lift(&mesh, &grid, &w).unwrap();
        let back = symmetrize(&mesh, &grid, &u).unwrap();
        for (a, b) in w.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn full_eigenfield_is_radial() {
        let (mesh, grid) = setup(TreeKind::Rooted);
        let eig = lambda1_full(&mesh, 1e-12).unwrap();
        let w = symmetrize(&mesh, &grid, &eig.eigenfield).unwrap();
        let diff: Vec<f64> = lift(&mesh, &grid, &w)
            .unwrap()
            .values()
            .iter()
            .zip(eig.eigenfield.values())
            .map(|(a, b)| a - b)
            .collect();
        let model = FemModel::new(&mesh);
        let d = Field::new(&mesh, diff).unwrap();
        assert!(model.h1_norm_sq(&d).sqrt() <= 1e-6);
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let (mesh, _) = setup(TreeKind::Rooted);
        let other = build_radial_grid_bc(&mesh.spec, 5, 4, LeafBc::Dirichlet).unwrap();
        assert!(symmetrize(&mesh, &other, &Field::zeros(&mesh)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn symmetrization_inequalities(seed in 0u64..10_000, unrooted in any::<bool>()) {
            let kind = if unrooted { TreeKind::Unrooted } else { TreeKind::Rooted };
            let (mesh, grid) = setup(kind);
            let u = random_mesh_field(&mesh, seed, 2, SMOOTHING_PASSES).unwrap();
            let c = symmetrize_check(&mesh, &grid, &u, &[3.0, 4.0, 5.0]).unwrap();
            prop_assert!((c.mass.0 - c.mass.1).abs() <= 1e-12 * c.mass.0);
            prop_assert!(c.kinetic.1 <= c.kinetic.0 * (1.0 + 1e-12));
            for (_, a, b) in c.lp {
                prop_assert!(b <= a * (1.0 + 1e-12));
            }
        }
    }
}
