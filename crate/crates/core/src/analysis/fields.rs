//! Seeded random test fields.
//!
//! Standard normal nodal values, a few damped Jacobi sweeps of the stiffness
//! operator to keep `H¹` norms moderate, then zeroing of the Dirichlet
//! nodes. Mesh and radial variants do all of this on a coarse copy of the
//! discretization and interpolate, so that one seed describes the same
//! piecewise-linear function at every resolution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fem::{Discretization, Field};
use crate::tree::{build_mesh, build_radial_grid_bc, ElementTree, Mesh, RadialGrid};

/// Jacobi sweeps applied by default.
pub const SMOOTHING_PASSES: usize = 3;

fn normal_values(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `x ← ½x + ½ D⁻¹ Σ a_vw x_w` with `a_vw = weight / length`, the damped
/// Jacobi iteration for `K x = 0`. Fixed nodes are reset to zero after
/// every pass.
pub fn smooth(el: &ElementTree, nodes: &mut [f64], passes: usize) {
    let children = el.children();
    for _ in 0..passes {
        let prev = nodes.to_vec();
        for v in 0..el.node_count() {
            if el.is_fixed(v) {
                nodes[v] = 0.0;
                continue;
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for &c in &children[v] {
                let a = el.weight(c) / el.length(c);
                num += a * prev[c];
                den += a;
            }
            if let Some(p) = el.parent(v) {
                let a = el.weight(v) / el.length(v);
                num += a * prev[p];
                den += a;
            }
            if den > 0.0 {
                nodes[v] = 0.5 * prev[v] + 0.5 * num / den;
            }
        }
    }
    for v in 0..el.node_count() {
        if el.is_fixed(v) {
            nodes[v] = 0.0;
        }
    }
}

/// Random field drawn directly on `domain`.
pub fn random_field(domain: &impl Discretization, seed: u64, passes: usize) -> Field {
    let el = domain.elements();
    let mut nodes = normal_values(el.node_count(), seed);
    smooth(el, &mut nodes, passes);
    Field::from_vec_unchecked(el.dof_values(&nodes))
}

/// Random field on a full mesh, drawn with `coarse` nodes per edge and
/// interpolated linearly along the edges.
pub fn random_mesh_field(mesh: &Mesh, seed: u64, coarse: usize, passes: usize) -> Result<Field> {
    let n = mesh.nodes_per_edge;
    check_coarse(n, coarse)?;
    let coarse_mesh = build_mesh(&mesh.spec, coarse, mesh.leaf_bc)?;
    let mut raw = normal_values(coarse_mesh.elements().node_count(), seed);
    smooth(coarse_mesh.elements(), &mut raw, passes);
    let mut nodes = vec![0.0; mesh.elements().node_count()];
    nodes[0] = raw[0];
    for e in 0..mesh.tree.edges.len() {
        for k in 1..=n {
            let s = (k * coarse) as f64 / n as f64;
            let k0 = s.floor() as usize;
            let frac = s - k0 as f64;
            let a = raw[coarse_mesh.edge_node(e, k0)];
            let b = if frac > 0.0 { raw[coarse_mesh.edge_node(e, k0 + 1)] } else { a };
            nodes[mesh.edge_node(e, k)] = (1.0 - frac) * a + frac * b;
        }
    }
    Ok(Field::from_vec_unchecked(mesh.elements().dof_values(&nodes)))
}

/// Random field on a radial grid, drawn with `coarse` nodes per edge.
pub fn random_radial_field(grid: &RadialGrid, seed: u64, coarse: usize, passes: usize) -> Result<Field> {
    let n = grid.nodes_per_edge;
    check_coarse(n, coarse)?;
    let coarse_grid = build_radial_grid_bc(&grid.spec, grid.depth_r, coarse, grid.leaf_bc)?;
    let mut raw = normal_values(coarse_grid.node_count(), seed);
    smooth(coarse_grid.elements(), &mut raw, passes);
    let nodes: Vec<f64> = (0..grid.node_count())
        .map(|i| {
            let s = (i * coarse) as f64 / n as f64;
            let k0 = s.floor() as usize;
            let frac = s - k0 as f64;
            if frac > 0.0 {
                (1.0 - frac) * raw[k0] + frac * raw[k0 + 1]
            } else {
                raw[k0]
            }
        })
        .collect();
    Ok(Field::from_vec_unchecked(grid.elements().dof_values(&nodes)))
}

fn check_coarse(n: usize, coarse: usize) -> Result<()> {
    if coarse == 0 || n % coarse != 0 {
        return Err(Error::Config(format!(
            "coarse resolution {coarse} must divide the nodes per edge {n}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{build_radial_grid, LeafBc, TreeKind, TreeSpec};

    #[test]
    fn fields_are_reproducible_and_vanish_on_leaves() {
        let mesh = build_mesh(&TreeSpec::binary(TreeKind::Unrooted, 4), 4, LeafBc::Dirichlet).unwrap();
        let a = random_mesh_field(&mesh, 7, 2, SMOOTHING_PASSES).unwrap();
        let b = random_mesh_field(&mesh, 7, 2, SMOOTHING_PASSES).unwrap();
        let c = random_mesh_field(&mesh, 8, 2, SMOOTHING_PASSES).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.values().iter().all(|v| v.is_finite()));
        assert_eq!(a.len(), mesh.dof_count());
    }

    #[test]
    fn prolongation_is_the_coarse_function() {
        let spec = TreeSpec::binary(TreeKind::Rooted, 3);
        let coarse = build_mesh(&spec, 2, LeafBc::Dirichlet).unwrap();
        let fine = build_mesh(&spec, 8, LeafBc::Dirichlet).unwrap();
        let uc = random_mesh_field(&coarse, 3, 2, SMOOTHING_PASSES).unwrap().node_values(&coarse);
        let uf = random_mesh_field(&fine, 3, 2, SMOOTHING_PASSES).unwrap().node_values(&fine);
        for e in 0..coarse.tree.edges.len() {
            for k in 0..=2 {
                assert_eq!(uc[coarse.edge_node(e, k)], uf[fine.edge_node(e, 4 * k)]);
            }
            let mid = 0.5 * (uc[coarse.edge_node(e, 0)] + uc[coarse.edge_node(e, 1)]);
            assert!((uf[fine.edge_node(e, 2)] - mid).abs() < 1e-15);
        }
    }

    #[test]
    fn radial_fields_respect_the_coarse_grid() {
        let spec = TreeSpec::binary(TreeKind::Rooted, 3);
        let grid = build_radial_grid(&spec, 5, 6).unwrap();
        assert!(random_radial_field(&grid, 1, 4, 3).is_err());
        let u = random_radial_field(&grid, 1, 3, 3).unwrap();
        assert_eq!(u.len(), grid.dof_count());
    }

    #[test]
    fn smoothing_reduces_dirichlet_energy() {
        let mesh = build_mesh(&TreeSpec::binary(TreeKind::Rooted, 4), 8, LeafBc::Dirichlet).unwrap();
        let model = crate::fem::FemModel::new(&mesh);
        let rough = random_field(&mesh, 5, 0);
        let smooth = random_field(&mesh, 5, SMOOTHING_PASSES);
        let q = |u: &Field| model.dirichlet_of(u) / model.mass_of(u);
        assert!(q(&smooth) < q(&rough));
    }
}
