//! Doubling construction behind the sup-norm remainder estimate.
//!
//! Cut the binary unrooted tree at a maximum point `x₀` of `u` into a part
//! `T¹` whose pendant (from `x₀` to the next vertex) has length `s` and the
//! rest `T²`. Build the junction `J`: one edge of length `ℓ` with two
//! pendants of length `ℓ − s` at one end and two of length `s` at the other.
//! Attach two copies of `T¹` to the first pair and two of `T²` to the
//! second, set `v = u` on the copies and `v ≡ M = u(x₀)` on `J`. The result
//! is again a binary tree and
//!
//! ```text
//! ‖v'‖² = 2‖u'‖²,   ‖v‖² = 2‖u‖² + 3ℓ M².
//! ```
//!
//! When `x₀` is a vertex, one of its branches plays `T¹` with `s = ℓ` and the
//! other two, joined at `x₀`, play `T²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Discretization, FemModel, Field};
use crate::tree::{ElementTree, Mesh, TreeKind};

#[derive(Clone, Debug)]
pub struct Surgery {
    pub tree: ElementTree,
    pub v: Field,
    /// `M = max u`
    pub max: f64,
    /// Mesh node where the maximum is attained.
    pub x0: usize,
    /// Distance from the true maximum point to `x0`; zero for
    /// piecewise-linear fields, which peak at nodes.
    pub snap_distance: f64,
    /// Length `s` of the pendant of `T¹`.
    pub pendant: f64,
    /// Whether `u` was replaced by `−u` to make the maximum positive.
    pub flipped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgeryIdentities {
    pub kinetic_u: f64,
    pub kinetic_v: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub max: f64,
    pub junction_length: f64,
}

impl SurgeryIdentities {
    /// `|‖v'‖² − 2‖u'‖²|`, relative to `‖v'‖²`.
    pub fn kinetic_error(&self) -> f64 {
        (self.kinetic_v - 2.0 * self.kinetic_u).abs() / self.kinetic_v.max(f64::MIN_POSITIVE)
    }

    /// `|‖v‖² − 2‖u‖² − 3ℓM²|`, relative to `‖v‖²`.
    pub fn mass_error(&self) -> f64 {
        let expected = 2.0 * self.mass_u + self.junction_length * self.max * self.max;
        (self.mass_v - expected).abs() / self.mass_v.max(f64::MIN_POSITIVE)
    }
}

/// Undirected element graph under construction; node 0 is the root.
struct Builder {
    parent: Vec<Option<usize>>,
    length: Vec<f64>,
    fixed: Vec<bool>,
    value: Vec<f64>,
}

impl Builder {
    fn push(&mut self, parent: Option<usize>, length: f64, fixed: bool, value: f64) -> usize {
        self.parent.push(parent);
        self.length.push(length);
        self.fixed.push(fixed);
        self.value.push(value);
        self.parent.len() - 1
    }

    /// Path of `k` elements of length `h` hanging from `from`, constant `m`.
    fn path(&mut self, from: usize, k: usize, h: f64, m: f64) -> usize {
        let mut at = from;
        for _ in 0..k {
            at = self.push(Some(at), h, false, m);
        }
        at
    }
}

/// Adjacency of the mesh as `(neighbor, element length)` lists.
fn neighbors(el: &ElementTree) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); el.node_count()];
    for (p, c) in el.elements() {
        adj[p].push((c, el.length(c)));
        adj[c].push((p, el.length(c)));
    }
    adj
}

/// Copies the component of the mesh behind `first` (seen from `x0`) below
/// the new node `attach`.
fn copy_branch(
    b: &mut Builder,
    adj: &[Vec<(usize, f64)>],
    el: &ElementTree,
    nodes: &[f64],
    x0: usize,
    first: (usize, f64),
    attach: usize,
) {
    let mut stack = vec![(first.0, x0, first.1, attach)];
    while let Some((old, from, len, new_parent)) = stack.pop() {
        let id = b.push(Some(new_parent), len, el.is_fixed(old), nodes[old]);
        for &(next, l) in &adj[old] {
            if next != from {
                stack.push((next, old, l, id));
            }
        }
    }
}

/// Number of elements from `x0` along the branch starting at `first` until
/// the first node whose degree is not two.
fn pendant_elements(adj: &[Vec<(usize, f64)>], x0: usize, first: usize) -> usize {
    let (mut prev, mut at, mut k) = (x0, first, 1);
    while adj[at].len() == 2 {
        let next = adj[at].iter().map(|&(w, _)| w).find(|&w| w != prev).unwrap();
        prev = at;
        at = next;
        k += 1;
    }
    k
}

/// Surgery of a field on the binary unrooted tree at its maximum point.
pub fn surgery_duplicate(mesh: &Mesh, u: &Field) -> Result<Surgery> {
    if mesh.spec.kind != TreeKind::Unrooted || mesh.spec.branching != 2 {
        return Err(Error::Precondition("surgery is defined on the binary unrooted tree".into()));
    }
    if u.len() != mesh.dof_count() {
        return Err(Error::Domain("field does not live on this mesh".into()));
    }
    let el = mesh.elements();
    let raw = u.node_values(mesh);
    let (lo, hi) = raw
        .iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let flipped = -lo > hi;
    let nodes: Vec<f64> = if flipped { raw.iter().map(|v| -v).collect() } else { raw };
    let max = hi.max(-lo);
    // First node attaining the maximum, so the choice is deterministic.
    let x0 = nodes.iter().position(|&v| v == max).unwrap_or(0);
    let n = mesh.nodes_per_edge;
    let h = mesh.h();
    let adj = neighbors(el);

    let mut b = Builder {
        parent: Vec::new(),
        length: Vec::new(),
        fixed: Vec::new(),
        value: Vec::new(),
    };
    // Junction: end A carries the T¹ copies on pendants of n − k elements,
    // end B the T² copies on pendants of k elements.
    let a_end = b.push(None, h, false, max);
    let b_end = b.path(a_end, n, h, max);
    let branches = &adj[x0];
    let (t1, t2, k): (Vec<(usize, f64)>, Vec<(usize, f64)>, usize) = match branches.len() {
        0 => (Vec::new(), Vec::new(), n),
        1 => (branches.clone(), Vec::new(), n.min(pendant_elements(&adj, x0, branches[0].0))),
        2 => {
            let k = pendant_elements(&adj, x0, branches[0].0);
            (vec![branches[0]], vec![branches[1]], k.min(n))
        }
        _ => (vec![branches[0]], branches[1..].to_vec(), n),
    };
    for _ in 0..2 {
        let end = b.path(a_end, n - k, h, max);
        for &first in &t1 {
            copy_branch(&mut b, &adj, el, &nodes, x0, first, end);
        }
    }
    for _ in 0..2 {
        let end = b.path(b_end, k, h, max);
        for &first in &t2 {
            copy_branch(&mut b, &adj, el, &nodes, x0, first, end);
        }
    }

    let count = b.parent.len();
    let mut radius = vec![0.0; count];
    for i in 1..count {
        radius[i] = radius[b.parent[i].unwrap()] + b.length[i];
    }
    let generation = radius
        .iter()
        .map(|r| (r / mesh.spec.edge_length + 1e-9).floor() as u32)
        .collect();
    let tree = ElementTree::new(b.parent, b.length, vec![1.0; count], generation, b.fixed)?;
    let v = Field::new(&tree, tree.dof_values(&b.value))?;
    Ok(Surgery {
        tree,
        v,
        max,
        x0,
        snap_distance: 0.0,
        pendant: k as f64 * h,
        flipped,
    })
}

/// Kinetic and mass terms of `u` and of its surgery.
pub fn surgery_identities(mesh: &Mesh, u: &Field, s: &Surgery) -> SurgeryIdentities {
    let full = FemModel::new(mesh);
    let doubled = FemModel::new(&s.tree);
    SurgeryIdentities {
        kinetic_u: full.dirichlet_of(u),
        kinetic_v: doubled.dirichlet_of(&s.v),
        mass_u: full.mass_of(u),
        mass_v: doubled.mass_of(&s.v),
        max: s.max,
        junction_length: 3.0 * mesh.spec.edge_length,
    }
}

impl Discretization for Surgery {
    fn elements(&self) -> &ElementTree {
        &self.tree
    }

    fn zero_extendable(&self) -> bool {
        self.tree.zero_extendable()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::fields::{random_mesh_field, SMOOTHING_PASSES};
    use crate::tree::{build_mesh, LeafBc, TreeSpec};

    fn mesh() -> Mesh {
        build_mesh(&TreeSpec::binary(TreeKind::Unrooted, 4), 4, LeafBc::Dirichlet).unwrap()
    }

    fn degree_counts(tree: &ElementTree) -> Vec<usize> {
        let mut deg = vec![0usize; tree.node_count()];
        for (p, c) in tree.elements() {
            deg[p] += 1;
            deg[c] += 1;
        }
        deg
    }

    #[test]
    fn identities_on_random_fields() {
        let m = mesh();
        for seed in 0..50 {
            let u = random_mesh_field(&m, seed, 2, SMOOTHING_PASSES).unwrap();
            let s = surgery_duplicate(&m, &u).unwrap();
            let id = surgery_identities(&m, &u, &s);
            assert!(id.kinetic_error() < 1e-12, "seed {seed}: {}", id.kinetic_error());
            assert!(id.mass_error() < 1e-12, "seed {seed}: {}", id.mass_error());
            assert!(s.tree.zero_extendable());
        }
    }

    #[test]
    fn result_is_a_binary_tree_of_the_right_size() {
        let m = mesh();
        for seed in 0..20 {
            let u = random_mesh_field(&m, seed, 2, SMOOTHING_PASSES).unwrap();
            let s = surgery_duplicate(&m, &u).unwrap();
            let n = m.nodes_per_edge;
            // Two copies of every mesh element plus 3 edges of junction.
            assert_eq!(s.tree.node_count() - 1, 2 * (m.elements().node_count() - 1) + 3 * n);
            let deg = degree_counts(&s.tree);
            assert!(deg.iter().all(|&d| d == 1 || d == 2 || d == 3), "seed {seed}");
            // Vertices (degree 3) sit at distances that are whole edges apart.
            let r0 = s.tree.radius(0);
            for (i, &d) in deg.iter().enumerate() {
                if d == 3 {
                    let r = (s.tree.radius(i) - r0) / m.spec.edge_length;
                    assert!((r - r.round()).abs() < 1e-9, "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn maximum_at_a_vertex_and_at_the_center() {
        let m = mesh();
        for peak in [0usize, m.vertex_node(1), m.vertex_node(5), m.edge_node(2, 1)] {
            let el = m.elements();
            let dist = |a: usize| (el.radius(a) - el.radius(peak)).abs();
            let u = Field::from_fn(&m, |node| if node == peak { 2.0 } else { (1.0 - dist(node) / 8.0).max(0.0) });
            let s = surgery_duplicate(&m, &u).unwrap();
            assert_eq!(s.x0, peak);
            let id = surgery_identities(&m, &u, &s);
            assert!(id.kinetic_error() < 1e-12 && id.mass_error() < 1e-12);
        }
    }

    #[test]
    fn negative_peak_is_flipped_and_zero_maps_to_zero() {
        let m = mesh();
        let u = random_mesh_field(&m, 3, 2, SMOOTHING_PASSES).unwrap();
        let neg = u.scaled(-1.0);
        let a = surgery_duplicate(&m, &u).unwrap();
        let b = surgery_duplicate(&m, &neg).unwrap();
        assert_ne!(a.flipped, b.flipped);
        let z = surgery_duplicate(&m, &Field::zeros(&m)).unwrap();
        assert!(z.v.values().iter().all(|&v| v == 0.0));
        let id = surgery_identities(&m, &Field::zeros(&m), &z);
        assert_eq!((id.kinetic_v, id.mass_v), (0.0, 0.0));
    }

    #[test]
    fn rejects_rooted_trees() {
        let m = build_mesh(&TreeSpec::binary(TreeKind::Rooted, 3), 4, LeafBc::Dirichlet).unwrap();
        assert!(surgery_duplicate(&m, &Field::zeros(&m)).is_err());
    }
}
