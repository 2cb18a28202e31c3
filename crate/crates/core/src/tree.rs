//! Truncated homogeneous metric trees and their piecewise-linear meshes.
//!
//! A rooted tree starts with a single pendant edge at a degree-one root; an
//! unrooted tree has `b + 1` edges at its center. Every other interior vertex
//! has `b` children. Trees are truncated after `depth` generations of edges.
//!
//! Both meshes and radial grids are reduced to an [`ElementTree`]: a list of
//! nodes in which every non-root node is joined to an earlier parent node by
//! one linear element. All assembly in [`crate::fem`] works on that form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the number of degrees of freedom of a mesh.
pub const DEFAULT_DOF_CAP: usize = 2_000_000;

/// Largest element weight accepted on a radial grid.
const MAX_RADIAL_WEIGHT: f64 = 1e250;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    Rooted,
    Unrooted,
}

impl std::str::FromStr for TreeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rooted" => Ok(TreeKind::Rooted),
            "unrooted" => Ok(TreeKind::Unrooted),
            other => Err(Error::Config(format!(
                "unknown tree kind `{other}` (expected rooted or unrooted)"
            ))),
        }
    }
}

/// Boundary condition imposed at the depth-D truncation leaves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafBc {
    Dirichlet,
    Neumann,
}

impl std::str::FromStr for LeafBc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(LeafBc::Dirichlet),
            "neumann" => Ok(LeafBc::Neumann),
            other => Err(Error::Config(format!(
                "unknown leaf boundary condition `{other}` (expected dirichlet or neumann)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub kind: TreeKind,
    /// Children per interior vertex.
    pub branching: u32,
    pub edge_length: f64,
    /// Generations of edges retained before truncation.
    pub depth: u32,
}

impl TreeSpec {
    pub const MAX_BRANCHING: u32 = 64;
    pub const MAX_DEPTH: u32 = 64;

    pub fn new(kind: TreeKind, branching: u32, edge_length: f64, depth: u32) -> Result<Self> {
        let spec = TreeSpec {
            kind,
            branching,
            edge_length,
            depth,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The binary tree with unit edges.
    pub fn binary(kind: TreeKind, depth: u32) -> Self {
        TreeSpec {
            kind,
            branching: 2,
            edge_length: 1.0,
            depth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.branching < 2 || self.branching > Self::MAX_BRANCHING {
            return Err(Error::Config(format!(
                "branching must lie in [2, {}], got {}",
                Self::MAX_BRANCHING,
                self.branching
            )));
        }
        if !(self.edge_length.is_finite() && self.edge_length > 0.0) {
            return Err(Error::Config(format!(
                "edge length must be positive and finite, got {}",
                self.edge_length
            )));
        }
        if self.depth < 1 || self.depth > Self::MAX_DEPTH {
            return Err(Error::Config(format!(
                "depth must lie in [1, {}], got {}",
                Self::MAX_DEPTH,
                self.depth
            )));
        }
        Ok(())
    }

    pub fn with_depth(&self, depth: u32) -> Self {
        TreeSpec { depth, ..*self }
    }

    pub fn with_kind(&self, kind: TreeKind) -> Self {
        TreeSpec { kind, ..*self }
    }

    /// Number of edges leaving the root (1) or the center (b + 1).
    pub fn root_degree(&self) -> usize {
        match self.kind {
            TreeKind::Rooted => 1,
            TreeKind::Unrooted => self.branching as usize + 1,
        }
    }

    /// Number of points at each distance from the root in generation zero.
    pub fn root_multiplicity(&self) -> f64 {
        self.root_degree() as f64
    }

    /// Edge count of generation `j`, or `None` on overflow.
    pub fn edges_in_generation(&self, j: u32) -> Option<usize> {
        (self.branching as usize)
            .checked_pow(j)?
            .checked_mul(self.root_degree())
    }

    pub fn edge_count(&self) -> Option<usize> {
        (0..self.depth).try_fold(0usize, |acc, j| {
            acc.checked_add(self.edges_in_generation(j)?)
        })
    }

    pub fn vertex_count(&self) -> Option<usize> {
        self.edge_count()?.checked_add(1)
    }

    /// Number of vertices at depth D.
    pub fn leaf_count(&self) -> Option<usize> {
        self.edges_in_generation(self.depth - 1)
    }

    /// Total metric length of the truncated tree.
    pub fn total_length(&self) -> f64 {
        let b = self.branching as f64;
        let geometric = (b.powi(self.depth as i32) - 1.0) / (b - 1.0);
        self.root_multiplicity() * self.edge_length * geometric
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub generation: u32,
    pub parent_edge: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    /// Endpoint closer to the root.
    pub parent: usize,
    pub child: usize,
    pub generation: u32,
}

/// Vertex and edge tables of a truncated tree.
///
/// Ids are assigned breadth first, so edge `e` always ends at vertex `e + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub spec: TreeSpec,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

impl Tree {
    pub fn total_length(&self) -> f64 {
        self.edges.len() as f64 * self.spec.edge_length
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Vertex> + '_ {
        let depth = self.spec.depth;
        self.vertices.iter().filter(move |v| v.generation == depth)
    }

    /// Child edges of every vertex, in id order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            out[e.parent].push(e.id);
        }
        out
    }
}

/// Builds the vertex and edge tables of `spec`.
pub fn build_tree(spec: &TreeSpec) -> Result<Tree> {
    build_tree_capped(spec, DEFAULT_DOF_CAP)
}

fn build_tree_capped(spec: &TreeSpec, cap: usize) -> Result<Tree> {
    spec.validate()?;
    let edge_count = spec
        .edge_count()
        .filter(|&e| e < cap)
        .ok_or_else(|| {
            Error::Resource(format!(
                "tree with branching {} and depth {} exceeds the size cap of {cap}; use the radial grid for deep trees",
                spec.branching, spec.depth
            ))
        })?;

    let mut vertices = Vec::with_capacity(edge_count + 1);
    let mut edges = Vec::with_capacity(edge_count);
    vertices.push(Vertex {
        id: 0,
        generation: 0,
        parent_edge: None,
    });
    let mut head = 0;
    while head < vertices.len() {
        let v = vertices[head].clone();
        head += 1;
        if v.generation == spec.depth {
            continue;
        }
        let fanout = if v.id == 0 {
            spec.root_degree()
        } else {
            spec.branching as usize
        };
        for _ in 0..fanout {
            let id = edges.len();
            edges.push(Edge {
                id,
                parent: v.id,
                child: id + 1,
                generation: v.generation,
            });
            vertices.push(Vertex {
                id: id + 1,
                generation: v.generation + 1,
                parent_edge: Some(id),
            });
        }
    }
    debug_assert_eq!(edges.len(), edge_count);
    Ok(Tree {
        spec: *spec,
        vertices,
        edges,
    })
}

/// Nodes joined by linear elements along a tree.
///
/// Node 0 is the root. Every other node `i` has a parent `parent[i] < i` and
/// the element between them has length `length[i]` and multiplicity weight
/// `weight[i]`. Constrained (Dirichlet) nodes are always leaves, so removing
/// them keeps the parent-before-child ordering of the remaining DOFs.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementTree {
    parent: Vec<Option<usize>>,
    length: Vec<f64>,
    weight: Vec<f64>,
    radius: Vec<f64>,
    generation: Vec<u32>,
    fixed: Vec<bool>,
    dof_of: Vec<Option<usize>>,
    node_of_dof: Vec<usize>,
}

impl ElementTree {
    /// Builds an element tree from per-node data. `parent[0]` must be `None`
    /// and every other node must have an earlier parent. Fixed nodes must be
    /// leaves.
    pub fn new(
        parent: Vec<Option<usize>>,
        length: Vec<f64>,
        weight: Vec<f64>,
        generation: Vec<u32>,
        fixed: Vec<bool>,
    ) -> Result<Self> {
        let n = parent.len();
        if n == 0
            || length.len() != n
            || weight.len() != n
            || generation.len() != n
            || fixed.len() != n
        {
            return Err(Error::Config("element tree arrays must be non-empty and of equal length".into()));
        }
        if parent[0].is_some() {
            return Err(Error::Config("node 0 must be the root".into()));
        }
        let mut has_child = vec![false; n];
        let mut radius = vec![0.0; n];
        for i in 1..n {
            let p = parent[i]
                .filter(|&p| p < i)
                .ok_or_else(|| Error::Config(format!("node {i} lacks an earlier parent")))?;
            if !(length[i] > 0.0 && length[i].is_finite()) || !(weight[i] > 0.0 && weight[i].is_finite()) {
                return Err(Error::Config(format!("element {i} has invalid length or weight")));
            }
            has_child[p] = true;
            radius[i] = radius[p] + length[i];
        }
        if let Some(i) = (0..n).find(|&i| fixed[i] && has_child[i]) {
            return Err(Error::Config(format!("fixed node {i} is not a leaf")));
        }
        let mut dof_of = vec![None; n];
        let mut node_of_dof = Vec::with_capacity(n);
        for i in 0..n {
            if !fixed[i] {
                dof_of[i] = Some(node_of_dof.len());
                node_of_dof.push(i);
            }
        }
        Ok(ElementTree {
            parent,
            length,
            weight,
            radius,
            generation,
            fixed,
            dof_of,
            node_of_dof,
        })
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn dof_count(&self) -> usize {
        self.node_of_dof.len()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn length(&self, node: usize) -> f64 {
        self.length[node]
    }

    pub fn weight(&self, node: usize) -> f64 {
        self.weight[node]
    }

    /// Distance from node 0 along the tree.
    pub fn radius(&self, node: usize) -> f64 {
        self.radius[node]
    }

    /// Generation index used by decay estimates (`floor(t / edge_length)`).
    pub fn generation(&self, node: usize) -> u32 {
        self.generation[node]
    }

    pub fn is_fixed(&self, node: usize) -> bool {
        self.fixed[node]
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.dof_of[node]
    }

    pub fn node_of_dof(&self, dof: usize) -> usize {
        self.node_of_dof[dof]
    }

    /// Elements as `(parent node, child node)` pairs, indexed by child node.
    pub fn elements(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.node_count()).map(move |i| (self.parent[i].unwrap_or(0), i))
    }

    /// Parent of each DOF expressed as a DOF index.
    pub fn dof_parents(&self) -> Vec<Option<usize>> {
        self.node_of_dof
            .iter()
            .map(|&node| self.parent[node].and_then(|p| self.dof_of[p]))
            .collect()
    }

    /// Total weighted length `sum(weight * length)`.
    pub fn weighted_length(&self) -> f64 {
        (1..self.node_count()).map(|i| self.weight[i] * self.length[i]).sum()
    }

    /// Expands DOF coefficients to all nodes (fixed nodes get zero).
    pub fn node_values(&self, dofs: &[f64]) -> Vec<f64> {
        self.dof_of
            .iter()
            .map(|d| d.map_or(0.0, |d| dofs[d]))
            .collect()
    }

    /// Restricts node values to the free DOFs.
    pub fn dof_values(&self, nodes: &[f64]) -> Vec<f64> {
        self.node_of_dof.iter().map(|&n| nodes[n]).collect()
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.node_count()];
        for (p, c) in self.elements() {
            out[p].push(c);
        }
        out
    }
}

/// Piecewise-linear mesh of a truncated tree.
///
/// Nodes are numbered so that the root (or center) is node 0 and edge `e`
/// owns nodes `e*n + 1 ..= e*n + n`, the last of which is its child vertex.
/// Tree vertex `v` is therefore node `v*n`.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub spec: TreeSpec,
    pub nodes_per_edge: usize,
    pub leaf_bc: LeafBc,
    pub tree: Tree,
    elements: ElementTree,
    radial_index: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub spec: TreeSpec,
    pub nodes_per_edge: usize,
    pub leaf_bc: LeafBc,
    pub dof_count: usize,
    pub total_length: f64,
}

/// Builds the mesh of `spec` with `n` elements per edge.
pub fn build_mesh(spec: &TreeSpec, n: usize, leaf_bc: LeafBc) -> Result<Mesh> {
    build_mesh_capped(spec, n, leaf_bc, DEFAULT_DOF_CAP)
}

pub fn build_mesh_capped(spec: &TreeSpec, n: usize, leaf_bc: LeafBc, dof_cap: usize) -> Result<Mesh> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::Config(format!("nodes per edge must be at least 2, got {n}")));
    }
    let too_big = || {
        Error::Resource(format!(
            "mesh with branching {}, depth {} and {n} nodes per edge exceeds the DOF cap of {dof_cap}",
            spec.branching, spec.depth
        ))
    };
    let node_count = spec
        .edge_count()
        .and_then(|e| e.checked_mul(n))
        .and_then(|x| x.checked_add(1))
        .filter(|&x| x <= dof_cap)
        .ok_or_else(too_big)?;
    let tree = build_tree_capped(spec, dof_cap)?;
    let h = spec.edge_length / n as f64;

    let mut parent = vec![None; node_count];
    let mut generation = vec![0u32; node_count];
    let mut fixed = vec![false; node_count];
    let mut radial_index = vec![0usize; node_count];
    for e in &tree.edges {
        let base = e.id * n;
        for k in 1..=n {
            let node = base + k;
            parent[node] = Some(if k == 1 { e.parent * n } else { node - 1 });
            radial_index[node] = e.generation as usize * n + k;
            generation[node] = if k == n { e.generation + 1 } else { e.generation };
        }
    }
    if leaf_bc == LeafBc::Dirichlet {
        for v in tree.leaves() {
            fixed[v.id * n] = true;
        }
    }
    let elements = ElementTree::new(
        parent,
        vec![h; node_count],
        vec![1.0; node_count],
        generation,
        fixed,
    )?;
    Ok(Mesh {
        spec: *spec,
        nodes_per_edge: n,
        leaf_bc,
        tree,
        elements,
        radial_index,
    })
}

impl Mesh {
    pub fn elements(&self) -> &ElementTree {
        &self.elements
    }

    pub fn dof_count(&self) -> usize {
        self.elements.dof_count()
    }

    pub fn h(&self) -> f64 {
        self.spec.edge_length / self.nodes_per_edge as f64
    }

    pub fn vertex_node(&self, vertex: usize) -> usize {
        vertex * self.nodes_per_edge
    }

    /// Node at position `k` (0..=n) along edge `e`, measured from its parent vertex.
    pub fn edge_node(&self, edge: usize, k: usize) -> usize {
        let n = self.nodes_per_edge;
        if k == 0 {
            self.tree.edges[edge].parent * n
        } else {
            edge * n + k
        }
    }

    /// Index of the radial-grid node at the same distance from the root.
    pub fn radial_index(&self, node: usize) -> usize {
        self.radial_index[node]
    }

    /// Whether `node` is a tree vertex rather than an edge-interior node.
    pub fn is_vertex_node(&self, node: usize) -> bool {
        node % self.nodes_per_edge == 0
    }

    pub fn summary(&self) -> MeshSummary {
        MeshSummary {
            spec: self.spec,
            nodes_per_edge: self.nodes_per_edge,
            leaf_bc: self.leaf_bc,
            dof_count: self.dof_count(),
            total_length: self.spec.total_length(),
        }
    }
}

/// Weighted half-line reduction of a tree for radial functions.
///
/// Node `i` sits at `t = i*h` and the element `(i-1, i)` in generation `j`
/// carries the weight `c0 * b^j`, where `c0` is 1 on rooted trees and `b + 1`
/// on unrooted ones.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    pub spec: TreeSpec,
    pub depth_r: u32,
    pub nodes_per_edge: usize,
    pub leaf_bc: LeafBc,
    elements: ElementTree,
}

pub fn build_radial_grid(spec: &TreeSpec, depth_r: u32, n: usize) -> Result<RadialGrid> {
    build_radial_grid_bc(spec, depth_r, n, LeafBc::Dirichlet)
}

pub fn build_radial_grid_bc(spec: &TreeSpec, depth_r: u32, n: usize, leaf_bc: LeafBc) -> Result<RadialGrid> {
    spec.validate()?;
    if depth_r < 1 {
        return Err(Error::Config("radial depth must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::Config(format!("nodes per edge must be at least 2, got {n}")));
    }
    let b = spec.branching as f64;
    let c0 = spec.root_multiplicity();
    if c0 * b.powi(depth_r as i32 - 1) > MAX_RADIAL_WEIGHT {
        return Err(Error::Config(format!(
            "radial depth {depth_r} overflows the weight range for branching {}",
            spec.branching
        )));
    }
    let node_count = depth_r as usize * n + 1;
    let h = spec.edge_length / n as f64;
    let mut parent = Vec::with_capacity(node_count);
    let mut weight = Vec::with_capacity(node_count);
    let mut generation = Vec::with_capacity(node_count);
    parent.push(None);
    weight.push(1.0);
    generation.push(0);
    for i in 1..node_count {
        let element_generation = ((i - 1) / n) as i32;
        parent.push(Some(i - 1));
        weight.push(c0 * b.powi(element_generation));
        generation.push((i / n) as u32);
    }
    let mut fixed = vec![false; node_count];
    if leaf_bc == LeafBc::Dirichlet {
        fixed[node_count - 1] = true;
    }
    let elements = ElementTree::new(parent, vec![h; node_count], weight, generation, fixed)?;
    Ok(RadialGrid {
        spec: *spec,
        depth_r,
        nodes_per_edge: n,
        leaf_bc,
        elements,
    })
}

impl RadialGrid {
    pub fn elements(&self) -> &ElementTree {
        &self.elements
    }

    pub fn dof_count(&self) -> usize {
        self.elements.dof_count()
    }

    pub fn h(&self) -> f64 {
        self.spec.edge_length / self.nodes_per_edge as f64
    }

    /// Weight `w(t)` of the point at distance `t`, right-continuous at breakpoints.
    pub fn weight_at(&self, t: f64) -> f64 {
        let j = (t / self.spec.edge_length).floor().max(0.0) as i32;
        self.spec.root_multiplicity() * (self.spec.branching as f64).powi(j)
    }

    /// Radial coordinate of node `i`.
    pub fn coordinate(&self, node: usize) -> f64 {
        node as f64 * self.h()
    }

    pub fn node_count(&self) -> usize {
        self.elements.node_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rooted(b: u32, l: f64, d: u32) -> TreeSpec {
        TreeSpec::new(TreeKind::Rooted, b, l, d).unwrap()
    }

    #[test]
    fn tree_sizes() {
        let t = build_tree(&rooted(2, 1.0, 3)).unwrap();
        assert_eq!(t.edges.len(), 7);
        assert_eq!(t.total_length(), 7.0);

        let u = TreeSpec::new(TreeKind::Unrooted, 2, 1.0, 2).unwrap();
        let t = build_tree(&u).unwrap();
        assert_eq!(t.edges.len(), 9);
        assert_eq!(t.total_length(), 9.0);
        assert_eq!(u.total_length(), 9.0);

        let s = rooted(3, 0.5, 2);
        let t = build_tree(&s).unwrap();
        assert_eq!(t.edges.len(), 4);
        assert_eq!(t.total_length(), 2.0);
        assert_eq!(s.total_length(), 2.0);
    }

    #[test]
    fn generation_counts() {
        for kind in [TreeKind::Rooted, TreeKind::Unrooted] {
            let spec = TreeSpec::new(kind, 3, 1.0, 4).unwrap();
            let t = build_tree(&spec).unwrap();
            for j in 0..4 {
                let count = t.edges.iter().filter(|e| e.generation == j).count();
                assert_eq!(Some(count), spec.edges_in_generation(j));
            }
            let c0 = spec.root_degree();
            assert_eq!(t.edges.len(), c0 * (81 - 1) / 2);
        }
    }

    #[test]
    fn breadth_first_ids() {
        let t = build_tree(&rooted(2, 1.0, 3)).unwrap();
        for e in &t.edges {
            assert_eq!(e.child, e.id + 1);
            assert!(e.parent < e.child);
            assert_eq!(t.vertices[e.child].parent_edge, Some(e.id));
        }
        let gens: Vec<u32> = t.edges.iter().map(|e| e.generation).collect();
        assert_eq!(gens, vec![0, 1, 1, 2, 2, 2, 2]);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(TreeSpec::new(TreeKind::Rooted, 1, 1.0, 3).is_err());
        assert!(TreeSpec::new(TreeKind::Rooted, 2, 0.0, 3).is_err());
        assert!(TreeSpec::new(TreeKind::Rooted, 2, 1.0, 0).is_err());
        assert!(TreeSpec::new(TreeKind::Rooted, 2, f64::NAN, 3).is_err());
    }

    #[test]
    fn mesh_dof_counts() {
        let spec = rooted(2, 1.0, 2);
        assert_eq!(build_mesh(&spec, 2, LeafBc::Neumann).unwrap().dof_count(), 7);
        assert_eq!(build_mesh(&spec, 2, LeafBc::Dirichlet).unwrap().dof_count(), 5);
        let u = TreeSpec::new(TreeKind::Unrooted, 2, 1.0, 1).unwrap();
        assert_eq!(build_mesh(&u, 4, LeafBc::Neumann).unwrap().dof_count(), 13);
    }

    #[test]
    fn dof_count_matches_independent_count() {
        for kind in [TreeKind::Rooted, TreeKind::Unrooted] {
            for (b, d, n) in [(2, 3, 3), (3, 2, 5), (2, 5, 2)] {
                let spec = TreeSpec::new(kind, b, 0.7, d).unwrap();
                let edges = spec.edge_count().unwrap();
                let vertices = edges + 1;
                let leaves = spec.leaf_count().unwrap();
                let neu = build_mesh(&spec, n, LeafBc::Neumann).unwrap();
                let dir = build_mesh(&spec, n, LeafBc::Dirichlet).unwrap();
                assert_eq!(neu.dof_count(), edges * (n - 1) + vertices);
                assert_eq!(dir.dof_count(), edges * (n - 1) + vertices - leaves);
            }
        }
    }

    #[test]
    fn mesh_is_a_connected_tree() {
        let spec = TreeSpec::new(TreeKind::Unrooted, 2, 1.0, 3).unwrap();
        let mesh = build_mesh(&spec, 3, LeafBc::Neumann).unwrap();
        let el = mesh.elements();
        // n nodes with n-1 parent links, each pointing backwards: connected and acyclic.
        let links = (1..el.node_count()).filter(|&i| el.parent(i).is_some()).count();
        assert_eq!(links, el.node_count() - 1);
        let total: f64 = (1..el.node_count()).map(|i| el.length(i)).sum();
        assert!((total - spec.total_length()).abs() < 1e-12);
    }

    #[test]
    fn mesh_rejects_small_n_and_dof_overflow() {
        let spec = rooted(2, 1.0, 3);
        assert!(matches!(build_mesh(&spec, 1, LeafBc::Neumann), Err(Error::Config(_))));
        let deep = rooted(2, 1.0, 30);
        assert!(matches!(build_mesh(&deep, 4, LeafBc::Dirichlet), Err(Error::Resource(_))));
        assert!(matches!(
            build_mesh_capped(&spec, 4, LeafBc::Dirichlet, 10),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn radial_weights() {
        let g = build_radial_grid(&rooted(2, 1.0, 3), 4, 4).unwrap();
        assert_eq!(g.weight_at(2.5), 4.0);
        let u = TreeSpec::new(TreeKind::Unrooted, 2, 1.0, 3).unwrap();
        let g = build_radial_grid(&u, 4, 4).unwrap();
        assert_eq!(g.weight_at(0.5), 3.0);
        let s = rooted(3, 2.0, 3);
        let g = build_radial_grid(&s, 4, 4).unwrap();
        assert_eq!(g.weight_at(3.0), 3.0);
        assert_eq!(g.weight_at(2.0), 3.0);
        assert_eq!(g.weight_at(1.99), 1.0);
    }

    #[test]
    fn radial_breakpoints_and_monotone_weight() {
        let spec = rooted(3, 1.0, 3);
        let g = build_radial_grid(&spec, 5, 4).unwrap();
        let el = g.elements();
        for j in 0..=5usize {
            let node = j * 4;
            assert_eq!(g.coordinate(node), j as f64);
            assert_eq!(el.generation(node), j as u32);
        }
        for i in 2..el.node_count() {
            let ratio = el.weight(i) / el.weight(i - 1);
            if (i - 1) % 4 == 0 {
                assert_eq!(ratio, 3.0);
            } else {
                assert_eq!(ratio, 1.0);
            }
        }
    }

    #[test]
    fn radial_weight_integrates_to_tree_length() {
        for kind in [TreeKind::Rooted, TreeKind::Unrooted] {
            for b in 2..5 {
                let spec = TreeSpec::new(kind, b, 1.0, 6).unwrap();
                let g = build_radial_grid(&spec, 6, 3).unwrap();
                // Integer weights times h = 1/3 summed over 3 elements per unit: exact.
                let per_unit: f64 = (0..6).map(|j| spec.root_multiplicity() * (b as f64).powi(j)).sum();
                assert_eq!(per_unit, spec.total_length());
                assert!((g.elements().weighted_length() - spec.total_length()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn radial_index_matches_coordinate() {
        let spec = rooted(2, 1.0, 3);
        let mesh = build_mesh(&spec, 4, LeafBc::Dirichlet).unwrap();
        let el = mesh.elements();
        for node in 0..el.node_count() {
            let t = el.radius(node);
            assert!((t - mesh.radial_index(node) as f64 * mesh.h()).abs() < 1e-12);
        }
    }

    #[test]
    fn unrooted_is_b_plus_one_rooted_copies() {
        for b in 2..5 {
            for d in 1..5 {
                let r = TreeSpec::new(TreeKind::Rooted, b, 1.3, d).unwrap();
                let u = r.with_kind(TreeKind::Unrooted);
                let ratio = u.total_length() / r.total_length();
                assert!((ratio - (b + 1) as f64).abs() < 1e-12);
            }
        }
    }
}
