//! Mass-constrained NLS ground states on homogeneous metric trees.
//!
//! Trees are discretized by continuous piecewise-linear finite elements;
//! radial functions reduce to a weighted half-line. The crate computes the
//! bottom of the Laplacian spectrum, minimizes the NLS energy at fixed mass,
//! sweeps the level function and checks the functional inequalities that
//! govern existence of ground states.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod fem;
pub mod io;
pub mod operator;
pub mod quadrature;
pub mod shooting;
pub mod solver;
pub mod spectral;
pub mod tree;

pub use error::{Error, Result};
pub use fem::{Discretization, EnergyReport, FemModel, Field};
pub use operator::{SparseSymOperator, TreeFactor};
pub use spectral::{lambda1_full, lambda1_radial, lambda1_reference, EigenResult};
pub use tree::{
    build_mesh, build_radial_grid, build_tree, ElementTree, LeafBc, Mesh, RadialGrid, TreeKind, TreeSpec,
};
