//! Piecewise-linear finite elements on element trees.
//!
//! Every element `(parent, child)` of an [`ElementTree`] has length `h` and
//! weight `w`; for full-tree meshes `w = 1`, for radial grids `w` counts the
//! number of tree points at that distance. Integrals are weighted sums over
//! elements, so the same code serves meshes, radial grids and the trees
//! built by the surgery construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{CompensatedSum, SparseSymOperator};
use crate::quadrature::Quadrature;
use crate::tree::{ElementTree, LeafBc, Mesh, RadialGrid};

/// Anything that owns an [`ElementTree`].
pub trait Discretization {
    fn elements(&self) -> &ElementTree;

    /// Whether every field vanishes at the truncation leaves, so that its
    /// zero extension lies in `H¹` of the infinite tree.
    fn zero_extendable(&self) -> bool;
}

impl Discretization for ElementTree {
    fn elements(&self) -> &ElementTree {
        self
    }

    fn zero_extendable(&self) -> bool {
        let children = self.children();
        (1..self.node_count()).all(|i| !children[i].is_empty() || self.is_fixed(i))
    }
}

impl Discretization for Mesh {
    fn elements(&self) -> &ElementTree {
        Mesh::elements(self)
    }

    fn zero_extendable(&self) -> bool {
        self.leaf_bc == LeafBc::Dirichlet
    }
}

impl Discretization for RadialGrid {
    fn elements(&self) -> &ElementTree {
        RadialGrid::elements(self)
    }

    fn zero_extendable(&self) -> bool {
        self.leaf_bc == LeafBc::Dirichlet
    }
}

/// Nodal coefficients of a continuous piecewise-linear function, indexed by
/// DOF. Dirichlet nodes are implicitly zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn new(domain: &impl Discretization, values: Vec<f64>) -> Result<Self> {
        let n = domain.elements().dof_count();
        if values.len() != n {
            return Err(Error::Domain(format!(
                "field has {} coefficients but the discretization has {n} DOFs",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("field coefficient {i} is not finite")));
        }
        Ok(Field { values })
    }

    pub fn zeros(domain: &impl Discretization) -> Self {
        Field {
            values: vec![0.0; domain.elements().dof_count()],
        }
    }

    /// Field from values at every node, fixed nodes ignored.
    pub fn from_nodes(domain: &impl Discretization, node_values: &[f64]) -> Result<Self> {
        let el = domain.elements();
        if node_values.len() != el.node_count() {
            return Err(Error::Domain("node value count does not match the discretization".into()));
        }
        Field::new(domain, el.dof_values(node_values))
    }

    /// Interpolates `f(node)` at every free node.
    pub fn from_fn(domain: &impl Discretization, f: impl Fn(usize) -> f64) -> Self {
        let el = domain.elements();
        Field {
            values: (0..el.dof_count()).map(|d| f(el.node_of_dof(d))).collect(),
        }
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Field { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Largest absolute nodal value, which is the sup norm of the interpolant.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn node_values(&self, domain: &impl Discretization) -> Vec<f64> {
        domain.elements().node_values(&self.values)
    }
}

pub fn assemble_stiffness(domain: &impl Discretization) -> SparseSymOperator {
    let el = domain.elements();
    let mut op = SparseSymOperator::zeros(el.dof_parents());
    for (p, c) in el.elements() {
        let k = el.weight(c) / el.length(c);
        add_element(el, &mut op, p, c, k, -k);
    }
    op
}

pub fn assemble_mass(domain: &impl Discretization, lumped: bool) -> SparseSymOperator {
    let el = domain.elements();
    let mut op = SparseSymOperator::zeros(el.dof_parents());
    for (p, c) in el.elements() {
        let wh = el.weight(c) * el.length(c);
        if lumped {
            add_element(el, &mut op, p, c, wh / 2.0, 0.0);
        } else {
            add_element(el, &mut op, p, c, wh / 3.0, wh / 6.0);
        }
    }
    op
}

fn add_element(el: &ElementTree, op: &mut SparseSymOperator, p: usize, c: usize, d: f64, o: f64) {
    let dp = el.dof(p);
    let dc = el.dof(c);
    if let Some(i) = dp {
        op.add_diag(i, d);
    }
    if let Some(j) = dc {
        op.add_diag(j, d);
        if dp.is_some() {
            op.add_off(j, o);
        }
    }
}

/// `∫ w |u|^p` over the whole domain with the given per-element rule.
pub fn lp_integral(domain: &impl Discretization, u: &Field, p: f64, rule: Quadrature) -> f64 {
    let el = domain.elements();
    let nodes = el.node_values(u.values());
    let mut total = CompensatedSum::default();
    for (a, b) in el.elements() {
        let (ua, ub) = (nodes[a], nodes[b]);
        let s: f64 = rule
            .rule()
            .iter()
            .map(|&(x, g)| g * abs_pow((ua + (ub - ua) * x).abs(), p))
            .sum();
        total.add(el.weight(b) * el.length(b) * s);
    }
    total.value()
}

/// `∫ w f(r) |u|^2` where `r` is the distance from the root.
pub fn weighted_l2(domain: &impl Discretization, u: &Field, f: impl Fn(f64) -> f64, rule: Quadrature) -> f64 {
    let el = domain.elements();
    let nodes = el.node_values(u.values());
    let mut total = CompensatedSum::default();
    for (a, b) in el.elements() {
        let (ua, ub) = (nodes[a], nodes[b]);
        let (ra, rb) = (el.radius(a), el.radius(b));
        let s: f64 = rule
            .rule()
            .iter()
            .map(|&(x, g)| {
                let v = ua + (ub - ua) * x;
                g * f(ra + (rb - ra) * x) * v * v
            })
            .sum();
        total.add(el.weight(b) * el.length(b) * s);
    }
    total.value()
}

/// `x^e` for `x ≥ 0`, using repeated multiplication for integer exponents.
#[inline]
pub(crate) fn abs_pow(x: f64, e: f64) -> f64 {
    if e == e.trunc() && (0.0..=8.0).contains(&e) {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

pub fn check_exponent(p: f64) -> Result<()> {
    if p > 2.0 && p < 6.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("p must lie in (2,6), got {p}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `½ ∫ |u'|²`
    pub kinetic: f64,
    /// `(1/p) ∫ |u|^p`
    pub potential: f64,
    pub energy: f64,
    pub mass: f64,
    pub sup_norm: f64,
    pub lp_norm: f64,
}

/// Stiffness and consistent mass operators of a discretization.
pub struct FemModel<'a> {
    elements: &'a ElementTree,
    pub stiffness: SparseSymOperator,
    pub mass: SparseSymOperator,
}

impl<'a> FemModel<'a> {
    pub fn new(domain: &'a impl Discretization) -> Self {
        FemModel {
            elements: domain.elements(),
            stiffness: assemble_stiffness(domain),
            mass: assemble_mass(domain, false),
        }
    }

    pub fn elements(&self) -> &'a ElementTree {
        self.elements
    }

    pub fn dof_count(&self) -> usize {
        self.elements.dof_count()
    }

    fn check(&self, u: &Field) -> Result<()> {
        if u.len() != self.dof_count() {
            return Err(Error::Domain(format!(
                "field has {} coefficients, expected {}",
                u.len(),
                self.dof_count()
            )));
        }
        Ok(())
    }

    /// `∫ |u|^2`
    pub fn mass_of(&self, u: &Field) -> f64 {
        self.mass.quadratic_form(u.values())
    }

    /// `∫ |u'|^2`
    pub fn dirichlet_of(&self, u: &Field) -> f64 {
        self.stiffness.quadratic_form(u.values())
    }

    /// `∫ |u|^p` with the 3-point Gauss rule on each element.
    pub fn lp_power(&self, u: &Field, p: f64) -> f64 {
        lp_integral(self.elements, u, p, Quadrature::Gauss3)
    }

    pub fn energy(&self, u: &Field, p: f64) -> Result<EnergyReport> {
        check_exponent(p)?;
        self.check(u)?;
        let kinetic = 0.5 * self.dirichlet_of(u);
        let lp = self.lp_power(u, p);
        let potential = lp / p;
        Ok(EnergyReport {
            kinetic,
            potential,
            energy: kinetic - potential,
            mass: self.mass_of(u),
            sup_norm: u.sup_norm(),
            lp_norm: lp.powf(1.0 / p),
        })
    }

    /// Gradient of `(1/p) ∫ |u|^p` under the same quadrature as [`Self::energy`].
    pub fn nonlinear_gradient(&self, u: &Field, p: f64) -> Vec<f64> {
        let el = self.elements;
        let nodes = el.node_values(u.values());
        let mut g = vec![0.0; el.dof_count()];
        for (a, b) in el.elements() {
            let (ua, ub) = (nodes[a], nodes[b]);
            let wh = el.weight(b) * el.length(b);
            let (mut ga, mut gb) = (0.0, 0.0);
            for &(x, w) in Quadrature::Gauss3.rule() {
                let v = ua + (ub - ua) * x;
                let f = w * abs_pow(v.abs(), p - 2.0) * v;
                ga += f * (1.0 - x);
                gb += f * x;
            }
            if let Some(i) = el.dof(a) {
                g[i] += wh * ga;
            }
            if let Some(j) = el.dof(b) {
                g[j] += wh * gb;
            }
        }
        g
    }

    /// Directional derivative of [`Self::nonlinear_gradient`] at `u` along `d`.
    pub fn nonlinear_hessian_apply(&self, u: &Field, d: &[f64], p: f64) -> Vec<f64> {
        let el = self.elements;
        let nodes = el.node_values(u.values());
        let dn = el.node_values(d);
        let mut out = vec![0.0; el.dof_count()];
        for (a, b) in el.elements() {
            let wh = el.weight(b) * el.length(b);
            let (mut ga, mut gb) = (0.0, 0.0);
            for &(x, w) in Quadrature::Gauss3.rule() {
                let v = nodes[a] + (nodes[b] - nodes[a]) * x;
                let dv = dn[a] + (dn[b] - dn[a]) * x;
                let f = w * (p - 1.0) * abs_pow(v.abs(), p - 2.0) * dv;
                ga += f * (1.0 - x);
                gb += f * x;
            }
            if let Some(i) = el.dof(a) {
                out[i] += wh * ga;
            }
            if let Some(j) = el.dof(b) {
                out[j] += wh * gb;
            }
        }
        out
    }

    /// Gradient of the discrete energy, `K u - N_p(u)`.
    pub fn energy_gradient(&self, u: &Field, p: f64) -> Result<Field> {
        check_exponent(p)?;
        self.check(u)?;
        let mut g = self.stiffness.apply(u.values());
        for (gi, ni) in g.iter_mut().zip(self.nonlinear_gradient(u, p)) {
            *gi -= ni;
        }
        Ok(Field::from_vec_unchecked(g))
    }

    /// Lagrange multiplier `(‖u'‖² - ‖u‖_p^p) / μ`, obtained by testing the
    /// weak Euler–Lagrange equation `K u - N_p(u) = λ M u` with `u`.
    pub fn multiplier(&self, u: &Field, p: f64) -> Result<f64> {
        check_exponent(p)?;
        self.check(u)?;
        let mass = self.mass_of(u);
        if mass <= 0.0 {
            return Err(Error::Domain("multiplier undefined for a field of zero mass".into()));
        }
        Ok((self.dirichlet_of(u) - self.lp_power(u, p)) / mass)
    }

    /// `K u - N_p(u) - λ M u`.
    pub fn stationarity_residual(&self, u: &Field, p: f64, lambda: f64) -> Result<Vec<f64>> {
        let g = self.energy_gradient(u, p)?;
        let mu = self.mass.apply(u.values());
        Ok(g.values().iter().zip(mu).map(|(g, m)| g - lambda * m).collect())
    }

    pub fn h1_norm_sq(&self, u: &Field) -> f64 {
        self.dirichlet_of(u) + self.mass_of(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{build_mesh, build_radial_grid, LeafBc, TreeKind, TreeSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_edge(n: usize) -> ElementTree {
        let h = 1.0 / n as f64;
        ElementTree::new(
            (0..=n).map(|i| i.checked_sub(1)).collect(),
            vec![h; n + 1],
            vec![1.0; n + 1],
            vec![0; n + 1],
            vec![false; n + 1],
        )
        .unwrap()
    }

    fn random_field(domain: &impl Discretization, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = domain.elements().dof_count();
        Field::new(domain, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn constant_is_in_neumann_kernel() {
        let spec = TreeSpec::binary(TreeKind::Rooted, 3);
        let mesh = build_mesh(&spec, 4, LeafBc::Neumann).unwrap();
        let k = assemble_stiffness(&mesh);
        let ones = vec![2.5; mesh.dof_count()];
        assert!(k.quadratic_form(&ones).abs() < 1e-12);

        let dir = build_mesh(&spec, 4, LeafBc::Dirichlet).unwrap();
        let k = assemble_stiffness(&dir);
        assert!(k.quadratic_form(&vec![1.0; dir.dof_count()]) > 0.1);
    }

    #[test]
    fn hat_on_unit_edge_has_unit_slope() {
        let el = ElementTree::new(
            vec![None, Some(0)],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0, 1],
            vec![false, false],
        )
        .unwrap();
        let k = assemble_stiffness(&el);
        assert!((k.quadratic_form(&[0.0, 1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn radial_element_scales_with_generation_weight() {
        let spec = TreeSpec::binary(TreeKind::Rooted, 3);
        let g = build_radial_grid(&spec, 3, 2).unwrap();
        let k = assemble_stiffness(&g);
        // Elements of generation j have stiffness 2^j / h.
        for node in 1..g.dof_count() {
            let j = (node - 1) / 2;
            assert_eq!(k.off()[node], -(2f64.powi(j as i32)) * 2.0);
        }
    }

    #[test]
    fn mass_of_constant_is_total_length() {
        let spec = TreeSpec::binary(TreeKind::Rooted, 3);
        let mesh = build_mesh(&spec, 3, LeafBc::Neumann).unwrap();
        for lumped in [false, true] {
            let m = assemble_mass(&mesh, lumped);
            let ones = vec![1.0; mesh.dof_count()];
            assert!((m.quadratic_form(&ones) - 7.0).abs() < 1e-12);
            let c = vec![1.7; mesh.dof_count()];
            assert!((m.quadratic_form(&c) - 1.7 * 1.7 * 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn consistent_mass_is_exact_piecewise_quadratic_integral() {
        let spec = TreeSpec::new(TreeKind::Unrooted, 3, 0.8, 3).unwrap();
        let mesh = build_mesh(&spec, 3, LeafBc::Dirichlet).unwrap();
        let u = random_field(&mesh, 11);
        let model = FemModel::new(&mesh);
        let nodes = u.node_values(&mesh);
        let el = mesh.elements();
        let exact: f64 = el
            .elements()
            .map(|(a, b)| {
                let (x, y) = (nodes[a], nodes[b]);
                el.length(b) * (x * x + x * y + y * y) / 3.0
            })
            .sum();
        assert!((model.mass_of(&u) - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn lumped_and_consistent_mass_converge() {
        // Smooth function sampled on refined meshes: the gap shrinks like h^2.
        let spec = TreeSpec::binary(TreeKind::Rooted, 4);
        let mut gaps = Vec::new();
        for n in [4, 8, 16] {
            let mesh = build_mesh(&spec, n, LeafBc::Dirichlet).unwrap();
            let el = mesh.elements();
            let u = Field::from_fn(&mesh, |node| (0.4 * el.radius(node)).cos());
            let c = assemble_mass(&mesh, false).quadratic_form(u.values());
            let l = assemble_mass(&mesh, true).quadratic_form(u.values());
            gaps.push((c - l).abs());
        }
        assert!(gaps[1] < 0.3 * gaps[0] && gaps[2] < 0.3 * gaps[1], "{gaps:?}");
    }

    #[test]
    fn zero_field_has_zero_energy_and_gradient() {
        let mesh = build_mesh(&TreeSpec::binary(TreeKind::Rooted, 3), 4, LeafBc::Dirichlet).unwrap();
        let model = FemModel::new(&mesh);
        let z = Field::zeros(&mesh);
        let e = model.energy(&z, 4.0).unwrap();
        assert_eq!(e.energy, 0.0);
        assert!(model.energy_gradient(&z, 3.3).unwrap().values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn energy_rejects_bad_exponent() {
        let mesh = build_mesh(&TreeSpec::binary(TreeKind::Rooted, 2), 2, LeafBc::Dirichlet).unwrap();
        let model = FemModel::new(&mesh);
        let z = Field::zeros(&mesh);
        for p in [2.0, 6.0, 7.0, 1.0, f64::NAN] {
            assert!(matches!(model.energy(&z, p), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn gauss_potential_matches_exact_quartic_on_single_edge() {
        let el = single_edge(1);
        let u = Field::new(&el, vec![0.0, 1.0]).unwrap();
        let model = FemModel::new(&el);
        // ∫_0^1 t^4 = 1/5, and for an element with end values a, b the exact
        // integral of the quartic is h (a^4 + a^3 b + a^2 b^2 + a b^3 + b^4) / 5.
        let exact = 1.0 / 5.0;
        assert!((model.lp_power(&u, 4.0) - exact).abs() < 1e-14);

        let el = single_edge(7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vals: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let u = Field::new(&el, vals.clone()).unwrap();
        let h = 1.0 / 7.0;
        let exact: f64 = vals
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                h * (a.powi(4) + a.powi(3) * b + a * a * b * b + a * b.powi(3) + b.powi(4)) / 5.0
            })
            .sum();
        let model = FemModel::new(&el);
        assert!((model.lp_power(&u, 4.0) - exact).abs() < 1e-14 * exact.max(1.0));
    }

    #[test]
    fn kinetic_gradient_is_stiffness_times_u() {
        let mesh = build_mesh(&TreeSpec::binary(TreeKind::Unrooted, 2), 3, LeafBc::Dirichlet).unwrap();
        let model = FemModel::new(&mesh);
        let u = random_field(&mesh, 9).scaled(1e-6);
        // With tiny amplitude the nonlinear part is negligible.
        let g = model.energy_gradient(&u, 4.0).unwrap();
        let ku = model.stiffness.apply(u.values());
        for (a, b) in g.values().iter().zip(ku) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn multiplier_matches_direct_quadrature() {
        let mesh = build_mesh(&TreeSpec::binary(TreeKind::Rooted, 3), 5, LeafBc::Dirichlet).unwrap();
        let model = FemModel::new(&mesh);
        let u = random_field(&mesh, 21);
        let p = 3.5;
        let lambda = model.multiplier(&u, p).unwrap();
        let el = mesh.elements();
        let nodes = u.node_values(&mesh);
        let mut grad2 = 0.0;
        let mut lpp = 0.0;
        let mut mass = 0.0;
        for (a, b) in el.elements() {
            let h = el.length(b);
            let (x, y) = (nodes[a], nodes[b]);
            grad2 += (y - x) * (y - x) / h;
            mass += h * (x * x + x * y + y * y) / 3.0;
            lpp += Quadrature::Gauss5.integrate(0.0, h, |s| (x + (y - x) * s / h).abs().powf(p));
        }
        let direct = (grad2 - lpp) / mass;
        assert!((lambda - direct).abs() < 1e-5 * direct.abs().max(1.0), "{lambda} vs {direct}");
        assert!(model.multiplier(&Field::zeros(&mesh), p).is_err());
    }

    #[test]
    fn field_validation() {
        let mesh = build_mesh(&TreeSpec::binary(TreeKind::Rooted, 2), 2, LeafBc::Dirichlet).unwrap();
        assert!(Field::new(&mesh, vec![0.0; 3]).is_err());
        let mut v = vec![0.0; mesh.dof_count()];
        v[1] = f64::INFINITY;
        assert!(Field::new(&mesh, v).is_err());
    }
}
