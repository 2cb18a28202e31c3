//! Symmetric operators whose sparsity pattern is a tree.
//!
//! A piecewise-linear discretization on a tree couples every DOF only to its
//! parent and children, so a symmetric operator is fully described by its
//! diagonal and one off-diagonal value per non-root DOF. Eliminating DOFs
//! from the leaves towards the root produces no fill, which gives exact
//! `O(N)` factorizations and Sylvester inertia counts.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymOperator {
    diag: Vec<f64>,
    /// `off[i]` couples DOF `i` with `parent[i]`.
    off: Vec<f64>,
    parent: Vec<Option<usize>>,
}

impl SparseSymOperator {
    pub fn zeros(parent: Vec<Option<usize>>) -> Self {
        let n = parent.len();
        debug_assert!(parent.iter().enumerate().all(|(i, p)| p.is_none_or(|p| p < i)));
        SparseSymOperator {
            diag: vec![0.0; n],
            off: vec![0.0; n],
            parent,
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn parent(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub(crate) fn add_diag(&mut self, i: usize, v: f64) {
        self.diag[i] += v;
    }

    pub(crate) fn add_off(&mut self, i: usize, v: f64) {
        self.off[i] += v;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        for i in 0..self.dim() {
            y[i] = self.diag[i] * x[i];
        }
        for i in 0..self.dim() {
            if let Some(p) = self.parent[i] {
                y[i] += self.off[i] * x[p];
                y[p] += self.off[i] * x[i];
            }
        }
    }

    /// `x^T A x`, written as `Σ r_i x_i² − Σ a_ip (x_i − x_p)²` with row
    /// sums `r_i`, so stiffness forms sum nonnegative terms instead of
    /// cancelling large ones. Compensated summation keeps the result accurate
    /// to a few ulps on large meshes.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let rows = self.row_sums();
        let mut s = CompensatedSum::default();
        for i in 0..self.dim() {
            s.add(rows[i] * x[i] * x[i]);
            if let Some(p) = self.parent[i] {
                let d = x[i] - x[p];
                s.add(-self.off[i] * d * d);
            }
        }
        s.value()
    }

    /// `x^T A y`.
    pub fn bilinear_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let rows = self.row_sums();
        let mut s = CompensatedSum::default();
        for i in 0..self.dim() {
            s.add(rows[i] * x[i] * y[i]);
            if let Some(p) = self.parent[i] {
                s.add(-self.off[i] * (x[i] - x[p]) * (y[i] - y[p]));
            }
        }
        s.value()
    }

    fn row_sums(&self) -> Vec<f64> {
        let mut rows = self.diag.clone();
        for i in 0..self.dim() {
            if let Some(p) = self.parent[i] {
                rows[i] += self.off[i];
                rows[p] += self.off[i];
            }
        }
        rows
    }

    /// `a * self + b * other`; both operators must share the same pattern.
    pub fn combine(&self, a: f64, other: &SparseSymOperator, b: f64) -> SparseSymOperator {
        assert_eq!(self.parent, other.parent, "operators must share a pattern");
        SparseSymOperator {
            diag: self.diag.iter().zip(&other.diag).map(|(x, y)| a * x + b * y).collect(),
            off: self.off.iter().zip(&other.off).map(|(x, y)| a * x + b * y).collect(),
            parent: self.parent.clone(),
        }
    }

    /// Nonzero entries `(row, col, value)` of the full symmetric matrix.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(3 * self.dim());
        for i in 0..self.dim() {
            out.push((i, i, self.diag[i]));
            if let Some(p) = self.parent[i] {
                out.push((i, p, self.off[i]));
                out.push((p, i, self.off[i]));
            }
        }
        out
    }

    /// Leaf-to-root `LDL^T` factorization.
    pub fn factor(&self) -> TreeFactor {
        let n = self.dim();
        let mut pivot = self.diag.clone();
        let scale = self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);
        for i in (0..n).rev() {
            if pivot[i] == 0.0 {
                pivot[i] = f64::EPSILON * scale;
            }
            if let Some(p) = self.parent[i] {
                pivot[p] -= self.off[i] * (self.off[i] / pivot[i]);
            }
        }
        TreeFactor {
            pivot,
            off: self.off.clone(),
            parent: self.parent.clone(),
        }
    }

    /// Factor of `self - shift * other`.
    pub fn factor_shifted(&self, other: &SparseSymOperator, shift: f64) -> TreeFactor {
        self.combine(1.0, other, -shift).factor()
    }
}

/// Neumaier's compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Accurate dot product.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = CompensatedSum::default();
    for (x, y) in a.iter().zip(b) {
        s.add(x * y);
    }
    s.value()
}

#[derive(Clone, Debug)]
pub struct TreeFactor {
    pivot: Vec<f64>,
    off: Vec<f64>,
    parent: Vec<Option<usize>>,
}

impl TreeFactor {
    /// Number of negative pivots, which equals the number of negative
    /// eigenvalues of the factored matrix.
    pub fn negative_count(&self) -> usize {
        self.pivot.iter().filter(|&&d| d < 0.0).count()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.negative_count() == 0
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.pivot.len();
        assert_eq!(rhs.len(), n);
        let mut y = rhs.to_vec();
        for i in (0..n).rev() {
            if let Some(p) = self.parent[i] {
                y[p] -= self.off[i] / self.pivot[i] * y[i];
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            let upstream = self.parent[i].map_or(0.0, |p| self.off[i] * x[p]);
            x[i] = (y[i] - upstream) / self.pivot[i];
        }
        x
    }

    pub fn try_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let x = self.solve(rhs);
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::numeric("tree factor produced non-finite solution"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tree_operator(n: usize, seed: u64) -> SparseSymOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parent: Vec<Option<usize>> = (0..n)
            .map(|i| if i == 0 { None } else { Some(rng.random_range(0..i)) })
            .collect();
        let mut op = SparseSymOperator::zeros(parent);
        for i in 0..n {
            op.add_diag(i, rng.random_range(-1.0..1.0));
            if i > 0 {
                op.add_off(i, rng.random_range(-1.0..1.0));
            }
        }
        op
    }

    fn dense(op: &SparseSymOperator) -> Vec<Vec<f64>> {
        let n = op.dim();
        let mut a = vec![vec![0.0; n]; n];
        for (i, j, v) in op.triplets() {
            a[i][j] += v;
        }
        a
    }

    /// Eigenvalues of a small dense symmetric matrix by cyclic Jacobi rotations.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    #[test]
    fn apply_matches_dense() {
        let op = random_tree_operator(12, 3);
        let a = dense(&op);
        let x: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let y = op.apply(&x);
        for i in 0..12 {
            let yi: f64 = (0..12).map(|j| a[i][j] * x[j]).sum();
            assert!((y[i] - yi).abs() < 1e-14);
        }
        assert!((op.quadratic_form(&x) - op.bilinear_form(&x, &x)).abs() < 1e-14);
    }

    #[test]
    fn inertia_matches_dense_spectrum() {
        for seed in 0..20 {
            let op = random_tree_operator(9, seed);
            let eig = jacobi_eigenvalues(dense(&op));
            let negative = eig.iter().filter(|&&e| e < 0.0).count();
            assert_eq!(op.factor().negative_count(), negative, "seed {seed}");
        }
    }

    proptest! {
        #[test]
        fn solve_inverts_apply(seed in 0u64..500, n in 1usize..40) {
            let mut op = random_tree_operator(n, seed);
            // Diagonal dominance keeps the factorization well conditioned.
            for i in 0..n {
                op.add_diag(i, 4.0);
            }
            let x: Vec<f64> = (0..n).map(|i| ((i * 7 + seed as usize) % 11) as f64 - 5.0).collect();
            let b = op.apply(&x);
            let y = op.factor().solve(&b);
            for i in 0..n {
                prop_assert!((x[i] - y[i]).abs() < 1e-10);
            }
        }
    }
}
