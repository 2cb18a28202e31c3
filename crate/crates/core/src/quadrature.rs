//! Gauss–Legendre rules on the reference interval [0, 1].

/// Rule used to integrate nonlinear functions of a piecewise-linear field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadrature {
    /// 3-point Gauss–Legendre, exact for polynomials of degree 5.
    Gauss3,
    /// 5-point Gauss–Legendre, exact for polynomials of degree 9.
    Gauss5,
    /// Trapezoidal rule on the element endpoints.
    Nodal,
}

const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_0, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332_0, 0.118_463_442_528_094_5),
];

const NODAL: [(f64, f64); 2] = [(0.0, 0.5), (1.0, 0.5)];

impl Quadrature {
    /// `(point, weight)` pairs on [0, 1]; weights sum to one.
    pub fn rule(self) -> &'static [(f64, f64)] {
        match self {
            Quadrature::Gauss3 => &GAUSS3,
            Quadrature::Gauss5 => &GAUSS5,
            Quadrature::Nodal => &NODAL,
        }
    }

    /// Integral of `f` over [a, b].
    pub fn integrate(self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let len = b - a;
        self.rule().iter().map(|&(x, w)| w * f(a + len * x)).sum::<f64>() * len
    }
}
