//! Implicit domain description via weight functions.
//!
//! A domain is the positivity region of a weight expression built from
//! primitives (halfspaces, circles, raw expressions) and R-function
//! combinators. `r_and(a, b) = a + b - sqrt(a^2 + b^2)` vanishes exactly
//! where `min(a, b)` vanishes with the other argument nonnegative, and its
//! sign matches `sign(min(a, b))`, so the CSG tree stays smooth away from
//! primitive junctions while the zero set is the region boundary.

use serde::{Deserialize, Serialize};

use crate::bspline::{CellId, GridSpec};
use crate::error::{Error, Result};
use crate::expr::Expr;

/// Second-order jet: value, gradient and (symmetric) Hessian at a point.
/// The Hessian is stored as `[xx, xy, yy]`; 1D usage ignores the y slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 2],
    pub h: [f64; 3],
}

impl Jet {
    pub fn constant(v: f64) -> Jet {
        Jet { v, g: [0.0; 2], h: [0.0; 3] }
    }

    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            g: [self.g[0] + o.g[0], self.g[1] + o.g[1]],
            h: [self.h[0] + o.h[0], self.h[1] + o.h[1], self.h[2] + o.h[2]],
        }
    }

    fn sub(self, o: Jet) -> Jet {
        Jet {
            v: self.v - o.v,
            g: [self.g[0] - o.g[0], self.g[1] - o.g[1]],
            h: [self.h[0] - o.h[0], self.h[1] - o.h[1], self.h[2] - o.h[2]],
        }
    }

    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            g: [
                self.g[0] * o.v + self.v * o.g[0],
                self.g[1] * o.v + self.v * o.g[1],
            ],
            h: [
                self.h[0] * o.v + 2.0 * self.g[0] * o.g[0] + self.v * o.h[0],
                self.h[1] * o.v + self.g[0] * o.g[1] + self.g[1] * o.g[0] + self.v * o.h[1],
                self.h[2] * o.v + 2.0 * self.g[1] * o.g[1] + self.v * o.h[2],
            ],
        }
    }

    fn scale(self, c: f64) -> Jet {
        Jet {
            v: c * self.v,
            g: [c * self.g[0], c * self.g[1]],
            h: [c * self.h[0], c * self.h[1], c * self.h[2]],
        }
    }

    /// sqrt of a jet; caller guarantees `v > 0`.
    fn sqrt(self) -> Jet {
        let s = self.v.sqrt();
        let g0 = self.g[0] / (2.0 * s);
        let g1 = self.g[1] / (2.0 * s);
        Jet {
            v: s,
            g: [g0, g1],
            h: [
                (self.h[0] / 2.0 - g0 * g0) / s,
                (self.h[1] / 2.0 - g0 * g1) / s,
                (self.h[2] / 2.0 - g1 * g1) / s,
            ],
        }
    }
}

/// Raw-expression weight node; derivatives are precomputed symbolically.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprWeight {
    pub f: Expr,
    grad: Option<[Expr; 2]>,
    hess: Option<[Expr; 3]>,
}

impl ExprWeight {
    pub fn new(f: Expr) -> Self {
        let grad = f
            .differentiate(0)
            .and_then(|gx| f.differentiate(1).map(|gy| [gx, gy]))
            .ok();
        let hess = grad.as_ref().and_then(|[gx, gy]| {
            let hxx = gx.differentiate(0).ok()?;
            let hxy = gx.differentiate(1).ok()?;
            let hyy = gy.differentiate(1).ok()?;
            Some([hxx, hxy, hyy])
        });
        ExprWeight { f, grad, hess }
    }
}

/// CSG tree of implicit primitives combined by R-functions. Positive inside
/// the described region, zero on its boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightExpr {
    /// `normal . x + offset`
    Halfspace { normal: [f64; 2], offset: f64 },
    /// `sign * (|x - center|^2 - radius^2)`
    Circle { center: [f64; 2], radius: f64, sign: f64 },
    /// Product of child weights (superlinear decay at shared zeros).
    Product(Vec<WeightExpr>),
    /// R-conjunction `a + b - sqrt(a^2 + b^2)`.
    RAnd(Box<WeightExpr>, Box<WeightExpr>),
    /// R-disjunction `a + b + sqrt(a^2 + b^2)`.
    ROr(Box<WeightExpr>, Box<WeightExpr>),
    Negate(Box<WeightExpr>),
    Scale(f64, Box<WeightExpr>),
    /// Arbitrary expression in `x`, `y`.
    Expression(ExprWeight),
}

/// Squared-norm threshold below which an R-function junction counts as
/// non-differentiable.
const JUNCTION_EPS: f64 = 1e-30;

impl WeightExpr {
    pub fn rand(a: WeightExpr, b: WeightExpr) -> WeightExpr {
        WeightExpr::RAnd(Box::new(a), Box::new(b))
    }

    pub fn ror(a: WeightExpr, b: WeightExpr) -> WeightExpr {
        WeightExpr::ROr(Box::new(a), Box::new(b))
    }

    pub fn from_expr(src: &str) -> Result<WeightExpr> {
        Ok(WeightExpr::Expression(ExprWeight::new(Expr::parse(src)?)))
    }

    /// Value-only evaluation (used heavily by cell classification).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            WeightExpr::Halfspace { normal, offset } => {
                let mut v = *offset;
                for (d, n) in normal.iter().enumerate() {
                    v += n * x.get(d).copied().unwrap_or(0.0);
                }
                v
            }
            WeightExpr::Circle { center, radius, sign } => {
                let mut r2 = 0.0;
                for (d, c) in center.iter().enumerate() {
                    let dx = x.get(d).copied().unwrap_or(0.0) - c;
                    r2 += dx * dx;
                }
                sign * (r2 - radius * radius)
            }
            WeightExpr::Product(children) => children.iter().map(|c| c.eval(x)).product(),
            WeightExpr::RAnd(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                a + b - (a * a + b * b).sqrt()
            }
            WeightExpr::ROr(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                a + b + (a * a + b * b).sqrt()
            }
            WeightExpr::Negate(a) => -a.eval(x),
            WeightExpr::Scale(c, a) => c * a.eval(x),
            WeightExpr::Expression(e) => e.f.eval(x),
        }
    }

    /// Value, gradient and Hessian by exact chain rule through the tree.
    /// Fails at non-differentiable R-function junctions (both arguments
    /// simultaneously zero) and for non-smooth raw expressions.
    pub fn eval_jet(&self, x: &[f64]) -> Result<Jet> {
        match self {
            WeightExpr::Halfspace { normal, offset } => {
                let mut v = *offset;
                for (d, n) in normal.iter().enumerate() {
                    v += n * x.get(d).copied().unwrap_or(0.0);
                }
                Ok(Jet { v, g: *normal, h: [0.0; 3] })
            }
            WeightExpr::Circle { center, radius, sign } => {
                let px = x.first().copied().unwrap_or(0.0);
                let py = x.get(1).copied().unwrap_or(0.0);
                let dx = px - center[0];
                let dy = py - center[1];
                Ok(Jet {
                    v: sign * (dx * dx + dy * dy - radius * radius),
                    g: [2.0 * sign * dx, 2.0 * sign * dy],
                    h: [2.0 * sign, 0.0, 2.0 * sign],
                })
            }
            WeightExpr::Product(children) => {
                let mut acc = Jet::constant(1.0);
                for c in children {
                    acc = acc.mul(c.eval_jet(x)?);
                }
                Ok(acc)
            }
            WeightExpr::RAnd(a, b) | WeightExpr::ROr(a, b) => {
                let ja = a.eval_jet(x)?;
                let jb = b.eval_jet(x)?;
                let sum_sq = ja.mul(ja).add(jb.mul(jb));
                if sum_sq.v < JUNCTION_EPS {
                    return Err(Error::NonDifferentiableWeight {
                        x: x.first().copied().unwrap_or(0.0),
                        y: x.get(1).copied().unwrap_or(0.0),
                    });
                }
                let root = sum_sq.sqrt();
                Ok(match self {
                    WeightExpr::RAnd(_, _) => ja.add(jb).sub(root),
                    _ => ja.add(jb).add(root),
                })
            }
            WeightExpr::Negate(a) => Ok(a.eval_jet(x)?.scale(-1.0)),
            WeightExpr::Scale(c, a) => Ok(a.eval_jet(x)?.scale(*c)),
            WeightExpr::Expression(e) => {
                let grad = e.grad.as_ref().ok_or_else(|| {
                    Error::Expr(crate::expr::ExprError::NonDifferentiable(
                        "weight expression".into(),
                    ))
                })?;
                let hess = e.hess.as_ref().ok_or_else(|| {
                    Error::Expr(crate::expr::ExprError::NonDifferentiable(
                        "weight expression".into(),
                    ))
                })?;
                Ok(Jet {
                    v: e.f.eval(x),
                    g: [grad[0].eval(x), grad[1].eval(x)],
                    h: [hess[0].eval(x), hess[1].eval(x), hess[2].eval(x)],
                })
            }
        }
    }

    /// Gradient of the weight.
    pub fn grad(&self, x: &[f64]) -> Result<[f64; 2]> {
        Ok(self.eval_jet(x)?.g)
    }
}

/// Cell classification against the domain indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Interior,
    Boundary,
    Exterior,
}

/// Implicit description of the domain and its essential boundary.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    /// Domain indicator: `Omega = { x : w_omega(x) > 0 }`.
    pub w_omega: WeightExpr,
    /// Dirichlet weight, positive inside, vanishing linearly on Gamma.
    pub w_dirichlet: WeightExpr,
    /// Axis-aligned box containing Omega, per-dimension `(lo, hi)`.
    pub bounding_box: Vec<(f64, f64)>,
    pub dim: usize,
}

/// Default sample depth for classification: a `(2^3 + 1)^m` lattice.
pub const DEFAULT_CLASSIFY_DEPTH: u32 = 3;

/// Cells whose weight never exceeds this magnitude are treated as grazing
/// and conservatively classified Boundary.
const GRAZING_EPS: f64 = 1e-12;

impl DomainSpec {
    pub fn new(
        w_omega: WeightExpr,
        w_dirichlet: WeightExpr,
        bounding_box: Vec<(f64, f64)>,
    ) -> Self {
        let dim = bounding_box.len();
        DomainSpec { w_omega, w_dirichlet, bounding_box, dim }
    }

    fn sample_box(&self, lo: &[f64], hi: &[f64], depth: u32) -> (f64, f64, f64) {
        let steps = (1usize << depth) + 1;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut max_jump: f64 = 0.0;
        let mut point = [0.0f64; 2];
        let lattice_1d = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (steps - 1) as f64;
        if self.dim == 1 {
            let mut prev = 0.0;
            for i in 0..steps {
                point[0] = lattice_1d(lo[0], hi[0], i);
                let v = self.w_omega.eval(&point[..1]);
                min = min.min(v);
                max = max.max(v);
                if i > 0 {
                    max_jump = max_jump.max((v - prev).abs());
                }
                prev = v;
            }
        } else {
            let mut rows = vec![0.0f64; steps * steps];
            for i in 0..steps {
                point[0] = lattice_1d(lo[0], hi[0], i);
                for j in 0..steps {
                    point[1] = lattice_1d(lo[1], hi[1], j);
                    let v = self.w_omega.eval(&point);
                    rows[i * steps + j] = v;
                    min = min.min(v);
                    max = max.max(v);
                    if i > 0 {
                        max_jump = max_jump.max((v - rows[(i - 1) * steps + j]).abs());
                    }
                    if j > 0 {
                        max_jump = max_jump.max((v - rows[i * steps + j - 1]).abs());
                    }
                }
            }
        }
        (min, max, max_jump)
    }

    /// Classify an arbitrary axis-aligned box by sign sampling on a
    /// `(2^depth + 1)^m` lattice.
    pub fn classify_box(&self, lo: &[f64], hi: &[f64], depth: u32) -> CellClass {
        let (min, max, _) = self.sample_box(lo, hi, depth);
        if min.abs().max(max.abs()) < GRAZING_EPS {
            CellClass::Boundary
        } else if min >= 0.0 {
            CellClass::Interior
        } else if max <= 0.0 {
            CellClass::Exterior
        } else {
            CellClass::Boundary
        }
    }

    /// Conservative variant used inside cut-cell quadrature recursion:
    /// a box only counts as resolved when the extreme sample clears the
    /// largest adjacent-sample jump, so a boundary sliver the lattice
    /// missed cannot freeze an Interior/Exterior verdict.
    pub fn classify_box_conservative(&self, lo: &[f64], hi: &[f64], depth: u32) -> CellClass {
        let (min, max, jump) = self.sample_box(lo, hi, depth);
        if min > jump {
            CellClass::Interior
        } else if max < -jump {
            CellClass::Exterior
        } else {
            CellClass::Boundary
        }
    }

    /// Classify the grid cell by sampling `w_omega` over it.
    pub fn classify_cell(&self, cell: &CellId, grid: &GridSpec, depth: u32) -> CellClass {
        let lo = cell.lower(grid.h);
        let hi = cell.upper(grid.h);
        self.classify_box(&lo[..grid.m], &hi[..grid.m], depth)
    }

    /// True if `x` lies in the open domain.
    pub fn inside(&self, x: &[f64]) -> bool {
        self.w_omega.eval(x) > 0.0
    }
}

// ---------------------------------------------------------------------------
// builtin domains
// ---------------------------------------------------------------------------

fn unit_circle() -> WeightExpr {
    WeightExpr::Circle { center: [0.0, 0.0], radius: 1.0, sign: 1.0 }
}

fn upper_bounds_square() -> WeightExpr {
    WeightExpr::rand(
        WeightExpr::Halfspace { normal: [-1.0, 0.0], offset: 1.0 }, // 1 - x
        WeightExpr::Halfspace { normal: [0.0, -1.0], offset: 1.0 }, // 1 - y
    )
}

/// The corner of the unit square outside the unit circle:
/// `{ (x, y) in (0,1)^2 : x^2 + y^2 - 1 > 0 }`.
///
/// The domain indicator combines the pieces with an R-function (robust sign
/// logic for cell classification); the Dirichlet weight is their product,
/// which stays smooth at the boundary junctions and so preserves the full
/// approximation order of the weighted basis.
pub fn square_minus_quarter_disk() -> DomainSpec {
    let w_omega = WeightExpr::rand(unit_circle(), upper_bounds_square());
    let w_dirichlet = WeightExpr::Product(vec![
        unit_circle(),
        WeightExpr::Halfspace { normal: [-1.0, 0.0], offset: 1.0 },
        WeightExpr::Halfspace { normal: [0.0, -1.0], offset: 1.0 },
    ]);
    DomainSpec::new(w_omega, w_dirichlet, vec![(0.0, 1.0), (0.0, 1.0)])
}

/// The quarter disk `{ x, y > 0, x^2 + y^2 < 1 }`, with the same R-function
/// indicator / product Dirichlet weight split as the square-minus-disk
/// domain.
pub fn quarter_disk() -> DomainSpec {
    let inside_circle = WeightExpr::Circle { center: [0.0, 0.0], radius: 1.0, sign: -1.0 };
    let positive_quadrant = WeightExpr::rand(
        WeightExpr::Halfspace { normal: [1.0, 0.0], offset: 0.0 },
        WeightExpr::Halfspace { normal: [0.0, 1.0], offset: 0.0 },
    );
    let w_omega = WeightExpr::rand(inside_circle.clone(), positive_quadrant);
    let w_dirichlet = WeightExpr::Product(vec![
        inside_circle,
        WeightExpr::Halfspace { normal: [1.0, 0.0], offset: 0.0 },
        WeightExpr::Halfspace { normal: [0.0, 1.0], offset: 0.0 },
    ]);
    DomainSpec::new(w_omega, w_dirichlet, vec![(0.0, 1.0), (0.0, 1.0)])
}

/// The interval `(0, 1)`.
pub fn unit_interval() -> DomainSpec {
    let w = WeightExpr::rand(
        WeightExpr::Halfspace { normal: [1.0, 0.0], offset: 0.0 },
        WeightExpr::Halfspace { normal: [-1.0, 0.0], offset: 1.0 },
    );
    DomainSpec::new(w.clone(), w, vec![(0.0, 1.0)])
}

/// Names accepted in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuiltinDomain {
    #[serde(rename = "square-minus-quarter-disk")]
    SquareMinusQuarterDisk,
    #[serde(rename = "quarter-disk")]
    QuarterDisk,
    #[serde(rename = "unit-interval")]
    UnitInterval,
}

impl BuiltinDomain {
    pub fn build(self) -> DomainSpec {
        match self {
            BuiltinDomain::SquareMinusQuarterDisk => square_minus_quarter_disk(),
            BuiltinDomain::QuarterDisk => quarter_disk(),
            BuiltinDomain::UnitInterval => unit_interval(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn circle_primitive_value() {
        let c = WeightExpr::Circle { center: [0.0, 0.0], radius: 1.0, sign: 1.0 };
        assert_relative_eq!(c.eval(&[0.9, 0.9]), 0.62, epsilon = 1e-12);
    }

    #[test]
    fn rand_vanishes_with_one_argument() {
        let w = WeightExpr::rand(
            WeightExpr::Expression(ExprWeight::new(Expr::Num(1.0))),
            WeightExpr::Expression(ExprWeight::new(Expr::Num(0.0))),
        );
        assert_eq!(w.eval(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn section5_weight_boundary_point() {
        let dom = square_minus_quarter_disk();
        assert!(dom.w_dirichlet.eval(&[1.0, 0.5]).abs() < 1e-12);
    }

    #[test]
    fn section5_weight_vanishes_on_boundary() {
        let dom = square_minus_quarter_disk();
        // arc samples inside the square
        for i in 0..=99 {
            let t = i as f64 / 99.0 * std::f64::consts::FRAC_PI_2;
            let p = [t.cos(), t.sin()];
            assert!(dom.w_dirichlet.eval(&p).abs() < 1e-9, "arc point {p:?}");
        }
        // segments x = 1 and y = 1
        for i in 0..=99 {
            let s = i as f64 / 99.0;
            assert!(dom.w_dirichlet.eval(&[1.0, s]).abs() < 1e-9);
            assert!(dom.w_dirichlet.eval(&[s, 1.0]).abs() < 1e-9);
        }
        // strictly positive inside
        assert!(dom.w_dirichlet.eval(&[0.95, 0.95]) > 0.0);
    }

    #[test]
    fn circle_gradient() {
        let c = WeightExpr::Circle { center: [0.0, 0.0], radius: 1.0, sign: 1.0 };
        let g = c.grad(&[0.6, 0.8]).unwrap();
        assert_relative_eq!(g[0], 1.2, epsilon = 1e-14);
        assert_relative_eq!(g[1], 1.6, epsilon = 1e-14);
    }

    #[test]
    fn rand_partials() {
        // d/da r_and at (a, b) = (3, 4) is 1 - 3/5
        let w = WeightExpr::rand(
            WeightExpr::Halfspace { normal: [1.0, 0.0], offset: 0.0 },
            WeightExpr::Halfspace { normal: [0.0, 1.0], offset: 0.0 },
        );
        let g = w.grad(&[3.0, 4.0]).unwrap();
        assert_relative_eq!(g[0], 0.4, epsilon = 1e-14);
        assert_relative_eq!(g[1], 1.0 - 0.8, epsilon = 1e-14);
    }

    #[test]
    fn junction_is_flagged() {
        let w = WeightExpr::rand(
            WeightExpr::Halfspace { normal: [1.0, 0.0], offset: 0.0 },
            WeightExpr::Halfspace { normal: [0.0, 1.0], offset: 0.0 },
        );
        assert!(matches!(
            w.eval_jet(&[0.0, 0.0]),
            Err(Error::NonDifferentiableWeight { .. })
        ));
    }

    #[test]
    fn classify_section5_cells() {
        let dom = square_minus_quarter_disk();
        let grid = GridSpec::new(0.25, 2, 2, [(-1, 4), (-1, 4)]).unwrap();
        let class = |l: [i64; 2]| dom.classify_cell(&CellId::new(l), &grid, 3);
        assert_eq!(class([3, 3]), CellClass::Interior); // [0.75, 1]^2
        assert_eq!(class([0, 0]), CellClass::Exterior); // [0, 0.25]^2
        assert_eq!(class([2, 2]), CellClass::Boundary); // [0.5, 0.75]^2
    }

    #[test]
    fn classification_stable_under_refinement() {
        let dom = square_minus_quarter_disk();
        let grid = GridSpec::new(0.25, 2, 2, [(-1, 4), (-1, 4)]).unwrap();
        for l0 in 0..4 {
            for l1 in 0..4 {
                let cell = CellId::new([l0, l1]);
                let c3 = dom.classify_cell(&cell, &grid, 3);
                let c5 = dom.classify_cell(&cell, &grid, 5);
                if c3 != CellClass::Boundary {
                    assert_eq!(c3, c5, "cell {cell:?} flipped under refinement");
                }
            }
        }
    }

    // random CSG trees over halfspaces/circles for sign and gradient checks
    fn arb_weight(depth: u32) -> BoxedStrategy<WeightExpr> {
        let leaf = prop_oneof![
            (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b, c)| {
                WeightExpr::Halfspace { normal: [a, b + 0.1], offset: c }
            }),
            (-0.5f64..0.5, -0.5f64..0.5, 0.3f64..1.5, prop_oneof![Just(1.0), Just(-1.0)])
                .prop_map(|(cx, cy, r, s)| WeightExpr::Circle {
                    center: [cx, cy],
                    radius: r,
                    sign: s
                }),
        ];
        leaf.prop_recursive(depth, 16, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| WeightExpr::rand(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| WeightExpr::ror(a, b)),
                inner.clone().prop_map(|a| WeightExpr::Negate(Box::new(a))),
                (0.2f64..3.0, inner).prop_map(|(c, a)| WeightExpr::Scale(c, Box::new(a))),
            ]
        })
        .boxed()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn gradient_matches_finite_differences(
            w in arb_weight(4),
            x in -1.0f64..1.0,
            y in -1.0f64..1.0,
        ) {
            if let Ok(jet) = w.eval_jet(&[x, y]) {
                let step = 1e-6;
                let fdx = (w.eval(&[x + step, y]) - w.eval(&[x - step, y])) / (2.0 * step);
                let fdy = (w.eval(&[x, y + step]) - w.eval(&[x, y - step])) / (2.0 * step);
                let scale = jet.g[0].abs().max(jet.g[1].abs()).max(1.0);
                prop_assert!((jet.g[0] - fdx).abs() <= 1e-5 * scale, "{} vs {}", jet.g[0], fdx);
                prop_assert!((jet.g[1] - fdy).abs() <= 1e-5 * scale, "{} vs {}", jet.g[1], fdy);
            }
        }

        #[test]
        fn hessian_matches_finite_differences(
            w in arb_weight(3),
            x in -1.0f64..1.0,
            y in -1.0f64..1.0,
        ) {
            if let Ok(jet) = w.eval_jet(&[x, y]) {
                // guard against nearby junctions where the FD stencil breaks
                let step = 1e-5;
                let ok = [[x + step, y], [x - step, y], [x, y + step], [x, y - step]]
                    .iter()
                    .all(|p| w.eval_jet(p).is_ok());
                if ok {
                    let gxp = w.eval_jet(&[x + step, y]).unwrap().g;
                    let gxm = w.eval_jet(&[x - step, y]).unwrap().g;
                    let gyp = w.eval_jet(&[x, y + step]).unwrap().g;
                    let gym = w.eval_jet(&[x, y - step]).unwrap().g;
                    let fd_xx = (gxp[0] - gxm[0]) / (2.0 * step);
                    let fd_xy = (gyp[0] - gym[0]) / (2.0 * step);
                    let fd_yy = (gyp[1] - gym[1]) / (2.0 * step);
                    let scale = jet.h.iter().fold(1.0f64, |a, b| a.max(b.abs()));
                    prop_assert!((jet.h[0] - fd_xx).abs() <= 1e-3 * scale);
                    prop_assert!((jet.h[1] - fd_xy).abs() <= 1e-3 * scale);
                    prop_assert!((jet.h[2] - fd_yy).abs() <= 1e-3 * scale);
                }
            }
        }

        #[test]
        fn rand_sign_matches_min(
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let w = WeightExpr::rand(
                WeightExpr::Halfspace { normal: [1.0, 0.0], offset: 0.0 },
                WeightExpr::Halfspace { normal: [0.0, 1.0], offset: 0.0 },
            );
            let v = w.eval(&[a, b]);
            let m = a.min(b);
            prop_assert!(v <= m + 1e-12);
            if m.abs() > 1e-9 {
                prop_assert_eq!(v > 0.0, m > 0.0, "r_and {} vs min {}", v, m);
            }
        }
    }
}
