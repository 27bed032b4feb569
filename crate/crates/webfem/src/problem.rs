//! The coupled elliptic problem: diffusion matrix, advection vector,
//! reaction coefficients and right-hand sides as expression trees, plus the
//! sufficient well-posedness gate
//! `kappa >= alpha/2 + B^2/(2 alpha)`.

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::expr::Expr;

/// Symmetric diffusion matrix; only the upper triangle is stored
/// (`a11`, `a12`, `a22`). 1D problems use `a11` only.
#[derive(Debug, Clone)]
pub struct DiffusionMatrix {
    pub a11: Expr,
    pub a12: Expr,
    pub a22: Expr,
}

impl DiffusionMatrix {
    pub fn isotropic(e: Expr) -> Self {
        DiffusionMatrix { a11: e.clone(), a12: Expr::num(0.0), a22: e }
    }

    pub fn identity() -> Self {
        DiffusionMatrix::isotropic(Expr::num(1.0))
    }

    /// Entries `[[a11, a12], [a12, a22]]` at a point.
    pub fn eval(&self, x: &[f64]) -> [[f64; 2]; 2] {
        let a11 = self.a11.eval(x);
        let a12 = self.a12.eval(x);
        let a22 = self.a22.eval(x);
        [[a11, a12], [a12, a22]]
    }

    /// Smallest eigenvalue at a point (closed form for the symmetric 2x2).
    pub fn min_eigenvalue(&self, x: &[f64], dim: usize) -> f64 {
        let m = self.eval(x);
        if dim == 1 {
            return m[0][0];
        }
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[0][1];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        tr / 2.0 - disc
    }
}

/// The coupled system: two components sharing diffusion `P`, advection `R`
/// and reaction `q1`, coupled skew-symmetrically through `q2`.
#[derive(Debug, Clone)]
pub struct CoupledProblem {
    pub dom: DomainSpec,
    pub p: DiffusionMatrix,
    pub r: [Expr; 2],
    pub q1: Expr,
    pub q2: Expr,
    pub f1: Expr,
    pub f2: Expr,
    /// Exact solution pair for manufactured / verification runs.
    pub exact: Option<(Expr, Expr)>,
}

impl CoupledProblem {
    pub fn dim(&self) -> usize {
        self.dom.dim
    }

    /// Replace `f1`, `f2` with the symbolically computed strong operator
    /// applied to the exact solution.
    pub fn with_manufactured_rhs(mut self) -> Result<Self> {
        let (f1, f2) = manufactured_rhs(&self)?;
        self.f1 = f1;
        self.f2 = f2;
        Ok(self)
    }
}

/// Outcome of the Theorem-style sufficient condition for unique solvability,
/// certified on a sample lattice.
#[derive(Debug, Clone)]
pub struct WellposednessReport {
    /// Ellipticity lower bound: min over samples of the smallest eigenvalue of P.
    pub alpha: f64,
    /// Sum of squared sup-norms of the advection components.
    pub bsq: f64,
    /// Min over samples of `q1`.
    pub kappa: f64,
    /// `alpha/2 + bsq/(2 alpha)`.
    pub threshold: f64,
    pub pass: bool,
    pub sample_count: usize,
}

impl std::fmt::Display for WellposednessReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "well-posedness gate ({} samples)", self.sample_count)?;
        writeln!(f, "  alpha (ellipticity)   = {:.6}", self.alpha)?;
        writeln!(f, "  B^2 (advection)       = {:.6}", self.bsq)?;
        writeln!(f, "  kappa (inf q1)        = {:.6}", self.kappa)?;
        writeln!(f, "  threshold             = {:.6}", self.threshold)?;
        write!(f, "  result                = {}", if self.pass { "PASS" } else { "FAIL" })
    }
}

/// Evaluate the gate on a `resolution^m` lattice over the bounding box,
/// restricted to points with `w_omega > 0`.
///
/// Failure is advisory (the condition is sufficient, not necessary); a
/// non-elliptic sample is a hard error.
pub fn check_wellposedness(p: &CoupledProblem, resolution: usize) -> Result<WellposednessReport> {
    let resolution = resolution.max(8);
    let dim = p.dim();
    let bb = &p.dom.bounding_box;
    let mut alpha = f64::INFINITY;
    let mut kappa = f64::INFINITY;
    let mut sup_r = [0.0f64; 2];
    let mut count = 0usize;

    let mut visit = |pt: &[f64]| {
        if !p.dom.inside(pt) {
            return;
        }
        count += 1;
        alpha = alpha.min(p.p.min_eigenvalue(pt, dim));
        kappa = kappa.min(p.q1.eval(pt));
        for d in 0..dim {
            sup_r[d] = sup_r[d].max(p.r[d].eval(pt).abs());
        }
    };

    let coord = |range: (f64, f64), i: usize| {
        range.0 + (range.1 - range.0) * (i as f64 + 0.5) / resolution as f64
    };
    if dim == 1 {
        for i in 0..resolution {
            visit(&[coord(bb[0], i)]);
        }
    } else {
        for i in 0..resolution {
            for j in 0..resolution {
                visit(&[coord(bb[0], i), coord(bb[1], j)]);
            }
        }
    }

    if count == 0 {
        return Err(Error::GateFailed("no sample point lies inside the domain".into()));
    }
    if alpha <= 0.0 {
        return Err(Error::NotElliptic(alpha));
    }
    let bsq: f64 = sup_r.iter().map(|s| s * s).sum();
    let threshold = alpha / 2.0 + bsq / (2.0 * alpha);
    Ok(WellposednessReport {
        alpha,
        bsq,
        kappa,
        threshold,
        pass: kappa >= threshold,
        sample_count: count,
    })
}

/// `f_c = -div(P grad u_c) + R . grad u_c + q1 u_c +/- q2 u_other`,
/// built by symbolic differentiation of the exact solution.
pub fn manufactured_rhs(p: &CoupledProblem) -> Result<(Expr, Expr)> {
    let (u1, u2) = p.exact.as_ref().ok_or(Error::MissingExactSolution)?;
    let dim = p.dim();
    let lu1 = apply_scalar_operator(p, u1, dim)?;
    let lu2 = apply_scalar_operator(p, u2, dim)?;
    let f1 = Expr::Add(
        Box::new(lu1),
        Box::new(Expr::Add(
            Box::new(Expr::Mul(Box::new(p.q1.clone()), Box::new(u1.clone()))),
            Box::new(Expr::Mul(Box::new(p.q2.clone()), Box::new(u2.clone()))),
        )),
    )
    .simplified();
    let f2 = Expr::Add(
        Box::new(lu2),
        Box::new(Expr::Sub(
            Box::new(Expr::Mul(Box::new(p.q1.clone()), Box::new(u2.clone()))),
            Box::new(Expr::Mul(Box::new(p.q2.clone()), Box::new(u1.clone()))),
        )),
    )
    .simplified();
    Ok((f1, f2))
}

/// `-div(P grad u) + R . grad u` for a single component.
fn apply_scalar_operator(p: &CoupledProblem, u: &Expr, dim: usize) -> Result<Expr> {
    let p_entry = |i: usize, j: usize| -> &Expr {
        match (i, j) {
            (0, 0) => &p.p.a11,
            (1, 1) => &p.p.a22,
            _ => &p.p.a12,
        }
    };
    let mut acc = Expr::num(0.0);
    for i in 0..dim {
        // flux component: sum_j P_ij du/dx_j
        let mut flux = Expr::num(0.0);
        for j in 0..dim {
            flux = Expr::Add(
                Box::new(flux),
                Box::new(Expr::Mul(
                    Box::new(p_entry(i, j).clone()),
                    Box::new(u.differentiate(j)?),
                )),
            );
        }
        acc = Expr::Sub(Box::new(acc), Box::new(flux.differentiate(i)?));
        acc = Expr::Add(
            Box::new(acc),
            Box::new(Expr::Mul(Box::new(p.r[i].clone()), Box::new(u.differentiate(i)?))),
        );
    }
    Ok(acc.simplified())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn base_problem() -> CoupledProblem {
        CoupledProblem {
            dom: domain::square_minus_quarter_disk(),
            p: DiffusionMatrix::identity(),
            r: [Expr::num(0.0), Expr::num(0.0)],
            q1: Expr::num(1.0),
            q2: Expr::num(0.0),
            f1: Expr::num(0.0),
            f2: Expr::num(0.0),
            exact: None,
        }
    }

    #[test]
    fn gate_substitution_examples() {
        // P = I, R = 0, q1 = 1: alpha 1, B^2 0, threshold 0.5, pass
        let p = base_problem();
        let rep = check_wellposedness(&p, 16).unwrap();
        assert_relative_eq!(rep.alpha, 1.0);
        assert_relative_eq!(rep.bsq, 0.0);
        assert_relative_eq!(rep.threshold, 0.5);
        assert!(rep.pass);

        // P = I, R = (1, 0), q1 = 0.9: threshold 1.0, fail
        let mut p = base_problem();
        p.r = [Expr::num(1.0), Expr::num(0.0)];
        p.q1 = Expr::num(0.9);
        let rep = check_wellposedness(&p, 16).unwrap();
        assert_relative_eq!(rep.threshold, 1.0);
        assert!(!rep.pass);

        // P = 2I, R = 0, q1 = 1.1: alpha 2, threshold 1.0, pass
        let mut p = base_problem();
        p.p = DiffusionMatrix::isotropic(Expr::num(2.0));
        p.q1 = Expr::num(1.1);
        let rep = check_wellposedness(&p, 16).unwrap();
        assert_relative_eq!(rep.alpha, 2.0);
        assert_relative_eq!(rep.threshold, 1.0);
        assert!(rep.pass);
    }

    #[test]
    fn non_elliptic_is_hard_error() {
        let mut p = base_problem();
        p.p = DiffusionMatrix::isotropic(Expr::num(-1.0));
        assert!(matches!(check_wellposedness(&p, 16), Err(Error::NotElliptic(_))));
    }

    #[test]
    fn manufactured_rhs_laplacian() {
        // u1* = u2* = x(1-x)y(1-y), P = I, R = 0, q1 = 1, q2 = 0:
        // f1(0.5, 0.5) = 0.5 + 0.5 + 0.0625
        let u = Expr::parse("x*(1-x)*y*(1-y)").unwrap();
        let mut p = base_problem();
        p.exact = Some((u.clone(), u.clone()));
        let (f1, _) = manufactured_rhs(&p).unwrap();
        assert_relative_eq!(f1.eval(&[0.5, 0.5]), 1.0625, epsilon = 1e-12);

        // q2 = 1 adds u2*
        p.q2 = Expr::num(1.0);
        let (f1, f2) = manufactured_rhs(&p).unwrap();
        assert_relative_eq!(f1.eval(&[0.5, 0.5]), 1.125, epsilon = 1e-12);
        // f2 subtracts q2 u1*
        assert_relative_eq!(f2.eval(&[0.5, 0.5]), 1.0625 - 0.0625, epsilon = 1e-12);

        // advection R = (1, 0) adds (1-2x)y(1-y), which vanishes at x = 0.5
        p.q2 = Expr::num(0.0);
        p.r = [Expr::num(1.0), Expr::num(0.0)];
        let (f1, _) = manufactured_rhs(&p).unwrap();
        assert_relative_eq!(f1.eval(&[0.5, 0.5]), 1.0625, epsilon = 1e-12);
        assert_relative_eq!(
            f1.eval(&[0.25, 0.5]),
            // -lap u + dx u + u at (0.25, 0.5)
            2.0 * 0.25 + 2.0 * 0.1875 + 0.5 * 0.25 + 0.1875 * 0.25,
            epsilon = 1e-12
        );
    }

    #[test]
    fn manufactured_requires_exact() {
        let p = base_problem();
        assert!(matches!(manufactured_rhs(&p), Err(Error::MissingExactSolution)));
    }

    #[test]
    fn anisotropic_min_eigenvalue() {
        let m = DiffusionMatrix {
            a11: Expr::num(2.0),
            a12: Expr::num(1.0),
            a22: Expr::num(2.0),
        };
        assert_relative_eq!(m.min_eigenvalue(&[0.0, 0.0], 2), 1.0, epsilon = 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn gate_is_monotone_in_q1(
            diff in 0.5f64..3.0,
            advect in 0.0f64..2.0,
            q1_low in -1.0f64..3.0,
            bump in 0.0f64..2.0,
        ) {
            let mut p = base_problem();
            p.p = DiffusionMatrix::isotropic(Expr::num(diff));
            p.r = [Expr::num(advect), Expr::num(0.0)];
            p.q1 = Expr::num(q1_low);
            let low = check_wellposedness(&p, 16).unwrap();
            p.q1 = Expr::num(q1_low + bump);
            let high = check_wellposedness(&p, 16).unwrap();
            // increasing q1 pointwise never flips pass -> fail
            prop_assert!(!low.pass || high.pass);
        }
    }
}
