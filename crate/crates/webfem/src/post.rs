//! Post-processing: solution fields, error norms against an exact
//! solution, the strong-form relative residual, spectral condition numbers
//! and convergence studies over a sequence of grid widths.

use std::time::Instant;

use crate::assembly::{assemble, AssembledSystem};
use crate::basis::WebBasis;
use crate::bspline::GridSpec;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::problem::CoupledProblem;
use crate::quadrature::{cell_quadrature, QuadConfig};
use crate::solver::{estimate_condition, solve, SolverMethod};

/// A solved coupled field: the basis plus one coefficient vector per
/// component.
#[derive(Debug, Clone)]
pub struct Solution {
    pub basis: WebBasis,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

/// Point sample of the solution; `inside == false` means the point lies
/// outside the domain and both values are zero.
#[derive(Debug, Clone, Copy)]
pub struct PointValue {
    pub inside: bool,
    pub u1: f64,
    pub u2: f64,
}

impl Solution {
    pub fn from_stacked(basis: WebBasis, x: &[f64]) -> Result<Solution> {
        let n = basis.len();
        if x.len() != 2 * n {
            return Err(Error::DimensionMismatch { expected: 2 * n, got: x.len() });
        }
        Ok(Solution { basis, u1: x[..n].to_vec(), u2: x[n..].to_vec() })
    }

    pub fn eval(&self, x: &[f64]) -> Result<PointValue> {
        if !self.basis.dom.inside(x) {
            return Ok(PointValue { inside: false, u1: 0.0, u2: 0.0 });
        }
        let eval = self.basis.eval_at(x, 0)?;
        let mut u = [0.0f64; 2];
        for (slot, &pos) in eval.active.iter().enumerate() {
            u[0] += self.u1[pos] * eval.value[slot];
            u[1] += self.u2[pos] * eval.value[slot];
        }
        Ok(PointValue { inside: true, u1: u[0], u2: u[1] })
    }
}

/// L2 and H1-seminorm errors per component plus the combined (root sum of
/// squares) values.
#[derive(Debug, Clone, Copy)]
pub struct ErrorNorms {
    pub l2: [f64; 2],
    pub h1: [f64; 2],
    pub l2_combined: f64,
    pub h1_combined: f64,
}

/// Integrate `(u_h - u*)^2` and `|grad u_h - grad u*|^2` over the domain
/// with the cut-cell quadrature.
pub fn error_norms(sol: &Solution, prob: &CoupledProblem, quad: &QuadConfig) -> Result<ErrorNorms> {
    let (ex1, ex2) = prob.exact.as_ref().ok_or(Error::MissingExactSolution)?;
    let m = sol.basis.grid.m;
    let grad1: Vec<Expr> = (0..m).map(|d| ex1.differentiate(d)).collect::<std::result::Result<_, _>>()?;
    let grad2: Vec<Expr> = (0..m).map(|d| ex2.differentiate(d)).collect::<std::result::Result<_, _>>()?;

    let mut l2 = [0.0f64; 2];
    let mut h1 = [0.0f64; 2];
    for (cell, class) in sol.basis.assembly_cells() {
        let rule = cell_quadrature(&sol.basis.dom, &cell, sol.basis.grid.h, class, quad);
        for (pt, &wq) in rule.points.iter().zip(&rule.weights) {
            let x = &pt[..m];
            let eval = sol.basis.eval_at(x, 1)?;
            let mut u = [0.0f64; 2];
            let mut g = [[0.0f64; 2]; 2];
            for (slot, &pos) in eval.active.iter().enumerate() {
                let v = eval.value[slot];
                let gr = eval.grad[slot];
                u[0] += sol.u1[pos] * v;
                u[1] += sol.u2[pos] * v;
                for d in 0..m {
                    g[0][d] += sol.u1[pos] * gr[d];
                    g[1][d] += sol.u2[pos] * gr[d];
                }
            }
            let du = [u[0] - ex1.eval(x), u[1] - ex2.eval(x)];
            l2[0] += wq * du[0] * du[0];
            l2[1] += wq * du[1] * du[1];
            for d in 0..m {
                let dg1 = g[0][d] - grad1[d].eval(x);
                let dg2 = g[1][d] - grad2[d].eval(x);
                h1[0] += wq * dg1 * dg1;
                h1[1] += wq * dg2 * dg2;
            }
        }
    }
    let l2 = [l2[0].sqrt(), l2[1].sqrt()];
    let h1 = [h1[0].sqrt(), h1[1].sqrt()];
    Ok(ErrorNorms {
        l2,
        h1,
        l2_combined: (l2[0] * l2[0] + l2[1] * l2[1]).sqrt(),
        h1_combined: (h1[0] * h1[0] + h1[1] * h1[1]).sqrt(),
    })
}

/// Strong-form relative residual `e = ||f - L u_h||_0 / ||f||_0`.
#[derive(Debug, Clone, Copy)]
pub struct ResidualReport {
    pub e: f64,
    pub r_norm: f64,
    pub f_norm: f64,
    /// The right-hand side has zero L2 norm; `e` then carries the absolute
    /// residual norm instead of a ratio.
    pub zero_denominator: bool,
}

/// Evaluate the strong operator on the discrete solution cell by cell.
/// Requires second derivatives of the basis, hence `n >= 3`.
pub fn relative_residual(
    sol: &Solution,
    prob: &CoupledProblem,
    quad: &QuadConfig,
) -> Result<ResidualReport> {
    let n_order = sol.basis.grid.n;
    if n_order < 3 {
        return Err(Error::ResidualOrderTooLow(n_order));
    }
    let m = sol.basis.grid.m;
    // symbolic divergence terms: dP[i][j] = d/dx_i P_ij
    let entry = |i: usize, j: usize| -> &Expr {
        match (i, j) {
            (0, 0) => &prob.p.a11,
            (1, 1) => &prob.p.a22,
            _ => &prob.p.a12,
        }
    };
    let mut dp = [[Expr::num(0.0), Expr::num(0.0)], [Expr::num(0.0), Expr::num(0.0)]];
    for i in 0..m {
        for j in 0..m {
            dp[i][j] = entry(i, j).differentiate(i)?.simplified();
        }
    }

    let mut r_sq = 0.0f64;
    let mut f_sq = 0.0f64;
    for (cell, class) in sol.basis.assembly_cells() {
        let rule = cell_quadrature(&sol.basis.dom, &cell, sol.basis.grid.h, class, quad);
        for (pt, &wq) in rule.points.iter().zip(&rule.weights) {
            let x = &pt[..m];
            let eval = sol.basis.eval_at(x, 2)?;
            // u, grad u, hess u for both components
            let mut u = [0.0f64; 2];
            let mut g = [[0.0f64; 2]; 2];
            let mut hess = [[0.0f64; 3]; 2];
            for (slot, &pos) in eval.active.iter().enumerate() {
                let v = eval.value[slot];
                let gr = eval.grad[slot];
                let he = eval.hess[slot];
                for (c, coeffs) in [&sol.u1, &sol.u2].iter().enumerate() {
                    let cv = coeffs[pos];
                    u[c] += cv * v;
                    for d in 0..m {
                        g[c][d] += cv * gr[d];
                    }
                    for t in 0..3 {
                        hess[c][t] += cv * he[t];
                    }
                }
            }
            let p = prob.p.eval(x);
            let r_adv = [prob.r[0].eval(x), if m == 2 { prob.r[1].eval(x) } else { 0.0 }];
            let q1 = prob.q1.eval(x);
            let q2 = prob.q2.eval(x);
            let dpv = [
                [dp[0][0].eval(x), dp[0][1].eval(x)],
                [dp[1][0].eval(x), dp[1][1].eval(x)],
            ];
            // hess layout: [dxx, dxy, dyy]
            let hess_at = |c: usize, i: usize, j: usize| hess[c][i + j];
            let strong = |c: usize| -> f64 {
                let mut v = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        v -= dpv[i][j] * g[c][j] + p[i][j] * hess_at(c, i, j);
                    }
                    v += r_adv[i] * g[c][i];
                }
                v + q1 * u[c]
            };
            let f1 = prob.f1.eval(x);
            let f2 = prob.f2.eval(x);
            let r1 = f1 - (strong(0) + q2 * u[1]);
            let r2 = f2 - (strong(1) - q2 * u[0]);
            r_sq += wq * (r1 * r1 + r2 * r2);
            f_sq += wq * (f1 * f1 + f2 * f2);
        }
    }
    let r_norm = r_sq.sqrt();
    let f_norm = f_sq.sqrt();
    let zero_denominator = f_norm == 0.0;
    let e = if zero_denominator { r_norm } else { r_norm / f_norm };
    Ok(ResidualReport { e, r_norm, f_norm, zero_denominator })
}

/// Knobs for a single run or a study.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub method: SolverMethod,
    pub tol: f64,
    /// None: `QuadConfig::for_order(n)`.
    pub quad: Option<QuadConfig>,
    /// Skip the (dense-factorization) condition estimate when false.
    pub estimate_cond: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { method: SolverMethod::Auto, tol: 1e-10, quad: None, estimate_cond: true }
    }
}

/// One row of a study: the spec'd report columns.
#[derive(Debug, Clone, Copy)]
pub struct RunRow {
    pub n: u32,
    pub h: f64,
    /// Unknowns per component.
    pub n_unknowns: usize,
    pub l2: f64,
    pub h1: f64,
    /// Strong-form relative residual; NaN when `n < 3` or no metric was
    /// requested.
    pub e: f64,
    pub cond: f64,
    pub seconds: f64,
}

/// A solved run plus its report row.
#[derive(Debug)]
pub struct RunResult {
    pub solution: Solution,
    pub system: AssembledSystem,
    pub row: RunRow,
}

/// Build, assemble and solve one grid; fill in whatever metrics the
/// problem supports (norms need `exact`, the residual needs `n >= 3`).
pub fn run_single(prob: &CoupledProblem, n: u32, h: f64, opts: &RunOptions) -> Result<RunResult> {
    let quad = opts.quad.unwrap_or_else(|| QuadConfig::for_order(n));
    let start = Instant::now();
    let grid = GridSpec::covering(h, n, prob.dim(), &prob.dom.bounding_box)?;
    let basis = WebBasis::build(grid, prob.dom.clone())?;
    let system = assemble(&basis, prob, &quad)?;
    let report = solve(&system.g, &system.f, opts.method, opts.tol)?;
    let seconds = start.elapsed().as_secs_f64();

    let solution = Solution::from_stacked(basis, &report.x)?;
    let norms = if prob.exact.is_some() {
        Some(error_norms(&solution, prob, &quad)?)
    } else {
        None
    };
    let e = if n >= 3 { relative_residual(&solution, prob, &quad)?.e } else { f64::NAN };
    let cond = if opts.estimate_cond { estimate_condition(&system.g)? } else { f64::NAN };

    let row = RunRow {
        n,
        h,
        n_unknowns: solution.basis.len(),
        l2: norms.map_or(f64::NAN, |v| v.l2_combined),
        h1: norms.map_or(f64::NAN, |v| v.h1_combined),
        e,
        cond,
        seconds,
    };
    Ok(RunResult { solution, system, row })
}

/// Least-squares slope of `log(y)` against `log(h)`, skipping non-finite
/// or non-positive samples.
pub fn fit_slope(hs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(ys)
        .filter(|(&h, &y)| h > 0.0 && y > 0.0 && y.is_finite())
        .map(|(&h, &y)| (h.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Rows for a sequence of grid widths plus fitted log-log slopes.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<RunRow>,
    pub l2_slope: f64,
    pub h1_slope: f64,
    pub cond_slope: f64,
}

impl ConvergenceReport {
    pub fn from_rows(rows: Vec<RunRow>) -> ConvergenceReport {
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let l2: Vec<f64> = rows.iter().map(|r| r.l2).collect();
        let h1: Vec<f64> = rows.iter().map(|r| r.h1).collect();
        let cond: Vec<f64> = rows.iter().map(|r| r.cond).collect();
        ConvergenceReport {
            l2_slope: fit_slope(&hs, &l2),
            h1_slope: fit_slope(&hs, &h1),
            cond_slope: fit_slope(&hs, &cond),
            rows,
        }
    }

    /// CSV with the spec'd column set.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,h,N,L2,H1,e,cond,seconds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.3}\n",
                r.n, r.h, r.n_unknowns, r.l2, r.h1, r.e, r.cond, r.seconds
            ));
        }
        out
    }

    /// Human-readable table for terminal output.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>3} {:>10} {:>8} {:>12} {:>12} {:>12} {:>12} {:>9}\n",
            "n", "h", "N", "L2", "H1", "e", "cond", "seconds"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:>3} {:>10.6} {:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>9.3}\n",
                r.n, r.h, r.n_unknowns, r.l2, r.h1, r.e, r.cond, r.seconds
            ));
        }
        out.push_str(&format!(
            "slopes: L2 {:.3}  H1 {:.3}  cond {:.3}\n",
            self.l2_slope, self.h1_slope, self.cond_slope
        ));
        out
    }
}

/// Solve the same problem on every grid width and fit convergence orders.
pub fn convergence_study(
    prob: &CoupledProblem,
    n: u32,
    hs: &[f64],
    opts: &RunOptions,
) -> Result<ConvergenceReport> {
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        rows.push(run_single(prob, n, h, opts)?.row);
    }
    Ok(ConvergenceReport::from_rows(rows))
}
