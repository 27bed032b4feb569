//! Linear solvers for the assembled block system and spectral condition
//! number estimation.
//!
//! The block matrix is nonsymmetric (advection, skew coupling), so the
//! iterative path is BiCGStab with Jacobi preconditioning; the direct path
//! is a dense LU factorization. Every solve is followed by an independent
//! residual check on the sparse matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Solver selection. `Auto` uses dense LU for small systems and falls back
/// to it when BiCGStab stalls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Auto,
    Direct,
    Iterative,
}

impl Default for SolverMethod {
    fn default() -> Self {
        SolverMethod::Auto
    }
}

/// Outcome of a linear solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    /// `||G x - f|| / ||f||`, recomputed from the sparse matrix after the
    /// solve finished.
    pub residual: f64,
    /// Iterations used (0 for the direct path).
    pub iterations: usize,
    pub used_direct: bool,
}

const AUTO_DIRECT_LIMIT: usize = 800;

/// Solve `G x = f` with the requested method and verify the residual
/// against `tol` (relative).
pub fn solve(g: &CsrMatrix, f: &[f64], method: SolverMethod, tol: f64) -> Result<SolveReport> {
    if g.n_rows != g.n_cols || g.n_rows != f.len() {
        return Err(Error::DimensionMismatch { expected: g.n_rows, got: f.len() });
    }
    let mut report = match method {
        SolverMethod::Direct => solve_direct(g, f)?,
        SolverMethod::Iterative => solve_bicgstab(g, f, tol)?,
        SolverMethod::Auto => {
            if g.n_rows <= AUTO_DIRECT_LIMIT {
                solve_direct(g, f)?
            } else {
                match solve_bicgstab(g, f, tol) {
                    Ok(r) => r,
                    Err(Error::SolverDidNotConverge { .. }) => solve_direct(g, f)?,
                    Err(e) => return Err(e),
                }
            }
        }
    };
    report.residual = relative_residual(g, &report.x, f);
    if !report.residual.is_finite() || report.residual > tol.max(1e-8) * 100.0 {
        return Err(Error::SolverDidNotConverge {
            iterations: report.iterations,
            best_residual: report.residual,
        });
    }
    Ok(report)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn relative_residual(g: &CsrMatrix, x: &[f64], f: &[f64]) -> f64 {
    let mut gx = vec![0.0; f.len()];
    g.matvec(x, &mut gx);
    let diff: f64 = gx.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale = norm(f);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn solve_direct(g: &CsrMatrix, f: &[f64]) -> Result<SolveReport> {
    let dense = g.to_dense();
    let rhs = DVector::from_column_slice(f);
    let lu = dense.lu();
    let x = lu.solve(&rhs).ok_or(Error::SingularMatrix)?;
    Ok(SolveReport {
        x: x.iter().copied().collect(),
        residual: 0.0,
        iterations: 0,
        used_direct: true,
    })
}

/// Jacobi-preconditioned BiCGStab, capped at `10 * n` iterations.
fn solve_bicgstab(g: &CsrMatrix, f: &[f64], tol: f64) -> Result<SolveReport> {
    let n = g.n_rows;
    let max_iter = 10 * n;
    let tol = tol.max(1e-14);
    let inv_diag: Vec<f64> = g
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 1e-300 { 1.0 / d } else { 1.0 })
        .collect();
    let precond = |v: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend(v.iter().zip(&inv_diag).map(|(a, d)| a * d));
    };

    let f_norm = norm(f);
    if f_norm == 0.0 {
        return Ok(SolveReport { x: vec![0.0; n], residual: 0.0, iterations: 0, used_direct: false });
    }

    let mut x = vec![0.0f64; n];
    let mut r = f.to_vec();
    let r0 = r.clone();
    let mut rho = 1.0f64;
    let mut alpha = 1.0f64;
    let mut omega = 1.0f64;
    let mut v = vec![0.0f64; n];
    let mut p = vec![0.0f64; n];
    let mut y = Vec::new();
    let mut z = Vec::new();
    let mut t = vec![0.0f64; n];
    let mut s = vec![0.0f64; n];
    let mut best = (f64::INFINITY, x.clone());

    for it in 1..=max_iter {
        let rho_new: f64 = r0.iter().zip(&r).map(|(a, b)| a * b).sum();
        if rho_new.abs() < 1e-300 {
            break; // breakdown
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut y);
        g.matvec(&y, &mut v);
        let r0v: f64 = r0.iter().zip(&v).map(|(a, b)| a * b).sum();
        if r0v.abs() < 1e-300 {
            break;
        }
        alpha = rho / r0v;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / f_norm < tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(SolveReport { x, residual: 0.0, iterations: it, used_direct: false });
        }
        precond(&s, &mut z);
        g.matvec(&z, &mut t);
        let tt: f64 = t.iter().map(|a| a * a).sum();
        if tt < 1e-300 {
            break;
        }
        omega = t.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        let rel = norm(&r) / f_norm;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel < tol {
            return Ok(SolveReport { x, residual: 0.0, iterations: it, used_direct: false });
        }
        if omega.abs() < 1e-300 {
            break;
        }
    }
    Err(Error::SolverDidNotConverge { iterations: max_iter, best_residual: best.0 })
}

/// Spectral condition number `sigma_max / sigma_min`, estimated by power
/// iteration on `G^T G` and inverse iteration through an LU factorization.
pub fn estimate_condition(g: &CsrMatrix) -> Result<f64> {
    if g.n_rows != g.n_cols {
        return Err(Error::DimensionMismatch { expected: g.n_rows, got: g.n_cols });
    }
    let n = g.n_rows;
    if n == 0 {
        return Ok(1.0);
    }
    // deterministic, not axis-aligned start vector
    let start: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 37 + 11) % 97) as f64 / 97.0).collect();

    // sigma_max via power iteration on G^T G
    let mut v = start.clone();
    let mut gv = vec![0.0; n];
    let mut gtgv = vec![0.0; n];
    let mut sigma_max = 0.0f64;
    for _ in 0..300 {
        let s = norm(&v);
        v.iter_mut().for_each(|a| *a /= s);
        g.matvec(&v, &mut gv);
        g.matvec_transpose(&gv, &mut gtgv);
        let lambda = norm(&gtgv);
        let new = lambda.sqrt();
        let done = (new - sigma_max).abs() <= 1e-10 * new;
        sigma_max = new;
        std::mem::swap(&mut v, &mut gtgv);
        if done {
            break;
        }
    }

    // sigma_min via inverse iteration: solve G^T z = v, then G y = z
    let dense = g.to_dense();
    let lu = dense.clone().lu();
    let lu_t = dense.transpose().lu();
    let mut v = DVector::from_column_slice(&start);
    let mut sigma_min = f64::INFINITY;
    for _ in 0..300 {
        v /= v.norm();
        let z = lu_t.solve(&v).ok_or(Error::SingularMatrix)?;
        let y = lu.solve(&z).ok_or(Error::SingularMatrix)?;
        let lambda = y.norm(); // approximates 1 / sigma_min^2
        let new = 1.0 / lambda.sqrt();
        let done = (new - sigma_min).abs() <= 1e-10 * new;
        sigma_min = new;
        v = y;
        if done {
            break;
        }
    }
    if !(sigma_min > 0.0) || !sigma_max.is_finite() {
        return Err(Error::SingularMatrix);
    }
    Ok(sigma_max / sigma_min)
}

/// Exact spectral condition number by dense SVD; test/diagnostic helper.
pub fn condition_svd(m: &DMatrix<f64>) -> f64 {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let min = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triplets;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn csr_from_dense(m: &DMatrix<f64>) -> CsrMatrix {
        let mut t = Triplets::new(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    t.push(r, c, m[(r, c)]);
                }
            }
        }
        t.to_csr()
    }

    fn test_matrix(n: usize, asym: f64) -> DMatrix<f64> {
        // diagonally dominant tridiagonal-ish, mildly nonsymmetric
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                4.0 + (r as f64) / n as f64
            } else if r + 1 == c {
                -1.0 + asym
            } else if c + 1 == r {
                -1.0 - asym
            } else {
                0.0
            }
        })
    }

    #[test]
    fn direct_and_iterative_agree() {
        let dense = test_matrix(40, 0.3);
        let g = csr_from_dense(&dense);
        let x_star: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut f = vec![0.0; 40];
        g.matvec(&x_star, &mut f);

        let direct = solve(&g, &f, SolverMethod::Direct, 1e-12).unwrap();
        let iterative = solve(&g, &f, SolverMethod::Iterative, 1e-12).unwrap();
        assert!(direct.used_direct);
        assert!(!iterative.used_direct);
        assert!(iterative.iterations > 0);
        for i in 0..40 {
            assert_relative_eq!(direct.x[i], x_star[i], epsilon = 1e-10);
            assert_relative_eq!(iterative.x[i], x_star[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn residual_is_reported() {
        let g = csr_from_dense(&test_matrix(10, 0.0));
        let f = vec![1.0; 10];
        let rep = solve(&g, &f, SolverMethod::Auto, 1e-12).unwrap();
        assert!(rep.residual < 1e-12);
    }

    #[test]
    fn singular_direct_fails() {
        let mut t = Triplets::new(3, 3);
        t.push(0, 0, 1.0);
        t.push(1, 1, 1.0);
        // row 2 left empty -> singular
        let g = t.to_csr();
        let err = solve(&g, &[1.0, 1.0, 1.0], SolverMethod::Direct, 1e-12).unwrap_err();
        assert!(matches!(
            err,
            Error::SingularMatrix | Error::SolverDidNotConverge { .. }
        ));
    }

    #[test]
    fn iterative_nonconvergence_carries_best_residual() {
        // indefinite permutation-like matrix stalls BiCGStab with Jacobi
        let mut t = Triplets::new(4, 4);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        t.push(2, 3, 1.0);
        t.push(3, 2, -1.0);
        let g = t.to_csr();
        match solve(&g, &[1.0, 2.0, 3.0, 4.0], SolverMethod::Iterative, 1e-12) {
            Err(Error::SolverDidNotConverge { best_residual, .. }) => {
                assert!(best_residual.is_finite());
            }
            Ok(rep) => assert!(rep.residual < 1e-8),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn condition_matches_svd() {
        for asym in [0.0, 0.4] {
            let dense = test_matrix(30, asym);
            let g = csr_from_dense(&dense);
            let est = estimate_condition(&g).unwrap();
            let exact = condition_svd(&dense);
            assert_relative_eq!(est, exact, max_relative = 1e-3);
        }
    }

    #[test]
    fn condition_of_scaled_identity() {
        let mut t = Triplets::new(5, 5);
        for i in 0..5 {
            t.push(i, i, 3.0);
        }
        let est = estimate_condition(&t.to_csr()).unwrap();
        assert_relative_eq!(est, 1.0, epsilon = 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(25))]
        #[test]
        fn random_diagonally_dominant_systems_solve(
            n in 3usize..20,
            seed in 0u64..1000,
        ) {
            // splitmix-style deterministic entries
            let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
            let mut next = move || {
                state ^= state >> 30;
                state = state.wrapping_mul(0xbf58476d1ce4e5b9);
                state ^= state >> 27;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let mut dense = DMatrix::zeros(n, n);
            for r in 0..n {
                let mut row_sum = 0.0;
                for c in 0..n {
                    if r != c {
                        let v = next();
                        dense[(r, c)] = v;
                        row_sum += v.abs();
                    }
                }
                dense[(r, r)] = row_sum + 1.0;
            }
            let g = csr_from_dense(&dense);
            let x_star: Vec<f64> = (0..n).map(|i| next() + i as f64 * 0.01).collect();
            let mut f = vec![0.0; n];
            g.matvec(&x_star, &mut f);
            let rep = solve(&g, &f, SolverMethod::Iterative, 1e-13).unwrap();
            for i in 0..n {
                prop_assert!((rep.x[i] - x_star[i]).abs() < 1e-7 * x_star[i].abs().max(1.0));
            }
        }
    }
}
