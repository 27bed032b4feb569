//! Galerkin assembly of the coupled system over interior and cut cells.
//!
//! With `N` unknowns per component the block system is
//!
//! ```text
//! G = | A + M1    M2   |        f = | f1 |
//!     |  -M2    A + M1 |            | f2 |
//! ```
//!
//! where `A` carries diffusion and advection, `M1` the reaction `q1` and
//! `M2` the skew coupling `q2`. Cells are processed in parallel but merged
//! in a fixed order, so the result is bitwise deterministic.

use rayon::prelude::*;

use crate::basis::WebBasis;
use crate::error::{Error, Result};
use crate::problem::CoupledProblem;
use crate::quadrature::{cell_quadrature, QuadConfig};
use crate::sparse::{CsrMatrix, Triplets};

/// The assembled block system plus its building blocks (useful for
/// diagnostics and Matrix Market dumps).
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    /// Full `2N x 2N` block matrix.
    pub g: CsrMatrix,
    /// Diffusion + advection block `A` (`N x N`).
    pub a_block: CsrMatrix,
    /// Reaction mass block `M1`.
    pub m1_block: CsrMatrix,
    /// Coupling mass block `M2`.
    pub m2_block: CsrMatrix,
    /// Stacked load vector `[f1; f2]` of length `2N`.
    pub f: Vec<f64>,
    /// Unknowns per component.
    pub n_inner: usize,
}

/// Dense local matrices of one cell over its active unknowns `idx`
/// (row-major `k x k`); `m2` stays empty when no coupling was seen.
struct CellContrib {
    idx: Vec<usize>,
    a: Vec<f64>,
    m1: Vec<f64>,
    m2: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
}

/// Run `f` on a rayon pool sized by the `WEBFEM_THREADS` environment
/// variable, or on the global pool when it is unset.
pub fn with_thread_pool<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var("WEBFEM_THREADS") {
        Err(_) => Ok(f()),
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("invalid WEBFEM_THREADS value {raw:?}")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Assemble the full coupled system for the given basis and problem.
pub fn assemble(
    basis: &WebBasis,
    prob: &CoupledProblem,
    quad: &QuadConfig,
) -> Result<AssembledSystem> {
    let n = basis.len();
    let m = basis.grid.m;
    let cells = basis.assembly_cells();

    let contribs: Vec<Result<CellContrib>> = with_thread_pool(|| {
        cells
            .par_iter()
            .map(|(cell, class)| {
                let rule = cell_quadrature(&basis.dom, cell, basis.grid.h, *class, quad);
                let mut idx: Vec<usize> = Vec::new();
                let (mut la, mut lm1, mut lm2) = (Vec::new(), Vec::new(), Vec::new());
                let (mut lf1, mut lf2) = (Vec::new(), Vec::new());
                let mut has_m2 = false;
                for (pt, &wq) in rule.points.iter().zip(&rule.weights) {
                    let x = &pt[..m];
                    let eval = basis.eval_at(x, 1)?;
                    if eval.active.is_empty() {
                        continue;
                    }
                    if idx.is_empty() {
                        let k = eval.active.len();
                        idx = eval.active.clone();
                        la = vec![0.0; k * k];
                        lm1 = vec![0.0; k * k];
                        lm2 = vec![0.0; k * k];
                        lf1 = vec![0.0; k];
                        lf2 = vec![0.0; k];
                    }
                    let k = idx.len();
                    // every quadrature point lies strictly inside the cell,
                    // so the active set matches the one captured first; a
                    // point rounded onto a cell face may disagree, and its
                    // zero-measure contributions are skipped per unknown
                    let same = eval.active == idx;
                    let p = prob.p.eval(x);
                    let r = [prob.r[0].eval(x), if m == 2 { prob.r[1].eval(x) } else { 0.0 }];
                    let q1 = prob.q1.eval(x);
                    let q2 = prob.q2.eval(x);
                    let f1 = prob.f1.eval(x);
                    let f2 = prob.f2.eval(x);

                    for (si, &pi) in eval.active.iter().enumerate() {
                        let li = if same {
                            si
                        } else {
                            match idx.iter().position(|&v| v == pi) {
                                Some(l) => l,
                                None => continue,
                            }
                        };
                        let vi = eval.value[si];
                        let gi = eval.grad[si];
                        lf1[li] += wq * f1 * vi;
                        lf2[li] += wq * f2 * vi;
                        for (sj, &pj) in eval.active.iter().enumerate() {
                            let lj = if same {
                                sj
                            } else {
                                match idx.iter().position(|&v| v == pj) {
                                    Some(l) => l,
                                    None => continue,
                                }
                            };
                            let vj = eval.value[sj];
                            let gj = eval.grad[sj];
                            // grad B_i . P grad B_j + (R . grad B_j) B_i
                            let diffusion = gi[0] * (p[0][0] * gj[0] + p[0][1] * gj[1])
                                + gi[1] * (p[1][0] * gj[0] + p[1][1] * gj[1]);
                            let advection = (r[0] * gj[0] + r[1] * gj[1]) * vi;
                            la[li * k + lj] += wq * (diffusion + advection);
                            lm1[li * k + lj] += wq * q1 * vi * vj;
                            if q2 != 0.0 {
                                lm2[li * k + lj] += wq * q2 * vi * vj;
                                has_m2 = true;
                            }
                        }
                    }
                }
                if !has_m2 {
                    lm2.clear();
                }
                Ok(CellContrib { idx, a: la, m1: lm1, m2: lm2, f1: lf1, f2: lf2 })
            })
            .collect()
    })?;

    let mut a = Triplets::new(n, n);
    let mut m1 = Triplets::new(n, n);
    let mut m2 = Triplets::new(n, n);
    let mut g = Triplets::new(2 * n, 2 * n);
    let mut f = vec![0.0f64; 2 * n];
    for contrib in contribs {
        let c = contrib?;
        let k = c.idx.len();
        for (li, &i) in c.idx.iter().enumerate() {
            for (lj, &j) in c.idx.iter().enumerate() {
                let va = c.a[li * k + lj];
                let vm1 = c.m1[li * k + lj];
                if va != 0.0 || vm1 != 0.0 {
                    a.push(i, j, va);
                    m1.push(i, j, vm1);
                    g.push(i, j, va + vm1);
                    g.push(n + i, n + j, va + vm1);
                }
                if !c.m2.is_empty() {
                    let vm2 = c.m2[li * k + lj];
                    if vm2 != 0.0 {
                        m2.push(i, j, vm2);
                        g.push(i, n + j, vm2);
                        g.push(n + i, j, -vm2);
                    }
                }
            }
            f[i] += c.f1[li];
            f[n + i] += c.f2[li];
        }
    }

    Ok(AssembledSystem {
        g: g.to_csr(),
        a_block: a.to_csr(),
        m1_block: m1.to_csr(),
        m2_block: m2.to_csr(),
        f,
        n_inner: n,
    })
}
