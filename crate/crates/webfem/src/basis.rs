//! Weighted extended B-spline basis construction.
//!
//! Grid B-splines whose support contains at least one fully interior cell
//! are *inner*; those that merely touch the domain are *outer* and get
//! attached to a nearby array of inner splines by Lagrange extrapolation
//! coefficients, which preserves polynomial reproduction. Each basis
//! function is finally multiplied by the Dirichlet weight and normalized at
//! an interior cell center:
//!
//! `B_i = w / w(x_i) * (b_i + sum_j e_{i,j} b_j)`.

use std::collections::{HashMap, HashSet};

use crate::bspline::{nonzero_values, support_cells, CellId, GridSpec, Index, SplineValues};
use crate::domain::{CellClass, DomainSpec, Jet, DEFAULT_CLASSIFY_DEPTH};
use crate::error::{Error, Result};

/// Inner/outer split of the relevant spline indices plus the cell
/// classification map reused by assembly.
#[derive(Debug, Clone)]
pub struct IndexClassification {
    pub inner: Vec<Index>,
    pub outer: Vec<Index>,
    pub irrelevant_count: usize,
    pub cell_class: HashMap<CellId, CellClass>,
    inner_set: HashSet<Index>,
}

impl IndexClassification {
    pub fn is_inner(&self, k: &Index) -> bool {
        self.inner_set.contains(k)
    }
}

/// Classify every candidate index of the grid against the domain.
pub fn classify_indices(grid: &GridSpec, dom: &DomainSpec) -> Result<IndexClassification> {
    let m = grid.m;
    let n = grid.n as i64;
    // cell range covering the bounding box
    let mut cell_lo = [0i64; 2];
    let mut cell_hi = [0i64; 2];
    for d in 0..m {
        let (lo, hi) = dom.bounding_box[d];
        cell_lo[d] = (lo / grid.h).floor() as i64;
        cell_hi[d] = (hi / grid.h).ceil() as i64 - 1;
    }

    let mut cell_class = HashMap::new();
    let visit_cells = |f: &mut dyn FnMut(CellId, CellClass)| {
        if m == 1 {
            for l0 in cell_lo[0]..=cell_hi[0] {
                let cell = CellId::new([l0, 0]);
                f(cell, dom.classify_cell(&cell, grid, DEFAULT_CLASSIFY_DEPTH));
            }
        } else {
            for l0 in cell_lo[0]..=cell_hi[0] {
                for l1 in cell_lo[1]..=cell_hi[1] {
                    let cell = CellId::new([l0, l1]);
                    f(cell, dom.classify_cell(&cell, grid, DEFAULT_CLASSIFY_DEPTH));
                }
            }
        }
    };
    visit_cells(&mut |cell, class| {
        cell_class.insert(cell, class);
    });

    let class_of = |cell: &CellId| cell_class.get(cell).copied().unwrap_or(CellClass::Exterior);

    let mut inner = Vec::new();
    let mut outer = Vec::new();
    let mut irrelevant = 0usize;
    let mut classify_index = |k: Index| {
        let mut has_interior = false;
        let mut touches = false;
        for cell in support_cells(grid, &k) {
            match class_of(&cell) {
                CellClass::Interior => has_interior = true,
                CellClass::Boundary => touches = true,
                CellClass::Exterior => {}
            }
        }
        if has_interior {
            inner.push(k);
        } else if touches {
            outer.push(k);
        } else {
            irrelevant += 1;
        }
    };
    let (k0_lo, k0_hi) = (cell_lo[0] - (n - 1), cell_hi[0]);
    if m == 1 {
        for k0 in k0_lo..=k0_hi {
            classify_index([k0, 0]);
        }
    } else {
        let (k1_lo, k1_hi) = (cell_lo[1] - (n - 1), cell_hi[1]);
        for k0 in k0_lo..=k0_hi {
            for k1 in k1_lo..=k1_hi {
                classify_index([k0, k1]);
            }
        }
    }
    if inner.is_empty() {
        return Err(Error::NoInteriorCell { h: grid.h });
    }
    inner.sort_unstable();
    outer.sort_unstable();
    let inner_set = inner.iter().copied().collect();
    Ok(IndexClassification { inner, outer, irrelevant_count: irrelevant, cell_class, inner_set })
}

/// Per-outer-index attachment: the chosen inner array and its tensor
/// Lagrange extrapolation weights (row-major over dimensions).
#[derive(Debug, Clone)]
pub struct ExtensionArray {
    pub base: Index,
    pub coeffs: Vec<f64>,
}

/// Sparse extension coefficients `(i, j) -> e_{i,j}`.
#[derive(Debug, Clone, Default)]
pub struct ExtensionTable {
    pub arrays: HashMap<Index, ExtensionArray>,
}

impl ExtensionTable {
    /// `e_{i,j}`; zero when `i` is not in the array attached to `j`.
    pub fn coeff(&self, i: &Index, j: &Index, n: u32, m: usize) -> f64 {
        let Some(arr) = self.arrays.get(j) else { return 0.0 };
        let n = n as i64;
        let mut flat = 0i64;
        for d in 0..m {
            let off = i[d] - arr.base[d];
            if off < 0 || off >= n {
                return 0.0;
            }
            flat = flat * n + off;
        }
        arr.coeffs[flat as usize]
    }
}

/// Lagrange basis polynomials on integer nodes `base..base+n-1` evaluated
/// at `j`.
fn lagrange_weights(base: i64, n: i64, j: i64) -> Vec<f64> {
    let mut w = vec![1.0f64; n as usize];
    for t in 0..n {
        for s in 0..n {
            if s != t {
                w[t as usize] *= (j - (base + s)) as f64 / ((base + t) - (base + s)) as f64;
            }
        }
    }
    w
}

/// Distance from `j` to the interval `[b, b + n - 1]` in one dimension.
fn interval_dist(j: i64, b: i64, n: i64) -> i64 {
    (b - j).max(j - (b + n - 1)).max(0)
}

/// For each outer index, pick the closest fully inner `n^m` contiguous
/// array (ties toward smaller base) and compute the tensor Lagrange
/// extrapolation weights.
pub fn extension_coeffs(cls: &IndexClassification, grid: &GridSpec) -> Result<ExtensionTable> {
    let n = grid.n as i64;
    let m = grid.m;
    let window = 3 * n; // search reach per dimension
    let mut table = ExtensionTable::default();

    for &j in &cls.outer {
        let mut best: Option<(i64, Index)> = None;
        let mut consider = |base: Index| {
            // all n^m tensor indices must be inner
            let all_inner = if m == 1 {
                (0..n).all(|t| cls.is_inner(&[base[0] + t, 0]))
            } else {
                (0..n).all(|t0| (0..n).all(|t1| cls.is_inner(&[base[0] + t0, base[1] + t1])))
            };
            if !all_inner {
                return;
            }
            let dist = (0..m).map(|d| interval_dist(j[d], base[d], n)).max().unwrap();
            match best {
                Some((bd, bb)) if (bd, bb) <= (dist, base) => {}
                _ => best = Some((dist, base)),
            }
        };
        if m == 1 {
            for b0 in j[0] - window..=j[0] + window {
                consider([b0, 0]);
            }
        } else {
            for b0 in j[0] - window..=j[0] + window {
                for b1 in j[1] - window..=j[1] + window {
                    consider([b0, b1]);
                }
            }
        }
        let Some((_, base)) = best else {
            return Err(Error::UnderResolved { index: j[..m].to_vec(), n: grid.n });
        };
        // tensor product of 1D Lagrange extrapolation weights
        let w0 = lagrange_weights(base[0], n, j[0]);
        let coeffs = if m == 1 {
            w0
        } else {
            let w1 = lagrange_weights(base[1], n, j[1]);
            let mut c = Vec::with_capacity((n * n) as usize);
            for a in &w0 {
                for b in &w1 {
                    c.push(a * b);
                }
            }
            c
        };
        table.arrays.insert(j, ExtensionArray { base, coeffs });
    }
    Ok(table)
}

/// The assembled WEB-spline basis.
#[derive(Debug, Clone)]
pub struct WebBasis {
    pub grid: GridSpec,
    pub dom: DomainSpec,
    pub classification: IndexClassification,
    pub ext: ExtensionTable,
    /// Normalization point per inner index: center of a chosen interior
    /// cell inside the support.
    pub x_i: HashMap<Index, [f64; 2]>,
    /// Cached Dirichlet weight at the normalization points.
    pub w_at_xi: HashMap<Index, f64>,
    /// Inner indices in a fixed (sorted) order; the unknown numbering.
    pub inner_order: Vec<Index>,
    index_of: HashMap<Index, usize>,
    /// `i -> [(k, c)]` with `B_i = w/w_i * sum_k c * b_k`.
    rep: HashMap<Index, Vec<(Index, f64)>>,
    /// Grid cell -> inner unknowns with a representation spline alive there.
    cell_active: HashMap<CellId, Vec<usize>>,
}

impl WebBasis {
    pub fn build(grid: GridSpec, dom: DomainSpec) -> Result<WebBasis> {
        if grid.m != dom.dim {
            return Err(Error::DimensionMismatch { expected: grid.m, got: dom.dim });
        }
        let classification = classify_indices(&grid, &dom)?;
        let ext = extension_coeffs(&classification, &grid)?;

        // normalization points: interior cell center nearest the support
        // midpoint, ties toward the lexicographically smaller cell
        let mut x_i = HashMap::new();
        let mut w_at_xi = HashMap::new();
        for &i in &classification.inner {
            let mut best: Option<(f64, CellId)> = None;
            for cell in support_cells(&grid, &i) {
                if classification.cell_class.get(&cell).copied() != Some(CellClass::Interior) {
                    continue;
                }
                let center = cell.center(grid.h);
                let mut dist: f64 = 0.0;
                for d in 0..grid.m {
                    let mid = (i[d] as f64 + grid.n as f64 / 2.0) * grid.h;
                    dist = dist.max((center[d] - mid).abs());
                }
                // support_cells iterates in lexicographic order, so keeping
                // the first strict improvement breaks ties toward smaller l
                let replace = match &best {
                    None => true,
                    Some((bd, _)) => dist < bd - 1e-12,
                };
                if replace {
                    best = Some((dist, cell));
                }
            }
            let (_, cell) = best.expect("inner index must own an interior cell");
            let center = cell.center(grid.h);
            let w = dom.w_dirichlet.eval(&center[..grid.m]);
            if !(w > 0.0) {
                return Err(Error::GateFailed(format!(
                    "Dirichlet weight not positive at normalization point {center:?}"
                )));
            }
            x_i.insert(i, center);
            w_at_xi.insert(i, w);
        }

        // spline representation of each basis function
        let mut rep: HashMap<Index, Vec<(Index, f64)>> = HashMap::new();
        for &i in &classification.inner {
            rep.insert(i, vec![(i, 1.0)]);
        }
        for (&j, arr) in &ext.arrays {
            let n = grid.n as i64;
            let mut t = 0usize;
            if grid.m == 1 {
                for t0 in 0..n {
                    let i = [arr.base[0] + t0, 0];
                    rep.get_mut(&i).unwrap().push((j, arr.coeffs[t]));
                    t += 1;
                }
            } else {
                for t0 in 0..n {
                    for t1 in 0..n {
                        let i = [arr.base[0] + t0, arr.base[1] + t1];
                        rep.get_mut(&i).unwrap().push((j, arr.coeffs[t]));
                        t += 1;
                    }
                }
            }
        }

        let inner_order = classification.inner.clone();
        let index_of: HashMap<Index, usize> =
            inner_order.iter().enumerate().map(|(p, &i)| (i, p)).collect();

        // cell -> active unknowns
        let mut cell_active: HashMap<CellId, Vec<usize>> = HashMap::new();
        for (pos, &i) in inner_order.iter().enumerate() {
            let mut seen = HashSet::new();
            for (k, _) in &rep[&i] {
                for cell in support_cells(&grid, k) {
                    if seen.insert(cell) {
                        cell_active.entry(cell).or_default().push(pos);
                    }
                }
            }
        }
        for list in cell_active.values_mut() {
            list.sort_unstable();
        }

        Ok(WebBasis {
            grid,
            dom,
            classification,
            ext,
            x_i,
            w_at_xi,
            inner_order,
            index_of,
            rep,
            cell_active,
        })
    }

    /// Number of unknowns per component.
    pub fn len(&self) -> usize {
        self.inner_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner_order.is_empty()
    }

    pub fn position(&self, i: &Index) -> Option<usize> {
        self.index_of.get(i).copied()
    }

    /// Unknowns whose basis functions are alive on the given cell.
    pub fn active_on_cell(&self, cell: &CellId) -> &[usize] {
        self.cell_active.get(cell).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Non-exterior cells in a fixed deterministic order.
    pub fn assembly_cells(&self) -> Vec<(CellId, CellClass)> {
        let mut cells: Vec<(CellId, CellClass)> = self
            .classification
            .cell_class
            .iter()
            .filter(|(_, c)| **c != CellClass::Exterior)
            .map(|(cell, c)| (*cell, *c))
            .collect();
        cells.sort_unstable_by_key(|(cell, _)| *cell);
        cells
    }

    /// Evaluate every basis function alive at `x`, together with
    /// derivatives up to `deriv_order` (0, 1 or 2).
    pub fn eval_at(&self, x: &[f64], deriv_order: u32) -> Result<BasisPointEval> {
        let m = self.grid.m;
        let cell = CellId::containing(x, self.grid.h, m);
        let active = self.active_on_cell(&cell);
        // values only need w itself, which is defined even at R-function
        // junctions where the jet is not
        let w = if deriv_order == 0 {
            Jet::constant(self.dom.w_dirichlet.eval(x))
        } else {
            self.dom.w_dirichlet.eval_jet(x)?
        };

        // per-dimension spline value tables
        let mut tables: Vec<Vec<SplineValues>> = Vec::with_capacity(m);
        for d in 0..m {
            let mut per_d = Vec::with_capacity(deriv_order as usize + 1);
            for order in 0..=deriv_order {
                per_d.push(nonzero_values(self.grid.n, self.grid.h, x[d], order));
            }
            tables.push(per_d);
        }
        let spline = |k: &Index, d: &[u32]| -> f64 {
            let mut prod = 1.0;
            for dim in 0..m {
                prod *= tables[dim][d[dim] as usize].get(k[dim]);
            }
            prod
        };

        let mut out = BasisPointEval {
            active: active.to_vec(),
            value: Vec::with_capacity(active.len()),
            grad: Vec::with_capacity(active.len()),
            hess: Vec::new(),
        };
        for &pos in active {
            let i = self.inner_order[pos];
            let w_i = self.w_at_xi[&i];
            // spline combination s and its derivatives
            let mut s = 0.0;
            let mut sg = [0.0f64; 2];
            let mut sh = [0.0f64; 3];
            for (k, c) in &self.rep[&i] {
                s += c * spline(k, &[0, 0]);
                if deriv_order >= 1 {
                    sg[0] += c * spline(k, &[1, 0]);
                    if m == 2 {
                        sg[1] += c * spline(k, &[0, 1]);
                    }
                }
                if deriv_order >= 2 {
                    sh[0] += c * spline(k, &[2, 0]);
                    if m == 2 {
                        sh[1] += c * spline(k, &[1, 1]);
                        sh[2] += c * spline(k, &[0, 2]);
                    }
                }
            }
            out.value.push(w.v * s / w_i);
            if deriv_order >= 1 {
                out.grad.push([
                    (w.g[0] * s + w.v * sg[0]) / w_i,
                    (w.g[1] * s + w.v * sg[1]) / w_i,
                ]);
            }
            if deriv_order >= 2 {
                out.hess.push([
                    (w.h[0] * s + 2.0 * w.g[0] * sg[0] + w.v * sh[0]) / w_i,
                    (w.h[1] * s + w.g[0] * sg[1] + w.g[1] * sg[0] + w.v * sh[1]) / w_i,
                    (w.h[2] * s + 2.0 * w.g[1] * sg[1] + w.v * sh[2]) / w_i,
                ]);
            }
        }
        Ok(out)
    }

    /// Single basis function `B_i` (or one gradient component) at a point.
    pub fn web_eval(&self, i: &Index, x: &[f64], d: &[u32]) -> Result<f64> {
        let pos = self.position(i).ok_or_else(|| Error::UnknownIndex(i[..self.grid.m].to_vec()))?;
        let total: u32 = d.iter().sum();
        if total > 1 {
            return Err(Error::InvalidSpline(format!(
                "web_eval supports |d| <= 1, got {d:?}"
            )));
        }
        let eval = self.eval_at(x, total)?;
        let Some(slot) = eval.active.iter().position(|&p| p == pos) else {
            return Ok(0.0);
        };
        if total == 0 {
            Ok(eval.value[slot])
        } else {
            let dim = d.iter().position(|&v| v == 1).unwrap();
            Ok(eval.grad[slot][dim])
        }
    }

    /// Weight jet convenience accessor.
    pub fn weight_jet(&self, x: &[f64]) -> Result<Jet> {
        self.dom.w_dirichlet.eval_jet(x)
    }
}

/// Basis values at one point: parallel arrays indexed like `active`.
#[derive(Debug, Clone)]
pub struct BasisPointEval {
    pub active: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
    pub hess: Vec<[f64; 3]>,
}

/// Result of testing weighted-polynomial reproduction.
#[derive(Debug, Clone, Copy)]
pub struct ReproductionResult {
    pub max_residual: f64,
    /// True when the requested total degree exceeds `n - 1`, so a nonzero
    /// residual is expected.
    pub exceeds_order: bool,
}

/// Exact B-spline coefficients of the monomial `x^a` (degree `a <= n-1`),
/// obtained by collocation on one reference patch. The coefficient is a
/// degree-`(n-1)` polynomial in the index, so Lagrange extrapolation from
/// `n` consecutive indices gives it everywhere.
struct MonomialCoeffs {
    node_values: Vec<f64>, // lambda_k at k = 0..n-1
}

impl MonomialCoeffs {
    fn build(n: u32, h: f64, a: u32) -> Result<MonomialCoeffs> {
        let n_us = n as usize;
        // collocate on the cell [(n-1)h, nh] where exactly splines 0..n-1
        // are alive
        let lo = (n - 1) as f64 * h;
        let xs: Vec<f64> =
            (0..n_us).map(|s| lo + h * (s as f64 + 0.5) / n as f64).collect();
        let mat = nalgebra::DMatrix::from_fn(n_us, n_us, |r, c| {
            crate::bspline::bspline_eval(n, c as i64, h, xs[r], 0).unwrap()
        });
        let rhs = nalgebra::DVector::from_iterator(n_us, xs.iter().map(|x| x.powi(a as i32)));
        let sol = mat.lu().solve(&rhs).ok_or(Error::SingularMatrix)?;
        Ok(MonomialCoeffs { node_values: sol.iter().copied().collect() })
    }

    fn at(&self, k: i64) -> f64 {
        let n = self.node_values.len() as i64;
        lagrange_weights(0, n, k)
            .iter()
            .zip(&self.node_values)
            .map(|(w, v)| w * v)
            .sum()
    }
}

/// Max over dense domain samples of `|w(x) p(x) - sum_i c_i B_i(x)|` for
/// the monomial with exponents `p`, using the exact spline coefficients of
/// the polynomial scaled by `w(x_i)`.
pub fn reproduction_residual(basis: &WebBasis, p: &[u32]) -> Result<ReproductionResult> {
    let m = basis.grid.m;
    let n = basis.grid.n;
    let total: u32 = p.iter().sum();
    let exceeds_order = total > n - 1;

    let coeff_fns: Vec<MonomialCoeffs> = (0..m)
        .map(|d| MonomialCoeffs::build(n, basis.grid.h, *p.get(d).unwrap_or(&0)))
        .collect::<Result<_>>()?;
    let lambda = |k: &Index| -> f64 { (0..m).map(|d| coeff_fns[d].at(k[d])).product() };

    let coeffs: Vec<f64> = basis
        .inner_order
        .iter()
        .map(|i| basis.w_at_xi[i] * lambda(i))
        .collect();

    let res = 60usize;
    let bb = &basis.dom.bounding_box;
    let mut max_residual: f64 = 0.0;
    let mut point = [0.0f64; 2];
    let mut sample = |basis: &WebBasis, point: &[f64]| -> Result<()> {
        if !basis.dom.inside(point) {
            return Ok(());
        }
        let eval = basis.eval_at(point, 0)?;
        let mut u_h = 0.0;
        for (slot, &pos) in eval.active.iter().enumerate() {
            u_h += coeffs[pos] * eval.value[slot];
        }
        let mono: f64 = (0..m).map(|d| point[d].powi(p[d] as i32)).product();
        let want = basis.dom.w_dirichlet.eval(point) * mono;
        max_residual = max_residual.max((want - u_h).abs());
        Ok(())
    };
    if m == 1 {
        for i in 0..=res {
            point[0] = bb[0].0 + (bb[0].1 - bb[0].0) * i as f64 / res as f64;
            sample(basis, &point.clone()[..1])?;
        }
    } else {
        for i in 0..=res {
            for j in 0..=res {
                point[0] = bb[0].0 + (bb[0].1 - bb[0].0) * i as f64 / res as f64;
                point[1] = bb[1].0 + (bb[1].1 - bb[1].0) * j as f64 / res as f64;
                sample(basis, &point.clone())?;
            }
        }
    }
    Ok(ReproductionResult { max_residual, exceeds_order })
}
