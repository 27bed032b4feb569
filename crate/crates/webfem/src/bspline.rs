//! Uniform tensor-product B-splines on a Cartesian grid.
//!
//! The 1D factor of order `n` (polynomial degree `n - 1`) with index `k` is
//! supported on `[k*h, (k+n)*h]`, i.e. on `n` consecutive grid cells.
//! Evaluation at knots uses the right-continuous limit so that cell-wise
//! quadrature never samples ambiguous values.

use crate::error::{Error, Result};

/// Multi-index into the spline grid. One-dimensional problems use `idx[1] = 0`.
pub type Index = [i64; 2];

/// Uniform Cartesian grid carrying the spline space parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Grid width, > 0.
    pub h: f64,
    /// Spline order (polynomial degree `n - 1`), >= 2.
    pub n: u32,
    /// Spatial dimension, 1 or 2.
    pub m: usize,
    /// Per-dimension inclusive range of relevant B-spline indices.
    pub index_box: [(i64, i64); 2],
}

impl GridSpec {
    pub fn new(h: f64, n: u32, m: usize, index_box: [(i64, i64); 2]) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidSpline(format!("grid width h = {h} must be > 0")));
        }
        if n < 2 {
            return Err(Error::InvalidSpline(format!("spline order n = {n} must be >= 2")));
        }
        if m != 1 && m != 2 {
            return Err(Error::InvalidSpline(format!("dimension m = {m} must be 1 or 2")));
        }
        Ok(GridSpec { h, n, m, index_box })
    }

    /// Grid whose index box covers every spline whose support can intersect
    /// the axis-aligned box `bounds` (per-dimension `(lo, hi)` pairs).
    pub fn covering(h: f64, n: u32, m: usize, bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: bounds.len() });
        }
        let mut index_box = [(0i64, 0i64); 2];
        for (d, &(lo, hi)) in bounds.iter().enumerate() {
            // supp b_k = [k*h, (k+n)*h] intersects [lo, hi] iff k*h < hi and (k+n)*h > lo
            let k_lo = (lo / h).floor() as i64 - n as i64 + 1;
            let k_hi = (hi / h).ceil() as i64 - 1 + 1; // last k with k*h < hi (inclusive slack)
            index_box[d] = (k_lo, k_hi);
        }
        GridSpec::new(h, n, m, index_box)
    }
}

/// Identifies the grid cell `[l*h, (l+1)*h]` per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub l: Index,
}

impl CellId {
    pub fn new(l: Index) -> Self {
        CellId { l }
    }

    /// Lower corner of the cell.
    pub fn lower(&self, h: f64) -> [f64; 2] {
        [self.l[0] as f64 * h, self.l[1] as f64 * h]
    }

    /// Upper corner of the cell.
    pub fn upper(&self, h: f64) -> [f64; 2] {
        [(self.l[0] + 1) as f64 * h, (self.l[1] + 1) as f64 * h]
    }

    /// Cell center.
    pub fn center(&self, h: f64) -> [f64; 2] {
        [(self.l[0] as f64 + 0.5) * h, (self.l[1] as f64 + 0.5) * h]
    }

    /// Cell containing `x` (right-continuous convention).
    pub fn containing(x: &[f64], h: f64, m: usize) -> Self {
        let mut l = [0i64; 2];
        for d in 0..m {
            l[d] = (x[d] / h).floor() as i64;
        }
        CellId { l }
    }
}

/// `d`-th derivative of the uniform B-spline of order `n` with knots
/// `{k*h, (k+1)*h, ..., (k+n)*h}`, evaluated at `x`.
///
/// Zero outside `[k*h, (k+n)*h]`; at knots the right-continuous limit is
/// returned. Derivative orders `d >= n` return 0 (the piecewise polynomial
/// has degree `n - 1`).
pub fn bspline_eval(n: u32, k: i64, h: f64, x: f64, d: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidSpline(format!("order n = {n} must be >= 1")));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidSpline(format!("grid width h = {h} must be > 0")));
    }
    Ok(bspline_rec(n, k, h, x, d))
}

fn bspline_rec(n: u32, k: i64, h: f64, x: f64, d: u32) -> f64 {
    if d >= n {
        return 0.0;
    }
    if d > 0 {
        return (bspline_rec(n - 1, k, h, x, d - 1) - bspline_rec(n - 1, k + 1, h, x, d - 1)) / h;
    }
    if n == 1 {
        let lo = k as f64 * h;
        return if x >= lo && x < lo + h { 1.0 } else { 0.0 };
    }
    let lo = k as f64 * h;
    let hi = (k + n as i64) as f64 * h;
    if x < lo || x >= hi {
        return 0.0;
    }
    let denom = (n - 1) as f64 * h;
    ((x - lo) * bspline_rec(n - 1, k, h, x, 0) + (hi - x) * bspline_rec(n - 1, k + 1, h, x, 0))
        / denom
}

/// Values of all (up to `n`) B-splines that are nonzero at `x`, for one
/// derivative order. `vals[j]` is the `d`-th derivative of `b_{first + j}`.
#[derive(Debug, Clone)]
pub struct SplineValues {
    pub first: i64,
    pub vals: Vec<f64>,
}

impl SplineValues {
    /// Value for spline index `k`, zero if `k` is outside the nonzero window.
    pub fn get(&self, k: i64) -> f64 {
        let off = k - self.first;
        if off < 0 || off as usize >= self.vals.len() {
            0.0
        } else {
            self.vals[off as usize]
        }
    }
}

/// Simultaneous evaluation of every order-`n` B-spline that is nonzero at
/// `x` (splines `l-n+1 ..= l` where `l` is the cell of `x`), via the
/// Cox-de Boor triangle plus the derivative differencing
/// `D b_k^n = (b_k^{n-1} - b_{k+1}^{n-1}) / h`.
pub fn nonzero_values(n: u32, h: f64, x: f64, d: u32) -> SplineValues {
    let l = (x / h).floor() as i64;
    let first = l - n as i64 + 1;
    let n_us = n as usize;
    if d >= n {
        return SplineValues { first, vals: vec![0.0; n_us] };
    }
    let order = n - d; // evaluate order n-d values, then difference d times
    let t = x / h;
    // tri[j] holds b^r_{l-r+1+j}(x) for the current order r.
    let mut tri = vec![1.0f64];
    for r in 2..=order as i64 {
        let mut next = vec![0.0f64; r as usize];
        for j in 0..r {
            let k = l - r + 1 + j;
            let left = if j > 0 { tri[j as usize - 1] } else { 0.0 };
            let right = if (j as usize) < tri.len() { tri[j as usize] } else { 0.0 };
            next[j as usize] =
                ((t - k as f64) * left + (k as f64 + r as f64 - t) * right) / (r - 1) as f64;
        }
        tri = next;
    }
    let base_first = l - order as i64 + 1;
    let base = SplineValues { first: base_first, vals: tri };
    if d == 0 {
        return base;
    }
    // binomial coefficients C(d, i)
    let mut binom = vec![1.0f64; d as usize + 1];
    for i in 1..=d as usize {
        binom[i] = binom[i - 1] * (d as usize - i + 1) as f64 / i as f64;
    }
    let scale = h.powi(-(d as i32));
    let mut vals = vec![0.0f64; n_us];
    for (j, v) in vals.iter_mut().enumerate() {
        let k = first + j as i64;
        let mut acc = 0.0;
        for (i, b) in binom.iter().enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * b * base.get(k + i as i64);
        }
        *v = acc * scale;
    }
    SplineValues { first, vals }
}

/// Tensor-product B-spline value: product over dimensions of `bspline_eval`.
pub fn tensor_eval(grid: &GridSpec, k: &[i64], x: &[f64], d: &[u32]) -> Result<f64> {
    if k.len() != grid.m || x.len() != grid.m || d.len() != grid.m {
        return Err(Error::DimensionMismatch {
            expected: grid.m,
            got: k.len().min(x.len()).min(d.len()),
        });
    }
    let mut prod = 1.0;
    for dim in 0..grid.m {
        prod *= bspline_eval(grid.n, k[dim], grid.h, x[dim], d[dim])?;
        if prod == 0.0 {
            return Ok(0.0);
        }
    }
    Ok(prod)
}

/// The `n^m` cells `{l : k_i <= l_i <= k_i + n - 1}` tiling the support of
/// the tensor B-spline with index `k`.
pub fn support_cells(grid: &GridSpec, k: &Index) -> Vec<CellId> {
    let n = grid.n as i64;
    let mut cells = Vec::with_capacity((n as usize).pow(grid.m as u32));
    if grid.m == 1 {
        for l0 in k[0]..k[0] + n {
            cells.push(CellId::new([l0, 0]));
        }
    } else {
        for l0 in k[0]..k[0] + n {
            for l1 in k[1]..k[1] + n {
                cells.push(CellId::new([l0, l1]));
            }
        }
    }
    cells
}
