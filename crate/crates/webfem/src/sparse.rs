//! Minimal sparse matrix support: triplet accumulation, CSR storage,
//! matrix-vector products and Matrix Market export.

use std::io::Write;

use crate::error::Result;

/// Unordered (row, col, value) accumulator; duplicates are summed when
/// converting to CSR.
#[derive(Debug, Clone)]
pub struct Triplets {
    pub n_rows: usize,
    pub n_cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Triplets { n_rows, n_cols, entries: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.entries.push((row, col, value));
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut sorted = self.entries.clone();
        sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; self.n_rows + 1];
        let mut indices = Vec::new();
        let mut data: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 1..=self.n_rows {
            indptr[i] += indptr[i - 1];
        }
        CsrMatrix { n_rows: self.n_rows, n_cols: self.n_cols, indptr, indices, data }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let lo = self.indptr[row];
        let hi = self.indptr[row + 1];
        match self.indices[lo..hi].binary_search(&col) {
            Ok(off) => self.data[lo + off],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[p] * x[self.indices[p]];
            }
            *o = acc;
        }
    }

    pub fn matvec_transpose(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(out.len(), self.n_cols);
        out.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.n_rows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                out[self.indices[p]] += self.data[p] * x[r];
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                m[(r, self.indices[p])] = self.data[p];
            }
        }
        m
    }

    /// Matrix Market coordinate text format.
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for r in 0..self.n_rows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                writeln!(w, "{} {} {:.16e}", r + 1, self.indices[p] + 1, self.data[p])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_accumulation() {
        let mut t = Triplets::new(3, 3);
        t.push(0, 0, 1.0);
        t.push(2, 1, 4.0);
        t.push(0, 0, 2.0);
        t.push(1, 2, 5.0);
        let m = t.to_csr();
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 2), 5.0);
        assert_eq!(m.get(2, 1), 4.0);
        assert_eq!(m.get(2, 2), 0.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn matvec_roundtrip() {
        let mut t = Triplets::new(2, 3);
        t.push(0, 0, 1.0);
        t.push(0, 2, 2.0);
        t.push(1, 1, 3.0);
        let m = t.to_csr();
        let mut out = vec![0.0; 2];
        m.matvec(&[1.0, 1.0, 1.0], &mut out);
        assert_eq!(out, vec![3.0, 3.0]);
        let mut out_t = vec![0.0; 3];
        m.matvec_transpose(&[1.0, 1.0], &mut out_t);
        assert_eq!(out_t, vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn matrix_market_output() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 0, 1.5);
        t.push(1, 0, -2.0);
        let mut buf = Vec::new();
        t.to_csr().write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general"));
        assert!(text.contains("2 2 2"));
        assert!(text.contains("2 1 -2"));
    }
}
