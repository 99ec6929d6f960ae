//! Compressed sparse row operators.
//!
//! States are always dense; operators built from local terms (PXP drives,
//! conditional lowering operators) have a handful of entries per row and are
//! kept in CSR form so that applying them to a dense density matrix costs
//! `nnz · dim` rather than `dim³`.

use num_complex::Complex64 as C64;

use super::matrix::ComplexMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Assembles from `(row, col, value)` triplets. Duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = Self { rows, cols, row_ptr, col_idx, values };
        m.prune();
        m
    }

    pub fn from_dense(a: &ComplexMatrix) -> Self {
        let mut trip = Vec::new();
        for r in 0..a.rows() {
            for (c, &v) in a.row(r).iter().enumerate() {
                if v != C64::new(0.0, 0.0) {
                    trip.push((r, c, v));
                }
            }
        }
        Self::from_triplets(a.rows(), a.cols(), trip)
    }

    fn prune(&mut self) {
        let mut row_ptr = vec![0; self.rows + 1];
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k] != C64::new(0.0, 0.0) {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row_entries(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m.prune();
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sparse add shape mismatch");
        Self::from_triplets(self.rows, self.cols, self.triplets().chain(other.triplets()).collect())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "sparse matmul inner dimension mismatch");
        let mut trip = Vec::new();
        for r in 0..self.rows {
            for (k, a) in self.row_entries(r) {
                for (c, b) in other.row_entries(k) {
                    trip.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.rows, other.cols, trip)
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|r| self.row_entries(r).map(|(c, a)| a * v[c]).sum()).collect()
    }

    /// True when every nonzero sits on the diagonal.
    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    /// Dense diagonal; off-diagonal entries are ignored.
    pub fn diagonal(&self) -> Vec<C64> {
        let mut d = vec![C64::new(0.0, 0.0); self.rows.min(self.cols)];
        for (r, c, v) in self.triplets() {
            if r == c {
                d[r] += v;
            }
        }
        d
    }

    /// Rows holding at least one nonzero.
    pub fn nonzero_rows(&self) -> Vec<usize> {
        (0..self.rows).filter(|&r| self.row_ptr[r + 1] > self.row_ptr[r]).collect()
    }

    /// `out += scale · self · rho` for dense square `rho`.
    pub fn left_mul_acc(&self, rho: &ComplexMatrix, scale: C64, out: &mut ComplexMatrix) {
        for r in 0..self.rows {
            for (k, a) in self.row_entries(r) {
                let coeff = scale * a;
                let src = rho.row(k);
                // Rows r and k of different matrices; no aliasing.
                for (o, &x) in out.row_mut(r).iter_mut().zip(src) {
                    *o += coeff * x;
                }
            }
        }
    }

    /// `out += scale · rho · self†` for dense square `rho`.
    pub fn right_mul_adjoint_acc(&self, rho: &ComplexMatrix, scale: C64, out: &mut ComplexMatrix) {
        // (ρ K†)[r, c] = Σ_k ρ[r, k] conj(K[c, k])
        for r in 0..rho.rows() {
            let src = rho.row(r);
            let dst = out.row_mut(r);
            for (c, d) in dst.iter_mut().enumerate().take(self.rows) {
                let mut acc = C64::new(0.0, 0.0);
                for (k, v) in self.row_entries(c) {
                    acc += src[k] * v.conj();
                }
                *d += scale * acc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix::pauli;

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let one = C64::new(1.0, 0.0);
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 1, one), (0, 1, one), (1, 0, one), (1, 0, -one)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.to_dense()[(0, 1)], C64::new(2.0, 0.0));
    }

    #[test]
    fn dense_round_trip_and_products() {
        let a = pauli::y().kron(&pauli::lower());
        let b = pauli::x().kron(&pauli::z());
        let sa = SparseMatrix::from_dense(&a);
        let sb = SparseMatrix::from_dense(&b);
        assert_eq!(sa.to_dense(), a);
        assert!(sa.matmul(&sb).to_dense().max_abs_diff(&a.matmul(&b)) < 1e-15);
        assert!(sa.adjoint().to_dense().max_abs_diff(&a.adjoint()) < 1e-15);

        let rho = ComplexMatrix::from_fn(4, 4, |r, c| C64::new(r as f64, 0.3 * c as f64));
        let mut out = ComplexMatrix::zeros(4, 4);
        sa.left_mul_acc(&rho, C64::new(1.0, 0.0), &mut out);
        assert!(out.max_abs_diff(&a.matmul(&rho)) < 1e-14);
        let mut out = ComplexMatrix::zeros(4, 4);
        sa.right_mul_adjoint_acc(&rho, C64::new(1.0, 0.0), &mut out);
        assert!(out.max_abs_diff(&rho.matmul(&a.adjoint())) < 1e-14);
    }
}
