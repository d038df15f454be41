//! Minimal compressed-sparse-row storage for the assembled FE matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicate entries are
    /// summed, which is what element-by-element assembly needs.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|a| (a.0, a.1));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, &[])
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(row, col, value)` over stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        DVector::from_fn(self.nrows.min(self.ncols), |i, _| self.get(i, i))
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "csr mul_vec dimension");
        let mut y = DVector::zeros(self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
        y
    }

    pub fn try_mul_vec(&self, x: &DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
        if x.len() != self.ncols {
            return Err(Error::shape(what, self.ncols, x.len()));
        }
        Ok(self.mul_vec(x))
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.mul_vec(x))
    }

    /// `A X` for a dense right-hand block.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut y = DMatrix::zeros(self.nrows, x.ncols());
        for j in 0..x.ncols() {
            for r in 0..self.nrows {
                let mut acc = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.values[k] * x[(self.col_idx[k], j)];
                }
                y[(r, j)] = acc;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    pub fn sum_entries(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn row_sums(&self) -> DVector<f64> {
        DVector::from_fn(self.nrows, |r, _| {
            self.values[self.row_ptr[r]..self.row_ptr[r + 1]].iter().sum()
        })
    }

    /// Frobenius norm of `A - Aᵀ`.
    pub fn asymmetry(&self) -> f64 {
        let mut acc = 0.0;
        for (r, c, v) in self.triplets() {
            let d = v - self.get(c, r);
            acc += d * d;
        }
        acc.sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Linear combination `Σ cᵢ Aᵢ` of equally sized matrices.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Self {
        let (nrows, ncols) = terms.first().map(|(_, m)| (m.nrows, m.ncols)).unwrap_or((0, 0));
        let mut triplets = Vec::new();
        for (c, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nrows, ncols));
            triplets.extend(m.triplets().map(|(r, col, v)| (r, col, c * v)));
        }
        Self::from_triplets(nrows, ncols, &triplets)
    }

    /// Scatters a square matrix indexed by `map` into an `n × n` matrix:
    /// entry `(i, j)` lands at `(map[i], map[j])`.
    pub fn embed(&self, map: &[usize], n: usize) -> Self {
        assert_eq!(self.nrows, map.len());
        let t: Vec<_> = self.triplets().map(|(r, c, v)| (map[r], map[c], v)).collect();
        Self::from_triplets(n, n, &t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0), (1, 0, -1.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 3);
        let y = a.mul_vec(&DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!(y.as_slice(), &[4.0, 1.0]);
    }

    #[test]
    fn embed_places_entries() {
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]);
        let e = b.embed(&[0, 3], 4);
        assert_eq!(e.get(0, 3), 2.0);
        assert_eq!(e.get(3, 3), 3.0);
        assert_eq!(e.sum_entries(), 6.0);
    }
}
