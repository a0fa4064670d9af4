//! Minimal compressed-sparse-row matrices.
//!
//! The curl matrix and source selector are extremely sparse (a handful of
//! entries per row) and only need matrix-vector products, transposition and
//! one scaled Gram product for the Schur complement, so a small hand-rolled
//! CSR type beats pulling in a sparse-algebra dependency.

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Csr<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Copy + PartialEq + std::ops::AddAssign> Csr<T> {
    /// Builds a CSR matrix from (row, col, value) triplets. Duplicate
    /// coordinates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
        }
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(sorted.len());
        let mut vals: Vec<T> = Vec::with_capacity(sorted.len());
        let mut row = 0usize;
        for (r, c, v) in sorted {
            while row < r {
                row += 1;
                row_ptr[row] = cols.len();
            }
            if cols.last() == Some(&c) && row_ptr[row] < cols.len() {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
            }
        }
        while row < nrows {
            row += 1;
            row_ptr[row] = cols.len();
        }
        Csr {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }
}

impl<T: Copy> Csr<T> {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    /// Iterates all stored entries as (row, col, value).
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter()
                .zip(vals.iter())
                .map(move |(&c, &v)| (r, c, v))
        })
    }

    /// Number of stored entries in each column.
    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.ncols];
        for &c in &self.cols {
            counts[c] += 1;
        }
        counts
    }
}

macro_rules! csr_numeric_impl {
    ($t:ty) => {
        impl Csr<$t> {
            /// y = A x
            pub fn mul_vec(&self, x: &[$t], y: &mut [$t]) {
                assert_eq!(x.len(), self.ncols);
                assert_eq!(y.len(), self.nrows);
                for r in 0..self.nrows {
                    let mut acc = <$t>::default();
                    for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                        acc += self.vals[p] * x[self.cols[p]];
                    }
                    y[r] = acc;
                }
            }

            pub fn transpose(&self) -> Csr<$t> {
                let mut row_ptr = vec![0usize; self.ncols + 1];
                for &c in &self.cols {
                    row_ptr[c + 1] += 1;
                }
                for i in 0..self.ncols {
                    row_ptr[i + 1] += row_ptr[i];
                }
                let mut cols = vec![0usize; self.nnz()];
                let mut vals = vec![<$t>::default(); self.nnz()];
                let mut fill = row_ptr.clone();
                for r in 0..self.nrows {
                    for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                        let c = self.cols[p];
                        cols[fill[c]] = r;
                        vals[fill[c]] = self.vals[p];
                        fill[c] += 1;
                    }
                }
                Csr {
                    nrows: self.ncols,
                    ncols: self.nrows,
                    row_ptr,
                    cols,
                    vals,
                }
            }

            pub fn to_dense(&self) -> DMatrix<$t> {
                let mut m = DMatrix::zeros(self.nrows, self.ncols);
                for (r, c, v) in self.triplets() {
                    m[(r, c)] += v;
                }
                m
            }
        }
    };
}

csr_numeric_impl!(f64);
csr_numeric_impl!(Complex64);

impl Csr<f64> {
    /// y = A x for complex x with real A.
    pub fn mul_vec_c(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[p]] * self.vals[p];
            }
            y[r] = acc;
        }
    }

    /// Scaled Gram product `diag(a) + scale * K diag(d) K^T`, returned as a
    /// complex CSR matrix. `kt` must be the transpose of `self`.
    pub fn scaled_gram(
        &self,
        kt: &Csr<f64>,
        a_diag: &[Complex64],
        d_diag: &[Complex64],
        scale: Complex64,
    ) -> Csr<Complex64> {
        let n = self.nrows;
        assert_eq!(a_diag.len(), n);
        assert_eq!(d_diag.len(), self.ncols);
        assert_eq!(kt.nrows, self.ncols);

        let mut accum = vec![Complex64::new(0.0, 0.0); n];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols: Vec<usize> = Vec::new();
        let mut vals: Vec<Complex64> = Vec::new();

        for i in 0..n {
            touched.clear();
            // diagonal block first so the row always has its diagonal entry
            accum[i] = a_diag[i];
            touched.push(i);
            let (kcols, kvals) = self.row(i);
            for (&h, &kih) in kcols.iter().zip(kvals) {
                let coeff = scale * d_diag[h] * kih;
                let (jcols, jvals) = kt.row(h);
                for (&j, &kjh) in jcols.iter().zip(jvals) {
                    if accum[j] == Complex64::new(0.0, 0.0) && !touched.contains(&j) {
                        touched.push(j);
                    }
                    accum[j] += coeff * kjh;
                }
            }
            touched.sort_unstable();
            touched.dedup();
            for &j in &touched {
                cols.push(j);
                vals.push(accum[j]);
                accum[j] = Complex64::new(0.0, 0.0);
            }
            row_ptr[i + 1] = cols.len();
        }
        Csr {
            nrows: n,
            ncols: n,
            row_ptr,
            cols,
            vals,
        }
    }
}

impl Csr<Complex64> {
    /// Maximum |row - col| over stored entries (bandwidth of the pattern).
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for (r, c, _) in self.triplets() {
            bw = bw.max(r.abs_diff(c));
        }
        bw
    }
}
