//! Compressed sparse row storage plus thin wrappers over faer (sparse LU)
//! and nalgebra (dense work).

use faer::sparse::{SparseColMat, Triplet};
use faer::MatMut;
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular or numerically singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
}

/// Row-compressed sparse matrix. Column indices within a row are sorted and unique.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Duplicates are summed in input order, so the result is deterministic.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds {nrows}x{ncols}");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut pos = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[pos[r]] = c;
            vals[pos[r]] = v;
            pos[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut s = 0.0;
                while k < row.len() && row[k].0 == c {
                    s += row[k].1;
                    k += 1;
                }
                indices.push(c);
                values.push(s);
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &t)
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

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        match self.indices[a..b].binary_search(&j) {
            Ok(k) => self.values[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_add(1.0, x, &mut y);
        y
    }

    /// y += alpha * A x
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *yi += alpha * s;
        }
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// self + alpha * other
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<_> = self.triplets().collect();
        t.extend(other.triplets().map(|(i, j, v)| (i, j, alpha * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.triplets().all(|(i, j, v)| (v - self.get(j, i)).abs() <= tol)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            a[(i, j)] += v;
        }
        a
    }

    /// Diagonal entries (zero where absent).
    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }
}

/// Sparse LU factorization backed by faer.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn new(a: &CsrMatrix) -> Result<Self, LinalgError> {
        if a.nrows != a.ncols {
            return Err(LinalgError::Dimension(format!("{}x{} is not square", a.nrows, a.ncols)));
        }
        faer::set_global_parallelism(faer::Par::Seq);
        let n = a.nrows;
        let trip: Vec<_> = a.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        // faer panics on an exactly zero pivot instead of returning an error
        let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| mat.sp_lu()))
            .map_err(|_| LinalgError::Singular)?
            .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        let out = Self { n, lu };
        // faer does not always report exact singularity; probe with a solve
        let mut probe: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        out.solve_in_place(&mut probe);
        if probe.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::Singular);
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.solve_columns(b, 1);
    }

    /// Solve for `ncols` right-hand sides stored column-major in `data`.
    pub fn solve_columns(&self, data: &mut [f64], ncols: usize) {
        use faer::linalg::solvers::SolveCore;
        assert_eq!(data.len(), self.n * ncols);
        if self.n == 0 || ncols == 0 {
            return;
        }
        let m = MatMut::from_column_major_slice_mut(data, self.n, ncols);
        self.lu.solve_in_place_with_conj(faer::Conj::No, m);
    }
}

/// Dense LU for small systems (Schur complements, oracles).
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseLu {
    pub fn new(a: DMatrix<f64>) -> Result<Self, LinalgError> {
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let lu = a.lu();
        let u = lu.u();
        let n = u.nrows().min(u.ncols());
        let min_pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if n > 0 && !(min_pivot > 1e-14 * scale) {
            return Err(LinalgError::Singular);
        }
        Ok(Self { lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = nalgebra::DVector::from_column_slice(b);
        self.lu.solve(&rhs).expect("factorization checked nonsingular").as_slice().to_vec()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0), (1, 2, -1.0), (0, 0, 1.0)],
        )
    }

    #[test]
    fn duplicates_are_summed() {
        let a = sample();
        assert_eq!(a.get(0, 0), 5.0);
        assert_eq!(a.nnz(), 6);
    }

    #[test]
    fn matvec_matches_dense() {
        let a = sample();
        let x = [1.0, -2.0, 0.5];
        let y = a.mul_vec(&x);
        let yd = a.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((y[i] - yd[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn transpose_roundtrip() {
        let a = sample();
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.transpose().get(2, 1), -1.0);
    }

    #[test]
    fn sparse_lu_solves() {
        let a = sample();
        let b = [1.0, 2.0, 3.0];
        let x = SparseLu::new(&a).unwrap().solve(&b);
        let r = a.mul_vec(&x);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn sparse_lu_multi_rhs() {
        let a = sample();
        let lu = SparseLu::new(&a).unwrap();
        let mut data = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        lu.solve_columns(&mut data, 2);
        let inv = a.to_dense().try_inverse().unwrap();
        for k in 0..3 {
            assert!((data[k] - inv[(k, 0)]).abs() < 1e-13);
            assert!((data[3 + k] - inv[(k, 1)]).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(SparseLu::new(&a).is_err());
        assert!(DenseLu::new(a.to_dense()).is_err());
    }
}
