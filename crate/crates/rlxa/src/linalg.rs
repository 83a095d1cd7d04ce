//! Small sparse/dense linear algebra layer.
//!
//! Assembled operators are stored as CSR and used through matvec and
//! quadratic forms; factorizations for implicit solves and eigenproblems
//! go through dense nalgebra at the desk scales this crate targets.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{Error, Real, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// Build from (row, col, value) triplets; duplicates are summed and
    /// entries below `drop_tol` in magnitude are dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, T)],
        drop_tol: T,
    ) -> Self {
        let mut per_row: Vec<Vec<(usize, T)>> = vec![Vec::new(); n_rows];
        for &(r, c, v) in triplets {
            per_row[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &mut per_row {
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = T::zero();
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v.abs() > drop_tol {
                    col_idx.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n_rows, n_cols, row_ptr, col_idx, vals }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A x
    pub fn matvec(&self, x: &DVector<T>) -> DVector<T> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = DVector::zeros(self.n_rows);
        for r in 0..self.n_rows {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
        y
    }

    /// x' A y
    pub fn quad_form(&self, x: &DVector<T>, y: &DVector<T>) -> T {
        assert_eq!(x.len(), self.n_rows);
        assert_eq!(y.len(), self.n_cols);
        let mut acc = T::zero();
        for r in 0..self.n_rows {
            let mut row_acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row_acc += self.vals[k] * y[self.col_idx[k]];
            }
            acc += x[r] * row_acc;
        }
        acc
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] = self.vals[k];
            }
        }
        m
    }

    pub fn row_sums(&self) -> DVector<T> {
        let mut s = DVector::zeros(self.n_rows);
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s[r] += self.vals[k];
            }
        }
        s
    }

    /// Maximum absolute asymmetry |A - A'|; assembly asserts this is at
    /// machine level.
    pub fn asymmetry(&self) -> T {
        let d = self.to_dense();
        let dt = d.transpose();
        (&d - &dt).abs().max()
    }

    /// Iterate stored entries as (row, col, value).
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.col_idx[k], self.vals[k]))
        })
    }
}

/// Dense Cholesky wrapper kept alongside the sparse operator for repeated
/// solves with the same SPD matrix.
#[derive(Clone)]
pub struct SpdFactor<T: Real> {
    chol: Cholesky<T, Dyn>,
}

impl<T: Real> SpdFactor<T> {
    pub fn new(a: DMatrix<T>) -> Result<Self> {
        let chol = Cholesky::new(a)
            .ok_or_else(|| Error::EigenFailure("matrix not positive definite".into()))?;
        Ok(Self { chol })
    }

    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        self.chol.solve(b)
    }
}

impl<T: Real> std::fmt::Debug for SpdFactor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SpdFactor(n = {})", self.chol.l_dirty().nrows())
    }
}

/// Smallest eigenpair of the generalized symmetric problem A x = lambda B x
/// (A symmetric positive definite, B symmetric positive definite) computed
/// densely via B = L L', C = L^-1 A L^-T.
pub fn dense_smallest_generalized_eig<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
) -> Result<(T, DVector<T>)> {
    let (vals, vecs) = dense_generalized_eig(a, b)?;
    let mut idx = 0;
    for i in 1..vals.len() {
        if vals[i] < vals[idx] {
            idx = i;
        }
    }
    Ok((vals[idx], vecs.column(idx).into_owned()))
}

/// Full generalized symmetric eigendecomposition A x = lambda B x.
/// Returns (eigenvalues, B-orthonormal eigenvectors as columns).
pub fn dense_generalized_eig<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
) -> Result<(DVector<T>, DMatrix<T>)> {
    let chol = Cholesky::new(b.clone())
        .ok_or_else(|| Error::EigenFailure("B not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::EigenFailure("singular Cholesky factor".into()))?;
    let c = &linv * a * linv.transpose();
    // Symmetrize away roundoff before the symmetric eigensolver.
    let c = (&c + c.transpose()) * T::of(0.5);
    let se = c.symmetric_eigen();
    let vecs = linv.transpose() * se.eigenvectors;
    Ok((se.eigenvalues, vecs))
}

/// Shifted inverse power iteration for the smallest eigenvalue of
/// A x = lambda M x with A, M symmetric positive definite.
pub fn inverse_power_smallest<T: Real>(
    a: &Csr<T>,
    m: &Csr<T>,
    shift: T,
    tol: T,
    max_iters: usize,
) -> Result<(T, DVector<T>)> {
    let n = a.n_rows();
    let shifted = a.to_dense() - m.to_dense() * shift;
    let factor = SpdFactor::new(shifted)?;
    let mut x = DVector::from_element(n, T::one());
    // Deterministic tie-break against starting exactly M-orthogonal to the
    // ground mode.
    for i in 0..n {
        x[i] += T::of(1e-3) * T::of((i % 7) as f64);
    }
    let mnorm = |v: &DVector<T>| m.quad_form(v, v).sqrt();
    let s = mnorm(&x);
    x /= s;
    let mut lambda = a.quad_form(&x, &x) / m.quad_form(&x, &x);
    for _ in 0..max_iters {
        let y = factor.solve(&m.matvec(&x));
        let s = mnorm(&y);
        if s <= T::zero() {
            return Err(Error::EigenFailure("inverse iteration collapsed".into()));
        }
        x = y / s;
        let next = a.quad_form(&x, &x) / m.quad_form(&x, &x);
        let delta = (next - lambda).abs();
        lambda = next;
        if delta <= tol * lambda.abs().max(T::one()) {
            return Ok((lambda, x));
        }
    }
    Err(Error::EigenFailure(format!(
        "inverse iteration stagnated after {max_iters} iterations"
    )))
}

/// Matrix exponential exp(A) (dense, scaling and squaring via nalgebra).
pub fn expm<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    a.exp()
}
