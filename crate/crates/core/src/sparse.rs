//! Compressed sparse row matrices and a deflated conjugate-gradient solver.

use crate::{Error, Result};
use num_traits::{Num, Zero};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy + Num> SparseMatrix<T> {
    /// Duplicates are summed, explicit zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut trip: Vec<(usize, usize, T)>) -> Self {
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<T> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            assert!(r < rows && c < cols, "triplet out of bounds");
            if last == Some((r, c)) {
                let l = values.len() - 1;
                values[l] = values[l] + v;
            } else {
                indices.push(c);
                values.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for ((c, v), r) in indices.into_iter().zip(values).zip(row_of) {
            if !v.is_zero() {
                keep_idx.push(c);
                keep_val.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        SparseMatrix {
            rows,
            cols,
            indptr,
            indices: keep_idx,
            values: keep_val,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_triplets(rows, cols, Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, T::one())).collect())
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

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r)
            .find(|&(j, _)| j == c)
            .map(|(_, v)| v)
            .unwrap_or_else(T::zero)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.cols, self.rows, t)
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).fold(T::zero(), |acc, (c, v)| acc + v * x[c]))
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut trip = Vec::new();
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    trip.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.rows, other.cols, trip)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut trip = self.triplets();
        trip.extend(other.triplets());
        Self::from_triplets(self.rows, self.cols, trip)
    }

    pub fn map<U: Copy + Num>(&self, f: impl Fn(T) -> U) -> SparseMatrix<U> {
        let trip = self.triplets().into_iter().map(|(r, c, v)| (r, c, f(v))).collect();
        SparseMatrix::from_triplets(self.rows, self.cols, trip)
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Removes the components along an orthonormal family.
pub fn deflate(x: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(x, q);
        for (xi, qi) in x.iter_mut().zip(q) {
            *xi -= c * qi;
        }
    }
}

/// Gram–Schmidt (twice, for stability) in the Euclidean inner product.
pub fn orthonormalize(vecs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vecs {
        let mut w = v.clone();
        deflate(&mut w, &out);
        deflate(&mut w, &out);
        let n = norm(&w);
        if n > 1e-12 {
            w.iter_mut().for_each(|x| *x /= n);
            out.push(w);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive semidefinite operator whose
/// kernel is spanned by the orthonormal family `kernel`. The right-hand side
/// must already be orthogonal to the kernel; the iterate is kept orthogonal
/// to it, which selects the minimum-norm solution.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    kernel: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = rhs.len();
    let bnorm = norm(rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = rhs.to_vec();
    deflate(&mut r, kernel);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = tol * bnorm;
    let mut it = 0;
    while rr.sqrt() > target && it < max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        deflate(&mut r, kernel);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        it += 1;
    }
    deflate(&mut x, kernel);
    // Report the true residual, not the recursively updated one.
    let ax = apply(&x);
    let res: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let residual = norm(&res);
    if residual > 10.0 * target.max(1e-14 * bnorm) && it >= max_iter {
        return Err(Error::NoConvergence {
            residual,
            iterations: it,
        });
    }
    Ok(CgOutcome {
        solution: x,
        iterations: it,
        residual,
    })
}

/// Minimum-norm least-squares solution of `A x = b` via CG on the normal
/// equations. Used for consistent systems on nerves.
pub fn least_squares(a: &SparseMatrix<f64>, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let at = a.transpose();
    let rhs = at.mul_vec(b);
    let apply = |x: &[f64]| at.mul_vec(&a.mul_vec(x));
    let out = conjugate_gradient(apply, &rhs, &[], tol, 20 * a.cols().max(10))?;
    Ok(out.solution)
}

impl<T: Copy + Num + Zero> SparseMatrix<T> {
    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows * self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[r * self.cols + c] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 2), (0, 1, -2), (1, 0, 3), (1, 0, 1)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 0), 4);
        assert_eq!(m.transpose().get(0, 1), 4);
    }

    #[test]
    fn cg_solves_path_laplacian_with_kernel() {
        // Periodic 1D Laplacian has the constants as kernel.
        let n = 16;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0));
            trip.push((i, (i + 1) % n, -1.0));
            trip.push((i, (i + n - 1) % n, -1.0));
        }
        let l = SparseMatrix::from_triplets(n, n, trip);
        let ones = orthonormalize(&[vec![1.0; n]]);
        let mut x0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        deflate(&mut x0, &ones);
        let b = l.mul_vec(&x0);
        let out = conjugate_gradient(|x| l.mul_vec(x), &b, &ones, 1e-13, 1000).unwrap();
        for (a, b) in out.solution.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
