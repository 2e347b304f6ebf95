//! Integer Smith reduction with unimodular certificates.
//!
//! `smith` computes unimodular `R`, `C` and a diagonal `D` with
//! `R · A · C = D`. The diagonal is positive but not yet a divisibility
//! chain; [`SmithForm::invariant_factors`] normalizes it. Which of `R`,
//! `R⁻¹`, `C` are accumulated is chosen by the caller since each costs
//! one dense square matrix.

use crate::sparse::SparseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct Tracking {
    pub row: bool,
    pub row_inv: bool,
    pub col: bool,
}

#[derive(Debug, Clone)]
pub struct SmithForm {
    pub rows: usize,
    pub cols: usize,
    /// Positive pivots `D[i][i]`, `i < rank`.
    pub diagonal: Vec<i64>,
    /// `R` stored by rows.
    pub row: Option<Vec<Vec<i64>>>,
    /// `R⁻¹` stored by columns.
    pub row_inv: Option<Vec<Vec<i64>>>,
    /// `C` stored by columns.
    pub col: Option<Vec<Vec<i64>>>,
}

fn sub_mul(a: i64, q: i64, b: i64) -> Result<i64> {
    q.checked_mul(b)
        .and_then(|p| a.checked_sub(p))
        .ok_or(Error::Overflow)
}

fn axpy(target: &mut [i64], q: i64, src: &[i64]) -> Result<()> {
    // target -= q * src
    for (t, s) in target.iter_mut().zip(src) {
        if *s != 0 {
            *t = sub_mul(*t, q, *s)?;
        }
    }
    Ok(())
}

fn identity(n: usize) -> Vec<Vec<i64>> {
    (0..n)
        .map(|i| {
            let mut v = vec![0; n];
            v[i] = 1;
            v
        })
        .collect()
}

struct Reducer {
    a: Vec<Vec<i64>>,
    m: usize,
    n: usize,
    r: Option<Vec<Vec<i64>>>,
    rinv: Option<Vec<Vec<i64>>>,
    c: Option<Vec<Vec<i64>>>,
}

impl Reducer {
    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        self.a.swap(i, j);
        if let Some(r) = &mut self.r {
            r.swap(i, j);
        }
        if let Some(ri) = &mut self.rinv {
            ri.swap(i, j);
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for row in &mut self.a {
            row.swap(i, j);
        }
        if let Some(c) = &mut self.c {
            c.swap(i, j);
        }
    }

    /// row_i -= q · row_t
    fn row_op(&mut self, i: usize, t: usize, q: i64, support: &[usize]) -> Result<()> {
        let (src, dst) = if i > t {
            let (lo, hi) = self.a.split_at_mut(i);
            (&lo[t], &mut hi[0])
        } else {
            let (lo, hi) = self.a.split_at_mut(t);
            (&hi[0], &mut lo[i])
        };
        for &c in support {
            dst[c] = sub_mul(dst[c], q, src[c])?;
        }
        if let Some(r) = &mut self.r {
            let src = r[t].clone();
            axpy(&mut r[i], q, &src)?;
        }
        if let Some(ri) = &mut self.rinv {
            // R⁻¹ ← R⁻¹ (I + q e_i e_tᵀ): column t gains q · column i.
            let src = ri[i].clone();
            axpy(&mut ri[t], -q, &src)?;
        }
        Ok(())
    }

    /// col_j -= q · col_t, where column t is zero outside row `t`.
    fn col_op(&mut self, j: usize, t: usize, q: i64) -> Result<()> {
        let v = self.a[t][t];
        self.a[t][j] = sub_mul(self.a[t][j], q, v)?;
        if let Some(c) = &mut self.c {
            let src = c[t].clone();
            axpy(&mut c[j], q, &src)?;
        }
        Ok(())
    }

    fn negate_row(&mut self, t: usize) {
        self.a[t].iter_mut().for_each(|x| *x = -*x);
        if let Some(r) = &mut self.r {
            r[t].iter_mut().for_each(|x| *x = -*x);
        }
        if let Some(ri) = &mut self.rinv {
            ri[t].iter_mut().for_each(|x| *x = -*x);
        }
    }

    fn run(&mut self) -> Result<Vec<i64>> {
        let mut diag = Vec::new();
        let mut active = self.n;
        let mut t = 0;
        while t < self.m.min(active) {
            // Find a column with a nonzero entry in rows t..; zero columns
            // are parked at the end for good.
            let mut found = false;
            while t < active {
                if (t..self.m).any(|i| self.a[i][t] != 0) {
                    found = true;
                    break;
                }
                active -= 1;
                self.swap_cols(t, active);
            }
            if !found {
                break;
            }
            loop {
                // Row phase: clear column t below the pivot.
                loop {
                    let best = (t..self.m)
                        .filter(|&i| self.a[i][t] != 0)
                        .min_by_key(|&i| self.a[i][t].unsigned_abs())
                        .expect("nonzero column");
                    self.swap_rows(t, best);
                    let support: Vec<usize> =
                        (t..self.n).filter(|&c| self.a[t][c] != 0).collect();
                    let p = self.a[t][t];
                    let mut dirty = false;
                    for i in t + 1..self.m {
                        let v = self.a[i][t];
                        if v != 0 {
                            let q = v / p;
                            if q != 0 {
                                self.row_op(i, t, q, &support)?;
                            }
                            dirty |= self.a[i][t] != 0;
                        }
                    }
                    if !dirty {
                        break;
                    }
                }
                // Column phase: clear row t right of the pivot.
                let p = self.a[t][t];
                let mut rest = None;
                for j in t + 1..self.n {
                    let v = self.a[t][j];
                    if v != 0 {
                        let q = v / p;
                        if q != 0 {
                            self.col_op(j, t, q)?;
                        }
                        if self.a[t][j] != 0 {
                            let cur: Option<usize> = rest;
                            if cur.is_none_or(|c| self.a[t][j].abs() < self.a[t][c].abs()) {
                                rest = Some(j);
                            }
                        }
                    }
                }
                match rest {
                    None => break,
                    Some(j) => {
                        // A smaller remainder becomes the new pivot column.
                        self.swap_cols(t, j);
                        if j >= active {
                            active = self.n;
                        }
                    }
                }
            }
            if self.a[t][t] < 0 {
                self.negate_row(t);
            }
            diag.push(self.a[t][t]);
            t += 1;
        }
        Ok(diag)
    }
}

/// Smith reduction of a dense row-major matrix given by rows.
pub fn smith_dense(a: Vec<Vec<i64>>, cols: usize, track: Tracking) -> Result<SmithForm> {
    let m = a.len();
    let mut red = Reducer {
        a,
        m,
        n: cols,
        r: track.row.then(|| identity(m)),
        rinv: track.row_inv.then(|| identity(m)),
        c: track.col.then(|| identity(cols)),
    };
    let diagonal = red.run()?;
    Ok(SmithForm {
        rows: m,
        cols,
        diagonal,
        row: red.r,
        row_inv: red.rinv,
        col: red.c,
    })
}

pub fn smith(a: &SparseMatrix<i64>, track: Tracking) -> Result<SmithForm> {
    let mut rows = vec![vec![0i64; a.cols()]; a.rows()];
    for (r, c, v) in a.triplets() {
        rows[r][c] = v;
    }
    smith_dense(rows, a.cols(), track)
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl SmithForm {
    pub fn rank(&self) -> usize {
        self.diagonal.len()
    }

    /// Invariant factors `d_1 | d_2 | …` of the nonzero diagonal.
    pub fn invariant_factors(&self) -> Vec<i64> {
        let mut d = self.diagonal.clone();
        let n = d.len();
        for i in 0..n {
            for j in i + 1..n {
                let g = gcd(d[i], d[j]);
                if g != d[i] {
                    let l = d[i] / g * d[j];
                    d[i] = g;
                    d[j] = l;
                }
            }
        }
        d
    }

    /// Integer basis of the kernel: columns `rank..` of `C`.
    pub fn kernel_basis(&self) -> Vec<Vec<i64>> {
        let c = self.col.as_ref().expect("column transform tracked");
        c[self.rank()..].to_vec()
    }

    /// Integer solution of `A x = b`, if one exists. Needs `R` and `C`.
    pub fn solve(&self, b: &[i64]) -> Option<Vec<i64>> {
        let r = self.row.as_ref().expect("row transform tracked");
        let c = self.col.as_ref().expect("column transform tracked");
        let y: Vec<i128> = r
            .iter()
            .map(|row| row.iter().zip(b).map(|(&a, &x)| a as i128 * x as i128).sum())
            .collect();
        let mut z = vec![0i128; self.cols];
        for (i, yi) in y.iter().enumerate() {
            if i < self.rank() {
                let d = self.diagonal[i] as i128;
                if yi % d != 0 {
                    return None;
                }
                z[i] = yi / d;
            } else if *yi != 0 {
                return None;
            }
        }
        let mut x = vec![0i128; self.cols];
        for (j, zj) in z.iter().enumerate() {
            if *zj != 0 {
                for (xi, cij) in x.iter_mut().zip(&c[j]) {
                    *xi += *cij as i128 * zj;
                }
            }
        }
        x.into_iter().map(|v| i64::try_from(v).ok()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
        let k = b.len();
        let n = b[0].len();
        a.iter()
            .map(|row| (0..n).map(|j| (0..k).map(|l| row[l] * b[l][j]).sum()).collect())
            .collect()
    }

    fn transpose(a: &[Vec<i64>]) -> Vec<Vec<i64>> {
        (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
    }

    #[test]
    fn certificates_reproduce_diagonal() {
        let a = vec![
            vec![2, 4, 4],
            vec![-6, 6, 12],
            vec![10, -4, -16],
        ];
        let f = smith_dense(a.clone(), 3, Tracking { row: true, row_inv: true, col: true }).unwrap();
        let r = f.row.clone().unwrap();
        let c = transpose(f.col.as_ref().unwrap());
        let d = mul(&mul(&r, &a), &c);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j && i < f.rank() { f.diagonal[i] } else { 0 };
                assert_eq!(d[i][j], expect);
            }
        }
        let rinv = transpose(f.row_inv.as_ref().unwrap());
        assert_eq!(mul(&r, &rinv), identity(3));
        assert_eq!(f.invariant_factors(), vec![2, 6, 12]);
    }

    #[test]
    fn kernel_and_solve() {
        let a = vec![vec![1, 2, 3], vec![2, 4, 6]];
        let f = smith_dense(a.clone(), 3, Tracking { row: true, col: true, ..Default::default() })
            .unwrap();
        assert_eq!(f.rank(), 1);
        for k in f.kernel_basis() {
            assert_eq!(mul(&a, &transpose(&[k])), vec![vec![0], vec![0]]);
        }
        let x = f.solve(&[5, 10]).unwrap();
        assert_eq!(x[0] + 2 * x[1] + 3 * x[2], 5);
        assert!(f.solve(&[5, 11]).is_none());
    }
}
