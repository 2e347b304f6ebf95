//! Periodic cubical complexes for flat tori, integer (co)homology and the
//! discrete cup-product pairing.

use crate::grid::{axes_members, shuffle_sign, Axes, CubicalGrid};
use crate::snf::{smith, smith_dense, Tracking};
use crate::sparse::SparseMatrix;
use crate::{Error, Result};
use num_traits::Num;
use serde::Serialize;

/// Which of the two interleaved lattices a cochain lives on. Dual cells of
/// the torus are the cells of the half-shifted torus, so both use the same
/// numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Lattice {
    Primal,
    Dual,
}

impl Lattice {
    pub fn other(self) -> Self {
        match self {
            Lattice::Primal => Lattice::Dual,
            Lattice::Dual => Lattice::Primal,
        }
    }
}

/// A k-cochain with coefficients in `T` (`i64`, `Rational64` or `f64`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cochain<T> {
    pub degree: usize,
    pub lattice: Lattice,
    pub values: Vec<T>,
}

impl<T: Copy + Num> Cochain<T> {
    pub fn new(degree: usize, values: Vec<T>) -> Self {
        Cochain { degree, lattice: Lattice::Primal, values }
    }

    pub fn zeros(x: &CubicalTorusComplex, degree: usize) -> Self {
        Self::new(degree, vec![T::zero(); x.cell_count(degree)])
    }

    pub fn map<U: Copy + Num>(&self, f: impl Fn(T) -> U) -> Cochain<U> {
        Cochain {
            degree: self.degree,
            lattice: self.lattice,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.degree, self.lattice), (other.degree, other.lattice));
        Cochain {
            degree: self.degree,
            lattice: self.lattice,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.map(|v| T::zero() - v))
    }
}

impl Cochain<i64> {
    pub fn to_real(&self) -> Cochain<f64> {
        self.map(|v| v as f64)
    }
}

#[derive(Debug, Clone)]
pub struct CubicalTorusComplex {
    grid: CubicalGrid,
    n: usize,
    /// `boundary[k]` maps k-chains to (k−1)-chains; index 0 is empty.
    boundary: Vec<SparseMatrix<i64>>,
}

pub fn build_torus_complex(d: usize, n: usize) -> Result<CubicalTorusComplex> {
    if !(1..=3).contains(&d) {
        return Err(Error::Dimension(d));
    }
    if n < 2 {
        return Err(Error::Resolution { got: n, min: 2 });
    }
    let grid = CubicalGrid::torus(d, n);
    let mut boundary = vec![SparseMatrix::zeros(0, grid.cell_count(0))];
    for k in 1..=d {
        let mut trip = Vec::new();
        for c in 0..grid.cell_count(k) {
            for (f, s) in grid.boundary(k, c) {
                trip.push((f, c, s));
            }
        }
        boundary.push(SparseMatrix::from_triplets(
            grid.cell_count(k - 1),
            grid.cell_count(k),
            trip,
        ));
    }
    Ok(CubicalTorusComplex { grid, n, boundary })
}

pub fn boundary_operator(x: &CubicalTorusComplex, k: usize) -> Result<&SparseMatrix<i64>> {
    if k == 0 || k > x.dim() {
        return Err(Error::DegreeRange { k, max: x.dim() });
    }
    Ok(&x.boundary[k])
}

impl CubicalTorusComplex {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &CubicalGrid {
        &self.grid
    }

    pub fn cell_count(&self, k: usize) -> usize {
        self.grid.cell_count(k)
    }

    pub fn boundary(&self, k: usize) -> &SparseMatrix<i64> {
        &self.boundary[k]
    }

    /// Coboundary `δ_k : C^k → C^{k+1}` as a matrix (the transpose of ∂_{k+1}).
    pub fn coboundary_matrix(&self, k: usize) -> SparseMatrix<i64> {
        self.boundary[k + 1].transpose()
    }

    /// `δa` for any coefficient type; the top degree maps to an empty cochain.
    pub fn coboundary<T: Copy + Num>(&self, a: &Cochain<T>) -> Cochain<T> {
        let k = a.degree;
        let mut out = vec![T::zero(); self.cell_count(k + 1)];
        if k < self.dim() {
            let b = &self.boundary[k + 1];
            for (f, c, s) in b.triplets() {
                let v = a.values[f];
                out[c] = if s > 0 { out[c] + v } else { out[c] - v };
            }
        }
        Cochain { degree: k + 1, lattice: a.lattice, values: out }
    }

    /// `∂z` of an integer chain.
    pub fn boundary_of(&self, k: usize, z: &[i64]) -> Vec<i64> {
        if k == 0 {
            return Vec::new();
        }
        self.boundary[k].mul_vec(z)
    }

    /// The coordinate k-torus spanned by `axes` through the origin, as an
    /// integer k-cycle.
    pub fn coordinate_cycle(&self, axes: Axes) -> Vec<i64> {
        let k = axes.count_ones() as usize;
        let mut z = vec![0; self.cell_count(k)];
        for c in 0..z.len() {
            let (s, t) = self.grid.decode(k, c);
            if s == axes && (0..self.dim()).all(|a| axes & (1 << a) != 0 || t[a] == 0) {
                z[c] = 1;
            }
        }
        z
    }

    /// The integer cocycle dual to [`Self::coordinate_cycle`]: 1 on the
    /// cells of type `axes` sitting at coordinate 0 along every axis in `axes`.
    pub fn coordinate_cocycle(&self, axes: Axes) -> Cochain<i64> {
        let k = axes.count_ones() as usize;
        let mut v = vec![0; self.cell_count(k)];
        for (c, x) in v.iter_mut().enumerate() {
            let (s, t) = self.grid.decode(k, c);
            if s == axes && axes_members(axes).all(|a| t[a] == 0) {
                *x = 1;
            }
        }
        Cochain::new(k, v)
    }
}

/// Discrete `∫ a ∧ b` for a k-cochain `a` and a (d−k)-cochain `b`: the cup
/// product evaluated on the fundamental class.
pub fn wedge_pairing<T: Copy + Num>(
    x: &CubicalTorusComplex,
    a: &Cochain<T>,
    b: &Cochain<T>,
) -> Result<T> {
    let d = x.dim();
    if a.degree + b.degree != d {
        return Err(Error::DegreeMismatch(format!(
            "wedge pairing of degrees {} and {} on a {d}-torus",
            a.degree, b.degree
        )));
    }
    let g = x.grid();
    let full: Axes = (1 << d) - 1;
    let mut total = T::zero();
    for cube in 0..x.cell_count(d) {
        let (_, v) = g.decode(d, cube);
        for &s in g.subsets(a.degree) {
            let sc = full & !s;
            let mut w = v;
            for ax in axes_members(s) {
                w = g.shift(w, ax, 1).expect("periodic");
            }
            let term = a.values[g.encode(s, v)] * b.values[g.encode(sc, w)];
            total = if shuffle_sign(s, sc) > 0 { total + term } else { total - term };
        }
    }
    Ok(total)
}

/// Integer cohomology in one degree with generator cocycles and integer
/// cycles that pair with them to the identity.
#[derive(Debug, Clone, Serialize)]
pub struct CohomologyGroup {
    pub degree: usize,
    pub betti: usize,
    pub torsion: Vec<i64>,
    pub generators: Vec<Vec<i64>>,
    pub torsion_generators: Vec<(Vec<i64>, i64)>,
    /// `⟨generators[i], dual_cycles[j]⟩ = δ_ij`.
    pub dual_cycles: Vec<Vec<i64>>,
}

/// Free and torsion parts of `ker(out) / im(inc)` for integer matrices with
/// `out · inc = 0`, both acting on vectors of length `n`.
pub(crate) struct RawHomology {
    pub free: Vec<Vec<i64>>,
    pub torsion: Vec<(Vec<i64>, i64)>,
    pub invariant_factors: Vec<i64>,
}

pub(crate) fn raw_homology(
    inc: Option<&SparseMatrix<i64>>,
    out: Option<&SparseMatrix<i64>>,
    n: usize,
) -> Result<RawHomology> {
    let (rank, diag, basis) = match inc.filter(|m| m.cols() > 0) {
        Some(m) => {
            let f = smith(m, Tracking { row_inv: true, ..Default::default() })?;
            let inv = f.invariant_factors();
            (f.rank(), (f.diagonal.clone(), inv), f.row_inv.unwrap())
        }
        None => (0, (Vec::new(), Vec::new()), {
            let mut id = vec![vec![0; n]; n];
            for (i, c) in id.iter_mut().enumerate() {
                c[i] = 1;
            }
            id
        }),
    };
    let tail = &basis[rank..];
    let kernel: Vec<Vec<i64>> = match out.filter(|m| m.rows() > 0) {
        Some(m) => {
            // M' = out · Y, with Y the trailing columns of R⁻¹.
            let mut rows = vec![vec![0i64; tail.len()]; m.rows()];
            for (j, y) in tail.iter().enumerate() {
                let col = m.mul_vec(y);
                for (i, v) in col.into_iter().enumerate() {
                    rows[i][j] = v;
                }
            }
            let f = smith_dense(rows, tail.len(), Tracking { col: true, ..Default::default() })?;
            f.kernel_basis()
        }
        None => (0..tail.len())
            .map(|j| {
                let mut e = vec![0; tail.len()];
                e[j] = 1;
                e
            })
            .collect(),
    };
    let free = kernel
        .iter()
        .map(|kv| {
            let mut g = vec![0i64; n];
            for (coef, y) in kv.iter().zip(tail) {
                if *coef != 0 {
                    for (gi, yi) in g.iter_mut().zip(y) {
                        *gi += coef * yi;
                    }
                }
            }
            g
        })
        .collect();
    let torsion = diag
        .0
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 1)
        .map(|(i, &s)| (basis[i].clone(), s))
        .collect();
    Ok(RawHomology {
        free,
        torsion,
        invariant_factors: diag.1.into_iter().filter(|&s| s > 1).collect(),
    })
}

pub(crate) fn pair_int(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact inverse of a small unimodular integer matrix.
pub(crate) fn unimodular_inverse(p: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    let n = p.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| p[i][j] as f64);
    let inv = m.try_inverse()?;
    let x: Vec<Vec<i64>> = (0..n)
        .map(|i| (0..n).map(|j| inv[(i, j)].round() as i64).collect())
        .collect();
    for i in 0..n {
        for j in 0..n {
            let v: i64 = (0..n).map(|l| x[i][l] * p[l][j]).sum();
            if v != (i == j) as i64 {
                return None;
            }
        }
    }
    Some(x)
}

/// Rebases free generators so that they pair to the identity with `cycles`.
pub(crate) fn rebase(generators: &[Vec<i64>], cycles: &[Vec<i64>]) -> Result<Vec<Vec<i64>>> {
    let p: Vec<Vec<i64>> = generators
        .iter()
        .map(|g| cycles.iter().map(|z| pair_int(g, z)).collect())
        .collect();
    let x = unimodular_inverse(&p).ok_or(Error::SingularPeriods)?;
    Ok(x
        .iter()
        .map(|row| {
            let mut g = vec![0i64; generators[0].len()];
            for (c, gen) in row.iter().zip(generators) {
                for (gi, v) in g.iter_mut().zip(gen) {
                    *gi += c * v;
                }
            }
            g
        })
        .collect())
}

pub fn integer_homology(x: &CubicalTorusComplex, k: usize) -> Result<Vec<Vec<i64>>> {
    if k > x.dim() {
        return Err(Error::DegreeRange { k, max: x.dim() });
    }
    let inc = (k < x.dim()).then(|| x.boundary(k + 1));
    let out = (k > 0).then(|| x.boundary(k));
    Ok(raw_homology(inc, out, x.cell_count(k))?.free)
}

pub fn integer_cohomology(x: &CubicalTorusComplex, k: usize) -> Result<CohomologyGroup> {
    if k > x.dim() {
        return Err(Error::DegreeRange { k, max: x.dim() });
    }
    let inc = (k > 0).then(|| x.coboundary_matrix(k - 1));
    let out = (k < x.dim()).then(|| x.coboundary_matrix(k));
    let raw = raw_homology(inc.as_ref(), out.as_ref(), x.cell_count(k))?;
    // Coordinate tori are the homology basis; the unimodular pairing with
    // the Smith generators certifies that they are one.
    let cycles: Vec<Vec<i64>> = x
        .grid()
        .subsets(k)
        .iter()
        .map(|&s| x.coordinate_cycle(s))
        .collect();
    for z in &cycles {
        if x.boundary_of(k, z).iter().any(|&v| v != 0) {
            return Err(Error::NotCycle);
        }
    }
    let generators = if raw.free.is_empty() {
        Vec::new()
    } else {
        rebase(&raw.free, &cycles)?
    };
    Ok(CohomologyGroup {
        degree: k,
        betti: generators.len(),
        torsion: raw.invariant_factors,
        generators,
        torsion_generators: raw.torsion,
        dual_cycles: cycles,
    })
}

impl CohomologyGroup {
    /// Coordinates of the class of a cocycle in the generator basis.
    pub fn coordinates(&self, cocycle: &[f64]) -> Vec<f64> {
        self.dual_cycles
            .iter()
            .map(|z| z.iter().zip(cocycle).map(|(&a, b)| a as f64 * b).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(build_torus_complex(4, 3), Err(Error::Dimension(4))));
        assert!(build_torus_complex(2, 1).is_err());
        let x = build_torus_complex(2, 3).unwrap();
        assert!(boundary_operator(&x, 0).is_err());
        assert!(boundary_operator(&x, 3).is_err());
    }

    #[test]
    fn cell_counts_and_square_zero() {
        let x = build_torus_complex(3, 2).unwrap();
        assert_eq!((0..=3).map(|k| x.cell_count(k)).collect::<Vec<_>>(), vec![8, 24, 24, 8]);
        for k in 2..=3 {
            assert!(x.boundary(k - 1).matmul(x.boundary(k)).is_zero());
        }
        for c in 0..8 {
            assert_eq!(x.boundary(3).transpose().row(c).count(), 6);
        }
    }

    #[test]
    fn circle() {
        let x = build_torus_complex(1, 3).unwrap();
        let b = x.boundary(1);
        for c in 0..3 {
            let mut col: Vec<i64> = (0..3).map(|r| b.get(r, c)).filter(|&v| v != 0).collect();
            col.sort();
            assert_eq!(col, vec![-1, 1]);
        }
    }

    #[test]
    fn torus_betti_numbers() {
        for d in 1..=3 {
            for n in 2..=3 {
                let x = build_torus_complex(d, n).unwrap();
                for k in 0..=d {
                    let h = integer_cohomology(&x, k).unwrap();
                    assert_eq!(h.betti, binom(d, k), "d={d} n={n} k={k}");
                    assert!(h.torsion.is_empty());
                }
            }
        }
    }

    #[test]
    fn generators_are_cocycles_dual_to_cycles() {
        let x = build_torus_complex(3, 3).unwrap();
        for k in 0..=3 {
            let h = integer_cohomology(&x, k).unwrap();
            for (i, g) in h.generators.iter().enumerate() {
                let dg = x.coboundary(&Cochain::new(k, g.clone()));
                assert!(dg.values.iter().all(|&v| v == 0));
                for (j, z) in h.dual_cycles.iter().enumerate() {
                    assert_eq!(pair_int(g, z), (i == j) as i64);
                }
            }
        }
    }

    #[test]
    fn coordinate_pairs_are_dual() {
        let x = build_torus_complex(3, 4).unwrap();
        let a = x.coordinate_cocycle(0b001);
        assert!(x.coboundary(&a).values.iter().all(|&v| v == 0));
        let b = x.coordinate_cocycle(0b110);
        assert_eq!(wedge_pairing(&x, &a, &b).unwrap(), 1);
        assert_eq!(pair_int(&b.values, &x.coordinate_cycle(0b110)), 1);
        assert!(x.boundary_of(2, &x.coordinate_cycle(0b110)).iter().all(|&v| v == 0));
    }

    #[test]
    fn wedge_degree_mismatch() {
        let x = build_torus_complex(2, 3).unwrap();
        let a = Cochain::<i64>::zeros(&x, 1);
        let b = Cochain::<i64>::zeros(&x, 0);
        assert!(wedge_pairing(&x, &a, &b).is_err());
    }
}
