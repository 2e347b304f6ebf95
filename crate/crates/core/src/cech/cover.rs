use crate::complex::{raw_homology, CubicalTorusComplex};
use crate::grid::CubicalGrid;
use crate::snf::{smith, SmithForm, Tracking};
use crate::sparse::SparseMatrix;
use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

/// Nerve of the product cover by `3^d` boxes. Set `α` has per-axis arc
/// digits `α = Σ_a i_a 3^{d−1−a}`; a set of boxes meets iff every axis uses
/// at most two distinct arcs, so the nerve depends on `d` only.
#[derive(Debug)]
pub struct Nerve {
    dim: usize,
    simplices: Vec<Vec<Vec<u8>>>,
    index: Vec<HashMap<Vec<u8>, usize>>,
    faces: Vec<Vec<Vec<usize>>>,
    coboundary: Vec<SparseMatrix<i64>>,
    solvers: Vec<OnceLock<Result<SmithForm>>>,
}

pub(crate) fn digit(dim: usize, set: u8, axis: usize) -> usize {
    (set as usize / 3usize.pow((dim - 1 - axis) as u32)) % 3
}

fn meets(dim: usize, sets: &[u8]) -> bool {
    (0..dim).all(|a| {
        let mut seen = [false; 3];
        sets.iter().for_each(|&s| seen[digit(dim, s, a)] = true);
        seen.iter().filter(|&&b| b).count() <= 2
    })
}

impl Nerve {
    /// Simplices up to degree `d + 1`, enough for cohomology through degree d.
    pub fn new(dim: usize) -> Self {
        let n_sets = 3usize.pow(dim as u32) as u8;
        let top = dim + 1;
        let mut simplices: Vec<Vec<Vec<u8>>> = vec![(0..n_sets).map(|s| vec![s]).collect()];
        for p in 1..=top {
            let mut next = Vec::new();
            for s in &simplices[p - 1] {
                for extra in s[p - 1] + 1..n_sets {
                    let mut t = s.clone();
                    t.push(extra);
                    if meets(dim, &t) {
                        next.push(t);
                    }
                }
            }
            simplices.push(next);
        }
        let index: Vec<HashMap<Vec<u8>, usize>> = simplices
            .iter()
            .map(|l| l.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect())
            .collect();
        let mut faces = vec![Vec::new()];
        let mut coboundary = Vec::new();
        for p in 1..=top {
            let mut fp = Vec::new();
            let mut trip = Vec::new();
            for (j, s) in simplices[p].iter().enumerate() {
                let f: Vec<usize> = (0..=p)
                    .map(|i| {
                        let mut t = s.clone();
                        t.remove(i);
                        index[p - 1][&t]
                    })
                    .collect();
                for (i, &fi) in f.iter().enumerate() {
                    trip.push((j, fi, if i % 2 == 0 { 1 } else { -1 }));
                }
                fp.push(f);
            }
            faces.push(fp);
            coboundary.push(SparseMatrix::from_triplets(
                simplices[p].len(),
                simplices[p - 1].len(),
                trip,
            ));
        }
        Nerve {
            dim,
            simplices,
            index,
            faces,
            coboundary,
            solvers: (0..top).map(|_| OnceLock::new()).collect(),
        }
    }

    /// Shared instance per torus dimension.
    pub fn shared(dim: usize) -> Arc<Nerve> {
        static CACHE: [OnceLock<Arc<Nerve>>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        CACHE[dim - 1].get_or_init(|| Arc::new(Nerve::new(dim))).clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn top_degree(&self) -> usize {
        self.simplices.len() - 1
    }

    pub fn count(&self, p: usize) -> usize {
        self.simplices.get(p).map_or(0, Vec::len)
    }

    pub fn simplex(&self, p: usize, i: usize) -> &[u8] {
        &self.simplices[p][i]
    }

    pub fn simplices(&self, p: usize) -> &[Vec<u8>] {
        &self.simplices[p]
    }

    pub fn index_of(&self, sorted: &[u8]) -> Option<usize> {
        self.index.get(sorted.len().wrapping_sub(1))?.get(sorted).copied()
    }

    /// `faces(p)[σ][i]` is the index of `σ` with its i-th vertex removed.
    pub fn faces(&self, p: usize) -> &[Vec<usize>] {
        &self.faces[p]
    }

    /// Integer coboundary `C^p → C^{p+1}`.
    pub fn coboundary(&self, p: usize) -> &SparseMatrix<i64> {
        &self.coboundary[p]
    }

    /// Free generators of `H^p` of the nerve (not yet normalized).
    pub fn free_cohomology(&self, p: usize) -> Result<Vec<Vec<i64>>> {
        let inc = (p > 0).then(|| self.coboundary(p - 1));
        let out = (p < self.top_degree()).then(|| self.coboundary(p));
        Ok(raw_homology(inc, out, self.count(p))?.free)
    }

    /// Torsion invariant factors of `H^p` of the nerve.
    pub fn torsion(&self, p: usize) -> Result<Vec<i64>> {
        let inc = (p > 0).then(|| self.coboundary(p - 1));
        Ok(raw_homology(inc, None, self.count(p))?.invariant_factors)
    }

    /// Integer `m` with `δ m = n` for an integer (p+1)-cochain `n`.
    pub fn solve_integer(&self, p: usize, n: &[i64]) -> Result<Option<Vec<i64>>> {
        let f = self.solvers[p].get_or_init(|| {
            smith(self.coboundary(p), Tracking { row: true, col: true, ..Default::default() })
        });
        match f {
            Ok(f) => Ok(f.solve(n)),
            Err(e) => Err(e.clone()),
        }
    }
}

/// Box `Π_a [start_a, start_a + len_a]` of the torus, as a subcomplex.
#[derive(Debug, Clone)]
pub struct BoxRegion {
    pub start: [usize; 3],
    pub len: [usize; 3],
    pub grid: CubicalGrid,
}

impl BoxRegion {
    fn new(dim: usize, start: [usize; 3], len: [usize; 3]) -> Self {
        BoxRegion { start, len, grid: CubicalGrid::block(&len[..dim]) }
    }

    pub fn cell_count(&self, k: usize) -> usize {
        self.grid.cell_count(k)
    }

    pub fn to_global(&self, torus: &CubicalGrid, k: usize, local: usize) -> usize {
        let (s, t) = self.grid.decode(k, local);
        let n = torus.extent(0);
        let mut v = [0; 3];
        for a in 0..torus.dim() {
            v[a] = (self.start[a] + t[a]) % n;
        }
        torus.encode(s, v)
    }

    pub fn to_local(&self, torus: &CubicalGrid, k: usize, global: usize) -> Option<usize> {
        let (s, v) = torus.decode(k, global);
        let n = torus.extent(0);
        let mut t = [0; 3];
        for a in 0..torus.dim() {
            t[a] = (v[a] + n - self.start[a]) % n;
            let along = s & (1 << a) != 0;
            if t[a] + along as usize > self.len[a] {
                return None;
            }
        }
        Some(self.grid.encode(s, t))
    }
}

/// One term `coef · (α_q, …, α_0)` evaluated at `vertex`, from a flag of
/// cells `σ_q ⊃ … ⊃ σ_0 = vertex` with `α_i` the home set of `σ_i`.
#[derive(Debug, Clone)]
pub struct FlagTerm {
    pub coef: i64,
    pub sets: Vec<u8>,
    pub vertex: usize,
}

/// Image of a cellular chain under the flag map into Čech chains.
#[derive(Debug, Clone)]
pub struct FlagChain {
    pub degree: usize,
    pub terms: Vec<FlagTerm>,
}

/// Sorts an ordered tuple of sets, returning the permutation sign, or
/// `None` if a set repeats.
pub(crate) fn sort_signed(sets: &[u8]) -> Option<(Vec<u8>, i64)> {
    let mut v = sets.to_vec();
    let mut sign = 1;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            } else if v[j] == v[j + 1] {
                return None;
            }
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

impl FlagChain {
    /// The underlying integer chain on nerve simplices.
    pub fn nerve_chain(&self, nerve: &Nerve) -> Vec<i64> {
        let mut out = vec![0; nerve.count(self.degree)];
        for t in &self.terms {
            if let Some((s, sign)) = sort_signed(&t.sets) {
                out[nerve.index_of(&s).expect("flag sets meet")] += sign * t.coef;
            }
        }
        out
    }
}

/// Integer normalization of nerve cohomology in one degree: generators
/// pair to the identity with the flag images of the coordinate tori.
#[derive(Debug, Clone)]
pub struct NerveClasses {
    pub degree: usize,
    pub generators: Vec<Vec<i64>>,
    pub cycles: Vec<FlagChain>,
}

#[derive(Debug)]
pub struct GoodCover {
    complex: Arc<CubicalTorusComplex>,
    nerve: Arc<Nerve>,
    regions: Vec<Vec<BoxRegion>>,
    home: Vec<Vec<u8>>,
    certified: usize,
    classes: Vec<OnceLock<Result<NerveClasses>>>,
}

/// Sign relating a closed form's periods to the flag pairing of the last
/// staircase level: `⟨G, Z⟩ = (−1)^{q(q+1)/2} ⟨δ f, φ(Z)⟩`.
pub fn comparison_sign(q: usize) -> i64 {
    if (q * (q + 1) / 2) % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn good_cover_torus(x: Arc<CubicalTorusComplex>) -> Result<GoodCover> {
    let n = x.resolution();
    if n < 3 {
        return Err(Error::Resolution { got: n, min: 3 });
    }
    let d = x.dim();
    let nerve = Nerve::shared(d);
    let cuts = [0, n / 3, 2 * n / 3, n];
    let region_of = |sets: &[u8]| {
        let mut start = [0; 3];
        let mut len = [0; 3];
        for a in 0..d {
            let mut used = [false; 3];
            sets.iter().for_each(|&s| used[digit(d, s, a)] = true);
            match used {
                [true, false, false] | [false, true, false] | [false, false, true] => {
                    let i = used.iter().position(|&u| u).unwrap();
                    start[a] = cuts[i];
                    len[a] = cuts[i + 1] - cuts[i];
                }
                [true, true, false] => start[a] = cuts[1],
                [false, true, true] => start[a] = cuts[2],
                [true, false, true] => start[a] = 0,
                _ => unreachable!("nerve simplices use at most two arcs per axis"),
            }
        }
        BoxRegion::new(d, start, len)
    };
    let regions: Vec<Vec<BoxRegion>> = (0..=nerve.top_degree())
        .map(|p| nerve.simplices(p).iter().map(|s| region_of(s)).collect())
        .collect();
    let torus = x.grid();
    let home: Vec<Vec<u8>> = (0..=d)
        .map(|k| {
            (0..x.cell_count(k))
                .map(|c| {
                    regions[0]
                        .iter()
                        .position(|r| r.to_local(torus, k, c).is_some())
                        .map(|i| i as u8)
                        .ok_or_else(|| Error::Assignment(format!("cell {c} of degree {k} is uncovered")))
                })
                .collect::<Result<Vec<u8>>>()
        })
        .collect::<Result<_>>()?;
    let mut cover = GoodCover {
        complex: x.clone(),
        nerve: nerve.clone(),
        regions,
        home,
        certified: 0,
        classes: (0..=d).map(|_| OnceLock::new()).collect(),
    };
    cover.certified = cover.certify()?;
    Ok(cover)
}

impl GoodCover {
    /// Checks every intersection of up to four sets: its 1-skeleton has a
    /// spanning tree from the lowest vertex, and every 1-cycle bounds.
    fn certify(&self) -> Result<usize> {
        let mut checked = 0;
        for p in 0..=self.nerve.top_degree().min(3) {
            for (i, r) in self.regions[p].iter().enumerate() {
                let g = &r.grid;
                let nv = g.cell_count(0);
                let ne = g.cell_count(1);
                let label = || format!("{:?}", self.nerve.simplex(p, i));
                if nv == 0 {
                    return Err(Error::NonContractible(label()));
                }
                let mut adj = vec![Vec::new(); nv];
                for e in 0..ne {
                    let ends: Vec<usize> = g.boundary(1, e).into_iter().map(|(v, _)| v).collect();
                    adj[ends[0]].push(ends[1]);
                    adj[ends[1]].push(ends[0]);
                }
                let mut seen = vec![false; nv];
                let mut stack = vec![0];
                seen[0] = true;
                let mut reached = 1;
                while let Some(u) = stack.pop() {
                    for &w in &adj[u] {
                        if !seen[w] {
                            seen[w] = true;
                            reached += 1;
                            stack.push(w);
                        }
                    }
                }
                if reached != nv {
                    return Err(Error::NonContractible(label()));
                }
                let cycles = ne + 1 - nv;
                if cycles > 0 {
                    let mut trip = Vec::new();
                    for f in 0..g.cell_count(2) {
                        for (e, s) in g.boundary(2, f) {
                            trip.push((e, f, s));
                        }
                    }
                    let b2 = SparseMatrix::from_triplets(ne, g.cell_count(2), trip);
                    if smith(&b2, Tracking::default())?.rank() != cycles {
                        return Err(Error::NonContractible(label()));
                    }
                }
                checked += 1;
            }
        }
        Ok(checked)
    }

    pub fn complex(&self) -> &CubicalTorusComplex {
        &self.complex
    }

    pub fn complex_arc(&self) -> Arc<CubicalTorusComplex> {
        self.complex.clone()
    }

    pub fn nerve(&self) -> &Nerve {
        &self.nerve
    }

    pub fn set_count(&self) -> usize {
        self.nerve.count(0)
    }

    /// Number of intersections that passed the contractibility check.
    pub fn certified_intersections(&self) -> usize {
        self.certified
    }

    pub fn region(&self, p: usize, simplex: usize) -> &BoxRegion {
        &self.regions[p][simplex]
    }

    /// Lowest-index set containing the cell.
    pub fn home(&self, k: usize, cell: usize) -> u8 {
        self.home[k][cell]
    }

    pub fn contains(&self, set: u8, k: usize, cell: usize) -> bool {
        self.regions[0][set as usize]
            .to_local(self.complex.grid(), k, cell)
            .is_some()
    }

    pub fn sets_containing(&self, k: usize, cell: usize) -> Vec<u8> {
        (0..self.set_count() as u8).filter(|&s| self.contains(s, k, cell)).collect()
    }

    /// Flag image of an integer q-chain, with home sets as assignment.
    pub fn flag_chain(&self, z: &[i64], q: usize) -> FlagChain {
        self.flag_chain_with(z, q, |k, c| self.home(k, c))
    }

    /// Flag image with a caller-chosen assignment of cells to sets.
    pub fn flag_chain_with(&self, z: &[i64], q: usize, assign: impl Fn(usize, usize) -> u8) -> FlagChain {
        let g = self.complex.grid();
        let mut terms = Vec::new();
        let mut stack: Vec<(usize, usize, i64, Vec<u8>)> = z
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(cell, &c)| (q, cell, c, vec![assign(q, cell)]))
            .collect();
        while let Some((k, cell, coef, sets)) = stack.pop() {
            if k == 0 {
                terms.push(FlagTerm { coef, sets, vertex: cell });
                continue;
            }
            for (f, s) in g.boundary(k, cell) {
                let mut next = sets.clone();
                next.push(assign(k - 1, f));
                stack.push((k - 1, f, coef * s, next));
            }
        }
        FlagChain { degree: q, terms }
    }

    /// Nerve cohomology in degree q normalized against the coordinate
    /// q-tori of the torus (the comparison sign is folded into the cycles).
    pub fn nerve_classes(&self, q: usize) -> Result<&NerveClasses> {
        let r = self.classes[q].get_or_init(|| {
            let x = &self.complex;
            let sign = comparison_sign(q);
            let cycles: Vec<FlagChain> = x
                .grid()
                .subsets(q)
                .iter()
                .map(|&s| {
                    let mut f = self.flag_chain(&x.coordinate_cycle(s), q);
                    f.terms.iter_mut().for_each(|t| t.coef *= sign);
                    f
                })
                .collect();
            let nerve_cycles: Vec<Vec<i64>> = cycles.iter().map(|c| c.nerve_chain(&self.nerve)).collect();
            let raw = self.nerve.free_cohomology(q)?;
            let generators = if raw.is_empty() {
                Vec::new()
            } else {
                crate::complex::rebase(&raw, &nerve_cycles)?
            };
            Ok(NerveClasses { degree: q, generators, cycles })
        });
        r.as_ref().map_err(Clone::clone)
    }
}
