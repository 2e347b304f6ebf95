//! Index arithmetic for cubical grids, periodic (tori) or not (boxes).
//!
//! A k-cell is a pair `(S, t)`: a set `S` of k axes along which the cell
//! extends, and the integer coordinates `t` of its lowest vertex. Cells of
//! one degree are numbered subset-major: `S` in lexicographic order of its
//! sorted axis list, then `t` in row-major order (axis 0 slowest).
//!
//! Orientation follows the axis order of `S`, so
//!
//! | cell | boundary |
//! |------|----------|
//! | `(S = {a_0 < … < a_{k-1}}, t)` | `Σ_j (-1)^j [(S∖a_j, t + e_{a_j}) − (S∖a_j, t)]` |
//!
//! and every other sign in the crate is derived from this one rule.

/// Axis set of a cell, as a bitmask over `0..d`.
pub type Axes = u8;

/// Sorted members of an axis mask.
pub fn axes_members(s: Axes) -> impl Iterator<Item = usize> {
    (0..8).filter(move |a| s & (1 << a) != 0)
}

/// Sign of the shuffle that sorts the concatenation `S ++ T` of two disjoint
/// axis sets, i.e. `dx_S ∧ dx_T = ε(S, T) dx_{S ∪ T}`.
pub fn shuffle_sign(s: Axes, t: Axes) -> i64 {
    debug_assert_eq!(s & t, 0);
    let mut inversions = 0;
    for a in axes_members(s) {
        inversions += axes_members(t).filter(|&b| b < a).count();
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn subsets_lex(d: usize, k: usize) -> Vec<Axes> {
    fn rec(start: usize, d: usize, k: usize, cur: Axes, out: &mut Vec<Axes>) {
        if k == 0 {
            out.push(cur);
            return;
        }
        for a in start..d {
            rec(a + 1, d, k - 1, cur | (1 << a), out);
        }
    }
    let mut out = Vec::new();
    rec(0, d, k, 0, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubicalGrid {
    dim: usize,
    extent: [usize; 3],
    periodic: bool,
    subsets: Vec<Vec<Axes>>,
    offsets: Vec<Vec<usize>>,
    counts: Vec<usize>,
}

impl CubicalGrid {
    /// Periodic grid with `n` edges per axis.
    pub fn torus(dim: usize, n: usize) -> Self {
        Self::new(dim, [n; 3], true)
    }

    /// Non-periodic block with `extent[a]` edges along axis `a` (possibly 0).
    pub fn block(extent: &[usize]) -> Self {
        let mut e = [0; 3];
        e[..extent.len()].copy_from_slice(extent);
        Self::new(extent.len(), e, false)
    }

    fn new(dim: usize, extent: [usize; 3], periodic: bool) -> Self {
        let mut g = CubicalGrid {
            dim,
            extent,
            periodic,
            subsets: Vec::new(),
            offsets: Vec::new(),
            counts: Vec::new(),
        };
        for k in 0..=dim {
            let subs = subsets_lex(dim, k);
            let mut offs = Vec::with_capacity(subs.len());
            let mut total = 0;
            for &s in &subs {
                offs.push(total);
                total += g.block_size(s);
            }
            g.subsets.push(subs);
            g.offsets.push(offs);
            g.counts.push(total);
        }
        g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn extent(&self, axis: usize) -> usize {
        self.extent[axis]
    }

    /// Number of admissible lowest-vertex coordinates along `axis`.
    fn range(&self, axis: usize, along: bool) -> usize {
        if along || self.periodic {
            self.extent[axis]
        } else {
            self.extent[axis] + 1
        }
    }

    fn block_size(&self, s: Axes) -> usize {
        (0..self.dim)
            .map(|a| self.range(a, s & (1 << a) != 0))
            .product()
    }

    pub fn cell_count(&self, k: usize) -> usize {
        self.counts.get(k).copied().unwrap_or(0)
    }

    /// Axis sets of degree-k cells in numbering order.
    pub fn subsets(&self, k: usize) -> &[Axes] {
        &self.subsets[k]
    }

    pub fn encode(&self, s: Axes, t: [usize; 3]) -> usize {
        let k = s.count_ones() as usize;
        let si = self.subsets[k].iter().position(|&x| x == s).expect("axis set");
        let mut lin = 0;
        for a in 0..self.dim {
            lin = lin * self.range(a, s & (1 << a) != 0) + t[a];
        }
        self.offsets[k][si] + lin
    }

    pub fn decode(&self, k: usize, idx: usize) -> (Axes, [usize; 3]) {
        let offs = &self.offsets[k];
        let si = offs.partition_point(|&o| o <= idx) - 1;
        let s = self.subsets[k][si];
        let mut lin = idx - offs[si];
        let mut t = [0; 3];
        for a in (0..self.dim).rev() {
            let r = self.range(a, s & (1 << a) != 0);
            t[a] = lin % r;
            lin /= r;
        }
        (s, t)
    }

    /// Coordinates shifted by `delta` along `axis`, wrapped on a torus;
    /// `None` if a block is left.
    pub fn shift(&self, mut t: [usize; 3], axis: usize, delta: isize) -> Option<[usize; 3]> {
        let v = t[axis] as isize + delta;
        if self.periodic {
            let n = self.extent[axis] as isize;
            t[axis] = v.rem_euclid(n) as usize;
        } else {
            if v < 0 || v > self.extent[axis] as isize {
                return None;
            }
            t[axis] = v as usize;
        }
        Some(t)
    }

    /// Signed faces of cell `idx` of degree `k ≥ 1`.
    pub fn boundary(&self, k: usize, idx: usize) -> Vec<(usize, i64)> {
        let (s, t) = self.decode(k, idx);
        let mut out = Vec::with_capacity(2 * k);
        for (j, a) in axes_members(s).enumerate() {
            let sign = if j % 2 == 0 { 1 } else { -1 };
            let face = s & !(1 << a);
            let up = self.shift(t, a, 1).expect("face inside grid");
            out.push((self.encode(face, up), sign));
            out.push((self.encode(face, t), -sign));
        }
        out
    }

    /// Vertices of a cell (in no particular order).
    pub fn vertices(&self, k: usize, idx: usize) -> Vec<[usize; 3]> {
        let (s, t) = self.decode(k, idx);
        let mut out = vec![t];
        for a in axes_members(s) {
            let mut more = Vec::with_capacity(out.len());
            for v in &out {
                more.push(self.shift(*v, a, 1).expect("vertex inside grid"));
            }
            out.extend(more);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_roundtrip() {
        for g in [CubicalGrid::torus(3, 3), CubicalGrid::block(&[2, 0, 3])] {
            for k in 0..=3 {
                for i in 0..g.cell_count(k) {
                    let (s, t) = g.decode(k, i);
                    assert_eq!(s.count_ones() as usize, k);
                    assert_eq!(g.encode(s, t), i);
                }
            }
        }
    }

    #[test]
    fn block_counts() {
        let g = CubicalGrid::block(&[2, 1]);
        assert_eq!(
            (0..=2).map(|k| g.cell_count(k)).collect::<Vec<_>>(),
            vec![6, 7, 2]
        );
    }

    #[test]
    fn shuffle_signs() {
        assert_eq!(shuffle_sign(0b001, 0b110), 1);
        assert_eq!(shuffle_sign(0b010, 0b101), -1);
        assert_eq!(shuffle_sign(0b110, 0b001), 1);
        assert_eq!(shuffle_sign(0b011, 0b100), 1);
    }
}
