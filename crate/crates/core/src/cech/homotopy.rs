//! Discrete Poincaré lemma on boxes.
//!
//! The contraction integrates along the comb-shaped spanning tree of a box:
//! first along axis 0 from the root face, then along axis 1 inside the root
//! slice, and so on. With `P` the restriction to the root corner it obeys
//! `dK + Kd = 1 − P`, so `K` of a closed q-cochain (q ≥ 1) is a primitive.

use crate::grid::{axes_members, Axes, CubicalGrid};

/// Corner of the box that the contraction collapses onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Root {
    /// The corner with the lowest cell index.
    #[default]
    Lower,
    Upper,
}

/// `K ω` for a q-cochain `ω` on a block grid, q ≥ 1.
pub fn contract(grid: &CubicalGrid, omega: &[f64], q: usize, root: Root) -> Vec<f64> {
    assert!(q >= 1);
    let d = grid.dim();
    let corner = |a: usize| match root {
        Root::Lower => 0,
        Root::Upper => grid.extent(a),
    };
    let mut out = vec![0.0; grid.cell_count(q - 1)];
    for (c, o) in out.iter_mut().enumerate() {
        let (s, t) = grid.decode(q - 1, c);
        let first = axes_members(s).next().unwrap_or(d);
        let mut acc = 0.0;
        for a in 0..first.min(d) {
            // Collapse axes below `a` to the root, then integrate along `a`.
            let mut base = t;
            for (b, tb) in base.iter_mut().enumerate().take(a) {
                *tb = corner(b);
            }
            let sa: Axes = s | (1 << a);
            // `a` precedes every axis of S, so it sits first in S ∪ {a}.
            let (lo, hi, sign) = match root {
                Root::Lower => (0, base[a], 1.0),
                Root::Upper => (base[a], grid.extent(a), -1.0),
            };
            let mut line = 0.0;
            for u in lo..hi {
                let mut w = base;
                w[a] = u;
                line += omega[grid.encode(sa, w)];
            }
            acc += sign * line;
        }
        *o = acc;
    }
    out
}

/// Coboundary of a cochain on a block grid.
pub fn local_coboundary(grid: &CubicalGrid, a: &[f64], q: usize) -> Vec<f64> {
    (0..grid.cell_count(q + 1))
        .map(|c| {
            grid.boundary(q + 1, c)
                .into_iter()
                .map(|(f, s)| s as f64 * a[f])
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        let mut x = seed;
        (0..n)
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((x >> 33) as f64 / (1u64 << 31) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn homotopy_formula() {
        for g in [CubicalGrid::block(&[3, 2, 2]), CubicalGrid::block(&[2, 0, 3]), CubicalGrid::block(&[4, 3])] {
            for root in [Root::Lower, Root::Upper] {
                for q in 1..=g.dim() {
                    let w = pseudo(g.cell_count(q), q as u64 + 7);
                    let kw = contract(&g, &w, q, root);
                    let dkw = local_coboundary(&g, &kw, q - 1);
                    let kdw = if q < g.dim() {
                        contract(&g, &local_coboundary(&g, &w, q), q + 1, root)
                    } else {
                        vec![0.0; w.len()]
                    };
                    for i in 0..w.len() {
                        assert!((dkw[i] + kdw[i] - w[i]).abs() < 1e-12, "q={q} root={root:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn primitive_of_closed_form() {
        let g = CubicalGrid::block(&[2, 3, 2]);
        let f = pseudo(g.cell_count(1), 3);
        let w = local_coboundary(&g, &f, 1);
        let b = contract(&g, &w, 2, Root::Lower);
        let db = local_coboundary(&g, &b, 1);
        for (x, y) in db.iter().zip(&w) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
