use super::cochain::{circle_coboundary, int_gap, CechForm, CircleCochain, GerbeCocycle, Trivialization, COCYCLE_TOL};
use super::cover::GoodCover;
use crate::{Error, Result};
use serde::Serialize;

/// Integer class in `H^{p+1}` of a circle p-cocycle, in coordinates dual to
/// the coordinate tori. The nerve has no torsion, so the torsion part is
/// always empty; it is kept for reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CharacteristicClass {
    pub free: Vec<i64>,
    pub torsion: Vec<i64>,
}

impl CharacteristicClass {
    pub fn is_zero(&self) -> bool {
        self.free.iter().all(|&v| v == 0)
    }
}

/// Lifts a circle cochain to real values blockwise along a spanning tree
/// of each intersection, wrapping each edge increment into (−½, ½].
pub fn continuous_lift(cover: &GoodCover, c: &CircleCochain) -> CechForm {
    let blocks = c
        .values
        .iter()
        .enumerate()
        .map(|(i, vals)| {
            let g = &cover.region(c.degree, i).grid;
            let nv = vals.len();
            let mut adj = vec![Vec::new(); nv];
            for e in 0..g.cell_count(1) {
                let ends: Vec<usize> = g.boundary(1, e).into_iter().map(|(v, _)| v).collect();
                adj[ends[0]].push(ends[1]);
                adj[ends[1]].push(ends[0]);
            }
            let mut lift = vec![f64::NAN; nv];
            lift[0] = vals[0];
            let mut queue = std::collections::VecDeque::from([0]);
            while let Some(u) = queue.pop_front() {
                for &w in &adj[u] {
                    if lift[w].is_nan() {
                        let mut inc = vals[w] - vals[u];
                        inc -= inc.round();
                        if inc <= -0.5 {
                            inc += 1.0;
                        }
                        lift[w] = lift[u] + inc;
                        queue.push_back(w);
                    }
                }
            }
            lift
        })
        .collect();
    CechForm { cech_degree: c.degree, form_degree: 0, blocks }
}

/// `δ` of a real lift: an integer constant per simplex, or an error.
pub fn integer_coboundary(cover: &GoodCover, lift: &CechForm) -> Result<Vec<i64>> {
    let n = lift.delta(cover);
    let mut dev: f64 = n.max_block_spread();
    for b in &n.blocks {
        for &v in b {
            dev = dev.max(int_gap(v));
        }
    }
    if dev > COCYCLE_TOL {
        return Err(Error::BrokenCocycle(dev));
    }
    Ok(n.block_means().iter().map(|v| v.round() as i64).collect())
}

fn class_of(cover: &GoodCover, degree: usize, n: &[i64]) -> Result<CharacteristicClass> {
    if degree > cover.complex().dim() {
        return Ok(CharacteristicClass { free: Vec::new(), torsion: Vec::new() });
    }
    let classes = cover.nerve_classes(degree)?;
    let free = classes
        .cycles
        .iter()
        .map(|z| {
            z.nerve_chain(cover.nerve())
                .iter()
                .zip(n)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    Ok(CharacteristicClass { free, torsion: Vec::new() })
}

pub fn characteristic_class(cover: &GoodCover, g: &GerbeCocycle) -> Result<CharacteristicClass> {
    let lift = g.lift.clone().unwrap_or_else(|| continuous_lift(cover, &g.cochain));
    let n = integer_coboundary(cover, &lift)?;
    class_of(cover, 3, &n)
}

/// Solves `δf = g` mod 1 when the class vanishes.
pub fn trivialize(cover: &GoodCover, g: &GerbeCocycle) -> Result<Trivialization> {
    let lift = g.lift.clone().unwrap_or_else(|| continuous_lift(cover, &g.cochain));
    let n = integer_coboundary(cover, &lift)?;
    let class = class_of(cover, 3, &n)?;
    if !class.is_zero() {
        return Err(Error::NonzeroClass(class.free));
    }
    let m = cover
        .nerve()
        .solve_integer(2, &n)?
        .ok_or_else(|| Error::NonzeroClass(class.free.clone()))?;
    let m: Vec<f64> = m.iter().map(|&v| v as f64).collect();
    let psi = lift.sub(&CechForm::from_constants(cover, 2, &m));
    // Vertexwise cone from the lowest set containing the vertex:
    // f_αβ(v) = ψ_{α₀αβ}(v) satisfies δf = ψ because δψ = 0.
    let torus = cover.complex().grid();
    let nerve = cover.nerve();
    let blocks = (0..nerve.count(1))
        .map(|i| {
            let s = nerve.simplex(1, i);
            let r = cover.region(1, i);
            (0..r.cell_count(0))
                .map(|l| {
                    let v = r.to_global(torus, 0, l);
                    psi.value(cover, &[cover.home(0, v), s[0], s[1]], v)
                })
                .collect()
        })
        .collect();
    let f = CircleCochain::from_real(&CechForm { cech_degree: 1, form_degree: 0, blocks });
    let dev = circle_coboundary(cover, &f).sub(&g.cochain).sup_norm_mod1();
    if dev > COCYCLE_TOL {
        return Err(Error::BrokenCocycle(dev));
    }
    Ok(Trivialization { cochain: f })
}

/// Circle 1-cocycle of a line bundle with its Chern class on the
/// coordinate 2-tori.
#[derive(Debug, Clone, Serialize)]
pub struct LineCocycle {
    pub cochain: CircleCochain,
    pub chern: CharacteristicClass,
}

impl LineCocycle {
    pub fn new(cover: &GoodCover, cochain: CircleCochain) -> Result<Self> {
        let dev = circle_coboundary(cover, &cochain).sup_norm_mod1();
        if dev > COCYCLE_TOL {
            return Err(Error::NotClosed(dev));
        }
        let lift = continuous_lift(cover, &cochain);
        let n = integer_coboundary(cover, &lift)?;
        let chern = class_of(cover, 2, &n)?;
        Ok(LineCocycle { cochain, chern })
    }
}

/// `h = f' − f`, a line cocycle since both trivialize the same gerbe.
pub fn difference_of_trivializations(
    cover: &GoodCover,
    f: &Trivialization,
    f_prime: &Trivialization,
) -> Result<LineCocycle> {
    let dg = circle_coboundary(cover, &f.cochain);
    let dg2 = circle_coboundary(cover, &f_prime.cochain);
    let dev = dg.sub(&dg2).sup_norm_mod1();
    if dev > COCYCLE_TOL {
        return Err(Error::DifferentCocycles(dev));
    }
    LineCocycle::new(cover, f_prime.cochain.sub(&f.cochain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cech::{derham_to_cech, derham_to_cech_degree, good_cover_torus, Root};
    use crate::complex::build_torus_complex;
    use crate::hodge::{harmonic_basis, FlatMetric};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;
    use std::sync::Arc;

    fn setup() -> (FlatMetric, GoodCover) {
        let x = Arc::new(build_torus_complex(3, 3).unwrap());
        (FlatMetric::new(x.clone()), good_cover_torus(x).unwrap())
    }

    /// Random circle cochain that is constant on every block.
    fn random_constant(cover: &GoodCover, p: usize, rng: &mut ChaCha8Rng) -> CircleCochain {
        let c: Vec<f64> = (0..cover.nerve().count(p)).map(|_| rng.random::<f64>()).collect();
        CircleCochain::from_real(&CechForm::from_constants(cover, p, &c))
    }

    fn line_generator(m: &FlatMetric, cover: &GoodCover, j: usize) -> CircleCochain {
        let h = harmonic_basis(m, 2).unwrap();
        let s = derham_to_cech_degree(cover, &h.basis[j].scaled(TAU), Root::Lower).unwrap();
        CircleCochain::from_real(&s.lift)
    }

    #[test]
    fn trivial_gerbe() {
        let (_, cover) = setup();
        let g = GerbeCocycle::new(&cover, CircleCochain::zeros(&cover, 2)).unwrap();
        assert!(characteristic_class(&cover, &g).unwrap().is_zero());
        let f = trivialize(&cover, &g).unwrap();
        assert!(circle_coboundary(&cover, &f.cochain).sup_norm_mod1() < 1e-12);
    }

    #[test]
    fn coboundaries_round_trip() {
        let (_, cover) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let f0 = random_constant(&cover, 1, &mut rng);
            let g = GerbeCocycle::new(&cover, circle_coboundary(&cover, &f0)).unwrap();
            assert!(characteristic_class(&cover, &g).unwrap().is_zero());
            let f = trivialize(&cover, &g).unwrap();
            let dev = circle_coboundary(&cover, &f.cochain).sub(&g.cochain).sup_norm_mod1();
            assert!(dev < 1e-9);
        }
    }

    #[test]
    fn class_ignores_coboundary_and_is_additive() {
        let (m, cover) = setup();
        let (v, _) = derham_to_cech(&cover, m.volume()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_constant(&cover, 1, &mut rng);
        let moved = GerbeCocycle::new(&cover, v.cochain.add(&circle_coboundary(&cover, &h))).unwrap();
        assert_eq!(characteristic_class(&cover, &moved).unwrap().free, vec![1]);
        let sum = v.add(&cover, &moved).unwrap();
        assert_eq!(characteristic_class(&cover, &sum).unwrap().free, vec![2]);
        let sum = GerbeCocycle::new(&cover, sum.cochain).unwrap();
        assert_eq!(characteristic_class(&cover, &sum).unwrap().free, vec![2]);
    }

    #[test]
    fn broken_lift_is_reported() {
        let (_, cover) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut c = CircleCochain::zeros(&cover, 2);
        c.values.iter_mut().flatten().for_each(|v| *v = rng.random::<f64>());
        let g = GerbeCocycle { cochain: c, lift: None };
        assert!(matches!(characteristic_class(&cover, &g), Err(Error::BrokenCocycle(_))));
    }

    #[test]
    fn differences_of_trivializations() {
        let (m, cover) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f0 = random_constant(&cover, 1, &mut rng);
        let g = GerbeCocycle::new(&cover, circle_coboundary(&cover, &f0)).unwrap();
        let f = trivialize(&cover, &g).unwrap();
        let same = difference_of_trivializations(&cover, &f, &f).unwrap();
        assert!(same.cochain.sup_norm_mod1() < 1e-12 && same.chern.is_zero());

        let fp = Trivialization { cochain: f.cochain.add(&line_generator(&m, &cover, 1)) };
        let h = difference_of_trivializations(&cover, &f, &fp).unwrap();
        assert_eq!(h.chern.free, vec![0, 1, 0]);

        let fpp = Trivialization { cochain: fp.cochain.add(&line_generator(&m, &cover, 2).scaled(3)) };
        let a = difference_of_trivializations(&cover, &f, &fpp).unwrap();
        let b = difference_of_trivializations(&cover, &fp, &fpp).unwrap();
        assert!(a.cochain.sub(&h.cochain.add(&b.cochain)).sup_norm_mod1() < 1e-12);
        assert_eq!(a.chern.free, vec![0, 1, 3]);

        let other = Trivialization { cochain: random_constant(&cover, 1, &mut rng) };
        assert!(matches!(
            difference_of_trivializations(&cover, &f, &other),
            Err(Error::DifferentCocycles(_))
        ));
    }

    #[test]
    fn circle_cocycle_algebra() {
        let (_, cover) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut c = CircleCochain::zeros(&cover, 1);
        c.values.iter_mut().flatten().for_each(|v| *v = rng.random::<f64>());
        let dd = circle_coboundary(&cover, &circle_coboundary(&cover, &c));
        assert!(dd.sup_norm_mod1() < 1e-12);
        let k = CircleCochain::from_real(&CechForm::from_constants(&cover, 0, &vec![0.37; 27]));
        assert!(circle_coboundary(&cover, &k).sup_norm_mod1() < 1e-12);
    }
}
