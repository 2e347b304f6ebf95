use super::cover::{sort_signed, FlagChain, GoodCover};
use super::homotopy::{contract, local_coboundary, Root};
use crate::complex::Cochain;
use crate::{Error, Result};
use serde::Serialize;

/// Function-valued Čech cochain of bidegree (p, q): block `σ` holds a real
/// q-cochain on the intersection of nerve simplex `σ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CechForm {
    pub cech_degree: usize,
    pub form_degree: usize,
    pub blocks: Vec<Vec<f64>>,
}

impl CechForm {
    pub fn zeros(cover: &GoodCover, p: usize, q: usize) -> Self {
        let blocks = (0..cover.nerve().count(p))
            .map(|i| vec![0.0; cover.region(p, i).cell_count(q)])
            .collect();
        CechForm { cech_degree: p, form_degree: q, blocks }
    }

    /// Restriction of a global q-cochain to every cover set.
    pub fn restrict(cover: &GoodCover, a: &Cochain<f64>) -> Self {
        let torus = cover.complex().grid();
        let q = a.degree;
        let blocks = (0..cover.set_count())
            .map(|i| {
                let r = cover.region(0, i);
                (0..r.cell_count(q)).map(|l| a.values[r.to_global(torus, q, l)]).collect()
            })
            .collect();
        CechForm { cech_degree: 0, form_degree: q, blocks }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        CechForm {
            cech_degree: self.cech_degree,
            form_degree: self.form_degree,
            blocks: self.blocks.iter().map(|b| b.iter().map(|&v| f(v)).collect()).collect(),
        }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(
            (self.cech_degree, self.form_degree),
            (other.cech_degree, other.form_degree)
        );
        CechForm {
            cech_degree: self.cech_degree,
            form_degree: self.form_degree,
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn sup_norm(&self) -> f64 {
        self.blocks.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exterior derivative inside every block.
    pub fn d(&self, cover: &GoodCover) -> Self {
        let q = self.form_degree;
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| local_coboundary(&cover.region(self.cech_degree, i).grid, b, q))
            .collect();
        CechForm { cech_degree: self.cech_degree, form_degree: q + 1, blocks }
    }

    /// Alternating Čech coboundary, restricting faces to the smaller
    /// intersection.
    pub fn delta(&self, cover: &GoodCover) -> Self {
        let p = self.cech_degree;
        let q = self.form_degree;
        let nerve = cover.nerve();
        let torus = cover.complex().grid();
        let blocks = nerve
            .faces(p + 1)
            .iter()
            .enumerate()
            .map(|(j, faces)| {
                let r = cover.region(p + 1, j);
                (0..r.cell_count(q))
                    .map(|l| {
                        let g = r.to_global(torus, q, l);
                        faces
                            .iter()
                            .enumerate()
                            .map(|(i, &f)| {
                                let lf = cover.region(p, f).to_local(torus, q, g).expect("subcomplex");
                                let v = self.blocks[f][lf];
                                if i % 2 == 0 {
                                    v
                                } else {
                                    -v
                                }
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        CechForm { cech_degree: p + 1, form_degree: q, blocks }
    }

    /// Blockwise Poincaré contraction `K`, lowering the form degree.
    pub fn contract(&self, cover: &GoodCover, root: Root) -> Self {
        let q = self.form_degree;
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| contract(&cover.region(self.cech_degree, i).grid, b, q, root))
            .collect();
        CechForm { cech_degree: self.cech_degree, form_degree: q - 1, blocks }
    }

    /// Value at a global cell for an ordered tuple of sets, with the
    /// antisymmetry convention (zero on repeated sets).
    pub fn value(&self, cover: &GoodCover, sets: &[u8], cell: usize) -> f64 {
        debug_assert_eq!(sets.len(), self.cech_degree + 1);
        let Some((sorted, sign)) = sort_signed(sets) else {
            return 0.0;
        };
        let nerve = cover.nerve();
        let Some(i) = nerve.index_of(&sorted) else {
            return 0.0;
        };
        let torus = cover.complex().grid();
        match cover.region(self.cech_degree, i).to_local(torus, self.form_degree, cell) {
            Some(l) => sign as f64 * self.blocks[i][l],
            None => 0.0,
        }
    }

    /// Flag pairing `Σ coef · c_{α_q…α_0}(vertex)` of a (q, 0) cochain.
    pub fn pair_flags(&self, cover: &GoodCover, chain: &FlagChain) -> f64 {
        assert_eq!(self.form_degree, 0);
        assert_eq!(self.cech_degree, chain.degree);
        chain
            .terms
            .iter()
            .map(|t| t.coef as f64 * self.value(cover, &t.sets, t.vertex))
            .sum()
    }

    /// Largest spread of values within one block.
    pub fn max_block_spread(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let lo = b.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if b.is_empty() {
                    0.0
                } else {
                    hi - lo
                }
            })
            .fold(0.0, f64::max)
    }

    /// Block averages, one per simplex.
    pub fn block_means(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| b.iter().sum::<f64>() / b.len().max(1) as f64)
            .collect()
    }

    /// The (p, 0) cochain that is constant `c[σ]` on block `σ`.
    pub fn from_constants(cover: &GoodCover, p: usize, c: &[f64]) -> Self {
        let blocks = (0..cover.nerve().count(p))
            .map(|i| vec![c[i]; cover.region(p, i).cell_count(0)])
            .collect();
        CechForm { cech_degree: p, form_degree: 0, blocks }
    }
}

/// Distance from `x` to the nearest integer.
pub(crate) fn int_gap(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Circle-valued (p, 0) cochain, values in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleCochain {
    pub degree: usize,
    pub values: Vec<Vec<f64>>,
}

impl CircleCochain {
    pub fn from_real(form: &CechForm) -> Self {
        assert_eq!(form.form_degree, 0);
        CircleCochain {
            degree: form.cech_degree,
            values: form.map(|v| v.rem_euclid(1.0)).map(|v| if v >= 1.0 { 0.0 } else { v }).blocks,
        }
    }

    pub fn as_form(&self) -> CechForm {
        CechForm { cech_degree: self.degree, form_degree: 0, blocks: self.values.clone() }
    }

    pub fn zeros(cover: &GoodCover, p: usize) -> Self {
        Self::from_real(&CechForm::zeros(cover, p, 0))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_real(&self.as_form().add(&other.as_form()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_real(&self.as_form().sub(&other.as_form()))
    }

    pub fn scaled(&self, k: i64) -> Self {
        Self::from_real(&self.as_form().scaled(k as f64))
    }

    /// Largest distance to 0 in ℝ/ℤ.
    pub fn sup_norm_mod1(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, &v| m.max(int_gap(v)))
    }
}

pub fn circle_coboundary(cover: &GoodCover, c: &CircleCochain) -> CircleCochain {
    CircleCochain::from_real(&c.as_form().delta(cover))
}

/// Circle 2-cocycle on the nerve; `lift` is a real representative when one
/// is known (e.g. from a staircase), which fixes the integer class exactly.
#[derive(Debug, Clone, Serialize)]
pub struct GerbeCocycle {
    pub cochain: CircleCochain,
    #[serde(skip)]
    pub lift: Option<CechForm>,
}

pub const COCYCLE_TOL: f64 = 1e-9;

impl GerbeCocycle {
    pub fn new(cover: &GoodCover, cochain: CircleCochain) -> Result<Self> {
        if cochain.degree != 2 {
            return Err(Error::DegreeMismatch("gerbe cocycles have degree 2".into()));
        }
        let dev = circle_coboundary(cover, &cochain).sup_norm_mod1();
        if dev > COCYCLE_TOL {
            return Err(Error::NotClosed(dev));
        }
        Ok(GerbeCocycle { cochain, lift: None })
    }

    pub fn from_lift(cover: &GoodCover, lift: CechForm) -> Result<Self> {
        let mut g = Self::new(cover, CircleCochain::from_real(&lift))?;
        g.lift = Some(lift);
        Ok(g)
    }

    /// Sum of cocycles, i.e. the tensor product of gerbes.
    pub fn add(&self, cover: &GoodCover, other: &Self) -> Result<Self> {
        let mut g = Self::new(cover, self.cochain.add(&other.cochain))?;
        if let (Some(a), Some(b)) = (&self.lift, &other.lift) {
            g.lift = Some(a.add(b));
        }
        Ok(g)
    }
}

/// Circle 1-cochain `f` with `δf = g`.
#[derive(Debug, Clone, Serialize)]
pub struct Trivialization {
    pub cochain: CircleCochain,
}
