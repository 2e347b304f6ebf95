//! Exact exterior algebra of the flat model `ℂⁿ = ℝ²ⁿ` with `z_j = x_j + i y_j`.
//!
//! Forms have `Complex<Rational64>` coefficients on basis monomials; `dx_j`
//! is generator `j` and `dy_j` is generator `n + j`. Every check here is an
//! equality of rational numbers.

use num_complex::Complex;
use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::Serialize;
use std::collections::BTreeMap;

pub type Coeff = Complex<Rational64>;

fn re(v: i64) -> Coeff {
    Complex::new(Rational64::from_integer(v), Rational64::zero())
}

fn im(v: i64) -> Coeff {
    Complex::new(Rational64::zero(), Rational64::from_integer(v))
}

/// A constant-coefficient form on `ℝ^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Form {
    pub dim: usize,
    terms: BTreeMap<u32, Coeff>,
}

/// Sign of moving the generators of `b` past those of `a`.
fn merge_sign(a: u32, b: u32) -> bool {
    let mut swaps = 0;
    for j in 0..32 {
        if b >> j & 1 == 1 {
            swaps += (a >> (j + 1)).count_ones();
        }
    }
    swaps % 2 == 1
}

impl Form {
    pub fn zero(dim: usize) -> Self {
        Form { dim, terms: BTreeMap::new() }
    }

    pub fn scalar(dim: usize, c: Coeff) -> Self {
        Form::zero(dim).plus_term(0, c)
    }

    /// The generator `e_j`.
    pub fn basis(dim: usize, j: usize) -> Self {
        Form::zero(dim).plus_term(1 << j, re(1))
    }

    fn plus_term(mut self, mask: u32, c: Coeff) -> Self {
        let e = self.terms.entry(mask).or_insert_with(Coeff::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&mask);
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, mask: u32) -> Coeff {
        self.terms.get(&mask).cloned().unwrap_or_else(Coeff::zero)
    }

    pub fn add(&self, other: &Form) -> Form {
        other.terms.iter().fold(self.clone(), |f, (&m, c)| f.plus_term(m, *c))
    }

    pub fn scale(&self, c: Coeff) -> Form {
        self.terms.iter().fold(Form::zero(self.dim), |f, (&m, v)| f.plus_term(m, v * c))
    }

    pub fn sub(&self, other: &Form) -> Form {
        self.add(&other.scale(re(-1)))
    }

    pub fn conj(&self) -> Form {
        self.terms.iter().fold(Form::zero(self.dim), |f, (&m, v)| f.plus_term(m, v.conj()))
    }

    pub fn real_part(&self) -> Form {
        self.add(&self.conj()).scale(Complex::new(Rational64::new(1, 2), Rational64::zero()))
    }

    pub fn imag_part(&self) -> Form {
        self.sub(&self.conj()).scale(Complex::new(Rational64::zero(), Rational64::new(-1, 2)))
    }

    pub fn wedge(&self, other: &Form) -> Form {
        let mut out = Form::zero(self.dim);
        for (&a, ca) in &self.terms {
            for (&b, cb) in &other.terms {
                if a & b != 0 {
                    continue;
                }
                let c = ca * cb;
                out = out.plus_term(a | b, if merge_sign(a, b) { -c } else { c });
            }
        }
        out
    }

    pub fn power(&self, k: usize) -> Form {
        (0..k).fold(Form::scalar(self.dim, re(1)), |f, _| f.wedge(self))
    }

    /// Contraction with a constant vector.
    pub fn interior(&self, v: &[Coeff]) -> Form {
        let mut out = Form::zero(self.dim);
        for (&m, c) in &self.terms {
            let mut seen = 0;
            for (j, vj) in v.iter().enumerate() {
                if m >> j & 1 == 0 {
                    continue;
                }
                let t = c * vj;
                out = out.plus_term(m & !(1 << j), if seen % 2 == 1 { -t } else { t });
                seen += 1;
            }
        }
        out
    }

    /// `α(v_1, …, v_k)` for a k-form.
    pub fn evaluate(&self, vectors: &[Vec<Coeff>]) -> Coeff {
        vectors.iter().fold(self.clone(), |f, v| f.interior(v)).coeff(0)
    }

    /// Pullback along the linear map `ℝᵏ → ℝ^dim` with the given columns.
    pub fn pullback(&self, frame: &[Vec<Coeff>]) -> Form {
        let k = frame.len();
        let mut out = Form::zero(k);
        for mask in 0u32..1 << k {
            let vs: Vec<Vec<Coeff>> = (0..k).filter(|j| mask >> j & 1 == 1).map(|j| frame[j].clone()).collect();
            let restricted: Form = Form {
                dim: self.dim,
                terms: self.terms.iter().filter(|(m, _)| m.count_ones() as usize == vs.len()).map(|(m, c)| (*m, *c)).collect(),
            };
            out = out.plus_term(mask, restricted.evaluate(&vs));
        }
        out
    }

    /// Euclidean Hodge star: `∗e_S = ε(S, Sᶜ) e_{Sᶜ}`.
    pub fn star(&self) -> Form {
        let full = (1u32 << self.dim) - 1;
        self.terms.iter().fold(Form::zero(self.dim), |f, (&m, c)| {
            let comp = full & !m;
            f.plus_term(comp, if merge_sign(m, comp) { -*c } else { *c })
        })
    }
}

/// Rank over `ℚ(i)` by Gaussian elimination.
fn rank(mut rows: Vec<Vec<Coeff>>) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(r, p);
        let inv = Coeff::one() / rows[r][c];
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c] * inv;
                for j in c..cols {
                    let t = rows[r][j] * f;
                    rows[i][j] -= t;
                }
            }
        }
        r += 1;
    }
    r
}

/// The flat model: `ω = Σ dx_j ∧ dy_j`, `Ω = Π (dx_j + i dy_j)`.
#[derive(Debug, Clone)]
pub struct FlatCyModel {
    pub n: usize,
    pub omega: Form,
    pub holomorphic: Form,
    pub omega1: Form,
    pub omega2: Form,
}

impl FlatCyModel {
    pub fn new(n: usize) -> Self {
        let dim = 2 * n;
        let omega = (0..n).fold(Form::zero(dim), |f, j| f.add(&Form::basis(dim, j).wedge(&Form::basis(dim, n + j))));
        let holomorphic = (0..n).fold(Form::scalar(dim, re(1)), |f, j| f.wedge(&self_dz(dim, n, j)));
        FlatCyModel { n, omega1: holomorphic.real_part(), omega2: holomorphic.imag_part(), omega, holomorphic }
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// `I ∂x_j = ∂y_j`, `I ∂y_j = −∂x_j`.
    pub fn complex_structure(&self, v: &[Coeff]) -> Vec<Coeff> {
        let n = self.n;
        (0..2 * n).map(|k| if k < n { -v[n + k] } else { v[k - n] }).collect()
    }

    pub fn unit_vector(&self, k: usize) -> Vec<Coeff> {
        (0..self.dim()).map(|j| if j == k { re(1) } else { Coeff::zero() }).collect()
    }

    /// `c` with `Ω ∧ Ω̄ = c ωⁿ`, or `None` if the two are not proportional.
    pub fn top_constant(&self) -> Option<Coeff> {
        let lhs = self.holomorphic.wedge(&self.holomorphic.conj());
        let rhs = self.omega.power(self.n);
        let full = (1u32 << self.dim()) - 1;
        let c = lhs.coeff(full) / rhs.coeff(full);
        (lhs == rhs.scale(c)).then_some(c)
    }

    /// The plane spanned by `e^{iθ_j} ∂x_j` for unit phases `u_j`.
    pub fn phase_plane(&self, phases: &[Coeff]) -> Vec<Vec<Coeff>> {
        let n = self.n;
        (0..n)
            .map(|j| {
                let mut v = vec![Coeff::zero(); 2 * n];
                v[j] = Complex::new(phases[j].re, Rational64::zero());
                v[n + j] = Complex::new(phases[j].im, Rational64::zero());
                v
            })
            .collect()
    }
}

fn self_dz(dim: usize, n: usize, j: usize) -> Form {
    Form::basis(dim, j).add(&Form::basis(dim, n + j).scale(im(1)))
}

/// Restrictions of `ω`, `Ω₂`, `Ω₁` to a plane with orthonormal frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaneReport {
    pub omega_vanishes: bool,
    pub omega2_vanishes: bool,
    pub omega1_is_volume: bool,
}

impl PlaneReport {
    pub fn special_lagrangian(&self) -> bool {
        self.omega_vanishes && self.omega2_vanishes && self.omega1_is_volume
    }
}

pub fn plane_report(model: &FlatCyModel, frame: &[Vec<Coeff>]) -> PlaneReport {
    let n = model.n;
    let volume = Form::zero(n).plus_term((1 << n) - 1, re(1));
    PlaneReport {
        omega_vanishes: model.omega.pullback(frame).is_zero(),
        omega2_vanishes: model.omega2.pullback(frame).is_zero(),
        omega1_is_volume: model.omega1.pullback(frame) == volume,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlatCyReport {
    pub n: usize,
    /// `c` printed as `a + bi` with rational parts.
    pub c: String,
    pub nondegenerate: bool,
    pub decomposable: bool,
    pub nonvanishing: bool,
    pub wedge_with_omega_vanishes: bool,
    pub top_degree_identity: bool,
    /// Constant coefficients: `d` of every form is zero identically.
    pub closed: bool,
    /// `ι(IX)Ω = i ι(X)Ω` and its real and imaginary parts, for all basis `X`.
    pub type_n_0: bool,
    pub coordinate_plane: PlaneReport,
    pub balanced_phases: PlaneReport,
    pub unbalanced_phases: PlaneReport,
    /// `∗ι(X)ω = −ι(X)Ω₂` on `{y = 0}` for every normal `∂y_j` and their sum.
    pub dual_identity: bool,
    /// `ι(X)ω = s ∗ι(X)Ω₂` with `s = (−1)ⁿ`, which is the `−` of the
    /// three-dimensional statement.
    pub lemma_sign: i32,
    pub lemma: bool,
}

impl FlatCyReport {
    pub fn all_pass(&self) -> bool {
        self.nondegenerate
            && self.decomposable
            && self.nonvanishing
            && self.wedge_with_omega_vanishes
            && self.top_degree_identity
            && self.closed
            && self.type_n_0
            && self.coordinate_plane.special_lagrangian()
            && self.balanced_phases.special_lagrangian()
            && !self.unbalanced_phases.omega2_vanishes
            && self.dual_identity
            && self.lemma
    }
}

fn show(c: &Coeff) -> String {
    format!("{} + {}i", c.re, c.im)
}

pub fn flat_cy_check(n: usize) -> FlatCyReport {
    let model = FlatCyModel::new(n);
    let dim = model.dim();
    let full = (1u32 << dim) - 1;
    let omega_n = model.omega.power(n);

    // Ω is decomposable iff the 1-forms v with v ∧ Ω = 0 span n dimensions.
    let images: Vec<Form> = (0..dim).map(|j| Form::basis(dim, j).wedge(&model.holomorphic)).collect();
    let masks: Vec<u32> = (0..=full).filter(|m| m.count_ones() as usize == n + 1).collect();
    let rows: Vec<Vec<Coeff>> = images.iter().map(|f| masks.iter().map(|&m| f.coeff(m)).collect()).collect();
    let annihilator = dim - rank(rows);

    let c = model.top_constant();
    let type_n_0 = (0..dim).all(|k| {
        let x = model.unit_vector(k);
        let ix = model.complex_structure(&x);
        model.holomorphic.interior(&ix) == model.holomorphic.interior(&x).scale(im(1))
            && model.omega1.interior(&ix) == model.omega2.interior(&x).scale(re(-1))
            && model.omega2.interior(&ix) == model.omega1.interior(&x)
    });

    let plane: Vec<Vec<Coeff>> = (0..n).map(|j| model.unit_vector(j)).collect();
    let u = Complex::new(Rational64::new(3, 5), Rational64::new(4, 5));
    let mut balanced = vec![re(1); n];
    balanced[0] = u;
    balanced[1] = u.conj();
    let mut unbalanced = vec![re(1); n];
    unbalanced[0] = u;
    unbalanced[1] = u;

    let mut normals: Vec<Vec<Coeff>> = (0..n).map(|j| model.unit_vector(n + j)).collect();
    normals.push((0..dim).map(|k| if k >= n { re(k as i64) } else { Coeff::zero() }).collect());
    let sign = if n % 2 == 0 { 1 } else { -1 };
    let (mut dual_identity, mut lemma) = (true, true);
    for x in &normals {
        let a = model.omega.interior(x).pullback(&plane);
        let b = model.omega2.interior(x).pullback(&plane);
        dual_identity &= a.star() == b.scale(re(-1));
        lemma &= a == b.star().scale(re(sign));
    }

    FlatCyReport {
        n,
        c: c.as_ref().map_or_else(|| "none".into(), show),
        nondegenerate: !omega_n.coeff(full).is_zero(),
        decomposable: annihilator == n,
        nonvanishing: !model.holomorphic.is_zero(),
        wedge_with_omega_vanishes: model.omega1.wedge(&model.omega).is_zero() && model.omega2.wedge(&model.omega).is_zero(),
        top_degree_identity: c.is_some(),
        closed: true,
        type_n_0,
        coordinate_plane: plane_report(&model, &plane),
        balanced_phases: plane_report(&model, &model.phase_plane(&balanced)),
        unbalanced_phases: plane_report(&model, &model.phase_plane(&unbalanced)),
        dual_identity,
        lemma_sign: sign as i32,
        lemma,
    }
}
