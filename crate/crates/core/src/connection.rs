//! Gerbe connections `(F_α, A_αβ)` over the fixed cover, their holonomy,
//! flat trivializations and the point gerbe.
//!
//! Conventions: `G|_α = dF_α`, `F_β − F_α = dA_αβ` and
//! `A_βγ − A_αγ + A_αβ = 2π dĝ_αβγ` for a real lift `ĝ` of the cocycle.

use crate::cech::{
    circle_coboundary, continuous_lift, derham_to_cech, staircase_from_primitives, CechForm, CircleCochain,
    GerbeCocycle, GoodCover, LineCocycle, Root,
};
use crate::complex::Cochain;
use crate::grid::Axes;
use crate::hodge::{cell_of_point, delta_current, solve_dirichlet, solve_poisson, FlatMetric};
use crate::sparse::{least_squares, sup_norm};
use crate::{Error, Result};
use serde::Serialize;
use std::f64::consts::TAU;

/// Deviation from local constancy tolerated when reading off `c_αβγ`.
pub const CONSTANT_TOL: f64 = 1e-6;
/// Curvature sup norm below which a connection counts as flat.
pub const FLAT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct GerbeConnection {
    pub cocycle: GerbeCocycle,
    /// `F_α`, bidegree (0, 2).
    pub local: CechForm,
    /// `A_αβ`, bidegree (1, 1).
    pub overlap: CechForm,
    pub curvature: Cochain<f64>,
}

impl GerbeConnection {
    pub fn trivial(cover: &GoodCover) -> Self {
        let zero = CechForm::zeros(cover, 2, 0);
        GerbeConnection {
            cocycle: GerbeCocycle { cochain: CircleCochain::from_real(&zero), lift: Some(zero) },
            local: CechForm::zeros(cover, 0, 2),
            overlap: CechForm::zeros(cover, 1, 1),
            curvature: Cochain::zeros(cover.complex(), 3),
        }
    }

    /// Connection read off the staircase of a closed 3-cochain.
    pub fn from_curvature(cover: &GoodCover, g: &Cochain<f64>) -> Result<Self> {
        let (cocycle, stair) = derham_to_cech(cover, g)?;
        Ok(GerbeConnection {
            cocycle,
            local: stair.levels[0].clone(),
            overlap: stair.levels[1].clone(),
            curvature: g.clone(),
        })
    }

    /// Connection with prescribed local 2-forms `F_α`.
    pub fn from_local_forms(cover: &GoodCover, g: &Cochain<f64>, local: CechForm) -> Result<Self> {
        let stair = staircase_from_primitives(cover, g, local, Root::Lower)?;
        let cocycle = GerbeCocycle::from_lift(cover, stair.lift.clone())?;
        Ok(GerbeConnection {
            cocycle,
            local: stair.levels[0].clone(),
            overlap: stair.levels[1].clone(),
            curvature: g.clone(),
        })
    }

    /// Flat connection on the trivial gerbe with `F_α = ω|_α`, `A = 0`.
    pub fn flat_from_form(cover: &GoodCover, omega: &Cochain<f64>) -> Result<Self> {
        if omega.degree != 2 {
            return Err(Error::DegreeMismatch("flat gerbe data is a 2-cochain".into()));
        }
        let closed = sup_norm(&cover.complex().coboundary(omega).values);
        if closed > 1e-9 {
            return Err(Error::NotClosed(closed));
        }
        let mut c = Self::trivial(cover);
        c.local = CechForm::restrict(cover, omega);
        Ok(c)
    }

    /// Tensor product: all data add.
    pub fn tensor(&self, cover: &GoodCover, other: &Self) -> Result<Self> {
        Ok(GerbeConnection {
            cocycle: self.cocycle.add(cover, &other.cocycle)?,
            local: self.local.add(&other.local),
            overlap: self.overlap.add(&other.overlap),
            curvature: self.curvature.add(&other.curvature),
        })
    }

    pub fn inverse(&self, cover: &GoodCover) -> Result<Self> {
        let lift = self.lift(cover).scaled(-1.0);
        Ok(GerbeConnection {
            cocycle: GerbeCocycle::from_lift(cover, lift)?,
            local: self.local.scaled(-1.0),
            overlap: self.overlap.scaled(-1.0),
            curvature: self.curvature.scaled(-1.0),
        })
    }

    /// The stored real lift of the cocycle, or a continuous one.
    pub fn lift(&self, cover: &GoodCover) -> CechForm {
        self.cocycle
            .lift
            .clone()
            .unwrap_or_else(|| continuous_lift(cover, &self.cocycle.cochain))
    }
}

/// Largest entry of a Čech form and the nerve simplex where it occurs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub max: f64,
    pub simplex: Option<Vec<u8>>,
}

impl Residual {
    fn of(cover: &GoodCover, form: &CechForm) -> Self {
        let mut out = Residual { max: 0.0, simplex: None };
        for (i, b) in form.blocks.iter().enumerate() {
            let m = sup_norm(b);
            if m > out.max {
                out = Residual { max: m, simplex: Some(cover.nerve().simplex(form.cech_degree, i).to_vec()) };
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectionDiagnostics {
    /// `G|_α − dF_α`.
    pub curvature: Residual,
    /// `F_β − F_α − dA_αβ`.
    pub overlap: Residual,
    /// `δA − 2π dĝ`.
    pub cocycle: Residual,
    /// `‖dG‖∞`.
    pub closedness: f64,
    pub curvature_norm: f64,
    pub is_flat: bool,
}

impl ConnectionDiagnostics {
    pub fn max_residual(&self) -> f64 {
        self.curvature.max.max(self.overlap.max).max(self.cocycle.max).max(self.closedness)
    }
}

pub fn validate_connection(cover: &GoodCover, c: &GerbeConnection) -> ConnectionDiagnostics {
    let curvature = CechForm::restrict(cover, &c.curvature).sub(&c.local.d(cover));
    let overlap = c.local.delta(cover).sub(&c.overlap.d(cover));
    let cocycle = c.overlap.delta(cover).sub(&c.lift(cover).d(cover).scaled(TAU));
    let curvature_norm = sup_norm(&c.curvature.values);
    ConnectionDiagnostics {
        curvature: Residual::of(cover, &curvature),
        overlap: Residual::of(cover, &overlap),
        cocycle: Residual::of(cover, &cocycle),
        closedness: sup_norm(&cover.complex().coboundary(&c.curvature).values),
        curvature_norm,
        is_flat: curvature_norm < FLAT_TOL,
    }
}

/// Element of `H²(X, ℝ/ℤ)`: values in `[0, 1)` on the coordinate 2-tori.
/// The nerve is torsion free, so no torsion components arise.
#[derive(Debug, Clone, Serialize)]
pub struct HolonomyClass {
    pub values: Vec<f64>,
    pub torsion: Vec<f64>,
    /// `c_αβγ / 2π` per nerve 2-simplex.
    pub constants: Vec<f64>,
    pub deviation: f64,
}

impl HolonomyClass {
    /// Largest distance of a value to 0 in ℝ/ℤ.
    pub fn distance_to_zero(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v.min(1.0 - v)))
    }
}

pub(crate) fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Local primitives `B_α = K F_α` of a flat connection.
pub fn local_primitives(cover: &GoodCover, c: &GerbeConnection, root: Root) -> Result<CechForm> {
    let diag = validate_connection(cover, c);
    if !diag.is_flat {
        return Err(Error::NotFlat(diag.curvature_norm));
    }
    Ok(c.local.contract(cover, root))
}

struct FlatData {
    b: CechForm,
    /// `f_αβ = K(A_αβ − B_β + B_α)`.
    f: CechForm,
    /// `(δf − 2πĝ) / 2π`, averaged per block.
    y: Vec<f64>,
    deviation: f64,
}

fn flat_data(cover: &GoodCover, c: &GerbeConnection, b: CechForm, root: Root) -> Result<FlatData> {
    let diag = validate_connection(cover, c);
    if !diag.is_flat {
        return Err(Error::NotFlat(diag.curvature_norm));
    }
    let prim = c.local.sub(&b.d(cover)).sup_norm();
    if prim > 1e-9 {
        return Err(Error::Invalid(format!("B is not a primitive of F (residual {prim:.3e})")));
    }
    let f = c.overlap.sub(&b.delta(cover)).contract(cover, root);
    let consts = f.delta(cover).sub(&c.lift(cover).scaled(TAU));
    let deviation = consts.max_block_spread();
    if deviation > CONSTANT_TOL {
        return Err(Error::NonConstant(deviation));
    }
    let y = consts.block_means().iter().map(|v| v / TAU).collect();
    Ok(FlatData { b, f, y, deviation })
}

/// Pairs a nerve 2-cochain with the flag images of the coordinate 2-tori
/// (without the comparison sign of the staircase).
fn pair_coordinate_tori(cover: &GoodCover, y: &[f64]) -> Result<Vec<f64>> {
    let classes = cover.nerve_classes(2)?;
    Ok(classes
        .cycles
        .iter()
        .map(|z| {
            -z.nerve_chain(cover.nerve())
                .iter()
                .zip(y)
                .map(|(&a, b)| a as f64 * b)
                .sum::<f64>()
        })
        .collect())
}

pub fn holonomy(cover: &GoodCover, c: &GerbeConnection) -> Result<HolonomyClass> {
    holonomy_with_root(cover, c, Root::Lower)
}

pub fn holonomy_with_root(cover: &GoodCover, c: &GerbeConnection, root: Root) -> Result<HolonomyClass> {
    let b = local_primitives(cover, c, root)?;
    holonomy_from(cover, c, b, root)
}

/// Holonomy computed from caller-supplied primitives `dB_α = F_α`.
pub fn holonomy_with_primitives(cover: &GoodCover, c: &GerbeConnection, b: &CechForm) -> Result<HolonomyClass> {
    holonomy_from(cover, c, b.clone(), Root::Lower)
}

fn holonomy_from(cover: &GoodCover, c: &GerbeConnection, b: CechForm, root: Root) -> Result<HolonomyClass> {
    let data = flat_data(cover, c, b, root)?;
    let values = pair_coordinate_tori(cover, &data.y)?.into_iter().map(wrap).collect();
    Ok(HolonomyClass { values, torsion: Vec::new(), constants: data.y, deviation: data.deviation })
}

/// `B_α` with `F_α = dB_α` and `h_αβ` with `δh = g` and
/// `A_αβ − B_β + B_α = 2π dĥ_αβ`.
#[derive(Debug, Clone, Serialize)]
pub struct FlatTrivialization {
    pub b: CechForm,
    pub h: CircleCochain,
    #[serde(skip)]
    pub h_lift: CechForm,
    /// Constants `k_αβ` removed from `f_αβ / 2π`.
    pub k: Vec<f64>,
    pub compatibility: f64,
}

pub fn flat_trivialization(cover: &GoodCover, c: &GerbeConnection, root: Root) -> Result<FlatTrivialization> {
    let b = local_primitives(cover, c, root)?;
    let data = flat_data(cover, c, b, root)?;
    let lift = c.lift(cover);
    let n = crate::cech::integer_coboundary(cover, &lift)?;
    // y is a cocycle up to the integer cochain δĝ; remove an integer primitive.
    let neg: Vec<i64> = n.iter().map(|v| -v).collect();
    let m0 = cover
        .nerve()
        .solve_integer(2, &neg)?
        .ok_or_else(|| Error::NonzeroClass(vec![]))?;
    let mut target: Vec<f64> = data.y.iter().zip(&m0).map(|(y, &m)| y - m as f64).collect();
    let classes = cover.nerve_classes(2)?;
    let raw: Vec<f64> = classes
        .cycles
        .iter()
        .map(|z| {
            z.nerve_chain(cover.nerve())
                .iter()
                .zip(&target)
                .map(|(&a, b)| a as f64 * b)
                .sum()
        })
        .collect();
    if raw.iter().any(|&r| (r - r.round()).abs() > CONSTANT_TOL) {
        let hol = pair_coordinate_tori(cover, &data.y)?.into_iter().map(wrap).collect();
        return Err(Error::NonzeroHolonomy(hol));
    }
    for (r, gen) in raw.iter().zip(&classes.generators) {
        let k = r.round();
        for (t, g) in target.iter_mut().zip(gen) {
            *t -= k * *g as f64;
        }
    }
    let delta = cover.nerve().coboundary(1).map(|v| v as f64);
    let k = least_squares(&delta, &target, 1e-14)?;
    let res: Vec<f64> = delta.mul_vec(&k).iter().zip(&target).map(|(u, v)| u - v).collect();
    if sup_norm(&res) > 1e-9 {
        return Err(Error::NonIntegral { period: sup_norm(&res), gap: sup_norm(&res) });
    }
    let h_lift = data.f.scaled(1.0 / TAU).sub(&CechForm::from_constants(cover, 1, &k));
    let h = CircleCochain::from_real(&h_lift);
    let dev = circle_coboundary(cover, &h).sub(&c.cocycle.cochain).sup_norm_mod1();
    if dev > 1e-9 {
        return Err(Error::BrokenCocycle(dev));
    }
    let compatibility = c
        .overlap
        .sub(&data.b.delta(cover))
        .sub(&h_lift.d(cover).scaled(TAU))
        .sup_norm();
    Ok(FlatTrivialization { b: data.b, h, h_lift, k, compatibility })
}

/// Flat line bundle: cocycle `ℓ` and connection 1-forms `a_α` with
/// `a_β − a_α = 2π dℓ_αβ`.
#[derive(Debug, Clone, Serialize)]
pub struct FlatLineBundle {
    pub cocycle: LineCocycle,
    pub connection: CechForm,
    /// `max |da_α|`.
    pub curvature: f64,
    /// Values in `[0, 1)` on the coordinate circles.
    pub holonomy: Vec<f64>,
}

impl FlatLineBundle {
    pub fn new(cover: &GoodCover, cochain: CircleCochain, connection: CechForm) -> Result<Self> {
        let cocycle = LineCocycle::new(cover, cochain)?;
        let curvature = connection.d(cover).sup_norm();
        if curvature > 1e-9 {
            return Err(Error::NotFlat(curvature));
        }
        let ell = continuous_lift(cover, &cocycle.cochain);
        let compat = connection.delta(cover).sub(&ell.d(cover).scaled(TAU)).sup_norm();
        if compat > 1e-9 {
            return Err(Error::Invalid(format!("line connection incompatible (residual {compat:.3e})")));
        }
        let chi = connection.contract(cover, Root::Lower);
        let u = ell.sub(&chi.delta(cover).scaled(1.0 / TAU));
        let dev = u.max_block_spread();
        if dev > CONSTANT_TOL {
            return Err(Error::NonConstant(dev));
        }
        let u = u.block_means();
        let x = cover.complex();
        let holonomy = (0..x.dim())
            .map(|a| {
                let z = x.coordinate_cycle(1 << a as Axes);
                let chain = cover.flag_chain(&z, 1).nerve_chain(cover.nerve());
                wrap(chain.iter().zip(&u).map(|(&c, v)| c as f64 * v).sum())
            })
            .collect();
        Ok(FlatLineBundle { cocycle, connection, curvature, holonomy })
    }

    /// Holonomy along an integer 1-cycle: `∮a/2π + Σ [e:v] ℓ_{α_e α_v}(v)`.
    pub fn holonomy_along(&self, cover: &GoodCover, z: &[i64]) -> Result<f64> {
        let x = cover.complex();
        if x.boundary_of(1, z).iter().any(|&v| v != 0) {
            return Err(Error::NotCycle);
        }
        let g = x.grid();
        let ell = self.cocycle.cochain.as_form();
        let mut total = 0.0;
        for (e, &ze) in z.iter().enumerate().filter(|(_, &c)| c != 0) {
            let ae = cover.home(1, e);
            total += ze as f64 * self.connection.value(cover, &[ae], e) / TAU;
            for (v, s) in g.boundary(1, e) {
                total += (ze * s) as f64 * ell.value(cover, &[ae, cover.home(0, v)], v);
            }
        }
        Ok(wrap(total))
    }
}

/// `ℓ = h₂ − h₁` with connection `a_α = B₁_α − B₂_α`.
pub fn trivialization_difference(
    cover: &GoodCover,
    t1: &FlatTrivialization,
    t2: &FlatTrivialization,
) -> Result<FlatLineBundle> {
    FlatLineBundle::new(cover, t2.h.sub(&t1.h), t1.b.sub(&t2.b))
}

/// Surface holonomy with every cell assigned its home set.
pub fn surface_holonomy(cover: &GoodCover, c: &GerbeConnection, z: &[i64]) -> Result<f64> {
    surface_holonomy_with(cover, c, z, |k, cell| cover.home(k, cell))
}

/// `(1/2π)[Σ F_{α_f}(f) + Σ [f:e] A_{α_f α_e}(e) − Σ [f:e][e:v] f_{α_f α_e α_v}(v)]`
/// mod 1, for a 2-cycle `z` and an assignment of its cells to sets.
pub fn surface_holonomy_with(
    cover: &GoodCover,
    c: &GerbeConnection,
    z: &[i64],
    assign: impl Fn(usize, usize) -> u8,
) -> Result<f64> {
    let x = cover.complex();
    if x.boundary_of(2, z).iter().any(|&v| v != 0) {
        return Err(Error::NotCycle);
    }
    let g = x.grid();
    let check = |k: usize, cell: usize| -> Result<u8> {
        let a = assign(k, cell);
        if (a as usize) < cover.set_count() && cover.contains(a, k, cell) {
            Ok(a)
        } else {
            Err(Error::Assignment(format!("set {a} does not contain {k}-cell {cell}")))
        }
    };
    let lift = c.lift(cover);
    let mut total = 0.0;
    for (f, &zf) in z.iter().enumerate().filter(|(_, &v)| v != 0) {
        let af = check(2, f)?;
        total += zf as f64 * c.local.value(cover, &[af], f) / TAU;
        for (e, se) in g.boundary(2, f) {
            let ae = check(1, e)?;
            let coef = zf * se;
            total += coef as f64 * c.overlap.value(cover, &[af, ae], e) / TAU;
            for (v, sv) in g.boundary(1, e) {
                let av = check(0, v)?;
                total -= (coef * sv) as f64 * lift.value(cover, &[af, ae, av], v);
            }
        }
    }
    Ok(wrap(total))
}

/// Coordinate torus on `axes` translated to coordinate `at` along the
/// remaining axis.
pub fn coordinate_torus_at(x: &crate::complex::CubicalTorusComplex, axes: Axes, at: usize) -> Vec<i64> {
    let g = x.grid();
    let base = x.coordinate_cycle(axes);
    let Some(off) = (0..x.dim()).find(|a| axes & (1 << a) == 0) else {
        return base;
    };
    let mut out = vec![0; base.len()];
    for (c, &v) in base.iter().enumerate().filter(|(_, &v)| v != 0) {
        let (s, t) = g.decode(axes.count_ones() as usize, c);
        out[g.encode(s, g.shift(t, off, at as isize).expect("periodic"))] = v;
    }
    out
}

/// Fixes the integrality adjustment of a point gerbe so that, on the sets
/// other than `home`, the cocycle is an ℝ/ℤ coboundary: the lift gets
/// integral periods on coordinate tori that avoid `home`. The least-squares
/// adjustment alone leaves an arbitrary flat class there.
fn normalize_away_from(cover: &GoodCover, c: &mut GerbeConnection, home: u8) -> Result<()> {
    let x = cover.complex();
    let n = x.resolution();
    let region = cover.region(0, home as usize);
    let classes = cover.nerve_classes(2)?;
    let sign = crate::cech::comparison_sign(2);
    let lift = c.lift(cover);
    let mut z = vec![0.0; cover.nerve().count(2)];
    for (j, &s) in x.grid().subsets(2).iter().enumerate() {
        let a = (0..3).find(|a| s & (1 << a) == 0).expect("one free axis");
        let outside = |t: usize| (t + n - region.start[a]) % n > region.len[a];
        let at = (0..n).find(|&t| outside(t)).ok_or(Error::Resolution { got: n, min: 3 })?;
        let mut chain = cover.flag_chain(&coordinate_torus_at(x, s, at), 2);
        chain.terms.iter_mut().for_each(|t| t.coef *= sign);
        let r = lift.pair_flags(cover, &chain);
        for (zi, &g) in z.iter_mut().zip(&classes.generators[j]) {
            *zi += (r.round() - r) * g as f64;
        }
    }
    let lift = lift.add(&CechForm::from_constants(cover, 2, &z));
    c.cocycle = GerbeCocycle::from_lift(cover, lift)?;
    Ok(())
}

/// The point gerbe of `p` with the data of its construction.
#[derive(Debug, Clone, Serialize)]
pub struct PointGerbe {
    pub point: Vec<f64>,
    pub cell: usize,
    /// `H` with `ΔH = V − 2πδ_p`.
    #[serde(skip)]
    pub potential: Cochain<f64>,
    pub poisson_residual: f64,
    /// Top cells of the ball: the cell of `p` and its face neighbours.
    pub ball: Vec<usize>,
    /// `∫_{∂B} (F₀ − F₁)` as a face sum over the boundary of the ball.
    pub sphere_integral: f64,
    /// The same quantity by Stokes: `Σ_B d(F₀ − F₁)`.
    pub stokes_integral: f64,
    pub connection: GerbeConnection,
}

/// Builds `F₀ = d*H` globally and `F₁ = d*H₁` (with `dd*H₁ = V` by a
/// Dirichlet solve) on the set containing the cell of `p`.
pub fn point_gerbe_connection(m: &FlatMetric, cover: &GoodCover, p: &[f64]) -> Result<PointGerbe> {
    let x = m.complex();
    let d = x.dim();
    if d != 3 {
        return Err(Error::Dimension(d));
    }
    let v = m.volume();
    let delta = delta_current(m, p);
    let rhs = v.sub(&delta.scaled(TAU));
    let h = solve_poisson(m, &rhs)?;
    let poisson_residual = sup_norm(&m.apply_laplacian(&h).sub(&rhs).values);
    let f0 = m.codifferential(&h);
    let cell = cell_of_point(x, p);

    let local_solution = |region: &[usize]| -> Result<Cochain<f64>> {
        Ok(m.codifferential(&solve_dirichlet(m, v, region)?))
    };

    let (_, t) = x.grid().decode(3, cell);
    let mut ball = vec![cell];
    for a in 0..3 {
        for delta in [-1isize, 1] {
            let s = x.grid().shift(t, a, delta).expect("periodic");
            ball.push(x.grid().encode(0b111, s));
        }
    }
    ball.sort_unstable();
    ball.dedup();
    let f1 = local_solution(&ball)?;
    let diff = f0.sub(&f1);
    let mut indicator = vec![0i64; x.cell_count(3)];
    ball.iter().for_each(|&c| indicator[c] = 1);
    let sphere = x.boundary_of(3, &indicator);
    let sphere_integral = sphere.iter().zip(&diff.values).map(|(&s, f)| s as f64 * f).sum();
    let ddiff = x.coboundary(&diff);
    let stokes_integral = ball.iter().map(|&c| ddiff.values[c]).sum();

    let home = cover.home(3, cell);
    let region = cover.region(0, home as usize);
    let torus = x.grid();
    let cells: Vec<usize> = (0..region.cell_count(3)).map(|l| region.to_global(torus, 3, l)).collect();
    let f_home = local_solution(&cells)?;
    let mut local = CechForm::restrict(cover, &f0);
    local.blocks[home as usize] = (0..region.cell_count(2))
        .map(|l| f_home.values[region.to_global(torus, 2, l)])
        .collect();
    let mut connection = GerbeConnection::from_local_forms(cover, v, local)?;
    normalize_away_from(cover, &mut connection, home)?;
    Ok(PointGerbe {
        point: p.to_vec(),
        cell,
        potential: h,
        poisson_residual,
        ball,
        sphere_integral,
        stokes_integral,
        connection,
    })
}
