//! Linear equivalence of point divisors on the flat 3-torus.
//!
//! Two routes decide it. The period route integrates the integral harmonic
//! 1-forms along lattice paths (the Abel–Jacobi map). The current route
//! Hodge-decomposes the Poincaré dual of a dual-lattice path and pairs its
//! harmonic part with the same forms. Both read points in unit coordinates
//! and add the sub-cell offsets analytically, since on the flat torus the
//! integral harmonic forms are exactly `dx_i`.

use crate::cech::GoodCover;
use crate::complex::{wedge_pairing, Cochain, CubicalTorusComplex};
use crate::connection::{holonomy, point_gerbe_connection, wrap, GerbeConnection};
use crate::grid::{shuffle_sign, Axes};
use crate::hodge::{cell_of_point, harmonic_basis, solve_poisson, FlatMetric};
use crate::sparse::sup_norm;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Default tolerance on integrality of the witness integrals.
pub const EQUIVALENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDivisor {
    pub points: Vec<([f64; 3], i64)>,
}

impl PointDivisor {
    /// Wraps every point into the unit cube.
    pub fn new(points: Vec<([f64; 3], i64)>) -> Self {
        let points = points
            .into_iter()
            .map(|(p, m)| (p.map(wrap), m))
            .collect();
        PointDivisor { points }
    }

    pub fn degree(&self) -> i64 {
        self.points.iter().map(|(_, m)| m).sum()
    }

    /// The points with multiplicity, one entry per unit; negative
    /// multiplicities land in the second list.
    fn expand(&self) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for &(p, m) in &self.points {
            let target = if m > 0 { &mut pos } else { &mut neg };
            target.extend(std::iter::repeat_n(p, m.unsigned_abs() as usize));
        }
        (pos, neg)
    }
}

/// Source and target points of the paths joining `P` to `Q`.
fn pairs(p: &PointDivisor, q: &PointDivisor) -> Result<Vec<([f64; 3], [f64; 3])>> {
    if p.degree() != q.degree() {
        return Err(Error::DivisorDegree(p.degree(), q.degree()));
    }
    let (pp, pn) = p.expand();
    let (qp, qn) = q.expand();
    let sources: Vec<_> = pp.into_iter().chain(qn).collect();
    let targets: Vec<_> = qp.into_iter().chain(pn).collect();
    Ok(sources.into_iter().zip(targets).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbelJacobiClass {
    /// Coordinates in `[0, 1)` against `θ_1, θ_2, θ_3`.
    pub values: Vec<f64>,
}

/// Order and direction in which a staircase path walks the axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub order: [usize; 3],
    pub backward: [bool; 3],
}

impl Default for Route {
    fn default() -> Self {
        Route { order: [0, 1, 2], backward: [false; 3] }
    }
}

/// Integer edge chain between two vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticePath {
    pub start: [usize; 3],
    pub end: [usize; 3],
    pub chain: Vec<i64>,
}

fn steps(n: usize, from: usize, to: usize, backward: bool) -> usize {
    if backward {
        (from + n - to) % n
    } else {
        (to + n - from) % n
    }
}

pub fn lattice_path(x: &CubicalTorusComplex, start: [usize; 3], end: [usize; 3], route: Route) -> LatticePath {
    let g = x.grid();
    let n = x.resolution();
    let mut chain = vec![0; x.cell_count(1)];
    let mut t = start;
    for &a in &route.order {
        let back = route.backward[a];
        for _ in 0..steps(n, start[a], end[a], back) {
            if back {
                t = g.shift(t, a, -1).expect("periodic");
                chain[g.encode(1 << a, t)] -= 1;
            } else {
                chain[g.encode(1 << a, t)] += 1;
                t = g.shift(t, a, 1).expect("periodic");
            }
        }
    }
    LatticePath { start, end, chain }
}

/// Nearest vertex and the offset `p − vertex` in unit coordinates.
fn snap_vertex(n: usize, p: &[f64; 3]) -> ([usize; 3], [f64; 3]) {
    let mut v = [0; 3];
    let mut off = [0.0; 3];
    for a in 0..3 {
        let k = (p[a] * n as f64).round();
        off[a] = p[a] - k / n as f64;
        v[a] = (k as usize) % n;
    }
    (v, off)
}

/// Containing cube and the offset `p − centre`.
fn snap_cube(x: &CubicalTorusComplex, p: &[f64; 3]) -> ([usize; 3], [f64; 3]) {
    let n = x.resolution() as f64;
    let (_, t) = x.grid().decode(3, cell_of_point(x, p));
    let mut off = [0.0; 3];
    for a in 0..3 {
        off[a] = p[a] - (t[a] as f64 + 0.5) / n;
    }
    (t, off)
}

fn check_dim(m: &FlatMetric) -> Result<()> {
    match m.complex().dim() {
        3 => Ok(()),
        d => Err(Error::Dimension(d)),
    }
}

/// `∫_p^x θ_j` along the staircase route, unreduced.
fn period_integrals(m: &FlatMetric, p: &[f64; 3], x: &[f64; 3], route: Route) -> Result<Vec<f64>> {
    let cx = m.complex();
    let n = cx.resolution();
    let theta = &harmonic_basis(m, 1)?.basis;
    let (vp, op) = snap_vertex(n, p);
    let (vx, ox) = snap_vertex(n, x);
    let path = lattice_path(cx, vp, vx, route);
    Ok(theta
        .iter()
        .enumerate()
        .map(|(j, th)| {
            let lattice: f64 = path.chain.iter().zip(&th.values).map(|(&c, v)| c as f64 * v).sum();
            lattice + ox[j] - op[j]
        })
        .collect())
}

pub fn abel_jacobi(m: &FlatMetric, base: &[f64; 3], x: &[f64; 3]) -> Result<AbelJacobiClass> {
    abel_jacobi_along(m, base, x, Route::default())
}

pub fn abel_jacobi_along(m: &FlatMetric, base: &[f64; 3], x: &[f64; 3], route: Route) -> Result<AbelJacobiClass> {
    check_dim(m)?;
    let values = period_integrals(m, base, x, route)?.into_iter().map(wrap).collect();
    Ok(AbelJacobiClass { values })
}

/// `Σ u(q_i) − Σ u(p_i)` mod 1 from the origin as base point.
pub fn abel_jacobi_difference(m: &FlatMetric, p: &PointDivisor, q: &PointDivisor) -> Result<Vec<f64>> {
    check_dim(m)?;
    let mut total = vec![0.0; 3];
    for (d, sign) in [(q, 1.0), (p, -1.0)] {
        for (pt, mult) in &d.points {
            let u = abel_jacobi(m, &[0.0; 3], pt)?;
            for (t, v) in total.iter_mut().zip(&u.values) {
                *t += sign * *mult as f64 * v;
            }
        }
    }
    Ok(total.into_iter().map(wrap).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

/// Fractional parts within `tol` of an integer are integral; a part in
/// `[0.25, 0.75]` decides against; anything else is inconclusive.
pub fn verdict(fractional: &[f64], tol: f64) -> Verdict {
    let dist = |f: &f64| f.min(1.0 - f);
    if fractional.iter().all(|f| dist(f) <= tol) {
        Verdict::Equivalent
    } else if fractional.iter().any(|f| dist(f) >= 0.25) {
        Verdict::NotEquivalent
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    pub verdict: Verdict,
    /// `Σ_i ∫_{p_i}^{q_i} θ_j` before reduction.
    pub witness: Vec<f64>,
    /// Witness reduced to `[0, 1)`.
    pub fractional: Vec<f64>,
}

impl EquivalenceReport {
    fn from_witness(witness: Vec<f64>, tol: f64) -> Self {
        let fractional: Vec<f64> = witness.iter().map(|&w| wrap(w)).collect();
        let verdict = verdict(&fractional, tol);
        EquivalenceReport { equivalent: verdict == Verdict::Equivalent, verdict, witness, fractional }
    }
}

pub fn linearly_equivalent(m: &FlatMetric, p: &PointDivisor, q: &PointDivisor, tol: f64) -> Result<EquivalenceReport> {
    linearly_equivalent_along(m, p, q, tol, Route::default())
}

pub fn linearly_equivalent_along(
    m: &FlatMetric,
    p: &PointDivisor,
    q: &PointDivisor,
    tol: f64,
    route: Route,
) -> Result<EquivalenceReport> {
    check_dim(m)?;
    let mut witness = vec![0.0; 3];
    for (a, b) in pairs(p, q)? {
        for (w, v) in witness.iter_mut().zip(period_integrals(m, &a, &b, route)?) {
            *w += v;
        }
    }
    Ok(EquivalenceReport::from_witness(witness, tol))
}

/// Poincaré dual of the dual-lattice path between the centres of two
/// cubes: `ε(S, {a})` on every face of type `S` crossed in direction `+a`.
pub fn dual_path_current(x: &CubicalTorusComplex, start: [usize; 3], end: [usize; 3], route: Route) -> Cochain<f64> {
    let g = x.grid();
    let n = x.resolution();
    let mut v = vec![0.0; x.cell_count(2)];
    let mut t = start;
    for &a in &route.order {
        let s: Axes = 0b111 & !(1 << a);
        let eps = shuffle_sign(s, 1 << a) as f64;
        let back = route.backward[a];
        for _ in 0..steps(n, start[a], end[a], back) {
            if back {
                v[g.encode(s, t)] -= eps;
                t = g.shift(t, a, -1).expect("periodic");
            } else {
                t = g.shift(t, a, 1).expect("periodic");
                v[g.encode(s, t)] += eps;
            }
        }
    }
    Cochain::new(2, v)
}

#[derive(Debug, Clone, Serialize)]
pub struct CurrentDecomposition {
    /// Periods of the harmonic part on the coordinate 2-tori.
    pub harmonic_periods: Vec<f64>,
    /// `‖d(γ − d*c)‖∞`: how far the co-exact split leaves a closed form.
    pub residual: f64,
    /// `∫ a ∧ θ_j` plus the sub-cell offsets.
    pub pairings: Vec<f64>,
}

/// Hodge-decomposes the total path current: `Δc = dγ` gives the co-exact
/// part `d*c`; the harmonic part of the closed remainder is read off from
/// its periods and paired with the harmonic 1-forms.
pub fn decompose_current(m: &FlatMetric, p: &PointDivisor, q: &PointDivisor, route: Route) -> Result<CurrentDecomposition> {
    check_dim(m)?;
    let x = m.complex();
    let mut gamma = Cochain::zeros(x, 2);
    let mut offsets = vec![0.0; 3];
    for (a, b) in pairs(p, q)? {
        let (ta, oa) = snap_cube(x, &a);
        let (tb, ob) = snap_cube(x, &b);
        gamma = gamma.add(&dual_path_current(x, ta, tb, route));
        for j in 0..3 {
            offsets[j] += ob[j] - oa[j];
        }
    }
    let dg = x.coboundary(&gamma);
    let c = solve_poisson(m, &dg)?;
    let closed = gamma.sub(&m.codifferential(&c));
    let residual = sup_norm(&x.coboundary(&closed).values);
    if residual > 1e-8 {
        return Err(Error::Decomposition(residual));
    }
    let eta = &harmonic_basis(m, 2)?.basis;
    let harmonic_periods: Vec<f64> = x
        .grid()
        .subsets(2)
        .iter()
        .map(|&s| {
            let z = x.coordinate_cycle(s);
            z.iter().zip(&closed.values).map(|(&a, b)| a as f64 * b).sum()
        })
        .collect();
    let mut harmonic = Cochain::zeros(x, 2);
    for (e, &w) in eta.iter().zip(&harmonic_periods) {
        harmonic = harmonic.add(&e.scaled(w));
    }
    let theta = &harmonic_basis(m, 1)?.basis;
    let pairings = theta
        .iter()
        .zip(&offsets)
        .map(|(th, off)| Ok(wedge_pairing(x, &harmonic, th)? + off))
        .collect::<Result<Vec<f64>>>()?;
    Ok(CurrentDecomposition { harmonic_periods, residual, pairings })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolonomyEquivalence {
    pub report: EquivalenceReport,
    pub decomposition: CurrentDecomposition,
}

pub fn holonomy_equivalent(m: &FlatMetric, p: &PointDivisor, q: &PointDivisor, tol: f64) -> Result<HolonomyEquivalence> {
    holonomy_equivalent_along(m, p, q, tol, Route::default())
}

pub fn holonomy_equivalent_along(
    m: &FlatMetric,
    p: &PointDivisor,
    q: &PointDivisor,
    tol: f64,
    route: Route,
) -> Result<HolonomyEquivalence> {
    let decomposition = decompose_current(m, p, q, route)?;
    let report = EquivalenceReport::from_witness(decomposition.pairings.clone(), tol);
    Ok(HolonomyEquivalence { report, decomposition })
}

/// Random divisors of the given degree with unit multiplicities. An
/// equivalent pair closes the sum of `Q` onto the sum of `P`; otherwise `Q`
/// is drawn independently.
pub fn sample_pair<R: Rng + ?Sized>(rng: &mut R, degree: usize, equivalent: bool) -> (PointDivisor, PointDivisor) {
    let mut point = || -> [f64; 3] { std::array::from_fn(|_| rng.random()) };
    let ps: Vec<[f64; 3]> = (0..degree).map(|_| point()).collect();
    let mut qs: Vec<[f64; 3]> = (0..degree).map(|_| point()).collect();
    if equivalent {
        let last = degree - 1;
        qs[last] = std::array::from_fn(|a| {
            ps.iter().map(|x| x[a]).sum::<f64>() - qs[..last].iter().map(|x| x[a]).sum::<f64>()
        });
    }
    let unit = |v: Vec<[f64; 3]>| PointDivisor::new(v.into_iter().map(|x| (x, 1)).collect());
    (unit(ps), unit(qs))
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementTrial {
    pub p: PointDivisor,
    pub q: PointDivisor,
    pub periods: EquivalenceReport,
    pub current: EquivalenceReport,
    pub abel_jacobi: Vec<f64>,
    /// Largest circular distance between the current pairings and the
    /// Abel–Jacobi difference.
    pub class_error: f64,
}

impl AgreementTrial {
    pub fn agree(&self) -> bool {
        self.periods.verdict == self.current.verdict
    }
}

/// Circular distance on ℝ/ℤ.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// `count` trials with degrees cycling through 1..=3 and alternating
/// constructed-equivalent and independent pairs.
pub fn agreement_trials(m: &FlatMetric, seed: u64, count: usize, tol: f64) -> Result<Vec<AgreementTrial>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let (p, q) = sample_pair(&mut rng, 1 + i % 3, i % 2 == 0);
            let periods = linearly_equivalent(m, &p, &q, tol)?;
            let current = holonomy_equivalent(m, &p, &q, tol)?.report;
            let abel_jacobi = abel_jacobi_difference(m, &p, &q)?;
            let class_error = current
                .witness
                .iter()
                .zip(&abel_jacobi)
                .map(|(&a, &b)| circle_distance(a, b))
                .fold(0.0, f64::max);
            Ok(AgreementTrial { p, q, periods, current, abel_jacobi, class_error })
        })
        .collect()
}

/// Flat connection `𝒢_P ⊗ 𝒢_Q^{-1}` on the cover.
pub fn divisor_gerbe(m: &FlatMetric, cover: &GoodCover, p: &PointDivisor, q: &PointDivisor) -> Result<GerbeConnection> {
    if p.degree() != q.degree() {
        return Err(Error::DivisorDegree(p.degree(), q.degree()));
    }
    let mut acc = GerbeConnection::trivial(cover);
    for (d, sign) in [(p, 1), (q, -1)] {
        for (pt, mult) in &d.points {
            let g = point_gerbe_connection(m, cover, pt)?.connection;
            let g = if sign * mult > 0 { g } else { g.inverse(cover)? };
            for _ in 0..mult.unsigned_abs() {
                acc = acc.tensor(cover, &g)?;
            }
        }
    }
    Ok(acc)
}

/// Holonomy of the divisor gerbe on the coordinate 2-torus transverse to
/// each axis, oriented so that the torus followed by the axis is positive,
/// plus the sub-cell offsets (the point gerbes only see cubes).
pub fn gerbe_holonomy_class(m: &FlatMetric, cover: &GoodCover, p: &PointDivisor, q: &PointDivisor) -> Result<Vec<f64>> {
    check_dim(m)?;
    let conn = divisor_gerbe(m, cover, p, q)?;
    let hol = holonomy(cover, &conn)?;
    let x = m.complex();
    let mut offsets = [0.0; 3];
    for (d, sign) in [(q, 1.0), (p, -1.0)] {
        for (pt, mult) in &d.points {
            let (_, off) = snap_cube(x, pt);
            (0..3).for_each(|a| offsets[a] += sign * *mult as f64 * off[a]);
        }
    }
    let subsets = x.grid().subsets(2);
    Ok((0..3)
        .map(|a| {
            let s: Axes = 0b111 & !(1 << a);
            let j = subsets.iter().position(|&t| t == s).expect("2-subset");
            wrap(shuffle_sign(s, 1 << a) as f64 * hol.values[j] + offsets[a])
        })
        .collect())
}
