//! The de Rham to Čech staircase.
//!
//! For a closed q-cochain `G` the levels are `x_0 = K(G|_α)` and
//! `x_j = K(δ x_{j−1})`, so `d x_0 = G` and `d x_j = δ x_{j−1}`. The last
//! level is a function on (q−1)-fold overlaps whose Čech coboundary is
//! constant on each q-fold overlap; an integrality adjustment makes that
//! constant exactly `2π` times an integer cocycle.

use super::cochain::{int_gap, CechForm, GerbeCocycle};
use super::cover::GoodCover;
use super::homotopy::Root;
use crate::complex::Cochain;
use crate::sparse::{least_squares, sup_norm};
use crate::{Error, Result};
use std::f64::consts::TAU;

#[derive(Debug, Clone)]
pub struct CechLift {
    pub degree: usize,
    /// Level j has bidegree (j, q − 1 − j); the last level is adjusted.
    pub levels: Vec<CechForm>,
    /// Last level divided by 2π: a real lift of the circle cocycle.
    pub lift: CechForm,
    /// Periods of `G/2π` on the coordinate q-tori.
    pub periods: Vec<f64>,
    /// The same periods read off the Čech constants before rounding.
    pub cech_periods: Vec<f64>,
    pub class: Vec<i64>,
}

/// Tolerance on the integrality of `[G]/2π`.
pub const INTEGRALITY_TOL: f64 = 1e-9;

pub fn derham_to_cech_degree(cover: &GoodCover, g: &Cochain<f64>, root: Root) -> Result<CechLift> {
    let x = cover.complex();
    let q = g.degree;
    if q == 0 || q > x.dim() {
        return Err(Error::DegreeRange { k: q, max: x.dim() });
    }
    let dg = x.coboundary(g);
    let closed = sup_norm(&dg.values);
    if closed > 1e-9 {
        return Err(Error::NotClosed(closed));
    }
    let periods = checked_periods(x, g)?;
    let first = CechForm::restrict(cover, g).contract(cover, root);
    continue_staircase(cover, g, first, periods, root)
}

/// Runs the staircase from given local primitives `first` of `G` (one
/// (q−1)-cochain per set with `d first_α = G|_α`) after `G` has been checked.
pub fn staircase_from_primitives(
    cover: &GoodCover,
    g: &Cochain<f64>,
    first: CechForm,
    root: Root,
) -> Result<CechLift> {
    let x = cover.complex();
    let q = g.degree;
    if first.cech_degree != 0 || first.form_degree + 1 != q {
        return Err(Error::DegreeMismatch("primitives must be (0, q − 1) cochains".into()));
    }
    let res = first.d(cover).sub(&CechForm::restrict(cover, g)).sup_norm();
    if res > 1e-9 {
        return Err(Error::NotClosed(res));
    }
    let periods = checked_periods(x, g)?;
    continue_staircase(cover, g, first, periods, root)
}

fn checked_periods(x: &crate::complex::CubicalTorusComplex, g: &Cochain<f64>) -> Result<Vec<f64>> {
    let q = g.degree;
    let periods: Vec<f64> = x
        .grid()
        .subsets(q)
        .iter()
        .map(|&s| {
            let z = x.coordinate_cycle(s);
            z.iter().zip(&g.values).map(|(&a, b)| a as f64 * b).sum::<f64>() / TAU
        })
        .collect();
    for &p in &periods {
        if int_gap(p) > INTEGRALITY_TOL {
            return Err(Error::NonIntegral { period: p, gap: int_gap(p) });
        }
    }
    Ok(periods)
}

fn continue_staircase(
    cover: &GoodCover,
    g: &Cochain<f64>,
    first: CechForm,
    periods: Vec<f64>,
    root: Root,
) -> Result<CechLift> {
    let q = g.degree;
    let mut levels = vec![first];
    for _ in 1..q {
        let next = levels.last().unwrap().delta(cover).contract(cover, root);
        levels.push(next);
    }
    let c = levels.last().unwrap().delta(cover);
    let spread = c.max_block_spread();
    if spread > 1e-6 {
        return Err(Error::NonConstant(spread));
    }
    let y: Vec<f64> = c.block_means().iter().map(|v| v / TAU).collect();
    let classes = cover.nerve_classes(q)?;
    let cech_periods: Vec<f64> = classes
        .cycles
        .iter()
        .map(|z| {
            z.nerve_chain(cover.nerve())
                .iter()
                .zip(&y)
                .map(|(&a, b)| a as f64 * b)
                .sum()
        })
        .collect();
    let class: Vec<i64> = periods.iter().map(|p| p.round() as i64).collect();
    // y − n is exact over ℝ; absorb its primitive into the last level.
    let mut target = y.clone();
    for (k, gen) in class.iter().zip(&classes.generators) {
        for (t, gv) in target.iter_mut().zip(gen) {
            *t -= (*k * gv) as f64;
        }
    }
    let delta = cover.nerve().coboundary(q - 1).map(|v| v as f64);
    let b = least_squares(&delta, &target, 1e-14)?;
    let res: Vec<f64> = delta.mul_vec(&b).iter().zip(&target).map(|(u, v)| u - v).collect();
    let res = sup_norm(&res);
    if res > 1e-9 {
        return Err(Error::NonIntegral { period: res, gap: res });
    }
    let last = levels.pop().unwrap();
    let adjusted = last.sub(&CechForm::from_constants(cover, q - 1, &b).scaled(TAU));
    let lift = adjusted.scaled(1.0 / TAU);
    levels.push(adjusted);
    Ok(CechLift { degree: q, levels, lift, periods, cech_periods, class })
}

/// Staircase of a closed 3-cochain with integral periods: the gerbe cocycle
/// together with `F_α`, `A_αβ` and `f_αβγ`.
pub fn derham_to_cech(cover: &GoodCover, g: &Cochain<f64>) -> Result<(GerbeCocycle, CechLift)> {
    if g.degree != 3 {
        return Err(Error::DegreeMismatch("gerbe curvature must be a 3-cochain".into()));
    }
    let stair = derham_to_cech_degree(cover, g, Root::Lower)?;
    let cocycle = GerbeCocycle::from_lift(cover, stair.lift.clone())?;
    Ok((cocycle, stair))
}
