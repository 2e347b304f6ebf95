//! Legendre duality `φ̌(ξ) = ⟨x, ξ⟩ − φ(x)` with `ξ = ∇φ(x)`, and the mirror
//! metric `g_ij dx_i dx_j + g^{ij} dη_i dη_j`.
//!
//! If `ψ` is periodic under `Lℤⁿ` then shifting `x` by `Le` shifts `ξ` by
//! `QLe` and `φ̌` by an affine function, so `φ̌ = c̆ + ½ ξᵀQ⁻¹ξ + ψ̌` with `ψ̌`
//! periodic under `QLℤⁿ`. The dual is sampled on the grid `QL·k/M`.

use super::potential::{HessianPotential, PotentialEvaluator};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX: usize = 50;

pub const INVOLUTION_TOL: f64 = 1e-8;
pub const HESSIAN_INVERSE_TOL: f64 = 1e-6;
pub const PULLBACK_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LegendreTransform {
    pub dual: HessianPotential,
    /// `x(ξ)` for every dual node.
    pub preimages: Vec<DVector<f64>>,
    pub newton_iterations: usize,
    pub gradient_residual: f64,
}

/// Solves `∇φ(x) = ξ` from `start`, backtracking on the residual norm.
fn invert_gradient(ev: &PotentialEvaluator, xi: &DVector<f64>, start: DVector<f64>) -> Result<(DVector<f64>, usize, f64)> {
    let mut x = start;
    let (_, g, mut h) = ev.eval(&x);
    let mut r = g - xi;
    let scale = 1.0 + xi.amax();
    for it in 0..NEWTON_MAX {
        if r.amax() <= NEWTON_TOL * scale {
            return Ok((x, it, r.amax()));
        }
        let step = h.clone().cholesky().ok_or(Error::Convexity(vec![]))?.solve(&r);
        let mut t = 1.0;
        loop {
            let trial = &x - &step * t;
            let (_, g2, h2) = ev.eval(&trial);
            let r2 = g2 - xi;
            if r2.norm() < r.norm() || t < 1e-9 {
                x = trial;
                r = r2;
                h = h2;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::Newton(format!("gradient inversion stalled at residual {:e}", r.amax())))
}

fn symmetric_inverse(q: &DMatrix<f64>) -> DMatrix<f64> {
    let inv = q.clone().try_inverse().expect("positive definite");
    (&inv + inv.transpose()) * 0.5
}

pub fn legendre_transform(phi: &HessianPotential) -> Result<LegendreTransform> {
    let ev = PotentialEvaluator::new(phi);
    let q_inv = symmetric_inverse(&phi.quad);
    let lattice = &phi.quad * &phi.lattice;
    let grid = phi.grid();
    let mut preimages = Vec::with_capacity(grid.len());
    let mut psi = Vec::with_capacity(grid.len());
    let (mut iterations, mut residual) = (0, 0.0f64);
    for i in 0..grid.len() {
        let s = DVector::from_vec(grid.node(i));
        let xi = &lattice * &s;
        // Exact for ψ = 0, and a good start otherwise.
        let start = &phi.lattice * &s;
        let (x, it, res) = invert_gradient(&ev, &xi, start)?;
        iterations = iterations.max(it);
        residual = residual.max(res);
        let (value, _, _) = ev.eval(&x);
        psi.push(x.dot(&xi) - value - 0.5 * xi.dot(&(&q_inv * &xi)));
        preimages.push(x);
    }
    let dual = HessianPotential::with_lattice(q_inv, lattice, 0.0, phi.resolution(), psi, phi.scheme)?;
    Ok(LegendreTransform { dual, preimages, newton_iterations: iterations, gradient_residual: residual })
}

/// The mirror metric at the dual nodes, in coordinates `(x, η)`.
#[derive(Debug, Clone)]
pub struct MirrorMetric {
    pub n: usize,
    /// `g_ij` at `x(ξ)`.
    pub base: Vec<DMatrix<f64>>,
    /// `g^{ij}` at `x(ξ)`.
    pub fiber: Vec<DMatrix<f64>>,
}

impl MirrorMetric {
    pub fn block(&self, node: usize) -> DMatrix<f64> {
        let n = self.n;
        let mut b = DMatrix::zeros(2 * n, 2 * n);
        b.view_mut((0, 0), (n, n)).copy_from(&self.base[node]);
        b.view_mut((n, n), (n, n)).copy_from(&self.fiber[node]);
        b
    }

    /// Largest deviation of `fiber · base` from the identity.
    pub fn inverse_defect(&self) -> f64 {
        let n = self.n;
        self.base
            .iter()
            .zip(&self.fiber)
            .map(|(g, f)| (f * g - DMatrix::identity(n, n)).amax())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct MirrorCheck {
    pub metric: MirrorMetric,
    pub transform: LegendreTransform,
    /// `max |φ̌̌ − φ|` over the nodes.
    pub involution_error: f64,
    /// `max |Hess φ̌(ξ) − (Hess φ(x(ξ)))⁻¹|`.
    pub hessian_inverse_error: f64,
    /// Mirror metric pulled back to `(ξ, η)` against `Hess φ̌ (dξdξ + dηdη)`.
    pub pullback_error: f64,
}

impl MirrorCheck {
    pub fn passes(&self) -> bool {
        self.involution_error < INVOLUTION_TOL
            && self.hessian_inverse_error < HESSIAN_INVERSE_TOL
            && self.pullback_error < PULLBACK_TOL
    }
}

pub fn mirror_metric_check(phi: &HessianPotential) -> Result<MirrorCheck> {
    let n = phi.dim();
    let transform = legendre_transform(phi)?;
    let back = legendre_transform(&transform.dual)?;
    let original = phi.values();
    let involution_error = back
        .dual
        .values()
        .iter()
        .zip(&original)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let ev = PotentialEvaluator::new(phi);
    let dual_hessian = transform.dual.hessian_field();
    let (mut base, mut fiber) = (Vec::new(), Vec::new());
    let (mut hessian_inverse_error, mut pullback_error) = (0.0f64, 0.0f64);
    for (x, hd) in transform.preimages.iter().zip(&dual_hessian) {
        let (_, _, g) = ev.eval(x);
        let g_inv = symmetric_inverse(&g);
        hessian_inverse_error = hessian_inverse_error.max((hd - &g_inv).amax());
        // dx = (∂x/∂ξ) dξ = Hess φ̌ dξ, while η is unchanged.
        let pulled = hd.transpose() * &g * hd;
        pullback_error = pullback_error.max((pulled - hd).amax()).max((&g_inv - hd).amax());
        base.push(g);
        fiber.push(g_inv);
    }
    Ok(MirrorCheck {
        metric: MirrorMetric { n, base, fiber },
        transform,
        involution_error,
        hessian_inverse_error,
        pullback_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syz::Scheme;
    use std::f64::consts::TAU;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn quadratic_duals_are_closed_form() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let phi = HessianPotential::quadratic(q.clone(), 8, Scheme::Spectral).unwrap();
        let lt = legendre_transform(&phi).unwrap();
        let q_inv = q.clone().try_inverse().unwrap();
        assert!((&lt.dual.quad - &q_inv).amax() < 1e-12);
        assert!(lt.dual.psi.iter().all(|v| v.abs() < 1e-12));
        assert!(lt.dual.constant.abs() < 1e-12);
        for i in 0..lt.dual.nodes() {
            let xi = lt.dual.point(i);
            let want = 0.5 * xi.dot(&(&q_inv * &xi));
            assert!((lt.dual.values()[i] - want).abs() < 1e-12);
        }
        let check = mirror_metric_check(&HessianPotential::quadratic(diag(&[1.0, 4.0]), 8, Scheme::Spectral).unwrap()).unwrap();
        for i in 0..check.metric.base.len() {
            assert!((&check.metric.fiber[i] - diag(&[1.0, 0.25])).amax() < 1e-12);
        }
        let me = mirror_metric_check(&HessianPotential::quadratic(diag(&[1.0, 1.0]), 8, Scheme::Spectral).unwrap()).unwrap();
        assert!((me.metric.block(5) - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn perturbed_potential_round_trips() {
        let phi = HessianPotential::from_fn(diag(&[1.0, 1.0]), 64, Scheme::Spectral, |x| 0.01 * (TAU * x[0]).cos()).unwrap();
        let check = mirror_metric_check(&phi).unwrap();
        assert!(check.involution_error < INVOLUTION_TOL, "{}", check.involution_error);
        assert!(check.hessian_inverse_error < HESSIAN_INVERSE_TOL, "{}", check.hessian_inverse_error);
        assert!(check.pullback_error < PULLBACK_TOL, "{}", check.pullback_error);
        assert!(check.metric.inverse_defect() < 1e-10);
        assert!(check.passes());
    }

    #[test]
    fn coupled_three_dimensional_potential() {
        let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.5, 0.2, 0.0, 0.2, 1.0]);
        let phi = HessianPotential::from_fn(q, 16, Scheme::Spectral, |x| {
            0.002 * (TAU * (x[0] + x[2])).sin() + 0.001 * (TAU * x[1]).cos()
        })
        .unwrap();
        let check = mirror_metric_check(&phi).unwrap();
        assert!(check.passes(), "{} {} {}", check.involution_error, check.hessian_inverse_error, check.pullback_error);
    }
}
