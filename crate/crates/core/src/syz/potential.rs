//! Convex potentials `φ(x) = c + ½ xᵀQx + ψ(x)` with `ψ` periodic under a
//! lattice `Lℤⁿ`, the Hessian metrics they define, and their Monge–Ampère
//! and Ricci fields.

use super::periodic::{PeriodicGrid, Scheme, TrigSeries};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone)]
pub struct HessianPotential {
    pub quad: DMatrix<f64>,
    /// Period lattice of `ψ`: the identity on the base, `Q` on the mirror.
    pub lattice: DMatrix<f64>,
    pub constant: f64,
    /// Samples of `ψ` at the nodes `L·k/M`, mean zero.
    pub psi: Vec<f64>,
    pub scheme: Scheme,
    grid: PeriodicGrid,
    lattice_inv: DMatrix<f64>,
}

fn positive_definite(q: &DMatrix<f64>) -> bool {
    q.is_square() && (q - q.transpose()).amax() < 1e-12 && min_eigenvalue(q) > 0.0
}

pub(crate) fn min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(h.clone()).eigenvalues.min()
}

impl HessianPotential {
    /// `ψ` is given at the nodes of the unit grid; its mean moves into the
    /// constant.
    pub fn new(quad: DMatrix<f64>, resolution: usize, psi: Vec<f64>, scheme: Scheme) -> Result<Self> {
        let n = quad.nrows();
        Self::with_lattice(quad, DMatrix::identity(n, n), 0.0, resolution, psi, scheme)
    }

    pub fn with_lattice(
        quad: DMatrix<f64>,
        lattice: DMatrix<f64>,
        constant: f64,
        resolution: usize,
        mut psi: Vec<f64>,
        scheme: Scheme,
    ) -> Result<Self> {
        if !positive_definite(&quad) {
            return Err(Error::Invalid("quadratic part must be symmetric positive definite".into()));
        }
        let n = quad.nrows();
        if !(2..=3).contains(&n) {
            return Err(Error::Dimension(n));
        }
        let grid = PeriodicGrid::new(n, resolution)?;
        if psi.len() != grid.len() {
            return Err(Error::Invalid(format!("expected {} samples of ψ, got {}", grid.len(), psi.len())));
        }
        let lattice_inv = lattice
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Invalid("singular period lattice".into()))?;
        let mean = psi.iter().sum::<f64>() / psi.len() as f64;
        psi.iter_mut().for_each(|v| *v -= mean);
        Ok(HessianPotential { quad, lattice, constant: constant + mean, psi, scheme, grid, lattice_inv })
    }

    pub fn quadratic(quad: DMatrix<f64>, resolution: usize, scheme: Scheme) -> Result<Self> {
        let len = resolution.pow(quad.nrows() as u32);
        Self::new(quad, resolution, vec![0.0; len], scheme)
    }

    /// Samples `ψ(s)` at the unit-grid nodes.
    pub fn from_fn(quad: DMatrix<f64>, resolution: usize, scheme: Scheme, psi: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let grid = PeriodicGrid::new(quad.nrows(), resolution)?;
        let samples = (0..grid.len()).map(|i| psi(&grid.node(i))).collect();
        Self::new(quad, resolution, samples, scheme)
    }

    pub fn dim(&self) -> usize {
        self.quad.nrows()
    }

    pub fn resolution(&self) -> usize {
        self.grid.resolution()
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub(crate) fn lattice_inv(&self) -> &DMatrix<f64> {
        &self.lattice_inv
    }

    /// Same `Q`, lattice and scheme with new periodic samples.
    pub fn with_psi(&self, psi: Vec<f64>) -> Result<Self> {
        Self::with_lattice(self.quad.clone(), self.lattice.clone(), self.constant, self.resolution(), psi, self.scheme)
    }

    pub fn point(&self, node: usize) -> DVector<f64> {
        &self.lattice * DVector::from_vec(self.grid.node(node))
    }

    /// `φ` at every node.
    pub fn values(&self) -> Vec<f64> {
        (0..self.nodes())
            .map(|i| {
                let x = self.point(i);
                self.constant + 0.5 * x.dot(&(&self.quad * &x)) + self.psi[i]
            })
            .collect()
    }

    /// Gradient and Hessian of `φ` at every node under the potential's scheme.
    pub fn derivative_fields(&self) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
        self.derivative_fields_with(self.scheme)
    }

    pub fn derivative_fields_with(&self, scheme: Scheme) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
        let n = self.dim();
        let (gs, hs) = self.grid.derivatives(&self.psi, scheme);
        let li = &self.lattice_inv;
        let grads = (0..self.nodes())
            .map(|i| {
                let g = DVector::from_fn(n, |a, _| gs[a][i]);
                &self.quad * self.point(i) + li.transpose() * g
            })
            .collect();
        let hessians = (0..self.nodes())
            .map(|i| {
                let h = DMatrix::from_fn(n, n, |a, b| hs[a][b][i]);
                &self.quad + li.transpose() * h * li
            })
            .collect();
        (grads, hessians)
    }

    pub fn hessian_field(&self) -> Vec<DMatrix<f64>> {
        self.derivative_fields().1
    }

    pub fn series(&self) -> TrigSeries {
        TrigSeries::from_samples(&self.grid, &self.psi)
    }
}

/// Off-grid evaluation of `φ` through the trigonometric interpolant of `ψ`.
#[derive(Debug, Clone)]
pub struct PotentialEvaluator<'a> {
    phi: &'a HessianPotential,
    series: TrigSeries,
}

impl<'a> PotentialEvaluator<'a> {
    pub fn new(phi: &'a HessianPotential) -> Self {
        PotentialEvaluator { phi, series: phi.series() }
    }

    /// Value, gradient and Hessian of `φ` at `x`.
    pub fn eval(&self, x: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let p = self.phi;
        let n = p.dim();
        let li = p.lattice_inv();
        let s = li * x;
        let (v, g, h) = self.series.eval(s.as_slice());
        let qx = &p.quad * x;
        let value = p.constant + 0.5 * x.dot(&qx) + v;
        let grad = qx + li.transpose() * DVector::from_vec(g);
        let hess = &p.quad + li.transpose() * DMatrix::from_fn(n, n, |a, b| h[a][b]) * li;
        (value, grad, hess)
    }
}

/// `g = Σ φ_ij (dx_i dx_j + dy_i dy_j)` sampled at the nodes.
#[derive(Debug, Clone)]
pub struct SemiFlatMetric {
    pub n: usize,
    pub hessian: Vec<DMatrix<f64>>,
    pub min_eigenvalue: f64,
}

impl SemiFlatMetric {
    /// The quotient metric on the base at a node.
    pub fn base(&self, node: usize) -> &DMatrix<f64> {
        &self.hessian[node]
    }

    /// The `2n × 2n` metric in coordinates `(x, y)`.
    pub fn block(&self, node: usize) -> DMatrix<f64> {
        let n = self.n;
        let mut b = DMatrix::zeros(2 * n, 2 * n);
        b.view_mut((0, 0), (n, n)).copy_from(&self.hessian[node]);
        b.view_mut((n, n), (n, n)).copy_from(&self.hessian[node]);
        b
    }
}

fn convexity(hessian: &[DMatrix<f64>]) -> (f64, Vec<usize>) {
    let mut min = f64::INFINITY;
    let mut bad = Vec::new();
    for (i, h) in hessian.iter().enumerate() {
        let e = min_eigenvalue(h);
        min = min.min(e);
        if e <= 0.0 {
            bad.push(i);
        }
    }
    (min, bad)
}

/// Smallest eigenvalue of `Hess φ` over the nodes.
pub fn min_convexity(phi: &HessianPotential) -> f64 {
    convexity(&phi.hessian_field()).0
}

pub fn semi_flat_metric(phi: &HessianPotential) -> Result<SemiFlatMetric> {
    let hessian = phi.hessian_field();
    let (min_eigenvalue, bad) = convexity(&hessian);
    if !bad.is_empty() {
        return Err(Error::Convexity(bad));
    }
    Ok(SemiFlatMetric { n: phi.dim(), hessian, min_eigenvalue })
}

#[derive(Debug, Clone)]
pub struct MaResidual {
    /// `det Hess φ − c*` at every node.
    pub field: Vec<f64>,
    /// `c* = det Q`, forced by the degree of the gradient map.
    pub target: f64,
    pub sup: f64,
}

pub fn ma_residual(phi: &HessianPotential) -> MaResidual {
    let target = phi.quad.determinant();
    let field: Vec<f64> = phi.hessian_field().iter().map(|h| h.determinant() - target).collect();
    let sup = field.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    MaResidual { field, target, sup }
}

#[derive(Debug, Clone)]
pub struct RicciField {
    /// `Ric_{i j̄} = −¼ ∂_i ∂_j log det(φ_kl)` at every node.
    pub field: Vec<DMatrix<f64>>,
    pub norm: f64,
}

/// Ricci curvature of the Kähler metric with potential `φ(x)`: the complex
/// Hessian of `−log det g` reduces to a quarter of the real Hessian in `x`
/// because nothing depends on `y`.
pub fn ricci_tensor(phi: &HessianPotential) -> Result<RicciField> {
    ricci_tensor_with(phi, phi.scheme)
}

pub fn ricci_tensor_with(phi: &HessianPotential, scheme: Scheme) -> Result<RicciField> {
    let n = phi.dim();
    let (_, hessian) = phi.derivative_fields_with(scheme);
    let (_, bad) = convexity(&hessian);
    if !bad.is_empty() {
        return Err(Error::Convexity(bad));
    }
    let log_det: Vec<f64> = hessian.iter().map(|h| h.determinant().ln()).collect();
    let (_, hs) = phi.grid().derivatives(&log_det, scheme);
    let li = phi.lattice_inv();
    let field: Vec<DMatrix<f64>> = (0..phi.nodes())
        .map(|i| li.transpose() * DMatrix::from_fn(n, n, |a, b| -0.25 * hs[a][b][i]) * li)
        .collect();
    let norm = field.iter().fold(0.0, |m: f64, r| m.max(r.amax()));
    Ok(RicciField { field, norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn quadratic_potentials_are_flat() {
        for q in [diag(&[1.0, 1.0]), diag(&[1.0, 2.0])] {
            let phi = HessianPotential::quadratic(q.clone(), 8, Scheme::Spectral).unwrap();
            let g = semi_flat_metric(&phi).unwrap();
            for i in 0..phi.nodes() {
                assert_eq!(g.base(i), &q);
                assert_eq!(g.block(i).view((2, 2), (2, 2)), q);
            }
            assert_eq!(ma_residual(&phi).sup, 0.0);
            assert_eq!(ricci_tensor(&phi).unwrap().norm, 0.0);
        }
    }

    #[test]
    fn cosine_perturbation_against_closed_forms() {
        let eps = 0.01;
        let q = diag(&[1.0, 1.0]);
        let phi = HessianPotential::from_fn(q.clone(), 64, Scheme::Spectral, |x| eps * (TAU * x[0]).cos()).unwrap();
        let g = semi_flat_metric(&phi).unwrap();
        // Independent oracle: fourth-order differences of the closed form.
        let phi_exact = |x: f64, y: f64| 0.5 * (x * x + y * y) + eps * (TAU * x).cos();
        let h = 4e-3;
        for i in (0..phi.nodes()).step_by(37) {
            let x = phi.point(i);
            let f = |s: f64| phi_exact(x[0] + s * h, x[1]);
            let fd = (-f(2.0) + 16.0 * f(1.0) - 30.0 * f(0.0) + 16.0 * f(-1.0) - f(-2.0)) / (12.0 * h * h);
            assert!((g.base(i)[(0, 0)] - fd).abs() < 1e-8);
            assert!((g.base(i)[(0, 0)] - (1.0 - eps * TAU * TAU * (TAU * x[0]).cos())).abs() < 1e-10);
        }
        let eps = 1e-3;
        let phi = HessianPotential::from_fn(q, 32, Scheme::Spectral, |x| eps * (TAU * x[0]).cos()).unwrap();
        let r = ma_residual(&phi);
        for i in 0..phi.nodes() {
            let x = phi.point(i);
            assert!((r.field[i] + eps * TAU * TAU * (TAU * x[0]).cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn non_solutions_have_curvature() {
        let phi = HessianPotential::from_fn(diag(&[3.0, 1.0]), 32, Scheme::Spectral, |x| 0.05 * (TAU * x[0]).cos()).unwrap();
        let spectral = ricci_tensor(&phi).unwrap();
        assert!(spectral.norm > 1e-3);
        let fd = ricci_tensor_with(&phi, Scheme::FiniteDifference4).unwrap();
        assert!((spectral.norm - fd.norm).abs() < 1e-2 * spectral.norm);
    }

    #[test]
    fn convexity_failures_list_nodes() {
        let phi = HessianPotential::from_fn(diag(&[1.0, 1.0]), 16, Scheme::Spectral, |x| 0.05 * (TAU * x[0]).cos()).unwrap();
        match semi_flat_metric(&phi) {
            Err(Error::Convexity(nodes)) => assert!(nodes.contains(&0)),
            other => panic!("{other:?}"),
        }
        assert!(ricci_tensor(&phi).is_err());
        assert!(HessianPotential::quadratic(diag(&[1.0, -1.0]), 8, Scheme::Spectral).is_err());
    }

    #[test]
    fn evaluator_agrees_with_the_grid() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let phi = HessianPotential::from_fn(q, 16, Scheme::Spectral, |x| 0.02 * (TAU * (x[0] + 2.0 * x[1])).sin()).unwrap();
        let ev = PotentialEvaluator::new(&phi);
        let values = phi.values();
        let (grads, hess) = phi.derivative_fields();
        for i in (0..phi.nodes()).step_by(11) {
            let (v, g, h) = ev.eval(&phi.point(i));
            assert!((v - values[i]).abs() < 1e-12);
            assert!((g - &grads[i]).amax() < 1e-10);
            assert!((h - &hess[i]).amax() < 1e-9);
        }
    }
}
