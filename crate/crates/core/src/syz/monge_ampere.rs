//! Damped Newton iteration for `det Hess φ = c ρ` over mean-zero periodic
//! `ψ`, with `ρ ≡ 1` for the Monge–Ampère equation proper.
//!
//! The linearization `v ↦ Σ C_ab ∂_a∂_b v`, with `C` the cofactor matrix of
//! `Hess φ`, is solved by right-preconditioned GMRES. The preconditioner
//! inverts the same operator with `C` replaced by its mean, which is
//! diagonal in Fourier space. The multiplier `c` is an extra unknown paired
//! with the mean-zero constraint, so every discrete step is solvable; on the
//! torus it settles at `det Q`.

use super::periodic::{PeriodicGrid, Scheme};
use super::potential::{min_eigenvalue, HessianPotential};
use crate::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

pub const MAX_NEWTON_STEPS: usize = 50;
pub const MAX_HALVINGS: u32 = 30;
const GMRES_RESTART: usize = 60;
const GMRES_MAX: usize = 600;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonStep {
    /// `sup |det Hess φ − c ρ|` after the step (before any step for entry 0).
    pub residual: f64,
    /// Accepted damping factor.
    pub step: f64,
    pub halvings: u32,
    pub gmres_iterations: usize,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct MaSolution {
    pub potential: HessianPotential,
    pub multiplier: f64,
    pub log: Vec<NewtonStep>,
}

impl MaSolution {
    pub fn residual(&self) -> f64 {
        self.log.last().map_or(0.0, |s| s.residual)
    }

    /// Slope of `log r_{k+1}` against `log r_k` over the last three steps,
    /// fitted by least squares; `None` with fewer than three steps. Steps
    /// already at the rounding floor (`r < 1e-13`) carry no rate
    /// information and are left out.
    pub fn convergence_order(&self) -> Option<f64> {
        let r: Vec<f64> = self.log.iter().map(|s| s.residual).filter(|&r| r >= 1e-13).collect();
        if r.len() < 4 {
            return None;
        }
        let pts: Vec<(f64, f64)> = r.windows(2).rev().take(3).map(|w| (w[0].ln(), w[1].ln())).collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

struct State {
    psi: Vec<f64>,
    c: f64,
    hessian: Vec<DMatrix<f64>>,
    residual: Vec<f64>,
    sup: f64,
    min_eig: f64,
}

struct Problem<'a> {
    template: &'a HessianPotential,
    grid: &'a PeriodicGrid,
    density: &'a [f64],
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.template.dim()
    }

    fn second_derivatives(&self, f: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let n = self.n();
        let spec = match self.template.scheme {
            Scheme::Spectral => Some(self.grid.spectrum(f)),
            Scheme::FiniteDifference4 => None,
        };
        let mut h = vec![vec![Vec::new(); n]; n];
        for a in 0..n {
            for b in a..n {
                let d = match &spec {
                    Some(s) => self.grid.spectral_partial(s, &[a, b]),
                    None => self.grid.fd4_partial(f, &[a, b]),
                };
                h[b][a] = d.clone();
                h[a][b] = d;
            }
        }
        h
    }

    fn state(&self, psi: Vec<f64>, c: f64) -> State {
        let n = self.n();
        let li = self.template.lattice_inv();
        let hs = self.second_derivatives(&psi);
        let hessian: Vec<DMatrix<f64>> = (0..psi.len())
            .map(|i| &self.template.quad + li.transpose() * DMatrix::from_fn(n, n, |a, b| hs[a][b][i]) * li)
            .collect();
        let residual: Vec<f64> = hessian.iter().zip(self.density).map(|(h, r)| h.determinant() - c * r).collect();
        let sup = residual.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let min_eig = hessian.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min);
        State { psi, c, hessian, residual, sup, min_eig }
    }

    /// Cofactor matrices pulled back to grid coordinates: `L⁻¹ adj(H) L⁻ᵀ`.
    fn coefficients(&self, s: &State) -> Vec<DMatrix<f64>> {
        let li = self.template.lattice_inv();
        s.hessian
            .iter()
            .map(|h| {
                let adj = h.clone().try_inverse().expect("positive definite") * h.determinant();
                li * adj * li.transpose()
            })
            .collect()
    }
}

/// Dense vectors of length `N + 1`: the update of `ψ` followed by that of `c`.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Restarted GMRES with right preconditioning; returns the solution and
/// the number of inner iterations.
fn gmres(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rel_tol: f64,
) -> Result<(Vec<f64>, usize)> {
    let len = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; len];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
        let beta = norm(&r);
        if beta <= rel_tol * bnorm {
            return Ok((x, total));
        }
        if total >= GMRES_MAX {
            return Err(Error::NoConvergence { residual: beta / bnorm, iterations: total });
        }
        let mut basis = vec![r.iter().map(|v| v / beta).collect::<Vec<f64>>()];
        let mut precs: Vec<Vec<f64>> = Vec::new();
        let mut h: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut g = vec![beta];
        let mut k = 0;
        while k < GMRES_RESTART && total < GMRES_MAX {
            let z = precond(&basis[k]);
            let mut w = apply(&z);
            precs.push(z);
            let mut col = vec![0.0; k + 2];
            for (j, v) in basis.iter().enumerate() {
                col[j] = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= col[j] * b);
            }
            let wn = norm(&w);
            col[k + 1] = wn;
            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let rho = col[k].hypot(col[k + 1]);
            cs.push(col[k] / rho);
            sn.push(col[k + 1] / rho);
            col[k] = rho;
            col[k + 1] = 0.0;
            g.push(-sn[k] * g[k]);
            g[k] *= cs[k];
            let next = w.iter().map(|v| v / wn.max(f64::MIN_POSITIVE)).collect();
            h.push(col);
            basis.push(next);
            k += 1;
            total += 1;
            if g[k].abs() <= rel_tol * bnorm {
                break;
            }
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = ((i + 1)..k).map(|j| h[j][i] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, z) in y.iter().zip(&precs) {
            x.iter_mut().zip(z).for_each(|(a, b)| *a += yi * b);
        }
    }
}

pub fn solve_monge_ampere(initial: &HessianPotential, tol: f64) -> Result<MaSolution> {
    let ones = vec![1.0; initial.nodes()];
    solve_monge_ampere_with_density(initial, &ones, tol)
}

/// Solves `det Hess φ = c ρ / ⟨ρ⟩` starting from `initial`.
pub fn solve_monge_ampere_with_density(initial: &HessianPotential, density: &[f64], tol: f64) -> Result<MaSolution> {
    let grid = initial.grid();
    let len = grid.len();
    if density.len() != len || density.iter().any(|&r| r <= 0.0) {
        return Err(Error::Invalid("density must be positive at every node".into()));
    }
    let mean = density.iter().sum::<f64>() / len as f64;
    let rho: Vec<f64> = density.iter().map(|r| r / mean).collect();
    let problem = Problem { template: initial, grid, density: &rho };
    let n = initial.dim();
    let mut state = problem.state(initial.psi.clone(), initial.quad.determinant());
    if state.min_eig <= 0.0 {
        return Err(Error::Convexity(
            state.hessian.iter().enumerate().filter(|(_, h)| min_eigenvalue(h) <= 0.0).map(|(i, _)| i).collect(),
        ));
    }
    let mut log =
        vec![NewtonStep { residual: state.sup, step: 0.0, halvings: 0, gmres_iterations: 0, min_eigenvalue: state.min_eig }];
    while state.sup >= tol {
        if log.len() > MAX_NEWTON_STEPS {
            return Err(Error::Newton(format!("no convergence in {MAX_NEWTON_STEPS} steps (residual {:e})", state.sup)));
        }
        let coef = problem.coefficients(&state);
        let mut mean_coef = DMatrix::zeros(n, n);
        coef.iter().for_each(|c| mean_coef += c);
        mean_coef /= len as f64;
        let symbol: Vec<f64> = (0..len)
            .map(|i| {
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s += mean_coef[(a, b)] * grid.second_symbol(i, a, b, initial.scheme);
                    }
                }
                s
            })
            .collect();
        let apply = |z: &[f64]| -> Vec<f64> {
            let (v, dc) = (&z[..len], z[len]);
            let hv = problem.second_derivatives(v);
            let mut out: Vec<f64> = (0..len)
                .map(|i| {
                    let mut s = -dc * rho[i];
                    for a in 0..n {
                        for b in 0..n {
                            s += coef[i][(a, b)] * hv[a][b][i];
                        }
                    }
                    s
                })
                .collect();
            out.push(v.iter().sum::<f64>() / len as f64);
            out
        };
        let precond = |r: &[f64]| -> Vec<f64> {
            let dc = -r[..len].iter().sum::<f64>() / len as f64;
            let shifted: Vec<f64> = (0..len).map(|i| r[i] + dc * rho[i]).collect();
            let mut spec = grid.spectrum(&shifted);
            spec.iter_mut().zip(&symbol).for_each(|(c, s)| *c = if s.abs() > 1e-12 { *c / s } else { Complex64::default() });
            let mut v = grid.synthesize(spec);
            v.iter_mut().for_each(|x| *x += r[len]);
            v.push(dc);
            v
        };
        let mut rhs: Vec<f64> = state.residual.iter().map(|r| -r).collect();
        rhs.push(0.0);
        // Forcing term proportional to the residual keeps the outer
        // iteration quadratic without over-solving early steps.
        let eta = (1e-3 * state.sup / initial.quad.determinant()).clamp(1e-12, 1e-6);
        let (z, iterations) = gmres(&apply, &precond, &rhs, eta)?;
        let mut t = 1.0;
        let mut halvings = 0;
        let next = loop {
            let psi: Vec<f64> = state.psi.iter().zip(&z).map(|(p, v)| p + t * v).collect();
            let trial = problem.state(psi, state.c + t * z[len]);
            if trial.min_eig > 0.0 && trial.sup < state.sup {
                break trial;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::Newton(format!(
                    "line search failed after {MAX_HALVINGS} halvings (residual {:e}, min eigenvalue {:e})",
                    state.sup, trial.min_eig
                )));
            }
            t *= 0.5;
        };
        state = next;
        log.push(NewtonStep {
            residual: state.sup,
            step: t,
            halvings,
            gmres_iterations: iterations,
            min_eigenvalue: state.min_eig,
        });
    }
    let potential = initial.with_psi(state.psi)?;
    Ok(MaSolution { potential, multiplier: state.c, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syz::potential::{ma_residual, ricci_tensor};
    use nalgebra::DVector;
    use std::f64::consts::TAU;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn exact_data_needs_no_step() {
        let phi = HessianPotential::quadratic(diag(&[2.0, 1.0]), 16, Scheme::Spectral).unwrap();
        let sol = solve_monge_ampere(&phi, 1e-10).unwrap();
        assert_eq!(sol.log.len(), 1);
        assert!(sol.potential.psi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_axis_perturbation_is_linear() {
        // det(Q + Hess ψ) is affine in ψ when ψ depends on x₁ alone.
        let phi = HessianPotential::from_fn(diag(&[3.0, 1.0]), 32, Scheme::Spectral, |x| 0.05 * (TAU * x[0]).cos()).unwrap();
        let sol = solve_monge_ampere(&phi, 1e-10).unwrap();
        assert_eq!(sol.log.len(), 2);
        assert!(sol.potential.psi.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn perturbed_start_converges_quadratically() {
        let phi = HessianPotential::from_fn(diag(&[3.0, 2.0]), 32, Scheme::Spectral, |x| {
            0.05 * (TAU * x[0]).cos() + 0.01 * (TAU * (x[0] + x[1])).cos()
        })
        .unwrap();
        let sol = solve_monge_ampere(&phi, 1e-10).unwrap();
        assert!(sol.residual() < 1e-10);
        assert!(ma_residual(&sol.potential).sup < 1e-10);
        assert!(ricci_tensor(&sol.potential).unwrap().norm < 1e-8);
        let order = sol.convergence_order().unwrap();
        assert!(order >= 1.8, "order {order}, log {:?}", sol.log);
        // Deterministic to the bit.
        let again = solve_monge_ampere(&phi, 1e-10).unwrap();
        assert_eq!(sol.log, again.log);
    }

    #[test]
    fn density_solutions_refine_and_fd4_works() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.5]);
        let rho = |x: &[f64]| (0.3 * (TAU * x[0]).sin() + 0.2 * (TAU * (x[0] - x[1])).cos()).exp();
        let solve = |m: usize, scheme: Scheme| {
            let phi = HessianPotential::quadratic(q.clone(), m, scheme).unwrap();
            let d: Vec<f64> = (0..phi.nodes()).map(|i| rho(&phi.grid().node(i))).collect();
            solve_monge_ampere_with_density(&phi, &d, 1e-11).unwrap()
        };
        let coarse = solve(32, Scheme::Spectral);
        let fine = solve(64, Scheme::Spectral);
        assert!((coarse.multiplier - q.determinant()).abs() < 1e-6, "{}", coarse.multiplier);
        let g = coarse.potential.grid().clone();
        for i in 0..g.len() {
            let k = g.coords(i);
            let j = fine.potential.grid().index(&[2 * k[0], 2 * k[1]]);
            assert!((coarse.potential.psi[i] - fine.potential.psi[j]).abs() < 1e-6);
        }
        let fd = solve(32, Scheme::FiniteDifference4);
        let err = fd.potential.psi.iter().zip(&coarse.potential.psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn three_dimensional_solve() {
        let phi = HessianPotential::from_fn(diag(&[3.0, 2.0, 2.0]), 12, Scheme::Spectral, |x| {
            0.02 * (TAU * x[0]).cos() * (TAU * x[2]).sin() + 0.01 * (TAU * x[1]).sin()
        })
        .unwrap();
        let sol = solve_monge_ampere(&phi, 1e-10).unwrap();
        assert!(ma_residual(&sol.potential).sup < 1e-10);
    }

    #[test]
    fn nonconvex_start_is_rejected() {
        let phi = HessianPotential::from_fn(diag(&[1.0, 1.0]), 16, Scheme::Spectral, |x| 0.05 * (TAU * x[0]).cos()).unwrap();
        assert!(matches!(solve_monge_ampere(&phi, 1e-10), Err(Error::Convexity(_))));
    }
}
