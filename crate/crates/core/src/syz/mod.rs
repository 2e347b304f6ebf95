//! Semi-flat Calabi–Yau geometry on torus fibrations over a flat base.
//!
//! A potential `φ` depending only on `x = Re z` gives the Kähler metric
//! `Σ φ_ij (dx_i dx_j + dy_i dy_j)`; it is Ricci-flat exactly when
//! `det Hess φ` is constant. The Legendre transform trades `Hess φ` for its
//! inverse and produces the mirror metric. [`flat_cy`] checks the pointwise
//! linear algebra of the flat model in exact arithmetic.

pub mod flat_cy;
mod legendre;
mod monge_ampere;
mod periodic;
mod potential;

pub use legendre::{legendre_transform, mirror_metric_check, LegendreTransform, MirrorCheck, MirrorMetric};
pub use monge_ampere::{
    solve_monge_ampere, solve_monge_ampere_with_density, MaSolution, NewtonStep, MAX_HALVINGS, MAX_NEWTON_STEPS,
};
pub use periodic::{PeriodicGrid, Scheme, TrigSeries};
pub use potential::{
    ma_residual, min_convexity, ricci_tensor, ricci_tensor_with, semi_flat_metric, HessianPotential, MaResidual,
    PotentialEvaluator, RicciField, SemiFlatMetric,
};
