//! Good covers of the torus, their nerves, and circle-valued Čech cochains.
//!
//! Čech cochains here are function-valued: a (p, q) cochain assigns to each
//! nerve p-simplex a real q-cochain on the cells of the corresponding
//! intersection. Circle cochains are the (p, 0) case read mod 1. Only
//! locally constant integer parts are discarded when reducing mod 1, so a
//! gerbe cocycle with a nonzero class is representable, which constant
//! values per simplex could never achieve.

mod classes;
mod cochain;
mod cover;
mod homotopy;
mod staircase;

pub use classes::{
    characteristic_class, continuous_lift, difference_of_trivializations, integer_coboundary, trivialize,
    CharacteristicClass, LineCocycle,
};
pub use cochain::{circle_coboundary, CechForm, CircleCochain, GerbeCocycle, Trivialization};
pub use cover::{comparison_sign, good_cover_torus, BoxRegion, FlagChain, GoodCover, Nerve, NerveClasses};
pub use homotopy::{contract, Root};
pub use staircase::{derham_to_cech, derham_to_cech_degree, staircase_from_primitives, CechLift, INTEGRALITY_TOL};
