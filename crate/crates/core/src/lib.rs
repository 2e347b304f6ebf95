//! Gerbes, holonomy and semi-flat mirror metrics on discretized flat tori.
//!
//! The torus `T^d` is modelled by a periodic cubical complex. On top of it
//! sit a diagonal Hodge theory ([`hodge`]), Čech cochains on a fixed good
//! cover ([`cech`]), gerbe connections and their holonomy ([`connection`]),
//! linear equivalence of point divisors ([`equivalence`]) and the semi-flat
//! Calabi–Yau toolkit ([`syz`]).

pub mod cech;
pub mod complex;
pub mod connection;
pub mod equivalence;
mod error;
pub mod grid;
pub mod hodge;
pub mod snf;
pub mod sparse;
pub mod syz;

pub use error::{Error, Result};
