//! Numerical toolkit for impulsive Duffing equations
//!
//! ```text
//! x'' + x^(2n+1) + sum_{i=0}^{2n} x^i p_i(t) = 0,   t != t_j
//! x(t_j+) = x(t_j-),  x'(t_j+) = -x'(t_j-)
//! ```
//!
//! with two velocity-reversal impulses per unit period. The crate builds the
//! generalized cosine/sine pair `(C, S)` of the reference oscillator, the
//! area-preserving action-angle chart, the time-1 section map on the lifted
//! annulus, and the analyses run on top of it: twist profiles, weighted
//! Birkhoff rotation numbers, Diophantine filtering, invariant-curve fitting,
//! boundedness scans and periodic-orbit search.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the CLI and
//! parallel sweeps live in the `duffing` companion crate.

#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
mod error;
pub mod flow;
pub mod model;
pub mod ode;
pub mod poincare;
pub mod special;

pub use error::{Error, Result};
pub use flow::{flow_map, Trajectory};
pub use model::{ImpulseSchedule, IntegratorSettings, SystemConfig, TrigPoly};
pub use poincare::{PoincareMap, PoincarePoint, SectionMap};
pub use special::{ActionAngle, PhaseState, SpecialFunctions};
