//! Analyses on top of the section map: rotation numbers, Diophantine
//! filtering, invariant-curve fitting, boundedness scans and periodic orbits.

mod bounded;
mod curve;
mod diophantine;
mod periodic;
mod rotation;

pub use bounded::{boundedness_scan, scan_seed, BoundednessRecord};
pub use curve::{find_invariant_curve, CurveOptions, InvariantCurveFit};
pub use diophantine::{diophantine_check, DiophantineParams, DiophantineVerdict};
pub use periodic::{
    collect_search, dedup_orbits, find_periodic_orbit, newton_periodic, periodic_residual, solve_seed,
    PeriodicOptions, PeriodicOrbit, PeriodicSearch, SeedFailure,
};
pub use rotation::{
    bump_weight, iterate_orbit, rotation_from_orbit, rotation_number, weighted_birkhoff, RotationEstimate,
    RotationMethod,
};
