use alloc::vec::Vec;

use nalgebra::{Matrix2, Vector2};
#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::curve::circle_distance;
use crate::poincare::{PoincarePoint, SectionMap};
use crate::special::ActionAngle;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOptions {
    pub max_iterations: usize,
    /// Central-difference step in `ln lambda` and in the angle.
    pub fd_step: f64,
    /// Residual a converged orbit must reach.
    pub tolerance: f64,
    /// Newton keeps refining while it improves, down to this residual.
    pub polish_tolerance: f64,
    /// Orbit-equivalence distance after normalizing the action.
    pub dedup_tol: f64,
    /// A divisor period with residual at or below this defeats minimality.
    pub minimality_tol: f64,
    /// Largest admissible `|d ln lambda|` per Newton step.
    pub max_log_step: f64,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        Self {
            max_iterations: 60,
            fd_step: 1e-6,
            tolerance: 1e-9,
            polish_tolerance: 1e-12,
            dedup_tol: 1e-6,
            minimality_tol: 1e-6,
            max_log_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub point: PoincarePoint,
    pub period: usize,
    pub winding: i64,
    /// `max(|lambda_m - lambda| / lambda, |Theta_m - Theta - p|)`.
    pub residual: f64,
    pub minimal: bool,
    /// `z, P z, ..., P^(m-1) z`.
    pub points: Vec<PoincarePoint>,
    pub seed_index: usize,
}

/// Why a seed produced no orbit.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedFailure {
    /// The finite-difference Jacobian vanished.
    Singular { residual: f64 },
    /// Newton stalled or the map failed; carries the best residual reached.
    NotConverged { residual: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSearch {
    pub orbits: Vec<PeriodicOrbit>,
    /// Smallest residual over all seeds, converged or not.
    pub best_residual: f64,
    pub singular_seeds: Vec<usize>,
    pub failed_seeds: Vec<usize>,
}

/// Scaled components of `lift(P^m)(z) - z - (0, p)`.
pub fn periodic_residual<M: SectionMap + ?Sized>(map: &M, z: PoincarePoint, m: usize, p: i64) -> Result<[f64; 2]> {
    let w = map.apply_n(z, m)?;
    Ok([(w.lambda - z.lambda) / z.lambda, w.theta - z.theta - p as f64])
}

fn norm(f: &[f64; 2]) -> f64 {
    f[0].abs().max(f[1].abs())
}

fn at(u: [f64; 2]) -> PoincarePoint {
    ActionAngle::new(u[0].exp(), u[1])
}

/// Newton on `F(ln lambda, Theta) = 0` from one seed; the result has not
/// been checked for minimality.
pub fn newton_periodic<M: SectionMap + ?Sized>(
    map: &M,
    seed: PoincarePoint,
    m: usize,
    p: i64,
    opts: &PeriodicOptions,
) -> core::result::Result<(PoincarePoint, f64), SeedFailure> {
    let fail = |r: f64| SeedFailure::NotConverged { residual: r };
    if !(seed.lambda > 0.0) {
        return Err(fail(f64::INFINITY));
    }
    let f = |u: [f64; 2]| periodic_residual(map, at(u), m, p);
    let mut u = [seed.lambda.ln(), seed.theta];
    let mut fu = f(u).map_err(|_| fail(f64::INFINITY))?;
    let mut r = norm(&fu);
    let h = opts.fd_step;
    for _ in 0..opts.max_iterations {
        if r <= opts.polish_tolerance {
            return Ok((at(u), r));
        }
        let mut jac = Matrix2::zeros();
        for col in 0..2 {
            let (mut up, mut um) = (u, u);
            up[col] += h;
            um[col] -= h;
            let fp = f(up).map_err(|_| fail(r))?;
            let fm = f(um).map_err(|_| fail(r))?;
            for row in 0..2 {
                jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 1e-14) {
            return Err(SeedFailure::Singular { residual: r });
        }
        let delta = svd
            .solve(&Vector2::new(-fu[0], -fu[1]), 1e-10 * smax)
            .map_err(|_| SeedFailure::Singular { residual: r })?;
        let mut step = [delta[0], delta[1]];
        if step[0].abs() > opts.max_log_step {
            let s = opts.max_log_step / step[0].abs();
            step = [step[0] * s, step[1] * s];
        }
        let mut improved = false;
        let mut t = 1.0;
        for _ in 0..12 {
            let cand = [u[0] + t * step[0], u[1] + t * step[1]];
            if let Ok(fc) = f(cand) {
                let rc = norm(&fc);
                if rc < r {
                    u = cand;
                    fu = fc;
                    r = rc;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if r <= opts.tolerance {
        Ok((at(u), r))
    } else {
        Err(fail(r))
    }
}

/// Normalized distance: action relative to `scale`, angle on the circle.
fn distance(a: PoincarePoint, b: PoincarePoint, scale: f64) -> f64 {
    ((a.lambda - b.lambda) / scale).abs().max(circle_distance(a.theta, b.theta))
}

/// Build the orbit record for a converged point, checking minimality
/// against every proper divisor of `m` and distinctness of the orbit points.
fn certify<M: SectionMap + ?Sized>(
    map: &M,
    z: PoincarePoint,
    residual: f64,
    m: usize,
    p: i64,
    seed_index: usize,
    opts: &PeriodicOptions,
) -> Result<PeriodicOrbit> {
    // the lift commutes with integer angle shifts, so report the point on [0, 1)
    let z = PoincarePoint { theta: z.theta - z.theta.floor(), ..z };
    let mut points = Vec::with_capacity(m);
    let mut w = z;
    for _ in 0..m {
        points.push(w);
        w = map.apply(w)?;
    }
    let divisor_hit =
        (1..m).filter(|&d| m.is_multiple_of(d)).any(|d| distance(points[d], z, z.lambda) <= opts.minimality_tol);
    let distinct = (0..m).all(|i| (i + 1..m).all(|j| distance(points[i], points[j], z.lambda) >= opts.minimality_tol));
    Ok(PeriodicOrbit { point: z, period: m, winding: p, residual, minimal: !divisor_hit && distinct, points, seed_index })
}

/// Collapse orbits that share a point within `tol`, keeping the first one.
/// Actions are normalized by the median action of all candidates.
pub fn dedup_orbits(orbits: Vec<PeriodicOrbit>, tol: f64) -> Vec<PeriodicOrbit> {
    if orbits.is_empty() {
        return orbits;
    }
    let mut lambdas: Vec<f64> = orbits.iter().map(|o| o.point.lambda).collect();
    lambdas.sort_by(f64::total_cmp);
    let scale = lambdas[lambdas.len() / 2];
    let mut kept: Vec<PeriodicOrbit> = Vec::new();
    for o in orbits {
        let dup = kept.iter().any(|k| k.points.iter().any(|&q| distance(q, o.point, scale) <= tol));
        if !dup {
            kept.push(o);
        }
    }
    kept
}

/// Newton plus certification for one seed.
pub fn solve_seed<M: SectionMap + ?Sized>(
    map: &M,
    seed_index: usize,
    seed: PoincarePoint,
    m: usize,
    p: i64,
    opts: &PeriodicOptions,
) -> core::result::Result<PeriodicOrbit, SeedFailure> {
    let (z, r) = newton_periodic(map, seed, m, p, opts)?;
    certify(map, z, r, m, p, seed_index, opts).map_err(|_| SeedFailure::NotConverged { residual: r })
}

/// Merge per-seed outcomes (in seed order) into a deduplicated search result.
pub fn collect_search(
    outcomes: Vec<core::result::Result<PeriodicOrbit, SeedFailure>>,
    opts: &PeriodicOptions,
) -> PeriodicSearch {
    let mut search =
        PeriodicSearch { orbits: Vec::new(), best_residual: f64::INFINITY, singular_seeds: Vec::new(), failed_seeds: Vec::new() };
    let mut found = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                search.best_residual = search.best_residual.min(o.residual);
                found.push(o);
            }
            Err(SeedFailure::Singular { residual }) => {
                search.best_residual = search.best_residual.min(residual);
                search.singular_seeds.push(i);
            }
            Err(SeedFailure::NotConverged { residual }) => {
                search.best_residual = search.best_residual.min(residual);
                search.failed_seeds.push(i);
            }
        }
    }
    search.orbits = dedup_orbits(found, opts.dedup_tol);
    search
}

/// Solve `lift(P^m)(z) = z + (0, p)` from every seed, certify and
/// deduplicate. An empty result carries the best residual seen.
pub fn find_periodic_orbit<M: SectionMap + ?Sized>(
    map: &M,
    m: usize,
    p: i64,
    seeds: &[PoincarePoint],
    opts: &PeriodicOptions,
) -> Result<PeriodicSearch> {
    if m == 0 {
        return Err(Error::Validation("period m >= 1 violated".into()));
    }
    let outcomes = seeds.iter().enumerate().map(|(i, &z)| solve_seed(map, i, z, m, p, opts)).collect();
    Ok(collect_search(outcomes, opts))
}
