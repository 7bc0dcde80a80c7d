use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::curve::InvariantCurveFit;
use crate::poincare::{PoincareMap, PoincarePoint};
use crate::{Error, Result};

/// Iterations making up the reference window for growth comparisons.
pub const FIRST_WINDOW: usize = 100;

/// Number of blocks the last half of the horizon is split into when testing
/// for monotone growth.
const GROWTH_BLOCKS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessRecord {
    pub seed_index: usize,
    pub seed: PoincarePoint,
    /// Completed applications of the map.
    pub iterations: usize,
    /// `max(|x| + |y|)` over every trajectory of the run.
    pub max_abs_sum: f64,
    /// The same maximum restricted to the first [`FIRST_WINDOW`] periods.
    pub first_window_max: f64,
    /// Block maxima strictly increasing over the last half of the horizon.
    pub monotone_growth: bool,
    /// Whether every iterate stayed strictly between the two bracketing
    /// curves, when they were supplied.
    pub stayed_between: Option<bool>,
    pub escaped: bool,
    pub degenerate: bool,
    pub min_lambda: f64,
    pub max_lambda: f64,
}

fn between(lower: &InvariantCurveFit, upper: &InvariantCurveFit, pt: PoincarePoint) -> bool {
    lower.offset(pt) > 0.0 && upper.offset(pt) < 0.0
}

/// Iterate one seed for `horizon` periods.
pub fn scan_seed(
    map: &PoincareMap<'_>,
    seed_index: usize,
    seed: PoincarePoint,
    horizon: usize,
    bracket: Option<(&InvariantCurveFit, &InvariantCurveFit)>,
) -> BoundednessRecord {
    let bracket = bracket.map(|(a, b)| if a.mean_lambda() <= b.mean_lambda() { (a, b) } else { (b, a) });
    let mut stayed = bracket.map(|(lo, hi)| between(lo, hi, seed));
    let mut per_period = Vec::with_capacity(horizon);
    let (mut min_lambda, mut max_lambda) = (seed.lambda, seed.lambda);
    let mut escaped = false;
    let mut pt = seed;
    for _ in 0..horizon {
        match map.apply_tracked(pt) {
            Ok(s) => {
                pt = s.image;
                per_period.push(s.max_abs_sum);
                min_lambda = min_lambda.min(s.min_lambda).min(pt.lambda);
                max_lambda = max_lambda.max(pt.lambda);
                if let (Some(flag), Some((lo, hi))) = (stayed.as_mut(), bracket) {
                    *flag = *flag && between(lo, hi, pt);
                }
            }
            Err(_) => {
                escaped = true;
                break;
            }
        }
    }
    let max_of = |s: &[f64]| s.iter().copied().fold(0.0, f64::max);
    let iterations = per_period.len();
    let half = &per_period[iterations / 2..];
    let monotone_growth = !escaped
        && half.len() >= GROWTH_BLOCKS
        && half
            .chunks(half.len().div_ceil(GROWTH_BLOCKS))
            .map(max_of)
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[1] > w[0]);
    BoundednessRecord {
        seed_index,
        seed,
        iterations,
        max_abs_sum: max_of(&per_period),
        first_window_max: max_of(&per_period[..iterations.min(FIRST_WINDOW)]),
        monotone_growth,
        stayed_between: stayed,
        escaped,
        degenerate: map.config().is_degenerate(),
        min_lambda,
        max_lambda,
    }
}

/// Iterate every seed for `horizon` periods. Escapes are recorded, not
/// raised.
pub fn boundedness_scan(
    map: &PoincareMap<'_>,
    seeds: &[PoincarePoint],
    horizon: usize,
    bracket: Option<(&InvariantCurveFit, &InvariantCurveFit)>,
) -> Result<Vec<BoundednessRecord>> {
    if horizon == 0 {
        return Err(Error::Validation("horizon >= 1 violated".into()));
    }
    Ok(seeds.iter().enumerate().map(|(i, &s)| scan_seed(map, i, s, horizon, bracket)).collect())
}
