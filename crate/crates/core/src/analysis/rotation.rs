use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::poincare::{PoincarePoint, SectionMap};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationMethod {
    WeightedBirkhoff,
}

/// Rotation number on the lift (not reduced mod 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate {
    pub value: f64,
    /// `|estimate(N) - estimate(N/2)|`.
    pub error_bound: f64,
    pub iterates_used: usize,
    pub method: RotationMethod,
    /// False when the orbit escaped before the requested number of iterates.
    pub usable: bool,
}

/// `exp(-1 / (s (1 - s)))` on `(0, 1)`, zero outside.
pub fn bump_weight(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

/// Weighted Birkhoff average `sum w(k/N) f_k / sum w(k/N)`.
pub fn weighted_birkhoff(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (k, v) in values.iter().enumerate() {
        let w = bump_weight((k as f64 + 0.5) / n);
        num += w * v;
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

/// `N + 1` points `seed, P(seed), ..., P^N(seed)`; on failure returns the
/// partial orbit alongside the error.
pub fn iterate_orbit<M: SectionMap + ?Sized>(
    map: &M,
    seed: PoincarePoint,
    n: usize,
) -> (Vec<PoincarePoint>, Option<Error>) {
    let mut orbit = Vec::with_capacity(n + 1);
    orbit.push(seed);
    let mut p = seed;
    for _ in 0..n {
        match map.apply(p) {
            Ok(q) => {
                orbit.push(q);
                p = q;
            }
            Err(e) => return (orbit, Some(e)),
        }
    }
    (orbit, None)
}

/// Rotation number from a computed orbit.
pub fn rotation_from_orbit(orbit: &[PoincarePoint]) -> RotationEstimate {
    let increments: Vec<f64> = orbit.windows(2).map(|w| w[1].theta - w[0].theta).collect();
    let n = increments.len();
    let value = weighted_birkhoff(&increments);
    let half = weighted_birkhoff(&increments[..n / 2]);
    RotationEstimate {
        value,
        error_bound: (value - half).abs(),
        iterates_used: n,
        method: RotationMethod::WeightedBirkhoff,
        usable: true,
    }
}

/// Weighted Birkhoff rotation number of the orbit of `seed` over `n` iterates.
///
/// An escape after at least two iterates yields a partial estimate flagged
/// `usable = false`.
pub fn rotation_number<M: SectionMap + ?Sized>(map: &M, seed: PoincarePoint, n: usize) -> Result<RotationEstimate> {
    if n < 2 {
        return Err(Error::Validation("rotation number needs at least two iterates".into()));
    }
    let (orbit, err) = iterate_orbit(map, seed, n);
    match err {
        None => Ok(rotation_from_orbit(&orbit)),
        Some(_) if orbit.len() >= 3 => Ok(RotationEstimate { usable: false, ..rotation_from_orbit(&orbit) }),
        Some(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ActionAngle;
    use core::f64::consts::TAU;

    struct Rigid(f64);
    impl SectionMap for Rigid {
        fn apply(&self, p: PoincarePoint) -> Result<PoincarePoint> {
            Ok(ActionAngle::new(p.lambda, p.theta + self.0))
        }
    }

    /// Rotation by `omega` seen through the circle diffeomorphism
    /// `h(xi) = xi + eps sin(2 pi xi)`; increments are not constant.
    struct Conjugated {
        omega: f64,
        eps: f64,
    }
    impl Conjugated {
        fn h(&self, xi: f64) -> f64 {
            xi + self.eps * (TAU * xi).sin()
        }
        fn h_inv(&self, theta: f64) -> f64 {
            let mut xi = theta;
            for _ in 0..60 {
                xi -= (self.h(xi) - theta) / (1.0 + self.eps * TAU * (TAU * xi).cos());
            }
            xi
        }
    }
    impl SectionMap for Conjugated {
        fn apply(&self, p: PoincarePoint) -> Result<PoincarePoint> {
            Ok(ActionAngle::new(p.lambda, self.h(self.h_inv(p.theta) + self.omega)))
        }
    }

    struct Escapes;
    impl SectionMap for Escapes {
        fn apply(&self, p: PoincarePoint) -> Result<PoincarePoint> {
            if p.theta > 3.5 {
                Err(Error::Escaped { t: 0.0, x: 0.0, y: 0.0 })
            } else {
                Ok(ActionAngle::new(p.lambda, p.theta + 1.0))
            }
        }
    }

    #[test]
    fn rigid_rotation_recovered() {
        let est = rotation_number(&Rigid(0.381966), ActionAngle::new(1.0, 0.1), 2000).unwrap();
        assert!((est.value - 0.381966).abs() <= 1e-10);
        assert!(est.usable && est.iterates_used == 2000);
    }

    #[test]
    fn conjugated_rotation_converges_fast() {
        let omega = (5f64.sqrt() - 1.0) / 2.0;
        let map = Conjugated { omega, eps: 0.1 };
        let est = rotation_number(&map, ActionAngle::new(1.0, 0.0), 2000).unwrap();
        assert!((est.value - omega).abs() <= 1e-10, "{}", est.value - omega);
        // a plain average only converges like 1/N
        let (orbit, _) = iterate_orbit(&map, ActionAngle::new(1.0, 0.0), 2000);
        let plain = (orbit[2000].theta - orbit[0].theta) / 2000.0;
        assert!((plain - omega).abs() > 1e-7);
    }

    #[test]
    fn escape_gives_partial_estimate() {
        let est = rotation_number(&Escapes, ActionAngle::new(1.0, 0.0), 10).unwrap();
        assert!(!est.usable);
        assert_eq!(est.iterates_used, 4);
        assert!(rotation_number(&Escapes, ActionAngle::new(1.0, 3.0), 10).is_err());
    }

    #[test]
    fn weights_vanish_at_ends() {
        assert_eq!(bump_weight(0.0), 0.0);
        assert_eq!(bump_weight(1.0), 0.0);
        assert!((bump_weight(0.5) - (-4.0f64).exp()).abs() < 1e-16);
    }
}
