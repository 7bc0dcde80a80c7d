use alloc::vec::Vec;
use core::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::diophantine::{DiophantineParams, DiophantineVerdict};
use super::rotation::{iterate_orbit, rotation_from_orbit, RotationEstimate};
use crate::poincare::{PoincarePoint, SectionMap};
use crate::special::{wrap_unit, ActionAngle};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveOptions {
    /// Fourier modes `K` of each fitted component.
    pub modes: usize,
    /// Orbit length `N`.
    pub iterates: usize,
    pub diophantine: DiophantineParams,
    /// Acceptance threshold as a multiple of the median action.
    pub threshold_factor: f64,
    /// Largest admissible angle gap as a multiple of `1/N`.
    pub gap_factor: f64,
    /// Refuse to fit when the rotation number fails the Diophantine check.
    pub require_diophantine: bool,
}

impl CurveOptions {
    pub fn new(modes: usize, iterates: usize) -> Self {
        Self {
            modes,
            iterates,
            diophantine: DiophantineParams::default(),
            threshold_factor: 1e-6,
            gap_factor: 3.0,
            require_diophantine: true,
        }
    }
}

/// Invariant curve in conjugacy form
/// `xi -> (lambda(theta(xi)), theta(xi))`, `theta(xi) = xi + p(xi)`, on which
/// the map acts as `xi -> xi + rho`.
///
/// Coefficient vectors are `[a0, a1, b1, ..., aK, bK]` for
/// `a0 + sum ak cos(2 pi k s) + bk sin(2 pi k s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCurveFit {
    pub modes: usize,
    pub iterates: usize,
    pub rho: f64,
    pub rotation: RotationEstimate,
    pub diophantine: DiophantineVerdict,
    /// Graph `theta mod 1 -> lambda`.
    pub lambda_coeffs: Vec<f64>,
    /// Angle correction `p(xi)`.
    pub angle_coeffs: Vec<f64>,
    /// Sup over the test grid of `|lambda(P z) - lambda_fit(theta(P z))|`.
    pub lambda_residual: f64,
    /// Sup over the test grid of the circle distance between `theta(P z)`
    /// and `theta(xi + rho)`.
    pub angle_residual: f64,
    /// Sup of the sum of both terms.
    pub residual: f64,
    pub threshold: f64,
    pub accepted: bool,
    pub median_lambda: f64,
    /// Largest gap between sorted orbit angles mod 1.
    pub max_gap: f64,
}

fn basis(s: f64, modes: usize, row: &mut [f64]) {
    row[0] = 1.0;
    for k in 1..=modes {
        let (sn, cs) = (TAU * k as f64 * s).sin_cos();
        row[2 * k - 1] = cs;
        row[2 * k] = sn;
    }
}

fn eval_series(coeffs: &[f64], s: f64) -> f64 {
    let modes = (coeffs.len() - 1) / 2;
    let mut acc = coeffs[0];
    for k in 1..=modes {
        let (sn, cs) = (TAU * k as f64 * s).sin_cos();
        acc += coeffs[2 * k - 1] * cs + coeffs[2 * k] * sn;
    }
    acc
}

fn least_squares(nodes: &[f64], values: &[f64], modes: usize) -> Result<Vec<f64>> {
    let cols = 2 * modes + 1;
    let mut a = DMatrix::zeros(nodes.len(), cols);
    let mut row = alloc::vec![0.0; cols];
    for (i, &s) in nodes.iter().enumerate() {
        basis(s, modes, &mut row);
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let b = DVector::from_column_slice(values);
    let x = a.svd(true, true).solve(&b, 1e-12).map_err(|e| Error::FitFailed(e.into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailed("non-finite Fourier coefficient".into()));
    }
    Ok(x.iter().copied().collect())
}

/// Distance on the circle `R/Z`.
pub(crate) fn circle_distance(a: f64, b: f64) -> f64 {
    let d = wrap_unit(a - b);
    d.min(1.0 - d)
}

fn max_circle_gap(angles: &mut [f64]) -> f64 {
    angles.sort_by(f64::total_cmp);
    let wrap = angles[0] + 1.0 - angles[angles.len() - 1];
    angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max)
}

impl InvariantCurveFit {
    /// Fitted action above circle angle `theta`.
    pub fn lambda_at(&self, theta: f64) -> f64 {
        eval_series(&self.lambda_coeffs, wrap_unit(theta))
    }

    /// `theta(xi) = xi + p(xi)` on the lift.
    pub fn angle_at(&self, xi: f64) -> f64 {
        xi + eval_series(&self.angle_coeffs, wrap_unit(xi))
    }

    /// Curve point at conjugacy parameter `xi`.
    pub fn point(&self, xi: f64) -> PoincarePoint {
        let theta = self.angle_at(xi);
        ActionAngle::new(self.lambda_at(theta), theta)
    }

    pub fn mean_lambda(&self) -> f64 {
        self.lambda_coeffs[0]
    }

    /// Signed offset of `pt` from the curve along the action direction.
    pub fn offset(&self, pt: PoincarePoint) -> f64 {
        pt.lambda - self.lambda_at(pt.theta)
    }
}

/// Detect an invariant curve through the orbit of `seed`.
///
/// The orbit of `N` iterates gives the rotation number `rho`; the action is
/// fitted as a graph over the angle and the angle as `theta_k = k rho + p(k rho)`.
/// The fit is then certified on `4K` test parameters by applying the map.
pub fn find_invariant_curve<M: SectionMap + ?Sized>(
    map: &M,
    seed: PoincarePoint,
    opts: &CurveOptions,
) -> Result<InvariantCurveFit> {
    let (k_modes, n) = (opts.modes, opts.iterates);
    if k_modes == 0 || n < 4 * (2 * k_modes + 1) {
        return Err(Error::Validation("curve fit needs modes >= 1 and iterates >= 4 (2K + 1)".into()));
    }
    let (orbit, err) = iterate_orbit(map, seed, n);
    if let Some(e) = err {
        return Err(e);
    }
    let orbit = &orbit[..n];
    let rotation = rotation_from_orbit(orbit);
    let rho = rotation.value;

    let mut angles: Vec<f64> = orbit.iter().map(|p| p.circle_angle()).collect();
    let max_gap = max_circle_gap(&mut angles);
    let limit = opts.gap_factor / n as f64;
    if max_gap > limit {
        return Err(Error::Resonant { gap: max_gap, limit });
    }

    let dp = opts.diophantine;
    let diophantine = dp.check(rho);
    if opts.require_diophantine && !diophantine.pass {
        return Err(Error::NotDiophantine { omega: rho, q: diophantine.worst_q });
    }

    let thetas: Vec<f64> = orbit.iter().map(|p| p.circle_angle()).collect();
    let lambdas: Vec<f64> = orbit.iter().map(|p| p.lambda).collect();
    let lambda_coeffs = least_squares(&thetas, &lambdas, k_modes)?;
    // xi_k = k rho on the lift; theta_k - xi_k is the periodic correction
    let xis: Vec<f64> = (0..n).map(|k| wrap_unit(k as f64 * rho)).collect();
    let corrections: Vec<f64> = orbit.iter().enumerate().map(|(k, p)| p.theta - k as f64 * rho).collect();
    let angle_coeffs = least_squares(&xis, &corrections, k_modes)?;

    let mut sorted = lambdas.clone();
    sorted.sort_by(f64::total_cmp);
    let median_lambda = sorted[n / 2];

    let mut fit = InvariantCurveFit {
        modes: k_modes,
        iterates: n,
        rho,
        rotation,
        diophantine,
        lambda_coeffs,
        angle_coeffs,
        lambda_residual: 0.0,
        angle_residual: 0.0,
        residual: 0.0,
        threshold: opts.threshold_factor * median_lambda,
        accepted: false,
        median_lambda,
        max_gap,
    };

    let tests = 4 * k_modes;
    for j in 0..tests {
        let xi = (j as f64 + 0.5) / tests as f64;
        let image = map.apply(fit.point(xi))?;
        let dl = (image.lambda - fit.lambda_at(image.theta)).abs();
        let da = circle_distance(image.theta, fit.angle_at(xi + rho));
        fit.lambda_residual = fit.lambda_residual.max(dl);
        fit.angle_residual = fit.angle_residual.max(da);
        fit.residual = fit.residual.max(dl + da);
    }
    if !fit.residual.is_finite() {
        return Err(Error::FitFailed("non-finite invariance residual".into()));
    }
    fit.accepted = fit.residual <= fit.threshold;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Twist map with a non-trivial invariant graph `lambda = L + a cos(2 pi theta)`
    /// on which the angle advances by a constant `omega`.
    struct ShearedCircle {
        level: f64,
        amp: f64,
        omega: f64,
    }
    impl SectionMap for ShearedCircle {
        fn apply(&self, p: PoincarePoint) -> Result<PoincarePoint> {
            let off = p.lambda - self.level - self.amp * (TAU * p.theta).cos();
            let theta = p.theta + self.omega + 1e-3 * off;
            Ok(ActionAngle::new(self.level + self.amp * (TAU * theta).cos() + off, theta))
        }
    }

    /// Rotation by 2/5: orbits are finite.
    struct Resonant;
    impl SectionMap for Resonant {
        fn apply(&self, p: PoincarePoint) -> Result<PoincarePoint> {
            Ok(ActionAngle::new(p.lambda, p.theta + 0.4))
        }
    }

    #[test]
    fn recovers_sheared_circle() {
        let omega = (5f64.sqrt() - 1.0) / 2.0;
        let map = ShearedCircle { level: 50.0, amp: 0.3, omega };
        let seed = ActionAngle::new(50.3, 0.0);
        let fit = find_invariant_curve(&map, seed, &CurveOptions::new(8, 1000)).unwrap();
        assert!(fit.accepted, "{fit:?}");
        assert!(fit.residual < 1e-9, "{} {}", fit.lambda_residual, fit.angle_residual);
        assert!((fit.rho - omega).abs() < 1e-10);
        assert!((fit.mean_lambda() - 50.0).abs() < 1e-10);
        assert!((fit.lambda_at(0.25) - 50.0).abs() < 1e-10);
        assert!(fit.offset(ActionAngle::new(51.0, 0.5)) > 0.0);
    }

    #[test]
    fn resonant_orbit_reports_gap() {
        let r = find_invariant_curve(&Resonant, ActionAngle::new(1.0, 0.1), &CurveOptions::new(4, 500));
        assert!(matches!(r, Err(Error::Resonant { .. })), "{r:?}");
    }

    #[test]
    fn liouville_like_rotation_rejected() {
        let map = ShearedCircle { level: 5.0, amp: 0.0, omega: 0.25 + 1e-7 };
        let mut opts = CurveOptions::new(4, 400);
        opts.gap_factor = 1e9;
        let r = find_invariant_curve(&map, ActionAngle::new(5.0, 0.0), &opts);
        assert!(matches!(r, Err(Error::NotDiophantine { q: 4, .. })), "{r:?}");
        opts.require_diophantine = false;
        let fit = find_invariant_curve(&map, ActionAngle::new(5.0, 0.0), &opts).unwrap();
        assert!(!fit.diophantine.pass);
    }

    #[test]
    fn circle_distance_wraps() {
        assert!((circle_distance(0.95, 0.05) - 0.1).abs() < 1e-15);
        assert!((circle_distance(3.2, -0.8) - 0.0).abs() < 1e-15);
    }
}
