//! The time-1 section map on the lifted annulus `(lambda, Theta)`.
//!
//! The lifted angle is integrated alongside `(x, y)` from the chart identity
//!
//! ```text
//! Theta' = (beta y^2 + alpha x^(2n+2) + alpha x sum x^i p_i(t)) / lambda(x, y)
//! ```
//!
//! so it is continuous on every smooth piece. At an impulse the lift is
//! reflected as `Theta -> -Theta` (the adjustment integer is always zero in
//! this convention), which keeps `P(lambda, Theta + 1) = P(lambda, Theta) + (0, 1)`.
//! The final angle is snapped to the chart: its fractional part comes from the
//! inverse chart, its integer part from the integrated lift.

use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::flow::{self, drive};
use crate::model::{ImpulseSchedule, SystemConfig};
use crate::special::{wrap_unit, ActionAngle, SpecialFunctions};
use crate::{Error, Result};

/// Section point at `t = 0 (mod 1)`; `theta` is lifted.
pub type PoincarePoint = ActionAngle;

/// Smallest action a trajectory may reach before the chart is deemed unsafe.
pub const ORIGIN_GUARD: f64 = 1e-6;

/// Anything that maps section points to section points on the lifted annulus.
pub trait SectionMap {
    fn apply(&self, pt: PoincarePoint) -> Result<PoincarePoint>;

    /// `m`-fold composition.
    fn apply_n(&self, pt: PoincarePoint, m: usize) -> Result<PoincarePoint> {
        (0..m).try_fold(pt, |p, _| self.apply(p))
    }
}

/// Scaled radial coordinates `rho = lambda^(1/(n+2))`, `I = gamma rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledCoords {
    pub gamma: f64,
    pub i: f64,
    pub rho: f64,
}

impl ScaledCoords {
    pub fn from_action(lambda: f64, gamma: f64, n: u32) -> Self {
        let rho = lambda.powf(1.0 / (n as f64 + 2.0));
        Self { gamma, i: gamma * rho, rho }
    }

    pub fn action(&self, n: u32) -> f64 {
        self.rho.powf(n as f64 + 2.0)
    }
}

/// One-period angle advance of the unforced system,
/// `Omega(lambda) (1 - 2 (t2 - t1))`.
pub fn unforced_advance(sf: &SpecialFunctions, schedule: &ImpulseSchedule, lambda: f64) -> f64 {
    sf.angular_frequency(lambda) * schedule.twist_factor()
}

/// What one application of the time-1 map saw along the way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodSummary {
    pub image: PoincarePoint,
    /// `max(|x| + |y|)` over the accepted integrator states of the period.
    pub max_abs_sum: f64,
    pub min_lambda: f64,
}

/// The time-1 map of a configured system.
#[derive(Debug, Clone, Copy)]
pub struct PoincareMap<'a> {
    config: &'a SystemConfig,
    sf: &'a SpecialFunctions,
}

impl<'a> PoincareMap<'a> {
    pub fn new(config: &'a SystemConfig, sf: &'a SpecialFunctions) -> Result<Self> {
        if config.n != sf.n() {
            return Err(Error::Validation("special functions computed for a different n".into()));
        }
        Ok(Self { config, sf })
    }

    pub fn config(&self) -> &'a SystemConfig {
        self.config
    }

    pub fn special(&self) -> &'a SpecialFunctions {
        self.sf
    }

    /// Apply the map and report extrema along the trajectory.
    pub fn apply_tracked(&self, pt: PoincarePoint) -> Result<PeriodSummary> {
        if !(pt.lambda > 0.0 && pt.lambda.is_finite() && pt.theta.is_finite()) {
            return Err(Error::Validation("section point needs finite lambda > 0".into()));
        }
        let sf = self.sf;
        let cfg = self.config;
        let (x0, y0) = sf.to_phase(pt);
        let (alpha, beta) = (sf.alpha(), sf.beta());
        let p = 2 * cfg.n as i32 + 1;
        let rhs = move |t: f64, s: &[f64; 3]| {
            let (x, y) = (s[0], s[1]);
            let force = cfg.forcing(t, x);
            let xp = x.powi(p);
            let lambda = sf.action_of_energy(sf.energy(x, y));
            let dtheta = (beta * y * y + alpha * x * (xp + force)) / lambda;
            [y, -xp - force, dtheta]
        };
        let mut max_abs_sum = x0.abs() + y0.abs();
        let mut min_lambda = pt.lambda;
        let end = drive(
            cfg,
            0.0,
            [x0, y0, pt.theta],
            1.0,
            rhs,
            |s| {
                s[1] = -s[1];
                s[2] = -s[2];
            },
            |t, s| {
                max_abs_sum = max_abs_sum.max(s[0].abs() + s[1].abs());
                let lambda = sf.action_of_energy(sf.energy(s[0], s[1]));
                min_lambda = min_lambda.min(lambda);
                if lambda < ORIGIN_GUARD {
                    return Err(Error::OriginProximity { t, lambda });
                }
                Ok(())
            },
            |_, _, _| {},
        )?;
        let chart = sf.to_action_angle(end[0], end[1])?;
        let theta = chart.theta + (end[2] - chart.theta).round();
        Ok(PeriodSummary { image: ActionAngle::new(chart.lambda, theta), max_abs_sum, min_lambda })
    }

    /// Phase-space trajectory of one period starting from a section point.
    pub fn trajectory(&self, pt: PoincarePoint) -> Result<flow::Trajectory> {
        let (x, y) = self.sf.to_phase(pt);
        let (_, traj) = flow::flow_map(self.config, crate::PhaseState::new(0.0, x, y), 1.0)?;
        Ok(traj)
    }
}

impl SectionMap for PoincareMap<'_> {
    fn apply(&self, pt: PoincarePoint) -> Result<PoincarePoint> {
        self.apply_tracked(pt).map(|s| s.image)
    }
}

/// `DP(pt)` by central differences, `[[dl1/dl0, dl1/dT0], [dT1/dl0, dT1/dT0]]`.
/// The action step is `h * lambda`, the angle step `h`.
pub fn map_jacobian<M: SectionMap + ?Sized>(map: &M, pt: PoincarePoint, h: f64) -> Result<[[f64; 2]; 2]> {
    if !(h > 1e-8 && h < 1e-3) {
        return Err(Error::Validation("finite-difference step must lie in (1e-8, 1e-3)".into()));
    }
    let hl = h * pt.lambda;
    let at = |dl: f64, dt: f64| map.apply(ActionAngle::new(pt.lambda + dl, pt.theta + dt));
    let (lp, lm) = (at(hl, 0.0)?, at(-hl, 0.0)?);
    let (tp, tm) = (at(0.0, h)?, at(0.0, -h)?);
    Ok([
        [(lp.lambda - lm.lambda) / (2.0 * hl), (tp.lambda - tm.lambda) / (2.0 * h)],
        [(lp.theta - lm.theta) / (2.0 * hl), (tp.theta - tm.theta) / (2.0 * h)],
    ])
}

pub fn determinant(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Finite-difference weights for the first derivative at `x0` from the nodes
/// `xs` (Fornberg's recursion).
pub(crate) fn derivative_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    // c[j][k]: weight of node j for derivative order k (k = 0, 1)
    let mut c = alloc::vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                c[i][1] = c1 * (c[i - 1][0] - c5 * c[i - 1][1]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            c[j][1] = (c4 * c[j][1] - c[j][0]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|w| w[1]).collect()
}

/// One grid point of a twist profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistSample {
    pub lambda: f64,
    pub i: f64,
    /// One-period lifted angle advance, averaged over the sampled start angles.
    pub delta_theta: f64,
    pub d_delta_theta_d_lambda: f64,
    pub d_delta_theta_d_i: f64,
    /// `gamma^n dDeltaTheta/dI`, the derivative of the order-one twist function.
    pub scaled_twist: f64,
    pub sign_ok: bool,
}

/// Twist measured over a grid of actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistProfile {
    pub samples: Vec<TwistSample>,
    pub gamma: f64,
    pub degenerate: bool,
    /// `1 - 2 (t2 - t1)`; its sign is the predicted sign of the twist.
    pub twist_factor: f64,
    pub sign_all_ok: bool,
    /// Smallest grid action from which every sample has the predicted sign.
    pub lambda0: Option<f64>,
    /// `d/2 |1 - 2 (t2 - t1)|`.
    pub twist_bound: f64,
    /// Whether `|scaled_twist| >= twist_bound` on the top decade of the grid.
    pub bound_ok: bool,
    /// Sub-intervals `(lambda_a, lambda_b)` where the sign is wrong.
    pub non_monotone: Vec<(f64, f64)>,
}

/// Degenerate-schedule tolerance: the twist counts as vanished when it is
/// below this fraction of the non-degenerate scale `Omega'(lambda)`.
const DEGENERATE_TWIST_FRACTION: f64 = 1e-2;

/// Measure the one-period angle advance over `lambda_grid` (ascending), using
/// `angles` equally spaced start angles per action.
pub fn twist_profile(map: &PoincareMap<'_>, lambda_grid: &[f64], angles: usize) -> Result<TwistProfile> {
    if lambda_grid.len() < 2 {
        return Err(Error::Validation("twist grid needs at least two actions".into()));
    }
    if lambda_grid.windows(2).any(|w| !(w[1] > w[0])) || !(lambda_grid[0] > 0.0) {
        return Err(Error::Validation("twist grid must be positive and strictly ascending".into()));
    }
    let angles = angles.max(1);
    let sf = map.special();
    let n = sf.n();
    let schedule = map.config().schedule;
    let factor = schedule.twist_factor();
    let degenerate = schedule.is_degenerate();

    let mut advance = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let mut acc = 0.0;
        for k in 0..angles {
            let theta = k as f64 / angles as f64;
            let img = map.apply(ActionAngle::new(lambda, theta))?;
            acc += img.theta - theta;
        }
        advance.push(acc / angles as f64);
    }

    let mut rhos: Vec<f64> = lambda_grid.iter().map(|l| l.powf(1.0 / (n as f64 + 2.0))).collect();
    let gamma = {
        rhos.sort_by(f64::total_cmp);
        let m = rhos.len();
        let median = if m % 2 == 1 { rhos[m / 2] } else { 0.5 * (rhos[m / 2 - 1] + rhos[m / 2]) };
        1.5 / median
    };

    let logs: Vec<f64> = lambda_grid.iter().map(|l| l.ln()).collect();
    let twist_bound = 0.5 * sf.d() * factor.abs();
    let top = lambda_grid[lambda_grid.len() - 1] / 10.0;
    let mut samples = Vec::with_capacity(lambda_grid.len());
    let mut bound_ok = true;
    for (k, &lambda) in lambda_grid.iter().enumerate() {
        let width = 5.min(logs.len());
        let start = k.saturating_sub(width / 2).min(logs.len() - width);
        let nodes = &logs[start..start + width];
        let w = derivative_weights(logs[k], nodes);
        let d_du: f64 = w.iter().zip(&advance[start..start + width]).map(|(w, a)| w * a).sum();
        let d_dl = d_du / lambda;
        let sc = ScaledCoords::from_action(lambda, gamma, n);
        // lambda = (I/gamma)^(n+2)  =>  dlambda/dI = (n+2) lambda / I
        let d_di = d_dl * (n as f64 + 2.0) * lambda / sc.i;
        let scaled_twist = gamma.powi(n as i32) * d_di;
        let sign_ok = if factor == 0.0 || degenerate {
            let scale = sf.angular_frequency(lambda) * (2.0 * sf.beta() - 1.0) / lambda;
            d_dl.abs() <= DEGENERATE_TWIST_FRACTION * scale
        } else {
            d_dl != 0.0 && d_dl.signum() == factor.signum()
        };
        if lambda >= top && !degenerate && scaled_twist.abs() < twist_bound {
            bound_ok = false;
        }
        samples.push(TwistSample {
            lambda,
            i: sc.i,
            delta_theta: advance[k],
            d_delta_theta_d_lambda: d_dl,
            d_delta_theta_d_i: d_di,
            scaled_twist,
            sign_ok,
        });
    }
    if degenerate {
        bound_ok = false;
    }

    let mut non_monotone = Vec::new();
    let mut k = 0;
    while k < samples.len() {
        if samples[k].sign_ok {
            k += 1;
            continue;
        }
        let a = k;
        while k < samples.len() && !samples[k].sign_ok {
            k += 1;
        }
        let lo = samples[a.saturating_sub(1)].lambda;
        let hi = samples[k.min(samples.len() - 1)].lambda;
        non_monotone.push((lo, hi));
    }
    let lambda0 = samples
        .iter()
        .rposition(|s| !s.sign_ok)
        .map_or(Some(samples[0].lambda), |i| samples.get(i + 1).map(|s| s.lambda));
    Ok(TwistProfile {
        sign_all_ok: samples.iter().all(|s| s.sign_ok),
        samples,
        gamma,
        degenerate,
        twist_factor: factor,
        lambda0,
        twist_bound,
        bound_ok,
        non_monotone,
    })
}

/// Outcome of an intersection check of a closed curve with its image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionResult {
    pub intersects: bool,
    /// Angle interval `[theta_a, theta_b]` over which `Delta` changes sign or
    /// vanishes.
    pub witness: Option<(f64, f64)>,
    /// `Delta(theta_i) = lambda_image(theta_i) - lambda_curve(theta_i)`.
    pub delta: Vec<f64>,
    pub max_abs_delta: f64,
}

/// Tolerance (relative to the curve's action scale) under which `Delta`
/// counts as vanishing.
const VANISHING_DELTA: f64 = 1e-9;

/// Check whether a star-shaped closed curve meets its image under `map`.
///
/// `curve` holds at least 64 points `(lambda_i, theta_i)` with angles strictly
/// increasing over one turn.
pub fn intersection_check<M: SectionMap + ?Sized>(map: &M, curve: &[PoincarePoint]) -> Result<IntersectionResult> {
    let m = curve.len();
    if m < 64 {
        return Err(Error::Validation("intersection check needs at least 64 curve points".into()));
    }
    let base = curve[0].theta;
    if curve.windows(2).any(|w| !(w[1].theta > w[0].theta)) || !(curve[m - 1].theta < base + 1.0) {
        return Err(Error::Validation("curve angles must increase strictly within one turn".into()));
    }
    let image = curve.iter().map(|p| map.apply(*p)).collect::<Result<Vec<_>>>()?;
    // star-shaped image: lifted angles keep increasing and close up after one turn
    for k in 0..m {
        let next = if k + 1 < m { image[k + 1].theta } else { image[0].theta + 1.0 };
        if !(next > image[k].theta) {
            return Err(Error::NotStarShaped);
        }
    }
    // image as a periodic piecewise-linear graph over the angle
    let origin = image[0].theta;
    let mut graph: Vec<(f64, f64)> = image.iter().map(|p| (p.theta - origin, p.lambda)).collect();
    graph.push((1.0, image[0].lambda));
    let lambda_image_at = |theta: f64| {
        let u = wrap_unit(theta - origin);
        let k = graph.partition_point(|g| g.0 <= u).clamp(1, graph.len() - 1);
        let (a, b) = (graph[k - 1], graph[k]);
        let s = if b.0 > a.0 { (u - a.0) / (b.0 - a.0) } else { 0.0 };
        a.1 + s * (b.1 - a.1)
    };
    let delta: Vec<f64> = curve.iter().map(|p| lambda_image_at(p.theta) - p.lambda).collect();
    let scale = curve.iter().map(|p| p.lambda).fold(0.0, f64::max);
    let vanish = VANISHING_DELTA * scale;
    let max_abs_delta = delta.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let mut witness = None;
    for k in 0..m {
        let j = (k + 1) % m;
        let (a, b) = (delta[k], delta[j]);
        if a.abs() <= vanish || a.signum() != b.signum() {
            let tb = if j == 0 { curve[0].theta + 1.0 } else { curve[j].theta };
            witness = Some((curve[k].theta, tb));
            break;
        }
    }
    Ok(IntersectionResult { intersects: witness.is_some(), witness, delta, max_abs_delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrigPoly;
    use std::sync::OnceLock;

    fn sf() -> &'static SpecialFunctions {
        static SF: OnceLock<SpecialFunctions> = OnceLock::new();
        SF.get_or_init(|| SpecialFunctions::compute(1, 1e-10).unwrap())
    }

    fn config(t1: f64, t2: f64, forcing: f64) -> SystemConfig {
        let c = SystemConfig::unforced(1, ImpulseSchedule::new(t1, t2).unwrap(), 1e-12).unwrap();
        if forcing == 0.0 {
            c
        } else {
            c.with_coefficient(1, TrigPoly::cosine(1, forcing)).unwrap()
        }
    }

    fn omega_oracle(lambda: f64, t1: f64, t2: f64) -> f64 {
        // independent of the implementation path: constants straight from T*
        let t_star = sf().period();
        let (a, b) = (1.0 / 3.0, 2.0 / 3.0);
        let c = 1.0 / (a * t_star);
        let d = c.powf(2.0 * b) / 4.0;
        2.0 * b * d * lambda.powf(2.0 * b - 1.0) * (1.0 - 2.0 * (t2 - t1))
    }

    #[test]
    fn unforced_advance_matches_closed_form() {
        for (t1, t2) in [(0.25, 0.5), (0.1, 0.8), (0.2, 0.7)] {
            let cfg = config(t1, t2, 0.0);
            let map = PoincareMap::new(&cfg, sf()).unwrap();
            for lambda in [1.0, 17.0, 640.0] {
                for theta in [0.0, 0.3, -2.7] {
                    let img = map.apply(ActionAngle::new(lambda, theta)).unwrap();
                    let want = omega_oracle(lambda, t1, t2);
                    assert!((img.theta - theta - want).abs() <= 1e-7, "{t1},{t2} l={lambda}: {} vs {want}", img.theta - theta);
                    assert!((img.lambda - lambda).abs() <= 1e-7 * lambda);
                }
            }
        }
    }

    #[test]
    fn lift_commutes_with_integer_shift_and_composes() {
        let cfg = config(0.25, 0.5, 0.1);
        let map = PoincareMap::new(&cfg, sf()).unwrap();
        let p = ActionAngle::new(50.0, 0.2);
        let a = map.apply(p).unwrap();
        let b = map.apply(ActionAngle::new(50.0, 3.2)).unwrap();
        assert!((b.theta - a.theta - 3.0).abs() < 1e-8);
        let three = map.apply_n(p, 3).unwrap();
        let stepwise = map.apply(map.apply(a).unwrap()).unwrap();
        assert_eq!(three, stepwise);
    }

    #[test]
    fn jacobian_of_unforced_map() {
        let cfg = config(0.25, 0.5, 0.0);
        let map = PoincareMap::new(&cfg, sf()).unwrap();
        let j = map_jacobian(&map, ActionAngle::new(30.0, 0.4), 1e-5).unwrap();
        assert!((determinant(&j) - 1.0).abs() <= 1e-6, "{j:?}");
        assert!(j[0][1].abs() <= 1e-6);
        assert!(map_jacobian(&map, ActionAngle::new(30.0, 0.4), 1e-2).is_err());
    }

    #[test]
    fn origin_guard_trips() {
        let cfg = config(0.25, 0.5, 0.0);
        let map = PoincareMap::new(&cfg, sf()).unwrap();
        assert!(matches!(map.apply(ActionAngle::new(1e-8, 0.0)), Err(Error::OriginProximity { .. })));
    }

    #[test]
    fn fornberg_weights_reproduce_classic_stencils() {
        let w = derivative_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let want = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        // exact on a cubic at an off-centre node
        let xs = [0.0, 0.3, 0.7, 1.0, 1.6];
        let w = derivative_weights(0.3, &xs);
        let d: f64 = w.iter().zip(xs).map(|(w, x)| w * x * x * x).sum();
        assert!((d - 3.0 * 0.09).abs() < 1e-12);
    }

    #[test]
    fn twist_profile_unforced() {
        let cfg = config(0.25, 0.5, 0.0);
        let map = PoincareMap::new(&cfg, sf()).unwrap();
        let grid: Vec<f64> = (0..8).map(|k| 10f64.powf(k as f64 * 3.0 / 7.0)).collect();
        let prof = twist_profile(&map, &grid, 2).unwrap();
        assert!(prof.sign_all_ok && prof.bound_ok && !prof.degenerate);
        assert_eq!(prof.lambda0, Some(1.0));
        for s in &prof.samples {
            assert!((s.delta_theta - omega_oracle(s.lambda, 0.25, 0.5)).abs() <= 1e-7);
        }
        let neg = config(0.1, 0.8, 0.0);
        let map = PoincareMap::new(&neg, sf()).unwrap();
        let prof = twist_profile(&map, &grid, 1).unwrap();
        assert!(prof.samples.iter().all(|s| s.d_delta_theta_d_lambda < 0.0));
        let deg = config(0.2, 0.7, 0.0);
        let map = PoincareMap::new(&deg, sf()).unwrap();
        let prof = twist_profile(&map, &grid, 1).unwrap();
        assert!(prof.degenerate && !prof.bound_ok);
        assert!(prof.samples.iter().all(|s| s.delta_theta.abs() <= 1e-7));
    }

    #[test]
    fn intersection_unforced_circle() {
        let cfg = config(0.25, 0.5, 0.0);
        let map = PoincareMap::new(&cfg, sf()).unwrap();
        let curve: Vec<_> = (0..64).map(|k| ActionAngle::new(200.0, k as f64 / 64.0)).collect();
        let r = intersection_check(&map, &curve).unwrap();
        assert!(r.intersects);
        assert!(r.max_abs_delta <= 1e-7 * 200.0);
    }

    struct Expand;
    impl SectionMap for Expand {
        fn apply(&self, p: PoincarePoint) -> Result<PoincarePoint> {
            Ok(ActionAngle::new(1.2 * p.lambda, p.theta + 0.3))
        }
    }

    #[test]
    fn intersection_negative_control() {
        let curve: Vec<_> =
            (0..80).map(|k| ActionAngle::new(5.0 + 0.1 * (k as f64 * 0.2).sin(), k as f64 / 80.0)).collect();
        let r = intersection_check(&Expand, &curve).unwrap();
        assert!(!r.intersects && r.witness.is_none());
        assert!(intersection_check(&Expand, &curve[..10]).is_err());
    }

    struct Fold;
    impl SectionMap for Fold {
        fn apply(&self, p: PoincarePoint) -> Result<PoincarePoint> {
            Ok(ActionAngle::new(p.lambda, -p.theta))
        }
    }

    #[test]
    fn intersection_rejects_non_star_shaped_image() {
        let curve: Vec<_> = (0..64).map(|k| ActionAngle::new(5.0, k as f64 / 64.0)).collect();
        assert_eq!(intersection_check(&Fold, &curve), Err(Error::NotStarShaped));
    }
}
