//! The reference orbit `x'' + x^(2n+1) = 0`, `(x, x')(0) = (1, 0)`, its
//! generalized cosine/sine pair `(C, S)` with minimal period `T*`, and the
//! area-preserving action-angle chart
//!
//! ```text
//! x = (c lambda)^alpha C(theta T*),   y = (c lambda)^beta S(theta T*)
//! alpha = 1/(n+2),  beta = 1 - alpha,  c = 1/(alpha T*),  d = c^(2 beta)/(2n+2)
//! ```
//!
//! in which the autonomous energy is `d lambda^(2 beta)`.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::ode::{self, Halt, Tolerances};
use crate::{Error, Result};

/// Number of grid intervals over one period (spacing `T*/8192`).
pub const GRID_INTERVALS: usize = 8192;

/// Finest integration tolerance the grid construction accepts.
pub const MIN_TOLERANCE: f64 = 1e-15;

/// Residual bound for the period refinement.
const PERIOD_RESIDUAL: f64 = 1e-12;

/// Action and lifted angle. The circle angle is `theta mod 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionAngle {
    pub lambda: f64,
    pub theta: f64,
}

impl ActionAngle {
    pub fn new(lambda: f64, theta: f64) -> Self {
        Self { lambda, theta }
    }

    /// Angle reduced to `[0, 1)`.
    pub fn circle_angle(&self) -> f64 {
        wrap_unit(self.theta)
    }
}

/// Time, position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl PhaseState {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Self { t, x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.is_finite() && self.y.is_finite()
    }
}

/// Least non-negative remainder of `x` modulo `m > 0`.
pub(crate) fn modulo(x: f64, m: f64) -> f64 {
    let r = x % m;
    if r < 0.0 {
        r + m
    } else {
        r
    }
}

/// `t` reduced to `[0, 1)`.
pub(crate) fn wrap_unit(t: f64) -> f64 {
    let r = modulo(t, 1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Sup-norm residuals of the defining identities over the sample grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    /// `|(n+1) S^2 + C^(2n+2) - 1|`.
    pub energy: f64,
    /// `|C' - S|` and `|S' + C^(2n+1)|` with `C'`, `S'` from differentiating
    /// the interpolant at interval midpoints.
    pub derivative: f64,
    /// `|C(T* - tau) - C(tau)|` and `|S(T* - tau) + S(tau)|` on the nodes.
    pub symmetry: f64,
}

/// Sampled `(C, S)` over one period plus the chart constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialFunctions {
    n: u32,
    period: f64,
    spacing: f64,
    /// `(C, S)` at `tau_k = k * spacing`, `k = 0..=GRID_INTERVALS`.
    values: Vec<[f64; 2]>,
    /// Polar angle of `(C, -S)` at the nodes, unwrapped, increasing from 0 to 2 pi.
    polar: Vec<f64>,
    alpha: f64,
    beta: f64,
    c: f64,
    d: f64,
}

fn reference_rhs(n: u32) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    let p = 2 * n as i32 + 1;
    move |_, y| [y[1], -y[0].powi(p)]
}

impl SpecialFunctions {
    /// Integrate the reference orbit, locate and refine `T*`, and sample
    /// `(C, S)` on a uniform grid of [`GRID_INTERVALS`] intervals.
    pub fn compute(n: u32, tol: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("n >= 1 violated".into()));
        }
        if !(tol > 0.0 && tol <= 1e-8) {
            return Err(Error::Validation("special-function tolerance must lie in (0, 1e-8]".into()));
        }
        if tol < MIN_TOLERANCE {
            return Err(Error::ToleranceUnachievable { tol });
        }
        // The grid identities are certified at 1e-9; integrate well below that.
        let inner = tol.min(1e-13);
        let tols = Tolerances { abs_tol: inner, rel_tol: inner, max_step: 0.05 };
        let period = find_period(n, &tols)?;
        let values = sample_grid(n, period, &tols)?;
        Ok(Self::assemble(n, period, values))
    }

    /// Rebuild from a stored period and node values (used by on-disk caches).
    pub fn from_samples(n: u32, period: f64, values: Vec<[f64; 2]>) -> Result<Self> {
        if n == 0 || !(period > 0.0 && period.is_finite()) {
            return Err(Error::Validation("invalid special-function header".into()));
        }
        if values.len() != GRID_INTERVALS + 1 {
            return Err(Error::Validation("special-function sample count mismatch".into()));
        }
        if values.iter().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
            return Err(Error::Validation("non-finite special-function sample".into()));
        }
        Ok(Self::assemble(n, period, values))
    }

    fn assemble(n: u32, period: f64, values: Vec<[f64; 2]>) -> Self {
        let alpha = 1.0 / (n as f64 + 2.0);
        let beta = 1.0 - alpha;
        let c = 1.0 / (alpha * period);
        let d = c.powf(2.0 * beta) / (2.0 * n as f64 + 2.0);
        let mut polar = Vec::with_capacity(values.len());
        let mut offset = 0.0;
        let mut prev = 0.0;
        for (k, v) in values.iter().enumerate() {
            let mut a = (-v[1]).atan2(v[0]) + offset;
            if k > 0 && a < prev - PI {
                offset += TAU;
                a += TAU;
            }
            polar.push(a);
            prev = a;
        }
        Self { n, period, spacing: period / GRID_INTERVALS as f64, values, polar, alpha, beta, c, d }
    }

    pub fn n(&self) -> u32 {
        self.n
    }
    /// Minimal period `T*`.
    pub fn period(&self) -> f64 {
        self.period
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn node_values(&self) -> &[[f64; 2]] {
        &self.values
    }

    /// `(tau_k, C(tau_k), S(tau_k))` over the grid.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, v)| (k as f64 * self.spacing, v[0], v[1]))
    }

    fn node_derivatives(&self, k: usize) -> [f64; 2] {
        let [c, s] = self.values[k];
        [s, -c.powi(2 * self.n as i32 + 1)]
    }

    fn locate(&self, tau: f64) -> (usize, f64) {
        let r = modulo(tau, self.period);
        let pos = r / self.spacing;
        let k = (pos.floor() as usize).min(GRID_INTERVALS - 1);
        (k, pos - k as f64)
    }

    /// `(C(tau), S(tau))` by cubic Hermite interpolation, periodic in `tau`.
    pub fn eval(&self, tau: f64) -> (f64, f64) {
        let (k, s) = self.locate(tau);
        let h = self.spacing;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let (a, b) = (self.values[k], self.values[k + 1]);
        let (da, db) = (self.node_derivatives(k), self.node_derivatives(k + 1));
        let f = |i: usize| h00 * a[i] + h10 * h * da[i] + h01 * b[i] + h11 * h * db[i];
        (f(0), f(1))
    }

    /// Derivative of the interpolant, `(C'(tau), S'(tau))`.
    pub fn eval_derivative(&self, tau: f64) -> (f64, f64) {
        let (k, s) = self.locate(tau);
        let h = self.spacing;
        let s2 = s * s;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        let (a, b) = (self.values[k], self.values[k + 1]);
        let (da, db) = (self.node_derivatives(k), self.node_derivatives(k + 1));
        let f = |i: usize| (d00 * a[i] + d01 * b[i]) / h + d10 * da[i] + d11 * db[i];
        (f(0), f(1))
    }

    pub fn residuals(&self) -> IdentityResiduals {
        let np1 = self.n as f64 + 1.0;
        let p = 2 * self.n as i32 + 1;
        let energy = self
            .values
            .iter()
            .map(|v| (np1 * v[1] * v[1] + v[0].powi(p + 1) - 1.0).abs())
            .fold(0.0, f64::max);
        let m = GRID_INTERVALS;
        let symmetry = (0..=m)
            .map(|k| {
                let (a, b) = (self.values[k], self.values[m - k]);
                (b[0] - a[0]).abs().max((b[1] + a[1]).abs())
            })
            .fold(0.0, f64::max);
        let derivative = (0..m)
            .map(|k| {
                let tau = (k as f64 + 0.5) * self.spacing;
                let (c, s) = self.eval(tau);
                let (dc, ds) = self.eval_derivative(tau);
                (dc - s).abs().max((ds + c.powi(p)).abs())
            })
            .fold(0.0, f64::max);
        IdentityResiduals { energy, derivative, symmetry }
    }

    /// Autonomous energy `y^2/2 + x^(2n+2)/(2n+2)`.
    pub fn energy(&self, x: f64, y: f64) -> f64 {
        let m = 2.0 * self.n as f64 + 2.0;
        0.5 * y * y + x.powi(2 * self.n as i32 + 2) / m
    }

    /// `d lambda^(2 beta)`.
    pub fn energy_of_action(&self, lambda: f64) -> f64 {
        self.d * lambda.powf(2.0 * self.beta)
    }

    /// Inverse of [`Self::energy_of_action`].
    pub fn action_of_energy(&self, energy: f64) -> f64 {
        (energy / self.d).powf(0.5 / self.beta)
    }

    /// Angular frequency of the unforced flow, `2 beta d lambda^(2 beta - 1)`.
    pub fn angular_frequency(&self, lambda: f64) -> f64 {
        2.0 * self.beta * self.d * lambda.powf(2.0 * self.beta - 1.0)
    }

    /// Chart `(lambda, theta) -> (x, y)`.
    pub fn to_phase(&self, aa: ActionAngle) -> (f64, f64) {
        let (c, s) = self.eval(aa.circle_angle() * self.period);
        let cl = self.c * aa.lambda;
        (cl.powf(self.alpha) * c, cl.powf(self.beta) * s)
    }

    /// Inverse chart. The returned angle lies in `[0, 1)`.
    pub fn to_action_angle(&self, x: f64, y: f64) -> Result<ActionAngle> {
        if x == 0.0 && y == 0.0 {
            return Err(Error::OriginChart);
        }
        let lambda = self.action_of_energy(self.energy(x, y));
        let cl = self.c * lambda;
        let (sx, sy) = (cl.powf(self.alpha), cl.powf(self.beta));
        let (u, v) = (x / sx, y / sy);
        let target = modulo((-v).atan2(u), TAU);

        // bracketing node by polar angle, then Newton on the interpolant
        let k = self.polar.partition_point(|&a| a <= target).clamp(1, GRID_INTERVALS) - 1;
        let (a0, a1) = (self.polar[k], self.polar[k + 1]);
        let frac = if a1 > a0 { ((target - a0) / (a1 - a0)).clamp(0.0, 1.0) } else { 0.0 };
        let mut tau = (k as f64 + frac) * self.spacing;
        let p = 2 * self.n as i32 + 1;
        for _ in 0..30 {
            let (c, s) = self.eval(tau);
            let mut g = (-s).atan2(c) - target;
            g = modulo(g + PI, TAU) - PI;
            let dg = (c.powi(p + 1) + s * s) / (c * c + s * s);
            let step = g / dg;
            tau -= step;
            if step.abs() <= 4.0 * f64::EPSILON * self.period {
                break;
            }
        }
        let theta = wrap_unit(tau / self.period);
        let aa = ActionAngle { lambda, theta };
        let (xr, yr) = self.to_phase(aa);
        let residual = (xr - x).abs().max((yr - y).abs());
        if residual > 1e-8 * x.abs().max(y.abs()).max(1.0) {
            return Err(Error::AngleNotConverged { residual });
        }
        Ok(aa)
    }

    /// `|det D(chart)|` at `aa` by central differences; equals 1 for an
    /// area-preserving chart.
    pub fn jacobian_check(&self, aa: ActionAngle) -> f64 {
        let hl = 1e-6 * aa.lambda;
        let ht = 1e-6;
        let at = |dl: f64, dt: f64| self.to_phase(ActionAngle::new(aa.lambda + dl, aa.theta + dt));
        let (xp, yp) = at(hl, 0.0);
        let (xm, ym) = at(-hl, 0.0);
        let (xq, yq) = at(0.0, ht);
        let (xr, yr) = at(0.0, -ht);
        let dxdl = (xp - xm) / (2.0 * hl);
        let dydl = (yp - ym) / (2.0 * hl);
        let dxdt = (xq - xr) / (2.0 * ht);
        let dydt = (yq - yr) / (2.0 * ht);
        (dxdl * dydt - dxdt * dydl).abs()
    }
}

/// First return of the reference orbit to the positive `x` axis, refined by
/// Newton on `S(tau) = 0` (where `S' = -C^(2n+1)`).
fn find_period(n: u32, tols: &Tolerances) -> Result<f64> {
    let rhs = reference_rhs(n);
    let p = 2 * n as i32 + 1;
    let mut prev = (0.0, [1.0, 0.0]);
    let mut seen_positive = false;
    let run = ode::integrate(&rhs, 0.0, [1.0, 0.0], 1e4, tols, |t, y| {
        if y[1] > 0.0 {
            seen_positive = true;
        }
        if seen_positive && y[1] <= 0.0 && y[0] > 0.0 {
            return false;
        }
        prev = (t, *y);
        true
    });
    let (t_after, _) = match run {
        Err(Halt::Observer { t, y }) => (t, y),
        _ => return Err(Error::PeriodNotConverged { residual: f64::NAN }),
    };
    let (t0, y0) = prev;
    let mut tau = t0 + y0[1] / y0[0].powi(p);
    if !(tau > t0 && tau <= t_after) {
        tau = 0.5 * (t0 + t_after);
    }
    let mut residual = f64::INFINITY;
    for _ in 0..50 {
        let (y, _) = ode::integrate(&rhs, t0, y0, tau, tols, |_, _| true)
            .map_err(|_| Error::PeriodNotConverged { residual })?;
        residual = y[1].abs();
        let step = y[1] / y[0].powi(p);
        tau += step;
        if residual <= PERIOD_RESIDUAL && step.abs() <= 1e-14 * tau {
            return Ok(tau);
        }
    }
    Err(Error::PeriodNotConverged { residual })
}

fn sample_grid(n: u32, period: f64, tols: &Tolerances) -> Result<Vec<[f64; 2]>> {
    let rhs = reference_rhs(n);
    let h = period / GRID_INTERVALS as f64;
    let mut values = Vec::with_capacity(GRID_INTERVALS + 1);
    let mut y = [1.0, 0.0];
    values.push(y);
    for k in 0..GRID_INTERVALS {
        let (t0, t1) = (k as f64 * h, (k + 1) as f64 * h);
        y = ode::integrate(&rhs, t0, y, t1, tols, |_, _| true)
            .map_err(|_| Error::ToleranceUnachievable { tol: tols.abs_tol })?
            .0;
        values.push(y);
    }
    Ok(values)
}
