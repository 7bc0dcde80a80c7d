//! Dormand–Prince 5(4) with PI step-size control.
//!
//! Fixed-dimension states (`[f64; D]`), no dense output: the callers know
//! every time they need to land on and integrate segment by segment. The
//! final step of every call is clipped so the integration lands exactly on
//! `t_end`.

#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;

/// Step-control parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
}

/// Reasons an integration stopped early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Halt<const D: usize> {
    /// Step size fell below the floating-point resolution of `t`.
    Underflow { t: f64, y: [f64; D] },
    /// A non-finite value appeared in the state or the derivative.
    NonFinite { t: f64, y: [f64; D] },
    /// The step observer asked to stop.
    Observer { t: f64, y: [f64; D] },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// b - b*, the embedded error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;

#[inline]
fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

fn all_finite<const D: usize>(y: &[f64; D]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Integrate `y' = f(t, y)` from `(t0, y0)` to `t_end` (either direction).
///
/// `observe(t, y)` is called after every accepted step and returns `false`
/// to stop the integration.
pub fn integrate<const D: usize, F, O>(
    mut f: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    tol: &Tolerances,
    mut observe: O,
) -> Result<([f64; D], Stats), Halt<D>>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
    O: FnMut(f64, &[f64; D]) -> bool,
{
    let mut stats = Stats::default();
    if t_end == t0 {
        return Ok((y0, stats));
    }
    let dir = if t_end > t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let max_step = tol.max_step.min(span);

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evaluations += 1;
    if !all_finite(&k1) || !all_finite(&y) {
        return Err(Halt::NonFinite { t, y });
    }
    let mut h = initial_step(&mut f, t, &y, &k1, dir, tol, max_step, &mut stats);
    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        let remaining = (t_end - t).abs();
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        if h <= 8.0 * f64::EPSILON * t.abs().max(1.0) && !last {
            return Err(Halt::Underflow { t, y });
        }
        let hs = dir * h;
        let y2 = axpy(&y, hs, &[(A21, &k1)]);
        let k2 = f(t + C2 * hs, &y2);
        let y3 = axpy(&y, hs, &[(A31, &k1), (A32, &k2)]);
        let k3 = f(t + C3 * hs, &y3);
        let y4 = axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        let k4 = f(t + C4 * hs, &y4);
        let y5 = axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        let k5 = f(t + C5 * hs, &y5);
        let y6 = axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let t_new = if last { t_end } else { t + hs };
        let k6 = f(t + hs, &y6);
        let y_new = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t_new, &y_new);
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..D {
            let e = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.abs_tol + tol.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / D as f64).sqrt();

        if !err.is_finite() || !all_finite(&y_new) {
            // shrink hard and retry; a genuine blow-up ends in underflow
            stats.rejected += 1;
            h *= 0.1;
            last_rejected = true;
            if h <= 8.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(Halt::NonFinite { t, y });
            }
            continue;
        }

        if err <= 1.0 {
            let fac11 = err.max(1e-16).powf(EXPO1);
            let mut fac = fac11 / err_old.powf(BETA) / SAFETY;
            fac = fac.clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            err_old = err.max(1e-4);
            t = t_new;
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            last_rejected = false;
            if !observe(t, &y) {
                return Err(Halt::Observer { t, y });
            }
            if last {
                return Ok((y, stats));
            }
            h = h_new.min(max_step);
        } else {
            let fac11 = err.powf(EXPO1);
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            stats.rejected += 1;
            last_rejected = true;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn initial_step<const D: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; D],
    k1: &[f64; D],
    dir: f64,
    tol: &Tolerances,
    max_step: f64,
    stats: &mut Stats,
) -> f64
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
{
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..D {
        let sk = tol.abs_tol + tol.rel_tol * y[i].abs();
        dnf += (k1[i] / sk) * (k1[i] / sk);
        dny += (y[i] / sk) * (y[i] / sk);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
    h = h.min(max_step);
    let y1 = axpy(y, dir * h, &[(1.0, k1)]);
    let k2 = f(t + dir * h, &y1);
    stats.evaluations += 1;
    let mut der2 = 0.0;
    for i in 0..D {
        let sk = tol.abs_tol + tol.rel_tol * y[i].abs();
        der2 += ((k2[i] - k1[i]) / sk) * ((k2[i] - k1[i]) / sk);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
    (100.0 * h).min(h1).min(max_step)
}
