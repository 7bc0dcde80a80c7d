//! The impulsive flow in phase space: adaptive integration between impulse
//! times, exact velocity reversal at them.
//!
//! Endpoint ownership: an impulse at `t_j` belongs to the segment ending at
//! `t_j`, so a state reported at `t_j` already carries `y(t_j+)`, and a flow
//! started at `t_j` does not apply that impulse again.

use alloc::vec::Vec;
use core::cell::RefCell;

#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::model::SystemConfig;
use crate::ode::{self, Halt, Tolerances};
use crate::special::PhaseState;
use crate::{Error, Result};

/// One velocity reversal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseEvent {
    pub t: f64,
    pub x: f64,
    pub y_minus: f64,
    pub y_plus: f64,
}

/// Accepted integrator states plus the impulse events along the way.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<PhaseState>,
    pub impulses: Vec<ImpulseEvent>,
    /// Set when the escape guard tripped; `samples` then ends at the last
    /// state before the trip.
    pub escaped: bool,
}

/// `(x', y')` of the smooth part: `x' = y`, `y' = -x^(2n+1) - sum x^i p_i(t)`.
pub fn rhs(config: &SystemConfig, state: &PhaseState) -> (f64, f64) {
    let x = state.x;
    let dy = -x.powi(2 * config.n as i32 + 1) - config.forcing(state.t, x);
    (state.y, dy)
}

/// `(t, x, y) -> (t, x, -y)`.
pub fn apply_impulse(state: PhaseState) -> PhaseState {
    PhaseState { y: -state.y, ..state }
}

/// `h(x, y, t) = y^2/2 + x^(2n+2)/(2n+2) + sum p_i(t) x^(i+1)/(i+1)`.
pub fn hamiltonian(config: &SystemConfig, state: &PhaseState) -> f64 {
    let m = 2.0 * config.n as f64 + 2.0;
    0.5 * state.y * state.y
        + state.x.powi(2 * config.n as i32 + 2) / m
        + config.forcing_potential(state.t, state.x)
}

pub(crate) fn tolerances(config: &SystemConfig) -> Tolerances {
    let s = &config.settings;
    Tolerances { abs_tol: s.abs_tol, rel_tol: s.rel_tol, max_step: s.max_step }
}

pub(crate) fn phase_rhs(config: &SystemConfig) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
    let p = 2 * config.n as i32 + 1;
    move |t, y| [y[1], -y[0].powi(p) - config.forcing(t, y[0])]
}

/// Integrate one smooth piece `[t0, t1]` of the first `D` components. The
/// first two components must be `(x, y)`; the escape guard is applied to
/// them. `on_step` may veto a step by returning an error.
pub(crate) fn smooth_piece<const D: usize, F, O>(
    config: &SystemConfig,
    t0: f64,
    y0: [f64; D],
    t1: f64,
    f: F,
    mut on_step: O,
) -> Result<[f64; D]>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
    O: FnMut(f64, &[f64; D]) -> Result<()>,
{
    let guard = config.settings.escape_guard;
    let mut veto: Option<Error> = None;
    let run = ode::integrate(f, t0, y0, t1, &tolerances(config), |t, y| {
        if y[0].abs() + y[1].abs() > guard {
            veto = Some(Error::Escaped { t, x: y[0], y: y[1] });
            return false;
        }
        match on_step(t, y) {
            Ok(()) => true,
            Err(e) => {
                veto = Some(e);
                false
            }
        }
    });
    match run {
        Ok((y, _)) => Ok(y),
        Err(Halt::Observer { .. }) => Err(veto.expect("observer halts carry a reason")),
        Err(Halt::Underflow { t, y }) => Err(Error::StepUnderflow { t, x: y[0], y: y[1] }),
        Err(Halt::NonFinite { t, y }) => Err(Error::Escaped { t, x: y[0], y: y[1] }),
    }
}

/// Forward impulsive flow of a `D`-component state over `(t0, t_end]`.
/// `reflect` implements the impulse on the state; `on_impulse` sees the
/// states immediately before and after.
#[allow(clippy::too_many_arguments)]
pub(crate) fn drive<const D: usize, F, R, O, I>(
    config: &SystemConfig,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    f: F,
    reflect: R,
    mut on_step: O,
    mut on_impulse: I,
) -> Result<[f64; D]>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
    R: Fn(&mut [f64; D]),
    O: FnMut(f64, &[f64; D]) -> Result<()>,
    I: FnMut(f64, &[f64; D], &[f64; D]),
{
    let mut t = t0;
    let mut y = y0;
    for tj in config.schedule.times_in(t0, t_end) {
        y = smooth_piece(config, t, y, tj, &f, &mut on_step)?;
        let before = y;
        reflect(&mut y);
        on_impulse(tj, &before, &y);
        t = tj;
    }
    if t_end > t {
        y = smooth_piece(config, t, y, t_end, &f, &mut on_step)?;
    }
    Ok(y)
}

/// Smooth integration from `state` to `t_end` (either direction). No impulse
/// time may lie strictly between the two.
pub fn integrate_segment(config: &SystemConfig, state: PhaseState, t_end: f64) -> Result<PhaseState> {
    let (lo, hi) = if t_end >= state.t { (state.t, t_end) } else { (t_end, state.t) };
    if let Some(&tj) = config.schedule.times_in(lo, hi).iter().find(|&&tj| tj < hi) {
        return Err(Error::ImpulseInSegment { t_start: state.t, t_end, t_impulse: tj });
    }
    let y = smooth_piece(config, state.t, [state.x, state.y], t_end, phase_rhs(config), |_, _| Ok(()))?;
    Ok(PhaseState { t: t_end, x: y[0], y: y[1] })
}

/// Advance `state` to `t_target`, applying every impulse in
/// `(state.t, t_target]`.
pub fn flow_map(config: &SystemConfig, state: PhaseState, t_target: f64) -> Result<(PhaseState, Trajectory)> {
    let traj = simulate(config, state, t_target);
    match traj.1 {
        Ok(end) => Ok((end, traj.0)),
        Err(e) => Err(e),
    }
}

/// Like [`flow_map`] but keeps the partial trajectory when the run fails.
pub fn simulate(config: &SystemConfig, state: PhaseState, t_target: f64) -> (Trajectory, Result<PhaseState>) {
    let mut traj = Trajectory { samples: alloc::vec![state], ..Default::default() };
    if !(t_target >= state.t) {
        return (traj, Err(Error::Validation("flow_map needs t_target >= state.t".into())));
    }
    let mut impulses = Vec::new();
    let samples = RefCell::new(Vec::new());
    let out = drive(
        config,
        state.t,
        [state.x, state.y],
        t_target,
        phase_rhs(config),
        |y| y[1] = -y[1],
        |t, y| {
            samples.borrow_mut().push(PhaseState::new(t, y[0], y[1]));
            Ok(())
        },
        |t, before, after| {
            impulses.push(ImpulseEvent { t, x: before[0], y_minus: before[1], y_plus: after[1] });
            // samples are right-continuous: the state at an impulse time is post-jump
            if let Some(last) = samples.borrow_mut().last_mut() {
                if last.t == t {
                    last.y = after[1];
                }
            }
        },
    );
    traj.samples.extend(samples.into_inner());
    traj.impulses = impulses;
    let result = out.map(|y| PhaseState::new(t_target, y[0], y[1]));
    if matches!(result, Err(Error::Escaped { .. })) {
        traj.escaped = true;
    }
    (traj, result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ImpulseSchedule, TrigPoly};
    use crate::special::SpecialFunctions;

    fn unforced(t1: f64, t2: f64, tol: f64) -> SystemConfig {
        SystemConfig::unforced(1, ImpulseSchedule::new(t1, t2).unwrap(), tol).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let c = unforced(0.25, 0.5, 1e-10);
        assert_eq!(rhs(&c, &PhaseState::new(0.0, 1.0, 0.0)), (0.0, -1.0));
        assert_eq!(rhs(&c, &PhaseState::new(0.0, 0.0, 2.0)), (2.0, 0.0));
        let forced = c.with_coefficient(0, TrigPoly::constant(1.0)).unwrap();
        assert_eq!(rhs(&forced, &PhaseState::new(0.3, 1.0, 0.0)), (0.0, -2.0));
    }

    #[test]
    fn impulse_flips_velocity_only() {
        assert_eq!(apply_impulse(PhaseState::new(0.2, 1.0, 0.5)), PhaseState::new(0.2, 1.0, -0.5));
        let s = PhaseState::new(0.2, 1.3, 0.0);
        assert_eq!(apply_impulse(s).x, s.x);
        assert_eq!(apply_impulse(s).y.abs(), 0.0);
        let c = unforced(0.25, 0.5, 1e-10).with_coefficient(2, TrigPoly::cosine(1, 0.3)).unwrap();
        let s = PhaseState::new(0.4, 0.7, -1.1);
        assert_eq!(hamiltonian(&c, &s), hamiltonian(&c, &apply_impulse(s)));
    }

    #[test]
    fn reference_orbit_returns_after_one_period() {
        let sf = SpecialFunctions::compute(1, 1e-10).unwrap();
        // The unforced field is autonomous, so chunks of the period can be
        // integrated on the impulse-free window (0, t1].
        let mut c = unforced(0.9, 0.95, 1e-12);
        c.settings.max_step = 0.05;
        let mut s = PhaseState::new(0.0, 1.0, 0.0);
        while s.t < sf.period() {
            let dt = (sf.period() - s.t).min(0.8);
            let r = integrate_segment(&c, PhaseState { t: 0.0, ..s }, dt).unwrap();
            s = PhaseState { t: s.t + dt, ..r };
        }
        assert!((s.x - 1.0).abs() < 1e-8 && s.y.abs() < 1e-8, "{s:?}");
    }

    #[test]
    fn segment_preconditions() {
        let c = unforced(0.25, 0.5, 1e-10);
        let s = PhaseState::new(0.0, 1.0, 0.0);
        assert!(matches!(integrate_segment(&c, s, 0.3), Err(Error::ImpulseInSegment { .. })));
        assert!(integrate_segment(&c, s, 0.25).is_ok());
        assert_eq!(integrate_segment(&c, s, 0.0).unwrap(), s);
    }

    #[test]
    fn energy_and_impulse_count() {
        let tol = 1e-10;
        let c = unforced(0.25, 0.5, tol);
        let s0 = PhaseState::new(0.0, 1.5, -0.3);
        let e0 = hamiltonian(&c, &s0);
        let (s1, traj) = flow_map(&c, s0, 1.0).unwrap();
        assert!((hamiltonian(&c, &s1) - e0).abs() <= 10.0 * tol * e0.max(1.0));
        assert_eq!(traj.impulses.len(), 2);
        let (_, traj) = flow_map(&c, s0, 7.0).unwrap();
        assert_eq!(traj.impulses.len(), 14);
        for ev in &traj.impulses {
            assert_eq!(ev.y_plus.to_bits(), (-ev.y_minus).to_bits());
        }
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn semigroup_property() {
        let tol = 1e-11;
        let c = unforced(0.25, 0.5, tol).with_coefficient(1, TrigPoly::cosine(1, 0.1)).unwrap();
        let s0 = PhaseState::new(0.0, 2.0, 0.5);
        let (a, _) = flow_map(&c, s0, 1.0).unwrap();
        let (b, _) = flow_map(&c, a, 2.0).unwrap();
        let (direct, _) = flow_map(&c, s0, 2.0).unwrap();
        let scale = direct.x.abs().max(direct.y.abs());
        assert!((b.x - direct.x).abs() <= 10.0 * tol * scale * 10.0);
        assert!((b.y - direct.y).abs() <= 10.0 * tol * scale * 10.0);
    }

    #[test]
    fn self_convergence_under_forcing() {
        let tol = 1e-10;
        let c = unforced(0.25, 0.5, tol).with_coefficient(1, TrigPoly::cosine(1, 0.1)).unwrap();
        let half = c.clone().with_tolerance(tol / 2.0).unwrap();
        let s0 = PhaseState::new(0.0, 1.2, 0.0);
        let (a, _) = flow_map(&c, s0, 1.0).unwrap();
        let (b, _) = flow_map(&half, s0, 1.0).unwrap();
        assert!((a.x - b.x).abs() <= 100.0 * tol && (a.y - b.y).abs() <= 100.0 * tol);
    }

    #[test]
    fn time_reversal_on_smooth_piece() {
        let tol = 1e-11;
        let c = unforced(0.25, 0.5, tol).with_coefficient(1, TrigPoly::cosine(1, 0.1)).unwrap();
        let s0 = PhaseState::new(0.3, 1.0, 0.4);
        let fwd = integrate_segment(&c, s0, 0.5).unwrap();
        let back = integrate_segment(&c, fwd, 0.3).unwrap();
        assert!((back.x - s0.x).abs() <= 100.0 * tol && (back.y - s0.y).abs() <= 100.0 * tol);
    }

    #[test]
    fn escape_is_labelled() {
        let mut c = unforced(0.25, 0.5, 1e-8);
        c.settings.escape_guard = 10.0;
        let (traj, r) = simulate(&c, PhaseState::new(0.0, 0.0, 20.0), 5.0);
        assert!(matches!(r, Err(Error::Escaped { .. })), "{r:?}");
        assert!(traj.escaped);
    }
}
