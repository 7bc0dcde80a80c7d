//! Equation data: coefficient polynomials, impulse schedule and integrator
//! settings.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default bound on `|x| + |y|` beyond which a trajectory is declared escaped.
pub const DEFAULT_ESCAPE_GUARD: f64 = 1e12;

/// Spacing `t2 - t1` within this distance of `1/2` marks a schedule degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// A 1-periodic trigonometric polynomial
/// `mean + sum_k a_k cos(2 pi k t) + b_k sin(2 pi k t)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPoly {
    pub mean: f64,
    /// `(a_k, b_k)` for `k = 1, 2, ...`.
    #[serde(default)]
    pub harmonics: Vec<[f64; 2]>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(mean: f64) -> Self {
        Self { mean, harmonics: Vec::new() }
    }

    /// `amplitude * cos(2 pi k t)`.
    pub fn cosine(k: usize, amplitude: f64) -> Self {
        assert!(k >= 1, "harmonic index starts at 1");
        let mut harmonics = alloc::vec![[0.0, 0.0]; k];
        harmonics[k - 1][0] = amplitude;
        Self { mean: 0.0, harmonics }
    }

    pub fn is_zero(&self) -> bool {
        self.mean == 0.0 && self.harmonics.iter().all(|h| h[0] == 0.0 && h[1] == 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.harmonics.is_empty() {
            return self.mean;
        }
        let (s1, c1) = (TAU * reduce(t)).sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut acc = self.mean;
        for h in &self.harmonics {
            acc += h[0] * c + h[1] * s;
            let next = (s * c1 + c * s1, c * c1 - s * s1);
            s = next.0;
            c = next.1;
        }
        acc
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if self.harmonics.is_empty() {
            return 0.0;
        }
        let (s1, c1) = (TAU * reduce(t)).sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut acc = 0.0;
        for (k, h) in self.harmonics.iter().enumerate() {
            let w = TAU * (k + 1) as f64;
            acc += w * (h[1] * c - h[0] * s);
            let next = (s * c1 + c * s1, c * c1 - s * s1);
            s = next.0;
            c = next.1;
        }
        acc
    }

    fn is_finite(&self) -> bool {
        self.mean.is_finite() && self.harmonics.iter().all(|h| h[0].is_finite() && h[1].is_finite())
    }
}

/// Fractional part in `[0, 1)`.
fn reduce(t: f64) -> f64 {
    let r = t - t.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Impulse times `t1 < t2` in `(0, 1)`, repeated with period 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseSchedule {
    pub t1: f64,
    pub t2: f64,
}

impl ImpulseSchedule {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let s = Self { t1, t2 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1.is_finite() && self.t2.is_finite()) {
            return Err(Error::Validation("impulse times must be finite".into()));
        }
        if !(self.t1 > 0.0 && self.t2 < 1.0) {
            return Err(Error::Validation("impulse times must lie in (0, 1)".into()));
        }
        if !(self.t1 < self.t2) {
            return Err(Error::Validation("t1 < t2 violated".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.t2 - self.t1
    }

    /// `1 - 2 (t2 - t1)`, the factor carried by the leading twist term.
    pub fn twist_factor(&self) -> f64 {
        1.0 - 2.0 * self.spacing()
    }

    pub fn is_degenerate(&self) -> bool {
        (self.spacing() - 0.5).abs() < DEGENERACY_TOL
    }

    /// The j-th impulse time; `j = 0, 1` are `t1, t2` of the first period.
    pub fn time(&self, j: i64) -> f64 {
        let base = if j.rem_euclid(2) == 0 { self.t1 } else { self.t2 };
        base + j.div_euclid(2) as f64
    }

    /// Impulse times in the half-open interval `(start, end]`, ascending.
    pub fn times_in(&self, start: f64, end: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if !(end > start) {
            return out;
        }
        let mut j = 2 * (start.floor() as i64 - 1);
        loop {
            let t = self.time(j);
            if t > end {
                break;
            }
            if t > start {
                out.push(t);
            }
            j += 1;
        }
        out
    }
}

/// Tolerances and guards for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    #[serde(default = "default_guard", skip_serializing_if = "is_default_guard")]
    pub escape_guard: f64,
}

fn default_guard() -> f64 {
    DEFAULT_ESCAPE_GUARD
}

fn is_default_guard(g: &f64) -> bool {
    *g == DEFAULT_ESCAPE_GUARD
}

impl IntegratorSettings {
    pub fn new(abs_tol: f64, rel_tol: f64, max_step: f64) -> Self {
        Self { abs_tol, rel_tol, max_step, escape_guard: DEFAULT_ESCAPE_GUARD }
    }
}

/// The full equation: degree `n`, coefficients `p_0 .. p_{2n}`, impulse
/// schedule and integrator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n: u32,
    pub coefficients: Vec<TrigPoly>,
    #[serde(rename = "impulses")]
    pub schedule: ImpulseSchedule,
    #[serde(rename = "integrator")]
    pub settings: IntegratorSettings,
}

impl SystemConfig {
    /// A validated configuration.
    pub fn new(
        n: u32,
        coefficients: Vec<TrigPoly>,
        schedule: ImpulseSchedule,
        settings: IntegratorSettings,
    ) -> Result<Self> {
        let cfg = Self { n, coefficients, schedule, settings };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Unforced configuration (all `p_i = 0`) with `max_step` set to the
    /// largest admissible value.
    pub fn unforced(n: u32, schedule: ImpulseSchedule, tol: f64) -> Result<Self> {
        let coefficients = alloc::vec![TrigPoly::zero(); 2 * n as usize + 1];
        let max_step = max_admissible_step(&schedule);
        Self::new(n, coefficients, schedule, IntegratorSettings::new(tol, tol, max_step))
    }

    /// Replace coefficient `i`, revalidating.
    pub fn with_coefficient(mut self, i: usize, p: TrigPoly) -> Result<Self> {
        let max = self.coefficients.len().saturating_sub(1);
        let slot = self.coefficients.get_mut(i).ok_or(Error::IndexOutOfRange { index: i, max })?;
        *slot = p;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Result<Self> {
        self.settings.abs_tol = tol;
        self.settings.rel_tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Validation("n >= 1 violated".into()));
        }
        let want = 2 * self.n as usize + 1;
        if self.coefficients.len() != want {
            return Err(Error::Validation(format!(
                "coefficients must have exactly 2n+1 = {want} entries, found {}",
                self.coefficients.len()
            )));
        }
        if let Some(i) = self.coefficients.iter().position(|p| !p.is_finite()) {
            return Err(Error::Validation(format!("coefficient {i} has non-finite entries")));
        }
        self.schedule.validate()?;
        let s = &self.settings;
        if !(s.abs_tol > 0.0 && s.rel_tol > 0.0) {
            return Err(Error::Validation("tolerances must be strictly positive".into()));
        }
        let limit = max_admissible_step(&self.schedule);
        if !(s.max_step > 0.0 && s.max_step <= limit) {
            return Err(Error::Validation(format!(
                "max_step must lie in (0, {limit}] = (0, min(t1, t2 - t1, 1 - t2)]"
            )));
        }
        if !(s.escape_guard > 0.0) {
            return Err(Error::Validation("escape_guard must be positive".into()));
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.schedule.is_degenerate()
    }

    pub fn is_unforced(&self) -> bool {
        self.coefficients.iter().all(TrigPoly::is_zero)
    }

    /// `p_i(t)`.
    pub fn eval_coefficient(&self, i: usize, t: f64) -> Result<f64> {
        let max = 2 * self.n as usize;
        self.coefficients
            .get(i)
            .map(|p| p.eval(t))
            .ok_or(Error::IndexOutOfRange { index: i, max })
    }

    /// `sum_{i=0}^{2n} x^i p_i(t)` by Horner's scheme.
    pub fn forcing(&self, t: f64, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, p| {
            let v = if p.is_zero() { 0.0 } else { p.eval(t) };
            acc * x + v
        })
    }

    /// `sum_{i=0}^{2n} p_i(t) x^{i+1} / (i+1)`, the time-dependent part of
    /// the Hamiltonian.
    pub fn forcing_potential(&self, t: f64, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (i, p)| acc * x + p.eval(t) / (i + 1) as f64)
            * x
    }
}

/// `min(t1, t2 - t1, 1 - t2)`.
pub fn max_admissible_step(s: &ImpulseSchedule) -> f64 {
    s.t1.min(s.t2 - s.t1).min(1.0 - s.t2)
}
