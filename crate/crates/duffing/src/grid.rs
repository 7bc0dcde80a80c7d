//! Seed grids such as `lambda=1:100:log:20,theta=0:1:8`.
//!
//! Each axis is `name=value` or `name=lo:hi[:lin|log]:count`. Action axes
//! include both endpoints; the angle axis is half-open, `[lo, hi)`, since
//! angles are periodic. Missing axes default to `lambda=10` and `theta=0`.

use std::str::FromStr;

use duffing_core::{ActionAngle, PoincarePoint};

use crate::AppError;

#[derive(Debug, Clone, PartialEq)]
pub struct SeedGrid {
    pub lambdas: Vec<f64>,
    pub thetas: Vec<f64>,
}

impl Default for SeedGrid {
    fn default() -> Self {
        Self { lambdas: vec![10.0], thetas: vec![0.0] }
    }
}

fn num(s: &str) -> Result<f64, AppError> {
    s.trim().parse::<f64>().map_err(|_| AppError::Validation(format!("seed grid: bad number {s:?}")))
}

fn axis(spec: &str, closed: bool) -> Result<Vec<f64>, AppError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let (lo, hi, log, count) = match parts.as_slice() {
        [v] => return Ok(vec![num(v)?]),
        [lo, hi, count] => (num(lo)?, num(hi)?, false, count),
        [lo, hi, scale, count] => {
            let log = match scale.trim() {
                "log" => true,
                "lin" => false,
                other => return Err(AppError::Validation(format!("seed grid: unknown scale {other:?}"))),
            };
            (num(lo)?, num(hi)?, log, count)
        }
        _ => return Err(AppError::Validation(format!("seed grid: cannot parse axis {spec:?}"))),
    };
    let count: usize =
        count.trim().parse().map_err(|_| AppError::Validation(format!("seed grid: bad count {count:?}")))?;
    if count == 0 || !(lo.is_finite() && hi.is_finite()) || (log && !(lo > 0.0 && hi > 0.0)) {
        return Err(AppError::Validation(format!("seed grid: invalid axis {spec:?}")));
    }
    let denom = if closed { count.saturating_sub(1).max(1) } else { count } as f64;
    Ok((0..count)
        .map(|k| {
            let s = k as f64 / denom;
            if log {
                lo * (hi / lo).powf(s)
            } else {
                lo + (hi - lo) * s
            }
        })
        .collect())
}

impl FromStr for SeedGrid {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self, AppError> {
        let mut grid = SeedGrid::default();
        for item in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (name, spec) = item
                .split_once('=')
                .ok_or_else(|| AppError::Validation(format!("seed grid: expected name=spec, got {item:?}")))?;
            match name.trim() {
                "lambda" => grid.lambdas = axis(spec, true)?,
                "theta" => grid.thetas = axis(spec, false)?,
                other => return Err(AppError::Validation(format!("seed grid: unknown axis {other:?}"))),
            }
        }
        if grid.lambdas.iter().any(|&l| l.is_nan() || l <= 0.0) {
            return Err(AppError::Validation("seed grid: actions must be positive".into()));
        }
        Ok(grid)
    }
}

impl SeedGrid {
    /// Seeds in action-major order.
    pub fn seeds(&self) -> Vec<PoincarePoint> {
        self.lambdas.iter().flat_map(|&l| self.thetas.iter().map(move |&t| ActionAngle::new(l, t))).collect()
    }
}
