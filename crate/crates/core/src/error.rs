use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("coefficient index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("period refinement did not converge (residual {residual:e})")]
    PeriodNotConverged { residual: f64 },
    #[error("tolerance {tol:e} not achievable with the maximum grid size")]
    ToleranceUnachievable { tol: f64 },
    #[error("action-angle chart undefined at the origin")]
    OriginChart,
    #[error("angle inversion did not converge (best residual {residual:e})")]
    AngleNotConverged { residual: f64 },
    #[error("step size underflow at t = {t} (x = {x:e}, y = {y:e}); possible blow-up")]
    StepUnderflow { t: f64, x: f64, y: f64 },
    #[error("trajectory escaped at t = {t} (x = {x:e}, y = {y:e})")]
    Escaped { t: f64, x: f64, y: f64 },
    #[error("impulse time {t_impulse} lies inside the segment ({t_start}, {t_end})")]
    ImpulseInSegment { t_start: f64, t_end: f64, t_impulse: f64 },
    #[error("trajectory came within action {lambda:e} of the origin at t = {t}")]
    OriginProximity { t: f64, lambda: f64 },
    #[error("image curve is not star-shaped around the origin")]
    NotStarShaped,
    #[error("orbit is resonant or island-trapped: angle gap {gap:e} exceeds {limit:e}")]
    Resonant { gap: f64, limit: f64 },
    #[error("rotation number {omega} fails the Diophantine condition at q = {q}")]
    NotDiophantine { omega: f64, q: u64 },
    #[error("least-squares fit failed: {0}")]
    FitFailed(String),
}

pub type Result<T> = core::result::Result<T, Error>;
