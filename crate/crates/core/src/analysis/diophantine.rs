#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Constants of the condition `|omega - p/q| >= c q^(-2-beta)`, checked for
/// `1 <= q <= q_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineParams {
    pub c: f64,
    pub beta_exponent: f64,
    pub q_max: u64,
}

impl Default for DiophantineParams {
    fn default() -> Self {
        Self { c: 1e-2, beta_exponent: 0.5, q_max: 10_000 }
    }
}

impl DiophantineParams {
    /// Parameters of the small-twist form `|x - q/p| >= gamma^kappa / p^mu`,
    /// to be checked on `x = omega / (2 pi)`.
    pub fn small_twist(gamma: f64, kappa: f64, mu: f64, p_max: u64) -> Self {
        Self { c: gamma.powf(kappa), beta_exponent: mu - 2.0, q_max: p_max }
    }

    pub fn check(&self, omega: f64) -> DiophantineVerdict {
        diophantine_check(omega, self.c, self.beta_exponent, self.q_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineVerdict {
    pub omega: f64,
    pub c: f64,
    pub beta_exponent: f64,
    pub q_max: u64,
    pub pass: bool,
    pub worst_p: i64,
    pub worst_q: u64,
    /// `min_q q^(2+beta) |omega - p/q|`; the condition holds iff this is `>= c`.
    pub worst_margin: f64,
}

/// Exhaustive check over `q = 1..=q_max` with `p = round(q omega)`.
pub fn diophantine_check(omega: f64, c: f64, beta_exponent: f64, q_max: u64) -> DiophantineVerdict {
    let mut worst = (0i64, 1u64, f64::INFINITY);
    for q in 1..=q_max.max(1) {
        let qf = q as f64;
        let p = (qf * omega).round();
        let margin = qf.powf(1.0 + beta_exponent) * (qf * omega - p).abs();
        if margin < worst.2 {
            worst = (p as i64, q, margin);
        }
    }
    DiophantineVerdict {
        omega,
        c,
        beta_exponent,
        q_max,
        pass: worst.2 >= c,
        worst_p: worst.0,
        worst_q: worst.1,
        worst_margin: worst.2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent brute force over every p in a window, not just the nearest.
    fn brute(omega: f64, c: f64, beta: f64, q_max: u64) -> bool {
        (1..=q_max).all(|q| {
            let qf = q as f64;
            let centre = (qf * omega) as i64;
            (centre - 2..=centre + 2).all(|p| (omega - p as f64 / qf).abs() >= c * qf.powf(-2.0 - beta))
        })
    }

    #[test]
    fn golden_ratio_passes() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let v = diophantine_check(phi, 0.2, 0.5, 1000);
        assert!(v.pass);
        assert!(brute(phi, 0.2, 0.5, 1000));
        // the worst approximant of phi at q = 1 is p = 2
        assert_eq!((v.worst_p, v.worst_q), (2, 1));
    }

    #[test]
    fn rational_fails_with_zero_margin() {
        for c in [1e-6, 1e-2, 1.0] {
            let v = diophantine_check(1.5, c, 0.5, 100);
            assert!(!v.pass);
            assert_eq!((v.worst_p, v.worst_q, v.worst_margin), (3, 2, 0.0));
        }
    }

    #[test]
    fn near_half_fails_at_two() {
        let v = diophantine_check(0.5 + 1e-9, 1e-3, 1.0, 10);
        assert!(!v.pass);
        assert_eq!(v.worst_q, 2);
        assert!(!brute(0.5 + 1e-9, 1e-3, 1.0, 10));
    }

    #[test]
    fn small_twist_form_maps_constants() {
        let p = DiophantineParams::small_twist(0.25, 0.5, 2.5, 50);
        assert_eq!(p.c, 0.5);
        assert_eq!(p.beta_exponent, 0.5);
        assert!(!p.check(0.2).pass);
    }

    proptest::proptest! {
        #[test]
        fn agrees_with_brute_force(omega in 0.0..3.0f64, c in 1e-4..0.3f64, beta in 0.1..1.5f64) {
            let v = diophantine_check(omega, c, beta, 60);
            proptest::prop_assert_eq!(v.pass, brute(omega, c, beta, 60));
        }
    }
}
