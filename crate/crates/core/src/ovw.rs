//! Expected open-vial wastage from Poisson session demand.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvwQuery {
    /// doses per day
    pub daily_mean: f64,
    pub vial_size: u32,
    pub sessions_per_period: u32,
    pub period_length_days: u32,
}

impl OvwQuery {
    /// Mean doses demanded in one session.
    pub fn session_mean(&self) -> f64 {
        self.daily_mean * self.period_length_days as f64 / self.sessions_per_period.max(1) as f64
    }
}

const MASS: f64 = 1.0 - 1e-12;

/// `E[b*ceil(D/b) - D] / E[b*ceil(D/b)]` for D ~ Poisson(session mean).
pub fn estimate_ovw(query: &OvwQuery) -> f64 {
    let lambda = query.session_mean();
    let b = query.vial_size as u64;
    if b <= 1 || !(lambda > 0.0) {
        return 0.0;
    }
    let ln_lambda = lambda.ln();
    let ln_pmf = |k: u64| -lambda + k as f64 * ln_lambda - ln_gamma(k as f64 + 1.0);
    let opened = |k: u64| (k.div_ceil(b) * b) as f64;

    // walk outwards from the mode so large means do not underflow
    let mode = lambda.floor() as u64;
    // mass, waste, opened doses
    let mut acc = [0.0f64; 3];
    let add = |acc: &mut [f64; 3], k: u64, p: f64| {
        let o = opened(k);
        acc[0] += p;
        acc[1] += p * (o - k as f64);
        acc[2] += p * o;
    };
    let p_mode = ln_pmf(mode).exp();
    add(&mut acc, mode, p_mode);
    let (mut up_k, mut up_p) = (mode, p_mode);
    let (mut down_k, mut down_p) = (mode, p_mode);
    loop {
        // take the heavier neighbour next
        let next_up = up_p * lambda / (up_k + 1) as f64;
        let next_down = if down_k > 0 { down_p * down_k as f64 / lambda } else { 0.0 };
        if next_up <= 0.0 && next_down <= 0.0 {
            break;
        }
        if next_up >= next_down {
            up_k += 1;
            up_p = next_up;
            add(&mut acc, up_k, up_p);
        } else {
            down_k -= 1;
            down_p = next_down;
            add(&mut acc, down_k, down_p);
        }
        if acc[0] >= MASS {
            break;
        }
    }
    if acc[2] <= 0.0 {
        0.0
    } else {
        acc[1] / acc[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(mu: f64, b: u32) -> OvwQuery {
        OvwQuery { daily_mean: mu, vial_size: b, sessions_per_period: 30, period_length_days: 30 }
    }

    #[test]
    fn single_dose_vials_waste_nothing() {
        for mu in [0.0, 0.5, 3.0, 400.0] {
            assert_eq!(estimate_ovw(&q(mu, 1)), 0.0);
        }
        assert_eq!(estimate_ovw(&q(0.0, 10)), 0.0);
    }

    #[test]
    fn hand_value_small_mean() {
        // b = 2, lambda = 1: waste = sum over odd k of p(k), used = sum p(k) * 2*ceil(k/2)
        let lambda: f64 = 1.0;
        let mut w = 0.0;
        let mut u = 0.0;
        let mut p = (-lambda).exp();
        for k in 0..60u64 {
            if k > 0 {
                p *= lambda / k as f64;
            }
            let o = (2 * k.div_ceil(2)) as f64;
            w += p * (o - k as f64);
            u += p * o;
        }
        assert!((estimate_ovw(&q(1.0, 2)) - w / u).abs() < 1e-12);
    }

    #[test]
    fn large_mean_does_not_underflow() {
        let v = estimate_ovw(&q(2000.0, 20));
        assert!(v > 0.0 && v < 0.01, "{v}");
    }

    #[test]
    fn session_count_scales_mean() {
        let a = OvwQuery { daily_mean: 1.0, vial_size: 10, sessions_per_period: 15, period_length_days: 30 };
        assert_eq!(a.session_mean(), 2.0);
        assert_eq!(estimate_ovw(&a), estimate_ovw(&q(2.0, 10)));
    }
}
