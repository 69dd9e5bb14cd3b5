//! Outgoing Green function `G⁺` and its directional Faddeev limits `G±`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::types::Sign;
use crate::error::{Error, Result};
use crate::numerics::special::{bessel_j_seq, hankel_h1_0};
use crate::numerics::gregory_factor;

/// `G⁺(x, k) = −(i/4) H0(|x||k|)`.
pub fn green_g_plus(x: [f64; 2], k: [f64; 2]) -> Result<C64> {
    let r = x[0].hypot(x[1]) * k[0].hypot(k[1]);
    if r == 0.0 {
        return Err(Error::Domain("G+ is singular at x = 0".into()));
    }
    Ok(C64::new(0.0, -0.25) * hankel_h1_0(r)?)
}

/// How the half-circle integral in `G±` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfCircleRule {
    /// Trapezoid with `nodes` points on the full circle aligned with `k`;
    /// the two endpoints of the half circle get half weight.
    Trapezoid { nodes: usize },
    /// Fourier–Bessel expansion, exact to rounding.
    Series,
}

impl Default for HalfCircleRule {
    fn default() -> Self {
        HalfCircleRule::Trapezoid { nodes: 512 }
    }
}

/// `∫ e^{i|k|θ·x} χ₊(±θ·k⊥) dθ` over the unit circle.
pub fn half_circle_integral(x: [f64; 2], k: [f64; 2], sign: Sign, rule: HalfCircleRule) -> Result<C64> {
    let kn = k[0].hypot(k[1]);
    if kn == 0.0 {
        return Err(Error::Domain("|k| must be positive".into()));
    }
    let phi_k = k[1].atan2(k[0]);
    // θ·k⊥ = sin(θ − φ_k) ≥ 0 on [φ_k, φ_k + π]; the minus side is shifted by π.
    let start = match sign {
        Sign::Plus => phi_k,
        Sign::Minus => phi_k + PI,
    };
    match rule {
        HalfCircleRule::Trapezoid { nodes } => {
            if nodes < 4 || nodes % 2 != 0 {
                return Err(Error::InvalidParams("half-circle rule needs an even node count >= 4".into()));
            }
            let w = 2.0 * PI / nodes as f64;
            let mut acc = C64::new(0.0, 0.0);
            let half = nodes / 2;
            for q in 0..=half {
                let theta = start + w * q as f64;
                let weight = w * gregory_factor(q.min(half - q), half);
                let phase = kn * (theta.cos() * x[0] + theta.sin() * x[1]);
                acc += C64::from_polar(weight, phase);
            }
            Ok(acc)
        }
        HalfCircleRule::Series => {
            let a = kn * x[0].hypot(x[1]);
            if a == 0.0 {
                return Ok(C64::new(PI, 0.0));
            }
            let psi = x[1].atan2(x[0]);
            let beta = start - psi;
            let max_order = (a + 40.0 + 4.0 * a.cbrt()) as usize;
            let j = bessel_j_seq(max_order, a)?;
            let mut acc = C64::new(PI * j[0], 0.0);
            let mut m = 1;
            while m <= max_order {
                // i^m for odd m alternates between i and -i.
                let im = if m % 4 == 1 { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
                acc -= im * (4.0 * j[m] * (m as f64 * beta).sin() / m as f64);
                m += 2;
            }
            Ok(acc)
        }
    }
}

/// `−(1/(4πi)) ∫ e^{i|k|θ·x} χ₊(±θ·k⊥) dθ`, the regular part of `G±`.
pub fn green_pm_correction(x: [f64; 2], k: [f64; 2], sign: Sign, rule: HalfCircleRule) -> Result<C64> {
    let integral = half_circle_integral(x, k, sign, rule)?;
    Ok(integral * C64::new(0.0, 1.0 / (4.0 * PI)))
}

/// `G±(x, k) = G⁺(x, k) − (1/(4πi)) ∫ e^{i|k|θ·x} χ₊(±θ·k⊥) dθ`.
pub fn green_g_pm(x: [f64; 2], k: [f64; 2], sign: Sign, rule: HalfCircleRule) -> Result<C64> {
    Ok(green_g_plus(x, k)? + green_pm_correction(x, k, sign, rule)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_plus_at_unit_argument() {
        let g = green_g_plus([0.6, 0.8], [1.0, 0.0]).unwrap();
        let expect = C64::new(0.0, -0.25) * C64::new(0.765_197_686_557_966_6, 0.088_256_964_215_676_96);
        assert!((g - expect).norm() < 1e-13);
        let gm = green_g_plus([-0.6, -0.8], [1.0, 0.0]).unwrap();
        assert_eq!(g, gm);
        assert!(green_g_plus([0.0, 0.0], [1.0, 0.0]).is_err());
    }

    #[test]
    fn g_plus_decays_like_inverse_sqrt() {
        let k = [3.0, 4.0];
        let a = green_g_plus([100.0, 0.0], k).unwrap().norm();
        let b = green_g_plus([400.0, 0.0], k).unwrap().norm();
        assert!((a / b - 2.0).abs() < 1e-3);
    }

    #[test]
    fn correction_at_origin() {
        let k = [2.0, 1.0];
        for rule in [HalfCircleRule::Series, HalfCircleRule::default()] {
            let c = green_pm_correction([0.0, 0.0], k, Sign::Plus, rule).unwrap();
            let expect = -C64::new(PI, 0.0) / C64::new(0.0, 4.0 * PI);
            assert!((c - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn sign_flip_equals_perp_flip() {
        // Reflecting k -> -k turns k⊥ into -k⊥.
        let x = [0.3, -0.7];
        let k = [2.0, 1.5];
        for rule in [HalfCircleRule::Series, HalfCircleRule::Trapezoid { nodes: 256 }] {
            let a = green_g_pm(x, [-k[0], -k[1]], Sign::Plus, rule).unwrap();
            let b = green_g_pm(x, k, Sign::Minus, rule).unwrap();
            // G⁺ depends on |k| only, the half circles coincide.
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn series_matches_fine_trapezoid() {
        let x = [0.4, 0.25];
        let k = [6.0, -3.0];
        for sign in [Sign::Plus, Sign::Minus] {
            let s = half_circle_integral(x, k, sign, HalfCircleRule::Series).unwrap();
            let t = half_circle_integral(x, k, sign, HalfCircleRule::Trapezoid { nodes: 1 << 16 }).unwrap();
            assert!((s - t).norm() < 1e-8, "{s} vs {t}");
        }
    }

    #[test]
    fn endpoint_corrected_rule_is_high_order() {
        let x = [0.4, 0.25];
        let k = [6.0, -3.0];
        let exact = half_circle_integral(x, k, Sign::Plus, HalfCircleRule::Series).unwrap();
        let e1 = (half_circle_integral(x, k, Sign::Plus, HalfCircleRule::Trapezoid { nodes: 64 }).unwrap() - exact).norm();
        let e2 = (half_circle_integral(x, k, Sign::Plus, HalfCircleRule::Trapezoid { nodes: 128 }).unwrap() - exact).norm();
        assert!(e1 / e2 > 30.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn trapezoid_self_convergence_along_k() {
        // For x parallel to k the integrand's odd derivatives vanish at both
        // endpoints and the rule converges spectrally.
        let k = [3.0, 4.0];
        for x in [[0.3, 0.4], [-0.6, -0.8]] {
            let a = green_g_pm(x, k, Sign::Plus, HalfCircleRule::Trapezoid { nodes: 512 }).unwrap();
            let b = green_g_pm(x, k, Sign::Plus, HalfCircleRule::Trapezoid { nodes: 1024 }).unwrap();
            assert!((a - b).norm() < 1e-8);
        }
    }
}
