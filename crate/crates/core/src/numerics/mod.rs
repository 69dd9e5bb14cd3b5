//! Special functions, circle discretization, Fourier tools and dense solvers.

pub mod circle;
pub mod fft2;
pub mod linalg;
pub mod special;

pub use circle::{cauchy_project, circle_fourier, CircleFunction, CircleGrid, Direction, Side};
pub use special::{bessel_j, bessel_y, hankel_h1_0};

/// Heaviside step with `χ₊(0) = 1`.
pub fn chi_plus(s: f64) -> f64 {
    if s >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Relative size below which the argument of `χ₊` is treated as sitting on
/// its jump.
pub const CHI_JUMP_TOL: f64 = 1e-12;

/// Quadrature weight factor for `χ₊(s)` at a grid node: the jump nodes get
/// half weight, the trapezoid-consistent value for a step function.
pub fn chi_weight(s: f64) -> f64 {
    if s.abs() <= CHI_JUMP_TOL {
        0.5
    } else {
        chi_plus(s)
    }
}

/// Real value of `±i(λ/λ'' − λ''/λ)` for nodes `j`, `q` of a circle grid of
/// size `n`; equals `∓2 sin(φ_j − φ_q)`, computed from the integer offset so
/// that jump nodes give an exact zero.
pub fn chi_argument(j: usize, q: usize, n: usize, sign: f64) -> f64 {
    let d = (j + n - q) % n;
    if d == 0 || 2 * d == n {
        return 0.0;
    }
    let t = 2.0 * std::f64::consts::PI * d as f64 / n as f64;
    -2.0 * sign * t.sin()
}

/// Gregory endpoint factors for the trapezoid rule on an arc of
/// `intervals` steps; node `dist` steps from the nearer end. Higher
/// order as the arc allows.
pub fn gregory_factor(dist: usize, intervals: usize) -> f64 {
    const G5: [f64; 5] = [95.0 / 288.0, 317.0 / 240.0, 23.0 / 30.0, 793.0 / 720.0, 157.0 / 160.0];
    const G3: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    let table: &[f64] = if intervals >= 12 {
        &G5
    } else if intervals >= 6 {
        &G3
    } else {
        &[0.5]
    };
    table.get(dist).copied().unwrap_or(1.0)
}

/// Quadrature factor of node `q` for `χ₊(±i(λ_j/λ_q − λ_q/λ_j))` on a grid
/// of even size `n`: zero off the arc, Gregory-corrected on it. The arc
/// ends sit on nodes `j` and `j + n/2`.
pub fn arc_weight(j: usize, q: usize, n: usize, sign: f64) -> f64 {
    if chi_argument(j, q, n, sign) < 0.0 {
        return 0.0;
    }
    let half = n / 2;
    let e = ((j + n - q) % n) % half;
    gregory_factor(e.min(half - e), half)
}

/// Factor of node `q` of `theta` for the half circle
/// `{θ : sign·sin(θ − angle) ≥ 0}`; Gregory-corrected when `angle` is a
/// node, plain half weights at the ends otherwise.
pub fn half_circle_weight(theta: CircleGrid, q: usize, angle: f64, sign: f64) -> f64 {
    let n = theta.size();
    let t = angle / theta.weight();
    if (t - t.round()).abs() < 1e-9 && n % 2 == 0 {
        let a = (t.round() as i64).rem_euclid(n as i64) as usize;
        return arc_weight(a, q, n, sign);
    }
    let s = sign * (theta.angle(q) - angle).sin();
    chi_weight(if s.abs() < CHI_JUMP_TOL { 0.0 } else { s })
}
