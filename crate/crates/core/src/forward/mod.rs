//! Forward scattering: Green functions, Lippmann–Schwinger solves, the
//! scattering amplitude `f` and the direct Faddeev amplitudes `h±`.

mod green;
mod lippmann;
mod types;

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

pub use green::{green_g_plus, green_g_pm, green_pm_correction, half_circle_integral, HalfCircleRule};
pub use lippmann::{truncated_kernel_hat, GreenChoice, LsOptions, LsSolver, SupportSolution};
pub use types::{Sign, TorusKernel, WaveParams};

use crate::error::{Error, Result};
use crate::numerics::CircleGrid;
use crate::potentials::MatrixField;

/// Which Green kernel a standalone solve uses; `Pm` discretizes the
/// half-circle term on `theta_nodes` equispaced angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GreenKind {
    Plus,
    Pm { theta_nodes: usize },
}

/// Wave vectors `√E (cos φ_j, sin φ_j)` of the circle grid nodes.
pub fn torus_momenta(grid: CircleGrid, energy: f64) -> Vec<[f64; 2]> {
    let k = energy.sqrt();
    (0..grid.size()).map(|j| [k * grid.angle(j).cos(), k * grid.angle(j).sin()]).collect()
}

fn wrap_field(v: &MatrixField, values: Vec<Mat<C64>>) -> Result<MatrixField> {
    let n = v.channels();
    let mut flat = Vec::with_capacity(values.len() * n * n);
    for m in &values {
        for a in 0..n {
            for b in 0..n {
                flat.push(m[(a, b)]);
            }
        }
    }
    MatrixField::new(n, v.nx(), v.half_width(), v.half_width() * std::f64::consts::SQRT_2, flat)
}

/// Solves the Lippmann–Schwinger equation for `ψ(·, k)` and returns
/// `μ = e^{−ikx} ψ` on the full grid of `v`.
pub fn solve_lippmann_schwinger(v: &MatrixField, params: WaveParams, greens: GreenKind, options: LsOptions) -> Result<MatrixField> {
    let solver = LsSolver::new(v, params.energy, options)?;
    let green = match greens {
        GreenKind::Plus => GreenChoice::Plus,
        GreenKind::Pm { theta_nodes } => GreenChoice::Pm { sign: params.sign, angle: params.angle, theta: CircleGrid::new(theta_nodes)? },
    };
    let k = params.momentum();
    let sol = solver.solve(k, green)?;
    let psi = solver.evaluate_on_grid(&sol, green);
    let mut mu = Vec::with_capacity(psi.len());
    for i1 in 0..v.nx() {
        for i2 in 0..v.nx() {
            let p = v.point(i1, i2);
            let e = C64::from_polar(1.0, -(k[0] * p[0] + k[1] * p[1]));
            mu.push(&psi[i1 * v.nx() + i2] * faer::Scale(e));
        }
    }
    wrap_field(v, mu)
}

/// `ψ¹(·, k, l) = e^{ilx} I + ∫ G_sign(x−y, k) V₁ ψ¹ dy` on the grid of `v1`,
/// the half-circle term discretized on `theta`.
pub fn psi1_two_wave(
    v1: &MatrixField,
    energy: f64,
    k_angle: f64,
    l: [f64; 2],
    sign: Sign,
    theta: CircleGrid,
    options: LsOptions,
) -> Result<MatrixField> {
    if ((l[0] * l[0] + l[1] * l[1]) - energy).abs() > 1e-9 * energy {
        return Err(Error::InvalidParams("l must satisfy l² = E".into()));
    }
    let solver = LsSolver::new(v1, energy, options)?;
    let green = GreenChoice::Pm { sign, angle: k_angle, theta };
    let sol = solver.solve(l, green)?;
    wrap_field(v1, solver.evaluate_on_grid(&sol, green))
}

/// Outgoing solutions `ψ⁺(·, k_j)` for every node of `grid`.
pub fn outgoing_solutions(solver: &LsSolver, grid: CircleGrid) -> Result<Vec<SupportSolution>> {
    solver.solve_plus_many(&torus_momenta(grid, solver.energy()))
}

/// `f(λ_j, λ_l) = (2π)⁻² ∫ e^{−il·x} V ψ⁺(x, k_j) dx` on the torus grid.
pub fn scattering_amplitude(v: &MatrixField, energy: f64, grid: CircleGrid, options: LsOptions) -> Result<TorusKernel> {
    let solver = LsSolver::new(v, energy, options)?;
    let sols = outgoing_solutions(&solver, grid)?;
    amplitude_kernel(&solver, &sols, grid)
}

/// Torus kernel from solutions at every incident node.
pub fn amplitude_kernel(solver: &LsSolver, sols: &[SupportSolution], grid: CircleGrid) -> Result<TorusKernel> {
    let dirs = torus_momenta(grid, solver.energy());
    let rows: Vec<Vec<Mat<C64>>> = sols.par_iter().map(|s| solver.amplitudes(s, &dirs)).collect();
    TorusKernel::from_rows(grid, solver.channels(), solver.energy(), rows)
}

/// Solutions `ψ±(·, k_j)` of the equation with kernel `G±`, the
/// half-circle term discretized on the torus grid itself.
pub fn faddeev_solutions(solver: &LsSolver, sign: Sign, grid: CircleGrid) -> Result<Vec<SupportSolution>> {
    let dirs = torus_momenta(grid, solver.energy());
    dirs.par_iter()
        .enumerate()
        .map(|(j, &k)| solver.solve(k, GreenChoice::Pm { sign, angle: grid.angle(j), theta: grid }))
        .collect()
}

/// `h±(λ_j, λ_l)` computed directly from `ψ±`.
pub fn h_pm_direct(v: &MatrixField, energy: f64, sign: Sign, grid: CircleGrid, options: LsOptions) -> Result<TorusKernel> {
    let solver = LsSolver::new(v, energy, options)?;
    let sols = faddeev_solutions(&solver, sign, grid)?;
    amplitude_kernel(&solver, &sols, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{make_test_potential, PotentialKind, PotentialSpec};

    fn fixture(n: usize, nx: usize, amplitude: f64) -> MatrixField {
        make_test_potential(&PotentialSpec {
            kind: PotentialKind::SmoothCompact { amplitude },
            channels: n,
            support_radius: 1.0,
            half_width: 1.5,
            nx,
        })
        .unwrap()
    }

    #[test]
    fn kernel_transform_matches_quadrature() {
        // ∫_{|x|<R} G⁺ e^{−iξx} = −(iπ/2) ∫_0^R H0(kr) J0(sr) r dr, checked by
        // a graded midpoint rule that resolves the log singularity.
        let (k, radius) = (5.0, 3.0);
        for &s in &[0.0, 1.3, 4.0, 5.0, 5.00001, 7.7, 20.0] {
            let closed = truncated_kernel_hat(s, k, radius).unwrap();
            let mut acc = C64::new(0.0, 0.0);
            let panels = 200_000;
            for i in 0..panels {
                let t = (i as f64 + 0.5) / panels as f64;
                // r = R t², dr = 2 R t dt
                let r = radius * t * t;
                let h = crate::numerics::special::hankel_h1_0(k * r).unwrap();
                let j0 = if s == 0.0 { 1.0 } else { crate::numerics::special::bessel_01(s * r).unwrap()[0] };
                acc += h * j0 * r * 2.0 * radius * t / panels as f64;
            }
            let quad = C64::new(0.0, -std::f64::consts::PI / 2.0) * acc;
            assert!((closed - quad).norm() < 1e-6 * (1.0 + quad.norm()), "s={s}: {closed} vs {quad}");
        }
    }

    #[test]
    fn zero_potential_gives_identity() {
        let v = fixture(2, 16, 0.0);
        let mu = solve_lippmann_schwinger(&v, WaveParams::new(50.0, 0.3, Sign::Plus).unwrap(), GreenKind::Plus, LsOptions::default()).unwrap();
        for i1 in 0..16 {
            for i2 in 0..16 {
                let m = mu.at(i1, i2);
                assert!((m - Mat::<C64>::identity(2, 2)).norm_max() < 1e-15);
            }
        }
        let grid = CircleGrid::new(8).unwrap();
        assert_eq!(scattering_amplitude(&v, 50.0, grid, LsOptions::default()).unwrap().max_norm(), 0.0);
        assert_eq!(h_pm_direct(&v, 50.0, Sign::Minus, grid, LsOptions::default()).unwrap().max_norm(), 0.0);
    }

    #[test]
    fn residual_is_small_for_both_kernels() {
        let v = fixture(2, 32, 1.0);
        let solver = LsSolver::new(&v, 60.0, LsOptions::default()).unwrap();
        let k = [60f64.sqrt(), 0.0];
        let grid = CircleGrid::new(16).unwrap();
        for green in [GreenChoice::Plus, GreenChoice::Pm { sign: Sign::Plus, angle: 0.0, theta: grid }] {
            let sol = solver.solve(k, green).unwrap();
            assert!(sol.residual < 1e-10, "{}", sol.residual);
        }
    }

    #[test]
    fn dense_and_gmres_paths_agree() {
        let v = fixture(2, 32, 1.0);
        let dense = LsSolver::new(&v, 40.0, LsOptions::default()).unwrap();
        let iterative = LsSolver::new(&v, 40.0, LsOptions { dense_limit: 0, ..LsOptions::default() }).unwrap();
        let k = [0.0, 40f64.sqrt()];
        let a = dense.solve(k, GreenChoice::Plus).unwrap();
        let b = iterative.solve(k, GreenChoice::Plus).unwrap();
        let diff = a.psi.iter().zip(&b.psi).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn off_grid_evaluation_matches_grid_values() {
        let v = fixture(1, 32, 1.0);
        let solver = LsSolver::new(&v, 30.0, LsOptions::default()).unwrap();
        let grid = CircleGrid::new(8).unwrap();
        let green = GreenChoice::Pm { sign: Sign::Minus, angle: 0.7, theta: grid };
        let sol = solver.solve([30f64.sqrt() * 0.7f64.cos(), 30f64.sqrt() * 0.7f64.sin()], green).unwrap();
        let on_grid = solver.evaluate_on_grid(&sol, green);
        let pts = [v.point(5, 9), v.point(16, 16), v.point(30, 2)];
        let off = solver.evaluate(&sol, green, &pts).unwrap();
        for (p, m) in [(5, 9), (16, 16), (30, 2)].iter().zip(&off) {
            assert!((&on_grid[p.0 * 32 + p.1] - m).norm_max() < 1e-11);
        }
    }

    #[test]
    fn born_linearity_of_mu() {
        let params = WaveParams::new(80.0, 0.4, Sign::Plus).unwrap();
        let dev = |a: f64| {
            let mu = solve_lippmann_schwinger(&fixture(1, 32, a), params, GreenKind::Plus, LsOptions::default()).unwrap();
            let mut worst = 0.0_f64;
            for i1 in 0..32 {
                for i2 in 0..32 {
                    worst = worst.max((mu.entry(i1, i2, 0, 0) - 1.0).norm());
                }
            }
            worst
        };
        let (d1, d2) = (dev(0.02), dev(0.01));
        assert!((d1 / d2 - 2.0).abs() < 0.2);
    }

    #[test]
    fn two_wave_reduces_to_faddeev_solution() {
        let v = fixture(2, 16, 1.0);
        let e: f64 = 30.0;
        let grid = CircleGrid::new(8).unwrap();
        let k = [e.sqrt() * grid.angle(1).cos(), e.sqrt() * grid.angle(1).sin()];
        let a = psi1_two_wave(&v, e, grid.angle(1), k, Sign::Minus, grid, LsOptions::default()).unwrap();
        let mu = solve_lippmann_schwinger(&v, WaveParams::new(e, grid.angle(1), Sign::Minus).unwrap(), GreenKind::Pm { theta_nodes: 8 }, LsOptions::default()).unwrap();
        for i1 in 0..16 {
            for i2 in 0..16 {
                let p = v.point(i1, i2);
                let ph = C64::from_polar(1.0, k[0] * p[0] + k[1] * p[1]);
                assert!((a.at(i1, i2) - &mu.at(i1, i2) * faer::Scale(ph)).norm_max() < 1e-12);
            }
        }
        let zero = fixture(2, 16, 0.0);
        let l = [0.0, e.sqrt()];
        let b = psi1_two_wave(&zero, e, 0.0, l, Sign::Plus, grid, LsOptions::default()).unwrap();
        let p = zero.point(3, 11);
        assert!((b.entry(3, 11, 0, 0) - C64::from_polar(1.0, l[1] * p[1])).norm() < 1e-15);
    }
}
