//! Polar finite-difference DtN simulator.
//!
//! The interior problem on `[0, R]` is eliminated radially per Fourier block
//! (Riccati sweep on the conservative three-point stencil, half-cell flux at
//! `r = R`). Only the difference against an analytically known reference
//! `diag(Λ)` is taken from the finite-difference solve. The scheme's error
//! is even in `h`, so solves on `N_r`, `2N_r` and `4N_r` nodes are combined
//! by Richardson extrapolation; the fourth-order results at `N_r` and `2N_r`
//! feed the self-convergence check. When `supp V` sits inside a smaller disk,
//! the map at `r = R` is carried to `r = 1` with exact Bessel solutions.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use super::{log_derivative_checked, modal_to_nodal, BoundaryKernel};
use crate::error::{Error, Result};
use crate::numerics::linalg::{Lu, DEFAULT_CONDITION_LIMIT};
use crate::numerics::special::{bessel_j_seq, bessel_y_seq, derivative_seq};
use crate::numerics::CircleGrid;
use crate::potentials::PotentialSampler;

#[derive(Debug, Clone, PartialEq)]
pub struct DtnOptions {
    pub radial_nodes: usize,
    /// Reference diagonal `Λ`; empty means zero.
    pub reference: Vec<f64>,
    /// Allowed block max-norm change of the kernel when `N_r` doubles.
    pub tolerance: f64,
    pub condition_limit: f64,
    /// Candidate interface radii scanned in `[ρ_s, 1]`.
    pub interface_candidates: usize,
    pub richardson: bool,
}

impl Default for DtnOptions {
    fn default() -> Self {
        Self {
            radial_nodes: 256,
            reference: Vec::new(),
            tolerance: 1e-3,
            condition_limit: DEFAULT_CONDITION_LIMIT,
            interface_candidates: 16,
            richardson: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DtnSolution {
    /// `Φ − Φ₀` on the boundary nodes.
    pub difference: BoundaryKernel,
    /// Block max-norm change of the kernel when `N_r` doubles.
    pub self_convergence: f64,
    pub interface_radius: f64,
}

/// `Φ(E)` for the potential sampled by `v`, default options.
pub fn dtn_numeric(v: &dyn PotentialSampler, energy: f64, boundary_nodes: usize, radial_nodes: usize) -> Result<BoundaryKernel> {
    let sol = dtn_scattering_difference(v, energy, boundary_nodes, &DtnOptions { radial_nodes, ..DtnOptions::default() })?;
    let phi0 = super::dtn_zero_disk(energy, boundary_nodes, v.channels())?;
    phi0.combine(C64::new(1.0, 0.0), &sol.difference, C64::new(1.0, 0.0))
}

struct Layout {
    grid: CircleGrid,
    channels: usize,
    energy: f64,
}

impl Layout {
    fn dim(&self) -> usize {
        self.grid.size() * self.channels
    }

    fn order(&self, row: usize) -> usize {
        self.grid.mode(row / self.channels).unsigned_abs() as usize
    }

    fn resonance(&self, detail: String) -> Error {
        Error::ResonantEnergy { energy: self.energy, detail }
    }
}

/// `Φ − Φ₀` with diagnostics.
pub fn dtn_scattering_difference(v: &dyn PotentialSampler, energy: f64, boundary_nodes: usize, options: &DtnOptions) -> Result<DtnSolution> {
    let n = v.channels();
    let grid = CircleGrid::new(boundary_nodes)?;
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::InvalidParams(format!("energy must be positive, got {energy}")));
    }
    if options.radial_nodes < 4 {
        return Err(Error::InvalidParams("need at least 4 radial nodes".into()));
    }
    let rho = v.support_radius();
    if rho > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("support radius {rho} exceeds the unit disk")));
    }
    let reference = if options.reference.is_empty() { vec![0.0; n] } else { options.reference.clone() };
    if reference.len() != n {
        return Err(Error::InvalidParams(format!("reference has {} entries for {n} channels", reference.len())));
    }
    if let Some(&bad) = reference.iter().find(|&&c| !(energy - c > 0.0)) {
        return Err(Error::InvalidParams(format!("E = {energy} must exceed reference entry {bad}")));
    }
    let kappa: Vec<f64> = reference.iter().map(|c| (energy - c).sqrt()).collect();
    let layout = Layout { grid, channels: n, energy };
    let max_order = boundary_nodes / 2;

    let radius = interface_radius(rho, &kappa, max_order, options.interface_candidates)?;

    // Exact reference flux at r = R and its finite-difference counterpart.
    let dim = layout.dim();
    let mut exact = vec![0.0; dim];
    for (row, z) in exact.iter_mut().enumerate() {
        let c = row % n;
        *z = kappa[c] * log_derivative_checked(layout.order(row), kappa[c] * radius, energy)?;
    }
    let corrected = |nodes: usize| flux_difference(v, &layout, &reference, radius, nodes, options.condition_limit);
    let step = |nodes: usize| radius / (nodes as f64 - 0.5);
    let blend = |fine: &Mat<C64>, coarse: &Mat<C64>, ratio: f64| {
        // Eliminates an error term scaling like h^p, ratio = (h_coarse/h_fine)^p.
        (fine * faer::Scale(C64::new(ratio, 0.0)) - coarse) * faer::Scale(C64::new(1.0 / (ratio - 1.0), 0.0))
    };
    let nr = options.radial_nodes;
    let (lower, upper, best) = if options.richardson {
        let (z1, z2, z4) = (corrected(nr)?, corrected(2 * nr)?, corrected(4 * nr)?);
        let q1 = (step(nr) / step(2 * nr)).powi(2);
        let q2 = (step(2 * nr) / step(4 * nr)).powi(2);
        let (r1, r2) = (blend(&z2, &z1, q1), blend(&z4, &z2, q2));
        let sixth = blend(&r2, &r1, (step(nr) / step(2 * nr)).powi(4));
        (r1, r2, sixth)
    } else {
        let (z1, z2) = (corrected(nr)?, corrected(2 * nr)?);
        let z = z2.clone();
        (z1, z2, z)
    };

    let assemble = |delta: &Mat<C64>| -> Result<Mat<C64>> {
        let mut z = delta.clone();
        for row in 0..dim {
            z[(row, row)] += C64::new(exact[row], 0.0);
        }
        let mut phi = transfer(&layout, &kappa, radius, z, options.condition_limit)?;
        for row in 0..dim {
            let m = layout.order(row);
            phi[(row, row)] -= C64::new(super::disk_symbol(m, energy)?, 0.0);
        }
        Ok(phi)
    };
    let change = modal_to_nodal(grid, n, energy, &(&assemble(&upper)? - &assemble(&lower)?))?.max_norm();
    if !(change <= options.tolerance) {
        return Err(Error::GridTooCoarse { defect: change, tolerance: options.tolerance });
    }
    let modal = assemble(&best)?;
    Ok(DtnSolution {
        difference: modal_to_nodal(grid, n, energy, &modal)?,
        self_convergence: change,
        interface_radius: radius,
    })
}

/// Normalized distance of `J_m(x)` from a zero, `|J|/√(J² + J'²)`.
fn zero_margin(order: usize, x: f64) -> Result<f64> {
    let l = crate::numerics::special::bessel_j_log_derivative(order, x)?;
    Ok(if l.is_finite() { 1.0 / (1.0 + l * l).sqrt() } else { 0.0 })
}

/// Interface radius in `[ρ_s, 1]` keeping every reference Bessel function
/// farthest from a zero.
fn interface_radius(rho: f64, kappa: &[f64], max_order: usize, candidates: usize) -> Result<f64> {
    if rho >= 1.0 - 1e-9 || candidates < 2 {
        return Ok(1.0);
    }
    let lo = rho.max(1e-3);
    let mut best = (1.0, -1.0);
    for t in 0..candidates {
        let r = lo + (1.0 - lo) * t as f64 / (candidates - 1) as f64;
        let mut margin = f64::INFINITY;
        for &k in kappa {
            for m in 0..=max_order {
                margin = margin.min(zero_margin(m, k * r)?);
            }
        }
        if margin > best.1 {
            best = (r, margin);
        }
    }
    Ok(best.0)
}

/// Fourier coefficients `v̂_k = N⁻¹ Σ_i V(r, θ_i) e^{−ikθ_i}`, FFT order,
/// each an `n×n` block.
fn angular_coefficients(v: &dyn PotentialSampler, grid: CircleGrid, r: f64, fft: &dyn rustfft::Fft<f64>) -> Vec<Mat<C64>> {
    let nb = grid.size();
    let n = v.channels();
    let samples: Vec<Mat<C64>> = (0..nb)
        .map(|i| {
            let t = grid.angle(i);
            v.sample([r * t.cos(), r * t.sin()])
        })
        .collect();
    let mut out = vec![Mat::<C64>::zeros(n, n); nb];
    let mut buf = vec![C64::new(0.0, 0.0); nb];
    for a in 0..n {
        for b in 0..n {
            for (i, s) in samples.iter().enumerate() {
                buf[i] = s[(a, b)];
            }
            fft.process(&mut buf);
            for (k, val) in buf.iter().enumerate() {
                out[k][(a, b)] = val / nb as f64;
            }
        }
    }
    out
}

/// Circulant coupling `[v̂_{p−q}]` of the angular coefficients.
fn coupling_block(layout: &Layout, coeffs: &[Mat<C64>]) -> Mat<C64> {
    let n = layout.channels;
    let nb = layout.grid.size();
    let mut m = Mat::<C64>::zeros(layout.dim(), layout.dim());
    for p in 0..nb {
        for q in 0..nb {
            let vk = &coeffs[(p + nb - q) % nb];
            for a in 0..n {
                for b in 0..n {
                    m[(p * n + a, q * n + b)] = vk[(a, b)];
                }
            }
        }
    }
    m
}

/// Modal block `diag(m²/r² − E) + [v̂_{p−q}]` at one radius.
fn potential_block(layout: &Layout, coeffs: &[Mat<C64>], r: f64, diagonal_shift: f64) -> Mat<C64> {
    let mut m = coupling_block(layout, coeffs);
    for row in 0..layout.dim() {
        let mm = layout.order(row) as f64;
        m[(row, row)] += C64::new(mm * mm / (r * r) - layout.energy + diagonal_shift, 0.0);
    }
    m
}

/// Half-cell flux `R u'(R) ≈ r_{N−½}(u_N − u_{N−1})/h + (h/2) R q(R) u_N`
/// of the potential minus the same flux of the diagonal reference medium.
/// The elimination carries `D_j = T_j − T⁰_j` directly through
/// `D_j = −T_j (P_j + l_j D_{j−1}) (B_j)⁻¹`, so the difference vanishes
/// identically when the potential equals the reference.
/// Samples at the outer node are taken just inside the disk.
fn flux_difference(v: &dyn PotentialSampler, layout: &Layout, reference: &[f64], radius: f64, nodes: usize, limit: f64) -> Result<Mat<C64>> {
    let n = layout.channels;
    let dim = layout.dim();
    let h = radius / (nodes as f64 - 0.5);
    let fft = FftPlanner::new().plan_fft_forward(layout.grid.size());
    let coupling = |coeffs: &[Mat<C64>]| {
        let mut p = coupling_block(layout, coeffs);
        for row in 0..dim {
            p[(row, row)] -= C64::new(reference[row % n], 0.0);
        }
        p
    };
    let mut t = Mat::<C64>::zeros(dim, dim);
    let mut d = Mat::<C64>::zeros(dim, dim);
    let mut t0 = vec![0.0; dim];
    for j in 1..nodes {
        let jf = j as f64;
        let r = (jf - 0.5) * h;
        let coeffs = angular_coefficients(v, layout.grid, r, fft.as_ref());
        let mut s = potential_block(layout, &coeffs, r, 2.0 / (h * h));
        let lower = -(jf - 1.0) / ((jf - 0.5) * h * h);
        let upper = -jf / ((jf - 0.5) * h * h);
        if j > 1 {
            s += &t * faer::Scale(C64::new(lower, 0.0));
        }
        let lu = Lu::new(&s, "radial elimination", limit).map_err(|e| match e {
            Error::NearSingular { condition, .. } => layout.resonance(format!("radial elimination at r = {r:.4}, condition {condition:.3e}")),
            other => other,
        })?;
        t = lu.solve(&Mat::<C64>::identity(dim, dim)) * faer::Scale(C64::new(-upper, 0.0));
        let mut rhs = coupling(&coeffs);
        if j > 1 {
            rhs += &d * faer::Scale(C64::new(lower, 0.0));
        }
        d = &t * &rhs;
        for col in 0..dim {
            let m2 = (layout.order(col) * layout.order(col)) as f64;
            let b = 2.0 / (h * h) + m2 / (r * r) + reference[col % n] - layout.energy + lower * t0[col];
            if b == 0.0 {
                return Err(layout.resonance(format!("reference elimination at r = {r:.4}")));
            }
            for row in 0..dim {
                d[(row, col)] = -d[(row, col)] / b;
            }
            t0[col] = -upper / b;
        }
    }
    let edge = radius * (1.0 - 1e-10);
    let coeffs = angular_coefficients(v, layout.grid, edge, fft.as_ref());
    let outer = (nodes as f64 - 1.0) * h;
    let mut z = d * faer::Scale(C64::new(-outer / (radius * h), 0.0));
    z += coupling(&coeffs) * faer::Scale(C64::new(h / 2.0, 0.0));
    Ok(z)
}

#[cfg(test)]
/// Scalar flux of the same scheme for `−u'' − u'/r + (m²/r² + Λ − E)u`.
fn reference_flux(order: usize, shift: f64, energy: f64, radius: f64, nodes: usize) -> f64 {
    let h = radius / (nodes as f64 - 0.5);
    let m2 = (order * order) as f64;
    let mut t = 0.0;
    for j in 1..nodes {
        let jf = j as f64;
        let r = (jf - 0.5) * h;
        let d = 2.0 / (h * h) + m2 / (r * r) + shift - energy;
        let lower = -(jf - 1.0) / ((jf - 0.5) * h * h);
        let upper = -jf / ((jf - 0.5) * h * h);
        t = -upper / (d + lower * t);
    }
    let outer = (nodes as f64 - 1.0) * h;
    outer * (1.0 - t) / (radius * h) + 0.5 * h * (m2 / (radius * radius) + shift - energy)
}

/// Carries the flux map `Z` at `r = R` to the unit circle through the
/// potential-free annulus of each channel's reference medium.
fn transfer(layout: &Layout, kappa: &[f64], radius: f64, z: Mat<C64>, limit: f64) -> Result<Mat<C64>> {
    if radius >= 1.0 {
        return Ok(z);
    }
    let n = layout.channels;
    let dim = layout.dim();
    let max_order = layout.grid.size() / 2;
    // Fundamental pair with p(R) = 1, p'(R) = 0 and q(R) = 0, q'(R) = 1.
    let mut coef = Vec::with_capacity(n);
    for &k in kappa {
        let (x0, x1) = (k * radius, k);
        let (j0, y0) = (bessel_j_seq(max_order + 1, x0)?, bessel_y_seq(max_order + 1, x0)?);
        let (j1, y1) = (bessel_j_seq(max_order + 1, x1)?, bessel_y_seq(max_order + 1, x1)?);
        let (dj0, dy0, dj1, dy1) = (derivative_seq(&j0, x0), derivative_seq(&y0, x0), derivative_seq(&j1, x1), derivative_seq(&y1, x1));
        let s = PI * x0 / 2.0;
        let per_mode: Vec<[f64; 4]> = (0..=max_order)
            .map(|m| {
                [
                    s * (dy0[m] * j1[m] - dj0[m] * y1[m]),
                    k * s * (dy0[m] * dj1[m] - dj0[m] * dy1[m]),
                    s / k * (j0[m] * y1[m] - y0[m] * j1[m]),
                    s * (j0[m] * dy1[m] - y0[m] * dj1[m]),
                ]
            })
            .collect();
        if per_mode.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("annulus transfer overflows; reduce N_b".into()));
        }
        coef.push(per_mode);
    }
    let pick = |row: usize, which: usize| coef[row % n][layout.order(row)][which];
    // Φ (P + Q Z) = P' + Q' Z, solved through the transpose.
    let mut lhs = Mat::<C64>::zeros(dim, dim);
    let mut rhs = Mat::<C64>::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            lhs[(c, r)] = z[(r, c)] * pick(r, 2);
            rhs[(c, r)] = z[(r, c)] * pick(r, 3);
        }
        lhs[(r, r)] += C64::new(pick(r, 0), 0.0);
        rhs[(r, r)] += C64::new(pick(r, 1), 0.0);
    }
    let lu = Lu::new(&lhs, "annulus transfer", limit).map_err(|e| match e {
        Error::NearSingular { condition, .. } => layout.resonance(format!("Dirichlet problem near-singular, condition {condition:.3e}")),
        other => other,
    })?;
    Ok(lu.solve(&rhs).transpose().to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtn::{dtn_background_disk, dtn_zero_disk, kernel_difference};
    use crate::potentials::{FixtureSampler, PotentialKind, PotentialSpec};

    fn sampler(kind: PotentialKind, n: usize, rho: f64) -> FixtureSampler {
        FixtureSampler::new(&PotentialSpec { kind, channels: n, support_radius: rho, half_width: 1.5, nx: 64 }).unwrap()
    }

    #[test]
    fn reference_flux_converges_to_bessel_log_derivative() {
        let (e, r): (f64, f64) = (100.0, 1.0);
        let exact = e.sqrt() * crate::numerics::special::bessel_j_log_derivative(3, e.sqrt() * r).unwrap();
        let e1 = (reference_flux(3, 0.0, e, r, 128) - exact).abs();
        let e2 = (reference_flux(3, 0.0, e, r, 256) - exact).abs();
        assert!(e2 < 0.1 && (e1 / e2 - 4.0).abs() < 0.3, "{e1} {e2}");
    }

    #[test]
    fn zero_potential_matches_analytic_map() {
        let v = sampler(PotentialKind::SmoothCompact { amplitude: 0.0 }, 1, 1.0);
        let phi = dtn_numeric(&v, 100.0, 64, 256).unwrap();
        let phi0 = dtn_zero_disk(100.0, 64, 1).unwrap();
        assert!(kernel_difference(&phi, &phi0).unwrap().max_norm() < 1e-4);
    }

    #[test]
    fn diagonal_constant_gives_shifted_energy_maps() {
        let v = sampler(PotentialKind::DiagonalConstantOnD { diag: vec![3.0, -2.0] }, 2, 1.0);
        let sol = dtn_scattering_difference(&v, 60.0, 32, &DtnOptions::default()).unwrap();
        let phi1 = dtn_background_disk(60.0, 32, 2, &[3.0, -2.0]).unwrap();
        let expect = kernel_difference(&phi1, &dtn_zero_disk(60.0, 32, 2).unwrap()).unwrap();
        let err = kernel_difference(&sol.difference, &expect).unwrap().max_norm();
        assert!(err < 1e-4, "{err}");
        for i in 0..32 {
            for j in 0..32 {
                assert!(sol.difference.entry(i, j, 0, 1).norm() < 1e-12);
            }
        }
        // The same potential used as reference collapses the difference to the analytic one.
        let opts = DtnOptions { reference: vec![3.0, -2.0], ..DtnOptions::default() };
        let exact = dtn_scattering_difference(&v, 60.0, 32, &opts).unwrap();
        let gap = kernel_difference(&exact.difference, &expect).unwrap().max_norm();
        assert!(gap < 1e-8, "{gap}");
    }

    #[test]
    fn hermitian_potential_gives_self_adjoint_difference() {
        let v = sampler(PotentialKind::HermitianRandomSmooth { amplitude: 1.0, atoms: 3, seed: 7 }, 2, 0.8);
        let sol = dtn_scattering_difference(&v, 50.0, 32, &DtnOptions { radial_nodes: 128, ..DtnOptions::default() }).unwrap();
        assert!(sol.interface_radius < 1.0);
        assert!(sol.difference.hermitian_defect() < 1e-6, "{}", sol.difference.hermitian_defect());
    }

    #[test]
    fn interface_radius_does_not_change_the_map() {
        let v = sampler(PotentialKind::SmoothCompact { amplitude: 2.0 }, 1, 0.6);
        let inner = dtn_scattering_difference(&v, 40.0, 32, &DtnOptions::default()).unwrap();
        let outer = dtn_scattering_difference(&v, 40.0, 32, &DtnOptions { interface_candidates: 1, ..DtnOptions::default() }).unwrap();
        assert!(inner.interface_radius < 1.0 && outer.interface_radius == 1.0);
        let d = kernel_difference(&inner.difference, &outer.difference).unwrap().max_norm();
        assert!(d < 1e-4 * inner.difference.max_norm().max(1.0), "{d}");
    }

    #[test]
    fn difference_scales_linearly_in_amplitude() {
        let norm = |a: f64| {
            let v = sampler(PotentialKind::SmoothCompact { amplitude: a }, 1, 0.7);
            dtn_scattering_difference(&v, 30.0, 16, &DtnOptions { radial_nodes: 64, ..DtnOptions::default() }).unwrap().difference.max_norm()
        };
        let (a, b) = (norm(0.01), norm(0.04));
        assert!((b / a / 4.0 - 1.0).abs() < 0.1, "{}", b / a);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let v = sampler(PotentialKind::SmoothCompact { amplitude: 50.0 }, 1, 1.0);
        let opts = DtnOptions { radial_nodes: 8, tolerance: 1e-6, ..DtnOptions::default() };
        assert!(matches!(dtn_scattering_difference(&v, 30.0, 16, &opts), Err(Error::GridTooCoarse { .. })));
    }
}
