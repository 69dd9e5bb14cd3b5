//! From data to `h±`: the boundary equation for DtN data (with an optional
//! known diagonal background) and the row-wise equation for `f`.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::dtn::{kernel_difference, BoundaryKernel};
use crate::error::{Error, Result};
use crate::forward::{Sign, TorusKernel, WaveParams};
use crate::numerics::linalg::{Lu, DEFAULT_CONDITION_LIMIT};
use crate::numerics::special::{bessel_j_seq, bessel_y_seq};
use crate::numerics::{arc_weight, half_circle_weight, CircleGrid};

/// `ψ±(·, k)` on the boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub grid: CircleGrid,
    pub params: WaveParams,
    pub values: Vec<Mat<C64>>,
    /// Max-norm residual of the discrete boundary equation.
    pub residual: f64,
}

impl BoundaryTrace {
    pub fn channels(&self) -> usize {
        self.values.first().map_or(0, |m| m.nrows())
    }

    pub fn max_distance(&self, other: &BoundaryTrace) -> Result<f64> {
        if self.grid != other.grid || self.values.len() != other.values.len() {
            return Err(Error::GridMismatch("traces on different grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_max()).fold(0.0, f64::max))
    }
}

/// Settings shared by the boundary solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryOptions {
    /// Angular grid for the half-circle term of `G±`; use the torus grid
    /// of the target `h±`.
    pub theta: CircleGrid,
    pub condition_limit: f64,
    pub residual_limit: f64,
}

impl BoundaryOptions {
    pub fn new(theta: CircleGrid) -> Self {
        Self { theta, condition_limit: DEFAULT_CONDITION_LIMIT, residual_limit: 1e-9 }
    }
}

/// Eigenvalues `−(iπ/2) J_m(√E) H_m(√E)`, `m = 0..=max_order`, of the
/// single layer with kernel `G⁺` on the unit circle.
pub fn single_layer_symbols(energy: f64, max_order: usize) -> Result<Vec<C64>> {
    let k = energy.sqrt();
    let j = bessel_j_seq(max_order, k)?;
    let y = bessel_y_seq(max_order, k)?;
    let out: Vec<C64> = j.iter().zip(&y).map(|(&jm, &ym)| C64::new(0.0, -PI / 2.0) * jm * C64::new(jm, ym)).collect();
    if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Domain(format!("single layer symbol overflows for {max_order} modes at E = {energy}")));
    }
    Ok(out)
}

/// Nodal matrix of `u ↦ ∫_∂D G±(x_i − ξ, k) u(ξ) dξ`: the `G⁺` part through
/// its circle symbol, the plane-wave part by the trapezoid rule.
pub fn boundary_green_matrix(grid: CircleGrid, params: WaveParams, theta: CircleGrid) -> Result<Mat<C64>> {
    let nb = grid.size();
    let symbols = single_layer_symbols(params.energy, nb / 2)?;
    let circulant: Vec<C64> = (0..nb)
        .map(|d| {
            (0..nb)
                .map(|p| {
                    let m = grid.mode(p);
                    symbols[m.unsigned_abs() as usize] * C64::from_polar(1.0, m as f64 * grid.angle(d))
                })
                .sum::<C64>()
                / nb as f64
        })
        .collect();
    let k = params.energy.sqrt();
    let mut waves = Vec::new();
    for q in 0..theta.size() {
        let tq = theta.angle(q);
        let w = theta.weight() * half_circle_weight(theta, q, params.angle, params.sign.value());
        if w > 0.0 {
            waves.push((C64::new(0.0, w / (4.0 * PI)), [k * tq.cos(), k * tq.sin()]));
        }
    }
    let wb = grid.weight();
    Ok(Mat::from_fn(nb, nb, |i, l| {
        let dx = [grid.angle(i).cos() - grid.angle(l).cos(), grid.angle(i).sin() - grid.angle(l).sin()];
        let plane: C64 = waves.iter().map(|(c, kq)| c * C64::from_polar(1.0, kq[0] * dx[0] + kq[1] * dx[1])).sum();
        circulant[(i + nb - l) % nb] + plane * wb
    }))
}

/// `A = G·K·w_b` as a dense `(N_b n)²` matrix, `G` the scalar boundary
/// Green matrix acting blockwise.
fn operator_a(green: &Mat<C64>, kernel: &BoundaryKernel) -> Mat<C64> {
    let nb = kernel.size();
    let n = kernel.channels();
    let k = kernel.to_dense();
    let mut out = Mat::<C64>::zeros(nb * n, nb * n);
    for a in 0..n {
        // Rows (i·n + a) of A mix rows (l·n + a) of K.
        let rows = Mat::from_fn(nb, nb * n, |l, c| k[(l * n + a, c)]);
        let prod = green * &rows;
        for i in 0..nb {
            for c in 0..nb * n {
                out[(i * n + a, c)] = prod[(i, c)];
            }
        }
    }
    out * faer::Scale(C64::new(kernel.weight(), 0.0))
}

fn plane_wave_trace(grid: CircleGrid, params: WaveParams, channels: usize) -> Mat<C64> {
    let k = params.momentum();
    let nb = grid.size();
    let mut b = Mat::<C64>::zeros(nb * channels, channels);
    for i in 0..nb {
        let e = C64::from_polar(1.0, k[0] * grid.angle(i).cos() + k[1] * grid.angle(i).sin());
        for a in 0..channels {
            b[(i * channels + a, a)] = e;
        }
    }
    b
}

fn unstack(grid: CircleGrid, channels: usize, x: &Mat<C64>) -> Vec<Mat<C64>> {
    (0..grid.size()).map(|i| Mat::from_fn(channels, channels, |a, b| x[(i * channels + a, b)])).collect()
}

fn stack(values: &[Mat<C64>]) -> Mat<C64> {
    let n = values[0].nrows();
    let cols = values[0].ncols();
    Mat::from_fn(values.len() * n, cols, |r, c| values[r / n][(r % n, c)])
}

/// Solves `system·x = rhs` with conditioning and residual checks.
fn checked_solve(system: &Mat<C64>, rhs: &Mat<C64>, stage: &'static str, options: &BoundaryOptions) -> Result<(Mat<C64>, f64)> {
    let lu = Lu::new(system, stage, options.condition_limit)?;
    let x = lu.solve(rhs);
    let scale = rhs.norm_max().max(1e-300);
    let residual = (system * &x - rhs).norm_max() / scale;
    if !(residual <= options.residual_limit) {
        return Err(Error::NoConvergence { stage, residual });
    }
    Ok((x, residual))
}

/// Boundary values of `ψ±(·, k)` from `K = Φ − Φ₀`.
pub fn algo1_boundary_psi(kernel: &BoundaryKernel, params: WaveParams, options: &BoundaryOptions) -> Result<BoundaryTrace> {
    check_energy(kernel, params)?;
    let grid = kernel.grid();
    let n = kernel.channels();
    let green = boundary_green_matrix(grid, params, options.theta)?;
    let system = Mat::<C64>::identity(grid.size() * n, grid.size() * n) - operator_a(&green, kernel);
    let (x, residual) = checked_solve(&system, &plane_wave_trace(grid, params, n), "boundary equation", options)?;
    Ok(BoundaryTrace { grid, params, values: unstack(grid, n, &x), residual })
}

fn check_energy(kernel: &BoundaryKernel, params: WaveParams) -> Result<()> {
    if (kernel.energy() - params.energy).abs() > 1e-12 * params.energy {
        return Err(Error::GridMismatch(format!("kernel energy {} differs from E = {}", kernel.energy(), params.energy)));
    }
    Ok(())
}

/// Traces for every incident direction of `torus`.
pub fn algo1_traces(kernel: &BoundaryKernel, sign: Sign, torus: CircleGrid) -> Result<Vec<BoundaryTrace>> {
    let options = BoundaryOptions::new(torus);
    (0..torus.size())
        .into_par_iter()
        .map(|j| algo1_boundary_psi(kernel, WaveParams::new(kernel.energy(), torus.angle(j), sign)?, &options))
        .collect()
}

/// `(2π)⁻² ∫∫ e^{−ilx} K(x, y) u_j(y) dy dx` for every pair of torus nodes.
fn boundary_moments(kernel: &BoundaryKernel, traces: &[&[Mat<C64>]], torus: CircleGrid) -> Result<TorusKernel> {
    let grid = kernel.grid();
    let n = kernel.channels();
    let nb = grid.size();
    let dense = kernel.to_dense();
    let k = kernel.energy().sqrt();
    let w = kernel.weight();
    let scale = C64::new(w * w / (4.0 * PI * PI), 0.0);
    // Rows l·n + a of the left factor hold e^{−il·x_i} on channel a.
    let left = Mat::from_fn(torus.size() * n, nb * n, |r, c| {
        if r % n != c % n {
            return C64::new(0.0, 0.0);
        }
        let (tl, ti) = (torus.angle(r / n), grid.angle(c / n));
        C64::from_polar(1.0, -k * (tl.cos() * ti.cos() + tl.sin() * ti.sin()))
    });
    let rows: Vec<Vec<Mat<C64>>> = traces
        .par_iter()
        .map(|vals| {
            let m = &left * (&dense * stack(vals));
            (0..torus.size()).map(|l| Mat::from_fn(n, n, |a, b| m[(l * n + a, b)] * scale)).collect()
        })
        .collect();
    TorusKernel::from_rows(torus, n, kernel.energy(), rows)
}

fn check_traces(kernel: &BoundaryKernel, traces: &[BoundaryTrace], torus: CircleGrid) -> Result<()> {
    if traces.len() != torus.size() {
        return Err(Error::MissingData(format!("{} traces for {} incident angles", traces.len(), torus.size())));
    }
    for (j, t) in traces.iter().enumerate() {
        if t.grid != kernel.grid() || t.channels() != kernel.channels() {
            return Err(Error::GridMismatch("trace grid differs from the kernel".into()));
        }
        if (t.params.angle - torus.angle(j)).abs() > 1e-12 {
            return Err(Error::MissingData(format!("no trace for incident angle {}", torus.angle(j))));
        }
    }
    Ok(())
}

/// `h±(k_j, l) = (2π)⁻² ∫∫ e^{−ilx} (Φ − Φ₀)(x, y) ψ±(y, k_j) dy dx`.
pub fn algo1_h(kernel: &BoundaryKernel, traces: &[BoundaryTrace], torus: CircleGrid) -> Result<TorusKernel> {
    check_traces(kernel, traces, torus)?;
    let vals: Vec<&[Mat<C64>]> = traces.iter().map(|t| t.values.as_slice()).collect();
    boundary_moments(kernel, &vals, torus)
}

/// Both steps of the DtN route at once.
pub fn algo1(kernel: &BoundaryKernel, sign: Sign, torus: CircleGrid) -> Result<TorusKernel> {
    let traces = algo1_traces(kernel, sign, torus)?;
    algo1_h(kernel, &traces, torus)
}

/// Solves `h(λ, ·) − πi ∫ f(λ″, ·) χ₊(±i(λ/λ″ − λ″/λ)) h(λ, λ″) |dλ″| = f(λ, ·)`
/// row by row.
pub fn algo2_h(f: &TorusKernel, sign: Sign) -> Result<TorusKernel> {
    algo2_h_with(f, sign, DEFAULT_CONDITION_LIMIT)
}

pub fn algo2_h_with(f: &TorusKernel, sign: Sign, condition_limit: f64) -> Result<TorusKernel> {
    let grid = f.grid();
    let nt = grid.size();
    let n = f.channels();
    let w = grid.weight();
    let rows: Vec<Vec<Mat<C64>>> = (0..nt)
        .into_par_iter()
        .map(|j| {
            // Unknowns X_q = h(λ_j, λ_q); equation l reads X_l − Σ_q c_q f(q, l) X_q.
            let mut system = Mat::<C64>::identity(nt * n, nt * n);
            for q in 0..nt {
                let c = C64::new(0.0, PI) * w * arc_weight(j, q, nt, sign.value());
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                for l in 0..nt {
                    for a in 0..n {
                        for b in 0..n {
                            system[(l * n + a, q * n + b)] -= c * f.entry(q, l, a, b);
                        }
                    }
                }
            }
            let rhs = Mat::from_fn(nt * n, n, |r, c| f.entry(j, r / n, r % n, c));
            let lu = Lu::new(&system, "row equation for h", condition_limit)?;
            let x = lu.solve(&rhs);
            Ok((0..nt).map(|l| Mat::from_fn(n, n, |a, b| x[(l * n + a, b)])).collect())
        })
        .collect::<Result<_>>()?;
    TorusKernel::from_rows(grid, n, f.energy(), rows)
}

/// Forward data of the background `V₁ = diag(Λ)·1_D` needed by the
/// background route.
#[derive(Debug, Clone)]
pub struct BackgroundData {
    pub traces: Vec<BoundaryTrace>,
    pub h1: TorusKernel,
}

/// `ψ¹±|∂D = (Id − A¹±)⁻¹ e^{ikx}` and `h¹±` for all torus directions,
/// from `Φ₁` and `Φ₀`.
pub fn background_data(phi1: &BoundaryKernel, phi0: &BoundaryKernel, sign: Sign, torus: CircleGrid) -> Result<BackgroundData> {
    let k1 = kernel_difference(phi1, phi0)?;
    let traces = algo1_traces(&k1, sign, torus)?;
    let h1 = algo1_h(&k1, &traces, torus)?;
    Ok(BackgroundData { traces, h1 })
}

/// Boundary values of `ψ±` from `(Id + (Id − A¹±)⁻¹ δA±) ψ± = ψ¹±`.
pub fn algo1a_boundary_psi(
    phi: &BoundaryKernel,
    phi1: &BoundaryKernel,
    phi0: &BoundaryKernel,
    params: WaveParams,
    options: &BoundaryOptions,
) -> Result<BoundaryTrace> {
    let k1 = kernel_difference(phi1, phi0)?;
    let dk = kernel_difference(phi1, phi)?;
    check_energy(phi, params)?;
    let grid = phi.grid();
    let n = phi.channels();
    let dim = grid.size() * n;
    let green = boundary_green_matrix(grid, params, options.theta)?;
    let inner = Mat::<C64>::identity(dim, dim) - operator_a(&green, &k1);
    let inner_lu = Lu::new(&inner, "background boundary equation", options.condition_limit)?;
    let psi1 = inner_lu.solve(&plane_wave_trace(grid, params, n));
    let system = Mat::<C64>::identity(dim, dim) + inner_lu.solve(&operator_a(&green, &dk));
    let (x, residual) = checked_solve(&system, &psi1, "boundary equation with background", options)?;
    Ok(BoundaryTrace { grid, params, values: unstack(grid, n, &x), residual })
}

pub fn algo1a_traces(phi: &BoundaryKernel, phi1: &BoundaryKernel, phi0: &BoundaryKernel, sign: Sign, torus: CircleGrid) -> Result<Vec<BoundaryTrace>> {
    let options = BoundaryOptions::new(torus);
    (0..torus.size())
        .into_par_iter()
        .map(|j| algo1a_boundary_psi(phi, phi1, phi0, WaveParams::new(phi.energy(), torus.angle(j), sign)?, &options))
        .collect()
}

/// `h± = h¹± + (2π)⁻²∫∫ e^{−ilx}(Φ − Φ₁)ψ± + (2π)⁻²∫∫ e^{−ilx}(Φ₁ − Φ₀)δψ±`.
pub fn algo1a_h(
    phi: &BoundaryKernel,
    phi1: &BoundaryKernel,
    phi0: &BoundaryKernel,
    traces: &[BoundaryTrace],
    background: &BackgroundData,
    torus: CircleGrid,
) -> Result<TorusKernel> {
    check_traces(phi, traces, torus)?;
    check_traces(phi1, &background.traces, torus)?;
    background.h1.check_compatible(&TorusKernel::zeros(torus, phi.channels(), phi.energy()))?;
    let dk = kernel_difference(phi, phi1)?;
    let k1 = kernel_difference(phi1, phi0)?;
    let psi: Vec<&[Mat<C64>]> = traces.iter().map(|t| t.values.as_slice()).collect();
    let delta: Vec<Vec<Mat<C64>>> = traces
        .iter()
        .zip(&background.traces)
        .map(|(t, b)| t.values.iter().zip(&b.values).map(|(x, y)| x - y).collect())
        .collect();
    let delta_refs: Vec<&[Mat<C64>]> = delta.iter().map(|d| d.as_slice()).collect();
    let first = boundary_moments(&dk, &psi, torus)?;
    let second = boundary_moments(&k1, &delta_refs, torus)?;
    let one = C64::new(1.0, 0.0);
    background.h1.combine(one, &first, one)?.combine(one, &second, one)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtn::{dtn_background_disk, dtn_scattering_difference, dtn_zero_disk, DtnOptions};
    use crate::forward::{h_pm_direct, scattering_amplitude, GreenChoice, LsOptions, LsSolver};
    use crate::potentials::{make_test_potential, FixtureSampler, PotentialKind, PotentialSpec};

    fn spec(n: usize, amplitude: f64, nx: usize) -> PotentialSpec {
        PotentialSpec { kind: PotentialKind::SmoothCompact { amplitude }, channels: n, support_radius: 0.8, half_width: 1.0, nx }
    }

    #[test]
    fn single_layer_symbol_matches_direct_quadrature() {
        // ∫ G⁺(x − ξ) e^{imτ} dτ at x = (1, 0) by a graded rule around τ = 0.
        let e: f64 = 30.0;
        let symbols = single_layer_symbols(e, 6).unwrap();
        for m in [0usize, 2, 5] {
            let panels = 400_000;
            let mut acc = C64::new(0.0, 0.0);
            for half in [1.0, -1.0] {
                for i in 0..panels {
                    let t = (i as f64 + 0.5) / panels as f64;
                    let tau = half * PI * t * t;
                    let r = 2.0 * (tau / 2.0).sin().abs();
                    let g = C64::new(0.0, -0.25) * crate::numerics::special::hankel_h1_0(e.sqrt() * r).unwrap();
                    acc += g * C64::from_polar(1.0, m as f64 * tau) * 2.0 * PI * t / panels as f64;
                }
            }
            assert!((acc - symbols[m]).norm() < 1e-6, "m={m}: {acc} vs {}", symbols[m]);
        }
    }

    #[test]
    fn zero_kernel_gives_plane_waves_and_zero_h() {
        let torus = CircleGrid::new(8).unwrap();
        let k = BoundaryKernel::zeros(CircleGrid::new(16).unwrap(), 2, 50.0);
        let traces = algo1_traces(&k, Sign::Plus, torus).unwrap();
        for t in &traces {
            let expect = unstack(t.grid, 2, &plane_wave_trace(t.grid, t.params, 2));
            for (a, b) in t.values.iter().zip(&expect) {
                assert!((a - b).norm_max() < 1e-15);
            }
        }
        assert_eq!(algo1_h(&k, &traces, torus).unwrap().max_norm(), 0.0);
        assert!(matches!(algo1_h(&k, &traces[..4], torus), Err(Error::MissingData(_))));
    }

    #[test]
    fn algo2_of_zero_is_zero_and_born_regime_is_quadratic() {
        let torus = CircleGrid::new(16).unwrap();
        assert_eq!(algo2_h(&TorusKernel::zeros(torus, 2, 40.0), Sign::Minus).unwrap().max_norm(), 0.0);
        let gap = |a: f64| {
            let v = make_test_potential(&spec(2, a, 32)).unwrap();
            let f = scattering_amplitude(&v, 40.0, torus, LsOptions::default()).unwrap();
            algo2_h(&f, Sign::Plus).unwrap().sub(&f).unwrap().l2_norm()
        };
        let (g1, g2) = (gap(0.01), gap(0.02));
        assert!((g2 / g1 - 4.0).abs() < 0.2, "{}", g2 / g1);
    }

    #[test]
    fn algo2_reproduces_direct_faddeev_amplitudes() {
        let torus = CircleGrid::new(16).unwrap();
        let v = make_test_potential(&PotentialSpec { kind: PotentialKind::HermitianRandomSmooth { amplitude: 2.0, atoms: 4, seed: 3 }, ..spec(2, 0.0, 32) }).unwrap();
        let f = scattering_amplitude(&v, 60.0, torus, LsOptions::default()).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let direct = h_pm_direct(&v, 60.0, sign, torus, LsOptions::default()).unwrap();
            let rel = algo2_h(&f, sign).unwrap().relative_l2_distance(&direct).unwrap();
            assert!(rel < 1e-8, "{sign:?}: {rel}");
        }
    }

    #[test]
    fn boundary_trace_matches_forward_solution() {
        let e = 60.0;
        let torus = CircleGrid::new(16).unwrap();
        let s = spec(2, 2.0, 64);
        let v = make_test_potential(&s).unwrap();
        let sampler = FixtureSampler::new(&s).unwrap();
        let k = dtn_scattering_difference(&sampler, e, 64, &DtnOptions { radial_nodes: 128, ..DtnOptions::default() }).unwrap().difference;
        let params = WaveParams::new(e, torus.angle(3), Sign::Minus).unwrap();
        let trace = algo1_boundary_psi(&k, params, &BoundaryOptions::new(torus)).unwrap();
        let solver = LsSolver::new(&v, e, LsOptions::default()).unwrap();
        let green = GreenChoice::Pm { sign: Sign::Minus, angle: params.angle, theta: torus };
        let sol = solver.solve(params.momentum(), green).unwrap();
        let pts: Vec<[f64; 2]> = (0..64).map(|i| [trace.grid.angle(i).cos(), trace.grid.angle(i).sin()]).collect();
        let psi = solver.evaluate(&sol, green, &pts).unwrap();
        let err = trace.values.iter().zip(&psi).map(|(a, b)| (a - b).norm_max()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn background_route_collapses_and_is_consistent() {
        let e = 50.0;
        let torus = CircleGrid::new(8).unwrap();
        let phi0 = dtn_zero_disk(e, 32, 2).unwrap();
        let s = spec(2, 1.5, 32);
        let d = dtn_scattering_difference(&FixtureSampler::new(&s).unwrap(), e, 32, &DtnOptions { radial_nodes: 64, ..DtnOptions::default() }).unwrap();
        let phi = phi0.combine(C64::new(1.0, 0.0), &d.difference, C64::new(1.0, 0.0)).unwrap();
        let direct = algo1(&kernel_difference(&phi, &phi0).unwrap(), Sign::Plus, torus).unwrap();

        // Zero background.
        let bg0 = background_data(&phi0, &phi0, Sign::Plus, torus).unwrap();
        assert_eq!(bg0.h1.max_norm(), 0.0);
        let tr = algo1a_traces(&phi, &phi0, &phi0, Sign::Plus, torus).unwrap();
        let h = algo1a_h(&phi, &phi0, &phi0, &tr, &bg0, torus).unwrap();
        assert!(h.sub(&direct).unwrap().max_norm() < 1e-10 * direct.max_norm().max(1.0));

        // Data equal to the background.
        let phi1 = dtn_background_disk(e, 32, 2, &[1.0, 2.0]).unwrap();
        let bg1 = background_data(&phi1, &phi0, Sign::Plus, torus).unwrap();
        let tr1 = algo1a_traces(&phi1, &phi1, &phi0, Sign::Plus, torus).unwrap();
        for (a, b) in tr1.iter().zip(&bg1.traces) {
            assert!(a.max_distance(b).unwrap() < 1e-12);
        }
        let h1 = algo1a_h(&phi1, &phi1, &phi0, &tr1, &bg1, torus).unwrap();
        assert!(h1.sub(&bg1.h1).unwrap().max_norm() < 1e-12);
    }
}
