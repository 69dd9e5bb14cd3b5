//! Background `V₁ = Λ·1_D` on the unit disk: exact outgoing solutions by
//! the transmission Bessel series and the perturbed Riemann–Hilbert solve.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;

use super::{assemble_b, circle_moment, d_mu_minus, from_columns, right_apply, to_columns, RhpOptions, RhpWorkspace};
use crate::error::{Error, Result};
use crate::forward::TorusKernel;
use crate::numerics::linalg::Lu;
use crate::numerics::special::{bessel_j_seq, bessel_y_seq, derivative_seq};
use crate::numerics::{CircleFunction, CircleGrid};

/// Transmission coefficients of one channel: inside `α_m J_m(κr)`,
/// outside `J_m(kr) + β_m H_m(kr)`, `m ≥ 0`.
struct Channel {
    k: f64,
    kappa: f64,
    alpha: Vec<C64>,
    beta: Vec<C64>,
}

impl Channel {
    fn new(lambda: f64, energy: f64, max_order: usize) -> Result<Self> {
        let k = energy.sqrt();
        let inner = energy - lambda;
        if !(inner > 0.0) {
            return Err(Error::Domain(format!("background level {lambda} must stay below E = {energy}")));
        }
        let kappa = inner.sqrt();
        if lambda == 0.0 {
            return Ok(Self { k, kappa, alpha: vec![C64::new(1.0, 0.0); max_order + 1], beta: vec![C64::new(0.0, 0.0); max_order + 1] });
        }
        let ji = bessel_j_seq(max_order + 1, kappa)?;
        let dji = derivative_seq(&ji, kappa);
        let jo = bessel_j_seq(max_order + 1, k)?;
        let djo = derivative_seq(&jo, k);
        let yo = bessel_y_seq(max_order + 1, k)?;
        let dyo = derivative_seq(&yo, k);
        let mut alpha = Vec::with_capacity(max_order + 1);
        let mut beta = Vec::with_capacity(max_order + 1);
        for m in 0..=max_order {
            let h = C64::new(jo[m], yo[m]);
            let dh = C64::new(djo[m], dyo[m]);
            // α J(κ) − β H(k) = J(k),  α κJ'(κ) − β kH'(k) = kJ'(k)
            let det = -ji[m] * k * dh + kappa * dji[m] * h;
            if det.norm() < 1e-300 {
                return Err(Error::ResonantEnergy { energy, detail: format!("transmission system singular at order {m}") });
            }
            // Wronskian: kJ'H − kJH' = −2i/π
            let a = C64::new(0.0, -2.0 / PI) / det;
            alpha.push(a);
            beta.push((a * ji[m] - jo[m]) / h);
        }
        Ok(Self { k, kappa, alpha, beta })
    }

    /// Coefficients and cylinder functions `Z_m(wr)`, `m = 0..=M+1`, of
    /// the field part expanded in Bessel series: the whole field inside,
    /// the scattered field outside. Also returns `w`.
    fn radial(&self, r: f64) -> Result<(Vec<C64>, Vec<C64>, f64)> {
        let max = self.alpha.len();
        let r = r.max(1e-12);
        let pad = |c: &[C64]| (0..=max).map(|m| c.get(m).copied().unwrap_or(C64::new(0.0, 0.0))).collect::<Vec<_>>();
        if r <= 1.0 {
            let j = bessel_j_seq(max, self.kappa * r)?;
            Ok((pad(&self.alpha), j.into_iter().map(|v| C64::new(v, 0.0)).collect(), self.kappa))
        } else {
            let x = self.k * r;
            let (j, y) = (bessel_j_seq(max, x)?, bessel_y_seq(max, x)?);
            Ok((pad(&self.beta), j.iter().zip(&y).map(|(a, b)| C64::new(*a, *b)).collect(), self.k))
        }
    }
}

fn parity(m: i64) -> f64 {
    if m < 0 && m % 2 != 0 {
        -1.0
    } else {
        1.0
    }
}

fn truncation(energy: f64, r: f64) -> usize {
    (energy.sqrt() * r.max(1.0)).ceil() as usize + 30
}

/// `μ^{1,+}(z, λ_j) = e^{−ik_j·x} ψ^{1,+}(x, k_j)` and its `∂_z` for
/// `V₁ = diag(Λ)·1_D`, at every node of `grid`.
pub fn mu1_plus(diag: &[f64], energy: f64, grid: CircleGrid, z: C64) -> Result<(CircleFunction, CircleFunction)> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::InvalidParams("background needs at least one channel".into()));
    }
    let (r, theta) = (z.norm(), z.arg());
    let max = truncation(energy, r);
    let sq = energy.sqrt();
    let mut mu = vec![Mat::<C64>::zeros(n, n); grid.size()];
    let mut dmu = vec![Mat::<C64>::zeros(n, n); grid.size()];
    for (c, &lambda) in diag.iter().enumerate() {
        if lambda == 0.0 {
            for m in &mut mu {
                m[(c, c)] = C64::new(1.0, 0.0);
            }
            continue;
        }
        let ch = Channel::new(lambda, energy, max)?;
        let (coef, cyl, w) = ch.radial(r)?;
        let outside = r > 1.0;
        for j in 0..grid.size() {
            let phi = grid.angle(j);
            let (mut u, mut du) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for m in -(max as i64)..=(max as i64) {
                let am = m.unsigned_abs() as usize;
                let pre = C64::new(0.0, 1.0).powu(am as u32) * coef[am] * C64::from_polar(1.0, -(m as f64) * phi);
                u += pre * cyl[am] * C64::from_polar(1.0, m as f64 * theta);
                // ∂_z[Z_m e^{imθ}] = (w/2) Z_{m−1} e^{i(m−1)θ}, signed orders
                let s = parity(m) * parity(m - 1);
                du += pre * s * 0.5 * w * cyl[(m - 1).unsigned_abs() as usize] * C64::from_polar(1.0, (m - 1) as f64 * theta);
            }
            let kx = sq * (phi.cos() * z.re + phi.sin() * z.im);
            let e = C64::from_polar(1.0, -kx);
            let base = if outside { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            mu[j][(c, c)] = base + e * u;
            dmu[j][(c, c)] = e * (du - C64::new(0.0, 0.5 * sq) * C64::from_polar(1.0, -phi) * u);
        }
    }
    Ok((CircleFunction::new(grid, mu)?, CircleFunction::new(grid, dmu)?))
}

/// Exact scattering amplitude of `diag(Λ)·1_D`, rows incident.
pub fn disk_scattering_amplitude(diag: &[f64], energy: f64, grid: CircleGrid) -> Result<TorusKernel> {
    let n = diag.len();
    let k = energy.sqrt();
    let max = truncation(energy, 1.0);
    let mut series = Vec::with_capacity(n);
    for &lambda in diag {
        if lambda == 0.0 {
            series.push(vec![C64::new(0.0, 0.0); max + 1]);
            continue;
        }
        let ch = Channel::new(lambda, energy, max)?;
        let (ji, jo) = (bessel_j_seq(max + 1, ch.kappa)?, bessel_j_seq(max + 1, k)?);
        let (dji, djo) = (derivative_seq(&ji, ch.kappa), derivative_seq(&jo, k));
        // ∫₀¹ J_m(κr) J_m(kr) r dr by the Lommel formula
        series.push(
            (0..=max)
                .map(|m| {
                    let lommel = (k * ji[m] * djo[m] - ch.kappa * dji[m] * jo[m]) / (ch.kappa * ch.kappa - k * k);
                    ch.alpha[m] * lambda * lommel / (2.0 * PI)
                })
                .collect(),
        );
    }
    let nt = grid.size();
    let mut values = vec![C64::new(0.0, 0.0); nt * nt * n * n];
    for j in 0..nt {
        for l in 0..nt {
            let d = grid.angle(l) - grid.angle(j);
            for (c, s) in series.iter().enumerate() {
                let mut acc = s[0];
                for (m, sm) in s.iter().enumerate().skip(1) {
                    acc += sm * 2.0 * (m as f64 * d).cos();
                }
                values[(j * nt + l) * n * n + c * n + c] = acc;
            }
        }
    }
    TorusKernel::new(grid, n, energy, values)
}

/// Background data for the perturbed solve: `V₁ = diag(Λ)·1_D` and its
/// `h¹±` on the torus grid.
#[derive(Debug, Clone)]
pub struct BackgroundRhp {
    pub diag: Vec<f64>,
    pub h1_plus: TorusKernel,
    pub h1_minus: TorusKernel,
}

impl BackgroundRhp {
    pub fn new(diag: Vec<f64>, h1_plus: TorusKernel, h1_minus: TorusKernel) -> Result<Self> {
        h1_plus.check_compatible(&h1_minus)?;
        if diag.len() != h1_plus.channels() {
            return Err(Error::GridMismatch("background levels do not match the channel count".into()));
        }
        Ok(Self { diag, h1_plus, h1_minus })
    }

    /// `V_appr(z)` from `(Id + (Id + B¹)⁻¹ δB) μ̃⁺ = μ^{1,+}`, solved in the
    /// equivalent form `(Id + B) μ̃⁺ = (Id + B¹) μ^{1,+}`.
    pub fn v_appr_point(&self, h_plus: &TorusKernel, h_minus: &TorusKernel, z: C64, options: &RhpOptions) -> Result<Mat<C64>> {
        let ws = assemble_b(h_plus, h_minus, z)?;
        let ws1 = assemble_b(&self.h1_plus, &self.h1_minus, z)?;
        let (mu1, dmu1) = mu1_plus(&self.diag, ws.energy(), ws.grid(), z)?;
        let (mu, dmu) = solve_background(&ws, &ws1, &mu1, &dmu1, options)?;
        Ok(circle_moment(ws.grid(), ws.energy(), &d_mu_minus(&ws, mu.values(), &dmu)))
    }
}

fn sum(parts: &[&[Mat<C64>]]) -> Vec<Mat<C64>> {
    let mut out = parts[0].to_vec();
    for p in &parts[1..] {
        for (o, x) in out.iter_mut().zip(p.iter()) {
            *o += x;
        }
    }
    out
}

fn solve_background(
    ws: &RhpWorkspace,
    ws1: &RhpWorkspace,
    mu1: &CircleFunction,
    dmu1: &CircleFunction,
    options: &RhpOptions,
) -> Result<(CircleFunction, Vec<Mat<C64>>)> {
    let n = ws.channels();
    let b1mu1 = right_apply(&ws1.b, n, mu1.values());
    let rhs = sum(&[mu1.values(), &b1mu1]);
    let lu = Lu::new(&ws.system_matrix(), "perturbed Riemann-Hilbert system", options.condition_limit)?;
    let mu = from_columns(&lu.solve(&to_columns(&rhs, n)), n);
    let bmu = right_apply(&ws.b, n, &mu);
    let residual = sum(&[&mu, &bmu]).iter().zip(&rhs).map(|(a, b)| (a - b).norm_max()).fold(0.0, f64::max);
    if !(residual <= options.residual_limit) {
        return Err(Error::NoConvergence { stage: "perturbed Riemann-Hilbert system", residual });
    }
    // (Id + B) ∂μ = −(∂B) μ + ∂μ¹ + (∂B¹) μ¹ + B¹ ∂μ¹
    let neg: Vec<Mat<C64>> = right_apply(&ws.db, n, &mu).into_iter().map(|m| -m).collect();
    let forcing = sum(&[&neg, dmu1.values(), &right_apply(&ws1.db, n, mu1.values()), &right_apply(&ws1.b, n, dmu1.values())]);
    let dmu = from_columns(&lu.solve(&to_columns(&forcing, n)), n);
    Ok((CircleFunction::new(ws.grid(), mu)?, dmu))
}

/// `μ̃⁺` of the perturbed problem at the point of `ws`.
pub fn solve_mu_tilde_plus_background(ws: &RhpWorkspace, ws1: &RhpWorkspace, mu1: &CircleFunction, options: &RhpOptions) -> Result<CircleFunction> {
    let zero = CircleFunction::from_fn(ws.grid(), ws.channels(), |_, _| Mat::zeros(ws.channels(), ws.channels()));
    Ok(solve_background(ws, ws1, mu1, &zero, options)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{scattering_amplitude, solve_lippmann_schwinger, GreenKind, LsOptions, Sign, WaveParams};
    use crate::potentials::{make_test_potential, PotentialKind, PotentialSpec};

    #[test]
    fn zero_levels_give_identity() {
        let grid = CircleGrid::new(8).unwrap();
        let (mu, dmu) = mu1_plus(&[0.0, 0.0], 50.0, grid, C64::new(0.3, 0.4)).unwrap();
        assert_eq!(mu.sub(&CircleFunction::identity(grid, 2)).unwrap().max_norm(), 0.0);
        assert_eq!(dmu.max_norm(), 0.0);
    }

    #[test]
    fn derivative_matches_finite_differences_inside_and_outside() {
        let grid = CircleGrid::new(8).unwrap();
        let diag = [3.0, -2.0];
        for z in [C64::new(0.2, -0.3), C64::new(0.9, 0.7)] {
            let (_, d) = mu1_plus(&diag, 40.0, grid, z).unwrap();
            let s = 1e-5;
            let f = |dz: C64| mu1_plus(&diag, 40.0, grid, z + dz).unwrap().0;
            let d1 = f(C64::new(s, 0.0)).sub(&f(C64::new(-s, 0.0))).unwrap();
            let d2 = f(C64::new(0.0, s)).sub(&f(C64::new(0.0, -s))).unwrap();
            for j in 0..8 {
                let fd = (&d1.values()[j] - &d2.values()[j] * faer::Scale(C64::new(0.0, 1.0))) * faer::Scale(C64::new(0.25 / s, 0.0));
                assert!((&fd - &d.values()[j]).norm_max() < 1e-6, "{:e}", (&fd - &d.values()[j]).norm_max());
            }
        }
    }

    #[test]
    fn series_is_continuous_across_the_interface() {
        let grid = CircleGrid::new(8).unwrap();
        let a = mu1_plus(&[4.0], 60.0, grid, C64::from_polar(1.0 - 1e-9, 0.7)).unwrap();
        let b = mu1_plus(&[4.0], 60.0, grid, C64::from_polar(1.0 + 1e-9, 0.7)).unwrap();
        assert!(a.0.sub(&b.0).unwrap().max_norm() < 1e-7);
        assert!(a.1.sub(&b.1).unwrap().max_norm() < 1e-6);
    }

    #[test]
    fn small_contrast_matches_forward_solver() {
        let e = 30.0;
        let diag = [0.5];
        let v = make_test_potential(&PotentialSpec {
            kind: PotentialKind::DiagonalConstantOnD { diag: diag.to_vec() },
            channels: 1,
            support_radius: 1.0,
            half_width: 1.25,
            nx: 128,
        })
        .unwrap();
        let grid = CircleGrid::new(8).unwrap();
        let exact = disk_scattering_amplitude(&diag, e, grid).unwrap();
        let numeric = scattering_amplitude(&v, e, grid, LsOptions::default()).unwrap();
        assert!(numeric.relative_l2_distance(&exact).unwrap() < 0.05);
        let psi = solve_lippmann_schwinger(&v, WaveParams::new(e, 0.0, Sign::Plus).unwrap(), GreenKind::Plus, LsOptions::default()).unwrap();
        let (i1, i2) = (64 + 20, 64 + 10);
        let [x1, x2] = v.point(i1, i2);
        let (mu, _) = mu1_plus(&diag, e, grid, C64::new(x1, x2)).unwrap();
        let gap = (psi.entry(i1, i2, 0, 0) - mu.values()[0][(0, 0)]).norm();
        assert!(gap < 0.02, "{gap}");
    }
}
