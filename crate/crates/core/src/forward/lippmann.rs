//! Lippmann–Schwinger solver `ψ = e^{ilx} I + ∫ G(x−y) V(y) ψ(y) dy`.
//!
//! The outgoing kernel is cut off at radius `R = 2L` and convolved
//! spectrally on a 2× zero-padded grid; the Fourier coefficients of the
//! truncated kernel are known in closed form, so the discretization is
//! spectrally accurate for smooth `V`. The plane-wave part of `G±` is a
//! finite sum over an angular grid and is applied as a low-rank term.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::types::Sign;
use crate::error::{Error, Result};
use crate::numerics::fft2::Fft2;
use crate::numerics::linalg::{gmres, Lu, DEFAULT_CONDITION_LIMIT};
use crate::numerics::special::{bessel_01, hankel_h1_01};
use crate::numerics::{half_circle_weight, CircleGrid};
use crate::potentials::MatrixField;

/// Solver tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct LsOptions {
    /// Largest unknown count factored densely.
    pub dense_limit: usize,
    pub gmres_tolerance: f64,
    pub gmres_restart: usize,
    pub gmres_max_iterations: usize,
    pub condition_limit: f64,
    /// Bound on the max-norm residual of the discrete equation.
    pub residual_limit: f64,
}

impl Default for LsOptions {
    fn default() -> Self {
        Self {
            dense_limit: 4096,
            gmres_tolerance: 1e-12,
            gmres_restart: 80,
            gmres_max_iterations: 4000,
            condition_limit: DEFAULT_CONDITION_LIMIT,
            residual_limit: 1e-8,
        }
    }
}

/// Green kernel of the integral equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GreenChoice {
    /// Outgoing `G⁺`.
    Plus,
    /// `G±(·, k)` with the half-circle integral discretized on `theta`
    /// (endpoint nodes at half weight). `angle` is the direction of `k`.
    Pm { sign: Sign, angle: f64, theta: CircleGrid },
}

/// Fourier coefficient `∫_{|x|<R} G⁺(x) e^{−iξx} dx` at `|ξ| = s`:
/// `N(s)/(s² − k²)` with the Lommel numerator
/// `N(s) = −1 − (iπR/2)(s H0(kR) J1(sR) − k H1(kR) J0(sR))`.
pub fn truncated_kernel_hat(s: f64, k: f64, radius: f64) -> Result<C64> {
    let kr = k * radius;
    let (h0, h1) = hankel_h1_01(kr)?;
    let i = C64::new(0.0, 1.0);
    let j01 = |t: f64| -> Result<[f64; 2]> {
        if t == 0.0 {
            Ok([1.0, 0.0])
        } else {
            let v = bessel_01(t * radius)?;
            Ok([v[0], v[1]])
        }
    };
    if (s - k).abs() < 1e-5 * k {
        // N(k) = 0; N(s) = N'(t)(s − k) + O((s − k)³) at the midpoint t,
        // N'(t) = −(iπR/2)(tR H0 J0(tR) + kR H1 J1(tR)).
        let t = 0.5 * (s + k);
        let [j0, j1] = j01(t)?;
        let slope = -i * (PI * radius / 2.0) * (t * radius * h0 * j0 + kr * h1 * j1);
        return Ok(slope / (s + k));
    }
    let [j0, j1] = j01(s)?;
    let numerator = -1.0 - i * (PI * radius / 2.0) * (s * h0 * j1 - k * h1 * j0);
    Ok(numerator / (s * s - k * k))
}

/// Per-direction plane-wave data for the `G±` correction.
struct PlaneWaveTerm {
    /// `(c_q, e^{i k_q·x_s})` for the nodes with nonzero weight.
    waves: Vec<(C64, Vec<C64>)>,
}

/// Discretized operator for one potential and energy.
pub struct LsSolver {
    channels: usize,
    energy: f64,
    nx: usize,
    half_width: f64,
    step: f64,
    support: Vec<(usize, usize)>,
    points: Vec<[f64; 2]>,
    vblocks: Vec<C64>,
    fft: Fft2,
    kernel_hat: Vec<C64>,
    dense: Option<Lu>,
    options: LsOptions,
}

/// Solution on the support nodes: `psi[s·n² + a·n + c]` is entry `(a, c)`
/// of `ψ(x_s)`.
#[derive(Debug, Clone)]
pub struct SupportSolution {
    pub incident: [f64; 2],
    pub psi: Vec<C64>,
    pub residual: f64,
    pub iterations: usize,
}

impl LsSolver {
    pub fn new(v: &MatrixField, energy: f64, options: LsOptions) -> Result<Self> {
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::InvalidParams(format!("energy must be positive, got {energy}")));
        }
        let n = v.channels();
        let nx = v.nx();
        let nn = n * n;
        let support: Vec<(usize, usize)> = v
            .support_nodes()
            .into_iter()
            .filter(|&(i1, i2)| {
                let o = (i1 * nx + i2) * nn;
                v.values()[o..o + nn].iter().any(|z| z.norm() > 0.0)
            })
            .collect();
        let points: Vec<[f64; 2]> = support.iter().map(|&(i1, i2)| v.point(i1, i2)).collect();
        let mut vblocks = Vec::with_capacity(support.len() * nn);
        for &(i1, i2) in &support {
            let o = (i1 * nx + i2) * nn;
            vblocks.extend_from_slice(&v.values()[o..o + nn]);
        }
        let m = 2 * nx;
        let step = v.step();
        let period = m as f64 * step;
        let radius = 2.0 * v.half_width();
        let k = energy.sqrt();
        let dxi = 2.0 * PI / period;
        let scale = 1.0 / (m * m) as f64;
        // |ξ| only takes O(M²/2) distinct values; cache by integer |m|².
        let mut cache = std::collections::HashMap::new();
        let mut kernel_hat = vec![C64::new(0.0, 0.0); m * m];
        for a in 0..m {
            let ma = if a < m / 2 { a as i64 } else { a as i64 - m as i64 };
            for b in 0..m {
                let mb = if b < m / 2 { b as i64 } else { b as i64 - m as i64 };
                let key = ma * ma + mb * mb;
                let value = match cache.get(&key) {
                    Some(v) => *v,
                    None => {
                        let s = dxi * (key as f64).sqrt();
                        let v = truncated_kernel_hat(s, k, radius)?;
                        cache.insert(key, v);
                        v
                    }
                };
                kernel_hat[a * m + b] = value * scale;
            }
        }
        let mut solver = Self {
            channels: n,
            energy,
            nx,
            half_width: v.half_width(),
            step,
            support,
            points,
            vblocks,
            fft: Fft2::new(m),
            kernel_hat,
            dense: None,
            options,
        };
        if solver.unknowns() > 0 && solver.unknowns() <= options.dense_limit {
            solver.dense = Some(solver.factor_dense()?);
        }
        Ok(solver)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn support_points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn unknowns(&self) -> usize {
        self.support.len() * self.channels
    }

    pub fn condition(&self) -> Option<f64> {
        self.dense.as_ref().map(|lu| lu.condition())
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Largest distance from the origin where off-grid evaluation is valid.
    pub fn evaluation_radius(&self) -> f64 {
        let rho = self.points.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
        2.0 * self.half_width - rho
    }

    /// Discrete kernel `g(d)` for the grid offset `d` (mod M).
    fn dense_kernel(&self) -> Vec<C64> {
        let mut g = self.kernel_hat.clone();
        self.fft.inverse(&mut g);
        g
    }

    fn factor_dense(&self) -> Result<Lu> {
        let n = self.channels;
        let m = self.fft.size();
        let g = self.dense_kernel();
        let size = self.unknowns();
        let mut a = Mat::<C64>::zeros(size, size);
        for (t, &(t1, t2)) in self.support.iter().enumerate() {
            let vt = &self.vblocks[t * n * n..(t + 1) * n * n];
            for (s, &(s1, s2)) in self.support.iter().enumerate() {
                let d1 = (s1 + m - t1) % m;
                let d2 = (s2 + m - t2) % m;
                let gd = g[d1 * m + d2];
                for aa in 0..n {
                    for bb in 0..n {
                        a[(s * n + aa, t * n + bb)] = -gd * vt[aa * n + bb];
                    }
                }
            }
        }
        for i in 0..size {
            a[(i, i)] += C64::new(1.0, 0.0);
        }
        Lu::new(&a, "lippmann-schwinger", self.options.condition_limit)
    }

    /// `V u` at the support nodes for one column `u[s·n + a]`.
    fn apply_potential(&self, u: &[C64]) -> Vec<C64> {
        let n = self.channels;
        let mut out = vec![C64::new(0.0, 0.0); u.len()];
        for s in 0..self.support.len() {
            let vb = &self.vblocks[s * n * n..(s + 1) * n * n];
            for a in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..n {
                    acc += vb[a * n + b] * u[s * n + b];
                }
                out[s * n + a] = acc;
            }
        }
        out
    }

    /// Truncated-kernel convolution of `phi` (one column) evaluated at the
    /// support nodes.
    fn convolve(&self, phi: &[C64]) -> Vec<C64> {
        let n = self.channels;
        let m = self.fft.size();
        let mut out = vec![C64::new(0.0, 0.0); phi.len()];
        let mut grid = vec![C64::new(0.0, 0.0); m * m];
        for a in 0..n {
            grid.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for (s, &(i1, i2)) in self.support.iter().enumerate() {
                grid[i1 * m + i2] = phi[s * n + a];
            }
            self.fft.forward(&mut grid);
            for (z, k) in grid.iter_mut().zip(&self.kernel_hat) {
                *z *= k;
            }
            self.fft.inverse(&mut grid);
            for (s, &(i1, i2)) in self.support.iter().enumerate() {
                out[s * n + a] = grid[i1 * m + i2];
            }
        }
        out
    }

    fn plane_wave_term(&self, sign: Sign, angle: f64, theta: CircleGrid) -> PlaneWaveTerm {
        let k = self.energy.sqrt();
        let nodes = theta.size();
        let mut waves = Vec::new();
        for q in 0..nodes {
            let tq = theta.angle(q);
            let w = theta.weight() * half_circle_weight(theta, q, angle, sign.value());
            if w == 0.0 {
                continue;
            }
            // −(1/(4πi)) w = (i/(4π)) w
            let c = C64::new(0.0, w / (4.0 * PI));
            let (kx, ky) = (k * tq.cos(), k * tq.sin());
            let exps = self.points.iter().map(|p| C64::from_polar(1.0, kx * p[0] + ky * p[1])).collect();
            waves.push((c, exps));
        }
        PlaneWaveTerm { waves }
    }

    /// Adds `∫ P(x−y) φ(y) dy` at the support nodes.
    fn add_plane_waves(&self, term: &PlaneWaveTerm, phi: &[C64], out: &mut [C64]) {
        let n = self.channels;
        let h2 = self.step * self.step;
        for (c, exps) in &term.waves {
            for a in 0..n {
                let mut amp = C64::new(0.0, 0.0);
                for (s, e) in exps.iter().enumerate() {
                    amp += e.conj() * phi[s * n + a];
                }
                let amp = amp * h2 * c;
                for (s, e) in exps.iter().enumerate() {
                    out[s * n + a] += e * amp;
                }
            }
        }
    }

    fn apply_operator(&self, u: &[C64], term: Option<&PlaneWaveTerm>) -> Vec<C64> {
        let phi = self.apply_potential(u);
        let mut k = self.convolve(&phi);
        if let Some(t) = term {
            self.add_plane_waves(t, &phi, &mut k);
        }
        u.iter().zip(&k).map(|(a, b)| a - b).collect()
    }

    fn incident_column(&self, l: [f64; 2], column: usize) -> Vec<C64> {
        let n = self.channels;
        let mut b = vec![C64::new(0.0, 0.0); self.support.len() * n];
        for (s, p) in self.points.iter().enumerate() {
            b[s * n + column] = C64::from_polar(1.0, l[0] * p[0] + l[1] * p[1]);
        }
        b
    }

    fn residual_max(&self, u: &[C64], b: &[C64], term: Option<&PlaneWaveTerm>) -> f64 {
        let au = self.apply_operator(u, term);
        au.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn pack(&self, l: [f64; 2], columns: Vec<Vec<C64>>, residual: f64, iterations: usize) -> SupportSolution {
        let n = self.channels;
        let mut psi = vec![C64::new(0.0, 0.0); self.support.len() * n * n];
        for (c, col) in columns.iter().enumerate() {
            for s in 0..self.support.len() {
                for a in 0..n {
                    psi[s * n * n + a * n + c] = col[s * n + a];
                }
            }
        }
        SupportSolution { incident: l, psi, residual, iterations }
    }

    /// Solves for the incident wave `e^{il·x} I` with kernel `green`.
    pub fn solve(&self, l: [f64; 2], green: GreenChoice) -> Result<SupportSolution> {
        let n = self.channels;
        if self.support.is_empty() {
            return Ok(self.pack(l, vec![vec![]; n], 0.0, 0));
        }
        let term = match green {
            GreenChoice::Plus => None,
            GreenChoice::Pm { sign, angle, theta } => Some(self.plane_wave_term(sign, angle, theta)),
        };
        let mut columns = Vec::with_capacity(n);
        let mut residual = 0.0_f64;
        let mut iterations = 0;
        for c in 0..n {
            let b = self.incident_column(l, c);
            let x = match (&self.dense, &term) {
                (Some(lu), None) => {
                    let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
                    lu.solve_in_place(&mut rhs);
                    (0..b.len()).map(|i| rhs[(i, 0)]).collect()
                }
                _ => {
                    let op = |u: &[C64]| self.apply_operator(u, term.as_ref());
                    let out = gmres(
                        op,
                        &b,
                        None,
                        self.options.gmres_tolerance,
                        self.options.gmres_restart,
                        self.options.gmres_max_iterations,
                        "lippmann-schwinger",
                    )?;
                    iterations += out.iterations;
                    out.solution
                }
            };
            residual = residual.max(self.residual_max(&x, &b, term.as_ref()));
            columns.push(x);
        }
        if !(residual <= self.options.residual_limit) {
            return Err(Error::NoConvergence { stage: "lippmann-schwinger residual", residual });
        }
        Ok(self.pack(l, columns, residual, iterations))
    }

    /// Outgoing solutions for many incident wave vectors; one multi-column
    /// solve when the dense factorization is available.
    pub fn solve_plus_many(&self, dirs: &[[f64; 2]]) -> Result<Vec<SupportSolution>> {
        let n = self.channels;
        let Some(lu) = &self.dense else {
            return dirs.par_iter().map(|&l| self.solve(l, GreenChoice::Plus)).collect();
        };
        let rows = self.unknowns();
        let mut rhs = Mat::<C64>::zeros(rows, dirs.len() * n);
        for (j, l) in dirs.iter().enumerate() {
            for (s, p) in self.points.iter().enumerate() {
                let e = C64::from_polar(1.0, l[0] * p[0] + l[1] * p[1]);
                for c in 0..n {
                    rhs[(s * n + c, j * n + c)] = e;
                }
            }
        }
        lu.solve_in_place(&mut rhs);
        dirs.par_iter()
            .enumerate()
            .map(|(j, &l)| {
                let columns: Vec<Vec<C64>> = (0..n).map(|c| (0..rows).map(|i| rhs[(i, j * n + c)]).collect()).collect();
                let mut residual = 0.0_f64;
                for (c, col) in columns.iter().enumerate() {
                    residual = residual.max(self.residual_max(col, &self.incident_column(l, c), None));
                }
                if !(residual <= self.options.residual_limit) {
                    return Err(Error::NoConvergence { stage: "lippmann-schwinger residual", residual });
                }
                Ok(self.pack(l, columns, residual, 0))
            })
            .collect()
    }

    /// `φ = Vψ` at the support nodes, blocks row-major.
    pub fn source(&self, sol: &SupportSolution) -> Vec<C64> {
        let n = self.channels;
        let nn = n * n;
        let mut phi = vec![C64::new(0.0, 0.0); self.support.len() * nn];
        for s in 0..self.support.len() {
            let vb = &self.vblocks[s * nn..(s + 1) * nn];
            let pb = &sol.psi[s * nn..(s + 1) * nn];
            for a in 0..n {
                for c in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..n {
                        acc += vb[a * n + b] * pb[b * n + c];
                    }
                    phi[s * nn + a * n + c] = acc;
                }
            }
        }
        phi
    }

    /// `(2π)⁻² ∫ e^{−il·x} V ψ dx` for each outgoing wave vector `l`.
    pub fn amplitudes(&self, sol: &SupportSolution, outgoing: &[[f64; 2]]) -> Vec<Mat<C64>> {
        let n = self.channels;
        let nn = n * n;
        let phi = self.source(sol);
        let scale = self.step * self.step / (4.0 * PI * PI);
        outgoing
            .iter()
            .map(|l| {
                let mut acc = vec![C64::new(0.0, 0.0); nn];
                for (s, p) in self.points.iter().enumerate() {
                    let e = C64::from_polar(1.0, -(l[0] * p[0] + l[1] * p[1]));
                    for (a, z) in acc.iter_mut().zip(&phi[s * nn..(s + 1) * nn]) {
                        *a += e * z;
                    }
                }
                Mat::from_fn(n, n, |a, b| acc[a * n + b] * scale)
            })
            .collect()
    }

    /// Coefficients `c_q h² Σ_s e^{−ik_q·x_s} φ_s` of the plane-wave part of
    /// `G±` applied to `φ`, paired with `k_q`.
    fn plane_amplitudes(&self, phi: &[C64], green: GreenChoice) -> Vec<([f64; 2], Vec<C64>)> {
        let GreenChoice::Pm { sign, angle, theta } = green else {
            return Vec::new();
        };
        let nn = self.channels * self.channels;
        let k = self.energy.sqrt();
        let h2 = self.step * self.step;
        let mut out = Vec::new();
        for q in 0..theta.size() {
            let tq = theta.angle(q);
            let w = theta.weight() * half_circle_weight(theta, q, angle, sign.value());
            if w == 0.0 {
                continue;
            }
            let c = C64::new(0.0, w / (4.0 * PI)) * h2;
            let kq = [k * tq.cos(), k * tq.sin()];
            let mut amp = vec![C64::new(0.0, 0.0); nn];
            for (si, p) in self.points.iter().enumerate() {
                let e = C64::from_polar(1.0, -(kq[0] * p[0] + kq[1] * p[1]));
                for (a, z) in amp.iter_mut().zip(&phi[si * nn..(si + 1) * nn]) {
                    *a += e * z;
                }
            }
            amp.iter_mut().for_each(|z| *z *= c);
            out.push((kq, amp));
        }
        out
    }

    /// Kernel-multiplied spectrum of every entry of `φ` on the padded grid.
    fn source_spectra(&self, phi: &[C64]) -> Vec<Vec<C64>> {
        let nn = self.channels * self.channels;
        let m = self.fft.size();
        (0..nn)
            .map(|e| {
                let mut grid = vec![C64::new(0.0, 0.0); m * m];
                for (s, &(i1, i2)) in self.support.iter().enumerate() {
                    grid[i1 * m + i2] = phi[s * nn + e];
                }
                self.fft.forward(&mut grid);
                for (z, k) in grid.iter_mut().zip(&self.kernel_hat) {
                    *z *= k;
                }
                grid
            })
            .collect()
    }

    fn finish_point(&self, p: [f64; 2], incident: [f64; 2], mut val: Vec<C64>, plane: &[([f64; 2], Vec<C64>)]) -> Mat<C64> {
        let n = self.channels;
        for (kq, amp) in plane {
            let w = C64::from_polar(1.0, kq[0] * p[0] + kq[1] * p[1]);
            for (v, a) in val.iter_mut().zip(amp) {
                *v += w * a;
            }
        }
        let inc = C64::from_polar(1.0, incident[0] * p[0] + incident[1] * p[1]);
        Mat::from_fn(n, n, |a, b| val[a * n + b] + if a == b { inc } else { C64::new(0.0, 0.0) })
    }

    /// `ψ` at arbitrary points `|x| ≤` [`Self::evaluation_radius`], by the
    /// trigonometric sum of the truncated-kernel convolution.
    pub fn evaluate(&self, sol: &SupportSolution, green: GreenChoice, targets: &[[f64; 2]]) -> Result<Vec<Mat<C64>>> {
        let limit = self.evaluation_radius() * (1.0 + 1e-12);
        if let Some(p) = targets.iter().find(|p| p[0].hypot(p[1]) > limit) {
            return Err(Error::Domain(format!("evaluation point {p:?} outside the valid radius {limit}")));
        }
        let m = self.fft.size();
        let phi = self.source(sol);
        let spectra = self.source_spectra(&phi);
        let plane = self.plane_amplitudes(&phi, green);
        let dxi = 2.0 * PI / (m as f64 * self.step);
        let signed = |i: usize| if i < m / 2 { i as f64 } else { i as f64 - m as f64 };
        let offset = self.half_width;
        Ok(targets
            .par_iter()
            .map(|p| {
                let e1: Vec<C64> = (0..m).map(|i| C64::from_polar(1.0, dxi * signed(i) * (p[0] + offset))).collect();
                let e2: Vec<C64> = (0..m).map(|i| C64::from_polar(1.0, dxi * signed(i) * (p[1] + offset))).collect();
                let val = spectra
                    .iter()
                    .map(|spec| {
                        let mut acc = C64::new(0.0, 0.0);
                        for a in 0..m {
                            let inner: C64 = spec[a * m..(a + 1) * m].iter().zip(&e2).map(|(x, y)| x * y).sum();
                            acc += e1[a] * inner;
                        }
                        acc
                    })
                    .collect();
                self.finish_point(*p, sol.incident, val, &plane)
            })
            .collect())
    }

    /// `ψ` at every node of the potential grid, node-major.
    pub fn evaluate_on_grid(&self, sol: &SupportSolution, green: GreenChoice) -> Vec<Mat<C64>> {
        let nn = self.channels * self.channels;
        let m = self.fft.size();
        let phi = self.source(sol);
        let mut spectra = self.source_spectra(&phi);
        for grid in &mut spectra {
            self.fft.inverse(grid);
        }
        let plane = self.plane_amplitudes(&phi, green);
        let mut out = Vec::with_capacity(self.nx * self.nx);
        for i1 in 0..self.nx {
            for i2 in 0..self.nx {
                let p = [-self.half_width + i1 as f64 * self.step, -self.half_width + i2 as f64 * self.step];
                let val: Vec<C64> = (0..nn).map(|e| spectra[e][i1 * m + i2]).collect();
                out.push(self.finish_point(p, sol.incident, val, &plane));
            }
        }
        out
    }
}
