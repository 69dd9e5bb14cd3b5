//! Dirichlet-to-Neumann maps of the unit disk: the analytic map of a
//! diagonal constant potential (zero included) and a polar finite-difference
//! simulator for general potentials.

mod numeric;

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;

pub use numeric::{dtn_numeric, dtn_scattering_difference, DtnOptions, DtnSolution};

use crate::error::{Error, Result};
use crate::numerics::special::bessel_j_log_derivative;
use crate::numerics::CircleGrid;

/// Schwartz kernel on `N_b` equispaced boundary nodes, `n×n` blocks,
/// stored `(i, j)` node pairs outermost then row-major entries. Arc weights
/// are not folded in: `(Φg)(x_i) = Σ_j K(x_i, x_j) g(x_j)·2π/N_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryKernel {
    grid: CircleGrid,
    channels: usize,
    energy: f64,
    values: Vec<C64>,
}

impl BoundaryKernel {
    pub fn new(grid: CircleGrid, channels: usize, energy: f64, values: Vec<C64>) -> Result<Self> {
        let nb = grid.size();
        if channels == 0 {
            return Err(Error::InvalidParams("channels must be positive".into()));
        }
        if values.len() != nb * nb * channels * channels {
            return Err(Error::GridMismatch(format!(
                "boundary kernel needs {} values, got {}",
                nb * nb * channels * channels,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParams("boundary kernel has non-finite entries".into()));
        }
        Ok(Self { grid, channels, energy, values })
    }

    pub fn zeros(grid: CircleGrid, channels: usize, energy: f64) -> Self {
        let nb = grid.size();
        Self { grid, channels, energy, values: vec![C64::new(0.0, 0.0); nb * nb * channels * channels] }
    }

    /// From a dense `(N_b·n)×(N_b·n)` matrix indexed `(i·n + a, j·n + b)`.
    pub fn from_dense(grid: CircleGrid, channels: usize, energy: f64, m: &Mat<C64>) -> Result<Self> {
        let dim = grid.size() * channels;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::GridMismatch("dense kernel has the wrong size".into()));
        }
        let nb = grid.size();
        let n = channels;
        let mut values = Vec::with_capacity(dim * dim);
        for i in 0..nb {
            for j in 0..nb {
                for a in 0..n {
                    for b in 0..n {
                        values.push(m[(i * n + a, j * n + b)]);
                    }
                }
            }
        }
        Self::new(grid, channels, energy, values)
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let n = self.channels;
        let nb = self.grid.size();
        Mat::from_fn(nb * n, nb * n, |r, c| self.entry(r / n, c / n, r % n, c % n))
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn size(&self) -> usize {
        self.grid.size()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn weight(&self) -> f64 {
        self.grid.weight()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        (i * self.grid.size() + j) * self.channels * self.channels
    }

    pub fn entry(&self, i: usize, j: usize, a: usize, b: usize) -> C64 {
        self.values[self.offset(i, j) + a * self.channels + b]
    }

    pub fn block(&self, i: usize, j: usize) -> Mat<C64> {
        let o = self.offset(i, j);
        let n = self.channels;
        Mat::from_fn(n, n, |a, b| self.values[o + a * n + b])
    }

    pub fn check_compatible(&self, other: &BoundaryKernel) -> Result<()> {
        if self.grid != other.grid || self.channels != other.channels {
            return Err(Error::GridMismatch("boundary kernels on different grids".into()));
        }
        if (self.energy - other.energy).abs() > 1e-12 * self.energy.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("energies differ: {} vs {}", self.energy, other.energy)));
        }
        Ok(())
    }

    /// Largest entry modulus over all blocks.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `L²(∂D×∂D)` norm with arc weights.
    pub fn l2_norm(&self) -> f64 {
        let w = self.weight();
        (w * w * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn combine(&self, a: C64, other: &BoundaryKernel, b: C64) -> Result<BoundaryKernel> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn scale(&self, c: C64) -> BoundaryKernel {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Applies the kernel to nodal boundary data with arc weights.
    pub fn apply(&self, g: &[Mat<C64>]) -> Result<Vec<Mat<C64>>> {
        let nb = self.grid.size();
        if g.len() != nb || g.iter().any(|m| m.nrows() != self.channels) {
            return Err(Error::GridMismatch("boundary data does not match the kernel".into()));
        }
        let cols = g[0].ncols();
        let w = C64::new(self.weight(), 0.0);
        Ok((0..nb)
            .map(|i| {
                let mut acc = Mat::<C64>::zeros(self.channels, cols);
                for (j, gj) in g.iter().enumerate() {
                    acc += self.block(i, j) * gj;
                }
                acc * faer::Scale(w)
            })
            .collect())
    }

    /// Largest deviation of `K(x, y)` from `K(y, x)*`, the self-adjointness
    /// defect of the operator.
    pub fn hermitian_defect(&self) -> f64 {
        let nb = self.grid.size();
        let n = self.channels;
        let mut worst = 0.0_f64;
        for i in 0..nb {
            for j in 0..nb {
                for a in 0..n {
                    for b in 0..n {
                        worst = worst.max((self.entry(i, j, a, b) - self.entry(j, i, b, a).conj()).norm());
                    }
                }
            }
        }
        worst
    }
}

/// `A − B` for kernels on the same grid and energy.
pub fn kernel_difference(a: &BoundaryKernel, b: &BoundaryKernel) -> Result<BoundaryKernel> {
    a.combine(C64::new(1.0, 0.0), b, C64::new(-1.0, 0.0))
}

/// `x J'_m(x)/J_m(x)`, failing with `ResonantEnergy` when `J_m(x)` is at a
/// zero in the normalized sense `|J|/√(J² + J'²) < 1e−12`.
pub(crate) fn log_derivative_checked(order: usize, x: f64, energy: f64) -> Result<f64> {
    let l = bessel_j_log_derivative(order, x)?;
    if !l.is_finite() || 1.0 / (1.0 + l * l).sqrt() < 1e-12 {
        return Err(Error::ResonantEnergy {
            energy,
            detail: format!("J_{order} vanishes at {x}"),
        });
    }
    Ok(l)
}

/// Symbol `σ_m = √E J'_{|m|}(√E)/J_{|m|}(√E)` of the zero-potential map.
pub fn disk_symbol(order: usize, energy: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::InvalidParams(format!("energy must be positive, got {energy}")));
    }
    let k = energy.sqrt();
    Ok(k * log_derivative_checked(order, k, energy)?)
}

/// Nodal kernel of an operator given in the Fourier basis: `modal` is
/// `(N_b·n)×(N_b·n)` indexed `(p·n + a, q·n + b)` with `p, q` FFT-order
/// mode indices, acting on `ĝ_q = N_b⁻¹ Σ_j g_j e^{−i m_q θ_j}`.
pub(crate) fn modal_to_nodal(grid: CircleGrid, channels: usize, energy: f64, modal: &Mat<C64>) -> Result<BoundaryKernel> {
    let nb = grid.size();
    let n = channels;
    let waves = Mat::from_fn(nb, nb, |i, p| C64::from_polar(1.0, grid.mode(p) as f64 * grid.angle(i)));
    let waves_h = waves.adjoint().to_owned();
    let mut dense = Mat::<C64>::zeros(nb * n, nb * n);
    for a in 0..n {
        for b in 0..n {
            let block = Mat::from_fn(nb, nb, |p, q| modal[(p * n + a, q * n + b)]);
            let nodal = &waves * &block * &waves_h;
            for i in 0..nb {
                for j in 0..nb {
                    dense[(i * n + a, j * n + b)] = nodal[(i, j)] / (2.0 * PI);
                }
            }
        }
    }
    BoundaryKernel::from_dense(grid, channels, energy, &dense)
}

/// Analytic map of `diag(Λ)·1_D`: channel `c` is the disk map at energy
/// `E − Λ_c`. An empty `diag` means the zero potential on `channels`.
pub fn dtn_background_disk(energy: f64, boundary_nodes: usize, channels: usize, diag: &[f64]) -> Result<BoundaryKernel> {
    let grid = CircleGrid::new(boundary_nodes)?;
    if !diag.is_empty() && diag.len() != channels {
        return Err(Error::InvalidParams(format!("background has {} entries for {channels} channels", diag.len())));
    }
    let n = channels;
    let mut modal = Mat::<C64>::zeros(boundary_nodes * n, boundary_nodes * n);
    for p in 0..boundary_nodes {
        let m = grid.mode(p).unsigned_abs() as usize;
        for c in 0..n {
            let shift = diag.get(c).copied().unwrap_or(0.0);
            if !(energy - shift > 0.0) {
                return Err(Error::InvalidParams(format!("E = {energy} must exceed background entry {shift}")));
            }
            modal[(p * n + c, p * n + c)] = C64::new(disk_symbol(m, energy - shift)?, 0.0);
        }
    }
    modal_to_nodal(grid, channels, energy, &modal)
}

/// `Φ₀(E)`: the zero-potential map, tensored with the `n×n` identity.
pub fn dtn_zero_disk(energy: f64, boundary_nodes: usize, channels: usize) -> Result<BoundaryKernel> {
    dtn_background_disk(energy, boundary_nodes, channels, &[])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_data_returns_sigma_zero() {
        let e = 30.0;
        let phi = dtn_zero_disk(e, 32, 2).unwrap();
        let g: Vec<Mat<C64>> = (0..32).map(|_| Mat::identity(2, 2)).collect();
        let out = phi.apply(&g).unwrap();
        let k = e.sqrt();
        let (j0, j1) = (crate::numerics::special::bessel_j(0, k).unwrap().0, crate::numerics::special::bessel_j(1, k).unwrap().0);
        let sigma0 = -k * j1 / j0;
        for m in &out {
            assert!((m - Mat::<C64>::identity(2, 2) * faer::Scale(C64::new(sigma0, 0.0))).norm_max() < 1e-10 * sigma0.abs().max(1.0));
        }
    }

    #[test]
    fn kernel_is_circulant_and_real_symmetric() {
        let phi = dtn_zero_disk(50.0, 16, 1).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let shifted = phi.entry((i + 3) % 16, (j + 3) % 16, 0, 0);
                assert!((phi.entry(i, j, 0, 0) - shifted).norm() < 1e-12);
            }
        }
        assert!(phi.hermitian_defect() < 1e-12);
    }

    #[test]
    fn symbol_is_even_and_tends_to_harmonic_limit() {
        for m in 0..10 {
            assert!((disk_symbol(m, 1e-4).unwrap() - m as f64).abs() < 1e-2);
        }
        // Modes ±m share a symbol by construction; check the nodal kernel
        // acting on e^{±3iθ}.
        let grid = CircleGrid::new(16).unwrap();
        let phi = dtn_zero_disk(20.0, 16, 1).unwrap();
        let s3 = disk_symbol(3, 20.0).unwrap();
        for sign in [1.0, -1.0] {
            let g: Vec<Mat<C64>> = (0..16).map(|j| Mat::from_fn(1, 1, |_, _| C64::from_polar(1.0, sign * 3.0 * grid.angle(j)))).collect();
            let out = phi.apply(&g).unwrap();
            for (o, gi) in out.iter().zip(&g) {
                assert!((o[(0, 0)] - gi[(0, 0)] * s3).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn resonant_energy_is_detected() {
        // First zero of J0.
        let z = 2.404_825_557_695_773;
        match dtn_zero_disk(z * z, 8, 1) {
            Err(Error::ResonantEnergy { .. }) => {}
            other => panic!("expected resonance, got {other:?}"),
        }
    }

    #[test]
    fn differences_telescope() {
        let a = dtn_zero_disk(40.0, 8, 2).unwrap();
        let b = dtn_background_disk(40.0, 8, 2, &[1.0, 2.0]).unwrap();
        let c = dtn_background_disk(40.0, 8, 2, &[0.5, -1.0]).unwrap();
        assert_eq!(kernel_difference(&a, &a).unwrap().max_norm(), 0.0);
        let lhs = kernel_difference(&b, &a).unwrap().combine(C64::new(1.0, 0.0), &kernel_difference(&c, &b).unwrap(), C64::new(1.0, 0.0)).unwrap();
        let rhs = kernel_difference(&c, &a).unwrap();
        assert!(kernel_difference(&lhs, &rhs).unwrap().max_norm() < 1e-12);
        assert!(kernel_difference(&a, &dtn_zero_disk(41.0, 8, 2).unwrap()).is_err());
    }
}
