use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::CircleGrid;

/// Selects `γ = ±k̂⊥`, i.e. the half circle `±θ·k⊥ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

/// Energy and direction of `k = √E (cos θ, sin θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveParams {
    pub energy: f64,
    pub angle: f64,
    pub sign: Sign,
}

impl WaveParams {
    pub fn new(energy: f64, angle: f64, sign: Sign) -> Result<Self> {
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::InvalidParams(format!("energy must be positive, got {energy}")));
        }
        Ok(Self { energy, angle, sign })
    }

    pub fn momentum(&self) -> [f64; 2] {
        let r = self.energy.sqrt();
        [r * self.angle.cos(), r * self.angle.sin()]
    }

    /// Unit vector `k̂⊥ = (−k₂, k₁)/|k|`.
    pub fn perp(&self) -> [f64; 2] {
        [-self.angle.sin(), self.angle.cos()]
    }
}

/// `n×n` blocks on the `N×N` nodes `(λ_j, λ'_l)` of `T×T` at energy `E`.
/// Stored with `j` outermost, then `l`, then row-major entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusKernel {
    grid: CircleGrid,
    channels: usize,
    energy: f64,
    values: Vec<C64>,
}

impl TorusKernel {
    pub fn new(grid: CircleGrid, channels: usize, energy: f64, values: Vec<C64>) -> Result<Self> {
        let n = grid.size();
        if channels == 0 {
            return Err(Error::InvalidParams("channels must be positive".into()));
        }
        if values.len() != n * n * channels * channels {
            return Err(Error::GridMismatch(format!(
                "torus kernel needs {} values, got {}",
                n * n * channels * channels,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParams("torus kernel has non-finite entries".into()));
        }
        Ok(Self { grid, channels, energy, values })
    }

    pub fn zeros(grid: CircleGrid, channels: usize, energy: f64) -> Self {
        let n = grid.size();
        Self { grid, channels, energy, values: vec![C64::new(0.0, 0.0); n * n * channels * channels] }
    }

    /// Builds the kernel row by row.
    pub fn from_rows(grid: CircleGrid, channels: usize, energy: f64, rows: Vec<Vec<Mat<C64>>>) -> Result<Self> {
        let n = grid.size();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::GridMismatch("row count does not match the torus grid".into()));
        }
        let mut values = Vec::with_capacity(n * n * channels * channels);
        for row in &rows {
            for m in row {
                for a in 0..channels {
                    for b in 0..channels {
                        values.push(m[(a, b)]);
                    }
                }
            }
        }
        Self::new(grid, channels, energy, values)
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

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    fn offset(&self, j: usize, l: usize) -> usize {
        (j * self.grid.size() + l) * self.channels * self.channels
    }

    pub fn entry(&self, j: usize, l: usize, a: usize, b: usize) -> C64 {
        self.values[self.offset(j, l) + a * self.channels + b]
    }

    pub fn block(&self, j: usize, l: usize) -> Mat<C64> {
        let o = self.offset(j, l);
        let n = self.channels;
        Mat::from_fn(n, n, |a, b| self.values[o + a * n + b])
    }

    pub fn set_block(&mut self, j: usize, l: usize, m: &Mat<C64>) {
        let o = self.offset(j, l);
        let n = self.channels;
        for a in 0..n {
            for b in 0..n {
                self.values[o + a * n + b] = m[(a, b)];
            }
        }
    }

    pub fn check_compatible(&self, other: &TorusKernel) -> Result<()> {
        if self.grid != other.grid || self.channels != other.channels {
            return Err(Error::GridMismatch("torus kernels on different grids".into()));
        }
        if (self.energy - other.energy).abs() > 1e-12 * self.energy.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("energies differ: {} vs {}", self.energy, other.energy)));
        }
        Ok(())
    }

    /// `L²(T×T)` norm with Frobenius entries and arclength weights.
    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.weight();
        (w * w * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn combine(&self, a: C64, other: &TorusKernel, b: C64) -> Result<TorusKernel> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn sub(&self, other: &TorusKernel) -> Result<TorusKernel> {
        self.combine(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0))
    }

    pub fn scale(&self, c: C64) -> TorusKernel {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `‖self − other‖ / ‖other‖` in `L²(T×T)`.
    pub fn relative_l2_distance(&self, other: &TorusKernel) -> Result<f64> {
        let d = self.sub(other)?.l2_norm();
        let base = other.l2_norm();
        Ok(if base == 0.0 { d } else { d / base })
    }
}
