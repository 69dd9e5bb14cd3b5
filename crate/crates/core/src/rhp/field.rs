use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::potentials::MatrixField;

/// Reconstruction points: every `stride`-th node of the `N_x` grid on
/// `[−L, L]²` that lies in the closed disk of radius `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub nx: usize,
    pub half_width: f64,
    pub stride: usize,
    pub radius: f64,
}

impl Window {
    pub fn new(nx: usize, half_width: f64, stride: usize, radius: f64) -> Result<Self> {
        if stride == 0 || nx % stride != 0 || nx / stride < 8 {
            return Err(Error::InvalidParams(format!("stride {stride} must divide N_x = {nx} and leave at least 8 nodes")));
        }
        if !(half_width > 0.0) || !(radius > 0.0) {
            return Err(Error::InvalidParams("window half width and radius must be positive".into()));
        }
        Ok(Self { nx, half_width, stride, radius })
    }

    /// Window matching the grid of `v`.
    pub fn for_field(v: &MatrixField, stride: usize, radius: f64) -> Result<Self> {
        Self::new(v.nx(), v.half_width(), stride, radius)
    }

    /// Nodes per side of the strided grid.
    pub fn size(&self) -> usize {
        self.nx / self.stride
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i * self.stride) as f64 * 2.0 * self.half_width / self.nx as f64
    }

    /// Strided indices `(i1, i2)` inside the disk.
    pub fn indices(&self) -> Vec<(usize, usize)> {
        let m = self.size();
        let mut out = Vec::new();
        for i1 in 0..m {
            for i2 in 0..m {
                if self.coord(i1).hypot(self.coord(i2)) <= self.radius {
                    out.push((i1, i2));
                }
            }
        }
        out
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.indices().into_iter().map(|(a, b)| [self.coord(a), self.coord(b)]).collect()
    }
}

/// `V_appr` at the window points.
#[derive(Debug, Clone)]
pub struct ReconstructionField {
    pub window: Window,
    pub channels: usize,
    pub energy: f64,
    pub torus_size: usize,
    pub source: String,
    values: Vec<Mat<C64>>,
}

impl ReconstructionField {
    pub fn new(window: Window, channels: usize, energy: f64, torus_size: usize, source: &str, values: Vec<Mat<C64>>) -> Result<Self> {
        if values.len() != window.indices().len() || values.iter().any(|m| m.nrows() != channels || m.ncols() != channels) {
            return Err(Error::GridMismatch("reconstruction values do not match the window".into()));
        }
        Ok(Self { window, channels, energy, torus_size, source: source.to_string(), values })
    }

    pub fn values(&self) -> &[Mat<C64>] {
        &self.values
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.window.points()
    }

    /// Values on the strided grid, zero outside the window.
    pub fn to_matrix_field(&self) -> Result<MatrixField> {
        let m = self.window.size();
        let n = self.channels;
        let mut data = vec![C64::new(0.0, 0.0); m * m * n * n];
        for ((i1, i2), v) in self.window.indices().into_iter().zip(&self.values) {
            for a in 0..n {
                for b in 0..n {
                    data[(i1 * m + i2) * n * n + a * n + b] = v[(a, b)];
                }
            }
        }
        let radius = self.window.radius.min(self.window.half_width * std::f64::consts::SQRT_2);
        MatrixField::new(n, m, self.window.half_width, radius, data)
    }

    fn check(&self, v: &MatrixField) -> Result<()> {
        if v.nx() != self.window.nx || v.half_width() != self.window.half_width || v.channels() != self.channels {
            return Err(Error::GridMismatch("reference field does not match the reconstruction grid".into()));
        }
        Ok(())
    }

    /// `(Σ ‖V_appr − V‖_F² / Σ ‖V‖_F²)^{1/2}` over the window points.
    pub fn relative_l2_error(&self, v: &MatrixField) -> Result<f64> {
        self.check(v)?;
        let s = self.window.stride;
        let (mut num, mut den) = (0.0, 0.0);
        for ((i1, i2), w) in self.window.indices().into_iter().zip(&self.values) {
            let t = v.at(i1 * s, i2 * s);
            num += (w - &t).squared_norm_l2();
            den += t.squared_norm_l2();
        }
        if den == 0.0 {
            return Err(Error::Domain("reference field vanishes on the window".into()));
        }
        Ok((num / den).sqrt())
    }

    /// Largest entrywise error over the window points.
    pub fn max_error(&self, v: &MatrixField) -> Result<f64> {
        self.check(v)?;
        let s = self.window.stride;
        Ok(self.window.indices().into_iter().zip(&self.values).map(|((i1, i2), w)| (w - v.at(i1 * s, i2 * s)).norm_max()).fold(0.0, f64::max))
    }
}
