use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// `n×n` complex matrices sampled on the square `[−L, L]²` at
/// `x_j = −L + j·h`, `h = 2L/N_x`. Values are stored node-major (first
/// coordinate outermost), then row-major within each matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    channels: usize,
    nx: usize,
    half_width: f64,
    support_radius: f64,
    values: Vec<C64>,
}

impl MatrixField {
    pub fn new(channels: usize, nx: usize, half_width: f64, support_radius: f64, values: Vec<C64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidParams("channel count must be positive".into()));
        }
        if nx < 8 {
            return Err(Error::InvalidParams(format!("N_x must be at least 8, got {nx}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParams(format!("half width must be positive, got {half_width}")));
        }
        // Fields such as μ or ψ fill the whole square; √2·L marks that case.
        if !(support_radius > 0.0) || support_radius > half_width * std::f64::consts::SQRT_2 * (1.0 + 1e-12) {
            return Err(Error::InvalidParams(format!(
                "support radius {support_radius} must lie in (0, √2·L_x], L_x = {half_width}"
            )));
        }
        if values.len() != nx * nx * channels * channels {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                nx * nx * channels * channels,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParams("field contains non-finite values".into()));
        }
        Ok(Self { channels, nx, half_width, support_radius, values })
    }

    pub fn zeros(channels: usize, nx: usize, half_width: f64, support_radius: f64) -> Result<Self> {
        Self::new(channels, nx, half_width, support_radius, vec![C64::new(0.0, 0.0); nx * nx * channels * channels])
    }

    /// Samples `f(x₁, x₂)` at every node; values outside the support disk
    /// are set to zero.
    pub fn from_fn(
        channels: usize,
        nx: usize,
        half_width: f64,
        support_radius: f64,
        f: impl Fn(f64, f64) -> Mat<C64>,
    ) -> Result<Self> {
        let h = 2.0 * half_width / nx as f64;
        let nn = channels * channels;
        let mut values = vec![C64::new(0.0, 0.0); nx * nx * nn];
        for i1 in 0..nx {
            let x1 = -half_width + i1 as f64 * h;
            for i2 in 0..nx {
                let x2 = -half_width + i2 as f64 * h;
                if x1.hypot(x2) > support_radius {
                    continue;
                }
                let m = f(x1, x2);
                let base = (i1 * nx + i2) * nn;
                for a in 0..channels {
                    for b in 0..channels {
                        values[base + a * channels + b] = m[(a, b)];
                    }
                }
            }
        }
        Self::new(channels, nx, half_width, support_radius, values)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.nx as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }

    pub fn point(&self, i1: usize, i2: usize) -> [f64; 2] {
        [self.coord(i1), self.coord(i2)]
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn entry(&self, i1: usize, i2: usize, a: usize, b: usize) -> C64 {
        self.values[(i1 * self.nx + i2) * self.channels * self.channels + a * self.channels + b]
    }

    pub fn at(&self, i1: usize, i2: usize) -> Mat<C64> {
        Mat::from_fn(self.channels, self.channels, |a, b| self.entry(i1, i2, a, b))
    }

    /// Node indices `(i1, i2)` inside the closed support disk.
    pub fn support_nodes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i1 in 0..self.nx {
            for i2 in 0..self.nx {
                let [x1, x2] = self.point(i1, i2);
                if x1.hypot(x2) <= self.support_radius {
                    out.push((i1, i2));
                }
            }
        }
        out
    }

    /// Sixth-order tensor Lagrange interpolation; zero outside the support
    /// disk and outside the grid.
    pub fn interpolate(&self, x: [f64; 2]) -> Mat<C64> {
        let n = self.channels;
        let mut out = Mat::<C64>::zeros(n, n);
        if x[0].hypot(x[1]) > self.support_radius {
            return out;
        }
        let h = self.step();
        let (s1, w1) = lagrange_stencil((x[0] + self.half_width) / h, self.nx);
        let (s2, w2) = lagrange_stencil((x[1] + self.half_width) / h, self.nx);
        let nn = n * n;
        for (p, wp) in w1.iter().enumerate() {
            for (q, wq) in w2.iter().enumerate() {
                let w = wp * wq;
                let base = ((s1 + p) * self.nx + s2 + q) * nn;
                for a in 0..n {
                    for b in 0..n {
                        out[(a, b)] += self.values[base + a * n + b] * w;
                    }
                }
            }
        }
        out
    }

    /// Largest entry modulus over all nodes.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `a·self + b·other`; fields must share the grid.
    pub fn combine(&self, a: C64, other: &MatrixField, b: C64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { support_radius: self.support_radius.max(other.support_radius), values, ..self.clone() })
    }

    pub fn check_same_grid(&self, other: &MatrixField) -> Result<()> {
        if self.channels != other.channels || self.nx != other.nx || self.half_width != other.half_width {
            return Err(Error::GridMismatch("matrix fields on different grids".into()));
        }
        Ok(())
    }

    /// Largest deviation from Hermitian symmetry over all nodes.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i1 in 0..self.nx {
            for i2 in 0..self.nx {
                for a in 0..self.channels {
                    for b in 0..self.channels {
                        let d = self.entry(i1, i2, a, b) - self.entry(i1, i2, b, a).conj();
                        worst = worst.max(d.norm());
                    }
                }
            }
        }
        worst
    }
}

fn lagrange_stencil(t: f64, nx: usize) -> (usize, [f64; 6]) {
    let start = (t.floor() as i64 - 2).clamp(0, nx as i64 - 6) as usize;
    let mut w = [1.0; 6];
    for (p, wp) in w.iter_mut().enumerate() {
        for q in 0..6 {
            if q != p {
                *wp *= (t - (start + q) as f64) / (p as f64 - q as f64);
            }
        }
    }
    (start, w)
}

/// Matrix samples on the frequency lattice `p = (m₁, m₂)·Δp`,
/// `m ∈ [−M/2, M/2)`, stored in ascending `m` order, node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyField {
    channels: usize,
    size: usize,
    spacing: f64,
    values: Vec<C64>,
}

impl FrequencyField {
    pub fn new(channels: usize, size: usize, spacing: f64, values: Vec<C64>) -> Result<Self> {
        if channels == 0 || size == 0 || size % 2 != 0 {
            return Err(Error::InvalidParams("frequency lattice needs positive channels and even size".into()));
        }
        if !(spacing > 0.0) {
            return Err(Error::InvalidParams("frequency spacing must be positive".into()));
        }
        if values.len() != size * size * channels * channels {
            return Err(Error::GridMismatch("frequency field value count".into()));
        }
        Ok(Self { channels, size, spacing, values })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Signed lattice index stored at position `i`.
    pub fn index_of(&self, i: usize) -> i64 {
        i as i64 - (self.size / 2) as i64
    }

    pub fn frequency(&self, i1: usize, i2: usize) -> [f64; 2] {
        [self.index_of(i1) as f64 * self.spacing, self.index_of(i2) as f64 * self.spacing]
    }

    pub fn entry(&self, i1: usize, i2: usize, a: usize, b: usize) -> C64 {
        self.values[(i1 * self.size + i2) * self.channels * self.channels + a * self.channels + b]
    }

    pub fn at(&self, i1: usize, i2: usize) -> Mat<C64> {
        Mat::from_fn(self.channels, self.channels, |a, b| self.entry(i1, i2, a, b))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
