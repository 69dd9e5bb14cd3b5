//! Uniform discretization of the unit circle and matrix-valued functions on it.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// `N` equispaced nodes `λ_j = exp(2πij/N)` on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircleGrid {
    size: usize,
}

impl CircleGrid {
    /// Requires an even, positive size. Powers of two are the expected case
    /// but any even size is accepted.
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || size % 2 != 0 {
            return Err(Error::InvalidParams(format!("circle grid size must be even and positive, got {size}")));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Arclength weight per node, `2π/N`.
    pub fn weight(&self) -> f64 {
        2.0 * PI / self.size as f64
    }

    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.size as f64
    }

    pub fn node(&self, j: usize) -> C64 {
        C64::from_polar(1.0, self.angle(j))
    }

    pub fn nodes(&self) -> Vec<C64> {
        (0..self.size).map(|j| self.node(j)).collect()
    }

    /// Signed Fourier mode stored at FFT index `idx`, in `[-N/2, N/2)`.
    pub fn mode(&self, idx: usize) -> i64 {
        let n = self.size as i64;
        let k = idx as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Circulant row of the discrete Cauchy projector: entry `d` is the
    /// coefficient linking output node `j` to input node `j - d`.
    pub fn cauchy_circulant(&self, side: Side) -> Vec<C64> {
        let n = self.size;
        (0..n)
            .map(|d| {
                let mut acc = C64::new(0.0, 0.0);
                for idx in 0..n {
                    let k = self.mode(idx);
                    let keep = match side {
                        Side::Inside => k >= 0,
                        Side::Outside => k < 0,
                    };
                    if keep {
                        acc += C64::from_polar(1.0, 2.0 * PI * (k * d as i64) as f64 / n as f64);
                    }
                }
                let scaled = acc / n as f64;
                match side {
                    Side::Inside => scaled,
                    Side::Outside => -scaled,
                }
            })
            .collect()
    }
}

/// Which boundary value of the Cauchy integral to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `C₊`, the limit from inside the disk.
    Inside,
    /// `C₋`, the limit from outside.
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Matrix-valued samples on a [`CircleGrid`].
#[derive(Debug, Clone)]
pub struct CircleFunction {
    grid: CircleGrid,
    channels: usize,
    values: Vec<Mat<C64>>,
}

impl CircleFunction {
    pub fn new(grid: CircleGrid, values: Vec<Mat<C64>>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::GridMismatch(format!("{} values for a grid of {}", values.len(), grid.size())));
        }
        let channels = values.first().map(|m| m.nrows()).unwrap_or(0);
        if channels == 0 || values.iter().any(|m| m.nrows() != channels || m.ncols() != channels) {
            return Err(Error::InvalidParams("circle function values must be square and non-empty".into()));
        }
        Ok(Self { grid, channels, values })
    }

    pub fn from_fn(grid: CircleGrid, channels: usize, f: impl Fn(usize, C64) -> Mat<C64>) -> Self {
        let values = (0..grid.size()).map(|j| f(j, grid.node(j))).collect();
        Self { grid, channels, values }
    }

    /// Identity matrix at every node.
    pub fn identity(grid: CircleGrid, channels: usize) -> Self {
        Self::from_fn(grid, channels, |_, _| Mat::identity(channels, channels))
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[Mat<C64>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Mat<C64>> {
        self.values
    }

    /// Max over nodes of the largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(max_entry).fold(0.0, f64::max)
    }

    /// `L²(T)` norm with Frobenius entries.
    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.weight();
        (w * self.values.iter().map(|m| m.norm_l2().powi(2)).sum::<f64>()).sqrt()
    }

    pub fn sub(&self, other: &CircleFunction) -> Result<CircleFunction> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, channels: self.channels, values })
    }

    fn check_same(&self, other: &CircleFunction) -> Result<()> {
        if self.grid != other.grid || self.channels != other.channels {
            return Err(Error::GridMismatch("circle functions on different grids".into()));
        }
        Ok(())
    }
}

/// Largest entry modulus of a matrix.
pub fn max_entry(m: &Mat<C64>) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// Entrywise FFT along the node index. `scale` multiplies the result.
fn transform_entries(values: &[Mat<C64>], inverse: bool, scale: f64) -> Vec<Mat<C64>> {
    let n = values.len();
    let ch = values[0].nrows();
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let mut out: Vec<Mat<C64>> = (0..n).map(|_| Mat::zeros(ch, ch)).collect();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for a in 0..ch {
        for b in 0..ch {
            for (slot, v) in buf.iter_mut().zip(values) {
                *slot = v[(a, b)];
            }
            fft.process(&mut buf);
            for (o, v) in out.iter_mut().zip(&buf) {
                o[(a, b)] = v * scale;
            }
        }
    }
    out
}

/// Unitary discrete Fourier transform over the angular index, applied
/// entrywise. Forward output is in FFT order: index `idx` holds the mode
/// [`CircleGrid::mode`]`(idx)`, i.e. the coefficient of `ζ^k`.
pub fn circle_fourier(u: &CircleFunction, direction: Direction) -> Vec<Mat<C64>> {
    let scale = 1.0 / (u.grid.size() as f64).sqrt();
    transform_entries(&u.values, direction == Direction::Inverse, scale)
}

/// Spectral realization of the Cauchy boundary projectors `C₊` (inside)
/// and `C₋` (outside). The Nyquist mode `k = -N/2` goes to `C₋`.
pub fn cauchy_project(u: &CircleFunction, side: Side) -> CircleFunction {
    let n = u.grid.size();
    let mut coeffs = transform_entries(&u.values, false, 1.0 / n as f64);
    for (idx, c) in coeffs.iter_mut().enumerate() {
        let k = u.grid.mode(idx);
        let keep = match side {
            Side::Inside => k >= 0,
            Side::Outside => k < 0,
        };
        if !keep {
            *c = Mat::zeros(u.channels, u.channels);
        } else if side == Side::Outside {
            *c = -&*c;
        }
    }
    let values = transform_entries(&coeffs, true, 1.0);
    CircleFunction { grid: u.grid, channels: u.channels, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_fn(grid: CircleGrid, f: impl Fn(C64) -> C64) -> CircleFunction {
        CircleFunction::from_fn(grid, 1, |_, z| Mat::from_fn(1, 1, |_, _| f(z)))
    }

    fn random_trig_poly(grid: CircleGrid, channels: usize, degree: i64, seed: u64) -> CircleFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<Vec<C64>> = (-degree..degree)
            .map(|_| (0..channels * channels).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .collect();
        CircleFunction::from_fn(grid, channels, |_, z| {
            Mat::from_fn(channels, channels, |a, b| {
                coeffs.iter().enumerate().map(|(i, c)| c[a * channels + b] * z.powi(i as i32 - degree as i32)).sum()
            })
        })
    }

    #[test]
    fn grid_weights_sum_to_two_pi() {
        let g = CircleGrid::new(64).unwrap();
        assert!((g.weight() * 64.0 - 2.0 * PI).abs() < 1e-14);
        for z in g.nodes() {
            assert!((z.norm() - 1.0).abs() < 1e-15);
        }
        assert!(CircleGrid::new(7).is_err());
    }

    #[test]
    fn projector_on_single_modes() {
        let g = CircleGrid::new(32).unwrap();
        let u = scalar_fn(g, |z| z);
        let plus = cauchy_project(&u, Side::Inside);
        let minus = cauchy_project(&u, Side::Outside);
        for (j, z) in g.nodes().into_iter().enumerate() {
            assert!((plus.values()[j][(0, 0)] - z).norm() < 1e-14);
            assert!(minus.values()[j][(0, 0)].norm() < 1e-14);
        }
        let v = scalar_fn(g, |z| 1.0 / z);
        let plus = cauchy_project(&v, Side::Inside);
        let minus = cauchy_project(&v, Side::Outside);
        for (j, z) in g.nodes().into_iter().enumerate() {
            assert!(plus.values()[j][(0, 0)].norm() < 1e-14);
            assert!((minus.values()[j][(0, 0)] + 1.0 / z).norm() < 1e-14);
        }
    }

    /// Principal-value contour quadrature oracle for the Plemelj jump: for a
    /// trigonometric polynomial, C₊u(λ) = u(λ)/2 + PV(1/2πi)∮u/(ζ-λ)dζ.
    /// The PV integral is evaluated with the singularity-subtracted
    /// trapezoid rule on a much finer grid.
    #[test]
    fn plemelj_jump_against_contour_quadrature() {
        let g = CircleGrid::new(32).unwrap();
        let u = random_trig_poly(g, 2, 12, 7);
        let plus = cauchy_project(&u, Side::Inside);
        let minus = cauchy_project(&u, Side::Outside);
        let diff = plus.sub(&minus).unwrap().sub(&u).unwrap();
        assert!(diff.max_norm() < 1e-12);

        // Independent check of C₊ itself through the PV contour integral.
        let fine = 4096;
        let eval = |z: C64, a: usize, b: usize| -> C64 {
            // re-evaluate the trig polynomial through its samples' DFT would
            // share code; use the interpolating sum directly instead.
            let n = g.size();
            let mut acc = C64::new(0.0, 0.0);
            for idx in 0..n {
                let k = g.mode(idx);
                let mut c = C64::new(0.0, 0.0);
                for (j, zj) in g.nodes().into_iter().enumerate() {
                    c += u.values()[j][(a, b)] * zj.powi(-(k as i32));
                }
                acc += c / n as f64 * z.powi(k as i32);
            }
            acc
        };
        for j in [0usize, 5, 17] {
            let lam = g.node(j);
            for (a, b) in [(0, 0), (1, 0)] {
                let ul = eval(lam, a, b);
                let mut pv = C64::new(0.0, 0.0);
                for q in 0..fine {
                    let t = 2.0 * PI * (q as f64 + 0.5) / fine as f64 + lam.arg();
                    let zeta = C64::from_polar(1.0, t);
                    let dz = C64::i() * zeta * (2.0 * PI / fine as f64);
                    pv += (eval(zeta, a, b) - ul) / (zeta - lam) * dz;
                }
                // PV ∮ dζ/(ζ-λ) = iπ, so add u(λ)·iπ back in.
                let pv_full = pv + ul * C64::new(0.0, PI);
                let cplus = ul * 0.5 + pv_full / C64::new(0.0, 2.0 * PI);
                assert!((cplus - plus.values()[j][(a, b)]).norm() < 1e-6, "j={j}");
            }
        }
    }

    #[test]
    fn projectors_are_idempotent() {
        let g = CircleGrid::new(64).unwrap();
        let u = random_trig_poly(g, 2, 20, 3);
        for side in [Side::Inside, Side::Outside] {
            let once = cauchy_project(&u, side);
            let twice = cauchy_project(&once, side);
            let signed = if side == Side::Outside {
                // C₋ as defined carries a sign: C₋C₋ = -C₋ applied twice gives +P₋, so compare -C₋(C₋u) with C₋u.
                CircleFunction::from_fn(g, 2, |j, _| -&twice.values()[j])
            } else {
                twice.clone()
            };
            assert!(signed.sub(&once).unwrap().max_norm() < 1e-12);
        }
    }

    #[test]
    fn fourier_roundtrip_and_modes() {
        let g = CircleGrid::new(16).unwrap();
        let id = CircleFunction::identity(g, 2);
        let coeffs = circle_fourier(&id, Direction::Forward);
        for (idx, c) in coeffs.iter().enumerate() {
            let expect = if idx == 0 { 4.0 } else { 0.0 };
            assert!((c[(0, 0)].norm() - expect).abs() < 1e-13);
        }
        let u = scalar_fn(g, |z| z);
        let coeffs = circle_fourier(&u, Direction::Forward);
        for (idx, c) in coeffs.iter().enumerate() {
            let expect = if g.mode(idx) == 1 { 4.0 } else { 0.0 };
            assert!((c[(0, 0)].norm() - expect).abs() < 1e-13);
        }
        let r = random_trig_poly(g, 3, 8, 11);
        let back = CircleFunction::new(g, circle_fourier(&CircleFunction::new(g, circle_fourier(&r, Direction::Forward)).unwrap(), Direction::Inverse)).unwrap();
        assert!(back.sub(&r).unwrap().max_norm() < 1e-13);
    }

    #[test]
    fn circulant_matches_fft_projector() {
        let g = CircleGrid::new(16).unwrap();
        let u = random_trig_poly(g, 1, 8, 5);
        for side in [Side::Inside, Side::Outside] {
            let row = g.cauchy_circulant(side);
            let p = cauchy_project(&u, side);
            for j in 0..16 {
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..16 {
                    acc += row[(j + 16 - l) % 16] * u.values()[l][(0, 0)];
                }
                assert!((acc - p.values()[j][(0, 0)]).norm() < 1e-13);
            }
        }
    }
}
