//! Matrix-valued potentials: fixtures, the 3D→2D channel reduction,
//! Fourier transforms and the weighted Hölder norm.

mod field;
mod fixtures;
mod reduce;

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use field::{FrequencyField, MatrixField};
pub use fixtures::{coupling_matrix, evaluate_potential, make_test_potential, FixtureSampler, PotentialKind, PotentialSpec};
pub use reduce::{reduce_3d_to_2d, transverse_eigenvalue, transverse_mode, LayeredField};

use crate::error::{Error, Result};

/// Pointwise access to a potential, used by solvers that work off the
/// Cartesian grid.
pub trait PotentialSampler: Sync {
    fn channels(&self) -> usize;
    /// Radius of a closed disk containing the support.
    fn support_radius(&self) -> f64;
    fn sample(&self, x: [f64; 2]) -> Mat<C64>;
}

impl PotentialSampler for FixtureSampler {
    fn channels(&self) -> usize {
        FixtureSampler::channels(self)
    }

    fn support_radius(&self) -> f64 {
        FixtureSampler::support_radius(self)
    }

    fn sample(&self, x: [f64; 2]) -> Mat<C64> {
        self.value(x)
    }
}

impl PotentialSampler for MatrixField {
    fn channels(&self) -> usize {
        MatrixField::channels(self)
    }

    fn support_radius(&self) -> f64 {
        MatrixField::support_radius(self)
    }

    fn sample(&self, x: [f64; 2]) -> Mat<C64> {
        self.interpolate(x)
    }
}

/// Smoothness class `W^{m,1}_ε` and the derived exponents `α = min(1, ε)`,
/// `s = m`, `σ ∈ (0, min(1, s))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct SmoothnessSpec {
    pub m: u32,
    pub epsilon: f64,
    pub sigma: f64,
}

impl SmoothnessSpec {
    pub fn new(m: u32, epsilon: f64, sigma: f64) -> Result<Self> {
        let spec = Self { m, epsilon, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 3 {
            return Err(Error::InvalidParams(format!("smoothness m must be >= 3, got {}", self.m)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParams("epsilon must be positive".into()));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidParams("sigma must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.epsilon.min(1.0)
    }

    pub fn s(&self) -> f64 {
        self.m as f64
    }
}

impl Default for SmoothnessSpec {
    fn default() -> Self {
        Self { m: 3, epsilon: 1.0, sigma: 0.5 }
    }
}

/// `V̂(p) = (2π)⁻² ∫ e^{ipx} V(x) dx` by the trapezoid rule on the dual
/// lattice of the space grid (`Δp = π/L`).
pub fn fourier_transform(v: &MatrixField) -> FrequencyField {
    fourier_transform_padded(v, 1)
}

/// As [`fourier_transform`], zero-padding the grid by `oversample` so the
/// lattice spacing is `π/(oversample·L)`.
pub fn fourier_transform_padded(v: &MatrixField, oversample: usize) -> FrequencyField {
    let nx = v.nx();
    let n = v.channels();
    let size = nx * oversample.max(1);
    let h = v.step();
    let spacing = 2.0 * PI / (size as f64 * h);
    let scale = h * h / (4.0 * PI * PI);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(size);
    let nn = n * n;
    let mut out = vec![C64::new(0.0, 0.0); size * size * nn];
    // Phase of x_j = -L + j h against p_m = m Δp, m in [-M/2, M/2).
    let shift: Vec<C64> = (0..size)
        .map(|i| {
            let m = i as f64 - (size / 2) as f64;
            C64::from_polar(1.0, -m * spacing * v.half_width())
        })
        .collect();
    for e in 0..nn {
        let mut grid = vec![C64::new(0.0, 0.0); size * size];
        for i1 in 0..nx {
            for i2 in 0..nx {
                grid[i1 * size + i2] = v.values()[(i1 * nx + i2) * nn + e];
            }
        }
        for row in grid.chunks_mut(size) {
            fft.process(row);
        }
        let mut col = vec![C64::new(0.0, 0.0); size];
        for i2 in 0..size {
            for i1 in 0..size {
                col[i1] = grid[i1 * size + i2];
            }
            fft.process(&mut col);
            for i1 in 0..size {
                grid[i1 * size + i2] = col[i1];
            }
        }
        // FFT index k holds mode k (k < M/2) or k - M.
        for o1 in 0..size {
            let k1 = (o1 + size / 2) % size;
            for o2 in 0..size {
                let k2 = (o2 + size / 2) % size;
                out[(o1 * size + o2) * nn + e] = grid[k1 * size + k2] * shift[o1] * shift[o2] * scale;
            }
        }
    }
    FrequencyField::new(n, size, spacing, out).expect("consistent lattice")
}

/// `V̂(p)` at an arbitrary frequency by direct trapezoid summation.
pub fn fourier_at(v: &MatrixField, p: [f64; 2]) -> Mat<C64> {
    let n = v.channels();
    let h = v.step();
    let scale = h * h / (4.0 * PI * PI);
    let mut acc = Mat::<C64>::zeros(n, n);
    let nx = v.nx();
    let e1: Vec<C64> = (0..nx).map(|i| C64::from_polar(1.0, p[0] * v.coord(i))).collect();
    let e2: Vec<C64> = (0..nx).map(|i| C64::from_polar(1.0, p[1] * v.coord(i))).collect();
    let nn = n * n;
    for i1 in 0..nx {
        for i2 in 0..nx {
            let block = &v.values()[(i1 * nx + i2) * nn..(i1 * nx + i2 + 1) * nn];
            if block.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                continue;
            }
            let ph = e1[i1] * e2[i2] * scale;
            for a in 0..n {
                for b in 0..n {
                    acc[(a, b)] += ph * block[a * n + b];
                }
            }
        }
    }
    acc
}

fn entry_max(values: &[C64]) -> f64 {
    values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Discrete `‖V̂‖_{α,s} = ‖ϰ^s V̂‖_α` with `ϰ(p) = (1+|p|²)^{1/2}`:
/// sup of `|ϰ^s V̂|` plus the one-step Hölder quotient of `ϰ^s V̂`, using
/// the max entry modulus for `|·|`.
pub fn norm_alpha_s(vhat: &FrequencyField, spec: &SmoothnessSpec) -> Result<f64> {
    let size = vhat.size();
    if size == 0 || vhat.values().is_empty() {
        return Err(Error::InvalidParams("empty frequency field".into()));
    }
    let dp = vhat.spacing();
    if dp > 1.0 {
        return Err(Error::InvalidParams(format!("lattice step {dp} exceeds 1; refine with oversampling")));
    }
    let nn = vhat.channels() * vhat.channels();
    let s = spec.s();
    let alpha = spec.alpha();
    let weighted = |i1: usize, i2: usize| -> Vec<C64> {
        let [p1, p2] = vhat.frequency(i1, i2);
        let w = (1.0 + p1 * p1 + p2 * p2).powf(0.5 * s);
        vhat.values()[(i1 * size + i2) * nn..(i1 * size + i2 + 1) * nn].iter().map(|v| v * w).collect()
    };
    let (sup, holder) = (0..size)
        .into_par_iter()
        .map(|i1| {
            let mut sup = 0.0_f64;
            let mut holder = 0.0_f64;
            for i2 in 0..size {
                let here = weighted(i1, i2);
                sup = sup.max(entry_max(&here));
                for (j1, j2) in [(i1 + 1, i2), (i1, i2 + 1)] {
                    if j1 >= size || j2 >= size {
                        continue;
                    }
                    let there = weighted(j1, j2);
                    let diff: Vec<C64> = here.iter().zip(&there).map(|(a, b)| b - a).collect();
                    holder = holder.max(entry_max(&diff) / dp.powf(alpha));
                }
            }
            (sup, holder)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(sup + holder)
}

/// Oversampling factor making the lattice step of [`fourier_transform_padded`]
/// at most `max_step`.
pub fn oversample_for_step(v: &MatrixField, max_step: f64) -> usize {
    let base = PI / v.half_width();
    (base / max_step).ceil().max(1.0) as usize
}

/// `‖V̂‖_{α,s}` of a sampled potential, refining the frequency lattice to
/// step ≤ 1.
pub fn potential_norm(v: &MatrixField, spec: &SmoothnessSpec) -> Result<f64> {
    let vhat = fourier_transform_padded(v, oversample_for_step(v, 1.0));
    norm_alpha_s(&vhat, spec)
}
