use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::field::MatrixField;
use crate::error::{Error, Result};

/// Real scalar potential `v(x, z)` sampled on the square grid of a
/// [`MatrixField`] times `N_z` uniform nodes `z_k = a + k(b−a)/(N_z−1)`.
/// Stored with `z` innermost.
#[derive(Debug, Clone)]
pub struct LayeredField {
    pub nx: usize,
    pub half_width: f64,
    pub nz: usize,
    pub interval: (f64, f64),
    pub values: Vec<f64>,
}

impl LayeredField {
    pub fn from_fn(nx: usize, half_width: f64, nz: usize, interval: (f64, f64), f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let h = 2.0 * half_width / nx as f64;
        let dz = (interval.1 - interval.0) / (nz - 1) as f64;
        let mut values = Vec::with_capacity(nx * nx * nz);
        for i1 in 0..nx {
            for i2 in 0..nx {
                for k in 0..nz {
                    values.push(f(-half_width + i1 as f64 * h, -half_width + i2 as f64 * h, interval.0 + k as f64 * dz));
                }
            }
        }
        Self { nx, half_width, nz, interval, values }
    }

    pub fn z(&self, k: usize) -> f64 {
        self.interval.0 + k as f64 * (self.interval.1 - self.interval.0) / (self.nz - 1) as f64
    }
}

/// Dirichlet eigenfunction `φ_j(z) = √(2/(b−a)) sin(jπ(z−a)/(b−a))`, `j ≥ 1`.
pub fn transverse_mode(j: usize, z: f64, interval: (f64, f64)) -> f64 {
    let len = interval.1 - interval.0;
    (2.0 / len).sqrt() * (j as f64 * PI * (z - interval.0) / len).sin()
}

/// Eigenvalue `λ_j = (jπ/(b−a))²`.
pub fn transverse_eigenvalue(j: usize, interval: (f64, f64)) -> f64 {
    (j as f64 * PI / (interval.1 - interval.0)).powi(2)
}

/// Projects a layered 3D potential onto the first `n` transverse modes:
/// `V_ij(x) = λ_i δ_ij + ∫ φ_i v(x,·) φ_j dz` on the disk `|x| ≤ ρ`, zero
/// outside. The `z` integral uses the trapezoid rule on the sample nodes.
pub fn reduce_3d_to_2d(v: &LayeredField, n: usize, support_radius: f64) -> Result<MatrixField> {
    if n == 0 || 4 * n > v.nz {
        return Err(Error::InvalidParams(format!("{n} channels need at least {} z-nodes, got {}", 4 * n, v.nz)));
    }
    let (a, b) = v.interval;
    if !(b > a) {
        return Err(Error::InvalidParams("empty z interval".into()));
    }
    let dz = (b - a) / (v.nz - 1) as f64;
    let weights: Vec<f64> = (0..v.nz).map(|k| if k == 0 || k == v.nz - 1 { 0.5 * dz } else { dz }).collect();
    let modes: Vec<Vec<f64>> = (1..=n).map(|j| (0..v.nz).map(|k| transverse_mode(j, v.z(k), v.interval)).collect()).collect();
    let nx = v.nx;
    let h = 2.0 * v.half_width / nx as f64;
    let mut values = vec![C64::new(0.0, 0.0); nx * nx * n * n];
    for i1 in 0..nx {
        for i2 in 0..nx {
            let (x1, x2) = (-v.half_width + i1 as f64 * h, -v.half_width + i2 as f64 * h);
            if x1.hypot(x2) > support_radius {
                continue;
            }
            let column = &v.values[(i1 * nx + i2) * v.nz..(i1 * nx + i2 + 1) * v.nz];
            let base = (i1 * nx + i2) * n * n;
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for k in 0..v.nz {
                        acc += weights[k] * modes[i][k] * column[k] * modes[j][k];
                    }
                    if i == j {
                        acc += transverse_eigenvalue(i + 1, v.interval);
                    }
                    values[base + i * n + j] = C64::new(acc, 0.0);
                }
            }
        }
    }
    MatrixField::new(n, nx, v.half_width, support_radius, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potential_gives_transverse_spectrum() {
        let v = LayeredField::from_fn(8, 1.5, 65, (0.0, 2.0), |_, _, _| 0.0);
        let f = reduce_3d_to_2d(&v, 3, 1.0).unwrap();
        let [i1, i2] = [4, 4];
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { transverse_eigenvalue(i + 1, (0.0, 2.0)) } else { 0.0 };
                assert!((f.entry(i1, i2, i, j).re - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn aliasing_guard() {
        let v = LayeredField::from_fn(8, 1.5, 10, (0.0, 1.0), |_, _, _| 0.0);
        assert!(reduce_3d_to_2d(&v, 3, 1.0).is_err());
    }

    #[test]
    fn real_potential_gives_hermitian_field() {
        let v = LayeredField::from_fn(8, 1.5, 101, (0.0, 1.0), |x1, x2, z| (x1 - 2.0 * x2).sin() * z * z + x1 * z);
        let f = reduce_3d_to_2d(&v, 4, 1.4).unwrap();
        assert!(f.hermitian_defect() < 1e-12);
    }
}
