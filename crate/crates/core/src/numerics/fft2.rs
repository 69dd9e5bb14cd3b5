use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

/// Square 2D FFT on row-major `m×m` buffers (unnormalized both ways).
#[derive(Clone)]
pub struct Fft2 {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { size, forward: planner.plan_fft_forward(size), inverse: planner.plan_fft_inverse(size) }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.size;
        assert_eq!(data.len(), m * m);
        plan.process(data);
        transpose(data, m);
        plan.process(data);
        transpose(data, m);
    }
}

fn transpose(data: &mut [C64], m: usize) {
    for i in 0..m {
        for j in i + 1..m {
            data.swap(i * m + j, j * m + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_dft() {
        let m = 8;
        let data: Vec<C64> = (0..m * m).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let mut out = data.clone();
        Fft2::new(m).forward(&mut out);
        for k1 in 0..m {
            for k2 in 0..m {
                let mut acc = C64::new(0.0, 0.0);
                for j1 in 0..m {
                    for j2 in 0..m {
                        let ph = -2.0 * std::f64::consts::PI * ((k1 * j1 + k2 * j2) as f64) / m as f64;
                        acc += data[j1 * m + j2] * C64::from_polar(1.0, ph);
                    }
                }
                assert!((acc - out[k1 * m + k2]).norm() < 1e-12);
            }
        }
        Fft2::new(m).inverse(&mut out);
        for (a, b) in out.iter().zip(&data) {
            assert!((a / (m * m) as f64 - b).norm() < 1e-14);
        }
    }
}
