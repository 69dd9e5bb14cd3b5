//! Dense LU with a condition estimate, and restarted GMRES.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Default condition threshold above which a system is reported as
/// near-singular.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e12;

fn norm1(a: &Mat<C64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn col_norm1(x: &Mat<C64>) -> f64 {
    (0..x.nrows()).map(|i| x[(i, 0)].norm()).sum()
}

/// Partial-pivot LU factorization with a 1-norm condition estimate.
pub struct Lu {
    lu: PartialPivLu<C64>,
    dim: usize,
    condition: f64,
}

impl Lu {
    /// Factor `a`; fails with `NearSingular` when the estimated 1-norm
    /// condition number exceeds `limit`.
    pub fn new(a: &Mat<C64>, stage: &'static str, limit: f64) -> Result<Self> {
        let dim = a.nrows();
        if dim != a.ncols() {
            return Err(Error::InvalidParams(format!("{stage}: non-square system")));
        }
        let lu = a.partial_piv_lu();
        let mut this = Self { lu, dim, condition: 0.0 };
        let inv_norm = this.inverse_norm1_estimate();
        this.condition = norm1(a) * inv_norm;
        if !this.condition.is_finite() || this.condition > limit {
            return Err(Error::NearSingular { stage, condition: this.condition });
        }
        Ok(this)
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &Mat<C64>) -> Mat<C64> {
        let mut x = b.clone();
        self.lu.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut Mat<C64>) {
        self.lu.solve_in_place(b);
    }

    /// Hager–Higham estimate of `‖A⁻¹‖₁`.
    fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.dim;
        if n == 0 {
            return 0.0;
        }
        let mut x = Mat::from_fn(n, 1, |_, _| C64::new(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        for iter in 0..5 {
            let y = self.solve(&x);
            let ny = col_norm1(&y);
            if !ny.is_finite() {
                return f64::INFINITY;
            }
            if iter > 0 && ny <= est {
                break;
            }
            est = ny;
            let mut z = Mat::from_fn(n, 1, |i, _| {
                let v = y[(i, 0)];
                let m = v.norm();
                if m == 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    v / m
                }
            });
            self.lu.solve_adjoint_in_place(&mut z);
            let (jmax, zmax) = (0..n).map(|i| (i, z[(i, 0)].norm())).fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            let zx: f64 = (0..n).map(|i| (z[(i, 0)].conj() * x[(i, 0)]).re).sum();
            if iter > 0 && zmax <= zx {
                break;
            }
            x = Mat::zeros(n, 1);
            x[(jmax, 0)] = C64::new(1.0, 0.0);
        }
        let alt = Mat::from_fn(n, 1, |i, _| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            C64::new(s * (1.0 + t), 0.0)
        });
        let alt_est = 2.0 * col_norm1(&self.solve(&alt)) / (3.0 * n as f64);
        est.max(alt_est)
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub solution: Vec<C64>,
    pub relative_residual: f64,
    pub iterations: usize,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted GMRES for `A x = b` with `A` given as a matrix-vector product.
/// Converges when `‖b − Ax‖ ≤ tol·‖b‖`.
pub fn gmres(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    x0: Option<&[C64]>,
    tol: f64,
    restart: usize,
    max_iter: usize,
    stage: &'static str,
) -> Result<GmresOutcome> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x: Vec<C64> = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![C64::new(0.0, 0.0); n]);
    if bnorm == 0.0 {
        return Ok(GmresOutcome { solution: vec![C64::new(0.0, 0.0); n], relative_residual: 0.0, iterations: 0 });
    }
    let mut total = 0;
    let mut rel = f64::INFINITY;
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        rel = beta / bnorm;
        if rel <= tol {
            return Ok(GmresOutcome { solution: x, relative_residual: rel, iterations: total });
        }
        let m = restart.min(max_iter - total).max(1);
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![C64::new(0.0, 0.0); m]; m + 1];
        let mut cs = vec![C64::new(0.0, 0.0); m];
        let mut sn = vec![C64::new(0.0, 0.0); m];
        let mut g = vec![C64::new(0.0, 0.0); m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut used = 0;
        for j in 0..m {
            let mut w = apply(&basis[j]);
            for _pass in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    h[i][j] += c;
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= c * vk;
                    }
                }
            }
            let hn = norm2(&w);
            h[j + 1][j] = C64::new(hn, 0.0);
            for i in 0..j {
                let t = cs[i].conj() * h[i][j] + sn[i].conj() * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let (a, bb) = (h[j][j], h[j + 1][j]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if den == 0.0 {
                cs[j] = C64::new(1.0, 0.0);
                sn[j] = C64::new(0.0, 0.0);
            } else {
                cs[j] = a / den;
                sn[j] = bb / den;
            }
            h[j][j] = cs[j].conj() * a + sn[j].conj() * bb;
            h[j + 1][j] = C64::new(0.0, 0.0);
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j].conj() * g[j];
            used = j + 1;
            total += 1;
            rel = g[j + 1].norm() / bnorm;
            if rel <= tol * 0.5 || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![C64::new(0.0, 0.0); used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= h[i][k] * y[k];
            }
            y[i] = s / h[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[k]) {
                *xi += yk * vi;
            }
        }
    }
    let ax = apply(&x);
    let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    rel = rel.min(norm2(&r) / bnorm);
    if rel <= tol {
        Ok(GmresOutcome { solution: x, relative_residual: rel, iterations: total })
    } else {
        Err(Error::NoConvergence { stage, residual: rel })
    }
}
