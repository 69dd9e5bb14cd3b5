use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::field::MatrixField;
use crate::error::{Error, Result};

/// Radial profile and amplitude of a synthetic potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `a·exp(−|x|²/w²)·M`, Schwartz class; cut where it drops below 1e−16.
    GaussianBump { amplitude: f64, width: f64 },
    /// `a·exp(1 − 1/(1 − r²/ρ²))·M` inside the disk of radius ρ.
    SmoothCompact { amplitude: f64 },
    /// `a·(1 − r²/ρ²)₊^m·M`, in `W^{m,1}` but not `W^{m+1,1}`.
    PolynomialCompact { amplitude: f64, exponent: u32 },
    /// Sum of smooth compact bumps with random Hermitian coefficients.
    HermitianRandomSmooth { amplitude: f64, atoms: usize, seed: u64 },
    /// `diag(Λ)·1_{|x| ≤ ρ}`.
    DiagonalConstantOnD { diag: Vec<f64> },
}

/// Everything needed to sample a fixture on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub kind: PotentialKind,
    pub channels: usize,
    pub support_radius: f64,
    pub half_width: f64,
    pub nx: usize,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self {
            kind: PotentialKind::PolynomialCompact { amplitude: 1.0, exponent: 3 },
            channels: 2,
            support_radius: 1.0,
            half_width: 1.5,
            nx: 64,
        }
    }
}

/// Fixed Hermitian channel-coupling shape: diagonal `1 + a/2`, off-diagonal
/// `0.3·exp(iπ(a−b)/4)`. Equals `1` for a single channel.
pub fn coupling_matrix(n: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |a, b| {
        if a == b {
            C64::new(1.0 + 0.5 * a as f64, 0.0)
        } else {
            C64::from_polar(0.3, std::f64::consts::FRAC_PI_4 * (a as f64 - b as f64))
        }
    })
}

fn bump(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t)).exp()
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be finite, got {v}")))
    }
}

type Evaluator = Box<dyn Fn(f64, f64) -> Mat<C64> + Send + Sync>;

/// Pointwise evaluator of a fixture together with the radius outside
/// which it is set to zero.
pub struct FixtureSampler {
    channels: usize,
    radius: f64,
    eval: Evaluator,
}

impl FixtureSampler {
    pub fn new(spec: &PotentialSpec) -> Result<Self> {
        let (radius, eval) = evaluator(spec)?;
        Ok(Self { channels: spec.channels, radius, eval })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Radius of the closed disk outside which the fixture vanishes.
    pub fn support_radius(&self) -> f64 {
        self.radius
    }

    pub fn value(&self, x: [f64; 2]) -> Mat<C64> {
        if x[0].hypot(x[1]) > self.radius {
            Mat::zeros(self.channels, self.channels)
        } else {
            (self.eval)(x[0], x[1])
        }
    }
}

fn evaluator(spec: &PotentialSpec) -> Result<(f64, Evaluator)> {
    let n = spec.channels;
    let rho = spec.support_radius;
    if n == 0 {
        return Err(Error::InvalidParams("channels must be positive".into()));
    }
    if !(rho > 0.0) || rho > spec.half_width {
        return Err(Error::InvalidParams(format!("support radius {rho} must lie in (0, L_x = {}]", spec.half_width)));
    }
    let shape = coupling_matrix(n);
    let scaled = move |s: f64| Mat::from_fn(n, n, |a, b| shape[(a, b)] * s);
    Ok(match &spec.kind {
        PotentialKind::GaussianBump { amplitude, width } => {
            check_finite("amplitude", *amplitude)?;
            if !(*width > 0.0) {
                return Err(Error::InvalidParams("width must be positive".into()));
            }
            // exp(-37.2) < 1e-16 relative at r = 6.1w.
            let cut = (width * 6.1).min(spec.half_width);
            let (a, w) = (*amplitude, *width);
            (cut, Box::new(move |x1, x2| scaled(a * (-(x1 * x1 + x2 * x2) / (w * w)).exp())))
        }
        PotentialKind::SmoothCompact { amplitude } => {
            check_finite("amplitude", *amplitude)?;
            let a = *amplitude;
            (rho, Box::new(move |x1, x2| scaled(a * bump((x1 * x1 + x2 * x2) / (rho * rho)))))
        }
        PotentialKind::PolynomialCompact { amplitude, exponent } => {
            check_finite("amplitude", *amplitude)?;
            let (a, m) = (*amplitude, *exponent as i32);
            (
                rho,
                Box::new(move |x1, x2| {
                    let t = 1.0 - (x1 * x1 + x2 * x2) / (rho * rho);
                    scaled(a * t.max(0.0).powi(m))
                }),
            )
        }
        PotentialKind::HermitianRandomSmooth { amplitude, atoms, seed } => {
            check_finite("amplitude", *amplitude)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut parts = Vec::with_capacity(*atoms);
            for _ in 0..*atoms {
                let radius = rng.random_range(0.3..0.6) * rho;
                let reach = rng.random_range(0.0..(rho - radius).max(0.0));
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let centre = [reach * angle.cos(), reach * angle.sin()];
                let mut coeff = Mat::<C64>::zeros(n, n);
                for a in 0..n {
                    coeff[(a, a)] = C64::new(rng.random_range(-1.0..1.0), 0.0);
                    for b in a + 1..n {
                        let v = C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
                        coeff[(a, b)] = v;
                        coeff[(b, a)] = v.conj();
                    }
                }
                parts.push((centre, radius, coeff));
            }
            let a = *amplitude;
            (
                rho,
                Box::new(move |x1, x2| {
                    let mut m = Mat::<C64>::zeros(n, n);
                    for (c, r, coeff) in &parts {
                        let t = ((x1 - c[0]).powi(2) + (x2 - c[1]).powi(2)) / (r * r);
                        let s = a * bump(t);
                        if s != 0.0 {
                            m += coeff * faer::Scale(C64::new(s, 0.0));
                        }
                    }
                    m
                }),
            )
        }
        PotentialKind::DiagonalConstantOnD { diag } => {
            if diag.len() != n {
                return Err(Error::InvalidParams(format!("diag has {} entries for {n} channels", diag.len())));
            }
            for v in diag {
                check_finite("diag entry", *v)?;
            }
            let d = diag.clone();
            (
                rho,
                Box::new(move |_, _| {
                    Mat::from_fn(n, n, |a, b| if a == b { C64::new(d[a], 0.0) } else { C64::new(0.0, 0.0) })
                }),
            )
        }
    })
}

/// Samples the fixture described by `spec`.
pub fn make_test_potential(spec: &PotentialSpec) -> Result<MatrixField> {
    let sampler = FixtureSampler::new(spec)?;
    let FixtureSampler { channels, radius, eval } = sampler;
    MatrixField::from_fn(channels, spec.nx, spec.half_width, radius, eval)
}

/// Pointwise value of the fixture at `x` (exact, no grid), used as the
/// reference when measuring reconstruction errors.
pub fn evaluate_potential(spec: &PotentialSpec, x: [f64; 2]) -> Result<Mat<C64>> {
    Ok(FixtureSampler::new(spec)?.value(x))
}
