use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipeline::{backend, recover_kernels, run_energy, window, write_artifacts, write_setup, EnergyRow, StageTimings, Truth};
use crate::error::Result;
use crate::forward::{scattering_amplitude, Sign};
use crate::numerics::CircleGrid;
use crate::potentials::potential_norm;
use crate::recover::algo2_h;
use crate::rhp::{assemble_b, ReconstructionField};

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub energy: f64,
    pub delta: f64,
    pub draw: usize,
    pub seed: u64,
    /// `max_z |V_appr − V'_appr|`, entrywise.
    pub epsilon: f64,
    pub eta: f64,
    /// `η / E`.
    pub eta_over_energy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_hash: String,
    pub algorithm: String,
    pub rows: Vec<EnergyRow>,
    /// Fitted slope of the max error; present with at least 3 energies and
    /// no failure.
    pub slope_max: Option<f64>,
    pub slope_l2: Option<f64>,
    pub stability: Vec<StabilityRow>,
    /// `max η / min η` over positive `δ`.
    pub eta_spread: Option<f64>,
    pub failures: Vec<String>,
}

impl BenchReport {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self { config_hash: cfg.hash(), algorithm: cfg.algorithm.name().into(), ..Self::default() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn write_report(out: &Path, report: &BenchReport, timings: &[StageTimings]) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("report.json"), report.to_json())?;
    std::fs::write(out.join("timings.json"), serde_json::to_string_pretty(timings)?)?;
    Ok(())
}

/// Error table over the configured energies and the fitted log–log slopes.
pub fn bench_convergence(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<BenchReport> {
    cfg.validate()?;
    let truth = Truth::load(cfg)?;
    if let Some(out) = out {
        write_setup(cfg, &truth, out)?;
    }
    let mut report = BenchReport::new(cfg);
    let mut timings = Vec::new();
    for &e in &cfg.energies {
        match run_energy(cfg, &truth, e) {
            Ok(run) => {
                if let Some(out) = out {
                    write_artifacts(cfg, &run, out)?;
                }
                report.rows.push(run.row);
                timings.push(run.timings);
            }
            Err(err) if err.is_io() => return Err(err),
            Err(err) => report.failures.push(err.to_string()),
        }
    }
    if report.failures.is_empty() && report.rows.len() >= 3 {
        let es: Vec<f64> = report.rows.iter().map(|r| r.energy).collect();
        report.slope_max = loglog_slope(&es, &report.rows.iter().map(|r| r.max_error).collect::<Vec<_>>());
        report.slope_l2 = loglog_slope(&es, &report.rows.iter().map(|r| r.l2_error).collect::<Vec<_>>());
    }
    if let Some(out) = out {
        write_report(out, &report, &timings)?;
    }
    Ok(report)
}

fn max_gap(a: &ReconstructionField, b: &ReconstructionField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm_max()).fold(0.0, f64::max)
}

/// Seed of draw `d` at level index `i`.
pub fn noise_seed(base: u64, level: usize, draw: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add((level as u64) << 32 | draw as u64)
}

/// Response of `V_appr` to seeded data noise of each configured size.
pub fn bench_stability(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<BenchReport> {
    cfg.validate()?;
    let truth = Truth::load(cfg)?;
    if let Some(out) = out {
        write_setup(cfg, &truth, out)?;
    }
    let win = window(cfg, &truth)?;
    let mut report = BenchReport::new(cfg);
    let mut timings = Vec::new();
    for &e in &cfg.energies {
        let base = run_energy(cfg, &truth, e)?;
        let torus = CircleGrid::new(base.row.circle_grid)?;
        for (i, &delta) in cfg.noise.levels.iter().enumerate() {
            for d in 0..cfg.noise.draws.max(1) {
                let seed = noise_seed(cfg.seed, i, d);
                let noisy = base.data.with_noise(delta, seed)?;
                let kernels = recover_kernels(cfg, &noisy, torus).map_err(|x| x.in_stage("recover_h", e))?;
                let field = backend(cfg, &kernels, &win).map_err(|x| x.in_stage("rhp", e))?;
                let epsilon = max_gap(&field, &base.field);
                let eta = if delta > 0.0 { epsilon / delta } else { 0.0 };
                report.stability.push(StabilityRow { energy: base.row.energy, delta, draw: d, seed, epsilon, eta, eta_over_energy: eta / base.row.energy });
            }
        }
        if let Some(out) = out {
            write_artifacts(cfg, &base, out)?;
        }
        report.rows.push(base.row);
        timings.push(base.timings);
    }
    let etas: Vec<f64> = report.stability.iter().filter(|r| r.delta > 0.0).map(|r| r.eta).collect();
    if !etas.is_empty() {
        let lo = etas.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = etas.iter().cloned().fold(0.0, f64::max);
        report.eta_spread = Some(hi / lo);
    }
    if let Some(out) = out {
        write_report(out, &report, &timings)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub energy: f64,
    pub circle_grid: usize,
    pub f_l2: f64,
    pub h_plus_l2: f64,
    pub h_minus_l2: f64,
    pub b_norm_origin: f64,
    /// `max |f(k, l)| / (2‖V̂‖_{α,s}(1 + |k − l|²)^{−s/2})` over the torus.
    pub bound_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub config_hash: String,
    pub norm_alpha_s: f64,
    pub rows: Vec<EstimateRow>,
    pub slope_f: Option<f64>,
    pub slope_h_plus: Option<f64>,
    pub slope_h_minus: Option<f64>,
    pub slope_b: Option<f64>,
    /// Smallest energy from which the pointwise amplitude bound holds at
    /// every larger configured energy.
    pub bound_threshold_energy: Option<f64>,
}

/// Norm decay of `f`, `h±`, `B` and the pointwise amplitude bound over the
/// configured energies; `h±` from the amplitude.
pub fn estimate_suite(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let truth = Truth::load(cfg)?;
    let norm = potential_norm(&truth.field, &cfg.smoothness)?;
    let s = cfg.smoothness.s();
    let mut rows = Vec::new();
    for &e in &cfg.energies {
        let nt = cfg.circle_grid_at(e);
        let torus = CircleGrid::new(nt)?;
        let f = scattering_amplitude(&truth.field, e, torus, cfg.tolerances.forward)?;
        let hp = algo2_h(&f, Sign::Plus)?;
        let hm = algo2_h(&f, Sign::Minus)?;
        let b = assemble_b(&hp, &hm, C64::new(0.0, 0.0))?.b_norm_estimate();
        let k = e.sqrt();
        let mut ratio = 0.0_f64;
        for j in 0..nt {
            for l in 0..nt {
                let (tj, tl) = (torus.angle(j), torus.angle(l));
                let d2 = k * k * ((tj.cos() - tl.cos()).powi(2) + (tj.sin() - tl.sin()).powi(2));
                let bound = 2.0 * norm * (1.0 + d2).powf(-0.5 * s);
                ratio = ratio.max(f.block(j, l).norm_max() / bound);
            }
        }
        rows.push(EstimateRow { energy: e, circle_grid: nt, f_l2: f.l2_norm(), h_plus_l2: hp.l2_norm(), h_minus_l2: hm.l2_norm(), b_norm_origin: b, bound_ratio: ratio });
    }
    let es: Vec<f64> = rows.iter().map(|r| r.energy).collect();
    let col = |g: fn(&EstimateRow) -> f64| -> Option<f64> {
        if rows.len() < 3 {
            return None;
        }
        loglog_slope(&es, &rows.iter().map(g).collect::<Vec<_>>())
    };
    let mut threshold = None;
    for r in rows.iter().rev() {
        if r.bound_ratio <= 1.0 {
            threshold = Some(r.energy);
        } else {
            break;
        }
    }
    Ok(EstimateReport {
        config_hash: cfg.hash(),
        norm_alpha_s: norm,
        slope_f: col(|r| r.f_l2),
        slope_h_plus: col(|r| r.h_plus_l2),
        slope_h_minus: col(|r| r.h_minus_l2),
        slope_b: col(|r| r.b_norm_origin),
        bound_threshold_energy: threshold,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law_is_exact() {
        let x = [50.0, 100.0, 200.0, 400.0];
        let y: Vec<f64> = x.iter().map(|e: &f64| 3.0 * e.powf(-0.7)).collect();
        assert!((loglog_slope(&x, &y).unwrap() + 0.7).abs() < 1e-12);
        assert!(loglog_slope(&x, &[1.0, 0.0, 1.0, 1.0]).is_none());
    }

    #[test]
    fn noise_seeds_differ_across_levels_and_draws() {
        let a = noise_seed(7, 0, 0);
        assert_ne!(a, noise_seed(7, 1, 0));
        assert_ne!(a, noise_seed(7, 0, 1));
        assert_eq!(a, noise_seed(7, 0, 0));
    }
}
