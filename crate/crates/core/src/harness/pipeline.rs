use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig, PotentialSource};
use crate::dtn::{dtn_background_disk, dtn_scattering_difference, dtn_zero_disk, BoundaryKernel, DtnOptions};
use crate::error::{Error, Result};
use crate::forward::{scattering_amplitude, Sign, TorusKernel};
use crate::io::{self, Provenance};
use crate::numerics::CircleGrid;
use crate::potentials::{make_test_potential, FixtureSampler, MatrixField, PotentialSampler};
use crate::recover::{algo1, algo1a_h, algo1a_traces, algo2_h_with, background_data};
use crate::rhp::{assemble_b, born_reconstruct, reconstruct_with, BackgroundRhp, ReconstructionField, RhpOptions, Window};

/// The true potential: grid samples plus an exact sampler when available.
pub struct Truth {
    pub field: MatrixField,
    sampler: Box<dyn PotentialSampler + Send>,
}

impl Truth {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        match &cfg.potential {
            PotentialSource::Fixture(spec) => Ok(Self { field: make_test_potential(spec)?, sampler: Box::new(FixtureSampler::new(spec)?) }),
            PotentialSource::File(path) => {
                let field: MatrixField = io::load(path)?;
                Ok(Self { sampler: Box::new(field.clone()), field })
            }
        }
    }

    pub fn from_field(field: MatrixField) -> Self {
        Self { sampler: Box::new(field.clone()), field }
    }

    pub fn sampler(&self) -> &dyn PotentialSampler {
        self.sampler.as_ref()
    }
}

/// Input data of the inverse problem at one energy.
#[derive(Debug, Clone)]
pub enum Data {
    /// Scattering amplitude `f` on `T×T`.
    Amplitude(TorusKernel),
    /// `Φ − Φ₀` on the boundary grid.
    Dtn(BoundaryKernel),
}

impl Data {
    pub fn l2_norm(&self) -> f64 {
        match self {
            Data::Amplitude(f) => f.l2_norm(),
            Data::Dtn(k) => k.l2_norm(),
        }
    }

    /// Adds seeded complex Gaussian noise of absolute `L²` size `delta`.
    pub fn with_noise(&self, delta: f64, seed: u64) -> Result<Data> {
        if delta == 0.0 {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |len: usize| -> Vec<C64> {
            (0..len).map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect()
        };
        let one = C64::new(1.0, 0.0);
        Ok(match self {
            Data::Amplitude(f) => {
                let noise = TorusKernel::new(f.grid(), f.channels(), f.energy(), draw(f.values().len()))?;
                let noise = noise.scale(C64::new(delta / noise.l2_norm(), 0.0));
                Data::Amplitude(f.combine(one, &noise, one)?)
            }
            Data::Dtn(k) => {
                let noise = BoundaryKernel::new(k.grid(), k.channels(), k.energy(), draw(k.values().len()))?;
                let noise = noise.scale(C64::new(delta / noise.l2_norm(), 0.0));
                Data::Dtn(k.combine(one, &noise, one)?)
            }
        })
    }
}

/// Back-end input.
#[derive(Debug, Clone)]
pub enum Kernels {
    Pm { plus: TorusKernel, minus: TorusKernel },
    Background { plus: TorusKernel, minus: TorusKernel, background: BackgroundRhp },
    Born(TorusKernel),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub data_l2: f64,
    pub dtn_self_convergence: Option<f64>,
    pub interface_radius: Option<f64>,
    pub h_plus_l2: Option<f64>,
    pub h_minus_l2: Option<f64>,
    /// Power-iteration estimate of `‖B(0)‖`.
    pub b_norm_origin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub requested_energy: f64,
    pub energy: f64,
    /// Set when the requested energy failed and `1.01·E` was used.
    pub retried: bool,
    pub circle_grid: usize,
    pub max_error: f64,
    pub l2_error: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub energy: f64,
    pub data_s: f64,
    pub recover_s: f64,
    pub backend_s: f64,
}

pub struct EnergyRun {
    pub field: ReconstructionField,
    pub row: EnergyRow,
    pub timings: StageTimings,
    pub data: Data,
    pub kernels: Kernels,
}

pub fn window(cfg: &ExperimentConfig, truth: &Truth) -> Result<Window> {
    Window::for_field(&truth.field, cfg.window.stride, truth.field.support_radius() + cfg.window.margin)
}

fn dtn_options(cfg: &ExperimentConfig) -> DtnOptions {
    DtnOptions {
        radial_nodes: cfg.radial_grid,
        tolerance: cfg.tolerances.dtn_self_convergence,
        condition_limit: cfg.tolerances.condition_limit,
        richardson: cfg.tolerances.dtn_richardson,
        ..DtnOptions::default()
    }
}

/// Forward data at energy `e`.
pub fn generate_data(cfg: &ExperimentConfig, truth: &Truth, e: f64, torus: CircleGrid) -> Result<(Data, Diagnostics)> {
    if cfg.algorithm.uses_dtn() {
        let sol = dtn_scattering_difference(truth.sampler(), e, cfg.boundary_grid, &dtn_options(cfg))?;
        let diag = Diagnostics {
            data_l2: sol.difference.l2_norm(),
            dtn_self_convergence: Some(sol.self_convergence),
            interface_radius: Some(sol.interface_radius),
            ..Diagnostics::default()
        };
        Ok((Data::Dtn(sol.difference), diag))
    } else {
        let f = scattering_amplitude(&truth.field, e, torus, cfg.tolerances.forward)?;
        let diag = Diagnostics { data_l2: f.l2_norm(), ..Diagnostics::default() };
        Ok((Data::Amplitude(f), diag))
    }
}

/// Data to `h±` (or `f` for the linearized route).
pub fn recover_kernels(cfg: &ExperimentConfig, data: &Data, torus: CircleGrid) -> Result<Kernels> {
    match (cfg.algorithm, data) {
        (Algorithm::Algo2, Data::Amplitude(f)) => {
            let c = cfg.tolerances.condition_limit;
            Ok(Kernels::Pm { plus: algo2_h_with(f, Sign::Plus, c)?, minus: algo2_h_with(f, Sign::Minus, c)? })
        },
        (Algorithm::Born, Data::Amplitude(f)) => Ok(Kernels::Born(f.clone())),
        (Algorithm::Algo1, Data::Dtn(k)) => Ok(Kernels::Pm { plus: algo1(k, Sign::Plus, torus)?, minus: algo1(k, Sign::Minus, torus)? }),
        (Algorithm::Algo1a, Data::Dtn(k)) => {
            let (e, nb, n) = (k.energy(), k.size(), k.channels());
            let phi0 = dtn_zero_disk(e, nb, n)?;
            let phi1 = dtn_background_disk(e, nb, n, &cfg.background)?;
            let phi = phi0.combine(C64::new(1.0, 0.0), k, C64::new(1.0, 0.0))?;
            let mut h = Vec::new();
            let mut h1 = Vec::new();
            for sign in [Sign::Plus, Sign::Minus] {
                let bg = background_data(&phi1, &phi0, sign, torus)?;
                let traces = algo1a_traces(&phi, &phi1, &phi0, sign, torus)?;
                h.push(algo1a_h(&phi, &phi1, &phi0, &traces, &bg, torus)?);
                h1.push(bg.h1);
            }
            let (minus, plus) = (h.pop().unwrap(), h.pop().unwrap());
            let (m1, p1) = (h1.pop().unwrap(), h1.pop().unwrap());
            Ok(Kernels::Background { plus, minus, background: BackgroundRhp::new(cfg.background.clone(), p1, m1)? })
        }
        _ => Err(Error::Config(format!("data type does not match algorithm {}", cfg.algorithm.name()))),
    }
}

pub fn rhp_options(cfg: &ExperimentConfig) -> RhpOptions {
    RhpOptions { condition_limit: cfg.tolerances.condition_limit, residual_limit: cfg.tolerances.residual_limit, ..RhpOptions::default() }
}

/// `V_appr` on the window.
pub fn backend(cfg: &ExperimentConfig, kernels: &Kernels, window: &Window) -> Result<ReconstructionField> {
    match kernels {
        Kernels::Pm { plus, minus } => reconstruct_with(plus, minus, window, cfg.algorithm.name(), &rhp_options(cfg)),
        Kernels::Born(f) => born_reconstruct(f, f, window),
        Kernels::Background { plus, minus, background } => {
            let opts = rhp_options(cfg);
            let values = window
                .points()
                .par_iter()
                .map(|p| background.v_appr_point(plus, minus, C64::new(p[0], p[1]), &opts))
                .collect::<Result<Vec<_>>>()?;
            ReconstructionField::new(window.clone(), plus.channels(), plus.energy(), plus.size(), cfg.algorithm.name(), values)
        }
    }
}

fn kernel_norms(kernels: &Kernels, diag: &mut Diagnostics) -> Result<()> {
    if let Kernels::Pm { plus, minus } | Kernels::Background { plus, minus, .. } = kernels {
        diag.h_plus_l2 = Some(plus.l2_norm());
        diag.h_minus_l2 = Some(minus.l2_norm());
        diag.b_norm_origin = Some(assemble_b(plus, minus, C64::new(0.0, 0.0))?.b_norm_estimate());
    }
    Ok(())
}

fn retryable(e: &Error) -> bool {
    matches!(e.root(), Error::NearSingular { .. } | Error::ResonantEnergy { .. })
}

fn run_at(cfg: &ExperimentConfig, truth: &Truth, requested: f64, e: f64, window: &Window) -> Result<EnergyRun> {
    let nt = cfg.circle_grid_at(requested);
    let torus = CircleGrid::new(nt)?;
    let t0 = Instant::now();
    let (data, mut diag) = generate_data(cfg, truth, e, torus).map_err(|x| x.in_stage("forward data", e))?;
    let t1 = Instant::now();
    let kernels = recover_kernels(cfg, &data, torus).map_err(|x| x.in_stage("recover_h", e))?;
    kernel_norms(&kernels, &mut diag).map_err(|x| x.in_stage("rhp", e))?;
    let t2 = Instant::now();
    let field = backend(cfg, &kernels, window).map_err(|x| x.in_stage("rhp", e))?;
    let t3 = Instant::now();
    let row = EnergyRow {
        requested_energy: requested,
        energy: e,
        retried: e != requested,
        circle_grid: nt,
        max_error: field.max_error(&truth.field)?,
        l2_error: field.relative_l2_error(&truth.field).unwrap_or(f64::NAN),
        diagnostics: diag,
    };
    let timings = StageTimings {
        energy: e,
        data_s: (t1 - t0).as_secs_f64(),
        recover_s: (t2 - t1).as_secs_f64(),
        backend_s: (t3 - t2).as_secs_f64(),
    };
    Ok(EnergyRun { field, row, timings, data, kernels })
}

/// One energy, retried once at `1.01·E` on near-singular solves.
pub fn run_energy(cfg: &ExperimentConfig, truth: &Truth, e: f64) -> Result<EnergyRun> {
    let window = window(cfg, truth)?;
    match run_at(cfg, truth, e, e, &window) {
        Err(err) if retryable(&err) => run_at(cfg, truth, e, e * 1.01, &window),
        other => other,
    }
}

fn energy_dir(out: &Path, e: f64) -> PathBuf {
    out.join(format!("E{e}"))
}

/// Writes the artifacts of one energy under `out/E<e>/`.
pub fn write_artifacts(cfg: &ExperimentConfig, run: &EnergyRun, out: &Path) -> Result<()> {
    let dir = energy_dir(out, run.row.requested_energy);
    let prov = |stage: &str| Provenance {
        stage: stage.into(),
        config_hash: Some(cfg.hash()),
        extra: serde_json::json!({"algorithm": cfg.algorithm.name(), "energy": run.row.energy}),
    };
    match &run.data {
        Data::Amplitude(f) => {
            io::save(f, &dir.join("f.mctk"), &prov("forward"))?;
        }
        Data::Dtn(k) => {
            io::save(k, &dir.join("dtn_difference.mcbk"), &prov("dtn"))?;
        }
    }
    match &run.kernels {
        Kernels::Pm { plus, minus } | Kernels::Background { plus, minus, .. } => {
            io::save(plus, &dir.join("h_plus.mctk"), &prov("recover_h"))?;
            io::save(minus, &dir.join("h_minus.mctk"), &prov("recover_h"))?;
        }
        Kernels::Born(_) => {}
    }
    io::save(&run.field, &dir.join("v_appr.mcrf"), &prov("rhp"))?;
    io::reconstruction_csv(&run.field, std::fs::File::create(dir.join("v_appr.csv"))?)?;
    Ok(())
}

/// Writes the materialized config, its hash and the true potential.
pub fn write_setup(cfg: &ExperimentConfig, truth: &Truth, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.json"), cfg.materialized())?;
    std::fs::write(out.join("config.sha256"), cfg.hash())?;
    std::fs::write(out.join("config.schema.json"), super::config::config_schema())?;
    let prov = Provenance { stage: "potential".into(), config_hash: Some(cfg.hash()), extra: serde_json::Value::Null };
    io::save(&truth.field, &out.join("potential.mcip"), &prov)?;
    Ok(())
}

/// Every configured energy in order; optionally writes artifacts.
pub fn run_pipeline(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<EnergyRun>> {
    cfg.validate()?;
    let truth = Truth::load(cfg)?;
    if let Some(out) = out {
        write_setup(cfg, &truth, out)?;
    }
    let mut runs = Vec::new();
    for &e in &cfg.energies {
        let run = run_energy(cfg, &truth, e)?;
        if let Some(out) = out {
            write_artifacts(cfg, &run, out)?;
        }
        runs.push(run);
    }
    Ok(runs)
}
