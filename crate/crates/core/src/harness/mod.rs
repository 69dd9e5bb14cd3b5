//! Configuration, pipeline orchestration and benchmark suites.

mod bench;
mod config;
mod pipeline;

pub use bench::{bench_convergence, bench_stability, estimate_suite, loglog_slope, noise_seed, BenchReport, EstimateReport, EstimateRow, StabilityRow};
pub use config::{config_schema, Algorithm, ExperimentConfig, NoiseConfig, PotentialSource, Tolerances, WindowConfig};
pub use pipeline::{
    backend, generate_data, recover_kernels, rhp_options, run_energy, run_pipeline, window, write_artifacts, write_setup, Data, Diagnostics, EnergyRow,
    EnergyRun, Kernels, StageTimings, Truth,
};
