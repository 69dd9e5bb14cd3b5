use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use monorec::dtn::BoundaryKernel;
use monorec::error::{Error, Result};
use monorec::forward::{scattering_amplitude, Sign, TorusKernel};
use monorec::harness::{
    backend, bench_convergence, bench_stability, config_schema, estimate_suite, generate_data, run_pipeline, window, write_setup,
    Algorithm, Data, ExperimentConfig, Kernels, Truth,
};
use monorec::io::{self, Provenance};
use monorec::numerics::CircleGrid;
use monorec::recover::{algo1, algo2_h};
use monorec::rhp::born_reconstruct;

#[derive(Parser)]
#[command(name = "monorec", version, about = "Fixed-energy reconstruction of matrix-valued 2D Schrödinger potentials")]
struct Cli {
    /// JSON experiment config; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Noise seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EnergyArg {
    /// Single energy instead of the configured list.
    #[arg(long)]
    energy: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Plus,
    Minus,
    Both,
}

impl SignArg {
    fn signs(self) -> Vec<Sign> {
        match self {
            SignArg::Plus => vec![Sign::Plus],
            SignArg::Minus => vec![Sign::Minus],
            SignArg::Both => vec![Sign::Plus, Sign::Minus],
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Scattering amplitude f of the configured potential.
    Forward(EnergyArg),
    /// DtN difference Φ − Φ₀ of the configured potential.
    Dtn(EnergyArg),
    /// h± from a DtN difference kernel (MCBK).
    #[command(name = "algo1-h")]
    Algo1H {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        sign: SignArg,
        /// Circle grid N of the output torus.
        #[arg(long)]
        circle_grid: Option<usize>,
    },
    /// h± from a scattering amplitude (MCTK).
    #[command(name = "algo2-h")]
    Algo2H {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        sign: SignArg,
    },
    /// V_appr from h± files, or the full configured pipeline.
    Reconstruct {
        #[arg(long, requires = "h_minus")]
        h_plus: Option<PathBuf>,
        #[arg(long, requires = "h_plus")]
        h_minus: Option<PathBuf>,
    },
    /// Linearized reconstruction from an amplitude file, or from the
    /// configured potential.
    Born {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Error table and fitted slopes over the configured energies.
    BenchConvergence,
    /// Noise response over the configured noise levels.
    BenchStability,
    /// Norm decay of f, h± and B with the pointwise amplitude bound.
    BenchEstimates,
    /// Header and shape of a container; optional CSV export.
    Inspect {
        input: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the materialized config.
    Config,
    /// Print the JSON Schema of the config.
    Schema,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn energies(cfg: &ExperimentConfig, arg: &EnergyArg) -> Result<Vec<f64>> {
    match arg.energy {
        Some(e) if !(e > 0.0 && e.is_finite()) => Err(Error::Config(format!("energy must be positive, got {e}"))),
        Some(e) => Ok(vec![e]),
        None => Ok(cfg.energies.clone()),
    }
}

fn provenance(cfg: &ExperimentConfig, stage: &str, extra: serde_json::Value) -> Provenance {
    Provenance { stage: stage.into(), config_hash: Some(cfg.hash()), extra }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Schema => {
            println!("{}", config_schema());
            return Ok(());
        }
        Command::Inspect { input, csv } => {
            let c = io::load_any(input)?;
            print_json(&c.describe());
            if let Some(path) = csv {
                io::any_csv(&c, File::create(path)?)?;
            }
            return Ok(());
        }
        _ => {}
    }
    let cfg = load_config(cli)?;
    let out = cfg.output_dir.clone();
    match &cli.command {
        Command::Config => println!("{}", cfg.materialized()),
        Command::Forward(arg) => {
            let truth = Truth::load(&cfg)?;
            write_setup(&cfg, &truth, &out)?;
            for e in energies(&cfg, arg)? {
                let torus = CircleGrid::new(cfg.circle_grid_at(e))?;
                let f = scattering_amplitude(&truth.field, e, torus, cfg.tolerances.forward).map_err(|x| x.in_stage("forward", e))?;
                let path = out.join(format!("E{e}")).join("f.mctk");
                io::save(&f, &path, &provenance(&cfg, "forward", json!({"energy": e})))?;
                print_json(&json!({"energy": e, "path": path, "l2": f.l2_norm(), "max": f.max_norm()}));
            }
        }
        Command::Dtn(arg) => {
            let mut dcfg = cfg.clone();
            if !dcfg.algorithm.uses_dtn() {
                dcfg.algorithm = Algorithm::Algo1;
            }
            let truth = Truth::load(&dcfg)?;
            write_setup(&cfg, &truth, &out)?;
            for e in energies(&cfg, arg)? {
                let torus = CircleGrid::new(cfg.circle_grid_at(e))?;
                let (data, diag) = generate_data(&dcfg, &truth, e, torus).map_err(|x| x.in_stage("dtn", e))?;
                let Data::Dtn(k) = data else { unreachable!("DtN algorithm yields DtN data") };
                let path = out.join(format!("E{e}")).join("dtn_difference.mcbk");
                io::save(&k, &path, &provenance(&cfg, "dtn", serde_json::to_value(&diag)?))?;
                print_json(&json!({"energy": e, "path": path, "diagnostics": diag}));
            }
        }
        Command::Algo1H { input, sign, circle_grid } => {
            let k: BoundaryKernel = io::load(input)?;
            let torus = CircleGrid::new(circle_grid.unwrap_or_else(|| cfg.circle_grid_at(k.energy())))?;
            for s in sign.signs() {
                let h = algo1(&k, s, torus).map_err(|x| x.in_stage("algo1-h", k.energy()))?;
                save_h(&cfg, &h, s, &out, "algo1")?;
            }
        }
        Command::Algo2H { input, sign } => {
            let f: TorusKernel = io::load(input)?;
            for s in sign.signs() {
                let h = algo2_h(&f, s).map_err(|x| x.in_stage("algo2-h", f.energy()))?;
                save_h(&cfg, &h, s, &out, "algo2")?;
            }
        }
        Command::Reconstruct { h_plus: Some(hp), h_minus: Some(hm) } => {
            let plus: TorusKernel = io::load(hp)?;
            let minus: TorusKernel = io::load(hm)?;
            let truth = Truth::load(&cfg)?;
            let win = window(&cfg, &truth)?;
            let field = backend(&cfg, &Kernels::Pm { plus, minus }, &win).map_err(|x| x.in_stage("rhp", 0.0))?;
            save_field(&cfg, &field, &out, "v_appr")?;
            print_json(&json!({"max_error": field.max_error(&truth.field)?, "l2_error": field.relative_l2_error(&truth.field).ok()}));
        }
        Command::Reconstruct { .. } => {
            let runs = run_pipeline(&cfg, Some(&out))?;
            let rows: Vec<_> = runs.iter().map(|r| &r.row).collect();
            print_json(&serde_json::to_value(rows)?);
        }
        Command::Born { input: Some(path) } => {
            let f: TorusKernel = io::load(path)?;
            let truth = Truth::load(&cfg)?;
            let win = window(&cfg, &truth)?;
            let field = born_reconstruct(&f, &f, &win).map_err(|x| x.in_stage("born", f.energy()))?;
            save_field(&cfg, &field, &out, "v_born")?;
            print_json(&json!({"max_error": field.max_error(&truth.field)?}));
        }
        Command::Born { input: None } => {
            let mut bcfg = cfg.clone();
            bcfg.algorithm = Algorithm::Born;
            let runs = run_pipeline(&bcfg, Some(&out))?;
            let rows: Vec<_> = runs.iter().map(|r| &r.row).collect();
            print_json(&serde_json::to_value(rows)?);
        }
        Command::BenchConvergence => {
            let report = bench_convergence(&cfg, Some(&out))?;
            println!("{}", report.to_json());
        }
        Command::BenchStability => {
            let report = bench_stability(&cfg, Some(&out))?;
            println!("{}", report.to_json());
        }
        Command::BenchEstimates => {
            let report = estimate_suite(&cfg)?;
            std::fs::create_dir_all(&out)?;
            let text = serde_json::to_string_pretty(&report)?;
            std::fs::write(out.join("estimates.json"), &text)?;
            println!("{text}");
        }
        Command::Schema | Command::Inspect { .. } => unreachable!(),
    }
    Ok(())
}

fn save_h(cfg: &ExperimentConfig, h: &TorusKernel, s: Sign, out: &Path, route: &str) -> Result<()> {
    let name = match s {
        Sign::Plus => "h_plus.mctk",
        Sign::Minus => "h_minus.mctk",
    };
    let path = out.join(format!("E{}", h.energy())).join(name);
    io::save(h, &path, &provenance(cfg, "recover_h", json!({"route": route, "sign": s.symbol()})))?;
    print_json(&json!({"path": path, "l2": h.l2_norm(), "max": h.max_norm()}));
    Ok(())
}

fn save_field(cfg: &ExperimentConfig, field: &monorec::rhp::ReconstructionField, out: &Path, stem: &str) -> Result<()> {
    let path = out.join(format!("{stem}.mcrf"));
    io::save(field, &path, &provenance(cfg, "rhp", json!({"source": field.source})))?;
    io::reconstruction_csv(field, File::create(out.join(format!("{stem}.csv")))?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
