// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use duoring_core::io;

mod commands;
mod config;
mod manifest;

use config::RunConfig;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_CONVERGENCE: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "duoring", version, about = "Coupled two-ring frequency converter: spectra, conversion, purity, pulse shaping and fitting")]
pub struct Cli {
    /// JSON configuration with unit-suffixed keys (see FILES below)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for the artifacts and manifest.json
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Worker threads for sweeps and fits (default: all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Seed for synthetic noise
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Override the numerical tolerance (ODE rtol, purity convergence)
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// CW transmission and conversion spectra (coupled-mode) or a transfer-matrix (λ, V) map
    Spectrum {
        #[arg(long, value_enum, default_value_t = Model::Cmm)]
        model: Model,
    },
    /// Peak extinction over the (Ω, Δ_ab) window and the spectrum at its detuning
    Convert,
    /// Maximum conversion efficiency, coupling estimate and the rates implied by the geometry
    Design,
    /// Five-mode cascade bound for the device
    Cascade,
    /// Schmidt purity of the photon-pair JSA (flat pump, Q_p = Q_i)
    Purity {
        /// Q_s/Q_i ratio; repeat for several (default: purity.ratios)
        #[arg(long = "ratio", action = ArgAction::Append)]
        ratios: Vec<f64>,
        /// Starting grid size per axis (default: purity.grid_points)
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Emit a shaped single photon under the configured control pulse
    Shape {
        /// Sampling step of the CSV output, in 1/γ_o
        #[arg(long, default_value_t = 0.05)]
        sample_step: f64,
    },
    /// Best η_out over the (G, Q_L/Q_o) grid subject to the overlap floor
    Sweep {
        #[arg(long = "g", value_delimiter = ',')]
        g: Vec<f64>,
        #[arg(long = "ql", value_delimiter = ',')]
        ql: Vec<f64>,
    },
    /// Fit measured or synthetic maps
    Fit(FitArgs),
    /// Generate synthetic maps with seeded noise
    Synth {
        #[arg(long, value_enum)]
        model: Option<SynthModel>,
        /// Relative noise σ (default: synth.noise_sigma)
        #[arg(long)]
        noise: Option<f64>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub stage: Stage,
    /// Transmission map CSV; repeat for several
    #[arg(long = "map", action = ArgAction::Append, required = true)]
    pub maps: Vec<PathBuf>,
    /// Idler spectrum CSV for the pumped stage; repeat for several
    #[arg(long = "idler", action = ArgAction::Append)]
    pub idlers: Vec<PathBuf>,
    /// Linear-stage fit.json the pumped stage builds on
    #[arg(long)]
    pub linear: Option<PathBuf>,
    /// Approximate signal resonance in the first row [nm] (default: fit.signal_nm)
    #[arg(long)]
    pub signal_nm: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Cmm,
    Fdm,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthModel {
    Cmm,
    Fdm,
    Pumped,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Linear,
    Pumped,
    Fdm,
}

fn files_help() -> String {
    let cols = |c: &[&str]| c.join(",");
    format!(
        "FILES (CSV header rows, exactly as written):
  spectrum.csv      {spectrum}
  map.csv           {map}[,{ds}]
  idler.csv         {idler}
  emission.csv      {emission}
  control.csv       {control}
  sweep.csv         {sweep}
  jsa_r<ratio>.csv  {corner},<idler offsets>; each row: <signal offset>,|f|^2...
  JSON outputs: convert.json, design.json, cascade.json, purity.json, shape.json,
  fit.json, truth.json, manifest.json (command, version, seed, config hash, file hashes)

CONFIG keys carry units: _rad_s or _ghz (x 2pi 1e9) for rates, _m/_um/_nm for
lengths and wavelengths, _w/_mw/_dbm for powers, _db for power ratios.
Sections: device, heater, geometry, pumps, grid, purity, shape, sweep, fit, synth.

EXIT CODES: 0 success, {v} invalid input, {c} no convergence, {i} file error",
        spectrum = cols(&io::SPECTRUM_COLUMNS),
        map = cols(&io::MAP_COLUMNS),
        ds = io::MAP_DATASET_COLUMN,
        idler = cols(&io::IDLER_COLUMNS),
        emission = cols(&io::EMISSION_COLUMNS),
        control = cols(&io::CONTROL_COLUMNS),
        sweep = cols(&io::SWEEP_COLUMNS),
        corner = io::JSA_CORNER,
        v = EXIT_VALIDATION,
        c = EXIT_CONVERGENCE,
        i = EXIT_IO,
    )
}

#[derive(Debug)]
pub enum Failure {
    Validation(Vec<String>),
    Core(duoring_core::Error),
}

impl From<duoring_core::Error> for Failure {
    fn from(e: duoring_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Validation(_) => EXIT_VALIDATION,
        Failure::Core(e) if e.is_io() => EXIT_IO,
        Failure::Core(e) if e.is_convergence() => EXIT_CONVERGENCE,
        Failure::Core(_) => EXIT_VALIDATION,
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(t) = cli.tolerance {
        if !(t > 0.0 && t < 1.0) {
            return Err(Failure::Validation(vec![format!("--tolerance must lie in (0, 1) (got {t})")]));
        }
    }
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Validation)?,
        None => RunConfig::defaults(),
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Validation(vec!["--jobs must be at least 1".into()]));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Validation(vec![format!("--jobs: {e}")]))?;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    commands::dispatch(cli, &cfg)
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(files_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(errs) => {
                    eprintln!("error: invalid input");
                    for e in errs {
                        eprintln!("  - {e}");
                    }
                }
                Failure::Core(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&f))
        }
    }
}
