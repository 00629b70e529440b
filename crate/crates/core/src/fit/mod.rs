//! Stepwise parameter estimation from transmission maps and idler spectra.
//!
//! Stage 1 fits pump-off maps near the three ring-1 modes for the coupling
//! and loss rates, the ring coupling and the heater law. Stage 2 freezes
//! those and fits pumped maps plus idler spectra for the free-carrier loss,
//! the nonlinear coupling and one thermal shift per dataset. A separate
//! transfer-matrix fit uses the whole wavelength range.

mod dips;
pub mod fdm_fit;
pub mod linear;
pub mod pumped;
pub mod synth;

use serde::{Deserialize, Serialize};

use crate::cmm::{linear_transmission_i_minus, linear_transmission_i_plus, linear_transmission_s};
use crate::numerics::lm::LmReport;
use crate::params::{CmmParams, HeaterModel};

pub use fdm_fit::{fdm_cmm_consistency, fit_fdm, FdmFitOptions};
pub use linear::{fit_linear_cmm, FitWindows};
pub use pumped::{fit_pumped, PumpedOptions};
pub use synth::{
    generate_pumped_datasets, generate_synthetic, CmmSynthSetup, FdmSynthSetup, NoiseModel, PumpedSynthSetup,
    SyntheticTruth,
};

/// The three ring-1 modes near the converter: i−, s and i+.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    IMinus,
    Signal,
    IPlus,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::IMinus, Mode::Signal, Mode::IPlus];

    /// Position in units of the free spectral range relative to the signal.
    pub fn order(self) -> f64 {
        match self {
            Mode::IMinus => -1.0,
            Mode::Signal => 0.0,
            Mode::IPlus => 1.0,
        }
    }
}

/// |t_j(Ω)|² near mode j, without coupler loss.
pub fn mode_transmission(p: &CmmParams, mode: Mode, omega: f64) -> f64 {
    match mode {
        Mode::IMinus => linear_transmission_i_minus(p, omega),
        Mode::Signal => linear_transmission_s(p, omega),
        Mode::IPlus => linear_transmission_i_plus(p, omega),
    }
    .norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitStage {
    #[serde(rename = "linear-CMM")]
    LinearCmm,
    #[serde(rename = "pumped-CMM")]
    PumpedCmm,
    #[serde(rename = "FDM")]
    Fdm,
}

/// A fitted value with its one-sigma uncertainty (NaN when unavailable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub uncertainty: f64,
}

/// JSON has no NaN; serde_json writes it as null.
fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl Estimate {
    pub fn new(name: &str, value: f64, uncertainty: f64) -> Self {
        Self { name: name.to_string(), value, uncertainty }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetShift {
    pub dataset_id: String,
    #[serde(rename = "delta_NL")]
    pub value: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub stage: FitStage,
    /// Parameters adjusted in this stage.
    pub estimates: Vec<Estimate>,
    /// Parameters carried over unchanged from an earlier stage or measured
    /// directly (coupler transmission).
    pub fixed: Vec<Estimate>,
    /// Quantities computed from the estimates.
    #[serde(default)]
    pub derived: Vec<Estimate>,
    #[serde(default)]
    pub delta_nl: Vec<DatasetShift>,
    pub residual_norm: f64,
    pub n_residuals: usize,
    pub iterations: usize,
    pub converged: bool,
    /// ½‖r‖² after every accepted iteration.
    pub cost_history: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl FitResult {
    /// Looks a parameter up among estimates, fixed and derived values.
    pub fn value(&self, name: &str) -> Option<f64> {
        self.estimates
            .iter()
            .chain(&self.fixed)
            .chain(&self.derived)
            .find(|e| e.name == name)
            .map(|e| e.value)
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.estimates.iter().chain(&self.fixed).find(|e| e.name == name).map(|e| e.uncertainty)
    }

    fn require(&self, name: &str) -> f64 {
        self.value(name).unwrap_or(0.0)
    }

    /// Coupled-mode rates implied by the fit.
    pub fn cmm_params(&self) -> CmmParams {
        let mut p = CmmParams::new(
            self.require("gamma"),
            self.require("gamma_L1"),
            self.require("gamma_L2"),
            self.require("g"),
        );
        p.gamma_fca = self.value("gamma_FCA").unwrap_or(0.0);
        p.chi_bar = self.value("chi_bar").unwrap_or(0.0);
        p
    }

    pub fn heater(&self) -> HeaterModel {
        HeaterModel { a: self.require("A"), b: self.require("B") }
    }

    pub fn t_cpl(&self) -> f64 {
        self.require("T_cpl")
    }
}

fn estimates_from(names: &[&str], rep: &LmReport) -> Vec<Estimate> {
    let err = rep.std_errors();
    names.iter().zip(rep.x.iter().zip(err)).map(|(n, (&v, e))| Estimate::new(n, v, e)).collect()
}
