//! Stage 2: pumped transmission and idler spectra with stage-1 rates frozen.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dips::doublet;
use super::linear::{frame_maps, median, window_points, FitWindows, FramedRow, WindowPoint};
use super::synth::idler_powers;
use super::{mode_transmission, DatasetShift, Estimate, FitResult, FitStage};
use crate::data::MeasuredMap;
use crate::error::{Error, Result};
use crate::numerics::lm::{levenberg_marquardt, Bounds, LmOptions};
use crate::params::{CmmParams, HeaterModel};
use crate::presets;
use crate::units::nm_to_omega;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpedOptions {
    pub windows: FitWindows,
    /// Signal power in the bus waveguide [W].
    pub signal_power_w: f64,
}

impl PumpedOptions {
    pub fn new(windows: FitWindows) -> Self {
        Self { windows, signal_power_w: presets::measured_pumps().p_s }
    }
}

/// Residual blocks of one dataset, each with its weight.
struct Dataset {
    id: String,
    voltage: f64,
    transmission: Vec<WindowPoint>,
    /// (signal detuning, P_i+, P_i−)
    idler: Vec<(f64, f64, f64)>,
    w_t: f64,
    w_plus: f64,
    w_minus: f64,
    seed_fca: f64,
    seed_chi: f64,
    seed_shift: f64,
}

struct Frozen {
    base: CmmParams,
    heater: HeaterModel,
    t_cpl: f64,
    p_s: f64,
}

impl Frozen {
    fn params(&self, fca: f64, chi: f64, shift: f64, voltage: f64) -> CmmParams {
        let mut p = self.base.clone();
        p.gamma_fca = fca;
        p.chi_bar = chi;
        p.delta_ab = self.heater.detuning(voltage);
        p.delta_nl = shift;
        p
    }

    fn residuals(&self, d: &Dataset, fca: f64, chi: f64, shift: f64, out: &mut Vec<f64>) {
        let p = self.params(fca, chi, shift, d.voltage);
        let t2 = self.t_cpl * self.t_cpl;
        out.extend(d.transmission.iter().map(|pt| d.w_t * (t2 * mode_transmission(&p, pt.mode, pt.omega) - pt.y)));
        for &(w, a, b) in &d.idler {
            let (ma, mb) = idler_powers(&p, w, self.t_cpl, self.p_s);
            out.push(d.w_plus * (ma - a));
            out.push(d.w_minus * (mb - b));
        }
    }
}

fn prepare(map: &MeasuredMap, fr: FramedRow, frozen: &Frozen, opts: &PumpedOptions) -> Option<Dataset> {
    let idler = map.idler.as_ref()?;
    let lin = &frozen.base;
    let width = 0.5 * (fr.frame.signal.width + fr.frame.plus.width);
    let half_single = opts.windows.linewidths * width;
    let transmission = window_points(std::slice::from_ref(&fr), half_single, half_single + 2.0 * lin.g);
    let ws = fr.frame.omega_s();
    let idl: Vec<(f64, f64, f64)> = idler
        .wavelength_nm
        .iter()
        .zip(idler.p_iplus_w.iter().zip(&idler.p_iminus_w))
        .map(|(&l, (&a, &b))| (nm_to_omega(l) - ws, a, b))
        .collect();
    let scatter = fr.frame.signal.rel_scatter.max(fr.frame.plus.rel_scatter).max(1e-6);
    let pmax = |f: fn(&(f64, f64, f64)) -> f64| idl.iter().map(f).fold(0.0, f64::max).max(1e-300);
    let (max_plus, max_minus) = (pmax(|t| t.1), pmax(|t| t.2));
    let seed_fca = (width - lin.total_s()).max(0.0);
    let eta_peak = max_plus / (frozen.t_cpl * opts.signal_power_w);
    let seed_chi = eta_peak.sqrt() * width * width / (4.0 * lin.gamma);
    let base = fr.frame.signal.baseline;
    let seed_shift = doublet(&fr.row, fr.frame.omega_minus(), opts.windows.fsr / 3.0, base, 0.5 * width, 0.05)
        .map(|(a, b)| a + b - frozen.heater.detuning(fr.voltage))
        .unwrap_or(0.0);
    Some(Dataset {
        id: map.dataset_id.clone(),
        voltage: fr.voltage,
        transmission,
        idler: idl,
        w_t: 1.0 / (scatter * frozen.t_cpl * frozen.t_cpl),
        w_plus: 1.0 / (scatter * max_plus),
        w_minus: 1.0 / (scatter * max_minus),
        seed_fca,
        seed_chi,
        seed_shift,
    })
}

/// Fits the shared free-carrier loss and nonlinear coupling plus one thermal
/// shift per dataset. Each map holds a single heater setting and its idler
/// spectra; maps without idler spectra are skipped with a warning. Every
/// stage-1 value is copied unchanged into `fixed`.
///
/// Residuals are weighted by the inverse of the relative noise level seen
/// in the Lorentzian fits, times the scale of each block (transmission
/// baseline, peak P_i+, peak P_i−). Datasets are first fitted on their own
/// in parallel; the joint fit starts from the medians of the shared values.
pub fn fit_pumped(maps: &[MeasuredMap], linear: &FitResult, opts: &PumpedOptions) -> Result<FitResult> {
    if linear.stage != FitStage::LinearCmm {
        return Err(Error::Config("the pumped fit needs a linear-stage result".into()));
    }
    let frozen = Frozen {
        base: linear.cmm_params(),
        heater: linear.heater(),
        t_cpl: linear.t_cpl(),
        p_s: opts.signal_power_w,
    };
    let mut warnings = Vec::new();
    let mut sets = Vec::new();
    for map in maps {
        if map.voltage.len() != 1 {
            return Err(Error::Data(format!(
                "{}: a pumped dataset holds exactly one heater setting (found {})",
                map.dataset_id,
                map.voltage.len()
            )));
        }
        if map.idler.is_none() {
            warnings.push(format!("{}: no idler spectra, dataset skipped", map.dataset_id));
            continue;
        }
        let fr = frame_maps(std::slice::from_ref(map), &opts.windows)?.pop().expect("one row");
        sets.extend(prepare(map, fr, &frozen, opts));
    }
    if sets.is_empty() {
        return Err(Error::Data(
            "no dataset with idler spectra (columns wavelength_nm, p_iplus_w, p_iminus_w, dataset_id)".into(),
        ));
    }
    let width = frozen.base.total_s();
    let lm = LmOptions::default();

    let singles: Vec<Result<Vec<f64>>> = sets
        .par_iter()
        .map(|d| {
            let f = |x: &[f64]| {
                let mut r = Vec::new();
                frozen.residuals(d, x[0], x[1], x[2], &mut r);
                r
            };
            let x0 = [d.seed_fca, d.seed_chi.max(1e-3 * width), d.seed_shift];
            let scale = [width, d.seed_chi.max(1e-3 * width), width];
            let b = Bounds {
                lower: vec![0.0, 0.0, f64::NEG_INFINITY],
                upper: vec![20.0 * width, 20.0 * width, f64::INFINITY],
            };
            levenberg_marquardt(f, &x0, &scale, &b, &lm).map(|r| r.x)
        })
        .collect();
    let singles: Vec<Vec<f64>> = singles.into_iter().collect::<Result<_>>()?;

    let n = sets.len();
    let mut x0 = vec![median(singles.iter().map(|s| s[0]).collect()), median(singles.iter().map(|s| s[1]).collect())];
    x0.extend(singles.iter().map(|s| s[2]));
    let mut scale = vec![width, x0[1].max(1e-3 * width)];
    scale.resize(2 + n, width);
    let mut lower = vec![0.0, 0.0];
    lower.resize(2 + n, f64::NEG_INFINITY);
    let mut upper = vec![20.0 * width, 20.0 * width];
    upper.resize(2 + n, f64::INFINITY);
    let joint = |x: &[f64]| {
        let parts: Vec<Vec<f64>> = sets
            .par_iter()
            .enumerate()
            .map(|(k, d)| {
                let mut r = Vec::new();
                frozen.residuals(d, x[0], x[1], x[2 + k], &mut r);
                r
            })
            .collect();
        parts.concat()
    };
    let rep = levenberg_marquardt(joint, &x0, &scale, &Bounds { lower, upper }, &lm)?;
    if !rep.converged {
        warnings.push(format!("stopped after {} iterations without meeting the tolerances", rep.iterations));
    }
    let err = rep.std_errors();
    let delta_nl = sets
        .iter()
        .enumerate()
        .map(|(k, d)| DatasetShift { dataset_id: d.id.clone(), value: rep.x[2 + k], uncertainty: err[2 + k] })
        .collect();
    let mut fixed = linear.estimates.clone();
    fixed.extend(linear.fixed.iter().cloned());
    Ok(FitResult {
        stage: FitStage::PumpedCmm,
        estimates: vec![
            Estimate::new("gamma_FCA", rep.x[0], err[0]),
            Estimate::new("chi_bar", rep.x[1], err[1]),
        ],
        fixed,
        derived: Vec::new(),
        delta_nl,
        residual_norm: rep.residual_norm(),
        n_residuals: rep.residuals.len(),
        iterations: rep.iterations,
        converged: rep.converged,
        cost_history: rep.cost_history,
        warnings,
    })
}
