//! Stage 1: pump-off transmission near the three modes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dips::{doublet, frame_rows, Row, RowFrame};
use super::{mode_transmission, Estimate, FitResult, FitStage, Mode};
use crate::data::MeasuredMap;
use crate::error::{Error, Result};
use crate::numerics::lm::{central_jacobian, levenberg_marquardt, nuisance_covariance, Bounds, LmOptions};
use crate::params::CmmParams;
use crate::units::nm_to_omega;

/// Where the modes are and how much of each resonance enters the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitWindows {
    /// Approximate signal resonance in the first voltage row [nm].
    pub signal_nm: f64,
    /// Approximate ring-1 free spectral range [rad/s].
    pub fsr: f64,
    /// Half-width of each window in ring-1 linewidths.
    pub linewidths: f64,
}

impl FitWindows {
    pub fn new(signal_nm: f64, fsr: f64) -> Self {
        Self { signal_nm, fsr, linewidths: 3.0 }
    }
}

pub const LINEAR_NAMES: [&str; 6] = ["gamma", "gamma_L1", "gamma_L2", "g", "A", "B"];

/// A sample inside a fit window, with its detuning from the mode.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WindowPoint {
    pub row: usize,
    pub mode: Mode,
    pub omega: f64,
    pub voltage: f64,
    pub y: f64,
}

pub(crate) struct FramedRow {
    pub row: Row,
    pub frame: RowFrame,
    pub voltage: f64,
}

pub(crate) fn frame_maps(maps: &[MeasuredMap], windows: &FitWindows) -> Result<Vec<FramedRow>> {
    let mut out = Vec::new();
    for map in maps {
        map.validate()?;
        let rows: Vec<Row> = map.transmission.iter().map(|r| Row::from_wavelengths(&map.wavelength_nm, r)).collect();
        let frames = frame_rows(&rows, nm_to_omega(windows.signal_nm), windows.fsr)
            .map_err(|e| Error::FitFailure(format!("{}: {e}", map.dataset_id)))?;
        for ((row, frame), &voltage) in rows.into_iter().zip(frames).zip(&map.voltage) {
            out.push(FramedRow { row, frame, voltage });
        }
    }
    Ok(out)
}

pub(crate) fn window_points(rows: &[FramedRow], half_single: f64, half_split: f64) -> Vec<WindowPoint> {
    let mut pts = Vec::new();
    for (row, fr) in rows.iter().enumerate() {
        for mode in Mode::ALL {
            let c = fr.frame.center(mode);
            let half = if mode == Mode::IMinus { half_split } else { half_single };
            for (&w, &y) in fr.row.omega.iter().zip(&fr.row.y) {
                let omega = w - c;
                if omega.abs() <= half {
                    pts.push(WindowPoint { row, mode, omega, voltage: fr.voltage, y });
                }
            }
        }
    }
    pts
}

pub(crate) fn mean(v: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let xs: Vec<f64> = v.collect();
    let n = xs.len();
    let m = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    (m, var.sqrt(), n)
}

fn params_from(x: &[f64], voltage: f64) -> CmmParams {
    let mut p = CmmParams::new(x[0], x[1], x[2], x[3]);
    p.delta_ab = x[4] + x[5] * voltage * voltage;
    p
}

/// Split positions of i− per row; (V², sum of offsets, half splitting).
fn split_observations(rows: &[FramedRow], fsr: f64, width: f64, min_depth: f64) -> Vec<(f64, f64, f64)> {
    rows.iter()
        .filter_map(|fr| {
            let base = fr.frame.signal.baseline;
            doublet(&fr.row, fr.frame.omega_minus(), fsr / 3.0, base, 0.5 * width, min_depth)
                .map(|(a, b)| (fr.voltage * fr.voltage, a + b, 0.5 * (b - a)))
        })
        .collect()
}

pub(crate) fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares line y = a + b·x.
fn regress(obs: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = obs.len() as f64;
    let mx = obs.iter().map(|o| o.0).sum::<f64>() / n;
    let my = obs.iter().map(|o| o.1).sum::<f64>() / n;
    let sxx = obs.iter().map(|o| (o.0 - mx).powi(2)).sum::<f64>();
    if sxx <= 0.0 {
        return None;
    }
    let b = obs.iter().map(|o| (o.0 - mx) * (o.1 - my)).sum::<f64>() / sxx;
    Some((my - b * mx, b))
}

/// Standard errors including the uncertainty of the per-row resonance
/// centres, which the global fit holds fixed. Falls back to `plain` when a
/// normal matrix is singular.
fn with_center_errors(
    x: &[f64],
    scale: &[f64],
    rows: &[FramedRow],
    pts: &[WindowPoint],
    t2: f64,
    plain: Vec<f64>,
) -> Vec<f64> {
    let model = |x: &[f64], shift: &[f64]| -> Vec<f64> {
        pts.par_iter()
            .map(|pt| {
                let (ds, dp) = (shift[2 * pt.row], shift[2 * pt.row + 1]);
                let dc = match pt.mode {
                    Mode::Signal => ds,
                    Mode::IPlus => dp,
                    Mode::IMinus => 2.0 * ds - dp,
                };
                t2 * mode_transmission(&params_from(x, pt.voltage), pt.mode, pt.omega - dc) - pt.y
            })
            .collect()
    };
    let zero = vec![0.0; 2 * rows.len()];
    let steps_x: Vec<f64> = x.iter().zip(scale).map(|(v, s)| 1e-6 * v.abs().max(*s)).collect();
    let jx = central_jacobian(|x: &[f64]| model(x, &zero), x, &steps_x);
    let var_c: Vec<f64> = rows
        .iter()
        .flat_map(|r| [r.frame.signal.center_sd.powi(2), r.frame.plus.center_sd.powi(2)])
        .collect();
    let steps_c: Vec<f64> = rows.iter().flat_map(|r| [1e-3 * r.frame.signal.width, 1e-3 * r.frame.plus.width]).collect();
    let jc = central_jacobian(|c: &[f64]| model(x, c), &zero, &steps_c);
    match nuisance_covariance(&jx, &jc, &var_c) {
        Some(extra) if var_c.iter().all(|v| v.is_finite()) => {
            plain.iter().enumerate().map(|(i, e)| (e * e + extra[(i, i)].max(0.0)).sqrt()).collect()
        }
        _ => plain,
    }
}

/// Fits {γ, γ_L1, γ_L2, g, A, B} to pump-off maps.
///
/// Ring-1 resonances are re-located in every row from Lorentzian fits to the
/// signal and i+ dips, and the coupler transmission is fixed at the mean of
/// their baselines. Seeds: the dip width and depth give γ and γ_L1 (the
/// over-coupled root), the i− doublet gives g through the anticrossing
/// relation and A, B from its centroid against V².
pub fn fit_linear_cmm(maps: &[MeasuredMap], windows: &FitWindows) -> Result<FitResult> {
    if maps.is_empty() {
        return Err(Error::Data("no transmission maps".into()));
    }
    let rows = frame_maps(maps, windows)?;
    let dips = || rows.iter().flat_map(|r| [r.frame.signal, r.frame.plus]);
    let (t2, t2_sd, nd) = mean(dips().map(|d| d.baseline));
    let (width, _, _) = mean(dips().map(|d| d.width));
    let (depth, _, _) = mean(dips().map(|d| d.depth));
    let (scatter, _, _) = mean(dips().map(|d| d.rel_scatter));
    let ratio = 0.5 * (1.0 + (1.0 - depth.min(1.0)).sqrt());
    let gamma0 = ratio * width;
    let loss0 = (width - gamma0).max(1e-3 * width);

    let fsr = mean(rows.iter().map(|r| r.frame.fsr())).0;
    let raw = split_observations(&rows, fsr, width, (5.0 * scatter).max(0.05));
    // an anticrossing has half-splitting² − (centroid offset)² = g² in every
    // row; rows that disagree with the median hold a noise minimum
    let g_row = |o: &(f64, f64, f64)| (o.2 * o.2 - 0.25 * o.1 * o.1).max(0.0).sqrt();
    let g0 = if raw.is_empty() { 0.0 } else { median(raw.iter().map(g_row).collect()) };
    let obs: Vec<(f64, f64, f64)> = raw.into_iter().filter(|o| (g_row(o) / g0 - 1.0).abs() < 0.25).collect();
    let distinct = {
        let mut v: Vec<f64> = obs.iter().map(|o| o.0).collect();
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        v.len()
    };
    let (a0, b0) = match regress(&obs.iter().map(|o| (o.0, o.1)).collect::<Vec<_>>()) {
        Some(ab) if distinct >= 2 => ab,
        _ => {
            return Err(Error::FitFailure(format!(
                "the split i- resonance was resolved in {} rows; at least two heater voltages are needed \
                 to seed the detuning law",
                obs.len()
            )))
        }
    };

    let half_single = windows.linewidths * width;
    let half_split = half_single + 2.0 * g0;
    let pts = window_points(&rows, half_single, half_split);
    let tc2 = t2;
    let residuals = |x: &[f64]| -> Vec<f64> {
        pts.par_iter()
            .map(|pt| tc2 * mode_transmission(&params_from(x, pt.voltage), pt.mode, pt.omega) - pt.y)
            .collect()
    };
    let x0 = [gamma0, loss0, loss0, g0, a0, b0];
    let scale = [width, width, width, g0.max(width), a0.abs().max(width), b0.abs().max(0.1 * width)];
    let big = 20.0 * (width + g0);
    let bounds = Bounds {
        lower: vec![1e-3 * width, 0.0, 0.0, 0.0, f64::NEG_INFINITY, f64::NEG_INFINITY],
        upper: vec![big, big, big, big, f64::INFINITY, f64::INFINITY],
    };
    let rep = levenberg_marquardt(residuals, &x0, &scale, &bounds, &LmOptions::default())?;
    let uncertainties = with_center_errors(&rep.x, &scale, &rows, &pts, tc2, rep.std_errors());

    let mut warnings = Vec::new();
    if !rep.converged {
        warnings.push(format!("stopped after {} iterations without meeting the tolerances", rep.iterations));
    }
    let t_cpl = t2.sqrt();
    let t_cpl_sd = 0.5 * t2_sd / (t2.sqrt() * (nd as f64).sqrt());
    Ok(FitResult {
        stage: FitStage::LinearCmm,
        estimates: LINEAR_NAMES
            .iter()
            .zip(rep.x.iter().zip(uncertainties))
            .map(|(n, (&v, e))| Estimate::new(n, v, e))
            .collect(),
        fixed: vec![Estimate::new("T_cpl", t_cpl, t_cpl_sd)],
        derived: Vec::new(),
        delta_nl: Vec::new(),
        residual_norm: rep.residual_norm(),
        n_residuals: rep.residuals.len(),
        iterations: rep.iterations,
        converged: rep.converged,
        cost_history: rep.cost_history,
        warnings,
    })
}
