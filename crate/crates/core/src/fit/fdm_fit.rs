//! Transfer-matrix fit over the full wavelength range.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimates_from, Estimate, FitResult, FitStage};
use crate::data::MeasuredMap;
use crate::error::{Error, Result};
use crate::fdm::bus_transmission;
use crate::numerics::lm::{levenberg_marquardt, Bounds, LmOptions};
use crate::params::{g_from_geometry, gamma_from_nu, FdmGeometry};
use crate::units::{nm_to_omega, SPEED_OF_LIGHT};

pub const FDM_NAMES: [&str; 7] = ["nu1", "nu2", "n_eff_re", "n_eff_im", "n_g", "dnV", "T_cpl"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdmFitOptions {
    /// Starting geometry. Lengths, coupler phases, reference frequency and
    /// heater law stay at these values.
    pub seed: FdmGeometry,
    /// Candidate effective indices per ring-1 resonance order in the scan.
    pub scan_density: usize,
}

impl FdmFitOptions {
    pub fn new(seed: FdmGeometry) -> Self {
        Self { seed, scan_density: 100 }
    }
}

fn geometry_from(seed: &FdmGeometry, x: &[f64]) -> FdmGeometry {
    let mut g = seed.clone();
    g.nu1 = x[0];
    g.nu2 = x[1];
    g.n_eff_re = x[2];
    g.n_eff_im = x[3];
    g.n_g = x[4];
    g.dn_v = x[5];
    g
}

struct Sample {
    omega: f64,
    voltage: f64,
    y: f64,
}

fn residuals(seed: &FdmGeometry, pts: &[Sample], x: &[f64]) -> Vec<f64> {
    let g = geometry_from(seed, x);
    let t2 = x[6] * x[6];
    pts.par_iter().map(|s| t2 * bus_transmission(&g, s.omega, s.voltage).norm_sqr() - s.y).collect()
}

/// Fits {ν₁, ν₂, n₀', n'', n_g, ∂n_V} and the coupler transmission to a full
/// (λ, V) map.
///
/// The real index is first located by scanning one ring-2 period of n₀'
/// (the phase of ring 2 repeats four times more slowly than that of ring 1
/// when L₁ = 4L₂, so a ring-1 period alone is ambiguous) at
/// `scan_density` points per ring-1 period; the best candidate seeds a
/// damped least-squares refinement of all parameters. Coupling and loss
/// rates are reported through the parameter bridge in `derived`.
pub fn fit_fdm(map: &MeasuredMap, opts: &FdmFitOptions) -> Result<FitResult> {
    map.validate()?;
    let seed = &opts.seed;
    seed.validate()?;
    let pts: Vec<Sample> = map
        .voltage
        .iter()
        .zip(&map.transmission)
        .flat_map(|(&v, row)| {
            map.wavelength_nm.iter().zip(row).map(move |(&l, &y)| Sample { omega: nm_to_omega(l), voltage: v, y })
        })
        .collect();
    let mut sorted: Vec<f64> = pts.iter().map(|p| p.y).collect();
    sorted.sort_by(f64::total_cmp);
    let t_cpl0 = sorted[(0.9 * (sorted.len() - 1) as f64) as usize].sqrt();

    let x_seed = [seed.nu1, seed.nu2, seed.n_eff_re, seed.n_eff_im, seed.n_g, seed.dn_v, t_cpl0];
    let k = seed.omega_ref / SPEED_OF_LIGHT;
    let period1 = 2.0 * std::f64::consts::PI / (k * seed.l1);
    let period_long = 2.0 * std::f64::consts::PI / (k * seed.l1.min(seed.l2));
    let period = period1.max(period_long);
    let step = period1 / opts.scan_density.max(4) as f64;
    let n_half = (0.5 * period / step).ceil() as i64;
    let (best_n, _) = (-n_half..=n_half)
        .into_par_iter()
        .map(|j| {
            let mut x = x_seed;
            x[2] = seed.n_eff_re + j as f64 * step;
            let c: f64 = residuals(seed, &pts, &x).iter().map(|r| r * r).sum();
            (x[2], c)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::FitFailure("empty index scan".into()))?;
    let mut x0 = x_seed;
    x0[2] = best_n;

    let scale = [
        (1.0 - seed.nu1).max(1e-3),
        (1.0 - seed.nu2).max(1e-3),
        step,
        seed.n_eff_im.max(1e-3 * step),
        1e-3 * seed.n_g,
        seed.dn_v.abs().max(1e-6),
        t_cpl0,
    ];
    let bounds = Bounds {
        lower: vec![0.0, 0.0, best_n - 2.0 * step, 0.0, 0.5 * seed.n_g, f64::NEG_INFINITY, 0.0],
        upper: vec![1.0, 1.0, best_n + 2.0 * step, f64::INFINITY, 2.0 * seed.n_g, f64::INFINITY, f64::INFINITY],
    };
    let rep = levenberg_marquardt(|x: &[f64]| residuals(seed, &pts, x), &x0, &scale, &bounds, &LmOptions::default())?;

    let geom = geometry_from(seed, &rep.x);
    let mut derived = Vec::new();
    let mut warnings = Vec::new();
    match gamma_from_nu(geom.nu1, geom.l1, geom.n_g) {
        Ok(gamma) => {
            derived.push(Estimate::new("gamma", gamma, f64::NAN));
            match g_from_geometry(&geom, gamma) {
                Ok(g) => derived.push(Estimate::new("g", g, f64::NAN)),
                Err(e) => warnings.push(format!("ring coupling rate unavailable: {e}")),
            }
        }
        Err(e) => warnings.push(format!("coupling rate unavailable: {e}")),
    }
    let loss = geom.loss_rate();
    derived.push(Estimate::new("gamma_L1", loss, f64::NAN));
    derived.push(Estimate::new("gamma_L2", loss, f64::NAN));
    if !rep.converged {
        warnings.push(format!("stopped after {} iterations without meeting the tolerances", rep.iterations));
    }
    Ok(FitResult {
        stage: FitStage::Fdm,
        estimates: estimates_from(&FDM_NAMES, &rep),
        fixed: vec![
            Estimate::new("L1", seed.l1, 0.0),
            Estimate::new("L2", seed.l2, 0.0),
            Estimate::new("theta1", seed.theta1, 0.0),
            Estimate::new("theta2", seed.theta2, 0.0),
        ],
        derived,
        delta_nl: Vec::new(),
        residual_norm: rep.residual_norm(),
        n_residuals: rep.residuals.len(),
        iterations: rep.iterations,
        converged: rep.converged,
        cost_history: rep.cost_history,
        warnings,
    })
}

/// Geometry described by an FDM fit result.
pub fn fitted_geometry(seed: &FdmGeometry, fit: &FitResult) -> FdmGeometry {
    let x: Vec<f64> = FDM_NAMES.iter().map(|n| fit.value(n).unwrap_or(f64::NAN)).collect();
    geometry_from(seed, &x)
}

/// Relative difference of the shared rates between a transfer-matrix fit and
/// a coupled-mode fit, (FDM − CMM)/CMM.
#[derive(Debug, Clone, Serialize)]
pub struct RateComparison {
    pub name: String,
    pub fdm: f64,
    pub cmm: f64,
    pub rel_diff: f64,
}

pub fn fdm_cmm_consistency(fdm: &FitResult, cmm: &FitResult) -> Vec<RateComparison> {
    ["gamma", "g", "gamma_L1", "gamma_L2"]
        .iter()
        .filter_map(|&n| {
            let (a, b) = (fdm.value(n)?, cmm.value(n)?);
            Some(RateComparison { name: n.to_string(), fdm: a, cmm: b, rel_diff: (a - b) / b })
        })
        .collect()
}
