//! Figure-of-merit sweeps over (G, Q_L/Q_o).
//!
//! Each cell maximizes η_out over the envelope lead (t₀ − τ_on)/Δt, the
//! amplitude β and the bandwidth Δω/γ_o subject to OL ≥ floor. The envelope
//! ramp has a fixed width in units of Δt and starts at t = 0; τ_off is placed
//! so that the ramp closes at the synthesis cut-off.

use rayon::prelude::*;
use serde::Serialize;

use super::emission::{integrate_emission, EmissionOptions, ShapingParams};
use super::{gaussian_critical_time, synthesize_control, ControlPulse, Envelope, TargetWavepacket};
use crate::error::Result;
use crate::numerics::search::{pattern_search, PatternOptions};

/// Default envelope ramp width in units of Δt.
pub const ENVELOPE_WIDTH: f64 = 0.84;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapingDesign {
    /// (t₀ − τ_on)/Δt.
    pub lead: f64,
    pub beta: f64,
    /// Δω/γ_o.
    pub bandwidth: f64,
}

impl ShapingDesign {
    fn to_vec(self) -> Vec<f64> {
        vec![self.lead, self.beta, self.bandwidth]
    }

    fn from_slice(x: &[f64]) -> Self {
        Self { lead: x[0], beta: x[1], bandwidth: x[2] }
    }
}

impl Default for ShapingDesign {
    fn default() -> Self {
        Self { lead: 1.3, beta: 1.05, bandwidth: 0.45 }
    }
}

/// Control pulse for a design point with the ramp `envelope_width`·Δt wide.
pub fn design_control(p: &ShapingParams, d: &ShapingDesign, envelope_width: f64) -> Result<ControlPulse> {
    let dw = d.bandwidth * p.gamma_o;
    let dt = 4.0 * std::f64::consts::LN_2 / dw;
    let tau_env = envelope_width * dt;
    let tau_on = 0.5 * tau_env;
    let t0 = tau_on + d.lead * dt;
    let tc = gaussian_critical_time(dt, p.gamma_o, p.gamma_l);
    let target = TargetWavepacket::gaussian(dt, t0);
    let tau_off = t0 - tc - 0.5 * tau_env;
    let c = synthesize_control(&target, p.gamma_o, p.gamma_l, None)?;
    Ok(c.with_envelope(Envelope { tau_on, tau_off, tau_env, beta: d.beta }))
}

/// (η_out, OL) for a design point.
pub fn evaluate_design(p: &ShapingParams, d: &ShapingDesign, envelope_width: f64, rtol: f64) -> Result<(f64, f64)> {
    let c = design_control(p, d, envelope_width)?;
    let r = integrate_emission(p, &c, &EmissionOptions { rtol, ..Default::default() })?;
    Ok((r.eta_out, r.overlap))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepOptions {
    pub ol_floor: f64,
    pub gamma_o: f64,
    pub max_evals: usize,
    pub rtol: f64,
    pub envelope_width: f64,
    pub seed: ShapingDesign,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { ol_floor: 0.99, gamma_o: 1.0, max_evals: 400, rtol: 1e-9, envelope_width: ENVELOPE_WIDTH, seed: ShapingDesign::default() }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepCell {
    #[serde(rename = "G")]
    pub big_g: f64,
    pub ql_over_qo: f64,
    /// `None` when no point met the overlap floor.
    pub eta_out: Option<f64>,
    pub overlap: Option<f64>,
    pub design: Option<ShapingDesign>,
}

impl SweepCell {
    pub fn dw_over_gamma(&self) -> Option<f64> {
        self.design.map(|d| d.bandwidth)
    }
}

/// Best feasible design for one (G, Q_L/Q_o) starting from `seed`.
pub fn optimize_cell(big_g: f64, ql_over_qo: f64, seed: &ShapingDesign, opts: &SweepOptions) -> SweepCell {
    let p = ShapingParams::from_figures(big_g, ql_over_qo, opts.gamma_o);
    let floor = opts.ol_floor;
    let w = opts.envelope_width;
    let objective = |x: &[f64]| match evaluate_design(&p, &ShapingDesign::from_slice(x), w, opts.rtol) {
        Ok((eta, ol)) if eta.is_finite() && ol.is_finite() => -eta + 10.0 * (floor - ol).max(0.0),
        _ => f64::INFINITY,
    };
    let popts = PatternOptions {
        initial_step: vec![0.2, 0.04, 0.05],
        min_step: vec![2e-3, 5e-4, 5e-4],
        lower: vec![0.2, 0.8, 0.02],
        upper: vec![6.0, 1.6, 2.0],
        max_evals: opts.max_evals,
    };
    let res = pattern_search(objective, &seed.to_vec(), &popts);
    let design = ShapingDesign::from_slice(&res.x);
    match evaluate_design(&p, &design, w, opts.rtol) {
        Ok((eta, ol)) if ol >= floor => SweepCell {
            big_g,
            ql_over_qo,
            eta_out: Some(eta),
            overlap: Some(ol),
            design: Some(design),
        },
        _ => SweepCell { big_g, ql_over_qo, eta_out: None, overlap: None, design: None },
    }
}

/// Table over G × Q_L/Q_o. Rows (fixed G) run in parallel; along a row each
/// cell is seeded from the previous solved one.
pub fn sweep_figures_of_merit(g_list: &[f64], ql_list: &[f64], opts: &SweepOptions) -> Vec<SweepCell> {
    g_list
        .par_iter()
        .flat_map_iter(|&g| {
            let mut seed = opts.seed;
            let mut row = Vec::with_capacity(ql_list.len());
            for &ql in ql_list {
                let cell = optimize_cell(g, ql, &seed, opts);
                if let Some(d) = cell.design {
                    seed = d;
                }
                row.push(cell);
            }
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_envelope_closes_at_cutoff() {
        let p = ShapingParams::from_figures(100.0, 1000.0, 1.0);
        let c = design_control(&p, &ShapingDesign::default(), ENVELOPE_WIDTH).unwrap();
        let e = c.envelope.unwrap();
        assert!((e.tau_off + 0.5 * e.tau_env - c.cutoff_time()).abs() < 1e-9 * c.cutoff_time());
        assert_eq!(e.value(0.0), 0.0);
    }
}
