//! Forward integration of the emitting four-mode system and of the
//! absorbing two-mode system.

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::ControlPulse;
use crate::error::{Error, Result};
use crate::numerics::ode::{Dopri5, StepState};

/// Rates of the shaping device. The output and down-converted modes share the
/// bus coupling γ_o; all ring-1 modes lose γ_L; ring 2 loses γ_L as well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapingParams {
    pub gamma_o: f64,
    pub gamma_l: f64,
    pub g: f64,
    pub delta_ab: f64,
    /// Residual bus coupling of the signal mode; zero for a fully decoupled signal.
    pub gamma_s_residual: f64,
}

impl ShapingParams {
    /// From G = g/√(γ_L(γ_L + γ_o)) and Q_L/Q_o = γ_o/γ_L.
    pub fn from_figures(big_g: f64, ql_over_qo: f64, gamma_o: f64) -> Self {
        let gamma_l = gamma_o / ql_over_qo;
        let g = big_g * (gamma_l * (gamma_l + gamma_o)).sqrt();
        Self { gamma_o, gamma_l, g, delta_ab: 0.0, gamma_s_residual: 0.0 }
    }

    pub fn lossless(gamma_o: f64, g: f64) -> Self {
        Self { gamma_o, gamma_l: 0.0, g, delta_ab: 0.0, gamma_s_residual: 0.0 }
    }

    pub fn total_o(&self) -> f64 {
        self.gamma_o + self.gamma_l
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma_o > 0.0
            && self.gamma_l >= 0.0
            && self.g >= 0.0
            && self.gamma_s_residual >= 0.0
            && self.delta_ab.is_finite()
            && self.g.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams("shaping rates must be finite with γ_o > 0 and γ_L, g ≥ 0".into()))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EmissionResult {
    pub t: Vec<f64>,
    pub chi: Vec<f64>,
    pub s_out: Vec<[f64; 2]>,
    pub p_s: Vec<f64>,
    pub p_o: Vec<f64>,
    pub p_i_minus: Vec<f64>,
    pub p_b: Vec<f64>,
    /// ∫|S_out|² dt.
    pub eta_out: f64,
    /// Photons leaving through the down-converted mode, γ_o ∫|A_i−|² dt.
    pub eta_down: f64,
    /// |∫S_out* S_target dt|²/η_out.
    pub overlap: f64,
    /// Final |A_o|², |A_s|², |A_i−|², |B|².
    pub final_populations: [f64; 4],
    pub steps: usize,
}

impl EmissionResult {
    pub fn total_remaining(&self) -> f64 {
        self.final_populations.iter().sum()
    }

    /// Bus output plus remaining population; 1 without intrinsic loss.
    pub fn accounted_flux(&self) -> f64 {
        self.eta_out + self.eta_down + self.total_remaining()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EmissionOptions {
    pub rtol: f64,
    /// Record samples at this spacing; `None` records only the end state.
    pub sample_step: Option<f64>,
    /// Integration end; defaults to the control switch-off plus 40/Γ_o.
    pub t_end: Option<f64>,
}

impl Default for EmissionOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, sample_step: None, t_end: None }
    }
}

const N_STATE: usize = 12;

fn emission_rhs(p: &ShapingParams, c: &ControlPulse, t: f64, y: &[f64], dy: &mut [f64]) {
    let i = C64::new(0.0, 1.0);
    let ao = C64::new(y[0], y[1]);
    let a_s = C64::new(y[2], y[3]);
    let ai = C64::new(y[4], y[5]);
    let b = C64::new(y[6], y[7]);
    let chi = c.chi(t);
    let half_o = 0.5 * p.total_o();
    let d_ao = -half_o * ao - i * chi * a_s;
    let d_as = -0.5 * (p.gamma_l + p.gamma_s_residual) * a_s - i * chi.conj() * ao - i * chi * ai;
    let d_ai = -half_o * ai - i * chi.conj() * a_s - i * p.g * b;
    let d_b = C64::new(-0.5 * p.gamma_l, -p.delta_ab) * b - i * p.g * ai;
    let s_out = p.gamma_o.sqrt() * ao;
    let ovl = s_out.conj() * c.target.value(t);
    dy[0] = d_ao.re;
    dy[1] = d_ao.im;
    dy[2] = d_as.re;
    dy[3] = d_as.im;
    dy[4] = d_ai.re;
    dy[5] = d_ai.im;
    dy[6] = d_b.re;
    dy[7] = d_b.im;
    dy[8] = s_out.norm_sqr();
    dy[9] = ovl.re;
    dy[10] = ovl.im;
    dy[11] = p.gamma_o * ai.norm_sqr();
}

/// End of the applied control.
fn switch_off(c: &ControlPulse) -> f64 {
    let cut = c.cutoff_time();
    match c.envelope {
        Some(e) => cut.min(e.tau_off + 0.5 * e.tau_env),
        None => cut,
    }
}

/// Emission from A_s(0) = 1 under the applied control.
pub fn integrate_emission(p: &ShapingParams, control: &ControlPulse, opts: &EmissionOptions) -> Result<EmissionResult> {
    p.validate()?;
    let t_end = opts.t_end.unwrap_or_else(|| switch_off(control).max(0.0) + 40.0 / p.total_o());
    let mut stops: Vec<f64> = vec![control.cutoff_time(), control.onset_time()];
    if let Some(e) = control.envelope {
        stops.extend(e.breakpoints());
    }
    if let Some(h) = opts.sample_step {
        let n = (t_end / h).ceil() as usize;
        stops.extend((1..n).map(|k| k as f64 * h));
    }
    stops.retain(|&s| s > 0.0 && s < t_end);
    stops.push(t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut y = [0.0; N_STATE];
    y[2] = 1.0;
    let solver = Dopri5::with_tolerance(opts.rtol);
    let mut st = StepState::default();
    let record = opts.sample_step.is_some();
    let mut out = EmissionResult {
        t: Vec::new(),
        chi: Vec::new(),
        s_out: Vec::new(),
        p_s: Vec::new(),
        p_o: Vec::new(),
        p_i_minus: Vec::new(),
        p_b: Vec::new(),
        eta_out: 0.0,
        eta_down: 0.0,
        overlap: 0.0,
        final_populations: [0.0; 4],
        steps: 0,
    };
    let push = |out: &mut EmissionResult, t: f64, y: &[f64]| {
        let k = p.gamma_o.sqrt();
        out.t.push(t);
        out.chi.push(control.chi(t).norm());
        out.s_out.push([k * y[0], k * y[1]]);
        out.p_o.push(y[0] * y[0] + y[1] * y[1]);
        out.p_s.push(y[2] * y[2] + y[3] * y[3]);
        out.p_i_minus.push(y[4] * y[4] + y[5] * y[5]);
        out.p_b.push(y[6] * y[6] + y[7] * y[7]);
    };
    if record {
        push(&mut out, 0.0, &y);
    }
    let mut t = 0.0;
    for &next in &stops {
        solver.integrate(|tt, yy, dd| emission_rhs(p, control, tt, yy, dd), t, next, &mut y, &mut st)?;
        t = next;
        if record {
            push(&mut out, t, &y);
        }
    }
    let pop = |a: usize| y[a] * y[a] + y[a + 1] * y[a + 1];
    out.final_populations = [pop(0), pop(2), pop(4), pop(6)];
    out.eta_out = y[8];
    out.eta_down = y[11];
    out.overlap = if y[8] > 0.0 { (y[9] * y[9] + y[10] * y[10]) / y[8] } else { 0.0 };
    out.steps = st.accepted;
    Ok(out)
}

/// Absorbs the input `s_in(τ)` (absorption frame) under χ_in from an empty
/// resonator at `t_start`. Returns (|A_s(t_end)|², reflected energy).
pub fn integrate_absorption<F>(
    gamma_o: f64,
    gamma_l: f64,
    control: &ControlPulse,
    s_in: F,
    t_start: f64,
    t_end: f64,
    rtol: f64,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let i = C64::new(0.0, 1.0);
    let total = gamma_o + gamma_l;
    let k = gamma_o.sqrt();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let ao = C64::new(y[0], y[1]);
        let a_s = C64::new(y[2], y[3]);
        let chi = C64::from_polar(control.chi_in(t), control.phase);
        let s = s_in(t);
        let d_ao = -0.5 * total * ao - i * chi.conj() * a_s - k * s;
        let d_as = -0.5 * gamma_l * a_s - i * chi * ao;
        let out = s + k * ao;
        dy[0] = d_ao.re;
        dy[1] = d_ao.im;
        dy[2] = d_as.re;
        dy[3] = d_as.im;
        dy[4] = out.norm_sqr();
    };
    let mut y = [0.0; 5];
    let solver = Dopri5::with_tolerance(rtol);
    let mut st = StepState::default();
    let mut stops = vec![control.window_start, t_end];
    stops.retain(|&s| s > t_start && s <= t_end);
    let mut t = t_start;
    for next in stops {
        solver.integrate(&rhs, t, next, &mut y, &mut st)?;
        t = next;
    }
    Ok((y[2] * y[2] + y[3] * y[3], y[4]))
}
