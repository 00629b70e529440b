//! Time-domain control of single-photon emission by a modulated conversion
//! rate.
//!
//! A control χ_in(t) that absorbs an input pulse S(t) without reflection is
//! built first; its time reverse χ_out(t) = χ_in(t₀ − t) emits S centred at t₀.

pub mod emission;
pub mod sweep;

use serde::Serialize;
use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::numerics::interp::UniformSeries;

pub use emission::{integrate_absorption, integrate_emission, EmissionOptions, EmissionResult, ShapingParams};
pub use sweep::{optimize_cell, sweep_figures_of_merit, SweepCell, SweepOptions};

/// Real, non-negative pulse shape centred at τ = 0.
#[derive(Debug, Clone)]
pub enum PulseShape {
    /// Intensity FWHM Δt.
    Gaussian,
    /// Samples of S(τ); normalized on construction.
    Sampled(UniformSeries),
}

#[derive(Debug, Clone)]
pub struct TargetWavepacket {
    pub shape: PulseShape,
    /// Intensity FWHM [s].
    pub delta_t: f64,
    /// Centre of the emitted pulse [s].
    pub t0: f64,
}

impl TargetWavepacket {
    pub fn gaussian(delta_t: f64, t0: f64) -> Self {
        Self { shape: PulseShape::Gaussian, delta_t, t0 }
    }

    /// Gaussian with spectral width Δω = 4 ln2/Δt.
    pub fn gaussian_bandwidth(delta_omega: f64, t0_over_dt: f64) -> Self {
        let dt = 4.0 * LN_2 / delta_omega;
        Self::gaussian(dt, t0_over_dt * dt)
    }

    /// Sampled shape on τ ∈ [start, start + step·(n−1)], rescaled to unit norm.
    pub fn sampled(start: f64, step: f64, values: Vec<f64>, delta_t: f64, t0: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Data("target samples must be finite and non-negative".into()));
        }
        let raw = UniformSeries::new(start, step, values.clone(), 0.0);
        let n2 = gauss_legendre(|t| raw.eval(t).powi(2), raw.start(), raw.end(), values.len() * 4);
        if !(n2 > 0.0) {
            return Err(Error::Data("target has zero norm".into()));
        }
        let k = n2.sqrt();
        let series = UniformSeries::new(start, step, values.into_iter().map(|v| v / k).collect(), 0.0);
        Ok(Self { shape: PulseShape::Sampled(series), delta_t, t0 })
    }

    pub fn delta_omega(&self) -> f64 {
        4.0 * LN_2 / self.delta_t
    }

    /// S(τ) with the pulse centred at τ = 0.
    pub fn centred(&self, tau: f64) -> f64 {
        match &self.shape {
            PulseShape::Gaussian => {
                let dt = self.delta_t;
                (2.0 / dt).sqrt() * (LN_2 / PI).powf(0.25) * (-2.0 * LN_2 * tau * tau / (dt * dt)).exp()
            }
            PulseShape::Sampled(s) => s.eval(tau),
        }
    }

    /// dS/dτ.
    pub fn centred_slope(&self, tau: f64) -> f64 {
        match &self.shape {
            PulseShape::Gaussian => -self.delta_omega() / self.delta_t * tau * self.centred(tau),
            PulseShape::Sampled(s) => s.slope(tau),
        }
    }

    /// Emission-frame target S(t − t₀).
    pub fn value(&self, t: f64) -> f64 {
        self.centred(t - self.t0)
    }

    /// τ-range outside which the shape is negligible.
    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            PulseShape::Gaussian => (-10.0 * self.delta_t, 10.0 * self.delta_t),
            PulseShape::Sampled(s) => (s.start(), s.end()),
        }
    }
}

const GL5_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_W: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

fn gl5<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    r * GL5_X.iter().zip(GL5_W).map(|(x, w)| w * f(m + r * x)).sum::<f64>()
}

/// Composite 5-point Gauss–Legendre on `n` panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|k| gl5(&f, a + h * k as f64, a + h * (k + 1) as f64)).sum()
}

/// Leading-edge time after which f_o ≥ 0 for a Gaussian, relative to its
/// centre: τ_c = −(γ_o/(2Δω))(1 − γ_L/γ_o) Δt.
pub fn gaussian_critical_time(delta_t: f64, gamma_o: f64, gamma_l: f64) -> f64 {
    let dw = 4.0 * LN_2 / delta_t;
    -(gamma_o / (2.0 * dw)) * (1.0 - gamma_l / gamma_o) * delta_t
}

/// Sine-ramp switch: 0 below −τ_env/2, 1 above τ_env/2.
pub fn f_env(t: f64, tau_env: f64) -> f64 {
    if t <= -0.5 * tau_env {
        0.0
    } else if t >= 0.5 * tau_env {
        1.0
    } else {
        0.5 * (1.0 + (PI * t / tau_env).sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub tau_on: f64,
    pub tau_off: f64,
    pub tau_env: f64,
    pub beta: f64,
}

impl Envelope {
    pub fn value(&self, t: f64) -> f64 {
        f_env(t - self.tau_on, self.tau_env) * f_env(self.tau_off - t, self.tau_env)
    }

    /// Times where the envelope is not smooth.
    pub fn breakpoints(&self) -> [f64; 4] {
        let h = 0.5 * self.tau_env;
        [self.tau_on - h, self.tau_on + h, self.tau_off - h, self.tau_off + h]
    }
}

/// Absorption control χ_in and its emission counterpart.
#[derive(Debug, Clone)]
pub struct ControlPulse {
    pub target: TargetWavepacket,
    pub gamma_o: f64,
    pub gamma_l: f64,
    /// Start of the valid absorption window (τ frame); χ_in = 0 before it.
    pub window_start: f64,
    /// Critical time of the positivity condition (τ frame).
    pub critical_time: f64,
    /// Constant control phase; zero selects the real branch.
    pub phase: f64,
    pub envelope: Option<Envelope>,
    step: f64,
    /// ∫ f_o from `window_start` to each grid node.
    cumulative: Vec<f64>,
}

impl ControlPulse {
    fn f_o(&self, tau: f64) -> f64 {
        f_o(&self.target, self.gamma_o, self.gamma_l, tau)
    }

    fn end(&self) -> f64 {
        self.window_start + self.step * (self.cumulative.len() - 1) as f64
    }

    /// ∫_{window_start}^{τ} f_o.
    pub fn integral(&self, tau: f64) -> f64 {
        if tau <= self.window_start {
            return 0.0;
        }
        let tau = tau.min(self.end());
        let k = (((tau - self.window_start) / self.step).floor() as usize).min(self.cumulative.len() - 1);
        let tk = self.window_start + self.step * k as f64;
        self.cumulative[k] + gl5(&|s| self.f_o(s), tk, tau)
    }

    /// χ_in(τ) on the absorption axis.
    pub fn chi_in(&self, tau: f64) -> f64 {
        if tau < self.window_start || tau > self.end() {
            return 0.0;
        }
        let s = self.target.centred(tau);
        let decay = (-0.5 * self.gamma_l * tau).exp();
        if tau == self.window_start || tau - self.window_start < 1e-9 * self.step {
            // f_o/√(2∫f_o) → √(f_o') when the window opens at a zero of f_o
            if self.window_start == self.critical_time {
                let h = 1e-4 * self.step;
                let d = (self.f_o(tau + h) - self.f_o(tau - h)) / (2.0 * h);
                return d.max(0.0).sqrt() * decay / s;
            }
            return 0.0;
        }
        let f = self.f_o(tau);
        let big_f = self.integral(tau);
        if !(big_f > 0.0) || !(s > 0.0) {
            return 0.0;
        }
        f * decay / (s * (2.0 * big_f).sqrt())
    }

    /// χ_out(t) = χ_in(t₀ − t), unscaled by the envelope.
    pub fn chi_out(&self, t: f64) -> f64 {
        self.chi_in(self.target.t0 - t)
    }

    /// Applied control β F_env(t) χ_out(t) as a complex rate.
    pub fn chi(&self, t: f64) -> num_complex::Complex64 {
        let base = self.chi_out(t);
        let scale = self.envelope.map_or(1.0, |e| e.beta * e.value(t));
        num_complex::Complex64::from_polar(base * scale, self.phase)
    }

    /// Emission time after which χ_out vanishes (the synthesis cut-off).
    pub fn cutoff_time(&self) -> f64 {
        self.target.t0 - self.window_start
    }

    /// Emission time before which χ_out vanishes.
    pub fn onset_time(&self) -> f64 {
        self.target.t0 - self.end()
    }

    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        self.envelope = Some(envelope);
        self
    }

    pub fn grid_step(&self) -> f64 {
        self.step
    }

    /// Samples (t, χ(t)) on a uniform emission grid.
    pub fn samples(&self, t_end: f64, step: f64) -> Vec<(f64, num_complex::Complex64)> {
        let n = (t_end / step).ceil() as usize + 1;
        (0..n).map(|k| {
            let t = k as f64 * step;
            (t, self.chi(t))
        })
        .collect()
    }
}

/// f_o(τ) = ((γ_o − γ_L)/2 · S − Ṡ) · S · e^{γ_L τ}.
pub fn f_o(target: &TargetWavepacket, gamma_o: f64, gamma_l: f64, tau: f64) -> f64 {
    let s = target.centred(tau);
    (0.5 * (gamma_o - gamma_l) * s - target.centred_slope(tau)) * s * (gamma_l * tau).exp()
}

/// Last leading-edge time at which f_o changes sign from negative to
/// non-negative, searched on `[lo, peak]`.
fn numeric_critical_time(target: &TargetWavepacket, gamma_o: f64, gamma_l: f64, step: f64) -> f64 {
    let (lo, hi) = target.support();
    let mut peak = lo;
    let mut best = f64::MIN;
    let mut t = lo;
    while t <= hi {
        let v = target.centred(t);
        if v > best {
            best = v;
            peak = t;
        }
        t += step;
    }
    let mut crit = lo;
    let mut t = lo;
    while t <= peak {
        if f_o(target, gamma_o, gamma_l, t) < 0.0 {
            crit = t + step;
        }
        t += step;
    }
    crit
}

/// Uniform grid step min(2π/(40·max rate), Δt/200).
pub fn grid_step(delta_t: f64, max_rate: f64) -> f64 {
    (2.0 * PI / (40.0 * max_rate)).min(delta_t / 200.0)
}

/// Builds χ_in for a target. The window opens at `window_start` (τ frame) or,
/// if `None`, at the critical time; it is clipped to the target support.
pub fn synthesize_control(
    target: &TargetWavepacket,
    gamma_o: f64,
    gamma_l: f64,
    window_start: Option<f64>,
) -> Result<ControlPulse> {
    if !(gamma_o > 0.0) || !(gamma_l >= 0.0) || !(target.delta_t > 0.0) {
        return Err(Error::InvalidParams("γ_o > 0, γ_L ≥ 0 and Δt > 0 are required".into()));
    }
    let step = grid_step(target.delta_t, gamma_o + gamma_l);
    let critical = match target.shape {
        PulseShape::Gaussian => gaussian_critical_time(target.delta_t, gamma_o, gamma_l),
        PulseShape::Sampled(_) => numeric_critical_time(target, gamma_o, gamma_l, step),
    };
    let (lo, hi) = target.support();
    let start = match window_start {
        Some(ws) if ws < critical => {
            return Err(Error::Positivity { critical_time: critical, window_start: ws });
        }
        Some(ws) => ws,
        None => critical.max(lo),
    };
    if start >= hi {
        return Err(Error::Domain("synthesis window starts after the target ends".into()));
    }
    let n = ((hi - start) / step).ceil() as usize + 1;
    let mut cumulative = Vec::with_capacity(n);
    cumulative.push(0.0);
    let f = |t: f64| f_o(target, gamma_o, gamma_l, t);
    for k in 1..n {
        let a = start + step * (k - 1) as f64;
        let prev = cumulative[k - 1];
        cumulative.push(prev + gl5(&f, a, a + step));
    }
    Ok(ControlPulse {
        target: target.clone(),
        gamma_o,
        gamma_l,
        window_start: start,
        critical_time: critical,
        phase: 0.0,
        envelope: None,
        step,
        cumulative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_normalized() {
        let t = TargetWavepacket::gaussian(2.0, 0.0);
        let n = gauss_legendre(|x| t.centred(x).powi(2), -30.0, 30.0, 400);
        assert!((n - 1.0).abs() < 1e-12);
        // derivative relation Ṡ = −(Δω/Δt) τ S
        for tau in [-1.3, 0.2, 2.0] {
            let h = 1e-6;
            let fd = (t.centred(tau + h) - t.centred(tau - h)) / (2.0 * h);
            assert!((fd - t.centred_slope(tau)).abs() < 1e-8);
        }
        assert!(((t.centred(1.0) / t.centred(0.0)).powi(2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn critical_time_limits() {
        // narrowband and lossless: pushed far into the leading tail
        assert!(gaussian_critical_time(1.0, 1e6, 0.0) < -1e5);
        let tc = gaussian_critical_time(1.0, 1.0, 0.0);
        let dw = 4.0 * LN_2;
        assert!((tc + 0.5 / dw).abs() < 1e-15);
        let t = TargetWavepacket::gaussian(1.0, 0.0);
        assert!(f_o(&t, 1.0, 0.0, tc + 1e-9) > 0.0);
        assert!(f_o(&t, 1.0, 0.0, tc - 1e-9) < 0.0);
    }

    #[test]
    fn window_before_critical_time_is_rejected() {
        let t = TargetWavepacket::gaussian_bandwidth(0.38, 0.0);
        match synthesize_control(&t, 1.0, 0.002, Some(-5.0 * t.delta_t)) {
            Err(Error::Positivity { critical_time, window_start }) => {
                assert!((critical_time / t.delta_t + 0.5 / 0.38 * 0.998).abs() < 1e-12);
                assert_eq!(window_start, -5.0 * t.delta_t);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn control_limit_at_window_start() {
        let t = TargetWavepacket::gaussian_bandwidth(0.38, 0.0);
        let c = synthesize_control(&t, 1.0, 0.0, None).unwrap();
        let expect = (t.delta_omega() / t.delta_t).sqrt();
        assert!((c.chi_in(c.window_start) / expect - 1.0).abs() < 1e-6);
        let near = c.chi_in(c.window_start + 1e-3 * c.grid_step());
        assert!((near / expect - 1.0).abs() < 1e-3);
        assert_eq!(c.chi_in(c.window_start - 1e-9), 0.0);
        assert!(c.chi_in(0.0) > 0.0);
    }

    #[test]
    fn integral_matches_quadrature() {
        let t = TargetWavepacket::gaussian_bandwidth(0.5, 0.0);
        let c = synthesize_control(&t, 1.0, 1e-3, None).unwrap();
        let tau = 0.37 * t.delta_t;
        let direct = gauss_legendre(|x| f_o(&t, 1.0, 1e-3, x), c.window_start, tau, 2000);
        assert!((c.integral(tau) / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_values() {
        let e = Envelope { tau_on: 1.0, tau_off: 9.0, tau_env: 0.5, beta: 1.0 };
        assert_eq!(e.value(5.0), 1.0);
        assert!((e.value(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(e.value(0.5), 0.0);
        assert_eq!(e.value(9.5), 0.0);
        assert_eq!(f_env(0.0, 2.0), 0.5);
    }

    #[test]
    fn sampled_target_matches_gaussian() {
        let g = TargetWavepacket::gaussian(1.0, 0.0);
        let step = 0.01;
        let vals: Vec<f64> = (0..1001).map(|k| g.centred(-5.0 + step * k as f64)).collect();
        let s = TargetWavepacket::sampled(-5.0, step, vals, 1.0, 0.0).unwrap();
        for tau in [-0.8, 0.0, 0.33] {
            assert!((s.centred(tau) - g.centred(tau)).abs() < 1e-5);
            assert!((s.centred_slope(tau) - g.centred_slope(tau)).abs() < 1e-3);
        }
        let cs = synthesize_control(&s, 2.0, 0.0, None).unwrap();
        let cg = synthesize_control(&g, 2.0, 0.0, None).unwrap();
        assert!((cs.critical_time - cg.critical_time).abs() < 0.02);
        assert!((cs.chi_in(0.3) / cg.chi_in(0.3) - 1.0).abs() < 1e-3);
    }
}
