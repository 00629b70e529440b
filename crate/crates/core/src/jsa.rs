//! Joint spectral amplitude of resonator photon pairs and heralded purity.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::interp::lerp_sorted;

/// Lorentzian l(Ω) = 1/(Γ/2 + iΩ).
pub fn lorentzian(total: f64, omega: f64) -> C64 {
    1.0 / C64::new(0.5 * total, omega)
}

/// Pump amplitude spectrum A_p(Ω) in the waveguide.
#[derive(Debug, Clone, PartialEq)]
pub enum PumpSpectrum {
    /// A_p ≡ 1.
    Flat,
    /// Real Gaussian with the given intensity FWHM [rad/s].
    Gaussian { fwhm: f64 },
    /// Linear interpolation of samples, zero outside.
    Sampled { omega: Vec<f64>, amplitude: Vec<f64> },
}

impl PumpSpectrum {
    pub fn amplitude(&self, omega: f64) -> f64 {
        match self {
            PumpSpectrum::Flat => 1.0,
            PumpSpectrum::Gaussian { fwhm } => {
                // intensity FWHM -> amplitude exp(−2 ln2 Ω²/fwhm²)
                (-2.0 * std::f64::consts::LN_2 * omega * omega / (fwhm * fwhm)).exp()
            }
            PumpSpectrum::Sampled { omega: w, amplitude } => {
                if w.is_empty() || omega < w[0] || omega > w[w.len() - 1] {
                    0.0
                } else {
                    lerp_sorted(w, amplitude, omega)
                }
            }
        }
    }
}

/// Closed-form self-convolution of l_p: 2π/(Γ_p + iΩ).
pub fn flat_pump_function(gamma_p: f64, omega: f64) -> C64 {
    2.0 * PI / C64::new(gamma_p, omega)
}

/// F_p(Ω) = ∫ A_p(Ω−Ω') l_p(Ω−Ω') A_p(Ω') l_p(Ω') dΩ' by midpoint quadrature
/// after the substitution Ω' = Ω/2 + Γ_p tan u.
pub fn pump_function_quadrature(pump: &PumpSpectrum, gamma_p: f64, omega: f64, n: usize) -> C64 {
    let h = PI / n as f64;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..n {
        let u = -0.5 * PI + (k as f64 + 0.5) * h;
        let (s, c) = u.sin_cos();
        let x = 0.5 * omega + gamma_p * s / c;
        let jac = gamma_p / (c * c);
        let a = pump.amplitude(omega - x) * lorentzian(gamma_p, omega - x);
        let b = pump.amplitude(x) * lorentzian(gamma_p, x);
        acc += a * b * jac;
    }
    acc * h
}

/// Total decay rates of the three modes [rad/s].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeRates {
    pub gamma_s: f64,
    pub gamma_i: f64,
    pub gamma_p: f64,
}

impl ModeRates {
    /// Rates ω/Q from loaded quality factors at carrier ω.
    pub fn from_q(q_s: f64, q_i: f64, q_p: f64, omega: f64) -> Result<Self> {
        if !(q_s > 0.0 && q_i > 0.0 && q_p > 0.0 && omega > 0.0) {
            return Err(Error::InvalidParams("quality factors and carrier frequency must be positive".into()));
        }
        Ok(Self { gamma_s: omega / q_s, gamma_i: omega / q_i, gamma_p: omega / q_p })
    }

    /// Q_p = Q_i and Q_s = ratio·Q_i, scaled to Γ_i = 1.
    pub fn for_ratio(ratio: f64) -> Self {
        Self { gamma_s: 1.0 / ratio, gamma_i: 1.0, gamma_p: 1.0 }
    }

    fn max(&self) -> f64 {
        self.gamma_s.max(self.gamma_i).max(self.gamma_p)
    }
}

/// Frequency grid for one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GridSpec {
    /// `n` points on ±`half_span_factor`·max Γ/2.
    Uniform { n: usize, half_span_factor: f64 },
    /// Ω = a sinh v with a = Γ_axis/4 and v uniform, reaching ±`span_factor`·max Γ.
    Mapped { n: usize, span_factor: f64 },
}

impl GridSpec {
    pub fn mapped(n: usize) -> Self {
        GridSpec::Mapped { n, span_factor: 200.0 }
    }

    pub fn n(&self) -> usize {
        match *self {
            GridSpec::Uniform { n, .. } | GridSpec::Mapped { n, .. } => n,
        }
    }

    pub fn with_n(self, n: usize) -> Self {
        match self {
            GridSpec::Uniform { half_span_factor, .. } => GridSpec::Uniform { n, half_span_factor },
            GridSpec::Mapped { span_factor, .. } => GridSpec::Mapped { n, span_factor },
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::mapped(192)
    }
}

/// Nodes and trapezoid quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub omega: Vec<f64>,
    pub weight: Vec<f64>,
}

impl Axis {
    /// Spacing between the two nodes closest to Ω = 0.
    pub fn center_spacing(&self) -> f64 {
        let i = self
            .omega
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|p| p.0)
            .unwrap_or(0);
        let j = if i + 1 < self.omega.len() { i + 1 } else { i.saturating_sub(1) };
        (self.omega[j] - self.omega[i]).abs()
    }

    pub fn span(&self) -> f64 {
        self.omega.last().copied().unwrap_or(0.0) - self.omega.first().copied().unwrap_or(0.0)
    }
}

pub fn build_axis(spec: GridSpec, gamma_axis: f64, gamma_max: f64) -> Axis {
    match spec {
        GridSpec::Uniform { n, half_span_factor } => {
            let half = half_span_factor * gamma_max / 2.0;
            let h = 2.0 * half / (n - 1) as f64;
            let omega: Vec<f64> = (0..n).map(|k| -half + h * k as f64).collect();
            let mut weight = vec![h; n];
            weight[0] *= 0.5;
            weight[n - 1] *= 0.5;
            Axis { omega, weight }
        }
        GridSpec::Mapped { n, span_factor } => {
            let a = gamma_axis / 4.0;
            let vmax = (span_factor * gamma_max / a).asinh();
            let dv = 2.0 * vmax / (n - 1) as f64;
            let mut omega = Vec::with_capacity(n);
            let mut weight = Vec::with_capacity(n);
            for k in 0..n {
                let v = -vmax + dv * k as f64;
                omega.push(a * v.sinh());
                let end = k == 0 || k == n - 1;
                weight.push(a * v.cosh() * dv * if end { 0.5 } else { 1.0 });
            }
            Axis { omega, weight }
        }
    }
}

/// Discretized JSA, normalized so that ΣΣ|A|² w_s w_i = 1.
#[derive(Debug, Clone)]
pub struct Jsa {
    pub signal: Axis,
    pub idler: Axis,
    /// Rows index the signal axis, columns the idler axis.
    pub amplitude: DMatrix<C64>,
    /// L² norm before normalization.
    pub norm: f64,
}

impl Jsa {
    /// Amplitude scaled by the square-root quadrature weights.
    pub fn weighted(&self) -> DMatrix<C64> {
        let (r, c) = self.amplitude.shape();
        DMatrix::from_fn(r, c, |i, j| {
            self.amplitude[(i, j)] * (self.signal.weight[i] * self.idler.weight[j]).sqrt()
        })
    }

    /// Signal and idler axes exchanged.
    pub fn transposed(&self) -> Jsa {
        Jsa {
            signal: self.idler.clone(),
            idler: self.signal.clone(),
            amplitude: self.amplitude.transpose(),
            norm: self.norm,
        }
    }

    pub fn intensity(&self) -> DMatrix<f64> {
        self.amplitude.map(|z| z.norm_sqr())
    }
}

fn check_resolution(axis: &Axis, gamma_axis: f64, label: &str) -> Result<()> {
    let per_width = gamma_axis / axis.center_spacing();
    if per_width < 8.0 {
        return Err(Error::Resolution(format!(
            "{label} grid has {per_width:.2} points per linewidth; at least 8 are required"
        )));
    }
    if axis.span() < 10.0 * gamma_axis {
        return Err(Error::Resolution(format!(
            "{label} grid spans {:.2} linewidths; at least 10 are required",
            axis.span() / gamma_axis
        )));
    }
    Ok(())
}

/// A(Ω_s, Ω_i) = F_p(Ω_s+Ω_i) l_i(Ω_i) l_s(Ω_s). The flat pump uses the
/// closed form for F_p; other pumps are integrated numerically.
pub fn build_jsa(rates: &ModeRates, pump: &PumpSpectrum, grid: GridSpec) -> Result<Jsa> {
    if !(rates.gamma_s > 0.0 && rates.gamma_i > 0.0 && rates.gamma_p > 0.0) {
        return Err(Error::InvalidParams("mode rates must be positive".into()));
    }
    let gmax = rates.max();
    let signal = build_axis(grid, rates.gamma_s, gmax);
    let idler = build_axis(grid, rates.gamma_i, gmax);
    check_resolution(&signal, rates.gamma_s, "signal")?;
    check_resolution(&idler, rates.gamma_i, "idler")?;
    let fp = |w: f64| match pump {
        PumpSpectrum::Flat => flat_pump_function(rates.gamma_p, w),
        _ => pump_function_quadrature(pump, rates.gamma_p, w, 4096),
    };
    let rows: Vec<Vec<C64>> = signal
        .omega
        .par_iter()
        .map(|&ws| {
            let ls = lorentzian(rates.gamma_s, ws);
            idler.omega.iter().map(|&wi| fp(ws + wi) * lorentzian(rates.gamma_i, wi) * ls).collect()
        })
        .collect();
    let (ns, ni) = (signal.omega.len(), idler.omega.len());
    let mut amplitude = DMatrix::from_fn(ns, ni, |i, j| rows[i][j]);
    let mut norm2 = 0.0;
    for i in 0..ns {
        for j in 0..ni {
            norm2 += amplitude[(i, j)].norm_sqr() * signal.weight[i] * idler.weight[j];
        }
    }
    let norm = norm2.sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::Data("joint spectral amplitude has no finite norm".into()));
    }
    amplitude /= C64::new(norm, 0.0);
    Ok(Jsa { signal, idler, amplitude, norm })
}

#[derive(Debug, Clone, Serialize)]
pub struct SchmidtSpectrum {
    /// Descending, Σλ² = 1.
    pub coefficients: Vec<f64>,
    pub purity: f64,
    pub retained: usize,
}

/// Schmidt coefficients from the singular values of the weighted JSA.
/// Keeps the `k` largest (all if `None`); purity uses the full spectrum.
pub fn schmidt_decompose(jsa: &Jsa, k: Option<usize>) -> Result<SchmidtSpectrum> {
    if jsa.amplitude.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Data("non-finite entries in joint spectral amplitude".into()));
    }
    let m = jsa.weighted();
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = s.iter().map(|x| x * x).sum();
    let scale = total.sqrt();
    for x in s.iter_mut() {
        *x /= scale;
    }
    let purity = s.iter().map(|x| x.powi(4)).sum();
    let retained = k.unwrap_or(s.len()).min(s.len());
    s.truncate(retained);
    Ok(SchmidtSpectrum { coefficients: s, purity, retained })
}

pub fn purity(rates: &ModeRates, pump: &PumpSpectrum, grid: GridSpec) -> Result<f64> {
    Ok(schmidt_decompose(&build_jsa(rates, pump, grid)?, Some(0))?.purity)
}

#[derive(Debug, Clone, Serialize)]
pub struct PurityPoint {
    pub ratio: f64,
    pub purity: f64,
    pub lambda_top8: Vec<f64>,
    pub grid_points: usize,
}

/// Purity at one Q_s/Q_i ratio (Q_p = Q_i, flat pump), doubling the grid
/// until successive purities differ by less than `tol`.
pub fn converged_purity(ratio: f64, grid: GridSpec, tol: f64) -> Result<PurityPoint> {
    if !(ratio >= 1.0) {
        return Err(Error::Domain(format!("ratio must be at least 1, got {ratio}")));
    }
    let rates = ModeRates::for_ratio(ratio);
    let mut n = grid.n();
    let mut prev = schmidt_decompose(&build_jsa(&rates, &PumpSpectrum::Flat, grid.with_n(n))?, Some(8))?;
    for _ in 0..4 {
        let next_n = 2 * n - 1;
        let next = schmidt_decompose(&build_jsa(&rates, &PumpSpectrum::Flat, grid.with_n(next_n))?, Some(8))?;
        let diff = (next.purity - prev.purity).abs();
        n = next_n;
        prev = next;
        if diff < tol {
            return Ok(PurityPoint { ratio, purity: prev.purity, lambda_top8: prev.coefficients, grid_points: n });
        }
    }
    Err(Error::Convergence(format!(
        "purity at ratio {ratio} not converged to {tol:e} after 4 grid refinements"
    )))
}

pub fn purity_sweep(ratios: &[f64], grid: GridSpec, tol: f64) -> Result<Vec<PurityPoint>> {
    ratios.par_iter().map(|&r| converged_purity(r, grid, tol)).collect()
}
