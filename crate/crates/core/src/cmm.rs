//! Continuous-wave steady state of the coupled-mode model.
//!
//! Ω is the common detuning of every mode from its own resonance. Amplitude
//! transmissions exclude grating-coupler loss; intensity outputs that carry a
//! `t_cpl` argument include it twice (in and out).

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::numerics::search::golden_max;
use crate::params::CmmParams;


/// Which form of the up-conversion efficiency to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EfficiencyModel {
    /// Includes back-conversion of the signal.
    #[default]
    Full,
    /// Signal treated as undepleted; valid for small conversion.
    Undepleted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conversion {
    pub eta_i_plus: f64,
    pub eta_i_minus: f64,
    /// Output-amplitude ratio S_out,i+ / S_out,i−. Infinite (re = +inf) when
    /// the lossless ring-2 mode is driven exactly on resonance.
    #[serde(serialize_with = "ser_complex")]
    pub zeta: C64,
}

impl Conversion {
    pub fn zeta_db(&self) -> f64 {
        extinction_db(self.zeta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CwResponse {
    pub omega_offset: f64,
    /// Linear transmissions (pumps off) with coupler loss applied.
    #[serde(serialize_with = "ser_complex")]
    pub t_s: C64,
    #[serde(serialize_with = "ser_complex")]
    pub t_i_plus: C64,
    #[serde(serialize_with = "ser_complex")]
    pub t_i_minus: C64,
    pub eta_i_plus: f64,
    pub eta_i_minus: f64,
    #[serde(serialize_with = "ser_complex")]
    pub zeta: C64,
}

impl CwResponse {
    pub fn zeta_db(&self) -> f64 {
        extinction_db(self.zeta)
    }
}

fn ser_complex<S: serde::Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

/// |ζ|² in dB.
pub fn extinction_db(zeta: C64) -> f64 {
    if zeta.re.is_infinite() {
        f64::INFINITY
    } else {
        10.0 * zeta.norm_sqr().log10()
    }
}

pub fn is_infinite_extinction(zeta: C64) -> bool {
    zeta.re.is_infinite()
}

/// 1 / D₋, the inverse self-energy-dressed response of mode i−; zero when the
/// ring-2 resonance is lossless and hit exactly.
fn inverse_dressed_minus(p: &CmmParams, omega: f64) -> C64 {
    let ring2 = C64::new(0.5 * p.gamma_l2, p.detuning() - omega);
    let bare = C64::new(0.5 * p.total_i_minus(), -omega);
    if ring2.norm_sqr() == 0.0 {
        return if p.g == 0.0 { 1.0 / bare } else { C64::new(0.0, 0.0) };
    }
    1.0 / (bare + p.g * p.g / ring2)
}

fn bare_plus(p: &CmmParams, omega: f64) -> C64 {
    C64::new(0.5 * p.total_i_plus(), -omega)
}

/// Extinction ratio ζ(Ω).
pub fn extinction(p: &CmmParams, omega: f64) -> C64 {
    let y = inverse_dressed_minus(p, omega);
    if y.norm_sqr() == 0.0 {
        return C64::new(f64::INFINITY, 0.0);
    }
    let amp = (p.gamma_i_plus() / p.gamma_i_minus()).sqrt();
    amp / (bare_plus(p, omega) * y)
}

/// Up- and down-conversion efficiencies and ζ at detuning Ω.
pub fn conversion_efficiency(p: &CmmParams, omega: f64, model: EfficiencyModel) -> Conversion {
    let zeta = extinction(p, omega);
    let chi = p.chi_bar;
    let gp = p.gamma_i_plus();
    let gs = p.gamma_s();
    let lin = C64::new(p.total_i_plus(), -2.0 * omega) * C64::new(p.total_s(), -2.0 * omega);
    let den = match model {
        EfficiencyModel::Full => {
            let back = 1.0 + bare_plus(p, omega) * inverse_dressed_minus(p, omega);
            lin + 4.0 * chi * chi * back
        }
        EfficiencyModel::Undepleted => lin,
    };
    let eta_p = (4.0 * (gp * gs).sqrt() * chi / den).norm_sqr();
    let eta_m = if is_infinite_extinction(zeta) { 0.0 } else { eta_p / zeta.norm_sqr() };
    Conversion { eta_i_plus: eta_p, eta_i_minus: eta_m, zeta }
}

/// Single-ring linear transmission amplitude 1 − γ_j/(Γ_j/2 − iΩ).
fn single_mode_transmission(gamma_j: f64, total: f64, omega: f64) -> C64 {
    1.0 - gamma_j / C64::new(0.5 * total, -omega)
}

pub fn linear_transmission_s(p: &CmmParams, omega: f64) -> C64 {
    single_mode_transmission(p.gamma_s(), p.total_s(), omega)
}

pub fn linear_transmission_i_plus(p: &CmmParams, omega: f64) -> C64 {
    single_mode_transmission(p.gamma_i_plus(), p.total_i_plus(), omega)
}

/// Transmission near the split mode, including the ring-2 self-energy.
pub fn linear_transmission_i_minus(p: &CmmParams, omega: f64) -> C64 {
    1.0 - p.gamma_i_minus() * inverse_dressed_minus(p, omega)
}

/// Signal transmission with the pumps on (includes conversion out of s).
pub fn pumped_transmission_s(p: &CmmParams, omega: f64) -> C64 {
    let chi2 = p.chi_bar * p.chi_bar;
    let d = C64::new(0.5 * p.total_s(), -omega)
        + chi2 / bare_plus(p, omega)
        + chi2 * inverse_dressed_minus(p, omega);
    1.0 - p.gamma_s() / d
}

/// Full CW response on a detuning grid. Power transmissions scale by `t_cpl²`.
pub fn transmission_spectra(p: &CmmParams, t_cpl: f64, omegas: &[f64]) -> Vec<CwResponse> {
    let amp = t_cpl;
    omegas
        .par_iter()
        .map(|&w| {
            let c = conversion_efficiency(p, w, EfficiencyModel::Full);
            CwResponse {
                omega_offset: w,
                t_s: amp * linear_transmission_s(p, w),
                t_i_plus: amp * linear_transmission_i_plus(p, w),
                t_i_minus: amp * linear_transmission_i_minus(p, w),
                eta_i_plus: c.eta_i_plus,
                eta_i_minus: c.eta_i_minus,
                zeta: c.zeta,
            }
        })
        .collect()
}

/// Peak up-conversion efficiency and the nonlinearity that reaches it, for
/// Ω = Δ_ab = 0 and equal idler coupling rates.
pub fn max_conversion(p: &CmmParams) -> (f64, f64) {
    let total_i = p.total_i_plus();
    let total_s = p.total_s();
    let factor = if p.g == 0.0 {
        0.5
    } else {
        let big_g = p.coupling_parameter();
        if big_g.is_infinite() {
            1.0
        } else {
            let g2 = 4.0 * big_g * big_g;
            (1.0 + g2) / (2.0 + g2)
        }
    };
    let eta = factor * p.gamma_i_plus() * p.gamma_s() / (total_i * total_s);
    let chi = 0.5 * factor.sqrt() * (total_i * total_s).sqrt();
    (eta, chi)
}

/// Large-G, over-coupled approximation (1 − 1/4G²)(1 − (Q_s + Q_i)/Q_L),
/// written with rates: Q_j/Q_L = γ_L/γ_j.
pub fn max_conversion_scaling(p: &CmmParams) -> f64 {
    let big_g = p.coupling_parameter();
    let l = p.loss_ring1();
    (1.0 - 1.0 / (4.0 * big_g * big_g)) * (1.0 - l / p.gamma_s() - l / p.gamma_i_plus())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExtinctionPeak {
    pub zeta_db: f64,
    pub omega: f64,
    pub detuning: f64,
}

/// Largest |ζ|² over a rectangular (Ω, Δ_ab) window, found on a grid and
/// refined by alternating golden-section line searches.
pub fn peak_extinction(
    p: &CmmParams,
    omega_span: (f64, f64),
    detuning_span: (f64, f64),
    n: usize,
) -> ExtinctionPeak {
    let at = |w: f64, d: f64| {
        let mut q = p.clone();
        q.delta_ab = d - p.delta_nl;
        extinction(&q, w).norm_sqr()
    };
    let n = n.max(3);
    let step_w = (omega_span.1 - omega_span.0) / (n - 1) as f64;
    let step_d = (detuning_span.1 - detuning_span.0) / (n - 1) as f64;
    let (mut bw, mut bd, mut best) = (omega_span.0, detuning_span.0, f64::NEG_INFINITY);
    for i in 0..n {
        let w = omega_span.0 + step_w * i as f64;
        for j in 0..n {
            let d = detuning_span.0 + step_d * j as f64;
            let v = at(w, d);
            if v > best {
                best = v;
                bw = w;
                bd = d;
            }
        }
    }
    if best.is_finite() {
        for _ in 0..20 {
            let lo = (bw - step_w).max(omega_span.0);
            let hi = (bw + step_w).min(omega_span.1);
            let (w, _) = golden_max(|w| at(w, bd), lo, hi, 1e-9 * step_w.abs().max(1.0));
            let lo = (bd - step_d).max(detuning_span.0);
            let hi = (bd + step_d).min(detuning_span.1);
            let (d, v) = golden_max(|d| at(w, d), lo, hi, 1e-9 * step_d.abs().max(1.0));
            let improved = v > best * (1.0 + 1e-14);
            if v >= best {
                best = v;
                bw = w;
                bd = d;
            }
            if !improved {
                break;
            }
        }
    }
    ExtinctionPeak { zeta_db: 10.0 * best.log10(), omega: bw, detuning: bd }
}
