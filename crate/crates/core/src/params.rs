//! Parameter types for the coupled-mode and transfer-matrix descriptions,
//! and the mappings between them.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::bisect;
use crate::units::{SILICON_N2, SPEED_OF_LIGHT, WAVEGUIDE_CROSS_SECTION};

/// Rates of the lumped three-mode model plus the ring-2 mode. All in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmmParams {
    pub gamma: f64,
    #[serde(rename = "gamma_L1")]
    pub gamma_l1: f64,
    #[serde(rename = "gamma_L2")]
    pub gamma_l2: f64,
    #[serde(rename = "gamma_FCA", default)]
    pub gamma_fca: f64,
    pub g: f64,
    #[serde(default)]
    pub delta_ab: f64,
    #[serde(rename = "delta_NL", default)]
    pub delta_nl: f64,
    #[serde(default)]
    pub chi_bar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_i_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_i_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_o: Option<f64>,
}

impl CmmParams {
    pub fn new(gamma: f64, gamma_l1: f64, gamma_l2: f64, g: f64) -> Self {
        Self {
            gamma,
            gamma_l1,
            gamma_l2,
            gamma_fca: 0.0,
            g,
            delta_ab: 0.0,
            delta_nl: 0.0,
            chi_bar: 0.0,
            gamma_s: None,
            gamma_i_plus: None,
            gamma_i_minus: None,
            gamma_o: None,
        }
    }

    /// Every invariant violation, with the offending field named.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut nonneg = |name: &str, v: f64| {
            if !v.is_finite() {
                out.push(format!("{name} must be finite (got {v})"));
            } else if v < 0.0 {
                out.push(format!("{name} must be >= 0 (got {v:e})"));
            }
        };
        nonneg("gamma", self.gamma);
        nonneg("gamma_L1", self.gamma_l1);
        nonneg("gamma_L2", self.gamma_l2);
        nonneg("gamma_FCA", self.gamma_fca);
        nonneg("g", self.g);
        nonneg("chi_bar", self.chi_bar);
        for (name, v) in [
            ("gamma_s", self.gamma_s),
            ("gamma_i_plus", self.gamma_i_plus),
            ("gamma_i_minus", self.gamma_i_minus),
            ("gamma_o", self.gamma_o),
        ] {
            if let Some(v) = v {
                nonneg(name, v);
            }
        }
        for (name, v) in [("delta_ab", self.delta_ab), ("delta_NL", self.delta_nl)] {
            if !v.is_finite() {
                out.push(format!("{name} must be finite (got {v})"));
            }
        }
        for (mode, rate) in [
            ("s", self.gamma_s()),
            ("i+", self.gamma_i_plus()),
            ("i-", self.gamma_i_minus()),
        ] {
            if rate + self.loss_ring1() <= 0.0 {
                out.push(format!("total decay rate of mode {mode} must be > 0"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v.join("; ")))
        }
    }

    pub fn gamma_s(&self) -> f64 {
        self.gamma_s.unwrap_or(self.gamma)
    }

    pub fn gamma_i_plus(&self) -> f64 {
        self.gamma_i_plus.unwrap_or(self.gamma)
    }

    pub fn gamma_i_minus(&self) -> f64 {
        self.gamma_i_minus.unwrap_or(self.gamma)
    }

    pub fn gamma_o(&self) -> f64 {
        self.gamma_o.unwrap_or(self.gamma)
    }

    /// Intrinsic plus free-carrier loss of ring 1.
    pub fn loss_ring1(&self) -> f64 {
        self.gamma_l1 + self.gamma_fca
    }

    /// Γ_j = γ_j + γ_L1 + γ_FCA.
    pub fn total_rate(&self, gamma_j: f64) -> f64 {
        gamma_j + self.loss_ring1()
    }

    pub fn total_s(&self) -> f64 {
        self.total_rate(self.gamma_s())
    }

    pub fn total_i_plus(&self) -> f64 {
        self.total_rate(self.gamma_i_plus())
    }

    pub fn total_i_minus(&self) -> f64 {
        self.total_rate(self.gamma_i_minus())
    }

    /// Ring-2 detuning including the pump-induced shift.
    pub fn detuning(&self) -> f64 {
        self.delta_ab + self.delta_nl
    }

    /// G = g / sqrt(γ_L2 Γ_i−), so that on-resonance extinction is 4G² + 1.
    pub fn coupling_parameter(&self) -> f64 {
        self.g / (self.gamma_l2 * self.total_i_minus()).sqrt()
    }
}

/// Quadratic heater law for the ring-2 detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct HeaterModel {
    /// Detuning offset [rad/s].
    #[serde(rename = "A")]
    pub a: f64,
    /// Quadratic voltage coefficient [rad/s/V²].
    #[serde(rename = "B")]
    pub b: f64,
}

impl HeaterModel {
    pub fn detuning(&self, voltage: f64) -> f64 {
        heater_detuning(self.a, self.b, voltage)
    }

    /// Voltage at which the detuning vanishes, if it exists.
    pub fn alignment_voltage(&self) -> Option<f64> {
        let v2 = -self.a / self.b;
        (v2 >= 0.0 && v2.is_finite()).then(|| v2.sqrt())
    }
}

/// Interferometric (Mach-Zehnder) coupling section of ring 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MziConfig {
    /// Through-coupling of the directional couplers.
    pub nu: f64,
    /// Arm imbalance ψ at the reference frequency [rad].
    pub psi: f64,
    /// Phase of the ring arm [rad].
    #[serde(rename = "psi_R", default)]
    pub psi_r: f64,
    /// Path-length difference between the arms [m]; makes ψ dispersive.
    #[serde(rename = "delta_L", default)]
    pub delta_l: f64,
    /// Through-coupling of the second coupler when the pair is not identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_b: Option<f64>,
}

/// Physical description of the two-ring device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdmGeometry {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub nu1: f64,
    pub nu2: f64,
    #[serde(default)]
    pub theta1: f64,
    #[serde(default)]
    pub theta2: f64,
    pub n_eff_re: f64,
    #[serde(default)]
    pub n_eff_im: f64,
    pub n_g: f64,
    pub omega_ref: f64,
    #[serde(default)]
    pub heater: HeaterModel,
    #[serde(rename = "dnV", default)]
    pub dn_v: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mzi: Option<MziConfig>,
}

impl FdmGeometry {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [("nu1", self.nu1), ("nu2", self.nu2)] {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("{name} must lie in [0, 1] (got {v})"));
            }
        }
        for (name, v) in [("L1", self.l1), ("L2", self.l2), ("n_g", self.n_g), ("omega_ref", self.omega_ref)] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be > 0 (got {v:e})"));
            }
        }
        if !(self.n_eff_im >= 0.0) {
            out.push(format!("n_eff_im must be >= 0 (got {:e})", self.n_eff_im));
        }
        if let Some(m) = &self.mzi {
            if !(0.0..=1.0).contains(&m.nu) {
                out.push(format!("mzi.nu must lie in [0, 1] (got {})", m.nu));
            }
            if let Some(nb) = m.nu_b {
                if !(0.0..=1.0).contains(&nb) {
                    out.push(format!("mzi.nu_b must lie in [0, 1] (got {nb})"));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v.join("; ")))
        }
    }

    /// Round-trip time of ring 1 [s].
    pub fn tau1(&self) -> f64 {
        self.n_g * self.l1 / SPEED_OF_LIGHT
    }

    /// Round-trip time of ring 2 [s].
    pub fn tau2(&self) -> f64 {
        self.n_g * self.l2 / SPEED_OF_LIGHT
    }

    /// Free spectral range of ring 1 [rad/s].
    pub fn fsr(&self) -> f64 {
        2.0 * PI / self.tau1()
    }

    /// Intrinsic loss rate implied by the imaginary index.
    pub fn loss_rate(&self) -> f64 {
        2.0 * self.omega_ref * self.n_eff_im / self.n_g
    }

    /// Sets the imaginary index from an intrinsic loss rate.
    pub fn set_loss_rate(&mut self, gamma_l: f64) {
        self.n_eff_im = gamma_l * self.n_g / (2.0 * self.omega_ref);
    }

    /// Real index of ring 1 at a heater voltage.
    pub fn index_ring1(&self, voltage: f64) -> f64 {
        thermal_index(self.n_eff_re, self.dn_v, voltage)
    }
}

/// Pump and mode-volume inputs for the nonlinear-coupling estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig {
    /// Pump powers in the bus waveguide just before the ring [W].
    #[serde(rename = "P_p1")]
    pub p_p1: f64,
    #[serde(rename = "P_p2")]
    pub p_p2: f64,
    #[serde(rename = "P_s", default)]
    pub p_s: f64,
    /// Per-coupler power transmission.
    #[serde(rename = "T_cpl")]
    pub t_cpl: f64,
    #[serde(default = "default_n2")]
    pub n2: f64,
    /// Mode volume override [m³]; defaults to ring length × cross-section.
    #[serde(rename = "V_ring", default, skip_serializing_if = "Option::is_none")]
    pub v_ring: Option<f64>,
    /// Circumference of ring 1 [m], used for the default mode volume.
    pub ring_length: f64,
    pub n_eff_re: f64,
}

fn default_n2() -> f64 {
    SILICON_N2
}

impl PumpConfig {
    pub fn mode_volume(&self) -> f64 {
        self.v_ring.unwrap_or(self.ring_length * WAVEGUIDE_CROSS_SECTION)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [("P_p1", self.p_p1), ("P_p2", self.p_p2), ("P_s", self.p_s)] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("{name} must be >= 0 (got {v:e})"));
            }
        }
        if !(self.t_cpl > 0.0 && self.t_cpl <= 1.0) {
            out.push(format!("T_cpl must lie in (0, 1] (got {})", self.t_cpl));
        }
        out
    }
}

/// γ = −(c / (n_g L)) ln ν².
pub fn gamma_from_nu(nu: f64, length: f64, n_g: f64) -> Result<f64> {
    if nu == 0.0 {
        return Err(Error::InfiniteRate);
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Domain(format!("through-coupling {nu} outside (0, 1]")));
    }
    check_length(length, n_g)?;
    Ok(-(SPEED_OF_LIGHT / (n_g * length)) * (nu * nu).ln())
}

/// ν = exp(−γ n_g L / (2c)).
pub fn nu_from_gamma(gamma: f64, length: f64, n_g: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain(format!("rate {gamma:e} must be >= 0")));
    }
    check_length(length, n_g)?;
    Ok((-gamma * n_g * length / (2.0 * SPEED_OF_LIGHT)).exp())
}

fn check_length(length: f64, n_g: f64) -> Result<()> {
    if !(length > 0.0) {
        return Err(Error::Domain(format!("length {length:e} must be > 0")));
    }
    if !(n_g > 0.0) {
        return Err(Error::Domain(format!("group index {n_g} must be > 0")));
    }
    Ok(())
}

/// Resonance-condition residual for a splitting `dw` with both rings aligned:
/// τ₁Δω + arg-shift of the ring-2 pass − π. Monotone from −π at Δω = 0.
pub fn splitting_phase(geom: &FdmGeometry, dw: f64) -> f64 {
    let nu = geom.nu2;
    let phi2 = geom.tau2() * dw;
    let shift = ((1.0 - nu * nu) * phi2.sin()).atan2((1.0 + nu * nu) * phi2.cos() - 2.0 * nu);
    geom.tau1() * dw + shift - PI
}

/// Half-splitting Δω of the hybridized resonances, from the round-trip
/// phase of ring 1 perturbed by ring 2.
pub fn splitting_from_geometry(geom: &FdmGeometry) -> Result<f64> {
    if !(geom.nu2 > 0.0 && geom.nu2 < 1.0) {
        return Err(Error::NoSplitting(format!(
            "ring-ring through-coupling {} must lie in (0, 1)",
            geom.nu2
        )));
    }
    let hi = 0.5 * geom.fsr();
    let tol = 1e-12 * geom.fsr();
    if splitting_phase(geom, hi) < 0.0 {
        return Err(Error::NoSplitting(format!(
            "phase condition has no root below half an FSR (nu2 = {})",
            geom.nu2
        )));
    }
    bisect(|dw| splitting_phase(geom, dw), 0.0, hi, tol)
        .map_err(|e| Error::NoSplitting(e.to_string()))
}

/// g = sqrt(Δω² + (γ_i/4)²) with Δω from [`splitting_from_geometry`].
pub fn g_from_geometry(geom: &FdmGeometry, gamma_i: f64) -> Result<f64> {
    let dw = splitting_from_geometry(geom)?;
    Ok((dw * dw + (gamma_i / 4.0).powi(2)).sqrt())
}

/// Ring-ring through-coupling that produces the coupling rate `g`.
pub fn nu2_for_coupling(geom: &FdmGeometry, g: f64, gamma_i: f64) -> Result<f64> {
    let target = g;
    let eval = |nu2: f64| {
        let mut trial = geom.clone();
        trial.nu2 = nu2;
        g_from_geometry(&trial, gamma_i).map(|v| v - target).unwrap_or(f64::NAN)
    };
    let lo = 1e-9;
    let hi = 1.0 - 1e-12;
    if eval(lo) < 0.0 {
        return Err(Error::Domain(format!("coupling {g:e} exceeds the strongest achievable")));
    }
    if eval(hi) > 0.0 {
        return Err(Error::NoSplitting(format!("coupling {g:e} below the weakest achievable")));
    }
    bisect(eval, lo, hi, 1e-15)
}

/// |χ̄| = 8ωc n₂/(n'² V) · γ_s/Γ_s² · sqrt(P_p1 P_p2).
pub fn chi_bar_estimate(pump: &PumpConfig, cmm: &CmmParams, omega_ref: f64) -> Result<f64> {
    let v = pump.mode_volume();
    if !(v > 0.0) {
        return Err(Error::Domain(format!("mode volume {v:e} must be > 0")));
    }
    if !(pump.n_eff_re > 0.0) {
        return Err(Error::Domain(format!("effective index {} must be > 0", pump.n_eff_re)));
    }
    let gs = cmm.gamma_s();
    let total = cmm.total_s();
    let prefactor = 8.0 * omega_ref * SPEED_OF_LIGHT * pump.n2 / (pump.n_eff_re.powi(2) * v);
    Ok(prefactor * gs / (total * total) * (pump.p_p1 * pump.p_p2).sqrt())
}

/// δ_ab = A + B V².
pub fn heater_detuning(a: f64, b: f64, voltage: f64) -> f64 {
    a + b * voltage * voltage
}

/// n'(V) = n₀' + ∂n_V V².
pub fn thermal_index(n0: f64, dn_v: f64, voltage: f64) -> f64 {
    n0 + dn_v * voltage * voltage
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    const L1: f64 = 324e-6;
    const NG: f64 = 4.73;

    #[test]
    fn lossless_limit() {
        assert_eq!(gamma_from_nu(1.0, L1, NG).unwrap(), 0.0);
        assert!(matches!(gamma_from_nu(0.0, L1, NG), Err(Error::InfiniteRate)));
        assert!(matches!(gamma_from_nu(1.01, L1, NG), Err(Error::Domain(_))));
        assert!(matches!(gamma_from_nu(0.5, 0.0, NG), Err(Error::Domain(_))));
    }

    #[test]
    fn round_trip_at_099() {
        let g = gamma_from_nu(0.99, L1, NG).unwrap();
        assert!((nu_from_gamma(g, L1, NG).unwrap() - 0.99).abs() < 1e-12);
    }

    #[test]
    fn through_coupling_for_measured_rate() {
        // exp(-27.4e9 * 4.73 * 324e-6 / (2 * 299792458)), evaluated separately
        // with 30-digit arithmetic: 0.932362557579...
        let nu = nu_from_gamma(27.4e9, L1, NG).unwrap();
        assert!((nu - 0.932_362_557_579_763_6).abs() < 1e-14, "{nu}");
        let back = gamma_from_nu(nu, L1, NG).unwrap();
        assert!((back / 27.4e9 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decoupled_rings_give_quarter_linewidth() {
        let mut geom = presets::split_mode_geometry();
        let gi = 0.011 * geom.fsr();
        geom.nu2 = 1.0 - 1e-9;
        let g = g_from_geometry(&geom, gi).unwrap();
        assert!((g - gi / 4.0).abs() / (gi / 4.0) < 1e-3, "{g} vs {}", gi / 4.0);
        geom.nu2 = 1.0;
        assert!(matches!(g_from_geometry(&geom, gi), Err(Error::NoSplitting(_))));
    }

    #[test]
    fn split_mode_design_splits_by_a_tenth_fsr() {
        let geom = presets::split_mode_geometry();
        let dw = splitting_from_geometry(&geom).unwrap() / geom.fsr();
        assert!((dw - 0.1).abs() < 0.01, "{dw}");
    }

    #[test]
    fn bisection_root_matches_dense_scan() {
        let geom = presets::split_mode_geometry();
        let root = splitting_from_geometry(&geom).unwrap();
        // brute-force scan for the sign change, then refine linearly
        let n = 200_000;
        let hi = 0.5 * geom.fsr();
        let mut prev = (0.0, splitting_phase(&geom, 0.0));
        let mut scan = f64::NAN;
        for k in 1..=n {
            let x = hi * k as f64 / n as f64;
            let y = splitting_phase(&geom, x);
            if prev.1 < 0.0 && y >= 0.0 {
                let mut a = prev.0;
                let mut b = x;
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    if splitting_phase(&geom, m) < 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                scan = 0.5 * (a + b);
                break;
            }
            prev = (x, y);
        }
        assert!((root - scan).abs() < 1e-10 * geom.fsr());
    }

    #[test]
    fn coupling_inverse_recovers_nu2() {
        let geom = presets::split_mode_geometry();
        let gi = 0.011 * geom.fsr();
        let g = g_from_geometry(&geom, gi).unwrap();
        let nu2 = nu2_for_coupling(&geom, g, gi).unwrap();
        assert!((nu2 - geom.nu2).abs() < 1e-9);
    }

    #[test]
    fn heater_examples() {
        let h = presets::heater();
        assert_eq!(heater_detuning(h.a, h.b, 0.0), h.a);
        let v = 4.1;
        assert!((h.detuning(v) - (-839e9 + 49.9e9 * 16.81)).abs() < 1e-15 * 839e9);
        let vstar = h.alignment_voltage().unwrap();
        assert!((vstar - 4.10).abs() < 0.01);
        assert!(h.detuning(vstar).abs() < 1e-15 * h.a.abs() * 4.0);
    }

    #[test]
    fn thermal_index_examples() {
        assert_eq!(thermal_index(2.618, 1.96e-4, 0.0), 2.618);
        assert!((thermal_index(2.618, 1.96e-4, 10.0) - (2.618 + 0.0196)).abs() < 1e-15);
        let n = |v: f64| thermal_index(2.618, 1.96e-4, v);
        let v = 3.3;
        assert!(((n(2f64.sqrt() * v) - n(0.0)) - 2.0 * (n(v) - n(0.0))).abs() < 1e-15);
    }

    #[test]
    fn chi_estimate_scaling() {
        let cmm = presets::measured_device();
        let pump = presets::measured_pumps();
        let w = presets::reference_omega();
        let base = chi_bar_estimate(&pump, &cmm, w).unwrap();
        let mut off = pump.clone();
        off.p_p1 = 0.0;
        assert_eq!(chi_bar_estimate(&off, &cmm, w).unwrap(), 0.0);
        let mut double = pump.clone();
        double.p_p1 *= 2.0;
        double.p_p2 *= 2.0;
        let d = chi_bar_estimate(&double, &cmm, w).unwrap();
        assert!((d / base - 2.0).abs() < 1e-12);
        let mut quad = pump.clone();
        quad.p_p1 *= 4.0;
        assert!((chi_bar_estimate(&quad, &cmm, w).unwrap() / base - 2.0).abs() < 1e-12);
        let mut zero = pump;
        zero.v_ring = Some(0.0);
        assert!(matches!(chi_bar_estimate(&zero, &cmm, w), Err(Error::Domain(_))));
    }

    #[test]
    fn serde_uses_symbolic_names() {
        let p = presets::measured_device();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"gamma_L1\"") && s.contains("\"gamma_FCA\"") && s.contains("\"delta_NL\""));
        let back: CmmParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn violations_name_fields() {
        let mut p = presets::measured_device();
        p.gamma_l1 = -1.0;
        p.g = f64::NAN;
        let v = p.violations();
        assert!(v.iter().any(|m| m.contains("gamma_L1")));
        assert!(v.iter().any(|m| m.contains("g ")));
    }

    proptest! {
        #[test]
        fn nu_gamma_round_trip(nu in 0.5f64..1.0, len in 10e-6f64..1e-3, ng in 1.5f64..5.0) {
            let g = gamma_from_nu(nu, len, ng).unwrap();
            let back = nu_from_gamma(g, len, ng).unwrap();
            prop_assert!((back - nu).abs() / nu < 1e-12);
        }

        #[test]
        fn heater_and_index_exactly_quadratic(a in -1e12f64..1e12, b in -1e11f64..1e11, v in 0.0f64..10.0) {
            // second difference in V² vanishes
            let u0 = v * v;
            let h = 0.37;
            let at = |u: f64| heater_detuning(a, b, u.sqrt());
            let d2 = at(u0 + 2.0 * h) - 2.0 * at(u0 + h) + at(u0);
            prop_assert!(d2.abs() <= 1e-15 * (a.abs() + b.abs() * (u0 + 2.0)) * 8.0);
            let n = |u: f64| thermal_index(2.6, 2e-4, u.sqrt());
            let d2n = n(u0 + 2.0 * h) - 2.0 * n(u0 + h) + n(u0);
            prop_assert!(d2n.abs() < 4.0 * f64::EPSILON * 3.0);
        }

        #[test]
        fn chi_estimate_linear_in_rate_ratio(scale in 0.1f64..1.35) {
            let cmm = presets::measured_device();
            let pump = presets::measured_pumps();
            let w = presets::reference_omega();
            let base = chi_bar_estimate(&pump, &cmm, w).unwrap();
            let ratio = cmm.gamma / cmm.total_s().powi(2);
            // scale γ_s while holding Γ_s fixed through the loss
            let mut c2 = cmm.clone();
            c2.gamma_s = Some(cmm.gamma * scale);
            c2.gamma_l1 = cmm.total_s() - cmm.gamma * scale - cmm.gamma_fca;
            prop_assume!(c2.gamma_l1 >= 0.0);
            let r2 = c2.gamma_s() / c2.total_s().powi(2);
            let v = chi_bar_estimate(&pump, &c2, w).unwrap();
            prop_assert!((v / base - r2 / ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn coupling_monotone_in_nu2() {
        let mut geom = presets::split_mode_geometry();
        let gi = 0.011 * geom.fsr();
        let mut last = f64::INFINITY;
        for k in 1..40 {
            geom.nu2 = k as f64 / 40.0;
            let g = g_from_geometry(&geom, gi).unwrap();
            assert!(g < last, "nu2 = {}: {g} !< {last}", geom.nu2);
            last = g;
        }
    }
}
