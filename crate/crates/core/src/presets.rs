//! Reference parameter sets: the measured two-ring device, the split-mode
//! design used for model comparison, and the interferometric multiplexing
//! layout.

use std::f64::consts::PI;

use crate::fdm;
use crate::params::{
    g_from_geometry, nu2_for_coupling, nu_from_gamma, CmmParams, FdmGeometry, HeaterModel, MziConfig,
    PumpConfig,
};
use crate::units::{db_to_linear, dbm_to_watts, nm_to_omega};

/// Ring-1 circumference of the measured device [m].
pub const RING1_LENGTH: f64 = 324e-6;
/// Ring-2 circumference of the measured device [m].
pub const RING2_LENGTH: f64 = 81e-6;
pub const GROUP_INDEX: f64 = 4.73;
pub const EFFECTIVE_INDEX: f64 = 2.618;
/// Heater coefficient of the ring-1 effective index [1/V²].
pub const INDEX_PER_VOLT2: f64 = 1.96e-4;
/// Per-coupler transmission of the grating couplers [dB].
pub const COUPLER_DB: f64 = -9.4;
/// Pump-induced resonance shifts of the five pumped datasets [rad/s].
pub const DATASET_SHIFTS: [f64; 5] = [-21.6097e9, 0.8130e9, 4.8078e9, 4.1497e9, 11.8393e9];
/// Extinction reported for the measured device [dB].
pub const REPORTED_EXTINCTION_DB: f64 = 41.7;
/// Nonlinear coupling estimated from pump power in the original analysis [rad/s].
pub const REPORTED_CHI_ESTIMATE: f64 = 1.68e9;

/// Working wavelength, 1550 nm, as angular frequency.
pub fn reference_omega() -> f64 {
    nm_to_omega(1550.0)
}

/// Fitted rates of the measured device with both pumps on.
pub fn measured_device() -> CmmParams {
    let mut p = CmmParams::new(27.4e9, 10.9e9, 8.02e9, 78.5e9);
    p.gamma_fca = 10.0e9;
    p.chi_bar = 1.09e9;
    p
}

/// The measured device with the pumps off.
pub fn measured_device_linear() -> CmmParams {
    CmmParams::new(27.4e9, 10.9e9, 8.02e9, 78.5e9)
}

pub fn heater() -> HeaterModel {
    HeaterModel { a: -839e9, b: 49.9e9 }
}

pub fn coupler_transmission() -> f64 {
    db_to_linear(COUPLER_DB)
}

/// Pump powers in the bus waveguide and the ring-1 mode volume inputs.
pub fn measured_pumps() -> PumpConfig {
    PumpConfig {
        p_p1: dbm_to_watts(3.9),
        p_p2: dbm_to_watts(4.2),
        p_s: dbm_to_watts(-11.6),
        t_cpl: coupler_transmission(),
        n2: crate::units::SILICON_N2,
        v_ring: None,
        ring_length: RING1_LENGTH,
        n_eff_re: EFFECTIVE_INDEX,
    }
}

/// Transfer-matrix geometry matching the measured device: ring 1 couples at
/// 28e9 rad/s, the rings at 80e9 rad/s and the waveguide loses 12e9 rad/s.
/// Both rings are aligned at the heater voltage where the detuning vanishes.
pub fn measured_geometry() -> FdmGeometry {
    let omega_ref = reference_omega();
    let mut geom = FdmGeometry {
        l1: RING1_LENGTH,
        l2: RING2_LENGTH,
        nu1: nu_from_gamma(28e9, RING1_LENGTH, GROUP_INDEX).expect("valid rate"),
        nu2: 0.5,
        theta1: 0.0,
        theta2: 0.0,
        n_eff_re: EFFECTIVE_INDEX,
        n_eff_im: 0.0,
        n_g: GROUP_INDEX,
        omega_ref,
        heater: heater(),
        dn_v: INDEX_PER_VOLT2,
        mzi: None,
    };
    geom.set_loss_rate(12e9);
    geom.nu2 = nu2_for_coupling(&geom, 80e9, 28e9).expect("reachable coupling");
    let v = geom.heater.alignment_voltage().unwrap_or(0.0);
    fdm::align(&geom, v, 0.0)
}

/// Split-mode design used to compare the two models: ring-1 coupling
/// 0.011 Ω_FSR, ring-2 coupling 0.067 Ω_FSR on a ring a quarter as long,
/// loss 5.3e-4 Ω_FSR, both rings resonant at the reference frequency.
pub fn split_mode_geometry() -> FdmGeometry {
    let omega_ref = reference_omega();
    let mut geom = FdmGeometry {
        l1: RING1_LENGTH,
        l2: RING1_LENGTH / 4.0,
        // ν = exp(−γ τ / 2) with γ in units of Ω_FSR = 2π/τ₁
        nu1: (-0.011 * PI).exp(),
        nu2: (-0.067 * PI / 4.0).exp(),
        theta1: 0.0,
        theta2: 0.0,
        n_eff_re: EFFECTIVE_INDEX,
        n_eff_im: 0.0,
        n_g: GROUP_INDEX,
        omega_ref,
        heater: HeaterModel::default(),
        dn_v: 0.0,
        mzi: None,
    };
    let fsr = geom.fsr();
    geom.set_loss_rate(5.3e-4 * fsr);
    fdm::align(&geom, 0.0, 0.0)
}

/// Coupled-mode counterpart of [`split_mode_geometry`].
pub fn split_mode_cmm() -> CmmParams {
    let geom = split_mode_geometry();
    let fsr = geom.fsr();
    let gamma = 0.011 * fsr;
    let loss = 5.3e-4 * fsr;
    let g = g_from_geometry(&geom, gamma).expect("split-mode geometry has a splitting");
    CmmParams::new(gamma, loss, loss, g)
}

/// Interferometrically coupled layout: L1 = 4 L2 = 6 ΔL, with the MZI
/// balanced so that modes j = −2 + 6n decouple from the bus. The reference
/// frequency is the pair-generation pump (j = 0); ring 2 resonates at j = −1.
pub fn multiplexing_geometry() -> FdmGeometry {
    let omega_ref = reference_omega();
    let mut geom = FdmGeometry {
        l1: RING1_LENGTH,
        l2: RING1_LENGTH / 4.0,
        nu1: 1.0,
        nu2: 0.8,
        theta1: 0.0,
        theta2: 0.0,
        n_eff_re: EFFECTIVE_INDEX,
        n_eff_im: 0.0,
        n_g: GROUP_INDEX,
        omega_ref,
        heater: HeaterModel::default(),
        dn_v: 0.0,
        mzi: Some(MziConfig {
            nu: 0.95,
            psi: 5.0 * PI / 3.0,
            psi_r: 0.0,
            delta_l: RING1_LENGTH / 6.0,
            nu_b: None,
        }),
    };
    geom.set_loss_rate(1e9);
    let fsr = geom.fsr();
    fdm::align(&geom, 0.0, -fsr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::gamma_from_nu;

    #[test]
    fn split_mode_rates_round_trip() {
        let geom = split_mode_geometry();
        let fsr = geom.fsr();
        let g1 = gamma_from_nu(geom.nu1, geom.l1, geom.n_g).unwrap();
        let g2 = gamma_from_nu(geom.nu2, geom.l2, geom.n_g).unwrap();
        assert!((g1 / fsr - 0.011).abs() < 1e-12);
        assert!((g2 / fsr - 0.067).abs() < 1e-12);
        assert!((geom.loss_rate() / fsr - 5.3e-4).abs() < 1e-15);
        assert!((geom.nu1 - 0.96603).abs() < 1e-5);
        assert!((geom.nu2 - 0.94874).abs() < 1e-5);
    }

    #[test]
    fn split_mode_normalized_coupling() {
        // g/sqrt(γ_L(γ_L + γ₂)) reproduces the quoted G = 16.9
        let geom = split_mode_geometry();
        let cmm = split_mode_cmm();
        let fsr = geom.fsr();
        let gl = 5.3e-4 * fsr;
        let big_g = cmm.g / (gl * (gl + 0.067 * fsr)).sqrt();
        assert!((big_g - 16.9).abs() < 0.1, "{big_g}");
    }

    #[test]
    fn measured_geometry_rates() {
        let geom = measured_geometry();
        let g = g_from_geometry(&geom, 28e9).unwrap();
        assert!((g / 80e9 - 1.0).abs() < 1e-9);
        assert!((geom.loss_rate() / 12e9 - 1.0).abs() < 1e-12);
    }
}
