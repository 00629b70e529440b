//! Physical constants and unit conversions.
//!
//! Angular frequencies are rad/s everywhere inside the crate; wavelengths
//! and logarithmic powers only appear at the I/O boundary.

use std::f64::consts::PI;

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default nonlinear index of silicon [m²/W].
pub const SILICON_N2: f64 = 4.5e-18;

/// Default waveguide cross-section (500 nm × 250 nm) [m²].
pub const WAVEGUIDE_CROSS_SECTION: f64 = 500e-9 * 250e-9;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// ω = 2πc/λ with λ in meters.
pub fn wavelength_to_omega(lambda_m: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / lambda_m
}

pub fn omega_to_wavelength(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega
}

pub fn nm_to_omega(lambda_nm: f64) -> f64 {
    wavelength_to_omega(lambda_nm * 1e-9)
}

pub fn omega_to_nm(omega: f64) -> f64 {
    omega_to_wavelength(omega) * 1e9
}

/// GHz (ordinary frequency) to rad/s.
pub fn ghz_to_rad_s(ghz: f64) -> f64 {
    2.0 * PI * 1e9 * ghz
}

/// Free spectral range 2πc/(n_g L) [rad/s].
pub fn free_spectral_range(n_g: f64, length: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (n_g * length)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_roundtrip() {
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((watts_to_dbm(dbm_to_watts(3.9)) - 3.9).abs() < 1e-12);
    }

    #[test]
    fn wavelength_and_frequency_are_inverse() {
        let w = nm_to_omega(1550.0);
        assert!((omega_to_nm(w) - 1550.0).abs() < 1e-9);
        assert!((w - 1.215_259_9e15).abs() / w < 1e-6);
    }
}
