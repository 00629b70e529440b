//! First-order cascaded conversion: an extra idler i++ fed from i+.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::cmm::extinction_db;
use crate::error::{Error, Result};
use crate::params::CmmParams;

/// Rates for the five-mode system. All idlers share one bus coupling and
/// one total rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CascadeParams {
    pub gamma_s: f64,
    pub gamma_i: f64,
    /// Γ_s = γ_s + ring-1 loss at the signal.
    pub total_s: f64,
    /// Γ_i = γ_i + ring-1 loss at the idlers.
    pub total_i: f64,
    pub gamma_l2: f64,
    pub g: f64,
    pub delta_ab: f64,
}

impl CascadeParams {
    pub fn lossless(gamma_s: f64, gamma_i: f64, g: f64) -> Self {
        Self { gamma_s, gamma_i, total_s: gamma_s, total_i: gamma_i, gamma_l2: 0.0, g, delta_ab: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.total_s > 0.0) {
            bad.push("total signal rate must be positive");
        }
        if !(self.total_i > 0.0) {
            bad.push("total idler rate must be positive");
        }
        if !(self.gamma_s >= 0.0 && self.gamma_s <= self.total_s) {
            bad.push("signal coupling must lie in [0, total]");
        }
        if !(self.gamma_i >= 0.0 && self.gamma_i <= self.total_i) {
            bad.push("idler coupling must lie in [0, total]");
        }
        if !(self.gamma_l2 >= 0.0) || !self.g.is_finite() {
            bad.push("ring-2 loss and g must be finite and non-negative");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(bad.join("; ")))
        }
    }

    /// G = g/√(γ_L2 Γ_i); infinite for a lossless second ring.
    pub fn coupling_parameter(&self) -> f64 {
        if self.gamma_l2 == 0.0 {
            if self.g == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.g / (self.gamma_l2 * self.total_i).sqrt()
        }
    }
}

impl From<&CmmParams> for CascadeParams {
    fn from(p: &CmmParams) -> Self {
        Self {
            gamma_s: p.gamma_s(),
            gamma_i: p.gamma_i_plus(),
            total_s: p.total_s(),
            total_i: p.total_i_plus(),
            gamma_l2: p.gamma_l2,
            g: p.g,
            delta_ab: p.detuning(),
        }
    }
}

/// Extinction ratio on resonance with aligned rings.
pub fn cascade_extinction(p: &CascadeParams, chi: f64) -> f64 {
    let gi2 = p.total_i * p.total_i;
    let big_g = p.coupling_parameter();
    gi2 * (4.0 * big_g * big_g + 1.0) / (gi2 + 4.0 * chi * chi)
}

/// Up-conversion efficiency on resonance including the cascade loss channel.
pub fn cascade_efficiency(p: &CascadeParams, chi: f64) -> f64 {
    let zeta = cascade_extinction(p, chi);
    let inv = if zeta.is_infinite() { 0.0 } else { 1.0 / zeta };
    let den = p.total_i * p.total_s + 4.0 * chi * chi * (1.0 + p.total_s / p.total_i + inv);
    let num = 4.0 * (p.gamma_i * p.gamma_s).sqrt() * chi;
    (num / den).powi(2)
}

/// (η^max, χ^max) in the high-extinction limit.
pub fn cascade_max_efficiency(p: &CascadeParams) -> (f64, f64) {
    let (gi, gs) = (p.total_i, p.total_s);
    let eta = p.gamma_i * p.gamma_s / (gs * (gi + gs));
    let chi = 0.5 * gi * (gs / (gi + gs)).sqrt();
    (eta, chi)
}

/// Extinction at χ^max.
pub fn cascade_extinction_at_max(p: &CascadeParams) -> f64 {
    let big_g = p.coupling_parameter();
    (4.0 * big_g * big_g + 1.0) * (p.total_i + p.total_s) / (p.total_i + 2.0 * p.total_s)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CascadeReport {
    #[serde(rename = "G")]
    pub big_g: f64,
    pub chi_bar: f64,
    pub zeta_db: f64,
    pub eta_max: f64,
}

pub fn report(p: &CascadeParams) -> CascadeReport {
    let (eta, chi) = cascade_max_efficiency(p);
    CascadeReport {
        big_g: p.coupling_parameter(),
        chi_bar: chi,
        zeta_db: extinction_db(C64::new(cascade_extinction(p, chi), 0.0)),
        eta_max: eta,
    }
}

/// Steady state of the five coupled modes for a signal drive S_in at
/// detuning Ω. Mode order: s, i+, i++, i−, B.
#[derive(Debug, Clone, Copy)]
pub struct FiveModeState {
    pub a: [C64; 5],
    pub s_out: C64,
}

impl FiveModeState {
    /// Output amplitudes √γ_i A_j for i+, i++, i−.
    pub fn idler_outputs(&self, p: &CascadeParams) -> [C64; 3] {
        let k = p.gamma_i.sqrt();
        [k * self.a[1], k * self.a[2], k * self.a[3]]
    }

    /// Total outgoing photon flux, bus plus intrinsic losses.
    pub fn outgoing_flux(&self, p: &CascadeParams) -> f64 {
        let bus: f64 = self.s_out.norm_sqr() + self.idler_outputs(p).iter().map(|z| z.norm_sqr()).sum::<f64>();
        let li = p.total_i - p.gamma_i;
        let ls = p.total_s - p.gamma_s;
        let lossy = ls * self.a[0].norm_sqr()
            + li * (self.a[1].norm_sqr() + self.a[2].norm_sqr() + self.a[3].norm_sqr())
            + p.gamma_l2 * self.a[4].norm_sqr();
        bus + lossy
    }
}

pub fn five_mode_steady_state(p: &CascadeParams, chi: C64, omega: f64, s_in: C64) -> Result<FiveModeState> {
    let i = C64::new(0.0, 1.0);
    let mut m = DMatrix::<C64>::zeros(5, 5);
    let hs = C64::new(-0.5 * p.total_s, 0.0);
    let hi = C64::new(-0.5 * p.total_i, 0.0);
    m[(0, 0)] = hs;
    m[(0, 1)] = -i * chi.conj();
    m[(0, 3)] = -i * chi;
    m[(1, 1)] = hi;
    m[(1, 0)] = -i * chi;
    m[(1, 2)] = -i * chi.conj();
    m[(2, 2)] = hi;
    m[(2, 1)] = -i * chi;
    m[(3, 3)] = hi;
    m[(3, 0)] = -i * chi.conj();
    m[(3, 4)] = -i * p.g;
    m[(4, 4)] = C64::new(-0.5 * p.gamma_l2, -p.delta_ab);
    m[(4, 3)] = -i * p.g;
    for k in 0..5 {
        m[(k, k)] += i * omega;
    }
    let mut b = DVector::<C64>::zeros(5);
    b[0] = p.gamma_s.sqrt() * s_in;
    // (M + iΩ) A = √γ_s S_in e_s
    let x = m.lu().solve(&b).ok_or_else(|| Error::Domain("five-mode system is singular".into()))?;
    let a = [x[0], x[1], x[2], x[3], x[4]];
    let s_out = s_in + p.gamma_s.sqrt() * a[0];
    Ok(FiveModeState { a, s_out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::search::golden_max;
    use crate::presets;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_params(rng: &mut impl Rng) -> CascadeParams {
        let gs = rng.gen_range(1e9..5e10);
        let gi = rng.gen_range(1e9..5e10);
        CascadeParams {
            gamma_s: gs,
            gamma_i: gi,
            total_s: gs + rng.gen_range(0.0..2e10),
            total_i: gi + rng.gen_range(0.0..2e10),
            gamma_l2: rng.gen_range(1e8..3e10),
            g: rng.gen_range(0.0..2e11),
            delta_ab: 0.0,
        }
    }

    #[test]
    fn zero_chi_reduces_to_single_stage() {
        let p = presets::measured_device_linear();
        let c = CascadeParams::from(&p);
        let z = crate::cmm::extinction(&p, 0.0);
        assert!((cascade_extinction(&c, 0.0) / z.re - 1.0).abs() < 1e-12);
        let big_g = c.coupling_parameter();
        assert_eq!(cascade_extinction(&c, 0.0), 4.0 * big_g * big_g + 1.0);
        assert!((cascade_extinction(&c, 1e3) / cascade_extinction(&c, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_couplings_bounded_by_half() {
        let c = CascadeParams::lossless(2e10, 2e10, 5e10);
        assert_eq!(cascade_max_efficiency(&c).0, 0.5);
        let wide = CascadeParams::lossless(1e9, 1e12, 5e10);
        assert!(cascade_max_efficiency(&wide).0 > 0.999);
    }

    #[test]
    fn extinction_at_optimum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let c = random_params(&mut rng);
            let (_, chi) = cascade_max_efficiency(&c);
            let z = cascade_extinction(&c, chi);
            assert!((z / cascade_extinction_at_max(&c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_system_matches_closed_forms() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let c = random_params(&mut rng);
            let chi = rng.gen_range(0.0..3e10);
            let st = five_mode_steady_state(&c, C64::new(chi, 0.0), 0.0, C64::new(1.0, 0.0)).unwrap();
            let [up, _, down] = st.idler_outputs(&c);
            let zeta = (up / down).norm();
            assert!((zeta / cascade_extinction(&c, chi) - 1.0).abs() < 1e-10);
            let eta = up.norm_sqr();
            assert!((eta / cascade_efficiency(&c, chi) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn numeric_maximum_matches() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let gs = rng.gen_range(1e9..5e10);
            let gi = rng.gen_range(1e9..5e10);
            let mut c = CascadeParams::lossless(gs, gi, 1e10);
            c.total_s += rng.gen_range(0.0..1e10);
            c.total_i += rng.gen_range(0.0..1e10);
            let (eta, chi) = cascade_max_efficiency(&c);
            let (x, v) = golden_max(|x| cascade_efficiency(&c, x), 0.0, 10.0 * chi, 1e-9 * chi);
            assert!((v / eta - 1.0).abs() < 1e-10);
            assert!((x / chi - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn report_fields() {
        let c = CascadeParams::lossless(2e10, 2e10, 5e10);
        let r = report(&c);
        assert_eq!(r.eta_max, 0.5);
        assert!(r.zeta_db.is_infinite());
        let json = serde_json::to_value(r).unwrap();
        assert!(json.get("G").is_some());
    }

    proptest! {
        #[test]
        fn lossless_flux_conserved(gs in 1e9f64..5e10, gi in 1e9f64..5e10, g in 0.0f64..2e11,
                                   chi in 0.0f64..3e10, om in -5e10f64..5e10, d in -5e10f64..5e10) {
            let mut c = CascadeParams::lossless(gs, gi, g);
            c.delta_ab = d;
            let st = five_mode_steady_state(&c, C64::new(chi, 0.0), om, C64::new(1.0, 0.0)).unwrap();
            prop_assert!((st.outgoing_flux(&c) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn lossy_flux_balance(seed in 0u64..1000, chi in 0.0f64..3e10, om in -5e10f64..5e10) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = random_params(&mut rng);
            let st = five_mode_steady_state(&c, C64::new(chi, 0.0), om, C64::new(1.0, 0.0)).unwrap();
            prop_assert!((st.outgoing_flux(&c) - 1.0).abs() < 1e-9);
        }
    }
}
