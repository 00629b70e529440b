//! Transfer-matrix model of the two-ring device.
//!
//! Port 1 of every coupler is the ring being coupled, port 2 the waveguide
//! passing it. Propagation uses the linearized dispersion
//! k(ω) = ñ ω_ref / c + n_g (ω − ω_ref) / c.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::data::MeasuredMap;
use crate::error::{Error, Result};
use crate::params::{FdmGeometry, MziConfig};
use crate::units::{nm_to_omega, SPEED_OF_LIGHT};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CouplerKind {
    Directional { theta: f64 },
    Interferometric { psi: f64, psi_r: f64 },
}

/// 2×2 coupler transfer matrix `m[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplerMatrix {
    pub m: [[C64; 2]; 2],
    pub kind: CouplerKind,
}

impl CouplerMatrix {
    /// The matrix with its global phase (θ or ψ_R) removed.
    pub fn normalized(&self) -> [[C64; 2]; 2] {
        let phase = match self.kind {
            CouplerKind::Directional { theta } => theta,
            CouplerKind::Interferometric { psi_r, .. } => psi_r,
        };
        let f = C64::from_polar(1.0, -phase);
        [[self.m[0][0] * f, self.m[0][1] * f], [self.m[1][0] * f, self.m[1][1] * f]]
    }

    /// max |(M†M − 1)_ij| of the normalized matrix.
    pub fn unitarity_defect(&self) -> f64 {
        let a = self.normalized();
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut s = C64::new(0.0, 0.0);
                for row in a.iter() {
                    s += row[i].conj() * row[j];
                }
                if i == j {
                    s -= 1.0;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    /// |C₁₂|², the power coupled between ring and waveguide.
    pub fn cross_coupling(&self) -> f64 {
        self.m[0][1].norm_sqr()
    }
}

pub fn directional_coupler(nu: f64, theta: f64) -> CouplerMatrix {
    let kappa = (1.0 - nu * nu).max(0.0).sqrt();
    let p = C64::from_polar(1.0, theta);
    CouplerMatrix {
        m: [[p * nu, p * I * kappa], [p * I * kappa, p * nu]],
        kind: CouplerKind::Directional { theta },
    }
}

/// Two directional couplers joined by arms of phase ψ_R (ring side) and
/// ψ_R + ψ (waveguide side). With identical couplers this is
/// e^{iψ_R}[[ν² − e^{iψ}(1−ν²), iνκ(1+e^{iψ})], [iνκ(1+e^{iψ}), ν²(1+e^{iψ}) − 1]].
pub fn mzi_coupler(nu_a: f64, nu_b: f64, psi: f64, psi_r: f64) -> CouplerMatrix {
    let a = directional_coupler(nu_a, 0.0).m;
    let b = directional_coupler(nu_b, 0.0).m;
    let arms = [C64::from_polar(1.0, psi_r), C64::from_polar(1.0, psi_r + psi)];
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                m[i][j] += b[i][k] * arms[k] * a[k][j];
            }
        }
    }
    CouplerMatrix { m, kind: CouplerKind::Interferometric { psi, psi_r } }
}

/// Arm imbalance at ω, including the dispersive path-length difference.
pub fn mzi_imbalance(geom: &FdmGeometry, mzi: &MziConfig, omega: f64) -> f64 {
    mzi.psi + geom.n_g * mzi.delta_l * (omega - geom.omega_ref) / SPEED_OF_LIGHT
}

/// Complex phase k(ω)L for a real index `n_re`.
pub fn propagation_phase(geom: &FdmGeometry, omega: f64, n_re: f64, length: f64) -> C64 {
    let c = SPEED_OF_LIGHT;
    let k = C64::new(n_re, geom.n_eff_im) * (geom.omega_ref / c)
        + geom.n_g * (omega - geom.omega_ref) / c;
    k * length
}

fn expi(phi: C64) -> C64 {
    (I * phi).exp()
}

/// Coupler between ring 1 and the bus at ω.
pub fn ring1_coupler(geom: &FdmGeometry, omega: f64) -> CouplerMatrix {
    match &geom.mzi {
        Some(mzi) => mzi_coupler(
            mzi.nu,
            mzi.nu_b.unwrap_or(mzi.nu),
            mzi_imbalance(geom, mzi, omega),
            mzi.psi_r,
        ),
        None => directional_coupler(geom.nu1, geom.theta1),
    }
}

/// Transmission t₁₂ of the ring-1 field passing ring 2.
pub fn ring2_pass_transmission(geom: &FdmGeometry, omega: f64) -> C64 {
    let c = directional_coupler(geom.nu2, geom.theta2).m;
    let e = expi(propagation_phase(geom, omega, geom.n_eff_re, geom.l2));
    c[1][1] + c[0][1] * c[1][0] * e / (1.0 - c[0][0] * e)
}

/// Round-trip factor C₁₁ e^{iφ₁} t₁₂ of ring 1 at a heater voltage.
pub fn round_trip_factor(geom: &FdmGeometry, omega: f64, voltage: f64) -> C64 {
    let c = ring1_coupler(geom, omega).m;
    let e = expi(propagation_phase(geom, omega, geom.index_ring1(voltage), geom.l1));
    c[0][0] * e * ring2_pass_transmission(geom, omega)
}

/// Bus-waveguide amplitude transmission (coupler loss excluded).
pub fn bus_transmission(geom: &FdmGeometry, omega: f64, voltage: f64) -> C64 {
    let c = ring1_coupler(geom, omega).m;
    let e = expi(propagation_phase(geom, omega, geom.index_ring1(voltage), geom.l1));
    let t12 = ring2_pass_transmission(geom, omega);
    c[1][1] + c[0][1] * c[1][0] * e * t12 / (1.0 - c[0][0] * e * t12)
}

/// Field build-up s₁₋/s_g for light generated inside ring 1, and the
/// ring-bus power coupling |C₁₂|² of the interferometric section.
pub fn intracavity_buildup_interferometric(geom: &FdmGeometry, omega: f64) -> Result<(C64, f64)> {
    if geom.mzi.is_none() {
        return Err(Error::Config("interferometric coupling requested but no mzi section configured".into()));
    }
    let coupler = ring1_coupler(geom, omega);
    let buildup = 1.0 / (1.0 - round_trip_factor(geom, omega, 0.0));
    Ok((buildup, coupler.cross_coupling()))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhasePoint {
    pub omega: f64,
    /// arg(C̄₁₁ e^{iΦ₁}): ring 1 alone.
    pub ring_phase: f64,
    /// arg(t̄₁₂): added by ring 2.
    pub pass_phase: f64,
    /// Sum wrapped to (−π, π]; resonances sit at its zeros.
    pub total: f64,
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

pub fn round_trip_phase_diagnostic(geom: &FdmGeometry, omegas: &[f64], voltage: f64) -> Vec<PhasePoint> {
    omegas
        .iter()
        .map(|&w| {
            let c = ring1_coupler(geom, w).m;
            let e = expi(propagation_phase(geom, w, geom.index_ring1(voltage), geom.l1));
            let ring = (c[0][0] * e * C64::from_polar(1.0, geom.theta2)).arg();
            let pass = (ring2_pass_transmission(geom, w) * C64::from_polar(1.0, -geom.theta2)).arg();
            PhasePoint { omega: w, ring_phase: ring, pass_phase: pass, total: wrap(ring + pass) }
        })
        .collect()
}

/// Zero crossings (upward, continuous) of the total round-trip phase.
pub fn phase_resonances(points: &[PhasePoint], geom: &FdmGeometry, voltage: f64) -> Vec<f64> {
    let total = |w: f64| round_trip_phase_diagnostic(geom, &[w], voltage)[0].total;
    let mut out = Vec::new();
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        // skip the ±π wrap discontinuity
        if a.total < 0.0 && b.total >= 0.0 && (b.total - a.total) < PI {
            if let Ok(w) = crate::numerics::bisect(total, a.omega, b.omega, 1e-9 * (b.omega - a.omega).abs()) {
                out.push(w);
            }
        }
    }
    out
}

/// Returns a copy with coupler phases chosen so that ring 1 (uncoupled) is
/// resonant at ω_ref for the given heater voltage and ring 2 is resonant at
/// ω_ref + `ring2_offset`. With an interferometric section the ring-arm phase
/// ψ_R is adjusted instead of θ₁.
pub fn align(geom: &FdmGeometry, voltage: f64, ring2_offset: f64) -> FdmGeometry {
    let mut g = geom.clone();
    let w2 = g.omega_ref + ring2_offset;
    let phi2 = propagation_phase(&g, w2, g.n_eff_re, g.l2).re;
    g.theta2 = wrap(-phi2);
    g.theta1 = 0.0;
    if let Some(m) = g.mzi.as_mut() {
        m.psi_r = 0.0;
    }
    let c = ring1_coupler(&g, g.omega_ref).m;
    let phi1 = propagation_phase(&g, g.omega_ref, g.index_ring1(voltage), g.l1).re;
    let current = wrap(c[0][0].arg() + phi1 + g.theta2);
    match g.mzi.as_mut() {
        Some(m) => m.psi_r = wrap(-current),
        None => g.theta1 = wrap(-current),
    }
    g
}

/// Power transmission T_cpl²|t|² on a (wavelength, voltage) grid.
pub fn transmission_map(
    geom: &FdmGeometry,
    wavelength_nm: &[f64],
    voltages: &[f64],
    t_cpl: f64,
) -> MeasuredMap {
    let rows: Vec<Vec<f64>> = voltages
        .par_iter()
        .map(|&v| {
            wavelength_nm
                .iter()
                .map(|&l| t_cpl * t_cpl * bus_transmission(geom, nm_to_omega(l), v).norm_sqr())
                .collect()
        })
        .collect();
    MeasuredMap::new("fdm", wavelength_nm.to_vec(), voltages.to_vec(), rows)
}

/// Warning text when a frequency span leaves the linear-dispersion range.
pub fn span_warning(geom: &FdmGeometry, omega_min: f64, omega_max: f64) -> Option<String> {
    let fsrs = (omega_max - omega_min).abs() / geom.fsr();
    (fsrs > 10.0).then(|| {
        format!("requested span covers {fsrs:.1} free spectral ranges; dispersion is linearized beyond 10")
    })
}

/// Assignment of ring-1 resonances ω_j = ω_p + jΩ_FSR for the multiplexed
/// source.
#[derive(Debug, Clone, Serialize)]
pub struct ModeLayout {
    pub n_min: i64,
    pub n_max: i64,
    pub pump: i64,
    pub output: i64,
    /// (n, j) pairs.
    pub signals: Vec<(i64, i64)>,
    pub idlers: Vec<(i64, i64)>,
    /// Split (ring-2 resonant) modes within the index span touched.
    pub split_modes: Vec<i64>,
}

impl ModeLayout {
    pub fn signal(n: i64) -> i64 {
        -2 + 6 * n
    }

    pub fn idler(n: i64) -> i64 {
        2 - 6 * n
    }

    pub fn is_split(j: i64) -> bool {
        (j + 1).rem_euclid(4) == 0
    }

    /// First-order cascade from signal n through the output lands on
    /// signal −(n − 1), symmetric about the output mode.
    pub fn cascade_symmetric(&self, n: i64) -> bool {
        let out = self.output;
        (Self::signal(n) - out).abs() == (out - Self::signal(1 - n)).abs()
    }

    /// Targets of processes that must be suppressed by splitting: direct
    /// generation into the output partner (j = −1) and reverse conversion
    /// targets j = −5 + 12n.
    pub fn suppressed_targets(&self) -> Vec<i64> {
        let mut v = vec![-1];
        v.extend((self.n_min..=self.n_max).map(|n| -5 + 12 * n));
        v
    }

    pub fn is_consistent(&self) -> bool {
        (self.n_min..=self.n_max).all(|n| self.cascade_symmetric(n))
            && self.suppressed_targets().into_iter().all(Self::is_split)
            && self.signals.iter().all(|&(_, j)| !Self::is_split(j))
            && !Self::is_split(self.output)
            && !Self::is_split(self.pump)
    }
}

/// Layout for multiplexing indices n ∈ [−n_modes, n_modes].
pub fn plan_mode_layout(n_modes: usize) -> Result<ModeLayout> {
    if n_modes == 0 {
        return Err(Error::Domain("at least one multiplexing mode is required".into()));
    }
    let k = n_modes as i64;
    let signals: Vec<_> = (-k..=k).map(|n| (n, ModeLayout::signal(n))).collect();
    let idlers: Vec<_> = (-k..=k).map(|n| (n, ModeLayout::idler(n))).collect();
    let lo = signals.iter().chain(&idlers).map(|p| p.1).min().unwrap_or(0).min(-5 + 12 * -k);
    let hi = signals.iter().chain(&idlers).map(|p| p.1).max().unwrap_or(0).max(-5 + 12 * k);
    let split_modes = (lo..=hi).filter(|&j| ModeLayout::is_split(j)).collect();
    let layout = ModeLayout { n_min: -k, n_max: k, pump: 0, output: 1, signals, idlers, split_modes };
    debug_assert!(layout.is_consistent());
    Ok(layout)
}

/// Ring-bus power coupling |C₁₂|² at each resonance index j.
pub fn coupling_at_modes(geom: &FdmGeometry, modes: &[i64]) -> Vec<(i64, f64)> {
    let fsr = geom.fsr();
    modes
        .iter()
        .map(|&j| (j, ring1_coupler(geom, geom.omega_ref + j as f64 * fsr).cross_coupling()))
        .collect()
}

/// Local minima of a sampled curve (strict on the left, non-strict on the right).
pub fn local_minima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1)).filter(|&i| y[i] < y[i - 1] && y[i] <= y[i + 1]).collect()
}
