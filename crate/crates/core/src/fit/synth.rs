//! Synthetic maps and idler spectra with seeded multiplicative noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{mode_transmission, Mode};
use crate::cmm::{conversion_efficiency, EfficiencyModel};
use crate::data::{IdlerSpectrum, MeasuredMap};
use crate::fdm::transmission_map;
use crate::params::{CmmParams, FdmGeometry, HeaterModel};
use crate::presets;
use crate::units::{free_spectral_range, nm_to_omega, omega_to_nm};

/// Multiplicative Gaussian noise y·(1 + σξ), clipped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { sigma: 0.0 }
    }

    pub fn relative(sigma: f64) -> Self {
        Self { sigma }
    }

    fn apply(&self, rng: &mut ChaCha8Rng, y: f64) -> f64 {
        if self.sigma == 0.0 {
            return y;
        }
        let xi: f64 = StandardNormal.sample(rng);
        (y * (1.0 + self.sigma * xi)).max(0.0)
    }
}

/// Three-mode coupled-mode device swept by the heater. The heater red-shifts
/// ring 1 by B·V², so ring-1 resonances sit at ω_s(V) + jΩ_FSR with
/// ω_s(V) = ω_s0 − B·V² and j ∈ {−1, 0, 1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmmSynthSetup {
    pub truth: CmmParams,
    pub heater: HeaterModel,
    /// Power transmission of one grating coupler.
    pub t_cpl: f64,
    /// Signal resonance at zero heater voltage [rad/s].
    pub omega_s0: f64,
    pub fsr: f64,
    pub wavelength_nm: Vec<f64>,
    pub voltages: Vec<f64>,
}

impl CmmSynthSetup {
    /// The measured device swept over 3–5 V, with the signal resonance at
    /// 1550 nm where the rings align.
    pub fn measured_device() -> Self {
        let heater = presets::heater();
        let truth = presets::measured_device_linear();
        let va = heater.alignment_voltage().unwrap_or(0.0);
        let omega_s0 = presets::reference_omega() + heater.b * va * va;
        let fsr = free_spectral_range(presets::GROUP_INDEX, presets::RING1_LENGTH);
        let voltages: Vec<f64> = (0..11).map(|i| 3.0 + 0.2 * i as f64).collect();
        let mut s = Self {
            truth,
            heater,
            t_cpl: presets::coupler_transmission(),
            omega_s0,
            fsr,
            wavelength_nm: Vec::new(),
            voltages,
        };
        s.wavelength_nm = s.default_wavelengths(0.0);
        s
    }

    pub fn omega_s(&self, voltage: f64) -> f64 {
        self.omega_s0 - self.heater.b * voltage * voltage
    }

    /// Uniform wavelength grid covering the three modes over the voltage
    /// range, sampled at a tenth of the ring-1 linewidth. `extra_shift`
    /// widens the span downward in frequency.
    pub fn default_wavelengths(&self, extra_shift: f64) -> Vec<f64> {
        let (vmin, vmax) = self
            .voltages
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v * v), b.max(v * v)));
        let big = self.truth.total_s() + self.truth.g;
        let margin = 8.0 * big;
        let w_lo = self.omega_s0 - self.heater.b.max(0.0) * vmax - self.heater.b.min(0.0) * vmin - self.fsr - margin
            - extra_shift.max(0.0);
        let w_hi = self.omega_s0 - self.heater.b.max(0.0) * vmin - self.heater.b.min(0.0) * vmax + self.fsr + margin;
        let (l_lo, l_hi) = (omega_to_nm(w_hi), omega_to_nm(w_lo));
        let dw = 0.1 * self.truth.total_s();
        let dl = l_lo * dw / w_hi;
        let n = ((l_hi - l_lo) / dl).ceil() as usize + 1;
        (0..n).map(|i| l_lo + dl * i as f64).collect()
    }

    /// Noise-free transmission at one wavelength for a ring-1 frame at
    /// `omega_s` and parameters `p` (detuning already set).
    fn transmission(&self, p: &CmmParams, omega_s: f64, lambda_nm: f64) -> f64 {
        let w = nm_to_omega(lambda_nm);
        let j = ((w - omega_s) / self.fsr).round().clamp(-1.0, 1.0);
        let mode = Mode::ALL[(j + 1.0) as usize];
        let omega = w - omega_s - j * self.fsr;
        self.t_cpl * self.t_cpl * mode_transmission(p, mode, omega)
    }

    fn at_voltage(&self, voltage: f64) -> CmmParams {
        let mut p = self.truth.clone();
        p.delta_ab = self.heater.detuning(voltage);
        p
    }
}

/// Transfer-matrix device and sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdmSynthSetup {
    pub geometry: FdmGeometry,
    pub t_cpl: f64,
    pub wavelength_nm: Vec<f64>,
    pub voltages: Vec<f64>,
}

impl FdmSynthSetup {
    /// Measured geometry over −1.5..+2.5 free spectral ranges around the
    /// reference, swept over 3.4–4.8 V.
    pub fn measured_device() -> Self {
        let geometry = presets::measured_geometry();
        let fsr = geometry.fsr();
        let w0 = geometry.omega_ref;
        let (l_lo, l_hi) = (omega_to_nm(w0 + 2.5 * fsr), omega_to_nm(w0 - 1.5 * fsr));
        let dl = l_lo * 2.5e9 / w0;
        let n = ((l_hi - l_lo) / dl).ceil() as usize + 1;
        Self {
            geometry,
            t_cpl: presets::coupler_transmission(),
            wavelength_nm: (0..n).map(|i| l_lo + dl * i as f64).collect(),
            voltages: (0..8).map(|i| 3.4 + 0.2 * i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SyntheticTruth {
    Cmm(CmmSynthSetup),
    Fdm(FdmSynthSetup),
}

fn add_noise(map: &mut MeasuredMap, noise: &NoiseModel, rng: &mut ChaCha8Rng) {
    for row in map.transmission.iter_mut() {
        for y in row.iter_mut() {
            *y = noise.apply(rng, *y);
        }
    }
}

/// A transmission map from the given truth. Identical seeds give identical
/// maps.
pub fn generate_synthetic(truth: &SyntheticTruth, noise: &NoiseModel, seed: u64) -> MeasuredMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = match truth {
        SyntheticTruth::Cmm(s) => {
            let rows = s
                .voltages
                .iter()
                .map(|&v| {
                    let p = s.at_voltage(v);
                    let ws = s.omega_s(v);
                    s.wavelength_nm.iter().map(|&l| s.transmission(&p, ws, l)).collect()
                })
                .collect();
            MeasuredMap::new("synthetic-cmm", s.wavelength_nm.clone(), s.voltages.clone(), rows)
        }
        SyntheticTruth::Fdm(s) => {
            let mut m = transmission_map(&s.geometry, &s.wavelength_nm, &s.voltages, s.t_cpl);
            m.dataset_id = "synthetic-fdm".into();
            m
        }
    };
    add_noise(&mut map, noise, &mut rng);
    map
}

/// One pumped dataset: a heater setting and the pump-induced shift at it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpedDataset {
    pub id: String,
    pub voltage: f64,
    #[serde(rename = "delta_NL")]
    pub delta_nl: f64,
}

/// Pumped measurements on the device of `base`: ring 1 carries the extra
/// free-carrier loss and its resonances move down by δ_NL, which adds to
/// the ring-2 detuning. Idler powers are t_cpl·P_s·η with η from the
/// undepleted-signal model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpedSynthSetup {
    pub base: CmmSynthSetup,
    #[serde(rename = "gamma_FCA")]
    pub gamma_fca: f64,
    pub chi_bar: f64,
    /// Signal power in the bus waveguide [W].
    pub signal_power_w: f64,
    pub datasets: Vec<PumpedDataset>,
}

impl PumpedSynthSetup {
    /// Five heater settings around alignment with the tabulated shifts.
    pub fn measured_device() -> Self {
        let mut base = CmmSynthSetup::measured_device();
        let device = presets::measured_device();
        let datasets: Vec<PumpedDataset> = [3.9, 4.0, 4.1, 4.2, 4.3]
            .iter()
            .zip(presets::DATASET_SHIFTS)
            .enumerate()
            .map(|(i, (&v, d))| PumpedDataset { id: format!("set{}", i + 1), voltage: v, delta_nl: d })
            .collect();
        base.voltages = datasets.iter().map(|d| d.voltage).collect();
        let max_shift = datasets.iter().map(|d| d.delta_nl).fold(0.0, f64::max);
        base.truth.gamma_fca = device.gamma_fca;
        base.wavelength_nm = base.default_wavelengths(max_shift);
        base.truth.gamma_fca = 0.0;
        Self {
            base,
            gamma_fca: device.gamma_fca,
            chi_bar: device.chi_bar,
            signal_power_w: presets::measured_pumps().p_s,
            datasets,
        }
    }

    pub fn params(&self, ds: &PumpedDataset) -> CmmParams {
        let mut p = self.base.at_voltage(ds.voltage);
        p.gamma_fca = self.gamma_fca;
        p.chi_bar = self.chi_bar;
        p.delta_nl = ds.delta_nl;
        p
    }

    pub fn omega_s(&self, ds: &PumpedDataset) -> f64 {
        self.base.omega_s(ds.voltage) - ds.delta_nl
    }
}

/// Detected idler powers for signal detuning `omega`.
pub(crate) fn idler_powers(p: &CmmParams, omega: f64, t_cpl: f64, p_s: f64) -> (f64, f64) {
    let c = conversion_efficiency(p, omega, EfficiencyModel::Undepleted);
    (t_cpl * p_s * c.eta_i_plus, t_cpl * p_s * c.eta_i_minus)
}

/// One single-row map with idler spectra per dataset. Noise draws run
/// through the datasets in order from a single seeded stream.
pub fn generate_pumped_datasets(setup: &PumpedSynthSetup, noise: &NoiseModel, seed: u64) -> Vec<MeasuredMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = &setup.base;
    setup
        .datasets
        .iter()
        .map(|ds| {
            let p = setup.params(ds);
            let ws = setup.omega_s(ds);
            let row: Vec<f64> = s.wavelength_nm.iter().map(|&l| s.transmission(&p, ws, l)).collect();
            let mut map = MeasuredMap::new(&ds.id, s.wavelength_nm.clone(), vec![ds.voltage], vec![row]);
            add_noise(&mut map, noise, &mut rng);
            let half = 6.0 * p.total_s();
            let wl: Vec<f64> = s
                .wavelength_nm
                .iter()
                .copied()
                .filter(|&l| (nm_to_omega(l) - ws).abs() <= half)
                .collect();
            let mut plus = Vec::with_capacity(wl.len());
            let mut minus = Vec::with_capacity(wl.len());
            for &l in &wl {
                let (a, b) = idler_powers(&p, nm_to_omega(l) - ws, s.t_cpl, setup.signal_power_w);
                plus.push(noise.apply(&mut rng, a));
                minus.push(noise.apply(&mut rng, b));
            }
            map.idler = Some(IdlerSpectrum { wavelength_nm: wl, p_iplus_w: plus, p_iminus_w: minus });
            map
        })
        .collect()
}
