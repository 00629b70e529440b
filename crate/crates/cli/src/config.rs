//! JSON run configuration.
//!
//! Every dimensional key carries its unit as a suffix. On load, keys are
//! rewritten to a canonical unit (`_rad_s`, `_m`, `_w`, ...) with the value
//! converted; decibel keys lose the suffix and become linear ratios. All
//! problems are collected before anything is reported.

use std::f64::consts::PI;
use std::path::Path;

use serde_json::{Map, Value};

use duoring_core::units::{db_to_linear, dbm_to_watts, wavelength_to_omega};
use duoring_core::{presets, CmmParams, FdmGeometry, HeaterModel, PumpConfig};

enum Conv {
    Scale(f64),
    Dbm,
    Db,
}

/// (suffix, canonical suffix, conversion). Compound suffixes come first so
/// that `_m2_per_w` is not read as watts.
const UNITS: &[(&str, &str, Conv)] = &[
    ("_rad_s_per_v2", "_rad_s_per_v2", Conv::Scale(1.0)),
    ("_ghz_per_v2", "_rad_s_per_v2", Conv::Scale(2.0 * PI * 1e9)),
    ("_m2_per_w", "_m2_per_w", Conv::Scale(1.0)),
    ("_rad_s", "_rad_s", Conv::Scale(1.0)),
    ("_ghz", "_rad_s", Conv::Scale(2.0 * PI * 1e9)),
    ("_dbm", "_w", Conv::Dbm),
    ("_db", "", Conv::Db),
    ("_mw", "_w", Conv::Scale(1e-3)),
    ("_w", "_w", Conv::Scale(1.0)),
    ("_nm", "_m", Conv::Scale(1e-9)),
    ("_um", "_m", Conv::Scale(1e-6)),
    ("_mm", "_m", Conv::Scale(1e-3)),
    ("_m", "_m", Conv::Scale(1.0)),
];

fn convert(conv: &Conv, x: f64) -> f64 {
    match conv {
        Conv::Scale(k) => k * x,
        Conv::Dbm => dbm_to_watts(x),
        Conv::Db => db_to_linear(x),
    }
}

fn convert_value(conv: &Conv, v: &Value, path: &str, errors: &mut Vec<String>) -> Value {
    match v {
        Value::Number(n) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            serde_json::Number::from_f64(convert(conv, x)).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.iter().map(|i| convert_value(conv, i, path, errors)).collect()),
        _ => {
            errors.push(format!("{path}: a unit-suffixed key needs a number or an array of numbers"));
            Value::Null
        }
    }
}

/// Rewrites unit-suffixed keys to canonical units, recursing into objects.
pub fn normalize(v: &Value, prefix: &str, errors: &mut Vec<String>) -> Value {
    let Value::Object(map) = v else {
        return v.clone();
    };
    let mut out = Map::new();
    for (key, val) in map {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        let unit = UNITS.iter().find(|(s, _, _)| key.len() > s.len() && key.ends_with(s));
        let (name, val) = match unit {
            Some((suffix, canon, conv)) => {
                let base = &key[..key.len() - suffix.len()];
                (format!("{base}{canon}"), convert_value(conv, val, &path, errors))
            }
            None => (key.clone(), normalize(val, &path, errors)),
        };
        if out.contains_key(&name) {
            errors.push(format!("{path}: the same quantity is given more than once (as {name} after conversion)"));
            continue;
        }
        out.insert(name, val);
    }
    Value::Object(out)
}

/// Typed access to one config section that records every problem.
struct Section<'a> {
    name: &'a str,
    map: Option<&'a Map<String, Value>>,
    used: Vec<&'static str>,
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Map<String, Value>, name: &'a str, errors: &'a mut Vec<String>) -> Self {
        let map = match root.get(name) {
            Some(Value::Object(m)) => Some(m),
            Some(_) => {
                errors.push(format!("{name}: must be an object"));
                None
            }
            None => None,
        };
        Self { name, map, used: Vec::new(), errors }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        self.map?.get(key)
    }

    fn num(&mut self, key: &'static str) -> Option<f64> {
        let v = self.raw(key)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.errors.push(format!("{}.{key}: expected a finite number", self.name));
                None
            }
        }
    }

    fn set(&mut self, key: &'static str, target: &mut f64) {
        if let Some(x) = self.num(key) {
            *target = x;
        }
    }

    fn nums(&mut self, key: &'static str) -> Option<Vec<f64>> {
        let v = self.raw(key)?;
        let list: Option<Vec<f64>> = match v {
            Value::Array(items) => items.iter().map(|i| i.as_f64().filter(|x| x.is_finite())).collect(),
            other => other.as_f64().filter(|x| x.is_finite()).map(|x| vec![x]),
        };
        if list.is_none() {
            self.errors.push(format!("{}.{key}: expected a number or an array of numbers", self.name));
        }
        list
    }

    fn count(&mut self, key: &'static str) -> Option<usize> {
        let v = self.raw(key)?;
        match v.as_u64() {
            Some(n) if n > 0 => Some(n as usize),
            _ => {
                self.errors.push(format!("{}.{key}: expected a positive integer", self.name));
                None
            }
        }
    }

    fn text(&mut self, key: &'static str) -> Option<String> {
        let v = self.raw(key)?;
        match v.as_str() {
            Some(s) => Some(s.to_string()),
            None => {
                self.errors.push(format!("{}.{key}: expected a string", self.name));
                None
            }
        }
    }

    /// Reports keys nobody asked for, which usually means a missing or
    /// misspelt unit suffix.
    fn finish(self) {
        let Some(map) = self.map else { return };
        for key in map.keys() {
            if self.used.contains(&key.as_str()) {
                continue;
            }
            let prefix = format!("{key}_");
            let with_unit: Vec<&str> = self.used.iter().copied().filter(|k| k.starts_with(&prefix)).collect();
            if let Some(k) = with_unit.first() {
                self.errors.push(format!(
                    "{}.{key}: missing unit suffix (expected {k} or an equivalent unit)",
                    self.name
                ));
            } else {
                let mut known: Vec<&str> = self.used.clone();
                known.sort_unstable();
                self.errors.push(format!(
                    "{}.{key}: unknown key (after unit conversion the known keys are {})",
                    self.name,
                    known.join(", ")
                ));
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub detuning_min: f64,
    pub detuning_max: f64,
    pub wavelength_min_nm: Option<f64>,
    pub wavelength_max_nm: Option<f64>,
    pub wavelength_step_nm: Option<f64>,
    pub voltages: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ShapeConfig {
    pub big_g: f64,
    pub ql_over_qo: f64,
    pub gamma_o: f64,
    pub dw_over_gamma: f64,
    pub t0_dt: f64,
    pub tau_on_dt: f64,
    pub tau_off_dt: f64,
    pub tau_env_dt: f64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub g: Vec<f64>,
    pub ql_over_qo: Vec<f64>,
    pub ol_floor: f64,
    pub max_evals: usize,
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub signal_nm: Option<f64>,
    pub fsr: Option<f64>,
    pub linewidths: f64,
    pub signal_power_w: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub model: Option<String>,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone)]
pub struct PurityConfig {
    pub ratios: Vec<f64>,
    pub grid_points: usize,
}

/// A validated configuration. Sections left out fall back to the measured
/// device and the defaults documented in `--help`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub device: CmmParams,
    pub t_cpl: f64,
    pub heater: HeaterModel,
    pub geometry: FdmGeometry,
    pub pumps: PumpConfig,
    pub grid: GridConfig,
    pub purity: PurityConfig,
    pub shape: ShapeConfig,
    pub sweep: SweepConfig,
    pub fit: FitConfig,
    pub synth: SynthConfig,
    /// Normalized document, hashed into the manifest.
    pub normalized: Value,
}

const SECTIONS: [&str; 11] =
    ["device", "heater", "geometry", "pumps", "grid", "purity", "shape", "sweep", "fit", "synth", "comment"];

impl RunConfig {
    pub fn defaults() -> Self {
        Self::from_value(&Value::Object(Map::new())).expect("defaults are valid")
    }

    pub fn load(path: &Path) -> Result<Self, Vec<String>> {
        let text = std::fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| vec![format!("{}: malformed JSON: {e}", path.display())])?;
        Self::from_value(&value)
    }

    pub fn from_value(raw: &Value) -> Result<Self, Vec<String>> {
        let mut errors = Vec::new();
        let Value::Object(_) = raw else {
            return Err(vec!["the configuration must be a JSON object".into()]);
        };
        let normalized = normalize(raw, "", &mut errors);
        let root = normalized.as_object().expect("object in, object out");
        for key in root.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                errors.push(format!("{key}: unknown section (expected one of {})", SECTIONS.join(", ")));
            }
        }

        let mut device = presets::measured_device();
        let mut t_cpl = presets::coupler_transmission();
        {
            let mut s = Section::new(root, "device", &mut errors);
            s.set("gamma_rad_s", &mut device.gamma);
            s.set("gamma_L1_rad_s", &mut device.gamma_l1);
            s.set("gamma_L2_rad_s", &mut device.gamma_l2);
            s.set("gamma_FCA_rad_s", &mut device.gamma_fca);
            s.set("g_rad_s", &mut device.g);
            s.set("chi_bar_rad_s", &mut device.chi_bar);
            s.set("delta_ab_rad_s", &mut device.delta_ab);
            s.set("delta_NL_rad_s", &mut device.delta_nl);
            device.gamma_s = s.num("gamma_s_rad_s").or(device.gamma_s);
            device.gamma_i_plus = s.num("gamma_i_plus_rad_s").or(device.gamma_i_plus);
            device.gamma_i_minus = s.num("gamma_i_minus_rad_s").or(device.gamma_i_minus);
            device.gamma_o = s.num("gamma_o_rad_s").or(device.gamma_o);
            s.set("t_cpl", &mut t_cpl);
            s.finish();
        }
        errors.extend(device.violations().into_iter().map(|v| format!("device: {v}")));
        if !(t_cpl > 0.0 && t_cpl <= 1.0) {
            errors.push(format!("device.t_cpl must lie in (0, 1] (got {t_cpl})"));
        }

        let mut heater = presets::heater();
        {
            let mut s = Section::new(root, "heater", &mut errors);
            s.set("A_rad_s", &mut heater.a);
            s.set("B_rad_s_per_v2", &mut heater.b);
            s.finish();
        }

        let mut geometry = presets::measured_geometry();
        {
            let mut s = Section::new(root, "geometry", &mut errors);
            s.set("L1_m", &mut geometry.l1);
            s.set("L2_m", &mut geometry.l2);
            s.set("nu1", &mut geometry.nu1);
            s.set("nu2", &mut geometry.nu2);
            s.set("theta1", &mut geometry.theta1);
            s.set("theta2", &mut geometry.theta2);
            s.set("n_eff_re", &mut geometry.n_eff_re);
            s.set("n_eff_im", &mut geometry.n_eff_im);
            s.set("n_g", &mut geometry.n_g);
            s.set("dnV", &mut geometry.dn_v);
            if let Some(l) = s.num("lambda_ref_m") {
                let loss = geometry.loss_rate();
                geometry.omega_ref = wavelength_to_omega(l);
                geometry.set_loss_rate(loss);
            }
            if let Some(gl) = s.num("gamma_L_rad_s") {
                if gl < 0.0 {
                    s.errors.push(format!("geometry.gamma_L_rad_s must be >= 0 (got {gl:e})"));
                }
                geometry.set_loss_rate(gl);
            }
            s.finish();
        }
        geometry.heater = heater;
        errors.extend(geometry.violations().into_iter().map(|v| format!("geometry: {v}")));

        let mut pumps = presets::measured_pumps();
        pumps.t_cpl = t_cpl;
        {
            let mut s = Section::new(root, "pumps", &mut errors);
            s.set("P_p1_w", &mut pumps.p_p1);
            s.set("P_p2_w", &mut pumps.p_p2);
            s.set("P_s_w", &mut pumps.p_s);
            s.set("n2_m2_per_w", &mut pumps.n2);
            s.set("ring_length_m", &mut pumps.ring_length);
            s.set("n_eff_re", &mut pumps.n_eff_re);
            s.finish();
        }
        errors.extend(pumps.violations().into_iter().map(|v| format!("pumps: {v}")));

        let mut grid = GridConfig {
            omega_min: -100e9,
            omega_max: 100e9,
            points: 401,
            detuning_min: -200e9,
            detuning_max: 200e9,
            wavelength_min_nm: None,
            wavelength_max_nm: None,
            wavelength_step_nm: None,
            voltages: None,
        };
        {
            let mut s = Section::new(root, "grid", &mut errors);
            s.set("omega_min_rad_s", &mut grid.omega_min);
            s.set("omega_max_rad_s", &mut grid.omega_max);
            grid.points = s.count("points").unwrap_or(grid.points);
            s.set("detuning_min_rad_s", &mut grid.detuning_min);
            s.set("detuning_max_rad_s", &mut grid.detuning_max);
            grid.wavelength_min_nm = s.num("wavelength_min_m").map(|x| x * 1e9);
            grid.wavelength_max_nm = s.num("wavelength_max_m").map(|x| x * 1e9);
            grid.wavelength_step_nm = s.num("wavelength_step_m").map(|x| x * 1e9);
            grid.voltages = s.nums("voltages_v");
            s.finish();
        }
        if !(grid.omega_max > grid.omega_min) {
            errors.push("grid: omega_max must exceed omega_min".into());
        }
        if !(grid.detuning_max >= grid.detuning_min) {
            errors.push("grid: detuning_max must not be below detuning_min".into());
        }
        if grid.points < 2 {
            errors.push("grid.points must be at least 2".into());
        }
        let wl = [grid.wavelength_min_nm, grid.wavelength_max_nm, grid.wavelength_step_nm];
        if wl.iter().any(Option::is_some) && wl.iter().any(Option::is_none) {
            errors.push("grid: wavelength_min, wavelength_max and wavelength_step go together".into());
        }
        if let [Some(lo), Some(hi), Some(step)] = wl {
            if !(hi > lo && step > 0.0) {
                errors.push("grid: the wavelength range must be increasing with a positive step".into());
            }
        }
        if grid.voltages.as_ref().is_some_and(|v| v.is_empty()) {
            errors.push("grid.voltages_v must not be empty".into());
        }

        let mut purity = PurityConfig { ratios: vec![1.0, 3.0, 10.0, 30.0, 100.0], grid_points: 192 };
        {
            let mut s = Section::new(root, "purity", &mut errors);
            purity.ratios = s.nums("ratios").unwrap_or(purity.ratios);
            purity.grid_points = s.count("grid_points").unwrap_or(purity.grid_points);
            s.finish();
        }
        if purity.ratios.is_empty() || purity.ratios.iter().any(|r| *r < 1.0) {
            errors.push("purity.ratios must be a non-empty list of values >= 1".into());
        }

        let mut shape = ShapeConfig {
            big_g: 100.0,
            ql_over_qo: 500.0,
            gamma_o: 1.0,
            dw_over_gamma: 0.38,
            t0_dt: 3.83,
            tau_on_dt: 0.42,
            tau_off_dt: 5.91,
            tau_env_dt: 0.84,
            beta: 1.06,
        };
        {
            let mut s = Section::new(root, "shape", &mut errors);
            s.set("G", &mut shape.big_g);
            s.set("QL_Qo", &mut shape.ql_over_qo);
            s.set("gamma_o_rad_s", &mut shape.gamma_o);
            s.set("dw_over_gamma", &mut shape.dw_over_gamma);
            s.set("t0_dt", &mut shape.t0_dt);
            s.set("tau_on_dt", &mut shape.tau_on_dt);
            s.set("tau_off_dt", &mut shape.tau_off_dt);
            s.set("tau_env_dt", &mut shape.tau_env_dt);
            s.set("beta", &mut shape.beta);
            s.finish();
        }
        for (name, v) in [
            ("G", shape.big_g),
            ("QL_Qo", shape.ql_over_qo),
            ("gamma_o", shape.gamma_o),
            ("dw_over_gamma", shape.dw_over_gamma),
            ("tau_env_dt", shape.tau_env_dt),
        ] {
            if !(v > 0.0) {
                errors.push(format!("shape.{name} must be > 0 (got {v})"));
            }
        }

        let mut sweep = SweepConfig {
            g: vec![10.0, 30.0, 100.0],
            ql_over_qo: vec![100.0, 300.0, 1000.0],
            ol_floor: 0.99,
            max_evals: 400,
        };
        {
            let mut s = Section::new(root, "sweep", &mut errors);
            sweep.g = s.nums("G").unwrap_or(sweep.g);
            sweep.ql_over_qo = s.nums("QL_Qo").unwrap_or(sweep.ql_over_qo);
            s.set("ol_floor", &mut sweep.ol_floor);
            sweep.max_evals = s.count("max_evals").unwrap_or(sweep.max_evals);
            s.finish();
        }
        if sweep.g.is_empty() || sweep.g.iter().any(|g| !(*g > 0.0)) {
            errors.push("sweep.G must be a non-empty list of positive values".into());
        }
        if sweep.ql_over_qo.is_empty() || sweep.ql_over_qo.iter().any(|q| !(*q > 0.0)) {
            errors.push("sweep.QL_Qo must be a non-empty list of positive values".into());
        }

        let mut fit = FitConfig { signal_nm: None, fsr: None, linewidths: 3.0, signal_power_w: None };
        {
            let mut s = Section::new(root, "fit", &mut errors);
            fit.signal_nm = s.num("signal_m").map(|x| x * 1e9);
            fit.fsr = s.num("fsr_rad_s");
            s.set("linewidths", &mut fit.linewidths);
            fit.signal_power_w = s.num("signal_power_w");
            s.finish();
        }
        if !(fit.linewidths > 0.0) {
            errors.push(format!("fit.linewidths must be > 0 (got {})", fit.linewidths));
        }

        let mut synth = SynthConfig { model: None, noise_sigma: 0.01 };
        {
            let mut s = Section::new(root, "synth", &mut errors);
            synth.model = s.text("model");
            s.set("noise_sigma", &mut synth.noise_sigma);
            s.finish();
        }
        if !(synth.noise_sigma >= 0.0) {
            errors.push(format!("synth.noise_sigma must be >= 0 (got {})", synth.noise_sigma));
        }

        if errors.is_empty() {
            Ok(Self {
                device,
                t_cpl,
                heater,
                geometry,
                pumps,
                grid,
                purity,
                shape,
                sweep,
                fit,
                synth,
                normalized,
            })
        } else {
            Err(errors)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn ghz_becomes_angular_frequency() {
        let c = RunConfig::from_value(&json!({"device": {"gamma_ghz": 1.0}})).unwrap();
        assert!((c.device.gamma - 2.0 * PI * 1e9).abs() < 1e-3);
    }

    #[test]
    fn decibels_lose_their_suffix() {
        let c = RunConfig::from_value(&json!({"device": {"t_cpl_db": -10.0}})).unwrap();
        assert!((c.t_cpl - 0.1).abs() < 1e-15);
    }

    #[test]
    fn all_violations_are_reported() {
        let errs = RunConfig::from_value(&json!({
            "device": {"gamma_L1_rad_s": -1e9, "g": 5e10},
            "purity": {"ratios": [0.5]},
            "bogus": {}
        }))
        .unwrap_err();
        let joined = errs.join("\n");
        assert!(joined.contains("gamma_L1"), "{joined}");
        assert!(joined.contains("device.g: missing unit suffix (expected g_rad_s"), "{joined}");
        assert!(joined.contains("purity.ratios"), "{joined}");
        assert!(joined.contains("bogus: unknown section"), "{joined}");
        assert_eq!(errs.len(), 4, "{joined}");
    }

    #[test]
    fn duplicate_quantity_is_rejected() {
        let errs = RunConfig::from_value(&json!({"device": {"gamma_ghz": 4.0, "gamma_rad_s": 2.5e10}})).unwrap_err();
        assert!(errs[0].contains("more than once"), "{errs:?}");
    }

    #[test]
    fn dbm_and_nm() {
        let c = RunConfig::from_value(&json!({"pumps": {"P_s_dbm": 0.0}, "fit": {"signal_nm": 1550.5}})).unwrap();
        assert!((c.pumps.p_s - 1e-3).abs() < 1e-15);
        assert!((c.fit.signal_nm.unwrap() - 1550.5).abs() < 1e-9);
    }
}
