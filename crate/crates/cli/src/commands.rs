use std::path::Path;

use serde::Serialize;
use serde_json::json;

use duoring_core::cascade::{report as cascade_report, CascadeParams};
use duoring_core::cmm::{max_conversion, max_conversion_scaling, peak_extinction, transmission_spectra};
use duoring_core::fdm::{span_warning, transmission_map};
use duoring_core::fit::{
    fit_fdm, fit_linear_cmm, fit_pumped, generate_pumped_datasets, generate_synthetic, CmmSynthSetup,
    FdmFitOptions, FdmSynthSetup, FitResult, FitWindows, NoiseModel, PumpedOptions, PumpedSynthSetup,
    SyntheticTruth,
};
use duoring_core::io::{self, IDLER_COLUMNS};
use duoring_core::jsa::{build_jsa, purity_sweep, GridSpec, ModeRates, PumpSpectrum};
use duoring_core::params::{chi_bar_estimate, g_from_geometry, gamma_from_nu};
use duoring_core::shaping::{
    integrate_emission, sweep_figures_of_merit, synthesize_control, EmissionOptions, Envelope, ShapingParams,
    SweepOptions, TargetWavepacket,
};
use duoring_core::units::{free_spectral_range, omega_to_nm};
use duoring_core::{presets, MeasuredMap};

use crate::config::RunConfig;
use crate::manifest::Outputs;
use crate::{Cli, Command, Failure, FitArgs, Model, Stage, SynthModel};

const PURITY_TOL: f64 = 1e-4;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + step * i as f64).collect()
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Spectrum { .. } => "spectrum",
        Command::Convert => "convert",
        Command::Design => "design",
        Command::Cascade => "cascade",
        Command::Purity { .. } => "purity",
        Command::Shape { .. } => "shape",
        Command::Sweep { .. } => "sweep",
        Command::Fit(_) => "fit",
        Command::Synth { .. } => "synth",
    }
}

pub fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<(), Failure> {
    let mut out = Outputs::new(&cli.out_dir);
    match &cli.command {
        Command::Spectrum { model } => spectrum(cfg, *model, &mut out)?,
        Command::Convert => convert(cfg, &mut out)?,
        Command::Design => design(cfg, &mut out)?,
        Command::Cascade => {
            let p = CascadeParams::from(&cfg.device);
            p.validate()?;
            let r = cascade_report(&p);
            println!("cascade: G = {:.3}, eta_max = {:.4}, |zeta|^2 = {:.2} dB", r.big_g, r.eta_max, r.zeta_db);
            out.json("cascade.json", &r)?;
        }
        Command::Purity { ratios, grid_points } => purity(cfg, cli, ratios, *grid_points, &mut out)?,
        Command::Shape { sample_step } => shape(cfg, cli, *sample_step, &mut out)?,
        Command::Sweep { g, ql } => sweep(cfg, cli, g, ql, &mut out)?,
        Command::Fit(args) => fit(cfg, args, &mut out)?,
        Command::Synth { model, noise } => synth(cfg, cli.seed, *model, *noise, &mut out)?,
    }
    let args: Vec<String> = std::env::args().skip(1).collect();
    out.finish(command_name(&cli.command), cli.seed, cli.tolerance, &cfg.normalized, &args)?;
    Ok(())
}

fn spectrum(cfg: &RunConfig, model: Model, out: &mut Outputs) -> Result<(), Failure> {
    match model {
        Model::Cmm => {
            let g = &cfg.grid;
            let omegas = linspace(g.omega_min, g.omega_max, g.points);
            let rows = transmission_spectra(&cfg.device, cfg.t_cpl, &omegas);
            out.write("spectrum.csv", |w| io::write_spectrum(w, &rows))?;
        }
        Model::Fdm => {
            let map = fdm_map(cfg)?;
            out.write("map.csv", |w| io::write_map(w, &map, false))?;
        }
    }
    Ok(())
}

fn fdm_setup(cfg: &RunConfig) -> FdmSynthSetup {
    let mut s = FdmSynthSetup::measured_device();
    if cfg.geometry != s.geometry {
        // keep the default span, now in free spectral ranges of the new geometry
        let fsr = cfg.geometry.fsr();
        let w0 = cfg.geometry.omega_ref;
        let (lo, hi) = (omega_to_nm(w0 + 2.5 * fsr), omega_to_nm(w0 - 1.5 * fsr));
        let dl = lo * 2.5e9 / w0;
        let n = ((hi - lo) / dl).ceil() as usize + 1;
        s.wavelength_nm = linspace(lo, lo + dl * (n - 1) as f64, n);
    }
    s.geometry = cfg.geometry.clone();
    s.t_cpl = cfg.t_cpl;
    let g = &cfg.grid;
    if let (Some(lo), Some(hi), Some(step)) = (g.wavelength_min_nm, g.wavelength_max_nm, g.wavelength_step_nm) {
        let n = ((hi - lo) / step).floor() as usize + 1;
        s.wavelength_nm = (0..n).map(|i| lo + step * i as f64).collect();
    }
    if let Some(v) = &g.voltages {
        s.voltages = v.clone();
    }
    s
}

fn fdm_map(cfg: &RunConfig) -> Result<MeasuredMap, Failure> {
    let s = fdm_setup(cfg);
    let w: Vec<f64> = s.wavelength_nm.iter().map(|&l| duoring_core::units::nm_to_omega(l)).collect();
    let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if let Some(msg) = span_warning(&s.geometry, lo, hi) {
        eprintln!("warning: {msg}");
    }
    Ok(transmission_map(&s.geometry, &s.wavelength_nm, &s.voltages, s.t_cpl))
}

fn convert(cfg: &RunConfig, out: &mut Outputs) -> Result<(), Failure> {
    let g = &cfg.grid;
    let p = &cfg.device;
    let pk = peak_extinction(p, (g.omega_min, g.omega_max), (g.detuning_min, g.detuning_max), g.points.min(401));
    let mut at_peak = p.clone();
    at_peak.delta_ab = pk.detuning - p.delta_nl;
    let rows = transmission_spectra(&at_peak, cfg.t_cpl, &linspace(g.omega_min, g.omega_max, g.points));
    let (eta_max, chi_max) = max_conversion(p);
    println!(
        "peak |zeta|^2 = {:.2} dB at Omega = {:.4e} rad/s, Delta_ab = {:.4e} rad/s",
        pk.zeta_db, pk.omega, pk.detuning
    );
    out.write("convert.csv", |w| io::write_spectrum(w, &rows))?;
    out.json(
        "convert.json",
        &json!({
            "zeta_db_peak": pk.zeta_db,
            "omega_at_peak_rad_s": pk.omega,
            "detuning_at_peak_rad_s": pk.detuning,
            "G": p.coupling_parameter(),
            "eta_max": eta_max,
            "chi_max_rad_s": chi_max,
        }),
    )?;
    Ok(())
}

fn design(cfg: &RunConfig, out: &mut Outputs) -> Result<(), Failure> {
    let p = &cfg.device;
    let (eta_max, chi_max) = max_conversion(p);
    let mut warnings = Vec::new();
    let chi_estimate = match chi_bar_estimate(&cfg.pumps, p, cfg.geometry.omega_ref) {
        Ok(c) => Some(c),
        Err(e) => {
            warnings.push(format!("coupling estimate unavailable: {e}"));
            None
        }
    };
    let geom = &cfg.geometry;
    let gamma = gamma_from_nu(geom.nu1, geom.l1, geom.n_g).map_err(|e| warnings.push(e.to_string())).ok();
    let g = gamma.and_then(|gm| g_from_geometry(geom, gm).map_err(|e| warnings.push(e.to_string())).ok());
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!("design: G = {:.3}, eta_max = {:.4} at chi_bar = {:.4e} rad/s", p.coupling_parameter(), eta_max, chi_max);
    out.json(
        "design.json",
        &json!({
            "G": p.coupling_parameter(),
            "eta_max": eta_max,
            "chi_max_rad_s": chi_max,
            "eta_max_high_G": max_conversion_scaling(p),
            "chi_bar_estimate_rad_s": chi_estimate,
            "geometry_rates": {
                "gamma_rad_s": gamma,
                "g_rad_s": g,
                "gamma_L_rad_s": geom.loss_rate(),
                "fsr_rad_s": geom.fsr(),
            },
            "warnings": warnings,
        }),
    )?;
    Ok(())
}

fn ratio_label(r: f64) -> String {
    format!("{r}").replace('.', "p")
}

fn purity(
    cfg: &RunConfig,
    cli: &Cli,
    ratios: &[f64],
    grid_points: Option<usize>,
    out: &mut Outputs,
) -> Result<(), Failure> {
    let ratios = if ratios.is_empty() { cfg.purity.ratios.clone() } else { ratios.to_vec() };
    if let Some(r) = ratios.iter().find(|r| !(**r >= 1.0)) {
        return Err(Failure::Validation(vec![format!("--ratio must be >= 1 (got {r})")]));
    }
    let n = grid_points.unwrap_or(cfg.purity.grid_points);
    if n < 8 {
        return Err(Failure::Validation(vec![format!("--grid-points must be at least 8 (got {n})")]));
    }
    let points = purity_sweep(&ratios, GridSpec::mapped(n), cli.tolerance.unwrap_or(PURITY_TOL))?;
    for pt in &points {
        println!("ratio {:>8}: purity {:.5} ({} points per axis)", pt.ratio, pt.purity, pt.grid_points);
        let jsa = build_jsa(&ModeRates::for_ratio(pt.ratio), &PumpSpectrum::Flat, GridSpec::mapped(pt.grid_points))?;
        out.write(&format!("jsa_r{}.csv", ratio_label(pt.ratio)), |w| io::write_jsa_intensity(w, &jsa))?;
    }
    out.json("purity.json", &points)?;
    Ok(())
}

fn shape(cfg: &RunConfig, cli: &Cli, sample_step: f64, out: &mut Outputs) -> Result<(), Failure> {
    if !(sample_step > 0.0) {
        return Err(Failure::Validation(vec![format!("--sample-step must be > 0 (got {sample_step})")]));
    }
    let s = &cfg.shape;
    let p = ShapingParams::from_figures(s.big_g, s.ql_over_qo, s.gamma_o);
    let target = TargetWavepacket::gaussian_bandwidth(s.dw_over_gamma * s.gamma_o, s.t0_dt);
    let dt = target.delta_t;
    let control = synthesize_control(&target, p.gamma_o, p.gamma_l, None)?.with_envelope(Envelope {
        tau_on: s.tau_on_dt * dt,
        tau_off: s.tau_off_dt * dt,
        tau_env: s.tau_env_dt * dt,
        beta: s.beta,
    });
    let step = sample_step / s.gamma_o;
    let opts = EmissionOptions { rtol: cli.tolerance.unwrap_or(1e-9), sample_step: Some(step), t_end: None };
    let r = integrate_emission(&p, &control, &opts)?;
    let t_end = r.t.last().copied().unwrap_or(0.0);
    println!("shape: eta_out = {:.5}, overlap = {:.5}", r.eta_out, r.overlap);
    out.write("emission.csv", |w| io::write_emission(w, &r))?;
    out.write("control.csv", |w| io::write_control(w, &control.samples(t_end, step)))?;
    out.json(
        "shape.json",
        &json!({
            "eta_out": r.eta_out,
            "overlap": r.overlap,
            "eta_down": r.eta_down,
            "final_populations": r.final_populations,
            "delta_t": dt,
            "t0": target.t0,
            "cutoff_time": control.cutoff_time(),
            "gamma_L": p.gamma_l,
            "g": p.g,
            "steps": r.steps,
        }),
    )?;
    Ok(())
}

fn sweep(cfg: &RunConfig, cli: &Cli, g: &[f64], ql: &[f64], out: &mut Outputs) -> Result<(), Failure> {
    let g_list = if g.is_empty() { cfg.sweep.g.clone() } else { g.to_vec() };
    let ql_list = if ql.is_empty() { cfg.sweep.ql_over_qo.clone() } else { ql.to_vec() };
    let mut errors = Vec::new();
    if g_list.iter().any(|x| !(*x > 0.0)) {
        errors.push("--g values must be > 0".to_string());
    }
    if ql_list.iter().any(|x| !(*x > 0.0)) {
        errors.push("--ql values must be > 0".to_string());
    }
    if !errors.is_empty() {
        return Err(Failure::Validation(errors));
    }
    let mut opts = SweepOptions { ol_floor: cfg.sweep.ol_floor, max_evals: cfg.sweep.max_evals, ..Default::default() };
    if let Some(t) = cli.tolerance {
        opts.rtol = t;
    }
    let cells = sweep_figures_of_merit(&g_list, &ql_list, &opts);
    for c in &cells {
        match c.eta_out {
            Some(e) => println!("G {:>7} QL/Qo {:>7}: eta_out {e:.5}", c.big_g, c.ql_over_qo),
            None => println!("G {:>7} QL/Qo {:>7}: overlap floor not reached", c.big_g, c.ql_over_qo),
        }
    }
    out.write("sweep.csv", |w| io::write_sweep(w, &cells))?;
    Ok(())
}

fn read_maps(paths: &[std::path::PathBuf]) -> Result<Vec<MeasuredMap>, Failure> {
    let mut maps = Vec::new();
    for p in paths {
        if !p.exists() {
            return Err(Failure::Core(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{}: no such file", p.display()),
            )
            .into()));
        }
        maps.extend(io::read_maps_file(p)?);
    }
    Ok(maps)
}

fn windows(cfg: &RunConfig, args: &FitArgs) -> Result<FitWindows, Failure> {
    let signal_nm = args.signal_nm.or(cfg.fit.signal_nm).ok_or_else(|| {
        Failure::Validation(vec![
            "the fit needs the approximate signal resonance of the first row: pass --signal-nm or set fit.signal_nm"
                .into(),
        ])
    })?;
    let fsr = cfg.fit.fsr.unwrap_or_else(|| free_spectral_range(presets::GROUP_INDEX, presets::RING1_LENGTH));
    let mut w = FitWindows::new(signal_nm, fsr);
    w.linewidths = cfg.fit.linewidths;
    Ok(w)
}

fn report_fit(fit: &FitResult) {
    println!("{} fit: cost {:.4e} after {} iterations", serde_json::to_string(&fit.stage).unwrap_or_default(), 0.5 * fit.residual_norm.powi(2), fit.iterations);
    for e in &fit.estimates {
        println!("  {:<10} {:>14.6e} +/- {:.2e}", e.name, e.value, e.uncertainty);
    }
    for w in &fit.warnings {
        eprintln!("warning: {w}");
    }
}

fn fit(cfg: &RunConfig, args: &FitArgs, out: &mut Outputs) -> Result<(), Failure> {
    if args.stage == Stage::Pumped {
        let mut missing = Vec::new();
        if args.linear.is_none() {
            missing.push("the pumped stage needs the linear-stage result: pass --linear FILE (fit.json)".to_string());
        }
        if args.idlers.is_empty() {
            missing.push(format!(
                "the pumped stage needs idler spectra: pass --idler FILE with columns {}",
                IDLER_COLUMNS.join(", ")
            ));
        }
        for p in &args.idlers {
            if !p.exists() {
                missing.push(format!(
                    "{}: idler file not found (expected a CSV with columns {})",
                    p.display(),
                    IDLER_COLUMNS.join(", ")
                ));
            }
        }
        if !missing.is_empty() {
            return Err(Failure::Validation(missing));
        }
    }
    let mut maps = read_maps(&args.maps)?;
    let result = match args.stage {
        Stage::Linear => fit_linear_cmm(&maps, &windows(cfg, args)?)?,
        Stage::Fdm => {
            if maps.len() != 1 {
                return Err(Failure::Validation(vec![format!(
                    "the transfer-matrix stage fits one map (got {})",
                    maps.len()
                )]));
            }
            fit_fdm(&maps[0], &FdmFitOptions::new(cfg.geometry.clone()))?
        }
        Stage::Pumped => {
            let linear_path = args.linear.as_deref().expect("checked above");
            let linear = load_fit(linear_path)?;
            for p in &args.idlers {
                let spectra = io::read_idler_file(p)?;
                let unmatched = io::attach_idlers(&mut maps, spectra);
                if !unmatched.is_empty() {
                    return Err(Failure::Validation(vec![format!(
                        "{}: dataset_id {} matches no map (map ids: {})",
                        p.display(),
                        unmatched.join(", "),
                        maps.iter().map(|m| m.dataset_id.as_str()).collect::<Vec<_>>().join(", ")
                    )]));
                }
            }
            let mut opts = PumpedOptions::new(windows(cfg, args)?);
            opts.signal_power_w = cfg.fit.signal_power_w.unwrap_or(cfg.pumps.p_s);
            fit_pumped(&maps, &linear, &opts)?
        }
    };
    report_fit(&result);
    out.json("fit.json", &result)?;
    Ok(())
}

fn load_fit(path: &Path) -> Result<FitResult, Failure> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::Validation(vec![format!("{}: not a fit result: {e}", path.display())]))
}

fn cmm_setup(cfg: &RunConfig) -> Result<CmmSynthSetup, Failure> {
    let mut s = CmmSynthSetup::measured_device();
    let d = &cfg.device;
    s.truth.gamma = d.gamma;
    s.truth.gamma_l1 = d.gamma_l1;
    s.truth.gamma_l2 = d.gamma_l2;
    s.truth.g = d.g;
    s.t_cpl = cfg.t_cpl;
    s.heater = cfg.heater;
    let va = cfg.heater.alignment_voltage().ok_or_else(|| {
        Failure::Validation(vec!["heater: A and B must have opposite signs so that the rings align at some voltage".into()])
    })?;
    s.omega_s0 = presets::reference_omega() + s.heater.b * va * va;
    if let Some(v) = &cfg.grid.voltages {
        s.voltages = v.clone();
    }
    s.wavelength_nm = s.default_wavelengths(0.0);
    Ok(s)
}

#[derive(Serialize)]
struct Truth<'a, T: Serialize> {
    model: &'a str,
    seed: u64,
    noise_sigma: f64,
    /// Signal resonance of the first row, the `--signal-nm` for `fit`.
    signal_nm: Option<f64>,
    fsr_rad_s: f64,
    t_cpl: f64,
    truth: T,
}

fn synth(
    cfg: &RunConfig,
    seed: u64,
    model: Option<SynthModel>,
    noise: Option<f64>,
    out: &mut Outputs,
) -> Result<(), Failure> {
    let model = match (model, cfg.synth.model.as_deref()) {
        (Some(m), _) => m,
        (None, None) | (None, Some("cmm")) => SynthModel::Cmm,
        (None, Some("fdm")) => SynthModel::Fdm,
        (None, Some("pumped")) => SynthModel::Pumped,
        (None, Some(other)) => {
            return Err(Failure::Validation(vec![format!("synth.model must be cmm, fdm or pumped (got {other})")]))
        }
    };
    let sigma = noise.unwrap_or(cfg.synth.noise_sigma);
    if !(sigma >= 0.0) {
        return Err(Failure::Validation(vec![format!("--noise must be >= 0 (got {sigma})")]));
    }
    let noise = NoiseModel::relative(sigma);
    match model {
        SynthModel::Cmm => {
            let s = cmm_setup(cfg)?;
            let map = generate_synthetic(&SyntheticTruth::Cmm(s.clone()), &noise, seed);
            out.write("map.csv", |w| io::write_map(w, &map, false))?;
            let truth = json!({ "params": s.truth, "heater": { "A": s.heater.a, "B": s.heater.b }, "voltages": s.voltages });
            out.json(
                "truth.json",
                &Truth {
                    model: "cmm",
                    seed,
                    noise_sigma: sigma,
                    signal_nm: Some(omega_to_nm(s.omega_s(s.voltages[0]))),
                    fsr_rad_s: s.fsr,
                    t_cpl: s.t_cpl,
                    truth,
                },
            )?;
        }
        SynthModel::Fdm => {
            let s = fdm_setup(cfg);
            let map = generate_synthetic(&SyntheticTruth::Fdm(s.clone()), &noise, seed);
            out.write("map.csv", |w| io::write_map(w, &map, false))?;
            let truth = json!({ "geometry": s.geometry, "voltages": s.voltages });
            out.json(
                "truth.json",
                &Truth {
                    model: "fdm",
                    seed,
                    noise_sigma: sigma,
                    signal_nm: None,
                    fsr_rad_s: s.geometry.fsr(),
                    t_cpl: s.t_cpl,
                    truth,
                },
            )?;
        }
        SynthModel::Pumped => {
            let base = cmm_setup(cfg)?;
            let mut ps = PumpedSynthSetup::measured_device();
            let mut b = base.clone();
            b.voltages = ps.datasets.iter().map(|d| d.voltage).collect();
            let max_shift = ps.datasets.iter().map(|d| d.delta_nl).fold(0.0, f64::max);
            b.truth.gamma_fca = cfg.device.gamma_fca;
            b.wavelength_nm = b.default_wavelengths(max_shift);
            b.truth.gamma_fca = 0.0;
            ps.base = b;
            ps.gamma_fca = cfg.device.gamma_fca;
            ps.chi_bar = cfg.device.chi_bar;
            ps.signal_power_w = cfg.pumps.p_s;
            let maps = generate_pumped_datasets(&ps, &noise, seed);
            let mut all = Vec::new();
            for m in &maps {
                let mut buf = Vec::new();
                io::write_map(&mut buf, m, true)?;
                let text = String::from_utf8(buf).expect("csv is utf-8");
                let body = if all.is_empty() { text.as_str() } else { text.split_once('\n').map_or("", |x| x.1) };
                all.extend_from_slice(body.as_bytes());
            }
            out.write("map.csv", |w| std::io::Write::write_all(w, &all).map_err(Into::into))?;
            let spectra: Vec<(&str, &duoring_core::IdlerSpectrum)> =
                maps.iter().filter_map(|m| m.idler.as_ref().map(|s| (m.dataset_id.as_str(), s))).collect();
            out.write("idler.csv", |w| io::write_idler(w, &spectra))?;
            let first = &ps.datasets[0];
            let truth = json!({
                "params": ps.base.truth,
                "heater": { "A": ps.base.heater.a, "B": ps.base.heater.b },
                "gamma_FCA": ps.gamma_fca,
                "chi_bar": ps.chi_bar,
                "signal_power_w": ps.signal_power_w,
                "datasets": ps.datasets,
            });
            out.json(
                "truth.json",
                &Truth {
                    model: "pumped",
                    seed,
                    noise_sigma: sigma,
                    signal_nm: Some(omega_to_nm(ps.omega_s(first))),
                    fsr_rad_s: ps.base.fsr,
                    t_cpl: ps.base.t_cpl,
                    truth,
                },
            )?;
        }
    }
    Ok(())
}
