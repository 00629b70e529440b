use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_duoring"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(out: &Path, args: &[&str]) -> Output {
    let o = bin().arg("--out-dir").arg(out).args(args).output().expect("spawn duoring");
    assert!(
        o.status.success(),
        "duoring {args:?} failed: {}\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn synth_is_byte_identical_for_the_same_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    run(a.path(), &["--seed", "7", "synth"]);
    run(b.path(), &["--seed", "7", "synth"]);
    run(c.path(), &["--seed", "8", "synth"]);
    let map = |d: &Path| std::fs::read(d.join("map.csv")).unwrap();
    assert_eq!(map(a.path()), map(b.path()));
    assert_ne!(map(a.path()), map(c.path()));
    let ma = read_json(&a.path().join("manifest.json"));
    let mb = read_json(&b.path().join("manifest.json"));
    assert_eq!(ma["artifacts"], mb["artifacts"]);
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
    assert_eq!(ma["seed"], 7);
}

#[test]
fn manifest_reproduces_the_run() {
    let a = tempfile::tempdir().unwrap();
    let cfg = configs().join("measured_device.json");
    run(a.path(), &["--config", cfg.to_str().unwrap(), "--seed", "11", "synth", "--noise", "0.02"]);
    let m = read_json(&a.path().join("manifest.json"));
    let args: Vec<String> = m["arguments"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let b = tempfile::tempdir().unwrap();
    // replay with the recorded arguments into a fresh directory
    let mut replay: Vec<String> = Vec::new();
    let mut skip = false;
    for a in &args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out-dir" {
            skip = true;
            continue;
        }
        replay.push(a.clone());
    }
    let refs: Vec<&str> = replay.iter().map(String::as_str).collect();
    run(b.path(), &refs);
    let n = read_json(&b.path().join("manifest.json"));
    assert_eq!(m["artifacts"], n["artifacts"]);
    assert_eq!(m["config_sha256"], n["config_sha256"]);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn purity_at_ratio_100() {
    let d = tempfile::tempdir().unwrap();
    run(d.path(), &["purity", "--ratio", "100"]);
    let v = read_json(&d.path().join("purity.json"));
    let p = v[0]["purity"].as_f64().unwrap();
    assert!((p - 0.999).abs() <= 0.005, "{p}");
    assert_eq!(v[0]["lambda_top8"].as_array().unwrap().len(), 8);
    assert!(d.path().join("jsa_r100.csv").exists());
}

#[test]
fn convert_reports_the_spectrum_at_the_extinction_peak() {
    let d = tempfile::tempdir().unwrap();
    let cfg = configs().join("measured_device.json");
    run(d.path(), &["--config", cfg.to_str().unwrap(), "convert"]);
    let v = read_json(&d.path().join("convert.json"));
    let peak = v["zeta_db_peak"].as_f64().unwrap();
    // 1 + 4·78.5²/(8.02·48.3) on resonance
    assert!((peak - 36.21).abs() < 0.01, "{peak}");
    let text = std::fs::read_to_string(d.path().join("convert.csv")).unwrap();
    let max_row = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(6).unwrap().parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(max_row <= peak + 1e-9 && max_row > peak - 0.01, "{max_row} vs {peak}");
}

#[test]
fn ghz_config_is_converted_to_rad_s() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    std::fs::write(&cfg, r#"{"device": {"gamma_ghz": 4.0, "g_ghz": 12.0, "gamma_L2_ghz": 1.0}}"#).unwrap();
    run(d.path(), &["--config", cfg.to_str().unwrap(), "cascade"]);
    let m = read_json(&d.path().join("manifest.json"));
    let dev = &m["config"]["device"];
    let two_pi_g = 2.0 * std::f64::consts::PI * 1e9;
    assert!((dev["gamma_rad_s"].as_f64().unwrap() / (4.0 * two_pi_g) - 1.0).abs() < 1e-14);
    assert!((dev["g_rad_s"].as_f64().unwrap() / (12.0 * two_pi_g) - 1.0).abs() < 1e-14);
    assert!(dev.get("gamma_ghz").is_none());
}

#[test]
fn negative_loss_is_a_validation_error_naming_the_field() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    std::fs::write(&cfg, r#"{"device": {"gamma_L1_rad_s": -1e9}, "purity": {"ratios": [0.2]}}"#).unwrap();
    let o = bin().arg("--out-dir").arg(d.path()).arg("--config").arg(&cfg).arg("design").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("gamma_L1"), "{err}");
    // every problem is listed, not just the first
    assert!(err.contains("purity.ratios"), "{err}");
    assert!(!d.path().join("design.json").exists());
}

#[test]
fn pumped_fit_without_idler_files_lists_expected_columns() {
    let d = tempfile::tempdir().unwrap();
    run(d.path(), &["synth", "--model", "pumped"]);
    let map = d.path().join("map.csv");
    let o = bin()
        .arg("--out-dir")
        .arg(d.path())
        .args(["fit", "--stage", "pumped", "--signal-nm", "1550", "--linear", "x.json", "--map"])
        .arg(&map)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("wavelength_nm, p_iplus_w, p_iminus_w, dataset_id"), "{err}");

    let o = bin()
        .arg("--out-dir")
        .arg(d.path())
        .args(["fit", "--stage", "pumped", "--signal-nm", "1550", "--linear", "x.json", "--idler", "missing.csv", "--map"])
        .arg(&map)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing.csv") && err.contains("p_iminus_w"), "{err}");
}

#[test]
fn missing_map_column_is_reported() {
    let d = tempfile::tempdir().unwrap();
    let map = d.path().join("m.csv");
    std::fs::write(&map, "wavelength_nm,transmission\n1550,0.1\n").unwrap();
    let o = bin()
        .arg("--out-dir")
        .arg(d.path())
        .args(["fit", "--stage", "linear", "--signal-nm", "1550", "--map"])
        .arg(&map)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("voltage_V") && err.contains("expected columns: wavelength_nm, voltage_V, transmission"), "{err}");
}

#[test]
fn missing_input_file_is_an_io_error() {
    let d = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("--out-dir")
        .arg(d.path())
        .args(["fit", "--stage", "linear", "--signal-nm", "1550", "--map", "does-not-exist.csv"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn synthetic_maps_round_trip_through_both_fit_stages() {
    let d = tempfile::tempdir().unwrap();
    let lin = d.path().join("lin");
    let pumped = d.path().join("pumped");
    run(&lin, &["--seed", "5", "synth", "--noise", "0"]);
    let truth = read_json(&lin.join("truth.json"));
    let s = truth["signal_nm"].as_f64().unwrap().to_string();
    let map = lin.join("map.csv");
    let f1 = d.path().join("f1");
    run(&f1, &["fit", "--stage", "linear", "--signal-nm", &s, "--map", map.to_str().unwrap()]);
    let fit = read_json(&f1.join("fit.json"));
    assert_eq!(fit["stage"], "linear-CMM");
    let g = fit["estimates"].as_array().unwrap().iter().find(|e| e["name"] == "g").unwrap()["value"].as_f64().unwrap();
    assert!((g / 78.5e9 - 1.0).abs() < 1e-6, "{g}");

    run(&pumped, &["--seed", "5", "synth", "--model", "pumped", "--noise", "0"]);
    let truth = read_json(&pumped.join("truth.json"));
    let s = truth["signal_nm"].as_f64().unwrap().to_string();
    let f2 = d.path().join("f2");
    run(
        &f2,
        &[
            "fit",
            "--stage",
            "pumped",
            "--signal-nm",
            &s,
            "--map",
            pumped.join("map.csv").to_str().unwrap(),
            "--idler",
            pumped.join("idler.csv").to_str().unwrap(),
            "--linear",
            f1.join("fit.json").to_str().unwrap(),
        ],
    );
    let fit = read_json(&f2.join("fit.json"));
    assert_eq!(fit["stage"], "pumped-CMM");
    let fca = fit["estimates"][0]["value"].as_f64().unwrap();
    assert!((fca / 10e9 - 1.0).abs() < 1e-4, "{fca}");
    assert_eq!(fit["delta_nl"].as_array().unwrap().len(), 5);
}

/// Header rows of every CSV the tool writes, produced by actually running it.
fn emitted_headers() -> Vec<(String, String)> {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    run(&p.join("spectrum"), &["spectrum"]);
    run(&p.join("synth"), &["synth", "--model", "pumped"]);
    run(&p.join("shape"), &["shape"]);
    run(&p.join("sweep"), &["sweep", "--g", "10", "--ql", "100"]);
    run(&p.join("fdm"), &["spectrum", "--model", "fdm"]);
    vec![
        ("spectrum.csv".into(), first_line(&p.join("spectrum/spectrum.csv"))),
        ("map.csv".into(), first_line(&p.join("fdm/map.csv"))),
        ("map.csv+id".into(), first_line(&p.join("synth/map.csv"))),
        ("idler.csv".into(), first_line(&p.join("synth/idler.csv"))),
        ("emission.csv".into(), first_line(&p.join("shape/emission.csv"))),
        ("control.csv".into(), first_line(&p.join("shape/control.csv"))),
        ("sweep.csv".into(), first_line(&p.join("sweep/sweep.csv"))),
    ]
}

#[test]
fn csv_headers_match_help_and_golden_file() {
    let headers = emitted_headers();
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/headers.txt")).unwrap();
    let rendered: String = headers.iter().map(|(f, h)| format!("{f} {h}\n")).collect();
    assert_eq!(rendered, golden);

    let help = bin().arg("--help").output().unwrap();
    let help = String::from_utf8(help.stdout).unwrap();
    let documented = |file: &str| -> String {
        help.lines()
            .find_map(|l| l.trim_start().strip_prefix(file).map(|rest| rest.trim().to_string()))
            .unwrap_or_else(|| panic!("{file} not documented in --help"))
    };
    for (file, header) in &headers {
        match file.as_str() {
            "map.csv" => assert_eq!(format!("{header}[,dataset_id]"), documented("map.csv")),
            "map.csv+id" => assert_eq!(header.replace(",dataset_id", "[,dataset_id]"), documented("map.csv")),
            f => assert_eq!(header, &documented(f), "{f}"),
        }
    }
}
