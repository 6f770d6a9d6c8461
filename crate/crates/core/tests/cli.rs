use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spdc_car::analytic::{car_closed_form, RateModelParams};
use spdc_car::sim::pump_photon_flux;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spdc-car"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const NO_JITTER: [&str; 6] = [
    "--set",
    "detector_signal.timing_jitter=0",
    "--set",
    "detector_idler.timing_jitter=0",
    "--set",
    "tia.extra_jitter=0",
];

#[test]
fn simulate_short_run_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--seed", "1", "--duration", "0.001"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sig = fs::read_to_string(dir.path().join("tags_signal.csv")).unwrap();
    assert!(sig.starts_with("detector_id,time_seconds\n"));
    assert!(sig.lines().count() < 50);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["spec_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_is_deterministic() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&d1, &d2] {
        let o = run(d.path(), &["simulate", "--seed", "7", "--duration", "0.5", "--binary"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["tags_signal.ptag", "tags_idler.ptag"] {
        assert_eq!(fs::read(d1.path().join(f)).unwrap(), fs::read(d2.path().join(f)).unwrap());
    }
    let o = run(d1.path(), &["--sequential", "simulate", "--seed", "7", "--duration", "0.5", "--binary"]);
    assert!(o.status.success());
    assert_eq!(fs::read(d1.path().join("tags_idler.ptag")).unwrap(), fs::read(d2.path().join("tags_idler.ptag")).unwrap());
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--config", "/nonexistent/setup.toml", "validate"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/setup.toml"), "{}", stderr(&o));
}

#[test]
fn invalid_config_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["--set", "arm_signal.transmission=1.5", "--set", "detector_idler.quantum_efficiency=-1", "validate"],
    );
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("arm_signal.transmission") && err.contains("quantum_efficiency"), "{err}");
    let ok = run(dir.path(), &["validate"]);
    assert!(ok.status.success() && stdout(&ok).starts_with("ok"));
}

#[test]
fn car_from_simulated_tags() {
    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<&str> = NO_JITTER.to_vec();
    args.extend(["simulate", "--seed", "3", "--duration", "20"]);
    assert!(run(dir.path(), &args).status.success());
    let sig = dir.path().join("tags_signal.csv");
    let idl = dir.path().join("tags_idler.csv");
    let out = dir.path().join("analysis");
    let o = run(&out, &["car", "--signal", sig.to_str().unwrap(), "--idler", idl.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("CAR (peak / background)"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("car.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "ok");
    let e = &report["estimate"];
    assert!((e["peak_delay"].as_f64().unwrap() - 26e-9).abs() < 0.25e-9);
    // 20 s: ~17 true counts over ~0.15 accidentals per bin
    let car = e["car"].as_f64().unwrap();
    let sigma = e["car_uncertainty"].as_f64().unwrap();
    assert!((car - 113.37).abs() < 3.0 * sigma, "{car} ± {sigma}");
    assert!(out.join("histogram.json").exists());
}

#[test]
fn car_reports_bad_tag_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.csv");
    fs::write(&f, "detector_id,time_seconds\nsignal,0.1\nsignal,oops\n").unwrap();
    let o = run(dir.path(), &["car", "--tags", f.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn car_on_empty_tags_is_undefined_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("empty.csv");
    fs::write(&f, "detector_id,time_seconds\n").unwrap();
    let o = run(dir.path(), &["car", "--tags", f.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("car.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "undefined");
    assert!(report["warning"].is_string());
}

#[test]
fn overlap_reports_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["overlap"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("signal 1562.0000-1569.2000 nm, idler 1522.0000-1529.2000 nm, fraction 0.450000"), "{text}");
    assert!(text.contains("exact_frequency"));
    let o = run(dir.path(), &["overlap", "--signal-band", "1550nm,1560nm", "--idler-band", "1531.2nm,1541.2nm", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["linear"]["overlap_fraction"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let o = run(dir.path(), &["overlap", "--signal-band", "1578nm,1562nm"]);
    assert!(!o.status.success());
}

#[test]
fn detune_grid_is_one_sided() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--set", "source.pump_power=\"6 mW\"", "detune", "--from", "771.3nm", "--to", "774.3nm", "--step", "0.1nm"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("detune.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    assert_eq!(rows.len(), 31);
    let deg = 772.8e-9;
    for r in &rows {
        if r[0] > deg + 1e-13 {
            assert_eq!(r[3], 0.0, "{r:?}");
        }
    }
    let at_deg = rows.iter().find(|r| (r[0] - deg).abs() < 1e-13).unwrap();
    assert!((at_deg[3] - 0.45).abs() < 1e-9, "{at_deg:?}");
    assert!(rows.iter().any(|r| r[0] < deg - 1e-13 && r[3] > 0.0));
    let o = run(dir.path(), &["detune"]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("detune.csv")).unwrap().lines().count(), 1);
    let reference = spdc_car::config::REFERENCE_CONFIG;
    let cut = reference.find("[phase_matching]").unwrap();
    let cfg = dir.path().join("no_pm.toml");
    fs::write(&cfg, &reference[..cut]).unwrap();
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "detune", "--pump-wavelengths", "772.8nm"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("[phase_matching]"), "{}", stderr(&o));
}

#[test]
fn fit_alpha_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("car.csv");
    let mut csv = String::from("power_w,car\n");
    for i in 0..7 {
        let p = (2.0 + 14.0 * i as f64 / 6.0) * 1e-3;
        let car = car_closed_form(&RateModelParams {
            alpha: 6e-11,
            n: pump_photon_flux(p, 772.8e-9),
            l: 1e-3,
            d: 2000.0,
            r: 500e-12,
            f: 0.45,
        })
        .unwrap();
        csv += &format!("{p},{}\n", car + 1.0);
    }
    fs::write(&data, csv).unwrap();
    let o = run(dir.path(), &["fit-alpha", "--data", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit_alpha.json")).unwrap()).unwrap();
    let alpha = v["fit"]["alpha"].as_f64().unwrap();
    assert!((alpha / 6e-11 - 1.0).abs() < 0.02, "{alpha}");
    let b = v["fit"]["brightness_at_reference"].as_f64().unwrap();
    assert!((b / 1.867e6 - 1.0).abs() < 0.02, "{b}");

    fs::write(&data, "power_w,car\n0.002,50\n0.004,60\n").unwrap();
    let o = run(dir.path(), &["fit-alpha", "--data", data.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("at least 3"), "{}", stderr(&o));
}

#[test]
fn sweep_power_rows_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--set", "run.integration_time=2", "sweep-power", "--seed", "4", "--powers", "8mW"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sweep_power.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let o = run(dir.path(), &["sweep-power", "--seed", "4", "--powers", "8mW,2mW"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("ascending"), "{}", stderr(&o));
}

#[test]
fn tm_analyzer_car_near_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["--set", "run.analyzer_polarization=\"TM\"", "--set", "run.integration_time=20", "--set", "source.pump_power=\"1 mW\"", "car", "--seed", "9"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("car.json")).unwrap()).unwrap();
    let e = &report["estimate"];
    let (car, sigma) = (e["car"].as_f64().unwrap(), e["car_uncertainty"].as_f64().unwrap());
    assert!((car - 1.0).abs() <= 3.0 * sigma, "{car} ± {sigma}");
}
