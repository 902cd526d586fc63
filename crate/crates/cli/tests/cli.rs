use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn polqkd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polqkd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn simulate_is_reproducible() {
    let d = TempDir::new().unwrap();
    for out in ["a", "b"] {
        let o = polqkd(d.path(), &["simulate", "--seed", "42", "--n-slots", "200000", "--out-dir", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["events.csv", "events.json", "resolved_config.toml"] {
        let a = std::fs::read(d.path().join("a").join(f)).unwrap();
        let b = std::fs::read(d.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn resolved_snapshot_reproduces_run() {
    let d = TempDir::new().unwrap();
    write(d.path(), "c.toml", "[run]\nn_slots = 100000\nseed = 5\n[source]\nmean_photon_number = 0.3\n");
    let o = polqkd(d.path(), &["simulate", "--config", "c.toml", "--out-dir", "a"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = polqkd(d.path(), &["simulate", "--config", "a/resolved_config.toml", "--out-dir", "b"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        std::fs::read(d.path().join("a/events.csv")).unwrap(),
        std::fs::read(d.path().join("b/events.csv")).unwrap()
    );
}

#[test]
fn validation_errors_exit_1() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&polqkd(d.path(), &["simulate", "--n-slots", "0"])), 1);
    write(d.path(), "bad.toml", "[source]\nmean_photon = 0.1\n");
    let o = polqkd(d.path(), &["simulate", "--config", "bad.toml"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("mean_photon"), "{}", stderr(&o));
    assert_eq!(code(&polqkd(d.path(), &["no-such-command"])), 1);
    assert_eq!(code(&polqkd(d.path(), &["--help"])), 0);
}

#[test]
fn missing_input_exits_2() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&polqkd(d.path(), &["analyze", "nope.csv"])), 2);
    assert_eq!(code(&polqkd(d.path(), &["simulate", "--config", "nope.toml"])), 2);
}

#[test]
fn empty_run_gives_header_and_no_data_report() {
    let d = TempDir::new().unwrap();
    write(d.path(), "c.toml", "[run]\nn_slots = 1000\n[source]\nmean_photon_number = 0.0\n[detector]\ndark_rate_hz = 0.0\n");
    let o = polqkd(d.path(), &["simulate", "--config", "c.toml"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(d.path().join("events.csv")).unwrap();
    assert_eq!(text.trim(), "slot_index,seq_pos,channel,time_ps");

    let o = polqkd(d.path(), &["analyze", "events.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&d.path().join("report.json"));
    assert_eq!(r["no_data"], Value::Bool(true));
    assert!(r["qber"]["overall"].is_null());
    assert!(r["encoding_agreement"].is_null());
    assert!(r["filter"]["discard_fraction"].is_null());
}

#[test]
fn ideal_input_has_zero_qber() {
    let d = TempDir::new().unwrap();
    write(
        d.path(),
        "ideal.toml",
        "[run]\nn_slots = 400000\n[source]\nmean_photon_number = 0.5\n\
         [encoder]\ntotal_loss_db = 0.0\np_mis = 0.0\nextinction_ratio_db = \"inf\"\n\
         [detector]\ndecoder_efficiency = 1.0\ndetector_efficiency = 1.0\ndark_rate_hz = 0.0\n",
    );
    assert_eq!(code(&polqkd(d.path(), &["simulate", "--config", "ideal.toml"])), 0);
    let o = polqkd(d.path(), &["analyze", "events.csv", "--config", "ideal.toml"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&d.path().join("report.json"));
    assert_eq!(r["params_source"], "config");
    assert_eq!(r["qber"]["overall"].as_f64().unwrap(), 0.0);
    assert!(r["encoding_agreement"].as_f64().unwrap() > 0.99);
    let hist = &r["histograms"]["channels"]["D"];
    assert!(hist.as_array().unwrap().len() > 10);
}

#[test]
fn default_analysis_reproduces_reference_figures() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&polqkd(d.path(), &["simulate", "--n-slots", "10000000"])), 0);
    let o = polqkd(d.path(), &["analyze", "events.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&d.path().join("report.json"));
    assert_eq!(r["params_source"], "sidecar");
    let q = r["qber"]["overall"].as_f64().unwrap();
    let discard = r["filter"]["discard_fraction"].as_f64().unwrap();
    // finite extinction ratio adds about 0.17 % on top of p_mis
    assert!((0.006..0.011).contains(&q), "QBER {q}");
    assert!((0.05..0.12).contains(&discard), "discard {discard}");
    let counts = std::fs::read_to_string(d.path().join("slot_counts.csv")).unwrap();
    assert!(counts.starts_with("seq_pos,c_D,c_A,c_R,c_L\n"));
    assert_eq!(counts.lines().count(), 17);
}

#[test]
fn malformed_events_name_the_line() {
    let d = TempDir::new().unwrap();
    write(d.path(), "e.csv", "slot_index,seq_pos,channel,time_ps\n0,0,D,10\n1,1,A,abc\n");
    let o = polqkd(d.path(), &["analyze", "e.csv"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn skr_outputs() {
    let d = TempDir::new().unwrap();
    let o = polqkd(d.path(), &["skr", "--p-mis", "0.0069,0.025", "--out-dir", "two"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ratio = std::fs::read_to_string(d.path().join("two/skr_ratio.csv")).unwrap();
    let mut rows = 0;
    for line in ratio.lines().skip(1) {
        let r = line.split(',').nth(3).unwrap();
        if !r.is_empty() {
            assert!(r.parse::<f64>().unwrap() >= 1.19, "{line}");
            rows += 1;
        }
    }
    assert_eq!(rows, 121);
    let sweep = std::fs::read_to_string(d.path().join("two/skr_pmis_0.0069.csv")).unwrap();
    assert!(sweep.starts_with("distance_km,loss_db,skr_bps,p_c,e_tot,e1_bar,pc1_lower\n"));
    let side = json(&d.path().join("two/skr_params.json"));
    assert_eq!(side["runs"].as_array().unwrap().len(), 2);

    let o = polqkd(d.path(), &["skr", "--p-mis", "0.0069", "--d-min", "0", "--d-max", "5", "--step", "10", "--out-dir", "one"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!d.path().join("one/skr_ratio.csv").exists());
    let sweep = std::fs::read_to_string(d.path().join("one/skr_pmis_0.0069.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 2);
}

#[test]
fn g2fit_round_trip_and_errors() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&polqkd(d.path(), &["gen-fixtures", "--seed", "3"])), 0);
    let o = polqkd(d.path(), &["g2fit", "g2_histogram.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit = json(&d.path().join("g2_fit.json"));
    let g2 = fit["g2_zero"].as_f64().unwrap();
    assert!((g2 / 0.0055 - 1.0).abs() < 0.2, "g2 {g2}");

    write(d.path(), "nocol.csv", "t_ns,hits\n0,1\n");
    let o = polqkd(d.path(), &["g2fit", "nocol.csv"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("counts"), "{}", stderr(&o));

    let mut narrow = String::from("t_ns,counts\n");
    for k in -500..500 {
        narrow.push_str(&format!("{},{}\n", k as f64 * 0.05, 10));
    }
    write(d.path(), "narrow.csv", &narrow);
    let o = polqkd(d.path(), &["g2fit", "narrow.csv"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("100"), "{}", stderr(&o));
}

#[test]
fn stability_outputs_and_errors() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&polqkd(d.path(), &["gen-fixtures", "--seed", "4"])), 0);
    let o = polqkd(d.path(), &["stability", "stokes.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&d.path().join("stability.json"));
    let beta = r["nsd"]["beta"].as_f64().unwrap();
    assert!((beta - 1.16).abs() < 0.1, "beta {beta}");
    assert!(d.path().join("spectrum.csv").exists());

    let mut constant = String::from("t_s,s1,s2,s3\n");
    for k in 0..50 {
        constant.push_str(&format!("{},0,1,0\n", k as f64 * 0.1));
    }
    write(d.path(), "const.csv", &constant);
    let o = polqkd(d.path(), &["stability", "const.csv", "--out-dir", "c"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&d.path().join("c/stability.json"));
    assert_eq!(r["mean_error"].as_f64().unwrap(), 0.0);
    assert!(r["nsd"].is_null());

    write(d.path(), "back.csv", "t_s,s1,s2,s3\n0,0,1,0\n1,0,1,0\n0.5,0,1,0\n");
    assert_eq!(code(&polqkd(d.path(), &["stability", "back.csv"])), 1);

    write(d.path(), "unnorm.csv", "t_s,s1,s2,s3\n0,0,2,0\n1,0,2,0\n2,0,2,0\n");
    assert_eq!(code(&polqkd(d.path(), &["stability", "unnorm.csv"])), 1);
    assert_eq!(code(&polqkd(d.path(), &["stability", "unnorm.csv", "--normalize"])), 0);

    // antipodal samples leave no mean direction
    write(d.path(), "flip.csv", "t_s,s1,s2,s3\n0,1,0,0\n1,-1,0,0\n");
    assert_eq!(code(&polqkd(d.path(), &["stability", "flip.csv"])), 3);
}
