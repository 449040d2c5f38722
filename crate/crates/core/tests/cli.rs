use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn stpn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stpn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = stpn(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, format!("{header}\n{}\n", rows.join("\n"))).unwrap();
    path
}

#[test]
fn synth_household_has_five_columns_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--seed", "7", "--output-dir", "a", "synth", "--kind", "household"]);
    ok(dir.path(), &["--seed", "7", "--output-dir", "b", "synth", "--kind", "household"]);
    let a = std::fs::read_to_string(dir.path().join("a/synth.csv")).unwrap();
    assert_eq!(a.lines().next().unwrap(), "WBE,HVAC,LIGHTS,APPL,MELS");
    assert_eq!(a, std::fs::read_to_string(dir.path().join("b/synth.csv")).unwrap());
    assert!(dir.path().join("a/synth.csv.meta.json").exists());
}

#[test]
fn bad_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = stpn(dir.path(), &["synth", "--kind", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let out = stpn(dir.path(), &["--error-json", "synth", "--kind", "bogus"]);
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "alphabet = 4\ncolour = \"red\"\n").unwrap();
    let out = stpn(dir.path(), &["--config", "c.toml", "synth", "--kind", "household"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn config_values_apply_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--output-dir", ".", "synth", "--kind", "coupled_chains", "--length", "3000"]);
    std::fs::write(d.join("c.toml"), "alphabet = 3\noutput_dir = \"fromfile\"\n").unwrap();
    ok(d, &["--config", "c.toml", "partition", "--input", "synth.csv", "--method", "uniform"]);
    let scheme = json(d.join("fromfile/scheme_driver.json"));
    assert_eq!(scheme["alphabet_size"], 3);
    ok(d, &["--config", "c.toml", "partition", "--input", "synth.csv", "--method", "uniform", "--alphabet", "5"]);
    assert_eq!(json(d.join("fromfile/scheme_driver.json"))["alphabet_size"], 5);
}

#[test]
fn mi_table_peaks_at_true_lag_and_full_network() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["--seed", "2", "synth", "--kind", "coupled_chains", "--length", "20000", "--delay", "3"],
    );
    ok(d, &["mi", "--input", "synth.csv", "--lags", "1,2,3,4,6", "--method", "uniform", "--alphabet", "4"]);
    let table = std::fs::read_to_string(d.join("mi_table.csv")).unwrap();
    let rows: Vec<(String, String, usize, f64)> = table
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].into(), f[1].into(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    let f1: Vec<&(String, String, usize, f64)> =
        rows.iter().filter(|r| r.0 == "driver" && r.1 == "f1").collect();
    let best = f1.iter().max_by(|a, b| a.3.partial_cmp(&b.3).unwrap()).unwrap();
    assert_eq!(best.2, 3);
    let dot = std::fs::read_to_string(d.join("network.dot")).unwrap();
    assert_eq!(dot.matches(" -> ").count(), 4 * 3);
    let net = json(d.join("network.json"));
    assert_eq!(net["rp"].as_array().unwrap().len(), 12);
}

#[test]
fn mi_needs_two_streams() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<String> = (0..50).map(|i| format!("{}", i % 7)).collect();
    write_csv(dir.path(), "one.csv", "x", &rows);
    let out = stpn(dir.path(), &["mi", "--input", "one.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn copy_pair_predicts_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // b(t) = a(t-1) with a cycling through four levels
    let pattern = [0.5, 1.5, 2.5, 3.5, 3.5, 1.5];
    let rows: Vec<String> = (0..600)
        .map(|t| {
            let a = pattern[t % pattern.len()];
            let b = pattern[(t + pattern.len() - 1) % pattern.len()];
            format!("{a},{b}")
        })
        .collect();
    write_csv(d, "pair.csv", "a,b", &rows);
    let args = ["predict", "--input", "pair.csv", "--source", "a", "--target", "b", "--alphabet", "4", "--method", "uniform"];
    ok(d, &args);
    assert_eq!(json(d.join("prediction_summary.json"))["symbolic_accuracy"], 1.0);
    ok(d, &[&args[..], &["--smoothing", "0"]].concat());
    let summary = json(d.join("prediction_summary.json"));
    assert_eq!(summary["symbolic_accuracy"], 1.0);
    assert_eq!(summary["mse"], 0.0);
}

#[test]
fn predict_reports_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<String> = (0..50).map(|i| format!("{},{}", i % 3, i % 5)).collect();
    write_csv(dir.path(), "d.csv", "a,b", &rows);
    let out = stpn(dir.path(), &["predict", "--input", "d.csv", "--source", "a", "--target", "zz"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zz"));
}

#[test]
fn saved_model_predicts_like_the_fitted_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--kind", "coupled_chains", "--length", "4000"]);
    ok(d, &["--output-dir", "fit", "predict", "--input", "synth.csv", "--source", "driver", "--target", "f1"]);
    ok(
        d,
        &["--output-dir", "again", "predict", "--input", "synth.csv", "--source", "driver", "--target", "f1", "--model-dir", "fit"],
    );
    let fit = std::fs::read_to_string(d.join("fit/prediction.csv")).unwrap();
    let again = std::fs::read_to_string(d.join("again/prediction.csv")).unwrap();
    // the reloaded model covers the whole file; its tail is the fitted run
    let fit_rows: Vec<&str> = fit.lines().skip(1).collect();
    assert!(again.ends_with(&(fit_rows.join("\n") + "\n")));
    assert_eq!(
        std::fs::read_to_string(d.join("fit/model.json")).unwrap(),
        std::fs::read_to_string(d.join("again/model.json")).unwrap()
    );
}

#[test]
fn disagg_improves_household_and_keeps_feasible_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "3", "synth", "--kind", "household"]);
    ok(d, &["disagg", "--input", "synth.csv", "--aggregate", "WBE", "--predict", "--truth", "HVAC,LIGHTS,APPL,MELS"]);
    let s = json(d.join("disagg_summary.json"));
    assert!(s["total_mse_after"].as_f64().unwrap() <= s["total_mse_before"].as_f64().unwrap());
    assert!(s["max_feasibility_residual"].as_f64().unwrap() <= 1e-9);

    ok(
        d,
        &["--output-dir", "id", "disagg", "--input", "synth.csv", "--aggregate", "WBE", "--predictions", "HVAC,LIGHTS,APPL,MELS"],
    );
    let comps = std::fs::read_to_string(d.join("id/components.csv")).unwrap();
    let synth = std::fs::read_to_string(d.join("synth.csv")).unwrap();
    for (c, o) in comps.lines().skip(1).zip(synth.lines().skip(1)) {
        let c: Vec<&str> = c.split(',').skip(1).collect();
        let o: Vec<&str> = o.split(',').skip(1).collect();
        assert_eq!(c, o);
    }
    assert_eq!(json(d.join("id/disagg_summary.json"))["total_objective"], 0.0);
}

#[test]
fn disagg_without_aggregate_column_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--kind", "household"]);
    let out = stpn(d, &["disagg", "--input", "synth.csv", "--aggregate", "TOTAL", "--predictions", "HVAC,MELS"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("TOTAL"));
}

#[test]
fn eval_hand_case_and_alignment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_csv(d, "p.csv", "v", &["1".into(), "2".into(), "3".into()]);
    write_csv(d, "a.csv", "v", &["2".into(), "2".into(), "5".into()]);
    ok(d, &["eval", "--predicted", "p.csv", "--predicted-column", "v", "--actual", "a.csv", "--actual-column", "v"]);
    let mse = json(d.join("eval.json"))["mse"].as_f64().unwrap();
    assert!((mse - 5.0 / 3.0).abs() < 1e-15);

    ok(d, &["eval", "--predicted", "a.csv", "--predicted-column", "v", "--actual", "a.csv", "--actual-column", "v"]);
    let report = json(d.join("eval.json"));
    assert_eq!(report["mse"], 0.0);
    assert_eq!(report["symbolic"]["accuracy"], 1.0);

    write_csv(d, "short.csv", "v", &["2".into(), "2".into()]);
    let out = stpn(d, &["eval", "--predicted", "short.csv", "--predicted-column", "v", "--actual", "a.csv", "--actual-column", "v"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains('2') && err.contains('3'), "{err}");
}

#[test]
fn unknown_experiment_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = stpn(dir.path(), &["experiments", "run", "--only", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}
