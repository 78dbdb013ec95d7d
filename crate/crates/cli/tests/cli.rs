use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybrid-forecast"))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn pets() -> (PathBuf, PathBuf) {
    let data = repo_root().join("data");
    (data.join("synthetic_pets.csv"), data.join("synthetic_pets.schema.json"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_flag() {
    let cases: &[(&str, &[&str])] = &[
        ("prep", &[]),
        ("correlate", &[]),
        ("importance", &["--target", "--trees", "--max-depth", "--mtry"]),
        (
            "forecast",
            &["--horizon", "--grid-search", "--validation-years", "--grid-step", "--alpha", "--holdout", "--trees"],
        ),
        (
            "sensitivity",
            &["--target", "--factor", "--delta", "--one-sided", "--model", "--base", "--sobol-samples", "--range-fraction"],
        ),
        ("evaluate", &["--predicted", "--column"]),
    ];
    for (cmd, extra) in cases {
        let o = run(&[cmd, "--help"]);
        assert!(o.status.success(), "{cmd}");
        let text = String::from_utf8_lossy(&o.stdout);
        for flag in ["--input", "--schema", "--seed", "--out-dir", "--config"].iter().chain(extra.iter()) {
            assert!(text.contains(flag), "{cmd} help lacks {flag}");
        }
    }
}

#[test]
fn usage_errors_exit_one_with_single_line() {
    let (csv, _) = pets();
    for args in [
        vec!["forecast", "--input", s(&csv), "--bogus"],
        vec!["nonsense"],
        vec!["prep"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("error[usage]: "), "{err}");
    }
}

#[test]
fn prep_reports_missing_rate() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("year");
    for j in 0..10 {
        text.push_str(&format!(",c{j}"));
    }
    text.push('\n');
    // 100 x 10 cells, 23 interior gaps.
    let mut gaps = 0;
    for r in 0..100 {
        text.push_str(&format!("{}", 1900 + r));
        for j in 0..10 {
            let gap = r > 0 && r < 99 && (r * 10 + j) % 43 == 0 && gaps < 23;
            if gap {
                gaps += 1;
                text.push(',');
            } else {
                text.push_str(&format!(",{}", (r * (j + 1)) as f64 + ((r * 7 + j * 3) % 11) as f64));
            }
        }
        text.push('\n');
    }
    assert_eq!(gaps, 23);
    let input = write(&dir, "gappy.csv", &text);
    let out = dir.path().join("out");
    let o = run(&["prep", "--input", &input, "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&out.join("prep_report.json"));
    assert!((report["missing_rate"].as_f64().unwrap() - 0.023).abs() < 1e-12);
    assert_eq!(report["missing_cells"], 23);
    for c in report["columns"].as_array().unwrap() {
        let p = c["ks_p_value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    let cleaned = fs::read_to_string(out.join("cleaned.csv")).unwrap();
    assert!(!cleaned.contains(",,") && !cleaned.lines().any(|l| l.ends_with(',')));
}

#[test]
fn prep_leaves_clean_input_unchanged() {
    let (csv, schema) = pets();
    let dir = TempDir::new().unwrap();
    let o = run(&["prep", "--input", s(&csv), "--schema", s(&schema), "--out-dir", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(&csv).unwrap(), fs::read(dir.path().join("cleaned.csv")).unwrap());
    let meta = json(&dir.path().join("run_metadata.json"));
    assert_eq!(meta["command"], "prep");
    assert_eq!(meta["seed"], 0);
}

#[test]
fn malformed_csv_names_row_and_column() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "bad.csv", "year,a,b\n2000,1,2\n2001,x,3\n");
    let o = run(&["prep", "--input", &input, "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error[data]: "), "{err}");
    assert!(err.contains("row 3") && err.contains("`a`"), "{err}");
    assert_eq!(err.lines().count(), 1);
    assert!(!dir.path().join("run_metadata.json").exists());
}

#[test]
fn correlate_matches_hand_ranks() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "four.csv", "year,x,y,z\n1,1,1,5\n2,2,3,5\n3,2,2,5\n4,4,4,5\n");
    let o = run(&["correlate", "--input", &input, "--out-dir", s(dir.path())]);
    assert!(o.status.success());
    let err = stderr(&o);
    assert_eq!(err.lines().filter(|l| l.starts_with("warning: ")).count(), 1, "{err}");
    assert!(err.contains("`z`"));
    let text = fs::read_to_string(dir.path().join("correlation.csv")).unwrap();
    // ranks x = [1, 2.5, 2.5, 4], y = [1, 3, 2, 4]: 4.5 / sqrt(5 * 4.5)
    assert_eq!(
        text,
        "variable,x,y,z\nx,1.000000,0.948683,\ny,0.948683,1.000000,\nz,,,\n"
    );
}

fn dominant_fixture(dir: &TempDir) -> String {
    let mut text = String::from("year,decoy_a,signal,decoy_b,y\n");
    for i in 0..40u64 {
        let a = ((i * 37 + 11) % 17) as f64;
        let x = ((i * 13 + 5) % 23) as f64;
        let b = ((i * 29 + 3) % 19) as f64;
        text.push_str(&format!("{},{a},{x},{b},{}\n", 1980 + i, 3.0 * x + 0.01 * ((i % 3) as f64)));
    }
    write(dir, "dominant.csv", &text)
}

#[test]
fn importance_ranks_dominant_feature_first_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = dominant_fixture(&dir);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let o = run(&["importance", "--input", &input, "--target", "y", "--trees", "100", "--seed", "5", "--out-dir", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push((
            fs::read(out.join("importance_y.csv")).unwrap(),
            fs::read(out.join("importance.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    let first = csv.lines().nth(1).unwrap();
    assert!(first.starts_with("signal,"), "{csv}");
    let raw: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    assert!(raw > 0.5);

    let o = run(&["importance", "--input", &input, "--target", "missing", "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["importance", "--input", &input, "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2), "no target given and no schema");
}

fn forecast_args<'a>(csv: &'a Path, schema: &'a Path, out: &'a Path) -> Vec<&'a str> {
    vec!["forecast", "--input", s(csv), "--schema", s(schema), "--seed", "0", "--out-dir", s(out)]
}

#[test]
fn forecast_matches_golden_report() {
    let (csv, schema) = pets();
    let dir = TempDir::new().unwrap();
    let o = run(&forecast_args(&csv, &schema, dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for name in ["forecast_report.json", "forecast.csv"] {
        assert_eq!(
            fs::read(dir.path().join(name)).unwrap(),
            fs::read(golden.join(name)).unwrap(),
            "{name} differs from the golden copy"
        );
    }
}

#[test]
fn forecast_cells_combine_components() {
    let (csv, schema) = pets();
    let dir = TempDir::new().unwrap();
    let mut args = forecast_args(&csv, &schema, dir.path());
    args.extend(["--alpha", "0.4", "--horizon", "4"]);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&dir.path().join("forecast_report.json"));
    assert_eq!(report["years"].as_array().unwrap().len(), 4);
    for t in report["targets"].as_array().unwrap() {
        let (a, b) = (t["weights"]["alpha"].as_f64().unwrap(), t["weights"]["beta"].as_f64().unwrap());
        assert_eq!((a, b), (0.4, 0.6));
        for c in t["rows"].as_array().unwrap() {
            let (rf, hw, comb) = (c["rf"].as_f64().unwrap(), c["hw"].as_f64().unwrap(), c["combined"].as_f64().unwrap());
            assert!((comb - (a * rf + b * hw)).abs() < 1e-9 * comb.abs().max(1.0));
        }
    }
}

#[test]
fn forecast_rejects_zero_horizon() {
    let (csv, schema) = pets();
    let dir = TempDir::new().unwrap();
    let mut args = forecast_args(&csv, &schema, dir.path());
    args.extend(["--horizon", "0"]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[data]: "));
    assert!(!dir.path().join("forecast_report.json").exists());
}

fn weights_of(report: &Value) -> Vec<(f64, f64, String)> {
    report["targets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            (
                t["weights"]["alpha"].as_f64().unwrap(),
                t["weights"]["beta"].as_f64().unwrap(),
                t["weight_source"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn grid_search_changes_weights_only_with_enough_history() {
    let (csv, schema) = pets();
    let dir = TempDir::new().unwrap();
    let short = dir.path().join("short.csv");
    let text = fs::read_to_string(&csv).unwrap();
    fs::write(&short, text.lines().take(11).collect::<Vec<_>>().join("\n") + "\n").unwrap();

    let run_one = |input: &Path, grid: bool, tag: &str| -> Value {
        let out = dir.path().join(tag);
        let mut args = forecast_args(input, &schema, &out);
        args.extend(["--trees", "100"]);
        if grid {
            args.push("--grid-search");
        }
        let o = run(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        json(&out.join("forecast_report.json"))
    };

    let fixed = run_one(&csv, false, "full_fixed");
    let grid = run_one(&csv, true, "full_grid");
    assert!(weights_of(&fixed).iter().all(|w| w.2 == "fixed" && (w.0, w.1) == (0.7, 0.3)));
    assert!(weights_of(&grid).iter().all(|w| w.2 == "grid_search"));
    let strip = |mut v: Value| {
        for t in v["targets"].as_array_mut().unwrap() {
            for k in ["weights", "weight_source", "validation_mae", "rows"] {
                t.as_object_mut().unwrap().remove(k);
            }
        }
        v
    };
    assert_eq!(strip(fixed.clone()), strip(grid.clone()));

    // 10 rows cannot spare a 3-year validation window.
    let fixed = run_one(&short, false, "short_fixed");
    let grid = run_one(&short, true, "short_grid");
    assert!(weights_of(&grid).iter().all(|w| w.2 == "default_fallback" && (w.0, w.1) == (0.7, 0.3)));
    let targets = |v: &Value| {
        v["targets"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t["rows"].clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(targets(&fixed), targets(&grid));
}

#[test]
fn forecast_holdout_writes_comparison() {
    let (csv, schema) = pets();
    let dir = TempDir::new().unwrap();
    let mut args = forecast_args(&csv, &schema, dir.path());
    args.extend(["--holdout", "3", "--grid-search", "--trees", "100"]);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("holdout.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("target,model,mae,rmse,r2"));
    assert_eq!(table.lines().count(), 1 + 2 * 4);
    let report = json(&dir.path().join("forecast_report.json"));
    assert_eq!(report["evaluation"]["years"], serde_json::json!([2021, 2022, 2023]));
}

#[test]
fn forecast_reads_config_file() {
    let (csv, schema) = pets();
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "config.json", r#"{"horizon": 2, "forest": {"n_trees": 50, "seed": 9}}"#);
    let out = dir.path().join("out");
    let o = run(&["forecast", "--input", s(&csv), "--schema", s(&schema), "--config", &config, "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&out.join("forecast_report.json"));
    assert_eq!(report["seed"], 9);
    assert_eq!(report["years"], serde_json::json!([2024, 2025]));

    let bad = write(&dir, "bad.json", "{\"horizon\": \"three\"}");
    let o = run(&["forecast", "--input", s(&csv), "--schema", s(&schema), "--config", &bad, "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

/// `y = 100 + 1.5 x1`, `x2` unrelated; the last row has `x1 = 100`.
fn response_fixture(dir: &TempDir) -> String {
    let mut text = String::from("year,x1,x2,y\n");
    let x1 = [60.0, 72.0, 65.0, 80.0, 91.0, 77.0, 85.0, 95.0, 88.0, 104.0, 97.0, 100.0];
    for (i, x) in x1.iter().enumerate() {
        let x2 = 40.0 + ((i * 7 + 3) % 11) as f64;
        text.push_str(&format!("{},{x},{x2},{}\n", 2000 + i, 100.0 + 1.5 * x));
    }
    write(dir, "response.csv", &text)
}

#[test]
fn sensitivity_recovers_elasticity_and_dummy_factor() {
    let dir = TempDir::new().unwrap();
    let input = response_fixture(&dir);
    for sided in [None, Some("--one-sided")] {
        let mut args = vec![
            "sensitivity", "--input", &input, "--target", "y", "--model", "linear", "--sobol-samples", "4096",
            "--out-dir", s(dir.path()),
        ];
        args.extend(sided);
        let o = run(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        let r = json(&dir.path().join("sensitivity.json"));
        let f = r["factors"].as_array().unwrap();
        // 1.5 * 100 / 250: output rises 3% under a 5% input rise.
        assert!((f[0]["s"].as_f64().unwrap() - 0.6).abs() < 1e-9);
        assert!(f[1]["s"].as_f64().unwrap().abs() < 1e-9);
        assert!(f[1]["s1"].as_f64().unwrap().abs() < 3.0 * f[1]["s1_se"].as_f64().unwrap());
        assert!(f[1]["st"].as_f64().unwrap().abs() < 1e-9);
        assert!((f[0]["s1"].as_f64().unwrap() - 1.0).abs() < 0.05);
        assert_eq!(r["seed"], 0);
    }
}

#[test]
fn sensitivity_additive_sobol_is_balanced() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("year,x1,x2,y\n");
    for i in 0..12usize {
        let (a, b) = if i == 11 {
            (100.0, 100.0)
        } else {
            (80.0 + ((i * 5) % 13) as f64, 90.0 + ((i * 7 + 2) % 17) as f64)
        };
        text.push_str(&format!("{},{a},{b},{}\n", 2000 + i, a + b));
    }
    let input = write(&dir, "additive.csv", &text);
    let o = run(&[
        "sensitivity", "--input", &input, "--target", "y", "--model", "linear", "--sobol-samples", "16384", "--seed",
        "7", "--out-dir", s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("sensitivity.json"));
    for f in r["factors"].as_array().unwrap() {
        let s1 = f["s1"].as_f64().unwrap();
        assert!((0.45..=0.55).contains(&s1), "{s1}");
        assert!(f["st"].as_f64().unwrap() >= s1 - 0.02);
        assert_eq!(f["range"], serde_json::json!([90.0, 110.0]));
    }
    assert_eq!(r["sobol"]["n"], 16384);
    assert_eq!(r["seed"], 7);
}

#[test]
fn sensitivity_forest_is_reproducible() {
    let (csv, schema) = pets();
    let dir = TempDir::new().unwrap();
    let mut bytes = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}"));
        let o = run(&[
            "sensitivity", "--input", s(&csv), "--schema", s(&schema), "--target", "dogs", "--factor", "urban_income",
            "--trees", "60", "--sobol-samples", "256", "--out-dir", s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        bytes.push(fs::read(out.join("sensitivity.json")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    let o = run(&["sensitivity", "--input", s(&csv), "--schema", s(&schema), "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2), "two targets need --target");
}

#[test]
fn evaluate_scores_prediction_files() {
    let dir = TempDir::new().unwrap();
    let actual = write(&dir, "actual.csv", "year,v\n1,1\n2,2\n3,3\n");
    let perfect = write(&dir, "perfect.csv", "year,v\n1,1\n2,2\n3,3\n");
    let flat = write(&dir, "flat.csv", "year,v\n1,2\n2,2\n3,2\n");
    let o = run(&["evaluate", "--input", &actual, "--predicted", &perfect, "--predicted", &flat, "--out-dir", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("metrics.json"));
    let m = r["models"].as_array().unwrap();
    assert_eq!(m[0]["model"], "perfect");
    assert_eq!(m[0]["mae"].as_f64(), Some(0.0));
    assert_eq!(m[0]["r2"].as_f64(), Some(1.0));
    assert!((m[1]["mae"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!(m[1]["r2"].as_f64().unwrap().abs() < 1e-12);
    let table = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert_eq!(
        table,
        "model,mae,rmse,r2\nperfect,0.000000,0.000000,1.000000\nflat,0.666667,0.816497,0.000000\n"
    );

    let single = dir.path().join("single");
    let o = run(&["evaluate", "--input", &actual, "--predicted", &flat, "--out-dir", s(&single)]);
    assert!(o.status.success());
    assert!(!single.join("comparison.csv").exists());

    let short = write(&dir, "short.csv", "year,v\n1,1\n2,2\n");
    let o = run(&["evaluate", "--input", &actual, "--predicted", &short, "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("length mismatch"));

    let constant = write(&dir, "constant.csv", "year,v\n1,4\n2,4\n3,4\n");
    let o = run(&["evaluate", "--input", &constant, "--predicted", &flat, "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[numerical]: "));
}
