use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wgini(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wgini"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Data rows of a commented CSV, header included.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn column(text: &str, name: &str) -> Vec<String> {
    let rows = csv_rows(text);
    let j = rows[0].iter().position(|c| c == name).expect("column present");
    rows[1..].iter().map(|r| r[j].clone()).collect()
}

fn meta<'a>(text: &'a str, key: &str) -> &'a str {
    let prefix = format!("# {key}: ");
    text.lines()
        .find_map(|l| l.strip_prefix(prefix.as_str()))
        .unwrap_or_else(|| panic!("missing meta {key}"))
}

fn value(text: &str) -> f64 {
    column(text, "value")[0].parse().unwrap()
}

#[test]
fn corr_bvp1_closed() {
    let o = wgini(&["corr", "--family", "bvp1", "--delta", "5.87", "--weight", "power:1", "--method", "closed"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!((value(&s) - 0.170358).abs() < 5e-7);
    assert_eq!(meta(&s, "seed"), "42");
    assert!(meta(&s, "family").contains("delta=5.87"));
    assert!(!meta(&s, "version").is_empty());
}

#[test]
fn corr_normal_beta_weight_closed() {
    let o = wgini(&["corr", "--family", "normal", "--rho", "0.5", "--weight", "beta:2,2", "--method", "closed"]);
    assert_eq!(code(&o), 0);
    assert_eq!(value(&stdout(&o)), 0.5);
}

#[test]
fn corr_negative_rho_flag() {
    let o = wgini(&["corr", "--family", "normal", "--rho", "-0.6", "--method", "closed"]);
    assert_eq!(code(&o), 0);
    assert_eq!(value(&stdout(&o)), -0.6);
}

#[test]
fn corr_data_identical_columns_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    let body: String = (0..50).map(|i| format!("{0},{0}\n", (i as f64 * 0.37).sin())).collect();
    fs::write(&path, format!("x,y\n{body}")).unwrap();
    let p = path.to_str().unwrap();
    let o = wgini(&["corr", "--data", p, "--weight", "power:2", "--method", "empirical"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&stdout(&o)), 1.0);
}

#[test]
fn corr_data_rejects_closed_method() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    fs::write(&path, "x,y\n1,2\n2,3\n3,1\n").unwrap();
    let o = wgini(&["corr", "--data", path.to_str().unwrap(), "--method", "closed"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("supported alternatives"), "{err}");
    assert!(err.contains("empirical"), "{err}");
}

#[test]
fn corr_unsupported_combination_lists_alternatives() {
    let o = wgini(&[
        "corr", "--family", "bvp3", "--delta", "1", "--delta-x", "2", "--delta-y", "1.5", "--method", "regression",
    ]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("closed, empirical, oracle"), "{err}");
}

#[test]
fn corr_all_shows_triangle() {
    let o = wgini(&[
        "corr", "--family", "bvp2", "--delta", "2.1", "--delta-y", "0.5254", "--method", "all", "-n", "50000",
        "--resamples", "50",
    ]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let methods = column(&s, "method");
    assert_eq!(methods, ["closed_form", "regression_route", "empirical"]);
    let v: Vec<f64> = column(&s, "value").iter().map(|x| x.parse().unwrap()).collect();
    let se: f64 = column(&s, "std_error")[2].parse().unwrap();
    assert!((v[0] - v[1]).abs() < 1e-9);
    assert!((v[0] - v[2]).abs() < 3.0 * se, "{v:?} se {se}");
}

#[test]
fn sample_is_byte_reproducible() {
    let args = ["sample", "--family", "bvp2", "--delta", "2.1", "--delta-y", "0.5254", "-n", "5", "--seed", "7"];
    let a = wgini(&args);
    let b = wgini(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let s = stdout(&a);
    assert_eq!(csv_rows(&s).len(), 6);
    assert_eq!(meta(&s, "seed"), "7");
    assert!(meta(&s, "family").contains("delta_y=0.5254"));
    let c = wgini(&["sample", "--family", "bvp2", "--delta", "2.1", "--delta-y", "0.5254", "-n", "5", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn sample_round_trips_through_corr() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let p = path.to_str().unwrap();
    let o = wgini(&["sample", "--family", "bvp2", "--delta", "2.1", "--delta-y", "0.5254", "-n", "100000", "--out", p]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let emp = stdout(&wgini(&["corr", "--data", p, "--method", "empirical"]));
    let closed = stdout(&wgini(&[
        "corr", "--family", "bvp2", "--delta", "2.1", "--delta-y", "0.5254", "--method", "closed",
    ]));
    let se: f64 = column(&emp, "std_error")[0].parse().unwrap();
    assert!((value(&emp) - value(&closed)).abs() < 3.0 * se);
}

#[test]
fn sample_invalid_delta_exits_2() {
    for d in ["0", "-1"] {
        let o = wgini(&["sample", "--family", "bvp1", "--delta", d, "-n", "5"]);
        assert_eq!(code(&o), 2, "delta {d}");
    }
}

#[test]
fn config_block_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.conf");
    fs::write(&path, "# heavy tails\nfamily=bvp2\ndelta=2.1 delta_y=0.5254\n").unwrap();
    let a = wgini(&["sample", "--config", path.to_str().unwrap(), "-n", "4"]);
    let b = wgini(&["sample", "--family", "bvp2", "--delta", "2.1", "--delta-y", "0.5254", "-n", "4"]);
    assert_eq!(code(&a), 0);
    assert_eq!(csv_rows(&stdout(&a)), csv_rows(&stdout(&b)));
}

#[test]
fn unknown_flag_is_rejected() {
    let o = wgini(&["corr", "--family", "normal", "--rho", "0.5", "--bogus"]);
    assert_eq!(code(&o), 2);
    let o = wgini(&["sample", "--family", "bvp1", "--rho", "0.5", "-n", "5"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn curves_shape_flags() {
    let o = wgini(&["curves"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert_eq!(meta(&s, "gamma_decreasing"), "true");
    assert_eq!(meta(&s, "pearson_interior_max"), "true");
    let deltas = column(&s, "delta");
    assert_eq!(deltas.first().unwrap(), "2.05");
    assert_eq!(deltas.last().unwrap(), "10");
}

#[test]
fn curves_pearson_empty_without_variance() {
    let o = wgini(&["curves", "--delta-min", "1.5", "--delta-max", "3", "--steps", "4"]);
    assert_eq!(code(&o), 0);
    let rho = column(&stdout(&o), "pearson");
    assert_eq!(rho[0], "");
    assert_eq!(rho[1], "");
    assert!(!rho[2].is_empty());
}

#[test]
fn curves_value_at_five() {
    let o = wgini(&["curves", "--delta-min", "5", "--delta-max", "6", "--steps", "2"]);
    let g: f64 = column(&stdout(&o), "gamma_cw")[0].parse().unwrap();
    let want = (1.0 / 5.0) * (9.0 / (2.0 * 5.5254 - 1.0));
    assert!((g - want).abs() < 1e-11, "{g} vs {want}");
}

#[test]
fn curves_empty_range_exits_2() {
    assert_eq!(code(&wgini(&["curves", "--delta-min", "4", "--delta-max", "4"])), 2);
    assert_eq!(code(&wgini(&["curves", "--steps", "1"])), 2);
}

#[test]
fn surface_corner_and_monotone() {
    let o = wgini(&[
        "surface", "--family", "bvp3", "--delta", "1", "--delta-x", "2", "--delta-y", "1.5", "--nx", "5", "--ny", "5",
    ]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let ddf: Vec<f64> = column(&s, "ddf").iter().map(|x| x.parse().unwrap()).collect();
    assert_eq!(ddf[0], 1.0);
    for i in 0..5 {
        for j in 0..5 {
            let v = ddf[i * 5 + j];
            if j + 1 < 5 {
                assert!(ddf[i * 5 + j + 1] <= v);
            }
            if i + 1 < 5 {
                assert!(ddf[(i + 1) * 5 + j] <= v);
            }
        }
    }
}

#[test]
fn surface_below_support_exits_2() {
    let o = wgini(&["surface", "--family", "bvp1", "--delta", "2", "--y-min", "-0.5"]);
    assert_eq!(code(&o), 2);
}

fn write_portfolio(dir: &Path) -> String {
    let path = dir.join("book.csv");
    let rows: String = (1..=40)
        .map(|i| {
            let t = i as f64;
            format!("{},{},{}\n", t.sqrt(), (t * 1.7).sin() + 2.0, (t * 0.3).exp() / 10.0)
        })
        .collect();
    fs::write(&path, format!("motor,home,life\n{rows}")).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn price_allocation_is_additive_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_portfolio(dir.path());
    let o = wgini(&["price", &p, "--allocate", "--weight", "power:2"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 42);
    assert_eq!(v["additive"], true);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let sum: f64 = rows[..3].iter().map(|r| r["premium"].as_f64().unwrap()).sum();
    let agg = rows[3]["premium"].as_f64().unwrap();
    assert!((sum - agg).abs() < 1e-10);
    for r in rows {
        for key in ["column", "premium", "base", "loading"] {
            assert!(!r[key].is_null());
        }
    }
}

#[test]
fn price_dual_orientation_loads_upward() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_portfolio(dir.path());
    let o = wgini(&["price", &p, "--orientation", "dual", "--resamples", "0"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["orientation"], "dual");
    for r in v["rows"].as_array().unwrap() {
        assert!(r["loading"].as_f64().unwrap() > 0.0);
        assert!(r["std_error"].is_null());
    }
}

#[test]
fn json_and_csv_carry_the_same_values() {
    let args = ["corr", "--family", "bvp2", "--delta", "3", "--delta-y", "1", "--method", "closed"];
    let csv = stdout(&wgini(&args));
    let mut j = args.to_vec();
    j.extend(["--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&wgini(&j).stdout).unwrap();
    assert_eq!(v["rows"][0]["value"].as_f64().unwrap(), value(&csv));
}

#[test]
fn verify_specfun_passes() {
    let o = wgini(&["verify", "specfun"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(column(&s, "passed").iter().all(|p| p == "true"));
    assert_eq!(meta(&s, "passed"), meta(&s, "total"));
}

#[test]
fn verify_all_exits_zero() {
    let o = wgini(&["verify", "all"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_unknown_suite_exits_2() {
    assert_eq!(code(&wgini(&["verify", "nonsense"])), 2);
}
