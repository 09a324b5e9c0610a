use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

use cmforge::hauptmodul::{eta, PrecisionConfig, QSeries};
use cmforge::highprec::{Complex, Real};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmforge"))
        .args(args)
        .env_remove("CMFORGE_PRECISION")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> (String, Value) {
    let mut full = args.to_vec();
    full.extend(["--format", "json"]);
    let out = run(&full);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let v = serde_json::from_str(&text).unwrap();
    (text, v)
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("cmforge-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn json_output_round_trips_byte_identically() {
    let commands: [&[&str]; 8] = [
        &["gznorm", "--p", "47", "--d", "39", "--D", "163", "--breakdown"],
        &["crosscheck", "--p", "2", "--d", "7", "--D", "15", "--digits", "40"],
        &["grid", "--p", "3", "--max", "100", "--count", "3", "--digits", "40"],
        &["classpoly", "--p", "47", "--d", "39"],
        &["interpolate", "--pairs", "0,1;1,1;-1,7;2,13;4,217", "--degree", "4", "--d", "39"],
        &["heegner", "--d", "39", "--p", "47"],
        &["sset", "--p", "13"],
        &["eval", "--p", "5", "--tau", "0.1+0.9i", "--digits", "30"],
    ];
    for args in commands {
        let (text, v) = json(args);
        let again = format!("{}\n", serde_json::to_string_pretty(&v).unwrap());
        assert_eq!(text, again, "{args:?}");
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["command", "params", "result", "warnings"]);
        assert_eq!(v["command"], args[0]);
    }
}

#[test]
fn gznorm_examples() {
    let (_, v) = json(&["gznorm", "--p", "47", "--D", "163", "--d", "39"]);
    assert_eq!(v["result"]["norm"], 217);
    assert_eq!(v["result"]["log_norm"]["7"], "8/1");
    assert_eq!(v["result"]["log_norm"]["31"], "8/1");
    let (_, v) = json(&["gznorm", "--p", "47", "--D", "19", "--d", "11"]);
    assert_eq!(v["result"]["norm"], 1);
    assert_eq!(v["result"]["value"], "0");
    // sign of a discriminant is optional
    let (_, w) = json(&["gznorm", "--p", "47", "--D", "-19", "--d=-11"]);
    assert_eq!(v["result"], w["result"]);
}

#[test]
fn gznorm_csv_columns() {
    let out = run(&["gznorm", "--p", "47", "--D", "163", "--d", "39", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,d,beta,D,mu,prime,exponent");
    assert_eq!(&lines[1..], ["47,39,33,163,5,7,8/1", "47,39,33,163,5,31,8/1"]);
}

#[test]
fn breakdown_lists_every_term() {
    let (_, v) = json(&["gznorm", "--p", "47", "--D", "163", "--d", "39", "--breakdown"]);
    let rows = v["result"]["breakdown"].as_array().unwrap();
    assert_eq!(rows.len() as u64, v["result"]["terms"].as_u64().unwrap());
    let contributing: Vec<&Value> = rows.iter().filter(|r| r["diff"].as_array().unwrap().len() == 1).collect();
    assert!(!contributing.is_empty());
    for r in rows {
        let m = r["m"].as_str().unwrap();
        let (num, den) = m.split_once('/').unwrap();
        assert!(num.parse::<i64>().unwrap() > 0 && den.parse::<i64>().unwrap() > 0, "{m}");
    }
}

#[test]
fn precision_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_cmforge"))
        .args(["gznorm", "--p", "47", "--D", "163", "--d", "39", "--format", "json"])
        .env("CMFORGE_PRECISION", "40")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["params"]["digits"], 40);
    assert_eq!(v["result"]["value"].as_str().unwrap().split('e').next().unwrap().len(), 41);
    // the flag wins over the environment
    let out = Command::new(env!("CARGO_BIN_EXE_cmforge"))
        .args(["sset", "--p", "2", "--digits", "50", "--format", "json"])
        .env("CMFORGE_PRECISION", "not-a-number")
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_cmforge"))
        .args(["sset", "--p", "2"])
        .env("CMFORGE_PRECISION", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn crosscheck_reports_variants() {
    let (_, v) = json(&["crosscheck", "--p", "2", "--d", "7", "--D", "15"]);
    assert_eq!(v["result"]["status"], "PASS");
    assert_eq!(v["result"]["variant"], "of_mD");
    let variants = v["result"]["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 2);
    assert_eq!(variants[1]["variant"], "of_m");
    assert_eq!(variants[1]["status"], "FAIL");
    assert_eq!(v["warnings"].as_array().unwrap().len(), 1);

    let out = run(&["crosscheck", "--p", "2", "--d", "7", "--D", "15", "--ramified-exponent", "of_m"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn crosscheck_passes_on_spec_pair() {
    let out = run(&["crosscheck", "--p", "5", "--d", "19", "--D", "59"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("PASS"));
}

#[test]
fn crosscheck_with_series_file() {
    let series = QSeries::from_eta_quotient(2, 400).unwrap();
    let path = temp_file("p2.series", &format!("# j*_2\n{series}"));
    let p = path.to_str().unwrap();
    let (_, v) = json(&["crosscheck", "--p", "2", "--d", "7", "--D", "15", "--series", p]);
    assert_eq!(v["result"]["status"], "PASS");
    assert_eq!(v["params"]["series"], "file");
    // series for the wrong level
    let out = run(&["crosscheck", "--p", "3", "--d", "8", "--D", "11", "--series", p]);
    assert_eq!(out.status.code(), Some(2));
    let bad = temp_file("bad.series", "p 2\ncount 3\n1\n0\n");
    let out = run(&["crosscheck", "--p", "2", "--d", "7", "--D", "15", "--series", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("coefficients"));
    std::fs::remove_file(path).ok();
    std::fs::remove_file(bad).ok();
}

#[test]
fn grid_is_sorted_and_passes() {
    let (_, v) = json(&["grid", "--p", "13", "--max", "300", "--count", "6", "--digits", "40"]);
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let keys: Vec<(u64, u64)> = rows.iter().map(|r| (r["d"].as_u64().unwrap(), r["D"].as_u64().unwrap())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(v["result"]["failed"], 0);
}

#[test]
fn classpoly_outputs() {
    let (_, v) = json(&["classpoly", "--p", "47", "--d", "-39"]);
    assert_eq!(v["result"]["s_set"], serde_json::json!([-11, -19, -43, -67, -163]));
    assert_eq!(v["result"]["irreducible"], true);
    assert_eq!(v["params"]["base"], 11);
    let out = run(&["classpoly", "--p", "47", "--d", "39"]);
    assert!(stdout(&out).contains("H(X) = X^4 - X^3 + 2*X^2 - 2*X + 1"));
    let out = run(&["classpoly", "--p", "47", "--d", "39", "--format", "csv"]);
    assert_eq!(stdout(&out).lines().nth(3), Some("-43,-1,7"));
}

#[test]
fn classpoly_numeric_agrees_with_search() {
    let (_, search) = json(&["classpoly", "--p", "2", "--d", "8"]);
    let (_, numeric) = json(&["classpoly", "--p", "2", "--d", "8", "--strategy", "numeric"]);
    assert_eq!(search["result"]["polynomial"], numeric["result"]["polynomial"]);
}

#[test]
fn classpoly_with_other_base() {
    let (_, v) = json(&["classpoly", "--p", "47", "--d", "39", "--base", "-19"]);
    assert_eq!(v["params"]["base"], 19);
    let poly = v["result"]["polynomial"].as_str().unwrap();
    assert!(poly.starts_with("X^4"));
    let out = run(&["classpoly", "--p", "47", "--d", "39", "--base", "7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn heegner_example() {
    let out = run(&["heegner", "--d", "11", "--p", "47", "--beta", "41"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("(47, 41, 9)  tau = (-41+sqrt(-11))/94"));
    let out = run(&["heegner", "--d", "11", "--p", "47", "--beta", "40"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_matches_eta_quotient() {
    let (_, v) = json(&["eval", "--p", "2", "--tau", "0.0+1.0i", "--digits", "60"]);
    let prec = PrecisionConfig::default().with_digits(60);
    let bits = prec.working_bits() + 32;
    let tau = Complex::from_f64(0.0, 1.0, bits);
    let two_tau = Complex::from_f64(0.0, 2.0, bits);
    let t = (&eta(&tau, &prec).unwrap() / &eta(&two_tau, &prec).unwrap()).powi(24);
    let j = &t + &t.recip().scale(&Real::from_i64(4096, bits));
    assert_eq!(v["result"]["re"].as_str().unwrap(), j.re.to_sci_string(60));
    assert_eq!(v["result"]["im"], "0");
}

#[test]
fn eval_parses_tau_forms() {
    for (tau, ok) in [("0.25+0.5i", true), ("-0.3-2i", false), ("1.5i", true), ("0.1 + 1e0 i", true), ("1+i", true), ("abc", false), ("0.5", false)] {
        let out = run(&["eval", "--p", "3", "--tau", tau, "--digits", "30"]);
        assert_eq!(out.status.success(), ok, "{tau}: {}", String::from_utf8_lossy(&out.stderr));
        if !ok {
            assert_eq!(out.status.code(), Some(2), "{tau}");
        }
    }
}

#[test]
fn genus_warning_for_other_levels() {
    let (_, v) = json(&["gznorm", "--p", "37", "--d", "7", "--D", "11"]);
    let warnings = v["warnings"].as_array().unwrap();
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].as_str().unwrap().contains("genus zero"));
    let (_, v) = json(&["gznorm", "--p", "47", "--d", "39", "--D", "163"]);
    assert!(v["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn errors_go_to_stderr_with_documented_codes() {
    let cases: [(&[&str], i32); 9] = [
        (&["gznorm", "--p", "47", "--D", "39", "--d", "39"], 2),
        (&["gznorm", "--p", "46", "--D", "163", "--d", "39"], 2),
        (&["gznorm", "--p", "47", "--D", "163", "--d", "44"], 2),
        (&["gznorm", "--p", "47", "--D", "163"], 2),
        (&["crosscheck", "--p", "2", "--d", "7", "--D", "15", "--digits", "10"], 2),
        (&["classpoly", "--p", "46", "--d", "39"], 2),
        (&["classpoly", "--p", "47", "--d", "151"], 5),
        (&["interpolate", "--pairs", "0,1;0,2", "--degree", "1"], 6),
        (&["interpolate", "--pairs", "0,1;x,2", "--degree", "1"], 2),
    ];
    for (args, code) in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
    let out = run(&["classpoly", "--p", "47", "--d", "151"]);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("h(-151) + 1 = 8") && msg.contains("|S(47)| = 5"), "{msg}");
}
