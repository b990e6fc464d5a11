use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_heightgap"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

/// Compares against the stored report; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(actual, expected, "report differs from {}", path.display());
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gap_transvections_certificate() {
    let input = fixture("transvections.json");
    let (code, out, err) = run(&["gap", path_arg(&input), "--eps", "0.25", "--word", "xyXY", "--n-max", "3"]);
    assert_eq!(code, 0, "{err}");
    check_golden("gap_transvections.json", &out);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["witness"]["n"], 4);
    assert!(v["bound"].as_f64().unwrap() > 0.0);
    assert!(v["bound"].as_f64().unwrap() <= v["crosscheck"]["upper"].as_f64().unwrap());
}

#[test]
fn gap_abelian_inconclusive() {
    let input = fixture("abelian.json");
    let (code, out, _) = run(&["gap", path_arg(&input), "--word", "xyXY"]);
    assert_eq!(code, 2);
    check_golden("gap_abelian.json", &out);
}

#[test]
fn gap_requires_symmetric_set() {
    let input = fixture("sqrt2.json");
    // the fixture asks for symmetrization itself
    let (code, out, err) = run(&["gap", path_arg(&input)]);
    assert_eq!(code, 0, "{err}");
    check_golden("gap_sqrt2.json", &out);
}

#[test]
fn heights_report() {
    let input = fixture("sqrt2.json");
    let (code, out, _) = run(&["heights", path_arg(&input)]);
    assert_eq!(code, 0);
    check_golden("heights_sqrt2.json", &out);
    let (_, again, _) = run(&["heights", path_arg(&input)]);
    assert_eq!(out, again);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let places = v["matrices"][0]["report"]["places"].as_array().unwrap();
    for key in ["place", "n_v", "log_norm", "log_plus"] {
        assert!(places[0].get(key).is_some());
    }
}

#[test]
fn bracket_columns() {
    let input = fixture("abelian.json");
    let (code, out, _) = run(&["nheight-bracket", path_arg(&input), "--n-max", "64"]);
    assert_eq!(code, 0);
    check_golden("bracket_abelian.json", &out);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["estimate"]["upper"].as_f64().unwrap() < 0.07);
    assert_eq!(v["columns"]["n"].as_array().unwrap().len(), 64);
}

#[test]
fn spectral_report() {
    let input = fixture("transvections.json");
    let (code, out, err) = run(&["spectral", path_arg(&input), "--n-max", "4", "--seed", "3"]);
    assert_eq!(code, 0, "{err}");
    check_golden("spectral_transvections.json", &out);
}

#[test]
fn constants_report() {
    let (code, out, _) = run(&["constants", "--d", "2", "--eps", "0.25", "--wlen", "4", "--n", "1"]);
    assert_eq!(code, 0);
    check_golden("constants.json", &out);
    let (code, _, err) = run(&["constants", "--eps", "1.5"]);
    assert_eq!(code, 1);
    assert!(err.contains("epsilon"));
}

#[test]
fn law_search_and_certify() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("search.json");
    let (code, _, err) = run(&["law-search", "--d", "2", "--target", "0.5", "--seed", "7", "--out", path_arg(&report)]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&report).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["success"], true);
    assert!(v["cert"]["empirical_sup"].as_f64().unwrap() < 0.5);
    let again = dir.path().join("again.json");
    run(&["law-search", "--d", "2", "--target", "0.5", "--seed", "7", "--out", path_arg(&again)]);
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());

    let (code, out, err) = run(&["law-certify", "--word-file", path_arg(&report), "--samples", "500", "--seed", "1"]);
    assert_eq!(code, 0, "{err}");
    let c: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(c["cert"]["word"], v["cert"]["word"]);
    assert_eq!(c["cert"]["sample_count"], 500);
}

#[test]
fn law_certify_net_short_word() {
    let (code, out, err) = run(&["law-certify", "--word", "xyXY", "--eta", "0.05", "--samples", "200"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["cert"]["group"]["group"], "SU(2)");
    assert!(v["cert"]["rigorous_bound"].as_f64().unwrap() >= v["empirical"]["empirical_sup"].as_f64().unwrap());
}

#[test]
fn input_errors_exit_one() {
    let input = fixture("zero_denominator.json");
    let (code, out, err) = run(&["heights", path_arg(&input)]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.contains("zero denominator"), "{err}");
    assert!(err.contains("line 6"), "{err}");
    let (code, _, err) = run(&["heights", "/nonexistent/input.json"]);
    assert_eq!(code, 1);
    assert!(err.contains("reading"));
    let (code, _, _) = run(&["gap", path_arg(&fixture("transvections.json")), "--word", "xq"]);
    assert_eq!(code, 1);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.json");
    let input = fixture("transvections.json");
    let (code, stdout, _) = run(&["heights", path_arg(&input), "--out", path_arg(&out), "--threads", "1"]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((v["set_height"].as_f64().unwrap() - 0.48121182505960347).abs() < 1e-12);
}
