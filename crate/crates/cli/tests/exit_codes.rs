mod common;

use common::*;
use depriv_cli::fixture;

fn config() -> String {
    fixture::bundled_dir().join(fixture::CONFIG).display().to_string()
}

#[test]
fn full_run_succeeds() {
    let out = tempfile::tempdir().unwrap();
    let o = depriv(&["run", "--config", &config(), "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.path().join("fits.txt").is_file());
}

#[test]
fn header_only_csv_is_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.csv");
    std::fs::write(&p, "geoid,place_id,percpov,percvac,unemp,nohs,population,popdens,percblk,percwht\n").unwrap();
    let out = dir.path().join("out");
    let o = depriv(&["score", "--attributes", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("EMPTY_INPUT"));
}

#[test]
fn unknown_benchmark_region_is_a_region_error() {
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    assert!(depriv(&["score", "--config", &config(), "--out", o]).status.success());
    let c = depriv(&["classify", "--config", &config(), "--out", o, "--threshold", "region:9999999"]);
    assert_eq!(c.status.code(), Some(7));
}

#[test]
fn stage_without_its_inputs_is_an_io_error() {
    let out = tempfile::tempdir().unwrap();
    let c = depriv(&["classify", "--config", &config(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(c.status.code(), Some(3));
    let missing = depriv(&["score", "--attributes", "/nonexistent/a.csv", "--out", out.path().to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn unknown_config_key_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(&p, r#"{"attributes": [], "thresold": 3}"#).unwrap();
    let c = depriv(&["score", "--config", p.to_str().unwrap()]);
    assert_eq!(c.status.code(), Some(4));
}

#[test]
fn malformed_flags_are_usage_errors() {
    for args in [
        &["score", "--threshold", "median"][..],
        &["score", "--contiguity", "bishop"],
        &["score", "--weights", "equal"],
        &["frobnicate"],
    ] {
        assert_eq!(depriv(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn dispersion_without_geometry_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let attrs = fixture::bundled_dir().join(fixture::ATTRIBUTES);
    let o = dir.path().to_str().unwrap();
    let a = attrs.to_str().unwrap();
    assert!(depriv(&["score", "--attributes", a, "--out", o]).status.success());
    let c = depriv(&["dispersion", "--attributes", a, "--out", o]);
    assert_eq!(c.status.code(), Some(2));
}
