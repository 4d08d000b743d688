//! End-to-end runs of the `logdef` binary.

use std::path::Path;
use std::process::{Command, Output};

use logdef::config::DEFAULT_CONFIG;

fn logdef(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logdef")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_passes_on_the_default_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = logdef(&["--command", "verify", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["verdict"], "pass");
    for key in ["period_fit", "order2_cocycle", "transformation", "canonical_cocycle", "match_order2", "nontrivial_class"] {
        assert!(r["residuals"].get(key).is_some(), "missing {key}");
        assert!(r["tolerances"][key]["value"].is_number());
    }
    assert_eq!(r["package"]["deformation"]["order"], 2);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = logdef(&["--command", "periods", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn short_truncation_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", &DEFAULT_CONFIG.replace("nq_max = 128", "nq_max = 8"));
    let out = dir.path().join("small.json");
    let o = logdef(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("warning: numerics.nq_max = 8"));
    assert!(stderr.contains("FAIL period_fit"));
    let r = report(&out);
    assert_eq!(r["verdict"], "fail");
    let period = r["residuals"]["period_fit"].as_f64().unwrap();
    assert!(period > r["tolerances"]["period_fit"]["value"].as_f64().unwrap());
}

#[test]
fn missing_form_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = DEFAULT_CONFIG
        .lines()
        .filter(|l| !l.starts_with("[form]") && !l.starts_with("eta =") && !l.starts_with("label = \"h\""))
        .collect::<Vec<_>>()
        .join("\n");
    let cfg = write_config(dir.path(), "noform.toml", &text);
    let o = logdef(&["--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("parse error") && stderr.contains("form"), "{stderr}");
}

#[test]
fn bad_fields_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "deep.toml", &DEFAULT_CONFIG.replace("depth_max = 2", "depth_max = 9"));
    let o = logdef(&["--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerics.depth_max"));
    let o = logdef(&["--tolerance", "no_such_check=1e-3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tolerances.no_such_check"));
}

#[test]
fn tolerance_override_changes_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tight.json");
    let o = logdef(&["--command", "periods", "--tolerance", "order1_cocycle=1e-30", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let v = report(&out)["tolerances"]["order1_cocycle"]["value"].as_f64().unwrap();
    assert!((v / 1e-30 - 1.0).abs() < 1e-12);
}

#[test]
fn mmv_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mmv.json");
    let o = logdef(&["--command", "mmv", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("mmv.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["kind", "gamma", "tau", "word", "indices", "re", "im", "deviation"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert!(rows.iter().any(|r| &r[0] == "functional"));
    assert!(rows.iter().any(|r| &r[0] == "classical" && &r[3] == "0;0"));
    for r in &rows {
        r[5].parse::<f64>().unwrap();
        r[6].parse::<f64>().unwrap();
    }
}

#[test]
fn deform_pushes_an_extra_form() {
    let dir = tempfile::tempdir().unwrap();
    let h = logdef::CuspForm::default_level5(128);
    std::fs::write(dir.path().join("h.txt"), h.to_coefficient_file()).unwrap();
    let text = DEFAULT_CONFIG.replace("output = \"report.json\"", "output = \"deformed.json\"") + "\n[deform]\ninput_file = \"h.txt\"\n";
    let cfg = write_config(dir.path(), "deform.toml", &text);
    let o = logdef(&["--config", &cfg, "--command", "deform"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("deformed.json"));
    let terms = r["package"]["deformed_input"]["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 3);
}
