//! The `toruslock` binary: exit codes, artifacts and reproducibility.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use toruslock::io::parse_csv;
use toruslock::pipeline::certify_directly;
use toruslock::{BaseRotation, QpfSystem, TranslationField};

const RIGID: &str = r#"{"omega":{"kind":"irrational","value":0.6180339887498949},"field":{"kind":"closed_form","family":"arnold","tau":0.25,"k":0.0,"b":0.0}}"#;
const UNFORCED: &str = r#"{"omega":{"kind":"irrational","value":0.6180339887498949},"field":{"kind":"closed_form","family":"arnold","tau":0.0,"k":0.5,"b":0.0}}"#;
const ARNOLD: &str = r#"{"omega":{"kind":"irrational","value":0.6180339887498949},"field":{"kind":"closed_form","family":"arnold","tau":0.2,"k":0.5,"b":0.1}}"#;
const FAMILY: &str = r#"{"omega":{"kind":"irrational","value":0.6180339887498949},"members":{"kind":"arnold","k":0.5,"b":0.0}}"#;

fn toruslock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toruslock"))
        .args(args)
        .env("TORUSLOCK_THREADS", "1")
        .output()
        .expect("spawn toruslock")
}

fn put(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn rotnum_of_a_rigid_rotation_is_its_angle() {
    let dir = tempfile::tempdir().unwrap();
    let map = put(dir.path(), "rigid.json", RIGID);
    let out = dir.path().join("r.csv");
    let o = toruslock(&["rotnum", "--map", &map, "--n-max", "1000", "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# toruslock rotnum seed=7\n"));
    let t = parse_csv(&text).unwrap();
    assert_eq!(t.column("rho").unwrap(), vec![0.25]);
}

#[test]
fn malformed_input_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = put(dir.path(), "bad.json", "{\"omega\": 0.6,");
    let out = dir.path().join("r.csv");
    for cmd in ["rotnum", "tongue"] {
        let o = toruslock(&[cmd, "--map", &bad, "-o", s(&out)]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(stderr(&o).contains(&format!("toruslock {cmd}")));
    }
    let missing = dir.path().join("nope.json");
    let o = toruslock(&["certify", "--cert", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    let o = toruslock(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
    let o = toruslock(&["rotnum", "--map", &bad, "--n-max", "many"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn stage_failure_exits_1_with_the_stage_tag() {
    let dir = tempfile::tempdir().unwrap();
    let map = put(
        dir.path(),
        "half.json",
        r#"{"omega":{"kind":"rational","value":{"p":"1","q":"2"}},"field":{"kind":"closed_form","family":"arnold","tau":0.0,"k":0.5,"b":0.1}}"#,
    );
    let out = dir.path().join("z.json");
    let o = toruslock(&["zeroset", "--map", &map, "--eps", "0.3", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("toruslock zeroset: [rationalize]"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn tongue_of_unforced_arnold_is_a_flat_band() {
    let dir = tempfile::tempdir().unwrap();
    let map = put(dir.path(), "u.json", UNFORCED);
    let out = dir.path().join("t.csv");
    let o = toruslock(&["tongue", "--map", &map, "--n-theta", "8", "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = parse_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let w = 0.5 / (2.0 * PI);
    for (lo, hi) in t.column("tau_minus").unwrap().into_iter().zip(t.column("tau_plus").unwrap()) {
        assert!((lo + w).abs() < 1e-9 && (hi - w).abs() < 1e-9, "[{lo}, {hi}]");
    }
}

#[test]
fn staircase_is_reproducible_and_renders() {
    let dir = tempfile::tempdir().unwrap();
    let fam = put(dir.path(), "fam.json", FAMILY);
    let run = |tag: &str| -> (PathBuf, PathBuf) {
        let csv = dir.path().join(format!("s{tag}.csv"));
        let json = dir.path().join(format!("s{tag}.json"));
        let o = toruslock(&[
            "staircase", "--family", &fam, "--tau-min", "-0.2", "--tau-max", "0.2", "--samples", "41", "--n-max",
            "2000", "--seed", "11", "-o", s(&csv), "--json", s(&json),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (csv, json)
    };
    let (c1, j1) = run("1");
    let (c2, j2) = run("2");
    assert_eq!(std::fs::read(&c1).unwrap(), std::fs::read(&c2).unwrap());
    assert_eq!(std::fs::read(&j1).unwrap(), std::fs::read(&j2).unwrap());

    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&j1).unwrap()).unwrap();
    assert_eq!(v["kind"], "staircase");
    assert_eq!(v["seed"], 11);
    let plateaus = v["data"]["plateaus"].as_array().unwrap();
    assert!(plateaus.iter().any(|p| p["level"].as_f64().unwrap().abs() < 1e-3));

    let p_out = dir.path().join("p.json");
    let o = toruslock(&["plateaus", "--data", s(&c1), "-o", s(&p_out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let svg = dir.path().join("s.svg");
    let o = toruslock(&["render", "--artifact", s(&c1), "-o", s(&svg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.contains(r#"width="1000" height="1000""#));
    assert!(text.trim_end().ends_with("</svg>"));
}

#[test]
fn zeroset_and_curves_artifacts_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let map = put(dir.path(), "a.json", ARNOLD);
    let z1 = dir.path().join("z1.json");
    let z2 = dir.path().join("z2.json");
    let c = dir.path().join("c.json");
    for (cmd, out) in [("zeroset", &z1), ("zeroset", &z2), ("curves", &c)] {
        let o = toruslock(&[cmd, "--map", &map, "--eps", "0.3", "-o", s(out)]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
    assert_eq!(std::fs::read(&z1).unwrap(), std::fs::read(&z2).unwrap());

    let z: toruslock::io::Artifact<toruslock::io::ZeroSetData> =
        serde_json::from_slice(&std::fs::read(&z1).unwrap()).unwrap();
    assert_eq!(z.data.raster.len(), toruslock::io::RASTER);
    assert!(!z.data.segments.is_empty());
    // round trip through the typed form is lossless
    let again = toruslock::io::to_json(&z).unwrap();
    assert_eq!(again.as_bytes(), std::fs::read(&z1).unwrap().as_slice());

    let svg = dir.path().join("c.svg");
    let o = toruslock(&["render", "--artifact", s(&c), "-o", s(&svg)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn certify_accepts_a_valid_certificate_and_rejects_a_tampered_one() {
    let sys = QpfSystem::new(BaseRotation::golden(), TranslationField::arnold(0.02, 0.9, 0.1)).unwrap();
    let cert = certify_directly(&sys, 1e-7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let good = put(dir.path(), "good.json", &cert.to_json().unwrap());
    let report = dir.path().join("chk.json");
    let o = toruslock(&["certify", "--cert", &good, "-o", s(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(report.exists());

    // move the system far enough that the stored curves no longer trap it
    let mut bad = cert.clone();
    bad.system = QpfSystem::new(BaseRotation::golden(), TranslationField::arnold(0.3, 0.9, 0.1)).unwrap();
    let bad = put(dir.path(), "bad.json", &bad.to_json().unwrap());
    let o = toruslock(&["certify", "--cert", &bad]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("toruslock certify: ["), "{}", stderr(&o));
}
