use std::path::Path;
use std::process::{Command, Output};

const REGULAR: &str = r#"{"family":"binary_gaussian","mu":-1.1931471805599454,"sigma":1.0}"#;
const BOUNDARY: &str = r#"{"family":"binary_gaussian","mu":-1.1774100225154747,"sigma":1.0}"#;

fn sdppp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdppp"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

fn report(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn classify_boundary_law() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdppp(dir.path(), &["classify", "--law", BOUNDARY]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("case=boundary alpha=1.17741"), "{stdout}");
    let r = report(dir.path(), "classify.json");
    assert_eq!(r["results"]["case"], "boundary");
}

#[test]
fn configuration_errors_exit_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["classify", "--law", "{\"family\": \"binary_gaussian\", \"mu\": }"],
        &[
            "classify",
            "--law",
            r#"{"family":"poisson_gaussian","m":0.5,"mu":0,"sigma":1}"#,
        ],
        &["classify", "--law", "missing.json"],
        &["verify-fixed-point", "--law", REGULAR, "--target", "nonsense"],
        &["verify-fixed-point", "--law", REGULAR, "--reps", "10"],
        &["sample-shift", "--law", REGULAR, "--case", "boundary"],
        &["no-such-command"],
    ];
    for args in cases {
        assert_eq!(sdppp(dir.path(), args).status.code(), Some(4), "{args:?}");
    }
}

#[test]
fn high_floor_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdppp(dir.path(), &["verify-fixed-point", "--law", REGULAR, "--floor", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(report(dir.path(), "verify-fixed-point.json")["verdict"], "inconclusive");
}

#[test]
fn wrong_exponent_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdppp(dir.path(), &["verify-fixed-point", "--law", REGULAR, "--alpha", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(dir.path(), "verify-fixed-point.json");
    assert_eq!(r["verdict"], "fail");
    assert!(r["tests"].as_array().unwrap().iter().any(|t| t["pass"] == false));
}

#[test]
fn sampled_measures_round_trip_through_file_target() {
    let dir = tempfile::tempdir().unwrap();
    let shift = format!("martingale:{REGULAR},12,regular");
    let out = sdppp(
        dir.path(),
        &[
            "sample-sdppp",
            "--alpha",
            "1",
            "--shift",
            &shift,
            "--floor",
            "-4",
            "--reps",
            "200",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sdppp.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("replicate,floor,atoms"));
    assert_eq!(lines.count(), 200);
    // Too few stored draws for independent replicates, but the target loads.
    let out = sdppp(
        dir.path(),
        &["verify-fixed-point", "--law", REGULAR, "--target", "file:sdppp.csv"],
    );
    assert!(matches!(out.status.code(), Some(0 | 2 | 3)));
}

#[test]
fn report_config_reruns_identically() {
    let first = tempfile::tempdir().unwrap();
    let args = ["--seed", "9", "sample-shift", "--law", REGULAR, "--reps", "300"];
    assert_eq!(sdppp(first.path(), &args).status.code(), Some(0));
    let r = report(first.path(), "sample-shift.json");
    let config = first.path().join("config.json");
    std::fs::write(&config, serde_json::to_vec(&r["config"]).unwrap()).unwrap();
    let second = tempfile::tempdir().unwrap();
    assert_eq!(
        sdppp(second.path(), &["--config", config.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        std::fs::read(first.path().join("shift.csv")).unwrap(),
        std::fs::read(second.path().join("shift.csv")).unwrap()
    );
    assert_eq!(r, report(second.path(), "sample-shift.json"));
}

#[test]
fn brw_rows_respect_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdppp(
        dir.path(),
        &[
            "simulate-brw",
            "--law",
            REGULAR,
            "--generations",
            "6",
            "--threshold",
            "-5",
            "--reps",
            "20",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(dir.path().join("brw.csv"))
        .unwrap();
    for row in reader.records() {
        let row = row.unwrap();
        assert_eq!(&row[1], "-5");
        assert!(row.iter().skip(2).all(|x| x.parse::<f64>().unwrap() >= -5.0));
    }
}

#[test]
fn max_law_and_smoothing_emit_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdppp(
        dir.path(),
        &["max-law", "--law", REGULAR, "--reps", "2000", "--step", "0.5"],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path(), "max-law.json");
    assert!(r["results"]["sup_distance"].as_f64().unwrap() < 0.05);
    let out = sdppp(
        dir.path(),
        &[
            "smoothing",
            "--law",
            REGULAR,
            "--points",
            "21",
            "--iterations",
            "3",
            "--mc-reps",
            "2000",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("smoothing.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,f,fitted"));
    assert_eq!(csv.lines().count(), 22);
}
