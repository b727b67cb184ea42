use std::path::Path;
use std::process::{Command, Output};

fn cansat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cansat")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn power_table_defaults() {
    let o = cansat(&["power"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in ["13.312 mW", "221.1 mW", "750 mW", "1250 mW", "511 mA", "4.305 h"] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
    let o = cansat(&["power", "--format", "csv"]);
    assert!(stdout(&o).starts_with("component,function,voltage_v,current_ma,power_mw\n"));
}

#[test]
fn linkbudget_at_800m() {
    let o = cansat(&["linkbudget", "--distance", "800"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row[0], "800.0");
    assert_eq!(row[3], "+10.21");
    assert_eq!(row[4], "0.9969");
    assert_eq!(row[5], "54.17");
}

#[test]
fn linkbudget_rejects_sub_metre() {
    assert_eq!(cansat(&["linkbudget", "--distance", "0.5"]).status.code(), Some(2));
}

#[test]
fn frame_inspect() {
    let rec = cansat_core::TelemetryRecord {
        temperature_c: 32.66,
        lat_deg: 20.278863,
        ..Default::default()
    };
    let bytes = cansat_core::telemetry::encode_frame(&rec, 3).unwrap();
    let hex: String = bytes.iter().map(|b| format!("{b:02X}")).collect();
    let o = cansat(&["frame", "inspect", "--hex", &hex]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("temperature_c   32.66"));
    assert!(text.contains("lat_deg         20.278863"));
    assert!(text.contains("seq             3"));

    let truncated = &hex[..hex.len() - 4];
    let o = cansat(&["frame", "inspect", "--hex", truncated]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);

    let mut bad = bytes;
    bad[50] ^= 0xFF;
    let hex: String = bad.iter().map(|b| format!("{b:02x} ")).collect();
    let o = cansat(&["frame", "inspect", "--hex", &hex]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("crc mismatch"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(cansat(&[]).status.code(), Some(2));
    assert_eq!(cansat(&["launch"]).status.code(), Some(2));
    assert_eq!(cansat(&["frame", "inspect", "--hex", "zz"]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[mission]\nbogus_key = 1\n").unwrap();
    let o = cansat(&["sim", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus_key") && err.contains("line 2"), "{err}");

    std::fs::write(&cfg, "[link]\nbaud = 300\n").unwrap();
    assert_eq!(cansat(&["power", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn missing_input_is_runtime_error() {
    assert_eq!(cansat(&["decode", "--in", "/nonexistent.tmf"]).status.code(), Some(1));
}

fn run_sim(out: &Path, extra: &[&str]) {
    let mut args = vec!["sim", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = cansat(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn decode_reproduces_sim_csv() {
    let dir = tempfile::tempdir().unwrap();
    run_sim(dir.path(), &["--seed", "7"]);
    let csv = dir.path().join("replay.csv");
    let snap = dir.path().join("replay.json");
    let o = cansat(&[
        "decode",
        "--in",
        dir.path().join("mission.tmf").to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--snapshot",
        snap.to_str().unwrap(),
        "--summary",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("max altitude"));
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(dir.path().join("ground.csv")).unwrap());
    assert_eq!(std::fs::read(&snap).unwrap(), std::fs::read(dir.path().join("snapshot.json")).unwrap());
}

#[test]
fn seed_flag_overrides_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = a.path().join("m.cfg");
    std::fs::write(&cfg, "[mission]\nseed = 7\n").unwrap();
    run_sim(a.path(), &["--config", cfg.to_str().unwrap(), "--seed", "9"]);
    run_sim(b.path(), &["--seed", "9"]);
    assert_eq!(
        std::fs::read(a.path().join("ground.csv")).unwrap(),
        std::fs::read(b.path().join("ground.csv")).unwrap()
    );
}
