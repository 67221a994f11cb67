use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
name = "small"
seed = 11
trials = 2
n_symbols = 8
snr_db = [20.0]
[[spoof]]
range_m = 40.0
doppler_hz = 20000.0
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path
}

fn rdspoof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdspoof")).args(args).output().unwrap()
}

fn run_in(dir: &Path, config: &Path, sub: &str, extra: &[&str]) -> Output {
    let out = dir.join("out");
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    rdspoof(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_prints_checks_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run_in(dir.path(), &cfg, "validate", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    for check in ["cp_delay", "doppler_spacing", "narrowband", "stop_and_hop", "doppler_ambiguity"] {
        assert!(text.contains(check), "{text}");
    }
    assert!(text.lines().any(|l| l.starts_with("config hash ") && l.len() == "config hash ".len() + 64));
}

#[test]
fn failed_assumption_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("doppler_hz = 20000.0", "doppler_hz = 50000.0"));
    assert_eq!(run_in(dir.path(), &cfg, "validate", &[]).status.code(), Some(1));
    assert_eq!(run_in(dir.path(), &cfg, "ber", &[]).status.code(), Some(1));
    let forced = run_in(dir.path(), &cfg, "ber", &["--force"]);
    assert_eq!(forced.status.code(), Some(0), "{}", String::from_utf8_lossy(&forced.stderr));
}

#[test]
fn unusable_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), &format!("{SMALL}\nbogus = 1\n"));
    assert_eq!(run_in(dir.path(), &unknown, "validate", &[]).status.code(), Some(1));
    let missing = dir.path().join("nope.toml");
    let o = run_in(dir.path(), &missing, "ber", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.toml"));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = rdspoof(&["ber", "--config", cfg.to_str().unwrap(), "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ber_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run_in(dir.path(), &cfg, "ber", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/small_ber.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("experiment,config_hash,seed,scenario"));
    // no_spoof plus the configured profile at one SNR
    assert_eq!(lines.len(), 3);
}

#[test]
fn rd_writes_records_peaks_and_maps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run_in(dir.path(), &cfg, "rd", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> = fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"small_rd.csv".to_string()));
    assert!(names.contains(&"small_peaks.csv".to_string()));
    let map = names.iter().find(|n| n.starts_with("small_map_")).expect("map file");
    let text = fs::read_to_string(dir.path().join("out").join(map)).unwrap();
    // header row plus P = 64 * 4 range rows, each with Q = 8 * 4 values
    assert_eq!(text.lines().count(), 1 + 256);
    assert!(text.lines().all(|l| l.split(',').count() == 1 + 32));
}

#[test]
fn iq_export_sizes_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run_in(dir.path(), &cfg, "iq-export", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    // preamble 320 samples plus 8 symbols of 80
    let samples = 320 + 8 * 80;
    for label in ["tx", "rx"] {
        let path = dir.path().join(format!("out/small_{label}.cf32"));
        assert_eq!(fs::metadata(&path).unwrap().len(), 8 * samples as u64);
        let meta = fs::read_to_string(dir.path().join(format!("out/small_{label}.cf32.meta"))).unwrap();
        assert!(meta.contains("sample_rate = 20000000"), "{meta}");
        assert!(meta.contains("marker = 320"), "{meta}");
        assert!(meta.contains(&format!("samples = {samples}")), "{meta}");
    }
}

#[test]
fn seed_flag_controls_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("snr_db = [20.0]", "snr_db = [8.0]"));
    let read = |seed: &str, threads: &str| {
        let o = run_in(dir.path(), &cfg, "ber", &["--seed", seed, "--threads", threads]);
        assert_eq!(o.status.code(), Some(0));
        fs::read_to_string(dir.path().join("out/small_ber.csv")).unwrap()
    };
    let a = read("5", "1");
    assert_eq!(a, read("5", "2"));
    assert_ne!(a, read("6", "1"));
}
