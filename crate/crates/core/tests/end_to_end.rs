use std::fs;

use rdspoof::harness::{
    rd_trial, run_ber_sweep, run_rd_experiment, write_rd_outputs, ExperimentConfig, RunOptions,
};
use rdspoof::rx::RangeDopplerMap;

const RANGE_CELL: f64 = 3.75;
const DOPPLER_CELL: f64 = 1250.0;

fn argmax(map: &RangeDopplerMap) -> (f64, f64) {
    let (mut best, mut at) = (f64::NEG_INFINITY, (0, 0));
    for ((i, j), &v) in map.magnitudes.indexed_iter() {
        if v > best {
            best = v;
            at = (i, j);
        }
    }
    (map.range_axis[at.0], map.doppler_axis[at.1])
}

fn near(got: (f64, f64), want: (f64, f64)) -> bool {
    (got.0 - want.0).abs() <= RANGE_CELL && (got.1 - want.1).abs() <= DOPPLER_CELL
}

fn single_frame(extra: &str, seed: u64) -> (f64, f64) {
    let cfg = ExperimentConfig::from_toml_str(&format!("name = \"e2e\"\nsnr_db = [inf]\n{extra}")).unwrap();
    let alloc = cfg.allocation().unwrap();
    let sc = &cfg.rd_scenarios().unwrap()[0];
    let trial = rd_trial(&cfg, &alloc, sc, f64::INFINITY, seed).unwrap().expect("frame detected");
    argmax(&trial.map)
}

#[test]
fn spoof_relocates_the_emitter() {
    for range in [15.0, 40.0, 120.0] {
        for doppler in [0.0, 10e3, 20e3] {
            let got = single_frame(&format!("[[spoof]]\nrange_m = {range}\ndoppler_hz = {doppler}\n"), 3);
            assert!(near(got, (range, doppler)), "({range}, {doppler}) landed at {got:?}");
        }
    }
}

#[test]
fn unspoofed_emitter_sits_at_its_true_position() {
    let got = single_frame("[channel]\ninitial_range_m = 60.0\nvelocity_mps = 30.0\n", 4);
    assert!(near(got, (60.0, 500.35)), "{got:?}");
}

#[test]
fn primary_peak_grows_with_its_share() {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
name = "fractions"
snr_db = [30.0]
[schedule]
fractions = [0.2, 0.4, 0.6, 0.8]
[[spoof]]
range_m = 120.0
doppler_hz = 10000.0
[[spoof]]
range_m = 40.0
doppler_hz = 20000.0
"#,
    )
    .unwrap();
    let alloc = cfg.allocation().unwrap();
    let scenarios = cfg.rd_scenarios().unwrap();
    assert_eq!(scenarios.len(), 4);
    for seed in 0..3 {
        let magnitudes: Vec<f64> = scenarios
            .iter()
            .map(|sc| rd_trial(&cfg, &alloc, sc, 30.0, seed).unwrap().expect("frame detected").target_magnitudes[0])
            .collect();
        assert!(magnitudes.windows(2).all(|w| w[1] >= w[0]), "seed {seed}: {magnitudes:?}");
    }
}

#[test]
fn every_record_echoes_the_config_hash() {
    let cfg = ExperimentConfig::from_toml_str("name = \"echo\"\ntrials = 2\nn_symbols = 4\nsnr_db = [10.0]\n[[spoof]]\nrange_m = 40.0\ndoppler_hz = 20000.0\n").unwrap();
    let hash = cfg.hash();
    let ber = run_ber_sweep(&cfg, &RunOptions::default()).unwrap();
    let rd = run_rd_experiment(&cfg, &RunOptions::default()).unwrap();
    assert!(!ber.is_empty() && !rd.records.is_empty());
    assert!(ber.iter().chain(&rd.records).all(|r| r.config_hash == hash && r.seed == cfg.seed));
}

#[test]
fn artifacts_are_identical_across_thread_counts() {
    let cfg = ExperimentConfig::from_toml_str(
        "name = \"threads\"\ntrials = 3\nn_symbols = 10\nsnr_db = [15.0]\n[channel]\nrician_k = 4.0\n[[spoof]]\nrange_m = 40.0\ndoppler_hz = 20000.0\n",
    )
    .unwrap();
    let dirs: Vec<_> = [1, 3]
        .into_iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let outcome = run_rd_experiment(&cfg, &RunOptions { threads, force: false }).unwrap();
            let mut files = write_rd_outputs(dir.path(), &cfg, &outcome).unwrap();
            files.sort();
            let contents: Vec<(String, Vec<u8>)> = files
                .iter()
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap()))
                .collect();
            (dir, contents)
        })
        .collect();
    assert!(!dirs[0].1.is_empty());
    assert_eq!(dirs[0].1, dirs[1].1);
}
