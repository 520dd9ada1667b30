//! Metric and sweep files as seen by a downstream plotting consumer: columns
//! are looked up by their literal names, never by position or remapping.

use std::collections::HashMap;
use std::path::Path;

use edgeflow::harness::{
    run_experiment, write_output, ExperimentConfig, ExperimentKind, ExperimentOutput, QuantPolicy,
};

const ROUND_COLUMNS: [&str; 7] = [
    "round",
    "test_accuracy",
    "cum_bits",
    "bits_per_coeff",
    "aircomp_mse",
    "selected_device",
    "wall_time_ms",
];

const SWEEP_COLUMNS: [&str; 10] = [
    "k",
    "m_r",
    "m_t",
    "n",
    "snr_db",
    "mode",
    "beamformer",
    "trials",
    "mean_mse",
    "mean_power",
];

/// Parses a CSV into named columns the way a dataframe loader would.
fn load(path: &Path, expected: &[&str]) -> Vec<HashMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(header, expected, "{}", path.display());
    reader
        .records()
        .map(|r| {
            header
                .iter()
                .cloned()
                .zip(r.unwrap().iter().map(str::to_owned))
                .collect()
        })
        .collect()
}

fn float(cell: &str) -> Option<f64> {
    (!cell.is_empty()).then(|| cell.parse().unwrap())
}

fn run_to(cfg: &ExperimentConfig, path: &Path) -> ExperimentOutput {
    let out = run_experiment(cfg).unwrap();
    write_output(&out, path).unwrap();
    out
}

fn assert_rounds_contiguous(rows: &[HashMap<String, String>]) {
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row["round"].parse::<usize>().unwrap(), i);
        let acc = float(&row["test_accuracy"]).unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert!(float(&row["wall_time_ms"]).unwrap() >= 0.0);
    }
}

#[test]
fn federated_files_expose_accuracy_and_rate_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::FederatedQuantized);
    cfg.rounds = 12;
    cfg.devices = 6;
    for policy in [
        QuantPolicy::Hierarchical,
        QuantPolicy::Signsgd,
        QuantPolicy::Unquantized,
    ] {
        cfg.quantization.policy = policy;
        let path = dir.path().join(format!("{}.csv", policy.as_str()));
        run_to(&cfg, &path);
        let rows = load(&path, &ROUND_COLUMNS);
        assert_eq!(rows.len(), 12);
        assert_rounds_contiguous(&rows);

        let bits: Vec<u64> = rows.iter().map(|r| r["cum_bits"].parse().unwrap()).collect();
        let per_round = bits[0];
        assert!(per_round > 0);
        for w in bits.windows(2) {
            assert_eq!(w[1] - w[0], per_round, "{}", policy.as_str());
        }
        let bpc = float(&rows[0]["bits_per_coeff"]).unwrap();
        assert_eq!(per_round as f64, bpc * 65.0 * cfg.devices as f64);
        assert!(rows
            .iter()
            .all(|r| r["aircomp_mse"].is_empty() && r["selected_device"].is_empty()));
    }
}

#[test]
fn aircomp_and_scheduling_files_fill_their_own_columns() {
    let dir = tempfile::tempdir().unwrap();

    let mut air = ExperimentConfig::new(ExperimentKind::FederatedAircomp);
    air.rounds = 5;
    let path = dir.path().join("air.csv");
    run_to(&air, &path);
    let rows = load(&path, &ROUND_COLUMNS);
    assert_rounds_contiguous(&rows);
    assert!(rows
        .iter()
        .all(|r| r["cum_bits"].is_empty() && float(&r["aircomp_mse"]).unwrap() >= 0.0));

    let mut sched = ExperimentConfig::new(ExperimentKind::CentralizedScheduling);
    sched.rounds = 15;
    let path = dir.path().join("sched.csv");
    run_to(&sched, &path);
    let rows = load(&path, &ROUND_COLUMNS);
    assert_rounds_contiguous(&rows);
    for r in &rows {
        assert!(r["selected_device"].parse::<usize>().unwrap() < sched.devices);
        assert!(r["cum_bits"].is_empty() && r["aircomp_mse"].is_empty());
    }
}

#[test]
fn early_stop_still_writes_a_complete_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::CentralizedScheduling);
    cfg.devices = 2;
    cfg.dataset.per_device = 3;
    cfg.dataset.seed_size = 4;
    cfg.rounds = 20;
    let path = dir.path().join("short.csv");
    match run_to(&cfg, &path) {
        ExperimentOutput::Rounds { early_stopped, .. } => assert!(early_stopped),
        other => panic!("unexpected output {other:?}"),
    }
    let rows = load(&path, &ROUND_COLUMNS);
    assert_eq!(rows.len(), 6);
    assert_rounds_contiguous(&rows);
}

#[test]
fn sweep_file_groups_by_mode_and_streams() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::AircompSweep);
    cfg.sweep.trials = 200;
    cfg.sweep.snr_db = vec![f64::INFINITY, 10.0, 0.0];
    let path = dir.path().join("sweep.csv");
    run_to(&cfg, &path);
    let rows = load(&path, &SWEEP_COLUMNS);
    // 3 SNRs x 2 modes x {centroid, random}
    assert_eq!(rows.len(), 12);
    let mse = |snr: f64, mode: &str, bf: &str| {
        let row = rows
            .iter()
            .find(|r| r["snr_db"].parse::<f64>().unwrap() == snr && r["mode"] == mode && r["beamformer"] == bf)
            .unwrap_or_else(|| panic!("no row for {snr} {mode} {bf}"));
        float(&row["mean_mse"]).unwrap()
    };
    assert!(mse(f64::INFINITY, "aligned", "centroid") < 1e-18);
    let ratio = mse(0.0, "aligned", "centroid") / mse(10.0, "aligned", "centroid");
    assert!((9.0..=11.0).contains(&ratio), "ratio {ratio}");
    for r in &rows {
        assert!(r["snr_db"].parse::<f64>().is_ok(), "{}", r["snr_db"]);
        assert_eq!(r["trials"], "200");
    }
}

#[test]
fn mismatched_header_is_detected_by_the_reader() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "round,accuracy\n0,0.5\n").unwrap();
    let err = edgeflow::harness::read_metrics(&path).unwrap_err();
    assert!(
        err.to_string().contains("test_accuracy") || err.to_string().contains("header"),
        "{err}"
    );
}
