//! Frozen FP-SS sweep of preset A. Set `QUANTBEAM_BLESS=1` to rewrite the fixture.

use std::path::Path;

use quantbeam::harness::{preset, rows_to_csv, run_sweep, Method, SweepConfig};

#[test]
fn preset_a_fp_ss_sweep_matches_fixture() {
    let cfg = SweepConfig {
        methods: vec![Method::FpSs, Method::MvdrCmHq, Method::EffMvdr],
        ..SweepConfig::default()
    };
    let csv = rows_to_csv(&run_sweep(&preset("A").unwrap(), &cfg).unwrap().rows());
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/sweep_A_fp-ss.csv");
    if std::env::var_os("QUANTBEAM_BLESS").is_some() {
        std::fs::write(&path, &csv).unwrap();
    }
    let frozen = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().count(), 1 + 37 * 3);
    assert_eq!(csv, frozen);
}
