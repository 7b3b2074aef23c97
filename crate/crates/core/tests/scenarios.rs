use std::path::PathBuf;

use quantbeam::harness::{load_scenario, preset, HarnessError};

fn scenario_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

#[test]
fn shipped_files_equal_the_presets() {
    for name in ["A", "B"] {
        let path = scenario_file(&format!("{name}.json"));
        let loaded = load_scenario(path.to_str().unwrap()).unwrap();
        assert_eq!(loaded.to_json(), preset(name).unwrap().to_json());
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let e = load_scenario(scenario_file("nope.json").to_str().unwrap()).unwrap_err();
    assert!(matches!(e, HarnessError::Io { .. }));
    assert_eq!(e.exit_code(), 3);
}
