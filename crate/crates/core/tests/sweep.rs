use spad_ofdm::experiment::{
    figure_presets, manifest_path, parse_config, run_sweep, write_csv, write_outputs, Mode, SweepKind,
    COUNT_COLUMNS, LINK_COLUMNS,
};

fn header(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).lines().next().unwrap().to_owned()
}

#[test]
fn analytic_sweep_writes_contract_columns() {
    let mut spec = parse_config(r#"{"kappa": [2, 3], "p_rx_dbm": [-60, -50, -40]}"#).unwrap();
    spec.mode = Mode::Analytic;
    let result = run_sweep(&spec).unwrap();
    assert_eq!(result.table.len(), 6);

    let mut out = Vec::new();
    write_csv(&result, &mut out).unwrap();
    assert_eq!(header(&out), LINK_COLUMNS.join(","));
    let text = String::from_utf8(out).unwrap();
    let second = text.lines().nth(1).unwrap();
    assert!(second.starts_with("-60.0,2.0,16,aco,"), "{second}");
}

#[test]
fn photon_count_sweep() {
    let spec = figure_presets("fig1").unwrap();
    assert_eq!(spec.kind, SweepKind::PhotonCounts);
    let result = run_sweep(&spec).unwrap();
    assert_eq!(result.table.len(), 61);
    let mut out = Vec::new();
    write_csv(&result, &mut out).unwrap();
    assert_eq!(header(&out), COUNT_COLUMNS.join(","));
}

#[test]
fn outputs_and_manifest_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = parse_config(r#"{"p_rx_dbm": [-55, -45], "frames": 50}"#).unwrap();
    spec.mode = Mode::Both;
    let result = run_sweep(&spec).unwrap();
    let csv = dir.path().join("run.csv");
    let manifest = write_outputs(&result, &csv).unwrap();
    assert_eq!(manifest, manifest_path(&csv));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(json["config_hash"], result.config_hash.as_str());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
}

#[test]
fn config_errors_are_reported() {
    assert!(parse_config(r#"{"kappa": 3, "bogus": 1}"#).is_err());
    assert!(parse_config(r#"{"p_rx_dbm": [-40, -50]}"#).is_err());
    assert!(parse_config("not json").is_err());
}
