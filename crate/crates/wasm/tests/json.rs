use glmb_wasm::{ospa_json, simulate_json, track_json};
use serde_json::Value;

const FAST: &str = r#"{"seed": 4, "duration": 12, "samples_filter": 40, "samples_gibbs": 5, "cap_requested": 10, "cap_pre_gibbs": 3}"#;

#[test]
fn simulation_has_one_entry_per_scan() {
    let v: Value = serde_json::from_str(&simulate_json(FAST).unwrap()).unwrap();
    let scans = v["scans"].as_array().unwrap();
    assert_eq!(scans.len(), 12);
    assert_eq!(scans[4]["truth"].as_array().unwrap().len(), 4);
    assert_eq!(v["region"], serde_json::json!([-1000.0, 1000.0, -1000.0, 1000.0]));
    assert_eq!(simulate_json(FAST).unwrap(), simulate_json(FAST).unwrap());
}

#[test]
fn empty_parameters_use_defaults() {
    let v: Value = serde_json::from_str(&simulate_json("").unwrap()).unwrap();
    assert_eq!(v["scans"].as_array().unwrap().len(), 100);
}

#[test]
fn tracking_reports_series_for_every_scan() {
    for mode in ["filter", "smoother:4"] {
        let v: Value = serde_json::from_str(&track_json(FAST, mode).unwrap()).unwrap();
        assert_eq!(v["mode"], mode);
        assert_eq!(v["cardinality"].as_array().unwrap().len(), 12);
        assert_eq!(v["ospa"].as_array().unwrap().len(), 12);
        let mean = v["mean_ospa"].as_f64().unwrap();
        assert!((0.0..=100.0).contains(&mean));
    }
}

#[test]
fn bad_input_is_an_error() {
    assert!(track_json(FAST, "kalman").is_err());
    assert!(simulate_json("{not json").is_err());
    assert!(ospa_json(&[1.0], &[], 100.0, 1.0).is_err());
    assert!(ospa_json(&[], &[], -1.0, 1.0).is_err());
}

#[test]
fn ospa_of_hand_placed_points() {
    let v: Value = serde_json::from_str(&ospa_json(&[0.0, 0.0], &[3.0, 4.0, 500.0, 0.0], 10.0, 1.0).unwrap()).unwrap();
    assert!((v["total"].as_f64().unwrap() - 7.5).abs() < 1e-12);
    assert_eq!(v["cardinality"].as_f64().unwrap(), 5.0);
}
