//! WebAssembly bindings for the browser demo. Every operation takes and
//! returns JSON strings so the page needs no generated types.
//!
//! The `*_json` functions hold the logic and run natively as well; the
//! exported wrappers only convert errors.

use glmb_core::experiment::time_average;
use glmb_core::{ospa, run_mode, score, Dataset, Mode, OspaParams, Scenario, SmootherConfig};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Scenario and tracker settings. Missing fields take the defaults.
#[derive(Clone, Debug, Deserialize)]
#[serde(default)]
pub struct DemoParams {
    pub seed: u64,
    pub duration: usize,
    pub p_detect: f64,
    pub clutter_rate: f64,
    pub samples_filter: usize,
    pub samples_gibbs: usize,
    pub cap_requested: usize,
    pub cap_pre_gibbs: usize,
}

impl Default for DemoParams {
    fn default() -> Self {
        let scenario = Scenario::default();
        let tracker = SmootherConfig::default();
        DemoParams {
            seed: 1,
            duration: scenario.duration,
            p_detect: scenario.models.sensor.p_detect,
            clutter_rate: scenario.models.sensor.clutter_rate,
            samples_filter: tracker.samples_filter,
            samples_gibbs: tracker.samples_gibbs,
            cap_requested: tracker.cap_requested,
            cap_pre_gibbs: tracker.cap_pre_gibbs,
        }
    }
}

impl DemoParams {
    fn parse(json: &str) -> Result<Self, String> {
        if json.trim().is_empty() {
            return Ok(DemoParams::default());
        }
        serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))
    }

    fn scenario(&self) -> Scenario {
        let mut s = Scenario {
            duration: self.duration,
            seed: self.seed,
            ..Scenario::default()
        };
        s.models.sensor.p_detect = self.p_detect;
        s.models.sensor.clutter_rate = self.clutter_rate;
        s
    }

    fn tracker(&self) -> SmootherConfig {
        SmootherConfig {
            samples_filter: self.samples_filter,
            samples_gibbs: self.samples_gibbs,
            cap_requested: self.cap_requested,
            cap_pre_gibbs: self.cap_pre_gibbs,
            seed: self.seed,
            ..SmootherConfig::default()
        }
    }
}

#[derive(Serialize)]
struct LabeledPoint {
    label: String,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct ScanOut {
    truth: Vec<LabeledPoint>,
    measurements: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct SimulationOut {
    region: [f64; 4],
    scans: Vec<ScanOut>,
}

#[derive(Serialize)]
struct TrackOut {
    label: String,
    /// `[scan, x, y]` rows.
    points: Vec<[f64; 3]>,
}

#[derive(Serialize)]
struct TrackingOut {
    mode: String,
    tracks: Vec<TrackOut>,
    cardinality: Vec<usize>,
    true_cardinality: Vec<usize>,
    ospa: Vec<f64>,
    ospa2: Vec<f64>,
    mean_ospa: f64,
    mean_ospa2: f64,
}

fn simulate_dataset(params: &DemoParams) -> Result<(Scenario, Dataset), String> {
    let scenario = params.scenario();
    let data = scenario.generate().map_err(|e| e.to_string())?;
    Ok((scenario, data))
}

/// Simulates the reference scenario. Scan 0 is omitted.
pub fn simulate_json(params: &str) -> Result<String, String> {
    let params = DemoParams::parse(params)?;
    let (scenario, data) = simulate_dataset(&params)?;
    let r = scenario.models.sensor.clutter_region;
    let scans = (1..=data.duration())
        .map(|k| ScanOut {
            truth: data.truth[k]
                .items()
                .iter()
                .map(|(x, l)| LabeledPoint {
                    label: l.to_string(),
                    x: x[0],
                    y: x[2],
                })
                .collect(),
            measurements: data.measurements[k].iter().map(|z| [z.x, z.y]).collect(),
        })
        .collect();
    let out = SimulationOut {
        region: [r.x_min, r.x_max, r.y_min, r.y_max],
        scans,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Simulates with `params` and tracks the result with `mode`
/// (`filter` or `smoother:N`).
pub fn track_json(params: &str, mode: &str) -> Result<String, String> {
    let params = DemoParams::parse(params)?;
    let mode: Mode = mode.parse().map_err(|e: glmb_core::GlmbError| e.to_string())?;
    let (scenario, data) = simulate_dataset(&params)?;
    let run = run_mode(&data, &scenario.models, &params.tracker(), mode, 1 << 17).map_err(|e| e.to_string())?;
    let scores = score(&data, &run, &OspaParams::default()).map_err(|e| e.to_string())?;
    let (mean_ospa, mean_ospa2) = time_average(&scores);
    let tracks = run
        .tracks()
        .into_iter()
        .map(|(label, t)| TrackOut {
            label: label.to_string(),
            points: t.points.iter().map(|(k, p)| [*k as f64, p.x, p.y]).collect(),
        })
        .collect();
    let out = TrackingOut {
        mode: mode.to_string(),
        tracks,
        cardinality: scores.iter().map(|s| s.estimated_cardinality).collect(),
        true_cardinality: scores.iter().map(|s| s.true_cardinality).collect(),
        ospa: scores.iter().map(|s| s.ospa.total).collect(),
        ospa2: scores.iter().map(|s| s.ospa2).collect(),
        mean_ospa,
        mean_ospa2,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

fn points(flat: &[f64]) -> Result<Vec<Vector2<f64>>, String> {
    if !flat.len().is_multiple_of(2) {
        return Err("coordinates must come in x, y pairs".into());
    }
    Ok(flat.chunks(2).map(|c| Vector2::new(c[0], c[1])).collect())
}

/// OSPA between two point sets given as flat `[x0, y0, x1, y1, ...]` arrays.
/// Returns `{"total": .., "localisation": .., "cardinality": ..}`.
pub fn ospa_json(x: &[f64], y: &[f64], cutoff: f64, order: f64) -> Result<String, String> {
    let params = OspaParams {
        cutoff,
        order,
        ..OspaParams::default()
    };
    params.validate().map_err(|e| e.to_string())?;
    let d = ospa(&points(x)?, &points(y)?, &params);
    Ok(serde_json::json!({
        "total": d.total,
        "localisation": d.localisation,
        "cardinality": d.cardinality,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn simulate(params: &str) -> Result<String, JsError> {
    simulate_json(params).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn track(params: &str, mode: &str) -> Result<String, JsError> {
    track_json(params, mode).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ospa_distance(x: &[f64], y: &[f64], cutoff: f64, order: f64) -> Result<String, JsError> {
    ospa_json(x, y, cutoff, order).map_err(|e| JsError::new(&e))
}
