//! Monte Carlo orchestration and artifact writing.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use glmb_core::experiment::{time_average, truth_tracks};
use glmb_core::{run_mode, score, Dataset, GlmbError, Label, Mode, ModeRun, ScanScore, Scenario};
use nalgebra::Vector2;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::plot::{line_chart, track_chart, Series};

pub const INCOMPLETE: &str = "INCOMPLETE";

#[derive(Debug)]
pub enum RunError {
    Tracker(GlmbError),
    Io(PathBuf, io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Tracker(e) => write!(f, "{e}"),
            RunError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<GlmbError> for RunError {
    fn from(e: GlmbError) -> Self {
        RunError::Tracker(e)
    }
}

/// One tracker mode on one Monte Carlo run.
pub struct ModeResult {
    pub run: ModeRun,
    pub scores: Vec<ScanScore>,
}

pub struct RunResult {
    pub index: usize,
    pub dataset: Dataset,
    pub modes: Vec<ModeResult>,
}

/// Per-mode time averages over runs.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub mode: Mode,
    pub ospa: (f64, f64),
    pub ospa2: (f64, f64),
}

/// Directory name of a mode, e.g. `smoother-5`.
pub fn mode_dir(mode: Mode) -> String {
    mode.to_string().replace(':', "-")
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| RunError::Io(dir.to_path_buf(), e))?;
    }
    fs::write(path, text).map_err(|e| RunError::Io(path.to_path_buf(), e))
}

fn dataset_for(config: &RunConfig, r: usize) -> Result<Dataset, RunError> {
    match &config.replay {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| RunError::Io(path.clone(), e))?;
            Ok(Dataset::from_text(&text)?)
        }
        None => {
            let scenario = Scenario {
                seed: config.seed.wrapping_add(r as u64),
                ..config.scenario.clone()
            };
            Ok(scenario.generate()?)
        }
    }
}

fn run_once(config: &RunConfig, r: usize) -> Result<RunResult, RunError> {
    let dataset = dataset_for(config, r)?;
    let tracker = glmb_core::SmootherConfig {
        seed: config.seed.wrapping_add(r as u64),
        ..config.tracker.clone()
    };
    let mut modes = Vec::with_capacity(config.modes.len());
    for &mode in &config.modes {
        let run = run_mode(&dataset, &config.scenario.models, &tracker, mode, config.cache_capacity)?;
        let scores = score(&dataset, &run, &config.ospa)?;
        modes.push(ModeResult { run, scores });
    }
    Ok(RunResult { index: r, dataset, modes })
}

fn tracks_csv(run: &ModeRun) -> String {
    let mut s = String::from("scan,label,x,y\n");
    for (scan, set) in run.estimates.iter().enumerate() {
        for (label, p) in set {
            writeln!(s, "{scan},{label},{:.3},{:.3}", p.x, p.y).unwrap();
        }
    }
    s
}

fn metrics_csv(rows: impl Iterator<Item = (usize, [f64; 4])>) -> String {
    let mut s = String::from("scan,ospa,ospa_loc,ospa_card,ospa2\n");
    for (scan, [a, b, c, d]) in rows {
        writeln!(s, "{scan},{a:.6},{b:.6},{c:.6},{d:.6}").unwrap();
    }
    s
}

fn cardinality_csv(rows: impl Iterator<Item = (usize, f64, f64)>) -> String {
    let mut s = String::from("scan,true,estimated\n");
    for (scan, t, e) in rows {
        writeln!(s, "{scan},{},{}", fmt_num(t), fmt_num(e)).unwrap();
    }
    s
}

fn runtime_csv(rows: impl Iterator<Item = (usize, f64)>) -> String {
    let mut s = String::from("scan,seconds\n");
    for (scan, t) in rows {
        writeln!(s, "{scan},{t:.6}").unwrap();
    }
    s
}

/// Integers without decimals, other values with six.
fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.6}")
    }
}

fn score_row(s: &ScanScore) -> [f64; 4] {
    [s.ospa.total, s.ospa.localisation, s.ospa.cardinality, s.ospa2]
}

fn write_run(dir: &Path, result: &ModeResult) -> Result<(), RunError> {
    write(&dir.join("tracks.csv"), &tracks_csv(&result.run))?;
    write(
        &dir.join("metrics.csv"),
        &metrics_csv(result.scores.iter().map(|s| (s.scan, score_row(s)))),
    )?;
    write(
        &dir.join("cardinality.csv"),
        &cardinality_csv(
            result
                .scores
                .iter()
                .map(|s| (s.scan, s.true_cardinality as f64, s.estimated_cardinality as f64)),
        ),
    )?;
    write(
        &dir.join("runtime.csv"),
        &runtime_csv(result.run.diagnostics.iter().map(|d| (d.scan, d.seconds))),
    )
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Per-scan mean over runs of `f`.
fn scan_means<F: Fn(&ModeResult, usize) -> f64>(per_run: &[&ModeResult], scans: usize, f: F) -> Vec<f64> {
    (0..scans)
        .map(|i| per_run.iter().map(|r| f(r, i)).sum::<f64>() / per_run.len() as f64)
        .collect()
}

fn summary_csv(rows: &[Summary], runs: usize) -> String {
    let mut s = String::from("mode,runs,ospa_mean,ospa_std,ospa2_mean,ospa2_std\n");
    for r in rows {
        writeln!(
            s,
            "{},{runs},{:.6},{:.6},{:.6},{:.6}",
            r.mode, r.ospa.0, r.ospa.1, r.ospa2.0, r.ospa2.1
        )
        .unwrap();
    }
    s
}

/// Writes merged tables, the summary and plots. Results must be in run order.
fn merge(config: &RunConfig, results: &[RunResult]) -> Result<Vec<Summary>, RunError> {
    let out = &config.out;
    let mut summaries = Vec::new();
    let mut ospa_series = Vec::new();
    let mut ospa2_series = Vec::new();
    let mut card_series = Vec::new();
    let mut runtime_series = Vec::new();
    let scans = results[0].dataset.duration();
    let true_card: Vec<f64> = (1..=scans)
        .map(|k| results.iter().map(|r| r.dataset.truth[k].len() as f64).sum::<f64>() / results.len() as f64)
        .collect();
    card_series.push(Series::new("truth", (1..=scans).map(|k| k as f64).zip(true_card.iter().copied()).collect()));

    for (m, &mode) in config.modes.iter().enumerate() {
        let dir = out.join(mode_dir(mode));
        let per_run: Vec<&ModeResult> = results.iter().map(|r| &r.modes[m]).collect();
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|c| scan_means(&per_run, scans, |r, i| score_row(&r.scores[i])[c]))
            .collect();
        let est_card = scan_means(&per_run, scans, |r, i| r.scores[i].estimated_cardinality as f64);
        let runtime = scan_means(&per_run, scans, |r, i| r.run.diagnostics[i].seconds);

        write(&dir.join("tracks.csv"), &tracks_csv(&per_run[0].run))?;
        write(
            &dir.join("metrics.csv"),
            &metrics_csv((0..scans).map(|i| (i + 1, [cols[0][i], cols[1][i], cols[2][i], cols[3][i]]))),
        )?;
        write(
            &dir.join("cardinality.csv"),
            &cardinality_csv((0..scans).map(|i| (i + 1, true_card[i], est_card[i]))),
        )?;
        write(
            &dir.join("runtime.csv"),
            &runtime_csv((0..scans).map(|i| (i + 1, runtime[i]))),
        )?;

        let averages: Vec<(f64, f64)> = per_run.iter().map(|r| time_average(&r.scores)).collect();
        let summary = Summary {
            mode,
            ospa: mean_std(&averages.iter().map(|a| a.0).collect::<Vec<_>>()),
            ospa2: mean_std(&averages.iter().map(|a| a.1).collect::<Vec<_>>()),
        };
        write(&dir.join("summary.csv"), &summary_csv(std::slice::from_ref(&summary), results.len()))?;
        summaries.push(summary);

        let xs = || (1..=scans).map(|k| k as f64);
        let name = mode.to_string();
        ospa_series.push(Series::new(&name, xs().zip(cols[0].iter().copied()).collect()));
        ospa2_series.push(Series::new(&name, xs().zip(cols[3].iter().copied()).collect()));
        card_series.push(Series::new(&name, xs().zip(est_card).collect()));
        runtime_series.push(Series::new(&name, xs().zip(runtime).collect()));

        let region = config.scenario.models.sensor.clutter_region;
        let first = &results[0];
        let truth: Vec<Vec<Vector2<f64>>> = truth_tracks(&first.dataset)
            .into_iter()
            .map(|(_, t)| t.points.into_values().collect())
            .collect();
        let est: Vec<(Label, Vec<Vector2<f64>>)> = per_run[0]
            .run
            .tracks()
            .into_iter()
            .map(|(l, t)| (l, t.points.into_values().collect()))
            .collect();
        write(
            &out.join(format!("tracks-{}.svg", mode_dir(mode))),
            &track_chart(&format!("Tracks, {mode}, run 0"), &truth, &est, region),
        )?;
    }
    write(&out.join("summary.csv"), &summary_csv(&summaries, results.len()))?;
    write(&out.join("ospa.svg"), &line_chart("OSPA", "scan", "OSPA (m)", &ospa_series))?;
    write(&out.join("ospa2.svg"), &line_chart("OSPA on tracks", "scan", "OSPA2 (m)", &ospa2_series))?;
    write(&out.join("cardinality.svg"), &line_chart("Cardinality", "scan", "mean cardinality", &card_series))?;
    write(&out.join("runtime.svg"), &line_chart("Step time", "scan", "seconds", &runtime_series))?;
    Ok(summaries)
}

/// Runs every mode on every Monte Carlo run and writes all artifacts under
/// `config.out`. An `INCOMPLETE` marker stays behind if anything fails.
pub fn run(config: &RunConfig) -> Result<Vec<Summary>, RunError> {
    let marker = config.out.join(INCOMPLETE);
    write(&marker, "run in progress\n")?;
    match run_inner(config) {
        Ok(summaries) => {
            fs::remove_file(&marker).map_err(|e| RunError::Io(marker.clone(), e))?;
            Ok(summaries)
        }
        Err(e) => {
            let _ = fs::write(&marker, format!("{e}\n"));
            Err(e)
        }
    }
}

fn run_inner(config: &RunConfig) -> Result<Vec<Summary>, RunError> {
    if let Some(path) = &config.export_dataset {
        write(path, &dataset_for(config, 0)?.to_text())?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| RunError::Io(config.out.clone(), io::Error::other(e)))?;
    let results: Vec<RunResult> = pool.install(|| {
        (0..config.runs)
            .into_par_iter()
            .map(|r| {
                let result = run_once(config, r)?;
                for (m, mode) in config.modes.iter().enumerate() {
                    let dir = config.out.join(mode_dir(*mode)).join("runs").join(r.to_string());
                    write_run(&dir, &result.modes[m])?;
                }
                eprintln!("run {} of {} done", r + 1, config.runs);
                Ok(result)
            })
            .collect::<Result<Vec<_>, RunError>>()
    })?;
    debug_assert!(results.iter().enumerate().all(|(i, r)| r.index == i));
    merge(config, &results)
}
