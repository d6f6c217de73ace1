//! Running a tracker mode over a dataset and scoring it against truth.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;

use crate::association::{Label, LabeledStateSet};
use crate::error::{GlmbError, Result};
use crate::metrics::{ospa, ospa2, position, Ospa, OspaParams, Track};
use crate::models::Models;
use crate::sim::Dataset;
use crate::smoother::{Refinement, Smoother, SmootherConfig, StepDiagnostics};
use crate::trajectory::TrajectoryCache;

/// Tracker configuration compared in experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Extension and truncation only, scored on its online estimates.
    Filter,
    /// Moving-window smoother with window `N`, scored on its final tracks.
    Smoother(usize),
}

impl Mode {
    pub fn refinement(self) -> Refinement {
        match self {
            Mode::Filter => Refinement::None,
            Mode::Smoother(n) => Refinement::Window(n),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Filter => write!(f, "filter"),
            Mode::Smoother(n) => write!(f, "smoother:{n}"),
        }
    }
}

impl FromStr for Mode {
    type Err = GlmbError;

    /// Parses `filter` or `smoother:N` with `N >= 1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || GlmbError::InvalidArgument(format!("unknown mode `{s}`, expected filter or smoother:N"));
        match s.trim().split_once(':') {
            None if s.trim() == "filter" => Ok(Mode::Filter),
            Some(("filter", "1")) => Ok(Mode::Filter),
            Some(("smoother", n)) => match n.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(Mode::Smoother(n)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

/// Output of one tracker run.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeRun {
    pub mode: Mode,
    /// Reported labeled positions per scan; index 0 is scan 0 and empty.
    pub estimates: Vec<Vec<(Label, Vector2<f64>)>>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl ModeRun {
    pub fn cardinality(&self, scan: usize) -> usize {
        self.estimates.get(scan).map_or(0, Vec::len)
    }

    /// Estimated tracks keyed by label.
    pub fn tracks(&self) -> Vec<(Label, Track)> {
        group_tracks(self.estimates.iter().enumerate().map(|(j, set)| (j, set.as_slice())))
    }
}

fn group_tracks<'a>(scans: impl Iterator<Item = (usize, &'a [(Label, Vector2<f64>)])>) -> Vec<(Label, Track)> {
    let mut by_label: BTreeMap<Label, Track> = BTreeMap::new();
    for (j, set) in scans {
        for (label, p) in set {
            by_label.entry(*label).or_default().points.insert(j, *p);
        }
    }
    by_label.into_iter().collect()
}

fn positions(set: &LabeledStateSet) -> Vec<(Label, Vector2<f64>)> {
    set.items().iter().map(|(x, l)| (*l, position(x))).collect()
}

/// Tracks the dataset with `mode`. The filter reports the filtered states of
/// the best hypothesis after every scan; smoothers report the smoothed
/// tracks of the best final hypothesis.
pub fn run_mode(
    dataset: &Dataset,
    models: &Models,
    config: &SmootherConfig,
    mode: Mode,
    cache_capacity: usize,
) -> Result<ModeRun> {
    let config = SmootherConfig {
        refinement: mode.refinement(),
        ..config.clone()
    };
    let mut tracker = Smoother::with_cache(models.clone(), config, TrajectoryCache::new(cache_capacity))?;
    let n = dataset.duration();
    let mut estimates = vec![Vec::new(); n + 1];
    let mut diagnostics = Vec::with_capacity(n);
    for k in 1..=n {
        diagnostics.push(tracker.step(dataset.measurements[k].clone())?);
        if mode == Mode::Filter {
            estimates[k] = positions(&tracker.filtered()?);
        }
    }
    if let Mode::Smoother(_) = mode {
        for track in tracker.estimate()?.tracks {
            for (i, mean) in track.means.iter().enumerate() {
                estimates[track.start + i].push((track.label, position(mean)));
            }
        }
    }
    Ok(ModeRun {
        mode,
        estimates,
        diagnostics,
    })
}

/// Truth as tracks keyed by label.
pub fn truth_tracks(dataset: &Dataset) -> Vec<(Label, Track)> {
    let sets: Vec<Vec<(Label, Vector2<f64>)>> = dataset.truth.iter().map(positions).collect();
    group_tracks(sets.iter().enumerate().map(|(j, s)| (j, s.as_slice())))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanScore {
    pub scan: usize,
    pub ospa: Ospa,
    pub ospa2: f64,
    pub true_cardinality: usize,
    pub estimated_cardinality: usize,
}

/// Per-scan OSPA, OSPA on tracks and cardinalities for scans `1..=duration`.
/// OSPA on tracks at scan `k` only sees estimates reported up to `k`.
pub fn score(dataset: &Dataset, run: &ModeRun, params: &OspaParams) -> Result<Vec<ScanScore>> {
    params.validate()?;
    let truth: Vec<Track> = truth_tracks(dataset).into_iter().map(|(_, t)| t).collect();
    let est: Vec<Track> = run.tracks().into_iter().map(|(_, t)| t).collect();
    let n = dataset.duration();
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let x: Vec<_> = dataset.truth[k].items().iter().map(|(s, _)| position(s)).collect();
        let y: Vec<_> = run.estimates[k].iter().map(|(_, p)| *p).collect();
        out.push(ScanScore {
            scan: k,
            ospa: ospa(&x, &y, params),
            ospa2: ospa2(&truth, &est, params, k).total,
            true_cardinality: x.len(),
            estimated_cardinality: y.len(),
        });
    }
    Ok(out)
}

/// Time averages of OSPA and OSPA on tracks.
pub fn time_average(scores: &[ScanScore]) -> (f64, f64) {
    let n = scores.len().max(1) as f64;
    (
        scores.iter().map(|s| s.ospa.total).sum::<f64>() / n,
        scores.iter().map(|s| s.ospa2).sum::<f64>() / n,
    )
}
