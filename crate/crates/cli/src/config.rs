//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Every key is optional; missing keys keep the reference scenario values.
//!
//! | key | meaning |
//! |-----|---------|
//! | `duration` | number of scans |
//! | `p_detect` | detection probability |
//! | `p_survive` | survival probability used by the tracker |
//! | `clutter_rate` | mean clutter returns per scan |
//! | `region` | half width of the square surveillance region |
//! | `r_birth` | existence probability of every birth site |
//! | `birth_std` | standard deviation of every birth state component |
//! | `sigma_accel` | acceleration noise of the constant velocity model |
//! | `sigma_meas` | position measurement noise |
//! | `modes` | comma separated list, e.g. `filter, smoother:5` |
//! | `runs` | Monte Carlo runs |
//! | `seed` | base seed; run `r` uses `seed + r` |
//! | `workers` | concurrent runs |
//! | `out` | output directory |
//! | `cap_requested`, `cap_pre_gibbs` | hypothesis caps |
//! | `samples_filter`, `samples_gibbs` | Gibbs sample budgets |
//! | `independent_samples` | restart every windowed sample from its seed |
//! | `cache_capacity` | trajectory cache entries per run |
//! | `ospa_cutoff`, `ospa_order`, `ospa_window` | metric parameters |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use glmb_core::{Mode, MotionModel, OspaParams, Region, Scenario, SmootherConfig};
use nalgebra::Matrix4;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub tracker: SmootherConfig,
    pub modes: Vec<Mode>,
    pub runs: usize,
    pub seed: u64,
    pub workers: usize,
    pub cache_capacity: usize,
    pub ospa: OspaParams,
    pub out: PathBuf,
    pub export_dataset: Option<PathBuf>,
    pub replay: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: Scenario::default(),
            tracker: SmootherConfig::default(),
            modes: vec![Mode::Filter, Mode::Smoother(5), Mode::Smoother(20)],
            runs: 1,
            seed: 1,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            cache_capacity: 1 << 19,
            ospa: OspaParams::default(),
            out: PathBuf::from("results"),
            export_dataset: None,
            replay: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError(m.to_string()));
        if self.modes.is_empty() {
            return err("at least one mode is required");
        }
        if self.runs == 0 {
            return err("runs must be at least 1");
        }
        if self.workers == 0 {
            return err("workers must be at least 1");
        }
        if self.cache_capacity == 0 {
            return err("cache_capacity must be at least 1");
        }
        self.scenario.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.tracker.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.ospa.validate().map_err(|e| ConfigError(e.to_string()))
    }

    /// Reads a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = RunConfig::default();
        config.apply(&text)?;
        Ok(config)
    }

    /// Applies the settings in `text`.
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        let entries = parse_entries(text)?;
        let mut sigma_accel = None;
        for (key, (line, value)) in &entries {
            let at = |e: String| ConfigError(format!("line {line}: {key}: {e}"));
            let models = &mut self.scenario.models;
            match key.as_str() {
                "duration" => self.scenario.duration = parse(value).map_err(at)?,
                "p_detect" => models.sensor.p_detect = parse(value).map_err(at)?,
                "p_survive" => models.motion.p_survive = parse(value).map_err(at)?,
                "clutter_rate" => models.sensor.clutter_rate = parse(value).map_err(at)?,
                "region" => models.sensor.clutter_region = Region::square(parse(value).map_err(at)?),
                "r_birth" => {
                    let r: f64 = parse(value).map_err(at)?;
                    models.birth.components.iter_mut().for_each(|c| c.r_birth = r);
                }
                "birth_std" => {
                    let s: f64 = parse(value).map_err(at)?;
                    let cov = Matrix4::from_diagonal_element(s * s);
                    models.birth.components.iter_mut().for_each(|c| c.cov = cov);
                }
                "sigma_accel" => sigma_accel = Some(parse::<f64>(value).map_err(at)?),
                "sigma_meas" => {
                    let s: f64 = parse(value).map_err(at)?;
                    models.sensor.r = nalgebra::Matrix2::from_diagonal_element(s * s);
                }
                "modes" => self.modes = parse_modes(value).map_err(at)?,
                "runs" => self.runs = parse(value).map_err(at)?,
                "seed" => self.seed = parse(value).map_err(at)?,
                "workers" => self.workers = parse(value).map_err(at)?,
                "out" => self.out = PathBuf::from(value),
                "cap_requested" => self.tracker.cap_requested = parse(value).map_err(at)?,
                "cap_pre_gibbs" => self.tracker.cap_pre_gibbs = parse(value).map_err(at)?,
                "samples_filter" => self.tracker.samples_filter = parse(value).map_err(at)?,
                "samples_gibbs" => self.tracker.samples_gibbs = parse(value).map_err(at)?,
                "independent_samples" => self.tracker.independent_samples = parse(value).map_err(at)?,
                "cache_capacity" => self.cache_capacity = parse(value).map_err(at)?,
                "ospa_cutoff" => self.ospa.cutoff = parse(value).map_err(at)?,
                "ospa_order" => self.ospa.order = parse(value).map_err(at)?,
                "ospa_window" => self.ospa.window = parse(value).map_err(at)?,
                _ => return Err(ConfigError(format!("line {line}: unknown key `{key}`"))),
            }
        }
        if let Some(s) = sigma_accel {
            let p_survive = self.scenario.models.motion.p_survive;
            self.scenario.models.motion = MotionModel::constant_velocity(1.0, s, p_survive);
        }
        Ok(())
    }
}

fn parse_entries(text: &str) -> Result<BTreeMap<String, (usize, String)>, ConfigError> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", i + 1)))?;
        let key = key.trim().to_string();
        if entries.insert(key.clone(), (i + 1, value.trim().to_string())).is_some() {
            return Err(ConfigError(format!("line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(entries)
}

fn parse<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| format!("invalid value `{value}`: {e}"))
}

pub fn parse_modes(value: &str) -> Result<Vec<Mode>, String> {
    let mut modes = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let mode: Mode = item.parse().map_err(|e: glmb_core::GlmbError| e.to_string())?;
        if !modes.contains(&mode) {
            modes.push(mode);
        }
    }
    Ok(modes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_keeps_defaults() {
        let mut c = RunConfig::default();
        c.apply("# nothing\n\n").unwrap();
        assert_eq!(c.scenario.models, Scenario::default().models);
        assert_eq!(c.modes.len(), 3);
    }

    #[test]
    fn keys_are_applied() {
        let mut c = RunConfig::default();
        c.apply(
            "duration = 40\np_detect=0.9 # high\nmodes = filter, smoother:3\nruns=4\nsigma_meas = 10\nsigma_accel = 2\nospa_window = 5\n",
        )
        .unwrap();
        assert_eq!(c.scenario.duration, 40);
        assert_eq!(c.scenario.models.sensor.p_detect, 0.9);
        assert_eq!(c.modes, vec![Mode::Filter, Mode::Smoother(3)]);
        assert_eq!(c.runs, 4);
        assert_eq!(c.scenario.models.sensor.r[(0, 0)], 100.0);
        assert_eq!(c.scenario.models.motion.q[(1, 1)], 4.0);
        assert_eq!(c.scenario.models.motion.p_survive, 0.95);
        assert_eq!(c.ospa.window, 5);
        c.validate().unwrap();
    }

    #[test]
    fn bad_lines_are_rejected() {
        for text in ["runs", "colour = red", "runs = -1", "runs = 1\nruns = 2", "modes = kalman"] {
            assert!(RunConfig::default().apply(text).is_err(), "{text}");
        }
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut c = RunConfig::default();
        c.apply("p_detect = 1.5").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.apply("modes = ").unwrap();
        assert!(c.validate().is_err());
    }
}
