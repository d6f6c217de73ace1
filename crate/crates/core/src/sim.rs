//! Ground truth and measurement simulation.

use std::fmt::Write as _;

use nalgebra::{Matrix4, SymmetricEigen, Vector2, Vector4};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::association::{Label, LabeledStateSet};
use crate::error::{GlmbError, Result};
use crate::models::Models;

/// `count` objects drawn from birth component `component` at `birth_scan`,
/// alive on `birth_scan..death_scan`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpawnEvent {
    pub birth_scan: usize,
    pub count: usize,
    pub component: usize,
    pub death_scan: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub duration: usize,
    pub spawn_schedule: Vec<SpawnEvent>,
    pub models: Models,
    pub seed: u64,
}

impl Default for Scenario {
    /// Twelve objects over 100 scans: four (one per birth site) appear at
    /// scans 1, 20 and 50 and disappear at scans 10, 40 and 90.
    fn default() -> Self {
        let mut spawn_schedule = Vec::new();
        for (birth, death) in [(1, 10), (20, 40), (50, 90)] {
            for component in 1..=4 {
                spawn_schedule.push(SpawnEvent {
                    birth_scan: birth,
                    count: 1,
                    component,
                    death_scan: death,
                });
            }
        }
        Scenario {
            duration: 100,
            spawn_schedule,
            models: Models::default(),
            seed: 0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.models.validate()?;
        for e in &self.spawn_schedule {
            if e.death_scan <= e.birth_scan || e.birth_scan == 0 {
                return Err(GlmbError::InvalidArgument(format!(
                    "spawn at {} must satisfy 1 <= birth < death ({})",
                    e.birth_scan, e.death_scan
                )));
            }
            let c = self.models.birth.component(e.component).ok_or_else(|| {
                GlmbError::InvalidArgument(format!("unknown birth component {}", e.component))
            })?;
            let p = Vector2::new(c.mean[0], c.mean[2]);
            if !self.models.sensor.clutter_region.contains(&p) {
                return Err(GlmbError::InvalidArgument(format!(
                    "birth component {} lies outside the surveillance region",
                    e.component
                )));
            }
        }
        Ok(())
    }

    /// Number of scheduled objects alive at `scan`.
    pub fn scheduled_cardinality(&self, scan: usize) -> usize {
        self.spawn_schedule
            .iter()
            .filter(|e| e.birth_scan <= scan && scan < e.death_scan)
            .map(|e| e.count)
            .sum()
    }

    /// Generates the dataset from the scenario's own seed.
    pub fn generate(&self) -> Result<Dataset> {
        generate(self, &mut ChaCha8Rng::seed_from_u64(self.seed))
    }
}

/// Truth and measurements for scans `0..=duration`; scan 0 is empty.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub truth: Vec<LabeledStateSet>,
    pub measurements: Vec<Vec<Vector2<f64>>>,
}

impl Dataset {
    pub fn duration(&self) -> usize {
        self.measurements.len().saturating_sub(1)
    }

    /// Plain-text export, one block per scan:
    ///
    /// ```text
    /// glmb-dataset 1
    /// scans 2
    /// scan 1
    /// truth 1/1 501.2 -0.4 498.0 1.1
    /// z 503.9 497.5
    /// scan 2
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "glmb-dataset 1");
        let _ = writeln!(out, "scans {}", self.duration());
        for j in 1..=self.duration() {
            let _ = writeln!(out, "scan {j}");
            if let Some(truth) = self.truth.get(j) {
                for (x, l) in truth.items() {
                    let _ = writeln!(out, "truth {l} {} {} {} {}", x[0], x[1], x[2], x[3]);
                }
            }
            for z in &self.measurements[j] {
                let _ = writeln!(out, "z {} {}", z.x, z.y);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Dataset> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let err = |line: usize, message: String| GlmbError::Parse { line, message };
        match lines.next() {
            Some((_, "glmb-dataset 1")) => {}
            Some((n, other)) => return Err(err(n, format!("unexpected header `{other}`"))),
            None => return Err(err(0, "empty dataset".into())),
        }
        let (n, count_line) = lines.next().ok_or_else(|| err(0, "missing scan count".into()))?;
        let duration: usize = count_line
            .strip_prefix("scans ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| err(n, format!("bad scan count `{count_line}`")))?;
        let mut data = Dataset {
            truth: (0..=duration).map(LabeledStateSet::new).collect(),
            measurements: vec![Vec::new(); duration + 1],
        };
        let mut current = 0usize;
        for (n, line) in lines {
            let mut parts = line.split_whitespace();
            let tag = parts.next().unwrap_or_default();
            let nums = |parts: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>> {
                parts
                    .map(|p| p.parse::<f64>().map_err(|e| err(n, format!("`{p}`: {e}"))))
                    .collect()
            };
            match tag {
                "scan" => {
                    let j: usize = parts
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| err(n, "bad scan index".into()))?;
                    if j != current + 1 || j > duration {
                        return Err(err(n, format!("scan {j} out of order")));
                    }
                    current = j;
                }
                "truth" if current > 0 => {
                    let label: Label = parts
                        .next()
                        .ok_or_else(|| err(n, "missing label".into()))?
                        .parse()
                        .map_err(|m| err(n, m))?;
                    let v = nums(parts)?;
                    if v.len() != 4 {
                        return Err(err(n, "truth needs four state values".into()));
                    }
                    data.truth[current]
                        .insert(Vector4::new(v[0], v[1], v[2], v[3]), label)
                        .map_err(|e| err(n, e.to_string()))?;
                }
                "z" if current > 0 => {
                    let v = nums(parts)?;
                    if v.len() != 2 {
                        return Err(err(n, "measurement needs two values".into()));
                    }
                    data.measurements[current].push(Vector2::new(v[0], v[1]));
                }
                _ => return Err(err(n, format!("unexpected line `{line}`"))),
            }
        }
        if current != duration {
            return Err(err(0, format!("expected {duration} scans, found {current}")));
        }
        Ok(data)
    }
}

/// Square root `L` with `L L' = cov` for a positive semi-definite matrix.
pub(crate) fn psd_sqrt(cov: &Matrix4<f64>) -> Matrix4<f64> {
    let eig = SymmetricEigen::new(*cov);
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    eig.eigenvectors * Matrix4::from_diagonal(&d)
}

fn normal4<R: Rng + ?Sized>(rng: &mut R) -> Vector4<f64> {
    Vector4::from_fn(|_, _| rng.sample(StandardNormal))
}

/// Simulates the scenario. Object lifetimes follow the schedule exactly;
/// motion, detections and clutter are random.
pub fn generate<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Dataset> {
    scenario.validate()?;
    let models = &scenario.models;
    let sensor = &models.sensor;
    let q_sqrt = psd_sqrt(&models.motion.q);
    let r_chol = sensor
        .r
        .cholesky()
        .ok_or_else(|| GlmbError::InvalidArgument("R is not positive definite".into()))?
        .l();
    let clutter = if sensor.clutter_rate > 0.0 {
        Some(Poisson::new(sensor.clutter_rate).map_err(|e| GlmbError::InvalidArgument(e.to_string()))?)
    } else {
        None
    };
    let region = sensor.clutter_region;

    struct Object {
        label: Label,
        death: usize,
        state: Vector4<f64>,
    }
    let mut objects: Vec<Object> = Vec::new();
    let mut data = Dataset {
        truth: vec![LabeledStateSet::new(0)],
        measurements: vec![Vec::new()],
    };
    for k in 1..=scenario.duration {
        for obj in objects.iter_mut() {
            obj.state = models.motion.f * obj.state + q_sqrt * normal4(rng);
        }
        objects.retain(|o| o.death > k);
        let mut iota = 0;
        for e in scenario.spawn_schedule.iter().filter(|e| e.birth_scan == k) {
            let c = models.birth.component(e.component).expect("validated");
            let b_sqrt = psd_sqrt(&c.cov);
            for _ in 0..e.count {
                iota += 1;
                objects.push(Object {
                    label: Label::new(k, iota),
                    death: e.death_scan,
                    state: c.mean + b_sqrt * normal4(rng),
                });
            }
        }

        let mut truth = LabeledStateSet::new(k);
        let mut z = Vec::new();
        for obj in &objects {
            truth.insert(obj.state, obj.label)?;
            if rng.random::<f64>() < sensor.p_detect {
                let noise = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                z.push(sensor.h * obj.state + r_chol * noise);
            }
        }
        if let Some(poisson) = &clutter {
            let n = poisson.sample(rng) as usize;
            for _ in 0..n {
                z.push(Vector2::new(
                    rng.random_range(region.x_min..=region.x_max),
                    rng.random_range(region.y_min..=region.y_max),
                ));
            }
        }
        z.shuffle(rng);
        data.truth.push(truth);
        data.measurements.push(z);
    }
    Ok(data)
}
