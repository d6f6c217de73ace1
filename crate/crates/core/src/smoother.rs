//! Smoothing-while-filtering driver.
//!
//! Every scan the bank of hypotheses is extended by single-scan Gibbs
//! sampling of the newest association map, deduplicated and truncated.
//! Once the history is at least as long as the window, the best hypotheses
//! are refined by windowed multi-scan Gibbs sweeps before the final
//! truncation and normalization.

use std::collections::HashMap;

use nalgebra::{Vector2, Vector4};

use crate::association::{check_history, Label, LabeledStateSet};
use crate::error::{GlmbError, Result};
use crate::gibbs::{stream_rng, sweep_window, window_start, GibbsConfig, Working};
use crate::hypothesis::{Context, Hypothesis};
use crate::models::Models;
use crate::trajectory::{smooth, TrajectoryCache};

/// How the past is revised after each extension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Refinement {
    /// Extension and truncation only: a GLMB filter.
    None,
    /// Gibbs sweeps over the latest `N` scans once `k >= N`.
    Window(usize),
    /// Gibbs sweeps over the whole history at every scan.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmootherConfig {
    pub refinement: Refinement,
    /// `H_k`: hypotheses retained after each scan.
    pub cap_requested: usize,
    /// `H̄_k`: hypotheses passed to the windowed sweep.
    pub cap_pre_gibbs: usize,
    /// Extension budget shared by the bank in proportion to weight, at least one each.
    pub samples_filter: usize,
    /// `T`: windowed samples per refined hypothesis.
    pub samples_gibbs: usize,
    pub seed: u64,
    pub independent_samples: bool,
    /// Verify history validity and frozen prefixes after every sweep.
    pub check_invariants: bool,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig {
            refinement: Refinement::Window(5),
            cap_requested: 40,
            cap_pre_gibbs: 8,
            samples_filter: 200,
            samples_gibbs: 30,
            seed: 0,
            independent_samples: false,
            check_invariants: false,
        }
    }
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.cap_requested,
            self.cap_pre_gibbs,
            self.samples_filter,
            self.samples_gibbs,
        ];
        if counts.contains(&0) || self.refinement == Refinement::Window(0) {
            return Err(GlmbError::InvalidArgument(
                "caps, sample counts and window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Normalized set of GLMB components at scan `k`.
#[derive(Clone, Debug)]
pub struct PosteriorBank {
    scan: usize,
    hypotheses: Vec<Hypothesis>,
    weights: Vec<f64>,
}

impl Default for PosteriorBank {
    fn default() -> Self {
        PosteriorBank::initial()
    }
}

impl PosteriorBank {
    pub fn initial() -> Self {
        PosteriorBank {
            scan: 0,
            hypotheses: vec![Hypothesis::initial()],
            weights: vec![1.0],
        }
    }

    /// Normalizes `hypotheses`, dropping zero-weight ones.
    pub fn from_hypotheses(scan: usize, hypotheses: Vec<Hypothesis>) -> Result<Self> {
        let hypotheses: Vec<Hypothesis> = hypotheses
            .into_iter()
            .filter(|h| h.log_weight().is_finite())
            .collect();
        if hypotheses.is_empty() {
            return Err(GlmbError::EmptyBank);
        }
        let max = hypotheses
            .iter()
            .map(Hypothesis::log_weight)
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = hypotheses.iter().map(|h| (h.log_weight() - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let weights = w.into_iter().map(|x| x / total).collect();
        Ok(PosteriorBank {
            scan,
            hypotheses,
            weights,
        })
    }

    pub fn scan(&self) -> usize {
        self.scan
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    /// Effective sample size `1 / sum w^2`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Index of the highest-weight hypothesis.
    pub fn best_index(&self) -> Option<usize> {
        (0..self.weights.len()).max_by(|&a, &b| {
            self.weights[a]
                .total_cmp(&self.weights[b])
                .then_with(|| b.cmp(&a))
        })
    }
}

/// Per-scan record emitted by [`step`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub scan: usize,
    pub hypotheses: usize,
    pub ess: f64,
    pub seconds: f64,
    /// Whether the windowed sweep ran this scan.
    pub refined: bool,
    /// Produced hypotheses failing validation (checked only when enabled).
    pub invalid_histories: usize,
    /// Sweeps that altered a map before the window (checked only when enabled).
    pub frozen_violations: usize,
}

/// Extends `hyp` with the map of the next scan by `t_h` single-scan Gibbs
/// sweeps, started from every survivor misdetected and no births. Returns
/// the distinct extensions in order of first appearance.
pub fn sample_factors(
    hyp: &Hypothesis,
    t_h: usize,
    ctx: &Context<'_>,
    seed: u64,
    stream: u64,
) -> Result<Vec<Hypothesis>> {
    let mut w = Working::new(hyp, *ctx);
    w.extend()?;
    let k = hyp.scan() + 1;
    let mut out = Unique::default();
    for t in 0..t_h {
        let mut rng = stream_rng(seed, stream, t as u64);
        w.sweep_scan(k, &mut rng)?;
        out.push(w.snapshot());
    }
    Ok(out.items)
}

#[derive(Default)]
struct Unique {
    seen: HashMap<u64, Vec<usize>>,
    items: Vec<Hypothesis>,
}

impl Unique {
    fn push(&mut self, h: Hypothesis) {
        let slot = self.seen.entry(h.fingerprint()).or_default();
        if slot.iter().any(|&i| self.items[i] == h) {
            return;
        }
        slot.push(self.items.len());
        self.items.push(h);
    }
}

/// Keeps the first occurrence of each distinct association history.
pub fn dedup(hypotheses: Vec<Hypothesis>) -> Vec<Hypothesis> {
    let mut out = Unique::default();
    for h in hypotheses {
        out.push(h);
    }
    out.items
}

/// The `cap` highest-weight hypotheses, ordered by weight then history.
pub fn keep_best(mut hypotheses: Vec<Hypothesis>, cap: usize) -> Vec<Hypothesis> {
    hypotheses.sort_by(|a, b| {
        b.log_weight()
            .total_cmp(&a.log_weight())
            .then_with(|| a.history().cmp(b.history()))
    });
    hypotheses.truncate(cap);
    hypotheses
}

fn budgets(weights: &[f64], total: usize) -> Vec<usize> {
    weights
        .iter()
        .map(|w| ((w * total as f64).round() as usize).max(1))
        .collect()
}

fn stream_id(k: usize, phase: u64, h: usize) -> u64 {
    ((k as u64) << 33) | (phase << 32) | h as u64
}

#[cfg(feature = "parallel")]
fn map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..n).map(f).collect()
}

/// Advances the bank from scan `k - 1` to `k`; `ctx.scans[k]` must hold `Z_k`.
pub fn step(
    bank: &PosteriorBank,
    ctx: &Context<'_>,
    config: &SmootherConfig,
) -> Result<(PosteriorBank, StepDiagnostics)> {
    config.validate()?;
    #[cfg(not(target_arch = "wasm32"))]
    let started = std::time::Instant::now();
    let k = bank.scan + 1;
    if ctx.scans.len() <= k {
        return Err(GlmbError::Contract(format!("no measurements recorded for scan {k}")));
    }
    let mut diag = StepDiagnostics {
        scan: k,
        ..StepDiagnostics::default()
    };

    let t_h = budgets(&bank.weights, config.samples_filter);
    let extended = map_indexed(bank.hypotheses.len(), |h| {
        sample_factors(&bank.hypotheses[h], t_h[h], ctx, config.seed, stream_id(k, 0, h))
            .map(dedup)
    })?;
    let extended: Vec<Hypothesis> = extended.into_iter().flatten().collect();
    if config.check_invariants {
        diag.invalid_histories += extended
            .iter()
            .filter(|h| check_history(h.history()).is_err())
            .count();
    }

    let window = match config.refinement {
        Refinement::None => None,
        Refinement::Window(n) if k < n => None,
        Refinement::Window(n) => Some(n),
        Refinement::Full => Some(k),
    };
    let survivors = match window {
        None => keep_best(extended, config.cap_requested),
        Some(n) => {
            diag.refined = true;
            let seeds = keep_best(dedup(extended), config.cap_pre_gibbs);
            let gibbs = GibbsConfig {
                window: n,
                samples_per_hypothesis: config.samples_gibbs,
                rng_seed: config.seed,
                independent_samples: config.independent_samples,
            };
            let lo = window_start(k, n);
            let samples = map_indexed(seeds.len(), |h| {
                sweep_window(&seeds[h], &gibbs, ctx, stream_id(k, 1, h))
            })?;
            if config.check_invariants {
                for (parent, outs) in seeds.iter().zip(&samples) {
                    for out in outs {
                        if check_history(out.history()).is_err() {
                            diag.invalid_histories += 1;
                        }
                        let frozen = (0..lo).all(|j| out.history().map(j) == parent.history().map(j));
                        if !frozen {
                            diag.frozen_violations += 1;
                        }
                    }
                }
            }
            let mut pool = seeds;
            pool.extend(samples.into_iter().flatten());
            keep_best(dedup(pool), config.cap_requested)
        }
    };
    let next = PosteriorBank::from_hypotheses(k, survivors)?;
    diag.hypotheses = next.len();
    diag.ess = next.ess();
    #[cfg(not(target_arch = "wasm32"))]
    {
        diag.seconds = started.elapsed().as_secs_f64();
    }
    Ok((next, diag))
}

/// Smoothed mean trajectory of one label.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackEstimate {
    pub label: Label,
    /// First scan of `means`.
    pub start: usize,
    pub means: Vec<Vector4<f64>>,
}

impl TrackEstimate {
    pub fn end(&self) -> usize {
        self.start + self.means.len() - 1
    }

    pub fn at(&self, scan: usize) -> Option<&Vector4<f64>> {
        scan.checked_sub(self.start).and_then(|i| self.means.get(i))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub scan: usize,
    pub cardinality: usize,
    pub tracks: Vec<TrackEstimate>,
}

/// Trajectories of the highest-weight hypothesis, smoothed backwards over
/// each label's lifespan.
pub fn extract_estimate(bank: &PosteriorBank, models: &Models) -> Result<Estimate> {
    let best = bank.best_index().ok_or(GlmbError::EmptyBank)?;
    let hyp = &bank.hypotheses[best];
    let tracks = hyp
        .tracks()
        .values()
        .map(|t| TrackEstimate {
            label: t.label(),
            start: t.s(),
            means: smooth(t, &models.motion).into_iter().map(|g| g.mean).collect(),
        })
        .collect();
    Ok(Estimate {
        scan: bank.scan,
        cardinality: hyp.live_labels().count(),
        tracks,
    })
}

/// Filtered states of the labels live at the last scan of the best hypothesis.
pub fn filtered_estimate(bank: &PosteriorBank) -> Result<LabeledStateSet> {
    let best = bank.best_index().ok_or(GlmbError::EmptyBank)?;
    let hyp = &bank.hypotheses[best];
    let mut out = LabeledStateSet::new(bank.scan);
    for ell in hyp.live_labels() {
        out.insert(hyp.tracks()[&ell].filtered().mean, ell)?;
    }
    Ok(out)
}

/// Online tracker owning its models, measurement history and cache.
pub struct Smoother {
    models: Models,
    config: SmootherConfig,
    scans: Vec<Vec<Vector2<f64>>>,
    cache: TrajectoryCache,
    bank: PosteriorBank,
}

impl Smoother {
    pub fn new(models: Models, config: SmootherConfig) -> Result<Self> {
        Smoother::with_cache(models, config, TrajectoryCache::default())
    }

    pub fn with_cache(models: Models, config: SmootherConfig, cache: TrajectoryCache) -> Result<Self> {
        models.validate()?;
        config.validate()?;
        Ok(Smoother {
            models,
            config,
            scans: vec![Vec::new()],
            cache,
            bank: PosteriorBank::initial(),
        })
    }

    pub fn step(&mut self, measurements: Vec<Vector2<f64>>) -> Result<StepDiagnostics> {
        self.scans.push(measurements);
        let ctx = Context::new(&self.models, &self.scans, &self.cache);
        match step(&self.bank, &ctx, &self.config) {
            Ok((bank, diag)) => {
                self.bank = bank;
                Ok(diag)
            }
            Err(e) => {
                self.scans.pop();
                Err(e)
            }
        }
    }

    pub fn bank(&self) -> &PosteriorBank {
        &self.bank
    }

    pub fn models(&self) -> &Models {
        &self.models
    }

    pub fn config(&self) -> &SmootherConfig {
        &self.config
    }

    pub fn scans(&self) -> &[Vec<Vector2<f64>>] {
        &self.scans
    }

    pub fn cache(&self) -> &TrajectoryCache {
        &self.cache
    }

    pub fn context(&self) -> Context<'_> {
        Context::new(&self.models, &self.scans, &self.cache)
    }

    pub fn estimate(&self) -> Result<Estimate> {
        extract_estimate(&self.bank, &self.models)
    }

    pub fn filtered(&self) -> Result<LabeledStateSet> {
        filtered_estimate(&self.bank)
    }
}
