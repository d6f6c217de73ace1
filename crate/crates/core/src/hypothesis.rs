use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::Vector2;

use crate::association::{AssociationHistory, AssociationMap, Label};
use crate::error::{GlmbError, Result};
use crate::models::Models;
use crate::trajectory::{eta, TrajectoryCache, TrajectoryPosterior};

/// Everything the weight kernels read: models, measurements of scans
/// `0..=k`, and the shared trajectory cache.
#[derive(Clone, Copy)]
pub struct Context<'a> {
    pub models: &'a Models,
    /// `scans[j]` holds `Z_j`; `scans[0]` is empty.
    pub scans: &'a [Vec<Vector2<f64>>],
    pub cache: &'a TrajectoryCache,
}

impl<'a> Context<'a> {
    pub fn new(models: &'a Models, scans: &'a [Vec<Vector2<f64>>], cache: &'a TrajectoryCache) -> Self {
        Context {
            models,
            scans,
            cache,
        }
    }

    /// Birth labels of scan `j`, sorted.
    pub fn birth_labels(&self, j: usize) -> impl Iterator<Item = Label> + '_ {
        self.models
            .birth
            .components
            .iter()
            .map(move |c| Label::new(j, c.label_index))
    }
}

/// One GLMB component: an association history, its unnormalized log weight
/// and the trajectory posterior of every label that was ever live.
#[derive(Clone, Debug)]
pub struct Hypothesis {
    gamma: AssociationHistory,
    log_weight: f64,
    tracks: BTreeMap<Label, Arc<TrajectoryPosterior>>,
    fingerprint: u64,
}

impl PartialEq for Hypothesis {
    /// Components are identified by their association history alone.
    fn eq(&self, other: &Self) -> bool {
        self.fingerprint == other.fingerprint && self.gamma == other.gamma
    }
}

impl Eq for Hypothesis {}

impl Hypothesis {
    /// The scan-0 component: no live objects, weight one.
    pub fn initial() -> Self {
        Hypothesis::from_parts(AssociationHistory::new(), 0.0, BTreeMap::new())
    }

    pub(crate) fn from_parts(
        gamma: AssociationHistory,
        log_weight: f64,
        tracks: BTreeMap<Label, Arc<TrajectoryPosterior>>,
    ) -> Self {
        let fingerprint = gamma.fingerprint();
        Hypothesis {
            gamma,
            log_weight,
            tracks,
            fingerprint,
        }
    }

    /// Builds the component for `gamma`, computing trajectories and weight.
    pub fn from_history(gamma: AssociationHistory, ctx: &Context<'_>) -> Result<Self> {
        if let Err(e) = crate::association::check_history(&gamma) {
            return Err(GlmbError::Contract(format!("invalid history: {e}")));
        }
        let k = gamma.last_scan();
        let mut tracks = BTreeMap::new();
        for ell in gamma.labels_ever_live() {
            let alphas: Vec<i32> = (ell.s..=k)
                .map(|j| gamma.get(j, ell))
                .take_while(|a| *a >= 0)
                .collect();
            tracks.insert(ell, ctx.cache.chain(ctx.models, ctx.scans, ell, &alphas)?);
        }
        let log_weight = log_weight_of(&gamma, &tracks, ctx);
        Ok(Hypothesis::from_parts(gamma, log_weight, tracks))
    }

    pub fn history(&self) -> &AssociationHistory {
        &self.gamma
    }

    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn scan(&self) -> usize {
        self.gamma.last_scan()
    }

    pub fn tracks(&self) -> &BTreeMap<Label, Arc<TrajectoryPosterior>> {
        &self.tracks
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Labels live at the last scan.
    pub fn live_labels(&self) -> impl Iterator<Item = Label> + '_ {
        let k = self.scan();
        self.tracks
            .values()
            .filter(move |t| t.t() == k && k > 0)
            .map(|t| t.label())
    }

    /// Log weight recomputed from scratch: the sum over scans `j = 1..=k` and
    /// over candidate labels of scan `j` of the per-label association weight.
    pub fn recompute_log_weight(&self, ctx: &Context<'_>) -> Result<f64> {
        let k = self.scan();
        let mut total = 0.0;
        for j in 1..=k {
            for ell in candidate_domain(self.gamma.map(j - 1), ctx, j) {
                total += eta(&self.gamma, ell, j, ctx.models, ctx.scans, ctx.cache)?;
            }
        }
        Ok(total)
    }
}

/// `B_j` plus the labels live under `prev`, sorted.
pub(crate) fn candidate_domain(prev: &AssociationMap, ctx: &Context<'_>, j: usize) -> Vec<Label> {
    let mut domain: Vec<Label> = prev.live().collect();
    domain.extend(ctx.birth_labels(j));
    domain
}

/// Log weight from per-label trajectory weights: each track's accumulated
/// weight, a death term for tracks that ended before the last scan, and a
/// not-born term for every unborn birth candidate.
pub(crate) fn log_weight_of(
    gamma: &AssociationHistory,
    tracks: &BTreeMap<Label, Arc<TrajectoryPosterior>>,
    ctx: &Context<'_>,
) -> f64 {
    let k = gamma.last_scan();
    let log_death = (1.0 - ctx.models.motion.p_survive).ln();
    let mut total = 0.0;
    for t in tracks.values() {
        total += t.log_weight();
        if t.t() < k {
            total += log_death;
        }
    }
    for (j, map) in gamma.maps().enumerate().skip(1) {
        for c in &ctx.models.birth.components {
            if map.get(Label::new(j, c.label_index)) < 0 {
                total += (1.0 - c.r_birth).ln();
            }
        }
    }
    total
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "log_weight={}", self.log_weight)?;
        write!(f, "{}", self.gamma)
    }
}
