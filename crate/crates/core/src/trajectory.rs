//! Per-label trajectory posteriors and association-weight kernels.
//!
//! A [`TrajectoryPosterior`] is a node in a persistent chain: it holds the
//! filtered Gaussian at its own scan plus a pointer to the node of the
//! previous scan. Chains that share a prefix share nodes, and the
//! [`TrajectoryCache`] hands out the same node for the same
//! `(label, measurement-index sequence)` so duplicate trajectories across
//! hypotheses and Gibbs samples are computed once.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use lru::LruCache;
use nalgebra::{Matrix4, Vector2};

use crate::association::{AssociationHistory, Label};
use crate::error::{GlmbError, Result};
use crate::models::{BirthComponent, Gaussian, Models, MotionModel, SensorModel};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug)]
pub struct TrajectoryPosterior {
    id: u64,
    label: Label,
    scan: usize,
    alpha: i32,
    filt: Gaussian,
    log_factor: f64,
    log_weight: f64,
    parent: Option<Arc<TrajectoryPosterior>>,
}

impl TrajectoryPosterior {
    fn new(
        label: Label,
        scan: usize,
        alpha: i32,
        filt: Gaussian,
        log_factor: f64,
        parent: Option<Arc<TrajectoryPosterior>>,
    ) -> Self {
        let log_weight = parent.as_ref().map_or(0.0, |p| p.log_weight) + log_factor;
        TrajectoryPosterior {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            label,
            scan,
            alpha,
            filt,
            log_factor,
            log_weight,
            parent,
        }
    }

    pub fn label(&self) -> Label {
        self.label
    }

    /// Birth scan `s`.
    pub fn s(&self) -> usize {
        self.label.s
    }

    /// Last live scan `t`.
    pub fn t(&self) -> usize {
        self.scan
    }

    pub fn len(&self) -> usize {
        self.scan - self.label.s + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True when the trajectory ended before scan `k`.
    pub fn is_terminated(&self, k: usize) -> bool {
        self.scan < k
    }

    /// Measurement index at the last live scan.
    pub fn alpha(&self) -> i32 {
        self.alpha
    }

    /// Filtered density at the last live scan.
    pub fn filtered(&self) -> &Gaussian {
        &self.filt
    }

    /// Log association weight contributed at the last live scan.
    pub fn log_factor(&self) -> f64 {
        self.log_factor
    }

    /// Sum of the log association weights from birth to the last live scan.
    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn parent(&self) -> Option<&Arc<TrajectoryPosterior>> {
        self.parent.as_ref()
    }

    /// Measurement indices `alpha_{s..=t}`.
    pub fn alphas(&self) -> Vec<i32> {
        let mut out: Vec<i32> = self.nodes().map(|n| n.alpha).collect();
        out.reverse();
        out
    }

    /// Filtered densities for scans `s..=t`.
    pub fn filt(&self) -> Vec<Gaussian> {
        let mut out: Vec<Gaussian> = self.nodes().map(|n| n.filt.clone()).collect();
        out.reverse();
        out
    }

    /// Per-scan log association weights for scans `s..=t`.
    pub fn log_eta_factors(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.nodes().map(|n| n.log_factor).collect();
        out.reverse();
        out
    }

    /// Walks back to the node of scan `j`.
    pub fn at_scan(self: &Arc<Self>, j: usize) -> Option<&Arc<TrajectoryPosterior>> {
        if j < self.label.s || j > self.scan {
            return None;
        }
        let mut node = self;
        while node.scan > j {
            node = node.parent.as_ref()?;
        }
        Some(node)
    }

    fn nodes(&self) -> impl Iterator<Item = &TrajectoryPosterior> {
        std::iter::successors(Some(self), |n| n.parent.as_deref())
    }
}

impl PartialEq for TrajectoryPosterior {
    /// Content equality; node identities are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.scan == other.scan
            && self.alpha == other.alpha
            && self.filt == other.filt
            && self.log_factor.to_bits() == other.log_factor.to_bits()
            && self.log_weight.to_bits() == other.log_weight.to_bits()
            && match (&self.parent, &other.parent) {
                (None, None) => true,
                (Some(a), Some(b)) => Arc::ptr_eq(a, b) || a == b,
                _ => false,
            }
    }
}

/// New-born trajectory: Kalman update of the birth density when detected,
/// the birth density itself when misdetected. The weight is
/// `log P_B + log psi`.
pub fn birth_update(
    birth: &BirthComponent,
    sensor: &SensorModel,
    z_k: &[Vector2<f64>],
    alpha_k: i32,
    k: usize,
) -> Result<(TrajectoryPosterior, f64)> {
    let prior = birth.density();
    let (filt, log_psi) = measurement_step(sensor, &prior, z_k, alpha_k)?;
    let log_w = birth.r_birth.ln() + log_psi;
    let label = Label::new(k, birth.label_index);
    Ok((TrajectoryPosterior::new(label, k, alpha_k, filt, log_w, None), log_w))
}

/// Survival from scan `k - 1` to `k`: prediction through the motion model,
/// then the measurement update for `alpha_k`. The weight is
/// `log P_S + log psi` against the predicted density.
pub fn survival_update(
    traj: &Arc<TrajectoryPosterior>,
    motion: &MotionModel,
    sensor: &SensorModel,
    z_k: &[Vector2<f64>],
    alpha_k: i32,
    k: usize,
) -> Result<(TrajectoryPosterior, f64)> {
    if k == 0 || traj.scan != k - 1 {
        return Err(GlmbError::Contract(format!(
            "trajectory {} ends at scan {}, cannot survive into scan {k}",
            traj.label, traj.scan
        )));
    }
    let predicted = motion.predict(&traj.filt);
    let (filt, log_psi) = measurement_step(sensor, &predicted, z_k, alpha_k)?;
    let log_w = motion.p_survive.ln() + log_psi;
    let node = TrajectoryPosterior::new(traj.label, k, alpha_k, filt, log_w, Some(traj.clone()));
    Ok((node, log_w))
}

/// Log weight of the trajectory dying right after its last live scan.
pub fn death_weight(_traj: &TrajectoryPosterior, motion: &MotionModel) -> f64 {
    (1.0 - motion.p_survive).ln()
}

/// Log weight of a birth candidate that is not born.
pub fn not_born_weight(birth: &BirthComponent) -> f64 {
    (1.0 - birth.r_birth).ln()
}

fn measurement_step(
    sensor: &SensorModel,
    prior: &Gaussian,
    z_k: &[Vector2<f64>],
    alpha_k: i32,
) -> Result<(Gaussian, f64)> {
    if alpha_k < 0 || alpha_k as usize > z_k.len() {
        return Err(GlmbError::InvalidArgument(format!(
            "measurement index {alpha_k} out of range 0..={}",
            z_k.len()
        )));
    }
    if alpha_k == 0 {
        return Ok((prior.clone(), (1.0 - sensor.p_detect).ln()));
    }
    let z = &z_k[alpha_k as usize - 1];
    let inn = sensor.innovation(prior, z);
    let log_psi = sensor.log_detection_ratio(&inn, z);
    Ok((sensor.update(prior, &inn), log_psi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum CacheKey {
    Birth(Label, i32),
    Extend(u64, i32),
}

const SHARDS: usize = 16;

/// Memo of trajectory nodes keyed by `(label, measurement-index sequence)`.
///
/// The sequence is encoded structurally: a birth node is keyed by its label
/// and first index, every later node by the identity of its parent node and
/// its own index. Eviction is least-recently-used per shard; an evicted node
/// is simply recomputed on the next request.
///
/// Entries depend on the measurements they were computed from, so a cache
/// must only serve one measurement sequence.
pub struct TrajectoryCache {
    shards: Vec<Mutex<LruCache<CacheKey, Arc<TrajectoryPosterior>>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl std::fmt::Debug for TrajectoryCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrajectoryCache")
            .field("hits", &self.hits())
            .field("misses", &self.misses())
            .finish()
    }
}

impl Default for TrajectoryCache {
    fn default() -> Self {
        TrajectoryCache::new(1 << 19)
    }
}

impl TrajectoryCache {
    pub fn new(capacity: usize) -> Self {
        let per_shard = NonZeroUsize::new(capacity.div_ceil(SHARDS).max(1)).unwrap();
        TrajectoryCache {
            shards: (0..SHARDS).map(|_| Mutex::new(LruCache::new(per_shard))).collect(),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(|s| s.lock().unwrap().len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        for s in &self.shards {
            s.lock().unwrap().clear();
        }
    }

    fn shard(&self, key: &CacheKey) -> &Mutex<LruCache<CacheKey, Arc<TrajectoryPosterior>>> {
        let mut h = DefaultHasher::new();
        key.hash(&mut h);
        &self.shards[(h.finish() as usize) % SHARDS]
    }

    fn get_or_compute<F>(&self, key: CacheKey, compute: F) -> Result<Arc<TrajectoryPosterior>>
    where
        F: FnOnce() -> Result<TrajectoryPosterior>,
    {
        let shard = self.shard(&key);
        if let Some(node) = shard.lock().unwrap().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(node.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        // Computed outside the lock; a concurrent duplicate computes the same value.
        let node = Arc::new(compute()?);
        let mut guard = shard.lock().unwrap();
        if let Some(existing) = guard.get(&key) {
            return Ok(existing.clone());
        }
        guard.put(key, node.clone());
        Ok(node)
    }

    /// Birth node for `label` detected as `alpha` at scan `label.s`.
    pub fn birth(
        &self,
        models: &Models,
        scans: &[Vec<Vector2<f64>>],
        label: Label,
        alpha: i32,
    ) -> Result<Arc<TrajectoryPosterior>> {
        self.get_or_compute(CacheKey::Birth(label, alpha), || {
            let component = models.birth.component(label.iota).ok_or_else(|| {
                GlmbError::Contract(format!("label {label} has no birth component"))
            })?;
            let z = scan_measurements(scans, label.s)?;
            birth_update(component, &models.sensor, z, alpha, label.s).map(|r| r.0)
        })
    }

    /// Child of `parent` at the next scan with measurement index `alpha`.
    pub fn extend(
        &self,
        models: &Models,
        scans: &[Vec<Vector2<f64>>],
        parent: &Arc<TrajectoryPosterior>,
        alpha: i32,
    ) -> Result<Arc<TrajectoryPosterior>> {
        self.get_or_compute(CacheKey::Extend(parent.id, alpha), || {
            let k = parent.scan + 1;
            let z = scan_measurements(scans, k)?;
            survival_update(parent, &models.motion, &models.sensor, z, alpha, k).map(|r| r.0)
        })
    }

    /// Node for the full sequence `alphas` of `label`, starting at its birth scan.
    pub fn chain(
        &self,
        models: &Models,
        scans: &[Vec<Vector2<f64>>],
        label: Label,
        alphas: &[i32],
    ) -> Result<Arc<TrajectoryPosterior>> {
        let (&first, rest) = alphas
            .split_first()
            .ok_or_else(|| GlmbError::InvalidArgument("empty measurement-index sequence".into()))?;
        let mut node = self.birth(models, scans, label, first)?;
        for &a in rest {
            node = self.extend(models, scans, &node, a)?;
        }
        Ok(node)
    }
}

fn scan_measurements(scans: &[Vec<Vector2<f64>>], k: usize) -> Result<&[Vector2<f64>]> {
    scans
        .get(k)
        .map(Vec::as_slice)
        .ok_or_else(|| GlmbError::Contract(format!("no measurements recorded for scan {k}")))
}

/// Log association weight of `ell` at scan `j` under history `gamma`.
///
/// Dispatches on the label's status at `j`: newly born, not born, surviving,
/// or dying at `j`.
pub fn eta(
    gamma: &AssociationHistory,
    ell: Label,
    j: usize,
    models: &Models,
    scans: &[Vec<Vector2<f64>>],
    cache: &TrajectoryCache,
) -> Result<f64> {
    if j == 0 || j > gamma.last_scan() {
        return Err(GlmbError::Contract(format!("scan {j} is outside the history")));
    }
    let alpha = gamma.get(j, ell);
    if ell.s == j {
        let component = models
            .birth
            .component(ell.iota)
            .ok_or_else(|| GlmbError::Contract(format!("{ell} is not a birth label of scan {j}")))?;
        if alpha < 0 {
            return Ok(not_born_weight(component));
        }
        return Ok(cache.birth(models, scans, ell, alpha)?.log_factor);
    }
    if ell.s > j || gamma.get(j - 1, ell) < 0 {
        return Err(GlmbError::Contract(format!(
            "{ell} is neither born at nor live before scan {j}"
        )));
    }
    let prefix: Vec<i32> = (ell.s..j).map(|i| gamma.get(i, ell)).collect();
    let prev = cache.chain(models, scans, ell, &prefix)?;
    if alpha < 0 {
        return Ok(death_weight(&prev, &models.motion));
    }
    Ok(cache.extend(models, scans, &prev, alpha)?.log_factor)
}

/// Rauch-Tung-Striebel smoothed marginals over scans `s..=t`.
pub fn smooth(traj: &TrajectoryPosterior, motion: &MotionModel) -> Vec<Gaussian> {
    let filt = traj.filt();
    let mut out = filt.clone();
    for i in (0..filt.len().saturating_sub(1)).rev() {
        let f = &filt[i];
        let pred = motion.predict(f);
        let pred_inv = pred
            .cov
            .try_inverse()
            .or_else(|| pred.cov.pseudo_inverse(1e-12).ok())
            .unwrap_or_else(Matrix4::zeros);
        let gain = f.cov * motion.f.transpose() * pred_inv;
        let next = &out[i + 1];
        let mean = f.mean + gain * (next.mean - pred.mean);
        let cov = f.cov + gain * (next.cov - pred.cov) * gain.transpose();
        out[i] = Gaussian::new(mean, crate::models::symmetrize(&cov));
    }
    out
}
