//! Windowed multi-scan Gibbs sampling of association histories.
//!
//! Each entry `gamma_j(ell)` is resampled from its exact conditional given
//! every other entry of the history. Only scans inside the window
//! `max(1, k - N + 1)..=k` are resampled; earlier maps stay frozen and the
//! trajectories that cross the window boundary are linked by label.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::association::{check_history, AssociationHistory, AssociationMap, Label};
use crate::error::{GlmbError, Result};
use crate::hypothesis::{candidate_domain, log_weight_of, Context, Hypothesis};
use crate::trajectory::TrajectoryPosterior;

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsConfig {
    /// Window length `N` in scans.
    pub window: usize,
    /// Samples `T` drawn per input hypothesis.
    pub samples_per_hypothesis: usize,
    pub rng_seed: u64,
    /// When set, every sample is a single sweep started from the input
    /// hypothesis, and samples are generated concurrently. Otherwise the
    /// samples are successive states of one chain.
    pub independent_samples: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            window: 5,
            samples_per_hypothesis: 10,
            rng_seed: 0,
            independent_samples: false,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.samples_per_hypothesis == 0 {
            return Err(GlmbError::InvalidArgument(
                "window and samples per hypothesis must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Validity factor for assigning `alpha` to a label whose value at the next
/// scan is `beta`, given the positive indices `used` by the other labels.
///
/// Death or non-birth (`alpha < 0`) is allowed only if the label is also
/// dead at the next scan; misdetection is always allowed; a detection must
/// not reuse a claimed measurement. At the last scan pass `beta = alpha`.
pub fn m_factor(alpha: i32, beta: i32, used: &[i32]) -> bool {
    match alpha {
        a if a < 0 => a == beta,
        0 => true,
        a => !used.contains(&a),
    }
}

/// Unnormalized log conditional over `alpha = -1..=M_j`.
#[derive(Clone, Debug)]
pub struct ConditionalTable {
    log_scores: Vec<f64>,
    ends: Vec<Option<Arc<TrajectoryPosterior>>>,
}

impl ConditionalTable {
    fn point_mass() -> Self {
        ConditionalTable {
            log_scores: vec![0.0],
            ends: vec![None],
        }
    }

    /// Support values in order, starting at `-1`.
    pub fn support(&self) -> impl Iterator<Item = i32> {
        -1..(self.log_scores.len() as i32 - 1)
    }

    pub fn log_scores(&self) -> &[f64] {
        &self.log_scores
    }

    /// Log score of `alpha`; values outside the support are impossible.
    pub fn log_score(&self, alpha: i32) -> f64 {
        usize::try_from(alpha + 1)
            .ok()
            .and_then(|i| self.log_scores.get(i).copied())
            .unwrap_or(f64::NEG_INFINITY)
    }

    pub fn normalized(&self) -> Vec<f64> {
        let max = self.log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    /// Gumbel-max draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i32 {
        let mut best = (f64::NEG_INFINITY, -1i32);
        for (i, &s) in self.log_scores.iter().enumerate() {
            let u: f64 = rng.sample(Open01);
            if s == f64::NEG_INFINITY {
                continue;
            }
            let key = s - (-u.ln()).ln();
            if key > best.0 {
                best = (key, i as i32 - 1);
            }
        }
        best.1
    }
}

/// Deterministic generator for sample `index` of stream `stream`.
pub fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(stream ^ splitmix(index))))
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mutable copy of one hypothesis while it is being resampled.
pub(crate) struct Working<'c> {
    ctx: Context<'c>,
    maps: Vec<Arc<AssociationMap>>,
    tracks: BTreeMap<Label, Arc<TrajectoryPosterior>>,
    log_death: f64,
}

impl<'c> Working<'c> {
    pub(crate) fn new(hyp: &Hypothesis, ctx: Context<'c>) -> Self {
        Working {
            ctx,
            maps: hyp.history().shared_maps().to_vec(),
            tracks: hyp.tracks().clone(),
            log_death: (1.0 - ctx.models.motion.p_survive).ln(),
        }
    }

    fn k(&self) -> usize {
        self.maps.len() - 1
    }

    /// Appends scan `k + 1` with every survivor misdetected and no births.
    pub(crate) fn extend(&mut self) -> Result<()> {
        let j = self.maps.len();
        let m = self
            .ctx
            .scans
            .get(j)
            .ok_or_else(|| GlmbError::Contract(format!("no measurements recorded for scan {j}")))?
            .len();
        let prev = self.maps[j - 1].clone();
        let mut map = AssociationMap::new(j, m);
        for ell in prev.live() {
            map.set(ell, 0);
            let node = self.tracks.get(&ell).ok_or_else(|| missing_track(ell))?;
            let next = self.ctx.cache.extend(self.ctx.models, self.ctx.scans, node, 0)?;
            self.tracks.insert(ell, next);
        }
        for ell in self.ctx.birth_labels(j) {
            map.set(ell, -1);
        }
        self.maps.push(Arc::new(map));
        Ok(())
    }

    fn domain(&self, j: usize) -> Vec<Label> {
        candidate_domain(&self.maps[j - 1], &self.ctx, j)
    }

    /// Log weight of the label's remaining lifetime from scan `j` if it takes
    /// `alpha` there, together with the trajectory's new last node.
    fn score(
        &self,
        ell: Label,
        j: usize,
        alpha: i32,
        prev: Option<&Arc<TrajectoryPosterior>>,
        future: &[i32],
    ) -> Result<(f64, Option<Arc<TrajectoryPosterior>>)> {
        let (models, scans, cache) = (self.ctx.models, self.ctx.scans, self.ctx.cache);
        let k = self.k();
        if alpha < 0 {
            return Ok(match prev {
                Some(p) => (self.log_death, Some(p.clone())),
                None => {
                    let c = models.birth.component(ell.iota).ok_or_else(|| missing_track(ell))?;
                    ((1.0 - c.r_birth).ln(), None)
                }
            });
        }
        let current = self.maps[j].get(ell);
        let mut node = if alpha == current {
            // Reuse the committed chain.
            let end = self.tracks.get(&ell).ok_or_else(|| missing_track(ell))?;
            let mut factors = Vec::with_capacity(end.t() + 1 - j);
            let mut n = end;
            loop {
                factors.push(n.log_factor());
                if n.t() == j {
                    break;
                }
                n = n.parent().ok_or_else(|| missing_track(ell))?;
            }
            let s = factors.iter().rev().sum::<f64>();
            let s = if end.t() < k { s + self.log_death } else { s };
            return Ok((s, Some(end.clone())));
        } else {
            match prev {
                Some(p) => cache.extend(models, scans, p, alpha)?,
                None => cache.birth(models, scans, ell, alpha)?,
            }
        };
        let mut s = node.log_factor();
        for &a in future {
            node = cache.extend(models, scans, &node, a)?;
            s += node.log_factor();
        }
        if node.t() < k {
            s += self.log_death;
        }
        Ok((s, Some(node)))
    }

    fn is_birth(&self, ell: Label, j: usize) -> bool {
        ell.s == j && self.ctx.models.birth.component(ell.iota).is_some()
    }

    /// Previous node and future indices of `ell` around scan `j`, or `None`
    /// when the label is outside the candidate domain of `j`.
    #[allow(clippy::type_complexity)]
    fn neighbourhood(
        &self,
        ell: Label,
        j: usize,
    ) -> Result<Option<(Option<Arc<TrajectoryPosterior>>, Vec<i32>)>> {
        let prev = if self.is_birth(ell, j) {
            None
        } else if ell.s < j && self.maps[j - 1].get(ell) >= 0 {
            let end = self.tracks.get(&ell).ok_or_else(|| missing_track(ell))?;
            Some(end.at_scan(j - 1).ok_or_else(|| missing_track(ell))?.clone())
        } else {
            return Ok(None);
        };
        let future: Vec<i32> = ((j + 1)..=self.k())
            .map(|i| self.maps[i].get(ell))
            .take_while(|a| *a >= 0)
            .collect();
        Ok(Some((prev, future)))
    }

    pub(crate) fn conditional(&self, j: usize, ell: Label) -> Result<ConditionalTable> {
        let Some((prev, future)) = self.neighbourhood(ell, j)? else {
            return Ok(ConditionalTable::point_mass());
        };
        let k = self.k();
        let m = self.ctx.scans[j].len();
        let beta = (j < k).then(|| self.maps[j + 1].get(ell));
        let used = self.maps[j].used_measurements(ell);
        let mut table = ConditionalTable {
            log_scores: vec![f64::NEG_INFINITY; m + 2],
            ends: vec![None; m + 2],
        };
        for alpha in -1..=(m as i32) {
            if !m_factor(alpha, beta.unwrap_or(alpha), &used) {
                continue;
            }
            let (s, end) = self.score(ell, j, alpha, prev.as_ref(), &future)?;
            table.log_scores[(alpha + 1) as usize] = s;
            table.ends[(alpha + 1) as usize] = end;
        }
        Ok(table)
    }

    fn eta_jn(&self, ell: Label, j: usize, alpha: i32) -> Result<f64> {
        let (prev, future) = self
            .neighbourhood(ell, j)?
            .ok_or_else(|| GlmbError::Contract(format!("{ell} is outside the domain of scan {j}")))?;
        // With alpha < 0 the label is dead from scan j on; with alpha >= 0 and
        // a dead successor the lifetime ends at j.
        let future = if alpha < 0 { &[][..] } else { &future[..] };
        Ok(self.score(ell, j, alpha, prev.as_ref(), future)?.0)
    }

    fn commit(&mut self, j: usize, ell: Label, alpha: i32, end: Option<Arc<TrajectoryPosterior>>) {
        let old = self.maps[j].get(ell);
        if old == alpha {
            return;
        }
        Arc::make_mut(&mut self.maps[j]).set(ell, alpha);
        if j < self.k() {
            let next = Arc::make_mut(&mut self.maps[j + 1]);
            if old < 0 {
                next.set(ell, -1);
            } else if alpha < 0 {
                next.remove(ell);
            }
        }
        match end {
            Some(node) => {
                self.tracks.insert(ell, node);
            }
            None => {
                self.tracks.remove(&ell);
            }
        }
    }

    pub(crate) fn sweep_scan<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<()> {
        for ell in self.domain(j) {
            let table = self.conditional(j, ell)?;
            let alpha = table.sample(rng);
            let end = table.ends[(alpha + 1) as usize].clone();
            self.commit(j, ell, alpha, end);
        }
        Ok(())
    }

    pub(crate) fn sweep<R: Rng + ?Sized>(&mut self, lo: usize, rng: &mut R) -> Result<()> {
        for j in lo..=self.k() {
            self.sweep_scan(j, rng)?;
        }
        Ok(())
    }

    pub(crate) fn snapshot(&self) -> Hypothesis {
        let gamma = AssociationHistory::from_shared(self.maps.clone());
        let log_weight = log_weight_of(&gamma, &self.tracks, &self.ctx);
        Hypothesis::from_parts(gamma, log_weight, self.tracks.clone())
    }
}

fn missing_track(ell: Label) -> GlmbError {
    GlmbError::Contract(format!("no trajectory recorded for live label {ell}"))
}

/// Product of the association weights of `ell_n` over scans
/// `j..=min(k, t + 1)` when `gamma_j(ell_n)` is replaced by `alpha`.
pub fn eta_jn(hyp: &Hypothesis, ell_n: Label, j: usize, alpha: i32, ctx: &Context<'_>) -> Result<f64> {
    check_scan(hyp, j)?;
    Working::new(hyp, *ctx).eta_jn(ell_n, j, alpha)
}

/// Conditional distribution of `gamma_j(ell_n)` given all other entries.
pub fn conditional(hyp: &Hypothesis, j: usize, ell_n: Label, ctx: &Context<'_>) -> Result<ConditionalTable> {
    check_scan(hyp, j)?;
    Working::new(hyp, *ctx).conditional(j, ell_n)
}

fn check_scan(hyp: &Hypothesis, j: usize) -> Result<()> {
    if j == 0 || j > hyp.scan() {
        return Err(GlmbError::Contract(format!("scan {j} outside 1..={}", hyp.scan())));
    }
    Ok(())
}

/// First scan resampled by a window of `window` scans ending at `k`.
pub fn window_start(k: usize, window: usize) -> usize {
    (k + 1).saturating_sub(window).max(1)
}

/// Draws `T` hypotheses by systematic-scan Gibbs sweeps over the window
/// ending at the hypothesis' last scan. `stream` selects an independent
/// random stream (the hypothesis index within a bank).
pub fn sweep_window(
    hyp: &Hypothesis,
    config: &GibbsConfig,
    ctx: &Context<'_>,
    stream: u64,
) -> Result<Vec<Hypothesis>> {
    config.validate()?;
    let k = hyp.scan();
    if k == 0 {
        return Err(GlmbError::Contract("windowed sweep needs k >= 1".into()));
    }
    if ctx.scans.len() <= k {
        return Err(GlmbError::Contract(format!("measurements missing beyond scan {}", ctx.scans.len() - 1)));
    }
    check_history(hyp.history()).map_err(|e| GlmbError::Contract(format!("invalid history: {e}")))?;
    let lo = window_start(k, config.window);
    let t_count = config.samples_per_hypothesis;
    if config.independent_samples {
        let one = |t: usize| -> Result<Hypothesis> {
            let mut w = Working::new(hyp, *ctx);
            let mut rng = stream_rng(config.rng_seed, stream, t as u64);
            w.sweep(lo, &mut rng)?;
            Ok(w.snapshot())
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            return (0..t_count).into_par_iter().map(one).collect();
        }
        #[cfg(not(feature = "parallel"))]
        return (0..t_count).map(one).collect();
    }
    let mut w = Working::new(hyp, *ctx);
    let mut out = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let mut rng = stream_rng(config.rng_seed, stream, t as u64);
        w.sweep(lo, &mut rng)?;
        out.push(w.snapshot());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::validate_history;
    use crate::models::Models;
    use crate::trajectory::TrajectoryCache;
    use nalgebra::Vector2;

    #[test]
    fn m_factor_cases() {
        assert!(m_factor(-1, -1, &[]));
        assert!(!m_factor(-1, 2, &[]));
        assert!(!m_factor(-1, 0, &[]));
        for beta in [-1, 0, 3] {
            assert!(m_factor(0, beta, &[1, 2, 3]));
        }
        assert!(!m_factor(3, -1, &[3]));
        assert!(m_factor(3, -1, &[1, 2]));
    }

    fn toy_scans() -> Vec<Vec<Vector2<f64>>> {
        vec![
            vec![],
            vec![Vector2::new(503.0, 498.0), Vector2::new(-200.0, 100.0)],
            vec![Vector2::new(505.0, 501.0)],
            vec![Vector2::new(-490.0, 505.0), Vector2::new(507.0, 499.0)],
        ]
    }

    fn grown(ctx: &Context<'_>, k: usize, seed: u64) -> Hypothesis {
        let mut w = Working::new(&Hypothesis::initial(), *ctx);
        let mut rng = stream_rng(seed, 0, 0);
        for j in 1..=k {
            w.extend().unwrap();
            w.sweep_scan(j, &mut rng).unwrap();
        }
        w.snapshot()
    }

    #[test]
    fn dead_label_has_point_mass() {
        let models = Models::default();
        let scans = toy_scans();
        let cache = TrajectoryCache::new(1024);
        let ctx = Context::new(&models, &scans, &cache);
        let h = grown(&ctx, 3, 1);
        let table = conditional(&h, 2, Label::new(1, 1), &ctx);
        let table = table.unwrap();
        if h.history().get(1, Label::new(1, 1)) < 0 {
            assert_eq!(table.log_scores(), &[0.0]);
        }
        let never = conditional(&h, 3, Label::new(1, 4), &ctx).unwrap();
        assert_eq!(never.normalized(), vec![1.0]);
    }

    #[test]
    fn last_scan_survivor_misdetection_weight() {
        let models = Models::default();
        let scans = toy_scans();
        let cache = TrajectoryCache::new(1024);
        let ctx = Context::new(&models, &scans, &cache);
        let ell = Label::new(1, 1);
        let mut w = Working::new(&Hypothesis::initial(), ctx);
        w.extend().unwrap();
        let end = cache.birth(&models, &scans, ell, 1).unwrap();
        w.commit(1, ell, 1, Some(end));
        w.extend().unwrap();
        let h = w.snapshot();
        let v = eta_jn(&h, ell, 2, 0, &ctx).unwrap();
        assert!((v - (0.95f64 * 0.7).ln()).abs() < 1e-12);
    }

    #[test]
    fn chain_samples_stay_valid_and_reproducible() {
        let models = Models::default();
        let scans = toy_scans();
        let cache = TrajectoryCache::new(1024);
        let ctx = Context::new(&models, &scans, &cache);
        let h = grown(&ctx, 3, 5);
        let config = GibbsConfig {
            window: 2,
            samples_per_hypothesis: 50,
            rng_seed: 9,
            independent_samples: false,
        };
        let a = sweep_window(&h, &config, &ctx, 3).unwrap();
        let b = sweep_window(&h, &config, &ctx, 3).unwrap();
        assert_eq!(a.len(), 50);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.history(), y.history());
            assert_eq!(x.log_weight().to_bits(), y.log_weight().to_bits());
            assert!(validate_history(x.history()));
            assert_eq!(x.history().map(1), h.history().map(1));
            let fresh = TrajectoryCache::new(1024);
            let again = x.recompute_log_weight(&Context::new(&models, &scans, &fresh)).unwrap();
            assert!((again - x.log_weight()).abs() <= 1e-9 * again.abs().max(1.0));
        }
    }

    #[test]
    fn independent_samples_are_valid() {
        let models = Models::default();
        let scans = toy_scans();
        let cache = TrajectoryCache::new(1024);
        let ctx = Context::new(&models, &scans, &cache);
        let h = grown(&ctx, 3, 2);
        let config = GibbsConfig {
            window: 10,
            samples_per_hypothesis: 20,
            rng_seed: 1,
            independent_samples: true,
        };
        let out = sweep_window(&h, &config, &ctx, 0).unwrap();
        assert_eq!(out.len(), 20);
        assert!(out.iter().all(|x| validate_history(x.history())));
    }

    #[test]
    fn sweep_rejects_scan_zero() {
        let models = Models::default();
        let scans = toy_scans();
        let cache = TrajectoryCache::new(16);
        let ctx = Context::new(&models, &scans, &cache);
        let err = sweep_window(&Hypothesis::initial(), &GibbsConfig::default(), &ctx, 0).unwrap_err();
        assert!(matches!(err, GlmbError::Contract(_)));
    }

    #[test]
    fn window_start_clamps() {
        assert_eq!(window_start(3, 5), 1);
        assert_eq!(window_start(10, 5), 6);
        assert_eq!(window_start(10, 1), 10);
    }

    #[test]
    fn gumbel_sampling_respects_impossible_entries() {
        let table = ConditionalTable {
            log_scores: vec![f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY],
            ends: vec![None; 3],
        };
        let mut rng = stream_rng(0, 0, 0);
        for _ in 0..100 {
            assert_eq!(table.sample(&mut rng), 0);
        }
    }
}
