mod common;

use common::{enumerate_histories, log_weight, toy_models};
use glmb_core::association::validate_history;
use glmb_core::gibbs::conditional;
use glmb_core::smoother::extract_estimate;
use glmb_core::{AssociationHistory, Context, Hypothesis, PosteriorBank, TrajectoryCache};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy_scans() -> Vec<Vec<Vector2<f64>>> {
    vec![
        vec![],
        vec![Vector2::new(510.0, 490.0), Vector2::new(-480.0, 520.0)],
        vec![Vector2::new(495.0, 505.0), Vector2::new(100.0, -300.0)],
    ]
}

#[test]
fn enumeration_yields_only_valid_distinct_histories() {
    let models = toy_models(0.7, 0.4, 2.0);
    let all = enumerate_histories(&models, &toy_scans());
    assert!(all.iter().all(validate_history));
    let mut text: Vec<String> = all.iter().map(|g| g.to_string()).collect();
    text.sort();
    text.dedup();
    assert_eq!(text.len(), all.len());
    // Scan 1: two labels over {-1, 0, 1, 2} with distinct positive values.
    let first: std::collections::BTreeSet<String> =
        all.iter().map(|g| g.map(1).to_string()).collect();
    assert_eq!(first.len(), 14);
}

#[test]
fn hypothesis_weights_match_exhaustive_oracle() {
    let models = toy_models(0.7, 0.4, 2.0);
    let scans = toy_scans();
    let cache = TrajectoryCache::new(1 << 14);
    let ctx = Context::new(&models, &scans, &cache);
    for gamma in enumerate_histories(&models, &scans) {
        let oracle = log_weight(&gamma, &models, &scans);
        let h = Hypothesis::from_history(gamma, &ctx).unwrap();
        assert!((h.log_weight() - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
        let again = h.recompute_log_weight(&ctx).unwrap();
        assert!((again - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
    }
}

/// `gamma` with `gamma_j(ell) = alpha`, keeping the rest of the history;
/// a label newly live at `j < k` is recorded as gone at `j + 1`.
fn substitute(gamma: &AssociationHistory, j: usize, ell: glmb_core::Label, alpha: i32) -> AssociationHistory {
    let mut maps: Vec<_> = gamma.maps().cloned().collect();
    let old = maps[j].get(ell);
    maps[j].set(ell, alpha);
    if j + 1 < maps.len() {
        if old < 0 && alpha >= 0 {
            maps[j + 1].set(ell, -1);
        } else if old >= 0 && alpha < 0 && maps[j + 1].get(ell) < 0 {
            maps[j + 1].remove(ell);
        }
    }
    AssociationHistory::from_maps(maps)
}

#[test]
fn gibbs_conditionals_are_exact() {
    let models = toy_models(0.6, 0.3, 1.5);
    let scans = vec![
        vec![],
        vec![Vector2::new(510.0, 490.0), Vector2::new(-480.0, 520.0)],
        vec![Vector2::new(495.0, 505.0)],
        vec![Vector2::new(505.0, 515.0), Vector2::new(-470.0, 530.0)],
    ];
    let cache = TrajectoryCache::new(1 << 14);
    let ctx = Context::new(&models, &scans, &cache);
    let all = enumerate_histories(&models, &scans);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for _ in 0..300 {
        let gamma = &all[rng.random_range(0..all.len())];
        let j = rng.random_range(1..=3);
        let domain: Vec<_> = gamma.map(j).entries().iter().map(|e| e.0).collect();
        let ell = domain[rng.random_range(0..domain.len())];
        let hyp = Hypothesis::from_history(gamma.clone(), &ctx).unwrap();
        let table = conditional(&hyp, j, ell, &ctx).unwrap();
        let got = table.normalized();
        let m = scans[j].len() as i32;
        let mut oracle = Vec::new();
        for alpha in -1..=m {
            let g = substitute(gamma, j, ell, alpha);
            oracle.push(if validate_history(&g) {
                log_weight(&g, &models, &scans)
            } else {
                f64::NEG_INFINITY
            });
        }
        let max = oracle.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = oracle.iter().map(|l| (l - max).exp()).sum();
        for (a, l) in oracle.iter().enumerate() {
            let p = (l - max).exp() / total;
            assert!((got[a] - p).abs() < 1e-9, "{ell} at scan {j}: {got:?} vs {p} at {a}\n{gamma}");
        }
        checked += 1;
    }
    assert_eq!(checked, 300);
}

#[test]
fn estimate_uses_argmax_hypothesis() {
    let models = toy_models(0.7, 0.4, 2.0);
    let scans = toy_scans();
    let cache = TrajectoryCache::new(1 << 14);
    let ctx = Context::new(&models, &scans, &cache);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let all = enumerate_histories(&models, &scans);
    for _ in 0..20 {
        let picks: Vec<Hypothesis> = (0..6)
            .map(|_| Hypothesis::from_history(all[rng.random_range(0..all.len())].clone(), &ctx).unwrap())
            .collect();
        let picks = glmb_core::smoother::dedup(picks);
        let mut best = 0;
        for (i, h) in picks.iter().enumerate() {
            if h.log_weight() > picks[best].log_weight() {
                best = i;
            }
        }
        let expected = picks[best].live_labels().count();
        let bank = PosteriorBank::from_hypotheses(2, picks).unwrap();
        let est = extract_estimate(&bank, &models).unwrap();
        assert_eq!(est.cardinality, expected);
        let total: f64 = bank.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
