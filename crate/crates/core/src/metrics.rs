//! OSPA and OSPA-on-tracks distances.

use std::collections::BTreeMap;

use nalgebra::{Vector2, Vector4};

use crate::assignment::assign;
use crate::error::{GlmbError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OspaParams {
    /// Cut-off `c`.
    pub cutoff: f64,
    /// Order `p`.
    pub order: f64,
    /// Window length (scans) for the track metric.
    pub window: usize,
}

impl Default for OspaParams {
    fn default() -> Self {
        OspaParams {
            cutoff: 100.0,
            order: 1.0,
            window: 10,
        }
    }
}

impl OspaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(GlmbError::InvalidArgument("OSPA cut-off must be positive".into()));
        }
        if !(self.order >= 1.0 && self.order.is_finite()) {
            return Err(GlmbError::InvalidArgument("OSPA order must be >= 1".into()));
        }
        if self.window == 0 {
            return Err(GlmbError::InvalidArgument("OSPA window must be >= 1".into()));
        }
        Ok(())
    }
}

/// OSPA distance with its localisation and cardinality parts.
/// `total^p = localisation^p + cardinality^p`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Ospa {
    pub total: f64,
    pub localisation: f64,
    pub cardinality: f64,
}

/// Position `(x, y)` of a `[x, vx, y, vy]` state.
pub fn position(state: &Vector4<f64>) -> Vector2<f64> {
    Vector2::new(state[0], state[2])
}

/// Generic OSPA over a cut-off base distance `d(i, j)` between `m` and `n` items.
fn ospa_with(m: usize, n: usize, params: &OspaParams, d: impl Fn(usize, usize) -> f64) -> Ospa {
    let (small, large) = (m.min(n), m.max(n));
    if large == 0 {
        return Ospa::default();
    }
    let (c, p) = (params.cutoff, params.order);
    if small == 0 {
        return Ospa {
            total: c,
            localisation: 0.0,
            cardinality: c,
        };
    }
    let cost: Vec<Vec<f64>> = (0..small)
        .map(|a| {
            (0..large)
                .map(|b| {
                    let (i, j) = if m <= n { (a, b) } else { (b, a) };
                    d(i, j).min(c).powf(p)
                })
                .collect()
        })
        .collect();
    let (_, loc) = assign(&cost);
    let card = c.powf(p) * (large - small) as f64;
    let nf = large as f64;
    Ospa {
        total: ((loc + card) / nf).powf(1.0 / p),
        localisation: (loc / nf).powf(1.0 / p),
        cardinality: (card / nf).powf(1.0 / p),
    }
}

/// OSPA between two finite point sets.
pub fn ospa(x: &[Vector2<f64>], y: &[Vector2<f64>], params: &OspaParams) -> Ospa {
    ospa_with(x.len(), y.len(), params, |i, j| (x[i] - y[j]).norm())
}

/// A track as positions indexed by scan.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Track {
    pub points: BTreeMap<usize, Vector2<f64>>,
}

impl Track {
    pub fn new(points: impl IntoIterator<Item = (usize, Vector2<f64>)>) -> Self {
        Track {
            points: points.into_iter().collect(),
        }
    }
}

/// Distance between two tracks on scans `lo..=hi`: the cut-off distance per
/// scan (`c` when exactly one track exists, zero when neither does),
/// averaged in the `p`-th power over scans where at least one exists.
pub fn track_distance(a: &Track, b: &Track, lo: usize, hi: usize, params: &OspaParams) -> f64 {
    let (c, p) = (params.cutoff, params.order);
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in lo..=hi {
        let d = match (a.points.get(&t), b.points.get(&t)) {
            (Some(x), Some(y)) => (x - y).norm().min(c),
            (None, None) => continue,
            _ => c,
        };
        sum += d.powf(p);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).powf(1.0 / p)
    }
}

/// OSPA between track sets over the window ending at scan `k`. Tracks with
/// no point inside the window are ignored.
pub fn ospa2(truth: &[Track], estimate: &[Track], params: &OspaParams, k: usize) -> Ospa {
    let lo = (k + 1).saturating_sub(params.window).max(1).min(k);
    let active = |tracks: &[Track]| -> Vec<Track> {
        tracks
            .iter()
            .filter(|t| t.points.range(lo..=k).next().is_some())
            .cloned()
            .collect()
    };
    let (x, y) = (active(truth), active(estimate));
    ospa_with(x.len(), y.len(), params, |i, j| track_distance(&x[i], &y[j], lo, k, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    #[test]
    fn identical_sets_are_zero() {
        let x = [p(1.0, 2.0), p(-3.0, 4.0)];
        assert_eq!(ospa(&x, &x, &OspaParams::default()).total, 0.0);
        assert_eq!(ospa(&[], &[], &OspaParams::default()).total, 0.0);
    }

    #[test]
    fn one_empty_is_cutoff() {
        let o = ospa(&[p(0.0, 0.0)], &[], &OspaParams::default());
        assert_eq!(o.total, 100.0);
        assert_eq!(o.cardinality, 100.0);
        assert_eq!(o.localisation, 0.0);
    }

    #[test]
    fn hand_computed_case() {
        let params = OspaParams {
            cutoff: 10.0,
            order: 2.0,
            window: 1,
        };
        let o = ospa(&[p(0.0, 0.0)], &[p(3.0, 4.0), p(100.0, 0.0)], &params);
        let expect = ((25.0 + 100.0) / 2.0f64).sqrt();
        assert!((o.total - expect).abs() < 1e-12);
        assert!((o.total.powi(2) - o.localisation.powi(2) - o.cardinality.powi(2)).abs() < 1e-9);
    }

    #[test]
    fn symmetric() {
        let x = [p(0.0, 0.0), p(5.0, 5.0), p(50.0, 1.0)];
        let y = [p(1.0, 0.0), p(40.0, 2.0)];
        let params = OspaParams::default();
        assert_eq!(ospa(&x, &y, &params).total, ospa(&y, &x, &params).total);
    }

    #[test]
    fn track_distance_counts_gaps() {
        let params = OspaParams {
            cutoff: 10.0,
            order: 1.0,
            window: 4,
        };
        let a = Track::new([(1, p(0.0, 0.0)), (2, p(0.0, 0.0))]);
        let b = Track::new([(2, p(3.0, 4.0)), (3, p(0.0, 0.0))]);
        // scans 1..=3: c, 5, c
        assert!((track_distance(&a, &b, 1, 4, &params) - 25.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ospa2_window_excludes_old_tracks() {
        let params = OspaParams {
            cutoff: 10.0,
            order: 1.0,
            window: 2,
        };
        let old = Track::new([(1, p(0.0, 0.0))]);
        let cur = Track::new([(5, p(0.0, 0.0))]);
        let o = ospa2(&[old.clone(), cur.clone()], &[cur], &params, 5);
        assert_eq!(o.total, 0.0);
        assert_eq!(ospa2(&[old], &[], &params, 5).total, 0.0);
    }
}
