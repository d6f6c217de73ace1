//! Reference implementations used as test oracles. They are deliberately
//! written from the model equations without reusing the library's kernels.

#![allow(dead_code)]

use std::collections::HashMap;

use glmb_core::{AssociationHistory, AssociationMap, Label, Models};
use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector2, Vector4};

pub fn gauss2(x: Vector2<f64>, mean: Vector2<f64>, cov: Matrix2<f64>) -> f64 {
    let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
    let inv = Matrix2::new(cov[(1, 1)], -cov[(0, 1)], -cov[(1, 0)], cov[(0, 0)]) / det;
    let d = x - mean;
    (-0.5 * (d.transpose() * inv * d)[0]).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

/// `E[f(p)]` for `p ~ N(mean, cov)` by the trapezoid rule on a whitened
/// `[-12, 12]^2` grid.
pub fn expect2(f: impl Fn(Vector2<f64>) -> f64, mean: Vector2<f64>, cov: Matrix2<f64>, points: usize) -> f64 {
    let l = cov.cholesky().expect("positive definite").l();
    let h = 24.0 / (points - 1) as f64;
    let mut total = 0.0;
    for a in 0..points {
        let u0 = -12.0 + a as f64 * h;
        let wa = if a == 0 || a == points - 1 { 0.5 } else { 1.0 };
        for b in 0..points {
            let u1 = -12.0 + b as f64 * h;
            let wb = if b == 0 || b == points - 1 { 0.5 } else { 1.0 };
            let u = Vector2::new(u0, u1);
            let phi = (-0.5 * u.norm_squared()).exp() / (2.0 * std::f64::consts::PI);
            total += wa * wb * phi * f(mean + l * u);
        }
    }
    total * h * h
}

pub fn hmat() -> nalgebra::Matrix2x4<f64> {
    nalgebra::Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
}

#[derive(Clone, Debug)]
pub struct Belief {
    pub m: Vector4<f64>,
    pub p: Matrix4<f64>,
}

pub fn predict(b: &Belief, f: &Matrix4<f64>, q: &Matrix4<f64>) -> Belief {
    Belief {
        m: f * b.m,
        p: f * b.p * f.transpose() + q,
    }
}

/// Standard-form Kalman update and the ratio `P_D N(z; Hm, S) / kappa`.
pub fn update(b: &Belief, z: Vector2<f64>, models: &Models) -> (Belief, f64) {
    let s = &models.sensor;
    let h = s.h;
    let sm = h * b.p * h.transpose() + s.r;
    let k = b.p * h.transpose() * sm.try_inverse().unwrap();
    let m = b.m + k * (z - h * b.m);
    let p = (Matrix4::identity() - k * h) * b.p;
    let kappa = s.clutter_rate / s.clutter_region.area();
    (Belief { m, p }, s.p_detect * gauss2(z, h * b.m, sm) / kappa)
}

/// Log weight of `gamma` as the product over scans and candidate labels of
/// the per-label association weights, computed by plain Kalman recursion.
pub fn log_weight(gamma: &AssociationHistory, models: &Models, scans: &[Vec<Vector2<f64>>]) -> f64 {
    let mut beliefs: HashMap<Label, Belief> = HashMap::new();
    let ps = models.motion.p_survive;
    let pd = models.sensor.p_detect;
    let mut total = 0.0;
    for (j, map) in gamma.maps().enumerate().skip(1) {
        for &(ell, alpha) in map.entries() {
            let born_now = ell.s == j;
            if alpha < 0 {
                total += if born_now {
                    (1.0 - models.birth.component(ell.iota).unwrap().r_birth).ln()
                } else {
                    beliefs.remove(&ell);
                    (1.0 - ps).ln()
                };
                continue;
            }
            let (prior, head) = if born_now {
                let c = models.birth.component(ell.iota).unwrap();
                (Belief { m: c.mean, p: c.cov }, c.r_birth)
            } else {
                (predict(&beliefs[&ell], &models.motion.f, &models.motion.q), ps)
            };
            let (post, psi) = if alpha == 0 {
                (prior, 1.0 - pd)
            } else {
                update(&prior, scans[j][alpha as usize - 1], models)
            };
            total += head.ln() + psi.ln();
            beliefs.insert(ell, post);
        }
    }
    total
}

/// Every valid association history over `scans[1..]`.
pub fn enumerate_histories(models: &Models, scans: &[Vec<Vector2<f64>>]) -> Vec<AssociationHistory> {
    fn maps_for(j: usize, m: usize, domain: &[Label]) -> Vec<AssociationMap> {
        let mut out = Vec::new();
        let mut values = vec![-1i32; domain.len()];
        loop {
            let positives: Vec<i32> = values.iter().copied().filter(|v| *v > 0).collect();
            let mut sorted = positives.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() == positives.len() {
                out.push(AssociationMap::from_entries(
                    j,
                    m,
                    domain.iter().copied().zip(values.iter().copied()),
                ));
            }
            let mut i = 0;
            loop {
                if i == values.len() {
                    return out;
                }
                values[i] += 1;
                if values[i] <= m as i32 {
                    break;
                }
                values[i] = -1;
                i += 1;
            }
        }
    }
    let mut frontier = vec![AssociationHistory::new()];
    for j in 1..scans.len() {
        let mut next = Vec::new();
        for gamma in &frontier {
            let mut domain: Vec<Label> = gamma.map(j - 1).live().collect();
            domain.extend(models.birth.components.iter().map(|c| Label::new(j, c.label_index)));
            for map in maps_for(j, scans[j].len(), &domain) {
                let mut g = gamma.clone();
                g.push(map);
                next.push(g);
            }
        }
        frontier = next;
    }
    frontier
}

/// Normalized exact posterior keyed by the text form of each history.
pub fn exact_posterior(models: &Models, scans: &[Vec<Vector2<f64>>]) -> HashMap<String, f64> {
    let all = enumerate_histories(models, scans);
    let logs: Vec<f64> = all.iter().map(|g| log_weight(g, models, scans)).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    all.iter()
        .zip(&logs)
        .map(|(g, l)| (g.to_string(), (l - max).exp() / total))
        .collect()
}

/// Smoothed means of a linear-Gaussian chain by conditioning the joint
/// Gaussian of all states on the detections (`None` = misdetected).
pub fn batch_smoothed_means(
    prior: &Belief,
    detections: &[Option<Vector2<f64>>],
    models: &Models,
) -> Vec<Vector4<f64>> {
    let n = detections.len();
    let (f, q, h, r) = (models.motion.f, models.motion.q, models.sensor.h, models.sensor.r);
    let mut mu = DVector::zeros(4 * n);
    let mut cov = DMatrix::zeros(4 * n, 4 * n);
    let mut mean = prior.m;
    let mut covs: Vec<Matrix4<f64>> = vec![prior.p];
    for i in 0..n {
        if i > 0 {
            mean = f * mean;
            let prev = covs[i - 1];
            covs.push(f * prev * f.transpose() + q);
        }
        mu.rows_mut(4 * i, 4).copy_from(&mean);
    }
    // Cov(x_i, x_j) = F^(j-i) Cov(x_i) for j >= i.
    for i in 0..n {
        let mut block = covs[i];
        for j in i..n {
            cov.view_mut((4 * j, 4 * i), (4, 4)).copy_from(&block);
            cov.view_mut((4 * i, 4 * j), (4, 4)).copy_from(&block.transpose());
            block = f * block;
        }
    }
    let observed: Vec<(usize, Vector2<f64>)> = detections
        .iter()
        .enumerate()
        .filter_map(|(i, z)| z.map(|z| (i, z)))
        .collect();
    if observed.is_empty() {
        return (0..n).map(|i| mu.fixed_rows::<4>(4 * i).into_owned()).collect();
    }
    let m = observed.len();
    let mut a = DMatrix::zeros(2 * m, 4 * n);
    let mut z = DVector::zeros(2 * m);
    let mut noise = DMatrix::zeros(2 * m, 2 * m);
    for (row, (i, zi)) in observed.iter().enumerate() {
        a.view_mut((2 * row, 4 * i), (2, 4)).copy_from(&h);
        z.rows_mut(2 * row, 2).copy_from(zi);
        noise.view_mut((2 * row, 2 * row), (2, 2)).copy_from(&r);
    }
    let s = &a * &cov * a.transpose() + noise;
    let gain = &cov * a.transpose() * s.try_inverse().unwrap();
    let post = &mu + gain * (z - &a * &mu);
    (0..n).map(|i| post.fixed_rows::<4>(4 * i).into_owned()).collect()
}

/// Minimum over injections of the smaller set into the larger of the summed
/// cut-off distances to the power `p`, by exhaustive search.
pub fn brute_ospa(x: &[Vector2<f64>], y: &[Vector2<f64>], c: f64, p: f64) -> f64 {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let n = large.len();
    if n == 0 {
        return 0.0;
    }
    fn rec(small: &[Vector2<f64>], large: &[Vector2<f64>], i: usize, used: &mut [bool], c: f64, p: f64) -> f64 {
        if i == small.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..large.len() {
            if !used[j] {
                used[j] = true;
                let d = (small[i] - large[j]).norm().min(c).powf(p);
                best = best.min(d + rec(small, large, i + 1, used, c, p));
                used[j] = false;
            }
        }
        best
    }
    let loc = rec(small, large, 0, &mut vec![false; n], c, p);
    ((loc + c.powf(p) * (n - small.len()) as f64) / n as f64).powf(1.0 / p)
}

/// Models with two birth sites and friendlier probabilities for toy
/// instances whose posterior should be spread over many histories.
pub fn toy_models(p_detect: f64, r_birth: f64, clutter_rate: f64) -> Models {
    let mut models = Models::default();
    models.birth.components.truncate(2);
    for c in &mut models.birth.components {
        c.r_birth = r_birth;
    }
    models.sensor.p_detect = p_detect;
    models.sensor.clutter_rate = clutter_rate;
    models.motion.p_survive = 0.8;
    models
}
