//! Linear-Gaussian motion, birth and sensor models.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use crate::error::{GlmbError, Result};

/// Gaussian density over the kinematic state `[px, vx, py, vy]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl Gaussian {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Self {
        Gaussian { mean, cov }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionModel {
    pub f: Matrix4<f64>,
    pub q: Matrix4<f64>,
    pub p_survive: f64,
}

impl MotionModel {
    /// Nearly-constant-velocity model with white acceleration noise `sigma_a`.
    pub fn constant_velocity(dt: f64, sigma_a: f64, p_survive: f64) -> Self {
        let mut f = Matrix4::identity();
        f[(0, 1)] = dt;
        f[(2, 3)] = dt;
        let block = [
            [dt.powi(4) / 4.0, dt.powi(3) / 2.0],
            [dt.powi(3) / 2.0, dt.powi(2)],
        ];
        let mut q = Matrix4::zeros();
        for axis in 0..2 {
            for r in 0..2 {
                for c in 0..2 {
                    q[(2 * axis + r, 2 * axis + c)] = sigma_a * sigma_a * block[r][c];
                }
            }
        }
        MotionModel { f, q, p_survive }
    }

    pub fn predict(&self, g: &Gaussian) -> Gaussian {
        let mean = self.f * g.mean;
        let cov = self.f * g.cov * self.f.transpose() + self.q;
        Gaussian::new(mean, symmetrize(&cov))
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_survive", self.p_survive)?;
        check_symmetric_psd("Q", &self.q)
    }
}

/// One labeled-multi-Bernoulli birth site.
#[derive(Clone, Debug, PartialEq)]
pub struct BirthComponent {
    /// Birth index `iota`; the label born at scan `k` is `(k, iota)`.
    pub label_index: usize,
    pub r_birth: f64,
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl BirthComponent {
    pub fn density(&self) -> Gaussian {
        Gaussian::new(self.mean, self.cov)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BirthModel {
    /// Sorted by `label_index`, indices distinct.
    pub components: Vec<BirthComponent>,
}

impl BirthModel {
    pub fn new(mut components: Vec<BirthComponent>) -> Result<Self> {
        components.sort_by_key(|c| c.label_index);
        if components.windows(2).any(|w| w[0].label_index == w[1].label_index) {
            return Err(GlmbError::InvalidArgument("duplicate birth label index".into()));
        }
        Ok(BirthModel { components })
    }

    pub fn component(&self, label_index: usize) -> Option<&BirthComponent> {
        self.components
            .binary_search_by_key(&label_index, |c| c.label_index)
            .ok()
            .map(|i| &self.components[i])
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            check_probability("r_birth", c.r_birth)?;
            check_symmetric_psd("birth covariance", &c.cov)?;
        }
        Ok(())
    }
}

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn square(half_width: f64) -> Self {
        Region {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorModel {
    pub h: Matrix2x4<f64>,
    pub r: Matrix2<f64>,
    pub p_detect: f64,
    /// Expected number of clutter returns per scan.
    pub clutter_rate: f64,
    pub clutter_region: Region,
}

impl SensorModel {
    /// Clutter intensity per unit area; clutter is uniform over the region.
    pub fn clutter_density(&self) -> f64 {
        self.clutter_rate / self.clutter_region.area()
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_detect", self.p_detect)?;
        if !(self.clutter_rate >= 0.0) || self.clutter_region.area() <= 0.0 {
            return Err(GlmbError::InvalidArgument(
                "clutter rate must be >= 0 over a region of positive area".into(),
            ));
        }
        let r = &self.r;
        let det = r[(0, 0)] * r[(1, 1)] - r[(0, 1)] * r[(1, 0)];
        if (r[(0, 1)] - r[(1, 0)]).abs() > 1e-9 * r.abs().max() || r[(0, 0)] <= 0.0 || det <= 0.0 {
            return Err(GlmbError::InvalidArgument("R must be symmetric positive definite".into()));
        }
        Ok(())
    }

    /// Log of the clutter intensity at `z`. Zero-rate clutter gives `-inf`.
    fn log_clutter_at(&self, _z: &Vector2<f64>) -> f64 {
        self.clutter_density().ln()
    }

    /// Innovation statistics of `density` against measurement `z`.
    pub(crate) fn innovation(&self, density: &Gaussian, z: &Vector2<f64>) -> Innovation {
        let ph_t = density.cov * self.h.transpose();
        let s = symmetrize2(&(self.h * ph_t + self.r));
        let nu = z - self.h * density.mean;
        Innovation { nu, s, ph_t }
    }

    /// Log of the detection term `P_D N(z; H m, H P H' + R) / kappa(z)`.
    pub(crate) fn log_detection_ratio(&self, innovation: &Innovation, z: &Vector2<f64>) -> f64 {
        self.p_detect.ln() + log_normal2(&innovation.nu, &innovation.s) - self.log_clutter_at(z)
    }

    /// Joseph-form measurement update.
    pub(crate) fn update(&self, density: &Gaussian, innovation: &Innovation) -> Gaussian {
        let s_inv = inverse2(&innovation.s);
        let gain = innovation.ph_t * s_inv;
        let mean = density.mean + gain * innovation.nu;
        let ikh = Matrix4::identity() - gain * self.h;
        let cov = ikh * density.cov * ikh.transpose() + gain * self.r * gain.transpose();
        Gaussian::new(mean, symmetrize(&cov))
    }
}

pub(crate) struct Innovation {
    pub nu: Vector2<f64>,
    pub s: Matrix2<f64>,
    pub ph_t: nalgebra::Matrix4x2<f64>,
}

/// Likelihood ratio of measurement index `i` marginalized over `state_density`.
///
/// `i = 0` is a misdetection and gives `1 - P_D`; `i > 0` refers to
/// `measurements[i - 1]` and gives `P_D N(z_i; H m, H P H' + R) / kappa(z_i)`.
pub fn psi(
    sensor: &SensorModel,
    measurements: &[Vector2<f64>],
    i: usize,
    state_density: &Gaussian,
) -> Result<f64> {
    log_psi(sensor, measurements, i, state_density).map(f64::exp)
}

pub fn log_psi(
    sensor: &SensorModel,
    measurements: &[Vector2<f64>],
    i: usize,
    state_density: &Gaussian,
) -> Result<f64> {
    if i == 0 {
        return Ok((1.0 - sensor.p_detect).ln());
    }
    let z = measurements.get(i - 1).ok_or_else(|| {
        GlmbError::InvalidArgument(format!(
            "measurement index {i} out of range 0..={}",
            measurements.len()
        ))
    })?;
    let inn = sensor.innovation(state_density, z);
    Ok(sensor.log_detection_ratio(&inn, z))
}

/// Complete model set used by the tracker.
#[derive(Clone, Debug, PartialEq)]
pub struct Models {
    pub motion: MotionModel,
    pub birth: BirthModel,
    pub sensor: SensorModel,
}

impl Models {
    pub fn validate(&self) -> Result<()> {
        self.motion.validate()?;
        self.birth.validate()?;
        self.sensor.validate()
    }
}

impl Default for Models {
    fn default() -> Self {
        let (motion, birth, sensor) = default_scenario_models();
        Models {
            motion,
            birth,
            sensor,
        }
    }
}

/// Models of the reference scenario: constant velocity with unit
/// acceleration noise, four birth sites at `(+-500, +-500)`, position-only
/// measurements with 30 m noise, `P_D = 0.3` and 3 clutter returns per scan
/// over `[-1000, 1000]^2`.
pub fn default_scenario_models() -> (MotionModel, BirthModel, SensorModel) {
    let motion = MotionModel::constant_velocity(1.0, 1.0, 0.95);
    let birth_cov = Matrix4::from_diagonal_element(15.0 * 15.0);
    let sites = [(500.0, 500.0), (-500.0, 500.0), (-500.0, -500.0), (500.0, -500.0)];
    let components = sites
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| BirthComponent {
            label_index: i + 1,
            r_birth: 0.03,
            mean: Vector4::new(x, 0.0, y, 0.0),
            cov: birth_cov,
        })
        .collect();
    let birth = BirthModel { components };
    let mut h = Matrix2x4::zeros();
    h[(0, 0)] = 1.0;
    h[(1, 2)] = 1.0;
    let sensor = SensorModel {
        h,
        r: Matrix2::from_diagonal_element(30.0 * 30.0),
        p_detect: 0.3,
        clutter_rate: 3.0,
        clutter_region: Region::square(1000.0),
    };
    (motion, birth, sensor)
}

pub(crate) fn log_normal2(nu: &Vector2<f64>, s: &Matrix2<f64>) -> f64 {
    let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
    let inv = inverse2(s);
    let maha = nu.dot(&(inv * nu));
    -(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * maha
}

pub(crate) fn inverse2(s: &Matrix2<f64>) -> Matrix2<f64> {
    let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
    Matrix2::new(s[(1, 1)], -s[(0, 1)], -s[(1, 0)], s[(0, 0)]) / det
}

pub(crate) fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

fn symmetrize2(m: &Matrix2<f64>) -> Matrix2<f64> {
    (m + m.transpose()) * 0.5
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(GlmbError::InvalidArgument(format!("{name} = {p} is not in [0, 1]")))
    }
}

fn check_symmetric_psd(name: &str, m: &Matrix4<f64>) -> Result<()> {
    let scale = m.abs().max().max(1.0);
    if (m - m.transpose()).abs().max() > 1e-9 * scale {
        return Err(GlmbError::InvalidArgument(format!("{name} is not symmetric")));
    }
    let eig = nalgebra::SymmetricEigen::new(*m);
    if eig.eigenvalues.iter().any(|&l| l < -1e-9 * scale) {
        return Err(GlmbError::InvalidArgument(format!("{name} is not positive semi-definite")));
    }
    Ok(())
}
