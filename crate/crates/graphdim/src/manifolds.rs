//! Synthetic manifold samplers, isometric ambient embedding and Gaussian
//! noise injection.
//!
//! Randomness policy: every draw comes from a ChaCha8 stream seeded through
//! [`crate::seeding::derive_seed`], and uniforms/normals are produced from
//! raw `u64` output by fixed in-crate conversions (53-bit uniform, Box-Muller
//! normals). The generator choice and the conversions are pinned: changing
//! either silently changes every sampled dataset, so they must not drift.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighborhood::PointCloud;
use crate::numerics::Matrix;
use crate::seeding::derive_seed;

/// Supported synthetic manifold families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    /// d-sphere of radius R, raw coordinates in R^{d+1}.
    Sphere,
    /// Solid d-ball of radius R.
    Ball,
    /// Graph of the N(0, variance * I_d) density over its own samples.
    GaussianSurface,
    /// Curved product of circles with modulated radius (parameters R, r, c);
    /// nontrivial curvature in every tangent-normal pair.
    DeformedSphere,
    /// Unit cylinder surface (fixed d = 2), raw in R^3.
    Cylinder,
    /// One-turn helix (fixed d = 1), raw in R^3.
    Helix,
    /// Swiss roll (fixed d = 2), raw in R^3.
    SwissRoll,
    /// Moebius strip with a half twist (fixed d = 2), raw in R^3.
    Moebius,
    /// Clifford torus (fixed d = 2), raw in R^4.
    Torus,
    /// Saddle surface z = u^2 - v^2 (fixed d = 2), raw in R^3.
    Hyperbolic,
}

/// Kind-specific real parameters with conventional defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifoldParams {
    /// Sphere/ball/deformed-sphere major radius R.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Gaussian-surface variance.
    #[serde(default = "default_variance")]
    pub variance: f64,
    /// Deformed-sphere minor radius r (must stay below R).
    #[serde(default = "default_deform_r")]
    pub deform_r: f64,
    /// Deformed-sphere frequency c.
    #[serde(default = "default_deform_c")]
    pub deform_c: f64,
}

fn default_radius() -> f64 {
    1.0
}
fn default_variance() -> f64 {
    0.25
}
fn default_deform_r() -> f64 {
    0.5
}
fn default_deform_c() -> f64 {
    1.0
}

impl Default for ManifoldParams {
    fn default() -> Self {
        ManifoldParams {
            radius: default_radius(),
            variance: default_variance(),
            deform_r: default_deform_r(),
            deform_c: default_deform_c(),
        }
    }
}

/// A manifold family plus intrinsic dimension `d`, ambient dimension `p` and
/// its parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub d: usize,
    pub p: usize,
    #[serde(default)]
    pub params: ManifoldParams,
}

impl ManifoldSpec {
    pub fn new(kind: ManifoldKind, d: usize, p: usize) -> Self {
        ManifoldSpec {
            kind,
            d,
            p,
            params: ManifoldParams::default(),
        }
    }

    /// Dimension of the raw parametrization before zero-padding.
    pub fn raw_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere | ManifoldKind::GaussianSurface => self.d + 1,
            ManifoldKind::Ball => self.d,
            ManifoldKind::DeformedSphere => 2 * self.d,
            ManifoldKind::Cylinder
            | ManifoldKind::Helix
            | ManifoldKind::SwissRoll
            | ManifoldKind::Moebius
            | ManifoldKind::Hyperbolic => 3,
            ManifoldKind::Torus => 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fixed_d = match self.kind {
            ManifoldKind::Helix => Some(1),
            ManifoldKind::Cylinder
            | ManifoldKind::SwissRoll
            | ManifoldKind::Moebius
            | ManifoldKind::Torus
            | ManifoldKind::Hyperbolic => Some(2),
            _ => None,
        };
        if let Some(want) = fixed_d {
            if self.d != want {
                return Err(Error::InvalidParameter(format!(
                    "{:?} has fixed intrinsic dimension {want}, got d={}",
                    self.kind, self.d
                )));
            }
        }
        if self.d < 1 || self.d >= self.p {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= d < p, got d={}, p={}",
                self.d, self.p
            )));
        }
        if self.raw_dim() > self.p {
            return Err(Error::InvalidParameter(format!(
                "{:?} with d={} needs ambient dimension >= {}, got p={}",
                self.kind,
                self.d,
                self.raw_dim(),
                self.p
            )));
        }
        if self.params.radius <= 0.0 {
            return Err(Error::InvalidParameter("radius must be positive".into()));
        }
        if self.kind == ManifoldKind::GaussianSurface && self.params.variance <= 0.0 {
            return Err(Error::InvalidParameter("variance must be positive".into()));
        }
        if self.kind == ManifoldKind::DeformedSphere {
            let p = &self.params;
            if !(p.radius > p.deform_r && p.deform_r > 0.0 && p.deform_c > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "deformed sphere needs R > r > 0 and c > 0, got R={}, r={}, c={}",
                    p.radius, p.deform_r, p.deform_c
                )));
            }
        }
        Ok(())
    }
}

/// Sampling controls: size, seed, noise, and whether the zero-padded raw
/// coordinates are mixed by a seeded random orthogonal map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleConfig {
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_true")]
    pub embed_rotation: bool,
}

fn default_true() -> bool {
    true
}

impl SampleConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        SampleConfig {
            n,
            seed,
            noise_sigma: 0.0,
            embed_rotation: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidParameter("sample count must be >= 1".into()));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be a nonnegative finite number, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Uniform/normal draws from a raw u64 stream; the conversions are part of
/// the pinned randomness contract.
pub(crate) struct Draw {
    rng: ChaCha8Rng,
}

impl Draw {
    pub(crate) fn new(seed: u64) -> Self {
        Draw {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in [0, 1) with 53 bits.
    pub(crate) fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub(crate) fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller; one draw of the pair is discarded to
    /// keep the stream layout simple.
    pub(crate) fn normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Seeded Haar-like random orthogonal matrix: Gram-Schmidt on a square
/// Gaussian matrix.
pub fn random_orthogonal(p: usize, seed: u64) -> Matrix {
    let mut draw = Draw::new(seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    while cols.len() < p {
        let mut v: Vec<f64> = (0..p).map(|_| draw.normal()).collect();
        for existing in &cols {
            let dot: f64 = v.iter().zip(existing).map(|(a, b)| a * b).sum();
            for (x, e) in v.iter_mut().zip(existing) {
                *x -= dot * e;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue; // essentially impossible; redraw
        }
        for x in &mut v {
            *x /= norm;
        }
        cols.push(v);
    }
    let mut q = Matrix::zeros(p, p);
    for (c, col) in cols.iter().enumerate() {
        for (r, x) in col.iter().enumerate() {
            q.set(r, c, *x);
        }
    }
    q
}

/// Raw deformed-sphere parametrization: coordinate `j` pairs with `j + d`,
/// tracing a circle of radius `R + r cos(2 c pi u_j)` in each pair.
pub(crate) fn deformed_sphere_point(u: &[f64], radius: f64, r: f64, c: f64) -> Vec<f64> {
    let d = u.len();
    let mut x = vec![0.0; 2 * d];
    for (j, &uj) in u.iter().enumerate() {
        let rho = radius + r * (2.0 * c * std::f64::consts::PI * uj).cos();
        let angle = std::f64::consts::TAU * uj;
        x[j] = rho * angle.cos();
        x[j + d] = rho * angle.sin();
    }
    x
}

/// Gaussian density value in d dimensions with covariance `variance * I`.
pub(crate) fn gaussian_density(u: &[f64], variance: f64) -> f64 {
    let d = u.len() as f64;
    let norm2: f64 = u.iter().map(|x| x * x).sum();
    (std::f64::consts::TAU * variance).powf(-d / 2.0) * (-norm2 / (2.0 * variance)).exp()
}

/// Swiss-roll scale normalizer (the raw coordinates are divided by it).
pub(crate) const SWISS_ROLL_SCALE: f64 = 4.5 * std::f64::consts::PI;

fn raw_point(spec: &ManifoldSpec, draw: &mut Draw) -> Vec<f64> {
    let d = spec.d;
    let prm = &spec.params;
    match spec.kind {
        ManifoldKind::Sphere => {
            let mut v: Vec<f64> = (0..=d).map(|_| draw.normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            for x in &mut v {
                *x *= prm.radius / norm;
            }
            v
        }
        ManifoldKind::Ball => {
            let mut v: Vec<f64> = (0..d).map(|_| draw.normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            let radius = prm.radius * draw.uniform().powf(1.0 / d as f64);
            for x in &mut v {
                *x *= radius / norm;
            }
            v
        }
        ManifoldKind::GaussianSurface => {
            let sd = prm.variance.sqrt();
            let mut u: Vec<f64> = (0..d).map(|_| sd * draw.normal()).collect();
            u.push(gaussian_density(&u, prm.variance));
            u
        }
        ManifoldKind::DeformedSphere => {
            let u: Vec<f64> = (0..d).map(|_| draw.uniform()).collect();
            deformed_sphere_point(&u, prm.radius, prm.deform_r, prm.deform_c)
        }
        ManifoldKind::Cylinder => {
            let theta = draw.uniform_in(0.0, std::f64::consts::TAU);
            let h = draw.uniform();
            vec![theta.cos(), theta.sin(), h]
        }
        ManifoldKind::Helix => {
            let t = draw.uniform_in(0.0, std::f64::consts::TAU);
            vec![t.cos(), t.sin(), t / std::f64::consts::TAU]
        }
        ManifoldKind::SwissRoll => {
            let t = draw.uniform_in(1.5 * std::f64::consts::PI, 4.5 * std::f64::consts::PI);
            let h = draw.uniform_in(0.0, 21.0);
            vec![
                t * t.cos() / SWISS_ROLL_SCALE,
                t * t.sin() / SWISS_ROLL_SCALE,
                h / SWISS_ROLL_SCALE,
            ]
        }
        ManifoldKind::Moebius => {
            // Half twist, center radius 1, width 0.4.
            let u = draw.uniform_in(0.0, std::f64::consts::TAU);
            let v = draw.uniform_in(-0.2, 0.2);
            let half = u / 2.0;
            vec![
                (1.0 + v * half.cos()) * u.cos(),
                (1.0 + v * half.cos()) * u.sin(),
                v * half.sin(),
            ]
        }
        ManifoldKind::Torus => {
            let u = draw.uniform_in(0.0, std::f64::consts::TAU);
            let v = draw.uniform_in(0.0, std::f64::consts::TAU);
            let s = 1.0 / 2.0_f64.sqrt();
            vec![s * u.cos(), s * u.sin(), s * v.cos(), s * v.sin()]
        }
        ManifoldKind::Hyperbolic => {
            let u = draw.uniform_in(-1.0, 1.0);
            let v = draw.uniform_in(-1.0, 1.0);
            vec![u, v, u * u - v * v]
        }
    }
}

/// Draws `cfg.n` points from the manifold, zero-pads them to dimension `p`,
/// optionally applies a seeded random orthogonal map, and finally adds
/// isotropic Gaussian noise. Everything derives deterministically from
/// `cfg.seed`.
pub fn sample(spec: &ManifoldSpec, cfg: &SampleConfig) -> Result<PointCloud> {
    spec.validate()?;
    cfg.validate()?;

    let raw = spec.raw_dim();
    let p = spec.p;
    let mut draw = Draw::new(derive_seed(cfg.seed, "points", 0));
    let rotation = if cfg.embed_rotation {
        Some(random_orthogonal(p, derive_seed(cfg.seed, "basis", 0)))
    } else {
        None
    };

    let mut data = Vec::with_capacity(cfg.n * p);
    let mut padded = vec![0.0; p];
    for _ in 0..cfg.n {
        let x = raw_point(spec, &mut draw);
        padded[..raw].copy_from_slice(&x);
        for slot in padded.iter_mut().skip(raw) {
            *slot = 0.0;
        }
        match &rotation {
            Some(q) => {
                for r in 0..p {
                    let mut s = 0.0;
                    for c in 0..p {
                        s += q.get(r, c) * padded[c];
                    }
                    data.push(s);
                }
            }
            None => data.extend_from_slice(&padded),
        }
    }

    let cloud = PointCloud::new(cfg.n, p, data)?;
    if cfg.noise_sigma > 0.0 {
        Ok(add_noise(
            &cloud,
            cfg.noise_sigma,
            derive_seed(cfg.seed, "noise", 0),
        )?)
    } else {
        Ok(cloud)
    }
}

/// Adds i.i.d. N(0, sigma^2) to every coordinate; `sigma = 0` returns the
/// cloud unchanged.
pub fn add_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> Result<PointCloud> {
    if sigma.is_nan() || sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let mut draw = Draw::new(seed);
    let data: Vec<f64> = cloud
        .data()
        .iter()
        .map(|x| x + sigma * draw.normal())
        .collect();
    PointCloud::new(cloud.len(), cloud.dim(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_points_keep_their_norm() {
        let spec = ManifoldSpec::new(ManifoldKind::Sphere, 5, 10);
        let cloud = sample(&spec, &SampleConfig::new(300, 42)).unwrap();
        for i in 0..cloud.len() {
            let norm: f64 = cloud.point(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deformed_sphere_at_zero_parameter() {
        let x = deformed_sphere_point(&[0.0, 0.0, 0.0], 1.0, 0.5, 0.01);
        for j in 0..3 {
            assert!((x[j] - 1.5).abs() < 1e-15);
            assert!(x[j + 3].abs() < 1e-15);
        }
    }

    #[test]
    fn ball_radius_distribution() {
        // Volume scaling: P(|x| <= R/2) = (1/2)^d = 1/4 for d = 2.
        let spec = ManifoldSpec::new(ManifoldKind::Ball, 2, 3);
        let cloud = sample(
            &spec,
            &SampleConfig {
                n: 100_000,
                seed: 9,
                noise_sigma: 0.0,
                embed_rotation: false,
            },
        )
        .unwrap();
        let inside = (0..cloud.len())
            .filter(|&i| cloud.point(i).iter().map(|x| x * x).sum::<f64>().sqrt() <= 0.5)
            .count();
        let fraction = inside as f64 / cloud.len() as f64;
        assert!((fraction - 0.25).abs() < 0.01, "fraction={fraction}");
    }

    #[test]
    fn zero_noise_is_identity_and_seeds_reproduce() {
        let spec = ManifoldSpec::new(ManifoldKind::Torus, 2, 4);
        let cfg = SampleConfig::new(50, 31);
        let a = sample(&spec, &cfg).unwrap();
        let b = sample(&spec, &cfg).unwrap();
        assert_eq!(a, b);
        let noiseless = add_noise(&a, 0.0, 123).unwrap();
        assert_eq!(a, noiseless);
    }

    #[test]
    fn noise_standard_deviation_is_calibrated() {
        let mut rng = crate::seeding::SplitMix64::new(11);
        let clean =
            PointCloud::new(100_000, 2, (0..200_000).map(|_| rng.next_f64()).collect()).unwrap();
        let noisy = add_noise(&clean, 0.1, 77).unwrap();
        for c in 0..2 {
            let diffs: Vec<f64> = (0..clean.len())
                .map(|i| noisy.point(i)[c] - clean.point(i)[c])
                .collect();
            let mean: f64 = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let var: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
                / (diffs.len() - 1) as f64;
            let sd = var.sqrt();
            assert!((0.099..=0.101).contains(&sd), "sd={sd}");
        }
    }

    #[test]
    fn embedding_preserves_pairwise_distances() {
        let spec = ManifoldSpec::new(ManifoldKind::SwissRoll, 2, 7);
        let flat = sample(
            &spec,
            &SampleConfig {
                n: 80,
                seed: 5,
                noise_sigma: 0.0,
                embed_rotation: false,
            },
        )
        .unwrap();
        let rotated = sample(&spec, &SampleConfig::new(80, 5)).unwrap();
        for i in 0..20 {
            for j in (i + 1)..20 {
                let a = flat.dist2(i, j).sqrt();
                let b = rotated.dist2(i, j).sqrt();
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        for p in [2usize, 5, 11] {
            let q = random_orthogonal(p, 1000 + p as u64);
            let qtq = q.transpose().matmul(&q);
            for i in 0..p {
                for j in 0..p {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((qtq.get(i, j) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sphere_coordinate_means_vanish() {
        let spec = ManifoldSpec::new(ManifoldKind::Sphere, 3, 6);
        let cloud = sample(&spec, &SampleConfig::new(100_000, 8)).unwrap();
        // Coordinates of a uniform sphere sample have mean 0 and variance
        // R^2/(d+1); allow three standard errors.
        let var = 1.0 / 4.0;
        let se = (var / cloud.len() as f64).sqrt();
        for c in 0..6 {
            let mean: f64 =
                (0..cloud.len()).map(|i| cloud.point(i)[c]).sum::<f64>() / cloud.len() as f64;
            assert!(mean.abs() < 3.0 * se, "coordinate {c} mean {mean}");
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ManifoldSpec::new(ManifoldKind::Helix, 2, 4)
            .validate()
            .is_err());
        assert!(ManifoldSpec::new(ManifoldKind::Sphere, 5, 5)
            .validate()
            .is_err());
        assert!(ManifoldSpec::new(ManifoldKind::DeformedSphere, 3, 4)
            .validate()
            .is_err());
        let mut spec = ManifoldSpec::new(ManifoldKind::DeformedSphere, 3, 6);
        spec.params.deform_r = 2.0; // r > R
        assert!(spec.validate().is_err());
        assert!(ManifoldSpec::new(ManifoldKind::Moebius, 2, 4)
            .validate()
            .is_ok());
    }

    #[test]
    fn gaussian_surface_density_coordinate() {
        let spec = ManifoldSpec::new(ManifoldKind::GaussianSurface, 2, 4);
        let cloud = sample(
            &spec,
            &SampleConfig {
                n: 40,
                seed: 3,
                noise_sigma: 0.0,
                embed_rotation: false,
            },
        )
        .unwrap();
        for i in 0..cloud.len() {
            let pt = cloud.point(i);
            let want = gaussian_density(&pt[..2], 0.25);
            assert!((pt[2] - want).abs() < 1e-12);
            assert_eq!(pt[3], 0.0);
        }
    }
}
