//! Seeded perturbation directions.
//!
//! Every random quantity in a run comes from a [`Stream`]. Trial `k` of an
//! experiment uses `derive_stream(base_seed, k)`, and within a trial the
//! separate consumers (direction sampling, query noise, environment drift)
//! take distinct ChaCha stream ids so they never overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops;

/// Seeded random stream used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Redraw threshold for the Gaussian draw that is normalized onto the sphere.
const DEGENERATE_NORM: f64 = 1e-300;

/// Tolerance on `|u| = 1` for sphere directions.
pub const SPHERE_NORM_TOL: f64 = 1e-12;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes `index` into `base` (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for trial (or sub-purpose) `index` of a run seeded with `base`.
pub fn derive_stream(base: u64, index: u64) -> Stream {
    stream(derive_seed(base, index))
}

/// Same key as `stream(seed)` but on ChaCha stream id `purpose`.
pub fn purpose_stream(seed: u64, purpose: u64) -> Stream {
    let mut rng = stream(seed);
    rng.set_stream(purpose);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    Gaussian,
    Sphere,
}

/// A random perturbation direction `u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    components: Vec<f64>,
    kind: DirectionKind,
}

impl Direction {
    /// Wraps explicit components, checking the invariants of `kind`.
    pub fn new(components: Vec<f64>, kind: DirectionKind) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if !vecops::all_finite(&components) {
            return Err(Error::InvalidParameter {
                name: "direction",
                reason: "non-finite component".into(),
            });
        }
        if kind == DirectionKind::Sphere {
            let norm = vecops::norm(&components);
            if (norm - 1.0).abs() > SPHERE_NORM_TOL {
                return Err(Error::NotUnitNorm { norm });
            }
        }
        Ok(Self { components, kind })
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn kind(&self) -> DirectionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn norm_sq(&self) -> f64 {
        vecops::norm_sq(&self.components)
    }
}

/// Draws `u ~ N(0, I_d)`.
pub fn sample_gaussian_direction<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<Direction> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    let components = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    Ok(Direction {
        components,
        kind: DirectionKind::Gaussian,
    })
}

/// Draws `u` uniformly from the unit sphere by normalizing a Gaussian draw.
pub fn sample_sphere_direction<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<Direction> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = vecops::norm(&g);
        if norm < DEGENERATE_NORM {
            continue;
        }
        let components = g.into_iter().map(|c| c / norm).collect();
        return Ok(Direction {
            components,
            kind: DirectionKind::Sphere,
        });
    }
}

pub fn sample_direction<R: Rng + ?Sized>(rng: &mut R, d: usize, kind: DirectionKind) -> Result<Direction> {
    match kind {
        DirectionKind::Gaussian => sample_gaussian_direction(rng, d),
        DirectionKind::Sphere => sample_sphere_direction(rng, d),
    }
}

/// Uniform draw from the unit ball (sphere direction scaled by `U^(1/d)`).
pub fn sample_unit_ball<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<Vec<f64>> {
    let u = sample_sphere_direction(rng, d)?;
    let radius = rng.gen::<f64>().powf(1.0 / d as f64);
    Ok(vecops::scale(u.components(), radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_has_requested_dimension() {
        let mut rng = stream(1);
        let u = sample_gaussian_direction(&mut rng, 3).unwrap();
        assert_eq!(u.dim(), 3);
        assert_eq!(u.kind(), DirectionKind::Gaussian);
    }

    #[test]
    fn zero_dimension_is_rejected() {
        let mut rng = stream(1);
        assert_eq!(sample_gaussian_direction(&mut rng, 0), Err(Error::ZeroDimension));
        assert_eq!(sample_sphere_direction(&mut rng, 0), Err(Error::ZeroDimension));
    }

    #[test]
    fn gaussian_moments() {
        let n = 100_000;
        let d = 4;
        let mut rng = stream(7);
        let mut mean = vec![0.0; d];
        let mut sq = 0.0;
        let mut fourth = 0.0;
        for _ in 0..n {
            let u = sample_gaussian_direction(&mut rng, d).unwrap();
            for (m, c) in mean.iter_mut().zip(u.components()) {
                *m += c;
            }
            let s = u.norm_sq();
            sq += s;
            fourth += s * s;
        }
        for m in &mean {
            assert!((m / n as f64).abs() < 0.02, "component mean {}", m / n as f64);
        }
        assert!((sq / n as f64 - d as f64).abs() < 0.1);
        // E|u|^4 = d(d+2)
        let target = (d * (d + 2)) as f64;
        assert!((fourth / n as f64 - target).abs() < 0.05 * target);
    }

    #[test]
    fn sphere_draws_are_unit_and_centered() {
        let mut rng = stream(3);
        let u = sample_sphere_direction(&mut rng, 5).unwrap();
        assert!((u.norm_sq().sqrt() - 1.0).abs() < 1e-12);

        let n = 100_000;
        let d = 3;
        let mut mean = vec![0.0; d];
        let mut cov = vec![0.0; d * d];
        for _ in 0..n {
            let u = sample_sphere_direction(&mut rng, d).unwrap();
            assert!((u.norm_sq() - 1.0).abs() < 1e-12);
            let c = u.components();
            for i in 0..d {
                mean[i] += c[i];
                for j in 0..d {
                    cov[i * d + j] += c[i] * c[j];
                }
            }
        }
        for m in &mean {
            assert!((m / n as f64).abs() < 0.02);
        }
        for i in 0..d {
            for j in 0..d {
                let expected = if i == j { 1.0 / d as f64 } else { 0.0 };
                assert!((cov[i * d + j] / n as f64 - expected).abs() < 0.01);
            }
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = derive_stream(42, 3);
        let mut b = derive_stream(42, 3);
        for _ in 0..50 {
            let ua = sample_gaussian_direction(&mut a, 4).unwrap();
            let ub = sample_gaussian_direction(&mut b, 4).unwrap();
            assert_eq!(ua, ub);
        }
        let mut c = derive_stream(42, 4);
        let ua = sample_gaussian_direction(&mut a, 4).unwrap();
        let uc = sample_gaussian_direction(&mut c, 4).unwrap();
        assert_ne!(ua, uc);
    }

    #[test]
    fn new_validates_sphere_norm() {
        assert!(Direction::new(vec![1.0, 0.0], DirectionKind::Sphere).is_ok());
        assert!(matches!(
            Direction::new(vec![1.0, 1.0], DirectionKind::Sphere),
            Err(Error::NotUnitNorm { .. })
        ));
        assert!(Direction::new(vec![f64::NAN], DirectionKind::Gaussian).is_err());
    }

    #[test]
    fn unit_ball_draws_stay_inside() {
        let mut rng = stream(9);
        for _ in 0..1000 {
            let v = sample_unit_ball(&mut rng, 3).unwrap();
            assert!(vecops::norm(&v) <= 1.0);
        }
    }
}
