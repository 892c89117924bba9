//! Monte-Carlo access to the smoothed function `f_delta` and the closed-form
//! gaps between `f_delta` and `f`.
//!
//! These are oracles for checking estimators: the mean of an unbiased
//! estimator must match the gradient of `f_delta`, which is only available
//! in closed form for linear and quadratic functions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::sampling::{sample_gaussian_direction, sample_unit_ball};
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `u ~ N(0, I)`
    Gaussian,
    /// `v` uniform on the unit ball
    UnitBall,
}

/// Regularity class of the function being smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionClass {
    /// Lipschitz with constant `L0`.
    C00,
    /// Gradient Lipschitz with constant `L1`.
    C11,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingSpec {
    pub delta: f64,
    pub kernel: Kernel,
    pub samples: usize,
}

impl SmoothingSpec {
    pub fn new(delta: f64, kernel: Kernel, samples: usize) -> Result<Self> {
        check_positive("delta", delta)?;
        if samples == 0 {
            return Err(Error::InvalidParameter {
                name: "samples",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self { delta, kernel, samples })
    }
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let dx = x - self.mean;
        self.mean += dx / self.n as f64;
        self.m2 += dx * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

fn kernel_draw<R: Rng + ?Sized>(rng: &mut R, kernel: Kernel, d: usize) -> Result<Vec<f64>> {
    match kernel {
        Kernel::Gaussian => Ok(sample_gaussian_direction(rng, d)?.components().to_vec()),
        Kernel::UnitBall => sample_unit_ball(rng, d),
    }
}

/// Sample mean of `f(x + delta v)` over the kernel, with its standard error.
pub fn smoothed_value_mc<F, R>(f: F, x: &[f64], spec: &SmoothingSpec, rng: &mut R) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if x.is_empty() {
        return Err(Error::ZeroDimension);
    }
    let mut acc = Welford::default();
    for i in 0..spec.samples {
        let v = kernel_draw(rng, spec.kernel, x.len())?;
        let y = f(&vecops::add_scaled(x, spec.delta, &v));
        if !y.is_finite() {
            return Err(Error::NonFiniteQuery { step: i, value: y });
        }
        acc.push(y);
    }
    Ok((acc.mean(), acc.std_error()))
}

/// Monte-Carlo estimate of the Gaussian-smoothed gradient, the mean of
/// `(u / delta) (f(x + delta u) - f(x))`, with per-component standard errors.
pub fn smoothed_gradient_mc<F, R>(
    f: F,
    x: &[f64],
    delta: f64,
    samples: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    check_positive("delta", delta)?;
    let d = x.len();
    let fx = f(x);
    let mut acc = vec![Welford::default(); d];
    for i in 0..samples {
        let u = sample_gaussian_direction(rng, d)?;
        let y = f(&vecops::add_scaled(x, delta, u.components()));
        if !y.is_finite() {
            return Err(Error::NonFiniteQuery { step: i, value: y });
        }
        let c = (y - fx) / delta;
        for (a, ui) in acc.iter_mut().zip(u.components()) {
            a.push(c * ui);
        }
    }
    Ok((
        acc.iter().map(Welford::mean).collect(),
        acc.iter().map(Welford::std_error).collect(),
    ))
}

/// Worst-case `|f_delta(x) - f(x)|` for the class and kernel.
///
/// Gaussian: `delta L0 sqrt(d)` (C00) and `delta^2 L1 d` (C11).
/// Unit ball: `delta L0` (C00) and `delta^2 L1` (C11).
pub fn smoothing_gap_bound(class: FunctionClass, lipschitz: f64, delta: f64, d: usize, kernel: Kernel) -> f64 {
    let d = d as f64;
    match (class, kernel) {
        (FunctionClass::C00, Kernel::Gaussian) => delta * lipschitz * d.sqrt(),
        (FunctionClass::C11, Kernel::Gaussian) => delta * delta * lipschitz * d,
        (FunctionClass::C00, Kernel::UnitBall) => delta * lipschitz,
        (FunctionClass::C11, Kernel::UnitBall) => delta * delta * lipschitz,
    }
}

/// `|grad f_delta - grad f| <= delta L1 (d + 3)^{3/2}` for C11 functions.
pub fn gradient_gap_bound(l1: f64, delta: f64, d: usize) -> f64 {
    delta * l1 * (d as f64 + 3.0).powf(1.5)
}

/// Gradient-Lipschitz constant `sqrt(d) L0 / delta` of the smoothed version
/// of an `L0`-Lipschitz function.
pub fn smoothed_lipschitz_constant(l0: f64, delta: f64, d: usize) -> f64 {
    (d as f64).sqrt() * l0 / delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::stream;

    #[test]
    fn gap_bound_examples() {
        let g = smoothing_gap_bound(FunctionClass::C00, 2.0, 0.1, 4, Kernel::Gaussian);
        assert!((g - 0.4).abs() < 1e-12);
        let g = smoothing_gap_bound(FunctionClass::C11, 1.0, 0.1, 4, Kernel::Gaussian);
        assert!((g - 0.04).abs() < 1e-12);
        let g = smoothing_gap_bound(FunctionClass::C00, 2.0, 0.1, 4, Kernel::UnitBall);
        assert!((g - 0.2).abs() < 1e-12);
    }

    #[test]
    fn smoothed_lipschitz_examples() {
        assert_eq!(smoothed_lipschitz_constant(1.0, 1.0, 1), 1.0);
        assert_eq!(smoothed_lipschitz_constant(2.0, 0.5, 4), 8.0);
        let a = smoothed_lipschitz_constant(1.3, 0.2, 7);
        let b = smoothed_lipschitz_constant(2.6, 0.2, 7);
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(SmoothingSpec::new(0.0, Kernel::Gaussian, 10).is_err());
        assert!(SmoothingSpec::new(0.1, Kernel::Gaussian, 0).is_err());
    }

    #[test]
    fn linear_function_is_its_own_smoothing() {
        let a = [1.0, -2.0, 0.5];
        let x = [0.3, 0.1, -1.0];
        let f = |y: &[f64]| vecops::dot(&a, y);
        for kernel in [Kernel::Gaussian, Kernel::UnitBall] {
            let spec = SmoothingSpec::new(0.5, kernel, 20_000).unwrap();
            let (est, se) = smoothed_value_mc(f, &x, &spec, &mut stream(2)).unwrap();
            assert!((est - f(&x)).abs() <= 3.0 * se, "{kernel:?}: {est} vs {}", f(&x));
        }
    }

    #[test]
    fn quadratic_gaussian_smoothing_adds_delta_sq_d() {
        let x = [1.0, -0.5];
        let delta = 0.3;
        let spec = SmoothingSpec::new(delta, Kernel::Gaussian, 50_000).unwrap();
        let (est, se) = smoothed_value_mc(vecops::norm_sq, &x, &spec, &mut stream(4)).unwrap();
        let exact = vecops::norm_sq(&x) + delta * delta * 2.0;
        assert!((est - exact).abs() <= 3.0 * se, "{est} vs {exact} (se {se})");
    }

    #[test]
    fn abs_gap_within_lipschitz_bound() {
        let spec = SmoothingSpec::new(0.1, Kernel::Gaussian, 1_000_000).unwrap();
        let (est, _) = smoothed_value_mc(|y| y[0].abs(), &[1.0], &spec, &mut stream(6)).unwrap();
        let bound = smoothing_gap_bound(FunctionClass::C00, 1.0, 0.1, 1, Kernel::Gaussian);
        assert!((est - 1.0).abs() <= bound);
    }

    #[test]
    fn std_error_shrinks_like_inverse_sqrt() {
        let x = [0.5, 0.5];
        let se_at = |n| {
            let spec = SmoothingSpec::new(1.0, Kernel::Gaussian, n).unwrap();
            smoothed_value_mc(vecops::norm_sq, &x, &spec, &mut stream(10))
                .unwrap()
                .1
        };
        let ratio = se_at(4_000) / se_at(64_000);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn non_finite_samples_are_reported() {
        let spec = SmoothingSpec::new(0.1, Kernel::Gaussian, 10).unwrap();
        let r = smoothed_value_mc(|_| f64::NAN, &[0.0], &spec, &mut stream(1));
        assert!(matches!(r, Err(Error::NonFiniteQuery { .. })));
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 0.5, 3.0];
        let mut w = Welford::default();
        xs.iter().for_each(|&x| w.push(x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((w.mean() - mean).abs() < 1e-12);
        assert!((w.variance() - var).abs() < 1e-12);
    }
}
