//! Closed-form step size / exploration radius prescriptions of the regret
//! bounds, and the contraction rate of the second-moment recursion.
//!
//! Constants are encoded exactly as printed in the bounds. A horizon below a
//! schedule's validity threshold does not fail; the schedule comes back with
//! `horizon_warning` set.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::smoothing::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremTag {
    ConvexLipschitz,
    ConvexSmooth,
    NonconvexLipschitz,
    NonconvexSmooth,
    SphereConvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eta: f64,
    pub delta: f64,
    pub xi: Option<f64>,
    /// Contraction rate of the second-moment recursion under this schedule.
    pub alpha: f64,
    /// The schedule is valid for `T > min_horizon`.
    pub min_horizon: f64,
    pub horizon: usize,
    pub theorem: TheoremTag,
    pub horizon_warning: bool,
}

impl Schedule {
    /// Kernel that the schedule's `alpha` refers to.
    pub fn kernel(&self) -> Kernel {
        match self.theorem {
            TheoremTag::SphereConvex => Kernel::UnitBall,
            _ => Kernel::Gaussian,
        }
    }
}

const TWO_SQRT_TWO: f64 = 2.0 * std::f64::consts::SQRT_2;

fn check_horizon(t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidParameter {
            name: "T",
            reason: "horizon must be at least 1".into(),
        });
    }
    Ok(t as f64)
}

fn check_dimension(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    Ok(d as f64)
}

/// Convex Lipschitz losses.
///
/// With a known radius `R >= |x_0 - x*|`: `eta = R^{3/2} / (2√2 L0 √d T^{3/4})`,
/// `delta = √R L0^{-q} T^{-1/4}`, valid for `T > L0^{2q} R^2`. Pass `q = 0` for
/// the untuned form. With `radius = None`: `eta = 1 / (2√2 L0 √d T^{3/4})`,
/// `delta = T^{-1/4}`.
pub fn convex_lipschitz_schedule(l0: f64, radius: Option<f64>, d: usize, horizon: usize, q: f64) -> Result<Schedule> {
    check_positive("L0", l0)?;
    let df = check_dimension(d)?;
    let t = check_horizon(horizon)?;
    let r = match radius {
        Some(r) => {
            check_positive("R", r)?;
            r
        }
        None => 1.0,
    };
    let q = if radius.is_some() { q } else { 0.0 };
    let eta = r.powf(1.5) / (TWO_SQRT_TWO * l0 * df.sqrt() * t.powf(0.75));
    let delta = r.sqrt() * l0.powf(-q) * t.powf(-0.25);
    let min_horizon = match radius {
        Some(r) => l0.powf(2.0 * q) * r * r,
        None => 1.0,
    };
    finish(
        l0,
        eta,
        delta,
        None,
        d,
        horizon,
        min_horizon,
        TheoremTag::ConvexLipschitz,
    )
}

/// Convex smooth losses: `eta = R^{4/3} / (2√2 L0 d^{2/3} T^{2/3})`,
/// `delta = R^{1/3} d^{-1/6} T^{-1/6}`, valid for `T > R^2`. Unknown `R`
/// substitutes `R = 1`.
pub fn convex_smooth_schedule(l0: f64, radius: Option<f64>, d: usize, horizon: usize) -> Result<Schedule> {
    check_positive("L0", l0)?;
    let df = check_dimension(d)?;
    let t = check_horizon(horizon)?;
    if let Some(r) = radius {
        check_positive("R", r)?;
    }
    let r = radius.unwrap_or(1.0);
    let eta = r.powf(4.0 / 3.0) / (TWO_SQRT_TWO * l0 * df.powf(2.0 / 3.0) * t.powf(2.0 / 3.0));
    let delta = r.powf(1.0 / 3.0) * df.powf(-1.0 / 6.0) * t.powf(-1.0 / 6.0);
    finish(l0, eta, delta, None, d, horizon, r * r, TheoremTag::ConvexSmooth)
}

/// Nonconvex Lipschitz losses with smoothing accuracy `eps_f`:
/// `eta = eps^{3/2} / (2√2 L0^2 d^{3/2} T^{1/2})`, `delta = eps / (√d L0)`,
/// valid for `T > 1 / (d eps)`.
pub fn nonconvex_lipschitz_schedule(l0: f64, eps_f: f64, d: usize, horizon: usize) -> Result<Schedule> {
    check_positive("L0", l0)?;
    check_positive("eps_f", eps_f)?;
    let df = check_dimension(d)?;
    let t = check_horizon(horizon)?;
    let eta = eps_f.powf(1.5) / (TWO_SQRT_TWO * l0 * l0 * df.powf(1.5) * t.sqrt());
    let delta = eps_f / (df.sqrt() * l0);
    finish(
        l0,
        eta,
        delta,
        None,
        d,
        horizon,
        1.0 / (df * eps_f),
        TheoremTag::NonconvexLipschitz,
    )
}

/// Nonconvex smooth losses: `eta = 1 / (2√2 L0 d^{4/3} T^{1/2})`,
/// `delta = 1 / (d^{5/6} T^{1/4})`. No horizon threshold beyond `T >= 1`.
pub fn nonconvex_smooth_schedule(l0: f64, d: usize, horizon: usize) -> Result<Schedule> {
    check_positive("L0", l0)?;
    let df = check_dimension(d)?;
    let t = check_horizon(horizon)?;
    let eta = 1.0 / (TWO_SQRT_TWO * l0 * df.powf(4.0 / 3.0) * t.sqrt());
    let delta = 1.0 / (df.powf(5.0 / 6.0) * t.powf(0.25));
    finish(l0, eta, delta, None, d, horizon, 1.0, TheoremTag::NonconvexSmooth)
}

/// Convex Lipschitz losses on a set with `r B ⊆ X ⊆ r_bar B`, unit-sphere
/// directions and shrunk-set projection:
/// `eta = r_bar^{3/2} / (2√2 L0 √d T^{3/4})`, `delta = √(r_bar d) L0^{-q} T^{-1/4}`,
/// `xi = delta / r`, valid for `T > r_bar^2 L0^{2q}`.
pub fn sphere_convex_schedule(l0: f64, r_bar: f64, r: f64, d: usize, horizon: usize, q: f64) -> Result<Schedule> {
    check_positive("L0", l0)?;
    check_positive("r_bar", r_bar)?;
    check_positive("r", r)?;
    let df = check_dimension(d)?;
    let t = check_horizon(horizon)?;
    let eta = r_bar.powf(1.5) / (TWO_SQRT_TWO * l0 * df.sqrt() * t.powf(0.75));
    let delta = (r_bar * df).sqrt() * l0.powf(-q) * t.powf(-0.25);
    let xi = delta / r;
    if xi > 1.0 {
        return Err(Error::InvalidParameter {
            name: "xi",
            reason: format!("shrink factor delta / r = {xi} exceeds 1"),
        });
    }
    let min_horizon = r_bar * r_bar * l0.powf(2.0 * q);
    finish(
        l0,
        eta,
        delta,
        Some(xi),
        d,
        horizon,
        min_horizon,
        TheoremTag::SphereConvex,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    l0: f64,
    eta: f64,
    delta: f64,
    xi: Option<f64>,
    d: usize,
    horizon: usize,
    min_horizon: f64,
    theorem: TheoremTag,
) -> Result<Schedule> {
    let kernel = if theorem == TheoremTag::SphereConvex {
        Kernel::UnitBall
    } else {
        Kernel::Gaussian
    };
    Ok(Schedule {
        eta,
        delta,
        xi,
        alpha: contraction_rate(l0, eta, delta, d, kernel),
        min_horizon,
        horizon,
        theorem,
        horizon_warning: (horizon as f64) <= min_horizon,
    })
}

/// Contraction rate `4 d L0^2 eta^2 / delta^2` (Gaussian) or
/// `4 d^2 L0^2 eta^2 / delta^2` (sphere).
pub fn contraction_rate(l0: f64, eta: f64, delta: f64, d: usize, kernel: Kernel) -> f64 {
    let d = d as f64;
    let dim_factor = match kernel {
        Kernel::Gaussian => d,
        Kernel::UnitBall => d * d,
    };
    4.0 * dim_factor * l0 * l0 * eta * eta / (delta * delta)
}

/// Uniform-in-time bound on the residual estimator's second moment for a
/// Gaussian run with contraction rate `alpha < 1`:
/// `max{E|g_0|², (16 L0² (d+4)² + 2 d V_f² / δ²) / (1 - alpha)}`.
pub fn second_moment_bound(g0_sq: f64, alpha: f64, l0: f64, v_f: f64, delta: f64, d: usize) -> f64 {
    let d = d as f64;
    let drive = 16.0 * l0 * l0 * (d + 4.0).powi(2) + 2.0 * d * v_f * v_f / (delta * delta);
    g0_sq.max(drive / (1.0 - alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn convex_lipschitz_example() {
        let s = convex_lipschitz_schedule(1.0, Some(1.0), 1, 16, 0.0).unwrap();
        assert!(close(s.eta, 1.0 / (16.0 * 2f64.sqrt())));
        assert!((s.eta - 0.044194).abs() < 1e-6);
        assert!(close(s.delta, 0.5));
        assert!(close(s.alpha, 1.0 / 32.0));
        assert!(!s.horizon_warning);
    }

    #[test]
    fn convex_lipschitz_threshold_and_scaling() {
        let s = convex_lipschitz_schedule(1.0, Some(1.0), 1, 1, 0.0).unwrap();
        assert!(s.horizon_warning);
        let a = convex_lipschitz_schedule(1.7, Some(2.0), 3, 100, 0.0).unwrap();
        let b = convex_lipschitz_schedule(1.7, Some(2.0), 3, 200, 0.0).unwrap();
        assert!(close(b.eta / a.eta, 2f64.powf(-0.75)));
        assert!(close(b.delta / a.delta, 2f64.powf(-0.25)));
    }

    #[test]
    fn convex_lipschitz_variants() {
        let s = convex_lipschitz_schedule(2.0, Some(3.0), 4, 1000, 1.0).unwrap();
        assert!(close(s.delta, 3f64.sqrt() / 2.0 * 1000f64.powf(-0.25)));
        assert!(close(s.min_horizon, 4.0 * 9.0));
        assert!(close(s.alpha, 9.0 * 4.0 / 2000.0));

        let u = convex_lipschitz_schedule(2.0, None, 4, 81, 0.0).unwrap();
        assert!(close(u.eta, 1.0 / (TWO_SQRT_TWO * 2.0 * 2.0 * 27.0)));
        assert!(close(u.delta, 1.0 / 3.0));
        assert!(close(u.alpha, 1.0 / 162.0));
    }

    #[test]
    fn convex_smooth_example() {
        let s = convex_smooth_schedule(1.0, Some(1.0), 1, 8).unwrap();
        assert!((s.eta - 0.0883883).abs() < 1e-7);
        assert!((s.delta - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(close(s.alpha, 1.0 / 16.0));
        for t in 1..20 {
            let s = convex_smooth_schedule(1.3, Some(2.0), 3, t).unwrap();
            assert!(close(s.alpha, 4.0 / (2.0 * t as f64)));
            assert_eq!(s.alpha <= 0.5, t as f64 >= 4.0);
        }
        let unknown = convex_smooth_schedule(1.0, None, 8, 27).unwrap();
        assert!(close(unknown.eta, 1.0 / (TWO_SQRT_TWO * 4.0 * 9.0)));
    }

    #[test]
    fn nonconvex_lipschitz_example() {
        let s = nonconvex_lipschitz_schedule(1.0, 1.0, 1, 4).unwrap();
        assert!((s.eta - 0.17678).abs() < 1e-5);
        assert!(close(s.delta, 1.0));
        assert!(close(s.alpha, 1.0 / 8.0));
        let (l0, eps, d) = (1.7, 0.3, 6);
        let s = nonconvex_lipschitz_schedule(l0, eps, d, 500).unwrap();
        assert!(close(s.delta * (d as f64).sqrt() * l0, eps));
        let s4 = nonconvex_lipschitz_schedule(l0, 4.0 * eps, d, 500).unwrap();
        assert!(close(s4.eta / s.eta, 8.0));
    }

    #[test]
    fn nonconvex_smooth_example() {
        let s = nonconvex_smooth_schedule(1.0, 1, 4).unwrap();
        assert!((s.eta - 0.17678).abs() < 1e-5);
        assert!((s.delta - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(close(s.alpha, 0.25));
        for t in [1, 2, 10, 1000] {
            let s = nonconvex_smooth_schedule(2.5, 7, t).unwrap();
            assert!(s.alpha <= 0.5 + 1e-15);
            let ident = s.delta * s.delta * 7f64.powf(5.0 / 3.0) * (t as f64).sqrt();
            assert!(close(ident, 1.0));
        }
    }

    #[test]
    fn sphere_convex_example() {
        let s = sphere_convex_schedule(1.0, 1.0, 1.0, 1, 16, 0.0).unwrap();
        assert!(close(s.eta, 1.0 / (16.0 * 2f64.sqrt())));
        assert!(close(s.delta, 0.5));
        assert_eq!(s.xi, Some(0.5));
        assert!(close(s.alpha, 1.0 / 32.0));
        assert_eq!(s.kernel(), Kernel::UnitBall);

        // r shrinking to delta pushes xi to 1, below it is infeasible.
        let s = sphere_convex_schedule(1.0, 1.0, 0.5, 1, 16, 0.0).unwrap();
        assert!(close(s.xi.unwrap(), 1.0));
        assert!(sphere_convex_schedule(1.0, 1.0, 0.4, 1, 16, 0.0).is_err());
    }

    #[test]
    fn contraction_rate_examples() {
        assert!(close(contraction_rate(1.0, 0.5, 1.0, 1, Kernel::Gaussian), 1.0));
        assert_eq!(contraction_rate(3.0, 0.0, 0.2, 5, Kernel::Gaussian), 0.0);
        let g = contraction_rate(1.2, 0.1, 0.3, 6, Kernel::Gaussian);
        let s = contraction_rate(1.2, 0.1, 0.3, 6, Kernel::UnitBall);
        assert!(close(s / g, 6.0));
    }

    #[test]
    fn invalid_inputs() {
        assert!(convex_lipschitz_schedule(0.0, Some(1.0), 1, 10, 0.0).is_err());
        assert!(convex_lipschitz_schedule(1.0, Some(-1.0), 1, 10, 0.0).is_err());
        assert!(convex_lipschitz_schedule(1.0, Some(1.0), 0, 10, 0.0).is_err());
        assert!(nonconvex_smooth_schedule(1.0, 1, 0).is_err());
    }

    #[test]
    fn second_moment_bound_takes_the_larger_term() {
        // d = 1, L0 = 1, V_f = 0: drive is 16 * 25 = 400.
        assert!(close(second_moment_bound(0.0, 0.5, 1.0, 0.0, 1.0, 1), 800.0));
        assert_eq!(second_moment_bound(1e6, 0.5, 1.0, 0.0, 1.0, 1), 1e6);
        assert!(close(second_moment_bound(0.0, 0.0, 0.0, 1.0, 0.5, 2), 16.0));
    }
}
