//! Zeroth-order gradient estimators.
//!
//! Each estimator consumes exactly the function values it is allowed per
//! time step: one for the one-point and residual-feedback forms, two for the
//! two-point forms. The residual-feedback estimators take the single value
//! `y_t = f_t(x_t + delta * u_t)` from the caller, so the caller stays in
//! charge of the query budget.

use crate::error::{check_dim, check_positive, Error, Result};
use crate::sampling::{Direction, DirectionKind};
use crate::vecops;

/// Deviation from unit norm tolerated by the sphere estimator.
const SPHERE_KIND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub vector: Vec<f64>,
    pub queries_used: u32,
    /// The function value sampled at the perturbed point this step.
    pub raw_value: f64,
}

impl GradientEstimate {
    pub fn sq_norm(&self) -> f64 {
        vecops::norm_sq(&self.vector)
    }
}

fn finite(step: usize, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteQuery { step, value })
    }
}

fn along(u: &Direction, coeff: f64) -> Vec<f64> {
    vecops::scale(u.components(), coeff)
}

/// `(u / delta) * (f(x + delta u) - f(x))`, two queries of the same function.
pub fn two_point<F>(mut query: F, x: &[f64], delta: f64, u: &Direction) -> Result<GradientEstimate>
where
    F: FnMut(&[f64]) -> f64,
{
    check_positive("delta", delta)?;
    check_dim(x.len(), u.dim())?;
    if u.kind() != DirectionKind::Gaussian {
        return Err(Error::DirectionKind {
            expected: DirectionKind::Gaussian,
            found: u.kind(),
        });
    }
    let plus = finite(0, query(&vecops::add_scaled(x, delta, u.components())))?;
    let base = finite(0, query(x))?;
    Ok(two_point_from_values(plus, base, delta, u))
}

/// `(u / delta) * f(x + delta u)`, a single query.
pub fn one_point<F>(mut query: F, x: &[f64], delta: f64, u: &Direction) -> Result<GradientEstimate>
where
    F: FnMut(&[f64]) -> f64,
{
    check_positive("delta", delta)?;
    check_dim(x.len(), u.dim())?;
    let y = finite(0, query(&vecops::add_scaled(x, delta, u.components())))?;
    Ok(one_point_from_value(y, delta, u))
}

pub(crate) fn two_point_from_values(plus: f64, base: f64, delta: f64, u: &Direction) -> GradientEstimate {
    GradientEstimate {
        vector: along(u, (plus - base) / delta),
        queries_used: 2,
        raw_value: plus,
    }
}

pub(crate) fn one_point_from_value(y: f64, delta: f64, u: &Direction) -> GradientEstimate {
    GradientEstimate {
        vector: along(u, y / delta),
        queries_used: 1,
        raw_value: y,
    }
}

/// Two-point estimate whose second value comes from the previous function,
/// `(u / 2 delta) * (f_t(x + delta u) - f_{t-1}(x - delta u))`.
///
/// Biased whenever `f_t - f_{t-1}` is correlated with `u`. Kept as a
/// simulation-only diagnostic.
pub fn naive_online_two_point(
    value_plus: f64,
    prev_value_minus: f64,
    delta: f64,
    u: &Direction,
) -> Result<GradientEstimate> {
    check_positive("delta", delta)?;
    let plus = finite(0, value_plus)?;
    let minus = finite(0, prev_value_minus)?;
    Ok(GradientEstimate {
        vector: along(u, (plus - minus) / (2.0 * delta)),
        queries_used: 2,
        raw_value: plus,
    })
}

/// Memory carried between steps by the residual-feedback estimator: the
/// previous sampled value and the direction it was sampled along.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResidualState {
    prev_value: f64,
    prev_direction: Option<Direction>,
    step_index: usize,
}

impl ResidualState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_initialized(&self) -> bool {
        self.step_index > 0
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    /// Previous sampled value; 0 before the first step.
    pub fn prev_value(&self) -> f64 {
        self.prev_value
    }

    pub fn prev_direction(&self) -> Option<&Direction> {
        self.prev_direction.as_ref()
    }

    fn residual(&self, y_t: f64, u_t: &Direction) -> Result<f64> {
        let y_t = finite(self.step_index, y_t)?;
        if let Some(prev) = &self.prev_direction {
            check_dim(prev.dim(), u_t.dim())?;
        }
        // Before the first step the baseline is 0, which makes step 0 a
        // one-point estimate.
        Ok(y_t - self.prev_value)
    }

    fn commit(&mut self, y_t: f64, u_t: &Direction) {
        self.prev_value = y_t;
        self.prev_direction = Some(u_t.clone());
        self.step_index += 1;
    }

    /// Residual feedback with Gaussian directions:
    /// `(u_t / delta) * (y_t - y_{t-1})`.
    pub fn step(&mut self, y_t: f64, u_t: &Direction, delta: f64) -> Result<GradientEstimate> {
        check_positive("delta", delta)?;
        let r = self.residual(y_t, u_t)?;
        let est = GradientEstimate {
            vector: along(u_t, r / delta),
            queries_used: 1,
            raw_value: y_t,
        };
        self.commit(y_t, u_t);
        Ok(est)
    }

    /// Residual feedback with unit-sphere directions:
    /// `(d / delta) * (y_t - y_{t-1}) * u_t`.
    pub fn step_sphere(&mut self, y_t: f64, u_t: &Direction, delta: f64, d: usize) -> Result<GradientEstimate> {
        check_positive("delta", delta)?;
        check_dim(d, u_t.dim())?;
        let norm = u_t.norm_sq().sqrt();
        if (norm - 1.0).abs() > SPHERE_KIND_TOL {
            return Err(Error::NotUnitNorm { norm });
        }
        let r = self.residual(y_t, u_t)?;
        let est = GradientEstimate {
            vector: along(u_t, d as f64 * r / delta),
            queries_used: 1,
            raw_value: y_t,
        };
        self.commit(y_t, u_t);
        Ok(est)
    }
}

/// Functional form of [`ResidualState::step`].
pub fn residual_step(
    mut state: ResidualState,
    y_t: f64,
    u_t: &Direction,
    delta: f64,
) -> Result<(GradientEstimate, ResidualState)> {
    let est = state.step(y_t, u_t, delta)?;
    Ok((est, state))
}

/// Functional form of [`ResidualState::step_sphere`].
pub fn residual_step_sphere(
    mut state: ResidualState,
    y_t: f64,
    u_t: &Direction,
    delta: f64,
    d: usize,
) -> Result<(GradientEstimate, ResidualState)> {
    let est = state.step_sphere(y_t, u_t, delta, d)?;
    Ok((est, state))
}

/// Residual feedback on noisy feedback `y_t = F_t(x_t + delta u_t; noise_t)`.
///
/// The estimator is the same as [`residual_step`]; the noise lives in the
/// problem's query.
pub fn stochastic_residual_step(
    state: ResidualState,
    y_t: f64,
    u_t: &Direction,
    delta: f64,
) -> Result<(GradientEstimate, ResidualState)> {
    residual_step(state, y_t, u_t, delta)
}
