//! Evaluation quantities computed from finished traces: static and gradient
//! regret, across-trial estimator variance and regret growth exponents.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasible_sets::FeasibleSet;
use crate::smoothing::smoothed_gradient_mc;
use crate::vecops;

pub use crate::problems::{estimate_variation_constants, VariationEstimates};

/// Fraction of the series dropped by [`loglog_slope_default`].
pub const DEFAULT_BURN_IN_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretKind {
    Static,
    /// `Σ_t |f_t(x_t) − f_t(x*)|`, the tracking error against a fixed decision.
    Absolute,
    GradientSq,
    GradientSqSmoothed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSeries {
    pub cumulative: Vec<f64>,
    pub comparator_value: f64,
    pub kind: RegretKind,
}

impl RegretSeries {
    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.cumulative.last().copied()
    }
}

fn common_length<T>(rows: &[Vec<T>]) -> Result<usize> {
    let n = rows.first().map_or(0, Vec::len);
    for r in rows {
        if r.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: r.len(),
            });
        }
    }
    Ok(n)
}

/// Mean over trials of `Σ_{s≤t} |f_s(x_s) − f_s(x*)|`. Each trial carries its
/// own per-step comparator costs, since the fixed decision may differ.
/// `comparator_value` of the result is the mean comparator total.
pub fn absolute_regret(costs: &[Vec<f64>], comparator_costs: &[Vec<f64>]) -> Result<RegretSeries> {
    if costs.is_empty() {
        return Err(Error::InvalidParameter {
            name: "costs",
            reason: "no trials".into(),
        });
    }
    if comparator_costs.len() != costs.len() {
        return Err(Error::LengthMismatch {
            expected: costs.len(),
            got: comparator_costs.len(),
        });
    }
    let horizon = common_length(costs)?;
    if common_length(comparator_costs)? != horizon {
        return Err(Error::LengthMismatch {
            expected: horizon,
            got: comparator_costs[0].len(),
        });
    }
    let trials = costs.len() as f64;
    let mut cumulative = Vec::with_capacity(horizon);
    let mut acc = 0.0;
    for t in 0..horizon {
        acc += costs
            .iter()
            .zip(comparator_costs)
            .map(|(c, k)| (c[t] - k[t]).abs())
            .sum::<f64>()
            / trials;
        cumulative.push(acc);
    }
    let comparator_value = comparator_costs.iter().map(|k| k.iter().sum::<f64>()).sum::<f64>() / trials;
    Ok(RegretSeries {
        cumulative,
        comparator_value,
        kind: RegretKind::Absolute,
    })
}

/// Mean over trials of `Σ_{s≤t} f_s(x_s)` minus the comparator's share of
/// the horizon. `comparator` is the total `Σ_t f_t(x*)` over all `T` steps;
/// step `t` is charged `comparator · (t+1) / T`.
pub fn static_regret(costs: &[Vec<f64>], comparator: f64) -> Result<RegretSeries> {
    if costs.is_empty() {
        return Err(Error::InvalidParameter {
            name: "costs",
            reason: "no trials".into(),
        });
    }
    let horizon = common_length(costs)?;
    let trials = costs.len() as f64;
    let mut cumulative = Vec::with_capacity(horizon);
    let mut acc = 0.0;
    for t in 0..horizon {
        acc += costs.iter().map(|c| c[t]).sum::<f64>() / trials;
        cumulative.push(acc - comparator * (t + 1) as f64 / horizon as f64);
    }
    Ok(RegretSeries {
        cumulative,
        comparator_value: comparator,
        kind: RegretKind::Static,
    })
}

/// Cumulative `‖∇f_t(x_t)‖²` along one trace. The oracle receives the step
/// index and the iterate.
pub fn gradient_regret<G>(iterates: &[Vec<f64>], mut gradient: G, smoothed: bool) -> RegretSeries
where
    G: FnMut(usize, &[f64]) -> Vec<f64>,
{
    let mut acc = 0.0;
    let cumulative = iterates
        .iter()
        .enumerate()
        .map(|(t, x)| {
            acc += vecops::norm_sq(&gradient(t, x));
            acc
        })
        .collect();
    RegretSeries {
        cumulative,
        comparator_value: 0.0,
        kind: if smoothed {
            RegretKind::GradientSqSmoothed
        } else {
            RegretKind::GradientSq
        },
    }
}

/// Smoothed gradient regret with `∇f_{δ,t}` estimated by Monte Carlo.
///
/// The squared norm of a Monte-Carlo mean overshoots `‖∇f_δ‖²` by the sum of
/// its squared standard errors; that bias is subtracted at every step.
pub fn smoothed_gradient_regret<F, R>(
    iterates: &[Vec<f64>],
    value: F,
    delta: f64,
    samples: usize,
    rng: &mut R,
) -> Result<RegretSeries>
where
    F: Fn(usize, &[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut acc = 0.0;
    let mut cumulative = Vec::with_capacity(iterates.len());
    for (t, x) in iterates.iter().enumerate() {
        let (mean, se) = smoothed_gradient_mc(|p: &[f64]| value(t, p), x, delta, samples, rng)?;
        acc += vecops::norm_sq(&mean) - vecops::norm_sq(&se);
        cumulative.push(acc);
    }
    Ok(RegretSeries {
        cumulative,
        comparator_value: 0.0,
        kind: RegretKind::GradientSqSmoothed,
    })
}

/// Per-step trace of the unbiased sample covariance of the estimate vectors
/// across trials. `estimates[trial][t]` is the estimate of that trial at `t`.
pub fn estimator_variance(estimates: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
    if estimates.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "estimates",
            reason: "need at least two trials".into(),
        });
    }
    let horizon = common_length(estimates)?;
    let n = estimates.len() as f64;
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let d = estimates[0][t].len();
        let mut mean = vec![0.0; d];
        for trial in estimates {
            let g = &trial[t];
            if g.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: g.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(g) {
                *m += v / n;
            }
        }
        let ss: f64 = estimates
            .iter()
            .map(|trial| vecops::dist(&trial[t], &mean).powi(2))
            .sum();
        out.push(ss / (n - 1.0));
    }
    Ok(out)
}

/// Least-squares slope of `ln series[i]` against `ln(i+1)` over `i >= burn_in`.
pub fn loglog_slope(series: &[f64], burn_in: usize) -> Result<f64> {
    let tail = series.get(burn_in..).unwrap_or(&[]);
    if tail.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "series",
            reason: format!("need at least two points after burn-in {burn_in}"),
        });
    }
    if let Some(bad) = tail.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter {
            name: "series",
            reason: format!("log-log fit needs positive values, found {bad}"),
        });
    }
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .enumerate()
        .map(|(i, v)| (((burn_in + i + 1) as f64).ln(), v.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

pub fn loglog_slope_default(series: &[f64]) -> Result<f64> {
    loglog_slope(series, (series.len() as f64 * DEFAULT_BURN_IN_FRACTION) as usize)
}

/// Best fixed decision in hindsight for `Σ_t ½‖x − c_t‖²` over `set`: the
/// centroid of the centers, projected. Exact for balls and boxes because the
/// objective is isotropic around the centroid.
pub fn quadratic_comparator(centers: &[Vec<f64>], set: &FeasibleSet) -> Result<Vec<f64>> {
    let Some(first) = centers.first() else {
        return Err(Error::InvalidParameter {
            name: "centers",
            reason: "empty".into(),
        });
    };
    let n = centers.len() as f64;
    let mut mean = vec![0.0; first.len()];
    for c in centers {
        crate::error::check_dim(first.len(), c.len())?;
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v / n;
        }
    }
    set.project(&mean)
}

/// The candidate with the smallest total cost, as `(index, total)`.
pub fn best_candidate<F>(candidates: usize, mut total_cost: F) -> Option<(usize, f64)>
where
    F: FnMut(usize) -> f64,
{
    (0..candidates)
        .map(|i| (i, total_cost(i)))
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
}
