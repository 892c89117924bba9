use rand::Rng;

use super::OnlineProblem;
use crate::error::{check_positive, Error, Result};
use crate::sampling::sample_gaussian_direction;
use crate::smoothing::Welford;
use crate::vecops;

/// Plug-in estimates of how fast a function sequence moves along a run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VariationEstimates {
    /// Mean of `(f_t(y_{t-1}) - f_{t-1}(y_{t-1}))²` over the queried points.
    pub v_f_sq: f64,
    pub v_f_sq_std_error: f64,
    /// `Σ_t (f_{δ,t}(x_t) - f_{δ,t-1}(x_t))`, smoothing by Monte Carlo.
    pub w_t: f64,
    /// `Σ_t (f_t(y_{t-1}) - f_{t-1}(y_{t-1}))²`.
    pub w_tilde_t: f64,
    pub steps: usize,
}

/// Replays a run's iterates `x_t` and query points `y_t` against `problem`,
/// which must be a fresh instance (at `t = 0`) of the sequence the run saw
/// and expose noise-free values.
pub fn estimate_variation_constants<R: Rng + ?Sized>(
    problem: &mut dyn OnlineProblem,
    iterates: &[Vec<f64>],
    query_points: &[Vec<f64>],
    delta: f64,
    smoothing_samples: usize,
    rng: &mut R,
) -> Result<VariationEstimates> {
    check_positive("delta", delta)?;
    if iterates.len() != query_points.len() {
        return Err(Error::LengthMismatch {
            expected: iterates.len(),
            got: query_points.len(),
        });
    }
    if !problem.capabilities().exposes_true_cost {
        return Err(Error::QueryContract(
            "variation estimates need noise-free function values".into(),
        ));
    }
    let value = |p: &dyn OnlineProblem, x: &[f64]| p.true_cost(x).expect("exposes true cost");
    let d = problem.dimension();
    let mut sq = Welford::default();
    let mut w_t = 0.0;
    for t in 1..iterates.len() {
        let y_prev = &query_points[t - 1];
        let x_t = &iterates[t];
        let before = value(problem, y_prev);
        let perturbed = (0..smoothing_samples)
            .map(|_| {
                let u = sample_gaussian_direction(rng, d)?;
                Ok(vecops::add_scaled(x_t, delta, u.components()))
            })
            .collect::<Result<Vec<_>>>()?;
        let smooth_before: Vec<f64> = perturbed.iter().map(|p| value(problem, p)).collect();
        problem.advance();
        let after = value(problem, y_prev);
        sq.push((after - before).powi(2));
        if smoothing_samples > 0 {
            let diff: f64 = perturbed
                .iter()
                .zip(&smooth_before)
                .map(|(p, b)| value(problem, p) - b)
                .sum();
            w_t += diff / smoothing_samples as f64;
        }
    }
    let steps = sq.count();
    Ok(VariationEstimates {
        v_f_sq: sq.mean(),
        v_f_sq_std_error: sq.std_error(),
        w_t,
        w_tilde_t: sq.mean() * steps as f64,
        steps,
    })
}
