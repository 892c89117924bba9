//! Residual-feedback second moments along full runs against the uniform
//! bound `max{E|g_0|², (16 L0² (d+4)² + 2d V_f²/δ²) / (1 - α)}`.

use rfzo_core::feasible_sets::FeasibleSet;
use rfzo_core::optimizer::{run, EstimatorKind, OptimizerConfig};
use rfzo_core::problems::{bounded_variation_adversary, DriftingQuadratic, DriftingQuadraticConfig, OnlineProblem};
use rfzo_core::schedules::{convex_lipschitz_schedule, second_moment_bound};
use rfzo_core::smoothing::Welford;

const D: usize = 3;

fn quadratic(drift: f64, seed: u64) -> DriftingQuadratic {
    DriftingQuadratic::new(DriftingQuadraticConfig {
        dim: D,
        drift_rate: drift,
        initial_center: vec![0.5, 0.0, 0.0],
        center_bound: 1.0,
        region_radius: 2.0,
        noise_std: 0.0,
        seed,
    })
}

/// Per-step mean and standard error of `|g_t|²` across trials, plus the
/// problem's `(L0, V_f)`.
fn moments<P, F>(make: F, trials: u64, horizon: usize) -> (Vec<Welford>, f64, f64, f64, f64)
where
    P: OnlineProblem,
    F: Fn(u64) -> P,
{
    let caps = make(0).capabilities();
    let (l0, v_f) = (caps.lipschitz_l0.unwrap(), caps.variation_vf.unwrap());
    let schedule = convex_lipschitz_schedule(l0, Some(1.0), D, horizon, 0.0).unwrap();
    assert!(schedule.alpha <= 0.5);
    let mut stats = vec![Welford::default(); horizon];
    for trial in 0..trials {
        let cfg = OptimizerConfig {
            estimator: EstimatorKind::Residual,
            eta: schedule.eta,
            delta: schedule.delta,
            xi: 0.0,
            horizon,
            set: FeasibleSet::ball(vec![0.0; D], 1.0).unwrap(),
            x0: vec![-0.5, 0.5, 0.0],
            seed: 1000 + trial,
        };
        let trace = run(&mut make(trial), &cfg).unwrap();
        for (w, r) in stats.iter_mut().zip(&trace.records) {
            w.push(r.estimate_sq_norm);
        }
    }
    (stats, l0, v_f, schedule.alpha, schedule.delta)
}

fn assert_below_bound(stats: &[Welford], l0: f64, v_f: f64, alpha: f64, delta: f64) {
    let bound = second_moment_bound(stats[0].mean(), alpha, l0, v_f, delta, D);
    for (t, w) in stats.iter().enumerate() {
        assert!(
            w.mean() <= bound + 3.0 * w.std_error(),
            "t = {t}: {} > {bound}",
            w.mean()
        );
    }
}

#[test]
fn drifting_quadratic_stays_below_the_second_moment_bound() {
    let (stats, l0, v_f, alpha, delta) = moments(|s| quadratic(0.01, s), 100, 500);
    assert_below_bound(&stats, l0, v_f, alpha, delta);
}

#[test]
fn adversarial_shifts_stay_below_the_second_moment_bound() {
    let (stats, l0, v_f, alpha, delta) = moments(
        |s| bounded_variation_adversary(Box::new(quadratic(0.0, s)), 0.5),
        100,
        500,
    );
    assert!((v_f - 0.5).abs() < 1e-12);
    assert_below_bound(&stats, l0, v_f, alpha, delta);
    // The adversary's shifts dominate the base's Lipschitz term, so the
    // measured moments should be of the order of 2dV_f²/δ².
    let late = stats[400..].iter().map(Welford::mean).sum::<f64>() / 100.0;
    assert!(late > 0.1 * 2.0 * D as f64 * v_f * v_f / (delta * delta), "{late}");
}
