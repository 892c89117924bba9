//! Monte-Carlo checks of the estimators' first and second moments.

use rand::Rng;
use rand_distr::StandardNormal;
use rfzo_core::estimators::{naive_online_two_point, one_point, ResidualState};
use rfzo_core::sampling::{sample_gaussian_direction, sample_sphere_direction, stream, Stream};
use rfzo_core::smoothing::Welford;
use rfzo_core::vecops;

struct Quadratic {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Quadratic {
    fn random(d: usize, rng: &mut Stream) -> Self {
        let m: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let a = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..d).map(|k| m[k][i] * m[k][j]).sum::<f64>() / d as f64)
                    .collect()
            })
            .collect();
        let b = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        Self { a, b }
    }

    fn value(&self, x: &[f64]) -> f64 {
        let ax = self.grad_part(x);
        0.5 * vecops::dot(x, &ax) + vecops::dot(&self.b, x)
    }

    fn grad_part(&self, x: &[f64]) -> Vec<f64> {
        self.a.iter().map(|row| vecops::dot(row, x)).collect()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vecops::add_scaled(&self.grad_part(x), 1.0, &self.b)
    }
}

fn within(stats: &[Welford], target: &[f64], k: f64) -> Vec<f64> {
    stats
        .iter()
        .zip(target)
        .map(|(w, t)| (w.mean() - t).abs() / w.std_error())
        .filter(|z| *z > k)
        .collect()
}

#[test]
fn residual_feedback_is_unbiased_on_quadratics() {
    let d = 5;
    let mut rng = stream(2024);
    let f = Quadratic::random(d, &mut rng);
    let x_prev: Vec<f64> = (0..d).map(|i| 0.3 * i as f64 - 0.5).collect();
    let x_t: Vec<f64> = (0..d).map(|i| 1.0 - 0.2 * i as f64).collect();
    let delta = 0.1;
    let mut stats = vec![Welford::default(); d];
    for _ in 0..100_000 {
        let u_prev = sample_gaussian_direction(&mut rng, d).unwrap();
        let u_t = sample_gaussian_direction(&mut rng, d).unwrap();
        let mut state = ResidualState::new();
        state
            .step(
                f.value(&vecops::add_scaled(&x_prev, delta, u_prev.components())),
                &u_prev,
                delta,
            )
            .unwrap();
        let g = state
            .step(f.value(&vecops::add_scaled(&x_t, delta, u_t.components())), &u_t, delta)
            .unwrap();
        for (w, v) in stats.iter_mut().zip(&g.vector) {
            w.push(*v);
        }
    }
    let outliers = within(&stats, &f.gradient(&x_t), 3.0);
    assert!(outliers.is_empty(), "z-scores above 3: {outliers:?}");
}

#[test]
fn sphere_residual_is_unbiased_on_quadratics() {
    // Ball smoothing adds a constant to a quadratic, so ∇f̂_δ = ∇f.
    let d = 4;
    let mut rng = stream(77);
    let f = Quadratic::random(d, &mut rng);
    let x_prev = vec![0.2; d];
    let x_t = vec![-0.4, 0.1, 0.6, 0.0];
    let delta = 0.2;
    let mut stats = vec![Welford::default(); d];
    for _ in 0..100_000 {
        let u_prev = sample_sphere_direction(&mut rng, d).unwrap();
        let u_t = sample_sphere_direction(&mut rng, d).unwrap();
        let mut state = ResidualState::new();
        state
            .step_sphere(
                f.value(&vecops::add_scaled(&x_prev, delta, u_prev.components())),
                &u_prev,
                delta,
                d,
            )
            .unwrap();
        let g = state
            .step_sphere(
                f.value(&vecops::add_scaled(&x_t, delta, u_t.components())),
                &u_t,
                delta,
                d,
            )
            .unwrap();
        for (w, v) in stats.iter_mut().zip(&g.vector) {
            w.push(*v);
        }
    }
    let outliers = within(&stats, &f.gradient(&x_t), 3.0);
    assert!(outliers.is_empty(), "z-scores above 3: {outliers:?}");
}

#[test]
fn stochastic_feedback_stays_unbiased() {
    let d = 3;
    let mut rng = stream(5);
    let f = Quadratic::random(d, &mut rng);
    let x = vec![0.5, -1.0, 0.25];
    let delta = 0.1;
    let mut stats = vec![Welford::default(); d];
    for _ in 0..100_000 {
        let mut state = ResidualState::new();
        for _ in 0..2 {
            let u = sample_gaussian_direction(&mut rng, d).unwrap();
            let noise: f64 = 0.5 * rng.sample::<f64, _>(StandardNormal);
            let y = f.value(&vecops::add_scaled(&x, delta, u.components())) + noise;
            let g = state.step(y, &u, delta).unwrap();
            if state.step_index() == 2 {
                for (w, v) in stats.iter_mut().zip(&g.vector) {
                    w.push(*v);
                }
            }
        }
    }
    let outliers = within(&stats, &f.gradient(&x), 3.0);
    assert!(outliers.is_empty(), "z-scores above 3: {outliers:?}");
}

#[test]
fn naive_two_point_is_biased_by_point_dependent_drift() {
    // f_t = f_{t-1} + cᵀx: the naive estimator picks up c/2, residual
    // feedback does not.
    let d = 3;
    let mut rng = stream(9);
    let f = Quadratic::random(d, &mut rng);
    let c = vec![1.0, -2.0, 0.5];
    let f_t = |x: &[f64]| f.value(x) + vecops::dot(&c, x);
    let x = vec![0.1, 0.2, 0.3];
    let delta = 0.1;
    let mut naive = vec![Welford::default(); d];
    let mut residual = vec![Welford::default(); d];
    for _ in 0..100_000 {
        let u_prev = sample_gaussian_direction(&mut rng, d).unwrap();
        let u = sample_gaussian_direction(&mut rng, d).unwrap();
        let plus = f_t(&vecops::add_scaled(&x, delta, u.components()));
        let minus = f.value(&vecops::add_scaled(&x, -delta, u.components()));
        let g = naive_online_two_point(plus, minus, delta, &u).unwrap();
        for (w, v) in naive.iter_mut().zip(&g.vector) {
            w.push(*v);
        }
        let mut state = ResidualState::new();
        state
            .step(
                f.value(&vecops::add_scaled(&x, delta, u_prev.components())),
                &u_prev,
                delta,
            )
            .unwrap();
        let g = state.step(plus, &u, delta).unwrap();
        for (w, v) in residual.iter_mut().zip(&g.vector) {
            w.push(*v);
        }
    }
    let target = vecops::add_scaled(&f.gradient(&x), 1.0, &c);
    assert!(
        !within(&naive, &target, 5.0).is_empty(),
        "naive estimator looked unbiased"
    );
    assert!(within(&residual, &target, 3.0).is_empty());
    // The bias itself is c/2.
    let shifted = vecops::add_scaled(&target, -0.5, &c);
    assert!(within(&naive, &shifted, 4.0).is_empty());
}

#[test]
fn residual_second_moment_is_far_below_one_point_under_large_offsets() {
    // f_t(x) = ½|x|² + b_t with |b_t| ≈ 100 and a unit random walk on b_t.
    let d = 4;
    let delta = 0.1;
    let x = vec![0.5; d];
    let mut rng = stream(31);
    let mut dirs = stream(32);
    let mut b = 100.0;
    let mut state = ResidualState::new();
    let (mut res, mut one) = (Welford::default(), Welford::default());
    for t in 0..20_000 {
        let u = sample_gaussian_direction(&mut dirs, d).unwrap();
        let y = 0.5 * vecops::norm_sq(&vecops::add_scaled(&x, delta, u.components())) + b;
        let g_res = state.step(y, &u, delta).unwrap();
        let g_one = one_point(|_| y, &x, delta, &u).unwrap();
        if t > 0 {
            res.push(g_res.sq_norm());
            one.push(g_one.sq_norm());
        }
        b += rng.sample::<f64, _>(StandardNormal);
    }
    assert!(res.mean() <= one.mean() / 10.0, "{} vs {}", res.mean(), one.mean());
}

#[test]
fn constant_function_one_point_variance_matches_brute_force() {
    // Var of (c/δ)u is c²d/δ² in total; compare the across-trial estimator
    // against a direct sample of the same quantity.
    let (d, c, delta) = (3, 2.0, 0.5);
    let mut rng = stream(4);
    let trials: Vec<Vec<Vec<f64>>> = (0..2000)
        .map(|_| {
            let u = sample_gaussian_direction(&mut rng, d).unwrap();
            vec![one_point(|_| c, &[0.0; 3], delta, &u).unwrap().vector]
        })
        .collect();
    let var = rfzo_core::metrics::estimator_variance(&trials).unwrap()[0];
    let mut brute = Welford::default();
    let mut other = stream(5);
    for _ in 0..100_000 {
        let u = sample_gaussian_direction(&mut other, d).unwrap();
        brute.push(vecops::norm_sq(&vecops::scale(u.components(), c / delta)));
    }
    assert!(
        (var - brute.mean()).abs() < 0.1 * brute.mean(),
        "{var} vs {}",
        brute.mean()
    );
}
