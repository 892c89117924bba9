//! Analytically tractable sequences and wrappers that add nonstationarity.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Capabilities, OnlineProblem};
use crate::sampling::{purpose_stream, sample_sphere_direction, Stream};
use crate::vecops;

const DRIFT_STREAM: u64 = 0x64726966;

/// `f_t(x) = c` for all `t`.
#[derive(Debug, Clone)]
pub struct ConstantProblem {
    dim: usize,
    value: f64,
    t: usize,
}

impl ConstantProblem {
    pub fn new(dim: usize, value: f64) -> Self {
        Self { dim, value, t: 0 }
    }
}

impl OnlineProblem for ConstantProblem {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            exposes_true_cost: true,
            exposes_gradient: true,
            lipschitz_l0: Some(0.0),
            smooth_l1: Some(0.0),
            variation_vf: Some(0.0),
            ..Capabilities::default()
        }
    }

    fn time(&self) -> usize {
        self.t
    }

    fn query(&mut self, _x: &[f64], _noise: &mut Stream) -> f64 {
        self.value
    }

    fn advance(&mut self) {
        self.t += 1;
    }

    fn true_cost(&self, _x: &[f64]) -> Option<f64> {
        Some(self.value)
    }

    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftingQuadraticConfig {
    pub dim: usize,
    /// Length of each center step.
    pub drift_rate: f64,
    pub initial_center: Vec<f64>,
    /// Centers are kept in the ball of this radius.
    pub center_bound: f64,
    /// Radius of the region on which `L0` and `V_f` are reported.
    pub region_radius: f64,
    /// Standard deviation of additive query noise.
    #[serde(default)]
    pub noise_std: f64,
    pub seed: u64,
}

/// `f_t(x) = ½|x - c_t|²` with `c_{t+1} = c_t + drift_rate * ζ_t`, `ζ_t`
/// uniform on the unit sphere, and `c_t` held inside a ball of radius
/// `center_bound`.
#[derive(Debug, Clone)]
pub struct DriftingQuadratic {
    config: DriftingQuadraticConfig,
    center: Vec<f64>,
    rng: Stream,
    t: usize,
}

impl DriftingQuadratic {
    pub fn new(config: DriftingQuadraticConfig) -> Self {
        assert_eq!(config.initial_center.len(), config.dim, "center dimension");
        Self {
            center: config.initial_center.clone(),
            rng: purpose_stream(config.seed, DRIFT_STREAM),
            config,
            t: 0,
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn config(&self) -> &DriftingQuadraticConfig {
        &self.config
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * vecops::dist(x, &self.center).powi(2)
    }

    /// `E[(f_{t+1}(y) - f_t(y))^2] = ρ²|y - c_t|²/d + ρ⁴/4` for one unconfined
    /// drift step from the current center.
    pub fn expected_sq_variation(&self, y: &[f64]) -> f64 {
        let rho = self.config.drift_rate;
        let d = self.config.dim as f64;
        rho * rho * vecops::dist(y, &self.center).powi(2) / d + rho.powi(4) / 4.0
    }
}

/// Drifting quadratic with default region sizes around the initial center.
pub fn drifting_quadratic(dim: usize, drift_rate: f64, x_star_0: Vec<f64>, seed: u64) -> DriftingQuadratic {
    let center_bound = vecops::norm(&x_star_0) + 1.0;
    DriftingQuadratic::new(DriftingQuadraticConfig {
        dim,
        drift_rate,
        initial_center: x_star_0,
        center_bound,
        region_radius: center_bound + 1.0,
        noise_std: 0.0,
        seed,
    })
}

impl OnlineProblem for DriftingQuadratic {
    fn dimension(&self) -> usize {
        self.config.dim
    }

    fn capabilities(&self) -> Capabilities {
        let reach = self.config.region_radius + self.config.center_bound;
        let rho = self.config.drift_rate;
        Capabilities {
            supports_double_query: true,
            exposes_true_cost: true,
            exposes_gradient: true,
            exposes_optimum: true,
            lipschitz_l0: Some(reach),
            smooth_l1: Some(1.0),
            variation_vf: Some(rho * reach + 0.5 * rho * rho),
        }
    }

    fn time(&self) -> usize {
        self.t
    }

    fn query(&mut self, x: &[f64], noise: &mut Stream) -> f64 {
        let mut y = self.value(x);
        if self.config.noise_std > 0.0 {
            y += self.config.noise_std * noise.sample::<f64, _>(StandardNormal);
        }
        y
    }

    fn advance(&mut self) {
        self.t += 1;
        if self.config.drift_rate == 0.0 {
            return;
        }
        let zeta = sample_sphere_direction(&mut self.rng, self.config.dim).expect("dim >= 1");
        let moved = vecops::add_scaled(&self.center, self.config.drift_rate, zeta.components());
        let norm = vecops::norm(&moved);
        self.center = if norm > self.config.center_bound {
            vecops::scale(&moved, self.config.center_bound / norm)
        } else {
            moved
        };
    }

    fn true_cost(&self, x: &[f64]) -> Option<f64> {
        Some(self.value(x))
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.iter().zip(&self.center).map(|(a, c)| a - c).collect())
    }

    fn optimum(&self) -> Option<Vec<f64>> {
        Some(self.center.clone())
    }
}

/// `f_t = base_t + b_t` where `b_t` is a Gaussian random walk. Gradients are
/// the base's; `|f_t|` grows without bound while the per-step variation has
/// second moment `noise_std²`.
pub struct RandomWalkOffset {
    base: Box<dyn OnlineProblem>,
    noise_std: f64,
    offset: f64,
    rng: Stream,
}

impl RandomWalkOffset {
    pub fn new(base: Box<dyn OnlineProblem>, noise_std: f64, seed: u64) -> Self {
        Self {
            base,
            noise_std,
            offset: 0.0,
            rng: purpose_stream(seed, DRIFT_STREAM + 1),
        }
    }

    /// Starts the walk at `b_0` instead of 0.
    pub fn with_initial_offset(mut self, b0: f64) -> Self {
        self.offset = b0;
        self
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

pub fn random_walk_offset(base: Box<dyn OnlineProblem>, noise_std: f64, seed: u64) -> RandomWalkOffset {
    RandomWalkOffset::new(base, noise_std, seed)
}

impl OnlineProblem for RandomWalkOffset {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn capabilities(&self) -> Capabilities {
        let base = self.base.capabilities();
        Capabilities {
            variation_vf: base
                .variation_vf
                .map(|v| (v * v + self.noise_std * self.noise_std).sqrt()),
            ..base
        }
    }

    fn time(&self) -> usize {
        self.base.time()
    }

    fn query(&mut self, x: &[f64], noise: &mut Stream) -> f64 {
        self.base.query(x, noise) + self.offset
    }

    fn advance(&mut self) {
        self.base.advance();
        if self.noise_std > 0.0 {
            self.offset += self.noise_std * self.rng.sample::<f64, _>(StandardNormal);
        }
    }

    fn true_cost(&self, x: &[f64]) -> Option<f64> {
        self.base.true_cost(x).map(|v| v + self.offset)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.base.gradient(x)
    }

    fn optimum(&self) -> Option<Vec<f64>> {
        self.base.optimum()
    }
}

/// An adversary that, after each step, shifts the whole function by
/// `±V_f`, choosing the sign that continues the learner's last observed
/// residual `y_t - y_{t-1}`. The shift is constant in `x`, so on top of the
/// base's own drift the variation at any point is exactly `V_f`.
pub struct BoundedVariationAdversary {
    base: Box<dyn OnlineProblem>,
    v_f: f64,
    offset: f64,
    prev_observed: Option<f64>,
    last_observed: Option<f64>,
    queried_this_step: bool,
}

impl BoundedVariationAdversary {
    pub fn new(base: Box<dyn OnlineProblem>, v_f: f64) -> Self {
        Self {
            base,
            v_f,
            offset: 0.0,
            prev_observed: None,
            last_observed: None,
            queried_this_step: false,
        }
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

pub fn bounded_variation_adversary(base: Box<dyn OnlineProblem>, v_f: f64) -> BoundedVariationAdversary {
    BoundedVariationAdversary::new(base, v_f)
}

impl OnlineProblem for BoundedVariationAdversary {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn capabilities(&self) -> Capabilities {
        let base = self.base.capabilities();
        Capabilities {
            variation_vf: base.variation_vf.map(|v| v + self.v_f),
            ..base
        }
    }

    fn time(&self) -> usize {
        self.base.time()
    }

    fn query(&mut self, x: &[f64], noise: &mut Stream) -> f64 {
        let y = self.base.query(x, noise) + self.offset;
        // Only the first query of a step is the learner's feedback.
        if !self.queried_this_step {
            self.prev_observed = self.last_observed;
            self.last_observed = Some(y);
            self.queried_this_step = true;
        }
        y
    }

    fn advance(&mut self) {
        self.base.advance();
        let sign = match (self.prev_observed, self.last_observed) {
            (Some(prev), Some(last)) if last < prev => -1.0,
            _ => 1.0,
        };
        self.offset += sign * self.v_f;
        self.queried_this_step = false;
    }

    fn true_cost(&self, x: &[f64]) -> Option<f64> {
        self.base.true_cost(x).map(|v| v + self.offset)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.base.gradient(x)
    }

    fn optimum(&self) -> Option<Vec<f64>> {
        self.base.optimum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::stream;

    fn bowl(dim: usize, drift: f64, seed: u64) -> DriftingQuadratic {
        drifting_quadratic(dim, drift, vec![0.5; dim], seed)
    }

    #[test]
    fn stationary_bowl_keeps_its_optimum() {
        let mut p = bowl(3, 0.0, 1);
        let c0 = p.optimum().unwrap();
        for _ in 0..100 {
            p.advance();
        }
        assert_eq!(p.optimum().unwrap(), c0);
        assert_eq!(p.time(), 100);
    }

    #[test]
    fn value_at_center_is_zero() {
        let mut p = bowl(4, 0.1, 2);
        let mut noise = stream(0);
        for _ in 0..20 {
            let c = p.optimum().unwrap();
            assert_eq!(p.query(&c, &mut noise), 0.0);
            p.advance();
        }
    }

    #[test]
    fn centers_move_by_at_most_drift_rate_and_stay_bounded() {
        let mut p = bowl(2, 0.3, 3);
        let bound = p.config().center_bound;
        for _ in 0..500 {
            let before = p.optimum().unwrap();
            p.advance();
            let after = p.optimum().unwrap();
            assert!(vecops::dist(&before, &after) <= 0.3 + 1e-12);
            assert!(vecops::norm(&after) <= bound + 1e-12);
        }
    }

    #[test]
    fn variation_bound_holds_on_region() {
        let mut p = bowl(3, 0.05, 4);
        let vf = p.capabilities().variation_vf.unwrap();
        let r = p.config().region_radius;
        let mut rng = stream(9);
        for _ in 0..300 {
            let y = vecops::scale(
                sample_sphere_direction(&mut rng, 3).unwrap().components(),
                r * rng.gen::<f64>(),
            );
            let before = p.true_cost(&y).unwrap();
            p.advance();
            let after = p.true_cost(&y).unwrap();
            assert!((after - before).abs() <= vf + 1e-12);
        }
    }

    #[test]
    fn random_walk_offset_examples() {
        let base = || Box::new(bowl(2, 0.0, 5)) as Box<dyn OnlineProblem>;
        let mut still = random_walk_offset(base(), 0.0, 1);
        let mut plain = bowl(2, 0.0, 5);
        let mut noise = stream(0);
        let x = [0.2, -0.7];
        for _ in 0..10 {
            assert_eq!(still.query(&x, &mut noise), plain.query(&x, &mut noise));
            still.advance();
            plain.advance();
        }

        let mut walk = random_walk_offset(base(), 1.0, 2);
        for _ in 0..10 {
            assert_eq!(walk.gradient(&x), plain.gradient(&x));
            walk.advance();
            plain.advance();
        }
    }

    #[test]
    fn random_walk_wanders_far() {
        let mut far = 0;
        for seed in 0..20 {
            let mut walk = random_walk_offset(Box::new(ConstantProblem::new(1, 0.0)), 1.0, seed);
            let mut max_abs: f64 = 0.0;
            for _ in 0..10_000 {
                walk.advance();
                max_abs = max_abs.max(walk.offset().abs());
            }
            if max_abs > 10.0 {
                far += 1;
            }
        }
        assert!(far > 10, "only {far} of 20 walks exceeded 10");
    }

    #[test]
    fn adversary_variation_is_bounded() {
        let mut plain = bounded_variation_adversary(Box::new(bowl(2, 0.0, 6)), 0.0);
        let mut noise = stream(0);
        for _ in 0..5 {
            plain.query(&[0.1, 0.1], &mut noise);
            plain.advance();
        }
        assert_eq!(plain.offset(), 0.0);

        let vf = 0.25;
        let mut adv = bounded_variation_adversary(Box::new(bowl(2, 0.0, 6)), vf);
        let mut rng = stream(1);
        for _ in 0..200 {
            let y: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
            let before = adv.query(&y, &mut noise);
            adv.advance();
            let after = adv.true_cost(&y).unwrap();
            assert!((after - before).abs() <= vf + 1e-12);
        }
    }

    #[test]
    fn adversary_follows_last_residual_sign() {
        // base f(x) = ½(x - 0.5)², stationary
        let mut adv = bounded_variation_adversary(Box::new(bowl(1, 0.0, 7)), 1.0);
        let mut noise = stream(0);
        assert_eq!(adv.query(&[2.0], &mut noise), 1.125);
        adv.advance();
        assert_eq!(adv.offset(), 1.0);
        // y_1 = 0 + 1 < y_0: the shift turns downward
        assert_eq!(adv.query(&[0.5], &mut noise), 1.0);
        adv.query(&[10.0], &mut noise); // only the first query of a step counts
        adv.advance();
        assert_eq!(adv.offset(), 0.0);
        // y_2 = 1.125 > y_1: back up
        adv.query(&[2.0], &mut noise);
        adv.advance();
        assert_eq!(adv.offset(), 1.0);
    }
}
