//! Linear-quadratic control with drifting dynamics.
//!
//! Episode `t` evaluates a static gain `K` (row-major `n_u × n_x`) by rolling
//! out `x_{k+1} = A_t x_k + B_t u_k + w_k`, `u_k = K x_k` for `H` steps and
//! returning the discounted quadratic cost. Between episodes every entry of
//! `A` and `B` moves by `drift_scale * U[0, 1]`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Capabilities, OnlineProblem};
use crate::sampling::{purpose_stream, Stream};

/// State norm beyond which a rollout is cut short and counted as clipped.
const BLOWUP_NORM: f64 = 1e9;

const DRIFT_STREAM: u64 = 0x6c7172;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrConfig {
    pub n_x: usize,
    pub n_u: usize,
    pub gamma: f64,
    pub horizon: usize,
    pub drift_scale: f64,
    /// Std of the Gaussian entries of `A_0` and `B_0`.
    pub init_std: f64,
    /// Std of the process noise `w_k`.
    pub noise_std: f64,
    /// Mean initial state; all ones when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub x0_std: f64,
    pub q_weight: f64,
    pub r_weight: f64,
    /// Allow two rollouts per episode under common noise.
    pub simulation_mode: bool,
    pub seed: u64,
}

impl LqrConfig {
    /// Full-size environment: `n_x = n_u = 6`, `γ = 0.5`, `H = 50`.
    pub fn paper(seed: u64) -> Self {
        Self {
            n_x: 6,
            n_u: 6,
            gamma: 0.5,
            horizon: 50,
            drift_scale: 0.01,
            init_std: 0.1,
            noise_std: 0.01,
            x0: None,
            x0_std: 0.0,
            q_weight: 1.0,
            r_weight: 1.0,
            simulation_mode: true,
            seed,
        }
    }

    /// Small environment for CI: `n_x = n_u = 3`, `H = 20`.
    pub fn desk(seed: u64) -> Self {
        Self {
            n_x: 3,
            n_u: 3,
            horizon: 20,
            ..Self::paper(seed)
        }
    }

    pub fn policy_dim(&self) -> usize {
        self.n_x * self.n_u
    }
}

#[derive(Debug, Clone)]
pub struct LqrEnv {
    config: LqrConfig,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    x0: DVector<f64>,
    rng: Stream,
    t: usize,
    clipped: usize,
}

impl LqrEnv {
    pub fn new(config: LqrConfig) -> Self {
        assert!(config.n_x >= 1 && config.n_u >= 1 && config.horizon >= 1);
        let mut rng = purpose_stream(config.seed, DRIFT_STREAM);
        let s = config.init_std;
        let a = DMatrix::from_fn(config.n_x, config.n_x, |_, _| s * rng.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(config.n_x, config.n_u, |_, _| s * rng.sample::<f64, _>(StandardNormal));
        Self::assemble(config, a, b, rng)
    }

    /// Environment with explicit initial dynamics.
    pub fn with_dynamics(config: LqrConfig, a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        assert_eq!(a.shape(), (config.n_x, config.n_x));
        assert_eq!(b.shape(), (config.n_x, config.n_u));
        let rng = purpose_stream(config.seed, DRIFT_STREAM);
        Self::assemble(config, a, b, rng)
    }

    fn assemble(config: LqrConfig, a: DMatrix<f64>, b: DMatrix<f64>, rng: Stream) -> Self {
        let x0 = match &config.x0 {
            Some(v) => {
                assert_eq!(v.len(), config.n_x);
                DVector::from_column_slice(v)
            }
            None => DVector::from_element(config.n_x, 1.0),
        };
        Self {
            config,
            a,
            b,
            x0,
            rng,
            t: 0,
            clipped: 0,
        }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn config(&self) -> &LqrConfig {
        &self.config
    }

    /// Number of rollouts that were cut short by state blow-up.
    pub fn clipped_rollouts(&self) -> usize {
        self.clipped
    }

    fn gain(&self, k: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.config.n_u, self.config.n_x, k)
    }

    /// One noisy rollout; the second value is whether it was clipped.
    pub fn rollout(&self, k: &[f64], noise: &mut Stream) -> (f64, bool) {
        let c = &self.config;
        let gain = self.gain(k);
        let mut x = self.x0.clone();
        if c.x0_std > 0.0 {
            x += DVector::from_fn(c.n_x, |_, _| c.x0_std * noise.sample::<f64, _>(StandardNormal));
        }
        let mut cost = 0.0;
        let mut discount = 1.0;
        for _ in 0..c.horizon {
            let u = &gain * &x;
            cost += discount * (c.q_weight * x.norm_squared() + c.r_weight * u.norm_squared());
            discount *= c.gamma;
            x = &self.a * &x + &self.b * &u;
            if c.noise_std > 0.0 {
                x += DVector::from_fn(c.n_x, |_, _| c.noise_std * noise.sample::<f64, _>(StandardNormal));
            }
            if !(x.norm() <= BLOWUP_NORM) {
                return (cost, true);
            }
        }
        (cost, false)
    }

    /// Expected episode cost `V_t(K)` by propagating the state second moment.
    pub fn expected_cost(&self, k: &[f64]) -> f64 {
        let c = &self.config;
        let gain = self.gain(k);
        let closed = &self.a + &self.b * &gain;
        let weight = DMatrix::identity(c.n_x, c.n_x) * c.q_weight + gain.transpose() * &gain * c.r_weight;
        let mut second = &self.x0 * self.x0.transpose() + DMatrix::identity(c.n_x, c.n_x) * (c.x0_std * c.x0_std);
        let process = DMatrix::identity(c.n_x, c.n_x) * (c.noise_std * c.noise_std);
        let mut cost = 0.0;
        let mut discount = 1.0;
        for _ in 0..c.horizon {
            cost += discount * (&weight * &second).trace();
            discount *= c.gamma;
            second = &closed * &second * closed.transpose() + &process;
            if !(second.trace() <= BLOWUP_NORM * BLOWUP_NORM) {
                break;
            }
        }
        cost
    }
}

impl OnlineProblem for LqrEnv {
    fn dimension(&self) -> usize {
        self.config.policy_dim()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_double_query: self.config.simulation_mode,
            exposes_true_cost: true,
            ..Capabilities::default()
        }
    }

    fn time(&self) -> usize {
        self.t
    }

    fn query(&mut self, x: &[f64], noise: &mut Stream) -> f64 {
        let (cost, clipped) = self.rollout(x, noise);
        if clipped {
            self.clipped += 1;
        }
        cost
    }

    fn advance(&mut self) {
        let s = self.config.drift_scale;
        let rng = &mut self.rng;
        self.a.iter_mut().for_each(|v| *v += s * rng.gen::<f64>());
        self.b.iter_mut().for_each(|v| *v += s * rng.gen::<f64>());
        self.t += 1;
    }

    fn true_cost(&self, x: &[f64]) -> Option<f64> {
        Some(self.expected_cost(x))
    }
}
