//! Multi-agent resource sharing on a grid with drifting shortage sensitivity.
//!
//! Each agent keeps or forwards fractions of its stock to its grid neighbors
//! through a softmax policy. Slot 0 of every agent is the agent itself, so
//! transfers conserve the total stock and only demand removes it. An agent
//! with negative stock pays `ζ_i m_i²` per step. Everything is a cost to
//! minimize.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Capabilities, OnlineProblem};
use crate::sampling::{purpose_stream, Stream};

const FEATURES: usize = 9;
const DRIFT_STREAM: u64 = 0x67726964;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceGridConfig {
    pub rows: usize,
    pub cols: usize,
    pub gamma: f64,
    pub horizon: usize,
    pub zeta0: f64,
    /// `ζ_{i,t+1} = max(0, ζ_{i,t} + zeta_step * U[-1, 1])`.
    pub zeta_step: f64,
    /// Range of the demand sinusoid amplitudes `ψ_i`.
    pub demand_amplitude: (f64, f64),
    /// Range of the demand frequencies `ω_i`; phases are uniform on `[0, 2π)`.
    pub demand_frequency: (f64, f64),
    pub demand_noise_std: f64,
    /// Range of the initial stocks `m_i(0)`.
    pub initial_stock: (f64, f64),
    /// Centers `c_p` of the features `|o_i - c_p|²`, `o_i = (m_i, d_i)`.
    pub feature_centers: Vec<[f64; 2]>,
    pub simulation_mode: bool,
    pub seed: u64,
}

fn default_centers() -> Vec<[f64; 2]> {
    let grid = [-1.0, 0.0, 1.0];
    grid.iter().flat_map(|&m| grid.iter().map(move |&d| [m, d])).collect()
}

impl ResourceGridConfig {
    /// 16 agents on a 4×4 grid, `γ = 0.75`, `H = 30`, policy dimension 576.
    pub fn paper(seed: u64) -> Self {
        Self {
            rows: 4,
            cols: 4,
            gamma: 0.75,
            horizon: 30,
            zeta0: 1.0,
            zeta_step: 0.1,
            demand_amplitude: (0.5, 1.5),
            demand_frequency: (0.2, 1.0),
            demand_noise_std: 0.1,
            initial_stock: (0.5, 1.5),
            feature_centers: default_centers(),
            simulation_mode: true,
            seed,
        }
    }

    /// 2×2 grid with `H = 10`.
    pub fn desk(seed: u64) -> Self {
        Self {
            rows: 2,
            cols: 2,
            horizon: 10,
            ..Self::paper(seed)
        }
    }
}

/// Result of one simulated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub cost: f64,
    /// `Σ_i m_i(k)` for `k = 0..=H`.
    pub total_stock: Vec<f64>,
    /// Largest `|Σ_j a_ij - 1|` seen.
    pub max_allocation_error: f64,
    /// Smallest and largest single allocation seen.
    pub allocation_range: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Demand {
    amplitude: f64,
    frequency: f64,
    phase: f64,
}

#[derive(Debug, Clone)]
pub struct ResourceGridEnv {
    config: ResourceGridConfig,
    /// Receiving agent for every slot of every agent; slot 0 is the agent.
    slots: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    dim: usize,
    demands: Vec<Demand>,
    initial_stock: Vec<f64>,
    zeta: Vec<f64>,
    rng: Stream,
    t: usize,
}

impl ResourceGridEnv {
    pub fn new(config: ResourceGridConfig) -> Self {
        assert!(config.rows >= 1 && config.cols >= 1 && config.horizon >= 1);
        assert_eq!(config.feature_centers.len(), FEATURES, "nine feature centers");
        let n = config.rows * config.cols;
        let slots: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let (r, c) = (i / config.cols, i % config.cols);
                let mut s = vec![i];
                if r > 0 {
                    s.push(i - config.cols);
                }
                if r + 1 < config.rows {
                    s.push(i + config.cols);
                }
                if c > 0 {
                    s.push(i - 1);
                }
                if c + 1 < config.cols {
                    s.push(i + 1);
                }
                s
            })
            .collect();
        let mut offsets = Vec::with_capacity(n);
        let mut dim = 0;
        for s in &slots {
            offsets.push(dim);
            dim += s.len() * FEATURES;
        }

        let mut rng = purpose_stream(config.seed, DRIFT_STREAM);
        let uniform = |rng: &mut Stream, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.gen::<f64>();
        let demands = (0..n)
            .map(|_| Demand {
                amplitude: uniform(&mut rng, config.demand_amplitude),
                frequency: uniform(&mut rng, config.demand_frequency),
                phase: uniform(&mut rng, (0.0, 2.0 * PI)),
            })
            .collect();
        let initial_stock = (0..n).map(|_| uniform(&mut rng, config.initial_stock)).collect();
        Self {
            zeta: vec![config.zeta0; n],
            config,
            slots,
            offsets,
            dim,
            demands,
            initial_stock,
            rng,
            t: 0,
        }
    }

    pub fn agents(&self) -> usize {
        self.slots.len()
    }

    /// Receiving agents of `agent`'s slots, itself first.
    pub fn slots(&self, agent: usize) -> &[usize] {
        &self.slots[agent]
    }

    pub fn sensitivities(&self) -> &[f64] {
        &self.zeta
    }

    pub fn config(&self) -> &ResourceGridConfig {
        &self.config
    }

    /// Softmax allocation `a_i` of `agent` given its observation `(m_i, d_i)`.
    pub fn allocations(&self, theta: &[f64], agent: usize, observation: [f64; 2]) -> Vec<f64> {
        let features: Vec<f64> = self
            .config
            .feature_centers
            .iter()
            .map(|c| (observation[0] - c[0]).powi(2) + (observation[1] - c[1]).powi(2))
            .collect();
        let base = self.offsets[agent];
        let logits: Vec<f64> = (0..self.slots[agent].len())
            .map(|j| {
                let w = &theta[base + j * FEATURES..base + (j + 1) * FEATURES];
                w.iter().zip(&features).map(|(a, b)| a * b).sum()
            })
            .collect();
        softmax(&logits)
    }

    fn demand(&self, agent: usize, k: usize) -> f64 {
        let d = &self.demands[agent];
        d.amplitude * (d.frequency * k as f64 + d.phase).sin()
    }

    /// Runs one episode under policy `theta`. Demand noise is drawn from
    /// `noise` when given, otherwise demands are noise-free.
    pub fn simulate(&self, theta: &[f64], noise: Option<&mut Stream>) -> Episode {
        self.simulate_with(theta, noise, |env, i, k| env.demand(i, k))
    }

    fn simulate_with<F>(&self, theta: &[f64], mut noise: Option<&mut Stream>, demand: F) -> Episode
    where
        F: Fn(&Self, usize, usize) -> f64,
    {
        assert_eq!(theta.len(), self.dim);
        let n = self.agents();
        let c = &self.config;
        let mut stock = self.initial_stock.clone();
        let mut cost = 0.0;
        let mut discount = 1.0;
        let mut total_stock = Vec::with_capacity(c.horizon + 1);
        let mut max_allocation_error: f64 = 0.0;
        let mut allocation_range = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..=c.horizon {
            total_stock.push(stock.iter().sum());
            cost += discount
                * stock
                    .iter()
                    .zip(&self.zeta)
                    .filter(|(m, _)| **m < 0.0)
                    .map(|(m, z)| z * m * m)
                    .sum::<f64>();
            discount *= c.gamma;
            if k == c.horizon {
                break;
            }
            let demands: Vec<f64> = (0..n)
                .map(|i| {
                    let w = match noise.as_deref_mut() {
                        Some(rng) if c.demand_noise_std > 0.0 => {
                            c.demand_noise_std * rng.sample::<f64, _>(StandardNormal)
                        }
                        _ => 0.0,
                    };
                    demand(self, i, k) + w
                })
                .collect();
            let mut next = vec![0.0; n];
            for i in 0..n {
                let a = self.allocations(theta, i, [stock[i], demands[i]]);
                max_allocation_error = max_allocation_error.max((a.iter().sum::<f64>() - 1.0).abs());
                for (&j, aij) in self.slots[i].iter().zip(&a) {
                    allocation_range.0 = allocation_range.0.min(*aij);
                    allocation_range.1 = allocation_range.1.max(*aij);
                    next[j] += aij * stock[i];
                }
            }
            for (m, d) in next.iter_mut().zip(&demands) {
                *m -= d;
            }
            stock = next;
        }
        Episode {
            cost,
            total_stock,
            max_allocation_error,
            allocation_range,
        }
    }

    /// Episode with every demand forced to zero (noise included).
    pub fn simulate_without_demand(&self, theta: &[f64]) -> Episode {
        let mut quiet = self.clone();
        quiet.config.demand_noise_std = 0.0;
        quiet.simulate_with(theta, None, |_, _, _| 0.0)
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl OnlineProblem for ResourceGridEnv {
    fn dimension(&self) -> usize {
        self.dim
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
        self.simulate(x, Some(noise)).cost
    }

    fn advance(&mut self) {
        let step = self.config.zeta_step;
        for z in &mut self.zeta {
            let p: f64 = self.rng.gen_range(-1.0..=1.0);
            *z = (*z + step * p).max(0.0);
        }
        self.t += 1;
    }

    fn true_cost(&self, x: &[f64]) -> Option<f64> {
        Some(self.simulate(x, None).cost)
    }
}
