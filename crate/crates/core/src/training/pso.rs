//! Global-best particle swarm optimization (minimization).
//!
//! Velocity update per dimension:
//! `v <- inertia * v + cognitive * r1 * (p - x) + social * r2 * (g - x)`,
//! then `x <- x + v`. Velocities are clamped to a fraction of the box width
//! and positions are clipped to the box. All random draws come from one
//! seeded generator in particle order before the swarm is evaluated, so the
//! run is reproducible for any worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub swarm: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// `(low, high)` per dimension.
    pub bounds: Vec<(f64, f64)>,
    /// Maximum speed per dimension as a fraction of the box width.
    pub velocity_clamp: f64,
    pub seed: u64,
}

impl PsoConfig {
    pub const DEFAULT_SWARM: usize = 30;
    pub const DEFAULT_ITERATIONS: usize = 100;
    pub const DEFAULT_INERTIA: f64 = 0.729;
    pub const DEFAULT_ACCELERATION: f64 = 1.49445;

    /// Default coefficients over the box `[low, high]^dim`.
    pub fn new(dim: usize, low: f64, high: f64, seed: u64) -> Self {
        PsoConfig {
            swarm: Self::DEFAULT_SWARM,
            iterations: Self::DEFAULT_ITERATIONS,
            inertia: Self::DEFAULT_INERTIA,
            cognitive: Self::DEFAULT_ACCELERATION,
            social: Self::DEFAULT_ACCELERATION,
            bounds: vec![(low, high); dim],
            velocity_clamp: 0.5,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.swarm < 2 {
            return bad(format!("swarm size {} < 2", self.swarm));
        }
        if !(0.0..=1.0).contains(&self.inertia) {
            return bad(format!("inertia {} not in [0, 1]", self.inertia));
        }
        if !(self.cognitive.is_finite() && self.social.is_finite() && self.cognitive >= 0.0 && self.social >= 0.0) {
            return bad("acceleration coefficients must be non-negative".into());
        }
        if !(self.velocity_clamp > 0.0 && self.velocity_clamp.is_finite()) {
            return bad("velocity clamp must be positive".into());
        }
        if self.bounds.is_empty() {
            return bad("search space has no dimensions".into());
        }
        if let Some((lo, hi)) = self.bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return bad(format!("bounds [{lo}, {hi}] are not an interval"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub best_position: Vec<f64>,
    pub best_cost: f64,
    /// Best cost after initialization and after every iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Minimizes `objective` over the configured box. `seeds` replace the first
/// random particles of the initial swarm. Non-finite costs count as `+inf`;
/// ties keep the earlier particle.
pub fn pso_optimize<F>(objective: F, config: &PsoConfig, seeds: &[Vec<f64>], workers: usize) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let dim = config.dim();
    if seeds.len() > config.swarm {
        return Err(Error::InvalidParameter(format!("{} seed particles exceed swarm size {}", seeds.len(), config.swarm)));
    }
    if let Some(s) = seeds.iter().find(|s| s.len() != dim) {
        return Err(Error::LengthMismatch { expected: dim, actual: s.len() });
    }
    let clip = |d: usize, v: f64| v.clamp(config.bounds[d].0, config.bounds[d].1);
    let vmax: Vec<f64> = config.bounds.iter().map(|(lo, hi)| config.velocity_clamp * (hi - lo)).collect();
    let evaluate = |positions: &[Vec<f64>]| -> Vec<f64> {
        parallel::map_indexed(positions.len(), workers, |i| {
            let c = objective(&positions[i]);
            if c.is_finite() {
                c
            } else {
                f64::INFINITY
            }
        })
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x: Vec<Vec<f64>> = (0..config.swarm)
        .map(|i| match seeds.get(i) {
            Some(s) => s.iter().enumerate().map(|(d, v)| clip(d, *v)).collect(),
            None => config.bounds.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)).collect(),
        })
        .collect();
    let mut v: Vec<Vec<f64>> = (0..config.swarm)
        .map(|_| vmax.iter().map(|m| rng.random_range(-*m..*m)).collect())
        .collect();

    let cost = evaluate(&x);
    let mut evaluations = cost.len();
    let mut pbest = x.clone();
    let mut pbest_cost = cost;
    let argmin = |costs: &[f64]| {
        costs.iter().enumerate().fold(0, |best, (i, c)| if *c < costs[best] { i } else { best })
    };
    let mut g = argmin(&pbest_cost);
    let mut gbest = pbest[g].clone();
    let mut gbest_cost = pbest_cost[g];
    let mut history = vec![gbest_cost];

    for _ in 0..config.iterations {
        for i in 0..config.swarm {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let vel = config.inertia * v[i][d]
                    + config.cognitive * r1 * (pbest[i][d] - x[i][d])
                    + config.social * r2 * (gbest[d] - x[i][d]);
                v[i][d] = vel.clamp(-vmax[d], vmax[d]);
                x[i][d] = clip(d, x[i][d] + v[i][d]);
            }
        }
        let cost = evaluate(&x);
        evaluations += cost.len();
        for i in 0..config.swarm {
            if cost[i] < pbest_cost[i] {
                pbest_cost[i] = cost[i];
                pbest[i].clone_from(&x[i]);
            }
        }
        g = argmin(&pbest_cost);
        if pbest_cost[g] < gbest_cost {
            gbest_cost = pbest_cost[g];
            gbest.clone_from(&pbest[g]);
        }
        history.push(gbest_cost);
    }

    Ok(PsoResult { best_position: gbest, best_cost: gbest_cost, history, evaluations })
}
