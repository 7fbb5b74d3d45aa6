//! Posterior insolvency probabilities from rank weights over the `K`
//! retrieved neighbors.
//!
//! Slot `i <= K` carries the weight of the `i`-th most similar neighbor and
//! slot `K + 1` is a regularizer that always votes one half. The weights are
//! a softmax over `omega`, kept monotone in rank by the parameterization
//! `omega_1 = 0`, `omega_{i+1} = omega_i - delta_i^2`.
//!
//! Fitting maximizes the likelihood that each training case is classified
//! correctly: neighbor `i` of case `n` contributes when it shares `n`'s true
//! label.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::retrieval::Neighbor;
use crate::similarity::SimilarityModel;
use crate::training::cv::CrossValidator;
use crate::training::pso::{pso_optimize, PsoConfig};

/// Bound on `delta_i^2` and on `|omega_{K+1}|`.
pub const OMEGA_BOUND: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbWeights {
    /// `omega_1..omega_{K+1}`.
    pub omega: Vec<f64>,
}

impl ProbWeights {
    /// All-zero `omega`: every slot, the regularizer included, gets `1/(K+1)`.
    pub fn uniform(k: usize) -> Self {
        ProbWeights { omega: vec![0.0; k + 1] }
    }

    /// Checks length and monotonicity of the first `K` entries.
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.len() < 2 {
            return Err(Error::InvalidParameter("rank weights need K >= 1".into()));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("rank weights must be finite".into()));
        }
        let k = omega.len() - 1;
        if omega[..k].windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter("rank weights must be non-increasing".into()));
        }
        Ok(ProbWeights { omega })
    }

    /// `omega` from free parameters: `deltas` (length `K - 1`) and `omega_{K+1}`.
    pub fn from_params(deltas: &[f64], last: f64) -> Self {
        let mut omega = Vec::with_capacity(deltas.len() + 2);
        omega.push(0.0);
        for d in deltas {
            let prev = *omega.last().expect("non-empty");
            omega.push(prev - d * d);
        }
        omega.push(last);
        ProbWeights { omega }
    }

    pub fn k(&self) -> usize {
        self.omega.len() - 1
    }

    /// Softmax of `omega`.
    pub fn probabilities(&self) -> Vec<f64> {
        let max = self.omega.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.omega.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = e.iter().sum();
        e.iter().map(|v| v / total).collect()
    }
}

/// Share of insolvent neighbors.
pub fn prob_uniform(neighbors: &[Neighbor]) -> Result<f64> {
    if neighbors.is_empty() {
        return Err(Error::InvalidParameter("no neighbors to estimate a probability from".into()));
    }
    let insolvent = neighbors.iter().filter(|n| n.label.is_insolvent()).count();
    Ok(insolvent as f64 / neighbors.len() as f64)
}

/// `sum_i B_i p_i + p_{K+1} / 2` with `B_i` set for insolvent neighbors.
pub fn predict_proba(neighbors: &[Neighbor], weights: &ProbWeights) -> Result<f64> {
    let labels: Vec<Label> = neighbors.iter().map(|n| n.label).collect();
    predict_proba_labels(&labels, weights)
}

pub fn predict_proba_labels(labels: &[Label], weights: &ProbWeights) -> Result<f64> {
    if labels.len() != weights.k() {
        return Err(Error::LengthMismatch { expected: weights.k(), actual: labels.len() });
    }
    let p = weights.probabilities();
    let k = weights.k();
    let hit: f64 = labels.iter().zip(&p).filter(|(l, _)| l.is_insolvent()).map(|(_, p)| *p).sum();
    Ok(hit + 0.5 * p[k])
}

/// Agreement indicators grouped by pattern: bit `i` set when neighbor `i`
/// agrees. Rows must all have the same length `K <= 32`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementCounts {
    k: usize,
    patterns: Vec<(u32, f64)>,
    total: f64,
}

impl AgreementCounts {
    pub fn new(agreements: &[Vec<bool>]) -> Result<Self> {
        let k = agreements.first().map(Vec::len).ok_or(Error::EmptyData)?;
        if k == 0 || k > 32 {
            return Err(Error::InvalidParameter(format!("K = {k} outside 1..=32")));
        }
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for row in agreements {
            if row.len() != k {
                return Err(Error::LengthMismatch { expected: k, actual: row.len() });
            }
            let mask = row.iter().enumerate().fold(0u32, |m, (i, b)| if *b { m | (1 << i) } else { m });
            *counts.entry(mask).or_default() += 1.0;
        }
        Ok(AgreementCounts { k, patterns: counts.into_iter().collect(), total: agreements.len() as f64 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cases(&self) -> usize {
        self.total as usize
    }

    /// `sum_n log(sum_i B_i(n) p_i + p_{K+1} / 2)`.
    pub fn log_likelihood(&self, weights: &ProbWeights) -> f64 {
        let p = weights.probabilities();
        let reg = 0.5 * p[self.k];
        self.patterns
            .iter()
            .map(|(mask, count)| {
                let s: f64 = (0..self.k).filter(|i| mask & (1 << i) != 0).map(|i| p[i]).sum();
                count * (s + reg).ln()
            })
            .sum()
    }
}

/// Optimizer budget for [`fit_from_agreements`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbFitConfig {
    pub swarm: usize,
    pub iterations: usize,
    /// Initial pattern-search step; the search halves it down to `tolerance`.
    pub polish_step: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for ProbFitConfig {
    fn default() -> Self {
        ProbFitConfig { swarm: 20, iterations: 60, polish_step: 1.0, tolerance: 1e-7, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbFit {
    pub weights: ProbWeights,
    pub log_likelihood: f64,
    pub uniform_log_likelihood: f64,
    pub cases: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Maximum-likelihood rank weights for an agreement matrix. Starts from the
/// uniform point and only accepts improvements, so the fitted likelihood is
/// never below the uniform one.
pub fn fit_from_agreements(agreements: &[Vec<bool>], config: &ProbFitConfig) -> Result<ProbFit> {
    let counts = AgreementCounts::new(agreements)?;
    let k = counts.k();
    let uniform = ProbWeights::uniform(k);
    let uniform_ll = counts.log_likelihood(&uniform);

    // Free parameters: delta_1..delta_{K-1}, then omega_{K+1}.
    let dim = k;
    let mut bounds = vec![(0.0, OMEGA_BOUND.sqrt()); dim - 1];
    bounds.push((-OMEGA_BOUND, OMEGA_BOUND));
    let to_weights = |x: &[f64]| ProbWeights::from_params(&x[..dim - 1], x[dim - 1]);
    let cost = |x: &[f64]| -counts.log_likelihood(&to_weights(x)) / counts.total;

    let pso = PsoConfig {
        swarm: config.swarm.max(2),
        iterations: config.iterations,
        bounds: bounds.clone(),
        ..PsoConfig::new(dim, 0.0, 1.0, config.seed)
    };
    let start = vec![0.0; dim];
    let run = pso_optimize(cost, &pso, std::slice::from_ref(&start), 1)?;
    let (mut best, mut best_cost) = (run.best_position, run.best_cost);

    // Compass search around the swarm's answer.
    let mut step = config.polish_step;
    while step >= config.tolerance {
        let mut improved = false;
        for d in 0..dim {
            for dir in [1.0, -1.0] {
                let mut trial = best.clone();
                trial[d] = (trial[d] + dir * step).clamp(bounds[d].0, bounds[d].1);
                let c = cost(&trial);
                if c < best_cost {
                    best = trial;
                    best_cost = c;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    let weights = to_weights(&best);
    let ll = counts.log_likelihood(&weights);
    if !(ll.is_finite() && ll >= uniform_ll) {
        return Ok(ProbFit {
            weights: uniform,
            log_likelihood: uniform_ll,
            uniform_log_likelihood: uniform_ll,
            cases: counts.cases(),
            warning: Some("rank-weight optimization did not improve on uniform weights".into()),
        });
    }
    Ok(ProbFit { weights, log_likelihood: ll, uniform_log_likelihood: uniform_ll, cases: counts.cases(), warning: None })
}

/// Fits rank weights from the cross-validated neighbors of every case in the
/// scaled, labeled `train` under `model` and `k`.
pub fn fit_prob_weights(
    train: &Dataset,
    model: &SimilarityModel,
    k: usize,
    folds: usize,
    config: &ProbFitConfig,
    workers: usize,
) -> Result<ProbFit> {
    let cv = CrossValidator::new(train, folds, config.seed)?;
    let neighbors = cv.neighbors(model, k, workers)?;
    fit_from_agreements(&cv.agreements(&neighbors, k), config)
}
