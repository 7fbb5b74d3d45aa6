//! Model design: choose `K`, score the features, tune the local exponents by
//! particle swarm optimization against a cross-validated cost, and keep the
//! best validated system.

pub mod cv;
pub mod pso;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{apply_scaler, fit_scaler, random_undersample, Dataset};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::model::{CandidateScore, TrainedModel, TrainingSummary};
use crate::parallel;
use crate::probability::{fit_from_agreements, ProbFitConfig};
use crate::retrieval::{default_k_grid, select_k_with};
use crate::seed::derive;
use crate::similarity::{GlobalWeights, LocalParams, SimilarityModel, Variant};
use crate::weighting::{score_features, ScoringConfig, ScoringMethod};

pub use cv::{CrossValidator, PolynomialCache};
pub use pso::{pso_optimize, PsoConfig, PsoResult};

/// Settings for [`design`] and [`design_acbr`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Scoring methods tried in order; ties keep the earlier method.
    pub methods: Vec<ScoringMethod>,
    pub scoring: ScoringConfig,
    pub swarm: usize,
    /// PSO iterations. Zero skips the search and keeps unit exponents.
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Box for every exponent.
    pub exponent_bounds: (f64, f64),
    pub k_grid: Vec<usize>,
    pub metric: Metric,
    pub folds: usize,
    pub seed: u64,
    /// Balance the classes before training.
    pub undersample: bool,
    /// Fit rank weights for probabilities; otherwise the vote share is used.
    pub fit_probability: bool,
    pub probability: ProbFitConfig,
    pub workers: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            methods: ScoringMethod::ALL.to_vec(),
            scoring: ScoringConfig::default(),
            swarm: PsoConfig::DEFAULT_SWARM,
            iterations: PsoConfig::DEFAULT_ITERATIONS,
            inertia: PsoConfig::DEFAULT_INERTIA,
            cognitive: PsoConfig::DEFAULT_ACCELERATION,
            social: PsoConfig::DEFAULT_ACCELERATION,
            exponent_bounds: (0.1, 10.0),
            k_grid: default_k_grid(),
            metric: Metric::Accuracy,
            folds: 5,
            seed: 42,
            undersample: true,
            fit_probability: true,
            probability: ProbFitConfig::default(),
            workers: parallel::default_workers(),
        }
    }
}

impl TrainingConfig {
    /// PSO settings for an `l`-feature exponent search.
    pub fn pso_config(&self, l: usize, seed: u64) -> PsoConfig {
        PsoConfig {
            swarm: self.swarm,
            iterations: self.iterations,
            inertia: self.inertia,
            cognitive: self.cognitive,
            social: self.social,
            ..PsoConfig::new(2 * l, self.exponent_bounds.0, self.exponent_bounds.1, seed)
        }
    }
}

/// Maps a score to the minimized cost `1 - normalized(score)`.
pub fn score_to_cost(metric: Metric, score: f64) -> f64 {
    1.0 - metric.normalized(score)
}

/// Mean per-fold `metric` of the ACBR model `(local, weights)` with `k`
/// neighbors on scaled, labeled `train` split into seeded stratified folds.
pub fn cv_cost(
    local: &LocalParams,
    weights: &GlobalWeights,
    k: usize,
    train: &Dataset,
    folds: usize,
    metric: Metric,
    seed: u64,
) -> Result<f64> {
    let cv = CrossValidator::new(train, folds, seed)?;
    let model = SimilarityModel::acbr(weights.clone(), local.clone())?;
    cv.score(&model, k, metric, parallel::default_workers())
}

/// Trains an ACBR system.
pub fn design_acbr(train: &Dataset, config: &TrainingConfig) -> Result<TrainedModel> {
    design(train, Variant::Acbr, config)
}

/// Trains a system of any variant on labeled `train` in original units.
///
/// The scaler is fitted on `train`, the classes are balanced, `K` is chosen
/// by cross-validated accuracy of the variant with equal weights, and each
/// scoring method yields a candidate. ACBR candidates additionally get their
/// exponents tuned; EWCBR has a single equal-weight candidate. The candidate
/// with the best training metric wins.
pub fn design(train: &Dataset, variant: Variant, config: &TrainingConfig) -> Result<TrainedModel> {
    let (solvent, insolvent) = train.class_counts();
    train.labels()?;
    if solvent == 0 || insolvent == 0 {
        return Err(Error::SingleClass);
    }
    if variant != Variant::Ewcbr && config.methods.is_empty() {
        return Err(Error::InvalidParameter("no scoring methods given".into()));
    }
    let l = train.n_features();
    let workers = config.workers.max(1);
    let mut log = Vec::new();

    let scaling = fit_scaler(train)?;
    let base = if config.undersample {
        random_undersample(train, derive(config.seed, "undersample"))?
    } else {
        train.clone()
    };
    let scaled = apply_scaler(&base, &scaling)?;
    log.push(format!(
        "{} training cases ({solvent} solvent, {insolvent} insolvent), {} references after balancing",
        train.len(),
        base.len()
    ));

    let cv = CrossValidator::new(&scaled, config.folds, derive(config.seed, "folds"))?;
    let ewcbr = SimilarityModel::ewcbr(l);
    let (k, k_scores) = select_k_with(&cv, &SimilarityModel::with_weights(variant, GlobalWeights::uniform(l)), &config.k_grid, workers)?;
    log.push(format!("K = {k} by {}-fold cross-validated accuracy", config.folds));
    let ewcbr_score = cv.score(&ewcbr, k, config.metric, workers)?;
    log.push(format!("EWCBR {} = {ewcbr_score:.6}", config.metric.as_str()));

    let mut candidates = Vec::new();
    let cache = (variant == Variant::Acbr && config.iterations > 0)
        .then(|| cv.polynomial_cache(&SimilarityModel::ewcbr(l), workers))
        .flatten();
    if variant != Variant::Ewcbr {
        let scoring = ScoringConfig { seed: derive(config.seed, "relieff"), ..config.scoring.clone() };
        for &method in &config.methods {
            let scores = score_features(&scaled, method, &scoring)?;
            if let Some(w) = &scores.warning {
                log.push(w.clone());
            }
            let candidate = fit_candidate(&cv, cache.as_ref(), variant, method, scores.weights, k, config)?;
            log.push(format!(
                "{method}: {} = {:.6} (unit exponents {:.6})",
                config.metric.as_str(),
                candidate.cv_score,
                candidate.epcbr_score
            ));
            candidates.push(candidate);
        }
    }

    let best = candidates
        .iter()
        .enumerate()
        .fold(None::<usize>, |best, (i, c)| match best {
            Some(b) if candidates[b].cv_score >= c.cv_score => Some(b),
            _ => Some(i),
        });
    let (similarity, scoring, cv_score) = match best {
        Some(i) => {
            let c = &candidates[i];
            let model = SimilarityModel::new(variant, c.weights.clone(), c.local.clone())?;
            (model, Some(c.method), c.cv_score)
        }
        None => (ewcbr.clone(), None, ewcbr_score),
    };
    log.push(format!(
        "selected {variant}{}",
        scoring.map(|m| format!(" with {m} weights")).unwrap_or_default()
    ));

    let neighbors = cv.neighbors(&similarity, k, workers)?;
    let mut cv_scores = BTreeMap::new();
    for metric in Metric::ALL {
        if let Ok(s) = cv.score_neighbors(&neighbors, k, metric) {
            cv_scores.insert(metric.as_str().to_string(), s);
        }
    }
    let probability = if config.fit_probability {
        let fit_config = ProbFitConfig { seed: derive(config.seed, "probability"), ..config.probability.clone() };
        let fit = fit_from_agreements(&cv.agreements(&neighbors, k), &fit_config)?;
        if let Some(w) = &fit.warning {
            log.push(w.clone());
        }
        log.push(format!(
            "rank weights: log-likelihood {:.6} (uniform {:.6})",
            fit.log_likelihood, fit.uniform_log_likelihood
        ));
        Some(fit)
    } else {
        None
    };

    let summary = TrainingSummary {
        metric: config.metric,
        folds: config.folds,
        seed: config.seed,
        k_scores,
        ewcbr_score,
        candidates,
        log,
    };
    TrainedModel::new(
        train.schema.clone(),
        scaling,
        similarity,
        k,
        scoring,
        cv_score,
        cv_scores,
        probability,
        summary,
        base.cases,
    )
}

/// Scores one weighting: unit exponents for every variant, plus an exponent
/// search for ACBR seeded at the unit point.
fn fit_candidate(
    cv: &CrossValidator,
    cache: Option<&PolynomialCache>,
    variant: Variant,
    method: ScoringMethod,
    weights: GlobalWeights,
    k: usize,
    config: &TrainingConfig,
) -> Result<CandidateScore> {
    let l = weights.len();
    let workers = config.workers.max(1);
    let unit = SimilarityModel::with_weights(Variant::Epcbr, weights.clone());
    let epcbr_score = cv.score(&unit, k, config.metric, workers)?;
    if variant != Variant::Acbr {
        let model = SimilarityModel::with_weights(variant, weights.clone());
        let cv_score = if variant == Variant::Epcbr { epcbr_score } else { cv.score(&model, k, config.metric, workers)? };
        return Ok(CandidateScore {
            method,
            weights,
            local: LocalParams::ones(l),
            cv_score,
            epcbr_score,
            evaluations: 1,
            history: Vec::new(),
        });
    }
    if config.iterations == 0 {
        return Ok(CandidateScore {
            method,
            weights,
            local: LocalParams::ones(l),
            cv_score: epcbr_score,
            epcbr_score,
            evaluations: 1,
            history: vec![score_to_cost(config.metric, epcbr_score)],
        });
    }

    let pso = config.pso_config(l, derive(config.seed, &format!("pso/{method}")));
    let objective = |x: &[f64]| -> f64 {
        let local = match LocalParams::from_position(x) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let score = match cache {
            Some(cache) => cv
                .neighbors_cached(cache, &weights, &local, k, 1)
                .and_then(|nb| cv.score_neighbors(&nb, k, config.metric)),
            None => SimilarityModel::acbr(weights.clone(), local).and_then(|m| cv.score(&m, k, config.metric, 1)),
        };
        score.map_or(f64::INFINITY, |s| score_to_cost(config.metric, s))
    };
    let run = pso_optimize(objective, &pso, &[LocalParams::ones(l).to_position()], workers)?;
    let mut local = LocalParams::from_position(&run.best_position)?;
    let mut cv_score = cv.score(&SimilarityModel::acbr(weights.clone(), local.clone())?, k, config.metric, workers)?;
    // The search scores through the rounded cache; if the exact score of its
    // answer falls below the unit point, keep the unit point.
    if cv_score < epcbr_score {
        local = LocalParams::ones(l);
        cv_score = epcbr_score;
    }
    Ok(CandidateScore {
        method,
        weights,
        local,
        cv_score,
        epcbr_score,
        evaluations: run.evaluations,
        history: run.history,
    })
}
