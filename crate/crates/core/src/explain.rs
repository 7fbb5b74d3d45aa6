//! Explanations of a prediction: the retrieved neighbors in original units,
//! feature relevance, Shapley attributions of the insolvency probability and
//! what-if trajectories.
//!
//! A coalition `S` of features is evaluated with the trained model restricted
//! to `S`: global weights renormalized over `S`, exponents, `K` and rank
//! weights unchanged. The empty coalition (or one carrying no weight) is
//! worth the insolvent share of the reference base.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Case, Dataset, Label};
use crate::error::{Error, Result};
use crate::model::TrainedModel;
use crate::parallel;
use crate::retrieval::Neighbor;
use crate::similarity::local_sim_with;
use crate::weighting::relevance_percent;

/// Largest feature count explained by full subset enumeration.
pub const EXACT_LIMIT: usize = 15;
/// Default permutation count of the Monte Carlo estimator.
pub const DEFAULT_PERMUTATIONS: usize = 5000;
/// Subset values are tabulated up front for Monte Carlo runs up to this many
/// features.
const TABULATE_LIMIT: usize = 20;

pub const SUBSET_NOTE: &str = "Shapley values evaluate each feature subset with the trained model restricted to it: \
global weights renormalized over the subset; exponents, K and rank weights unchanged; \
the empty subset is worth the insolvent share of the reference base.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ShapleyMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyResult {
    /// `phi_j` in probability units.
    pub values: Vec<f64>,
    /// Standard error of each Monte Carlo estimate; zeros in exact mode.
    pub std_errors: Vec<f64>,
    /// Value of the empty coalition.
    pub baseline: f64,
    /// Value of the full feature set.
    pub full: f64,
    pub mode: ShapleyMode,
    /// `sum phi_j - (full - baseline)`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborRow {
    pub id: String,
    pub label: Label,
    pub similarity: f64,
    pub values: Vec<Option<f64>>,
    /// Net income over sales in percent, when both are known.
    pub profit_margin: Option<f64>,
}

/// Query and neighbors side by side in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborTable {
    pub features: Vec<String>,
    pub descriptions: Vec<String>,
    pub query_id: String,
    pub query: Vec<Option<f64>>,
    pub query_profit_margin: Option<f64>,
    pub rows: Vec<NeighborRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfStep {
    /// Feature replaced at this step; `None` for the starting point.
    pub feature: Option<usize>,
    pub name: Option<String>,
    /// New value in original units.
    pub value: Option<f64>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfTrajectory {
    pub base_id: String,
    pub target_id: String,
    pub steps: Vec<WhatIfStep>,
}

impl WhatIfTrajectory {
    pub fn probabilities(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.probability).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRelevance {
    pub feature: String,
    pub description: String,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub query_id: String,
    pub label: Label,
    pub probability: f64,
    pub k: usize,
    pub neighbors: NeighborTable,
    pub relevance: Vec<FeatureRelevance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shapley: Option<ShapleyResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub whatif: Option<WhatIfTrajectory>,
    pub note: String,
}

/// Explanation engine over a trained model.
#[derive(Debug, Clone, Copy)]
pub struct Explainer<'a> {
    pub model: &'a TrainedModel,
    /// Skip references whose id equals the query's.
    pub exclude_self: bool,
    pub workers: usize,
}

impl<'a> Explainer<'a> {
    pub fn new(model: &'a TrainedModel) -> Self {
        Explainer { model, exclude_self: false, workers: parallel::default_workers() }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Explainer { workers: workers.max(1), ..self }
    }

    pub fn excluding_self(self, exclude_self: bool) -> Self {
        Explainer { exclude_self, ..self }
    }

    fn exclude<'c>(&self, case: &'c Case) -> Option<&'c str> {
        self.exclude_self.then_some(case.id.as_str())
    }

    /// Probability of the scaled `query` under the features in `mask`.
    fn coalition_value(&self, query: &[Option<f64>], mask: &[bool], exclude: Option<&str>) -> Result<f64> {
        match self.model.similarity.restricted(mask) {
            Some(sim) => self.model.proba_with(&sim, query, exclude),
            None => Ok(self.model.baseline()),
        }
    }

    /// Probability of `query` (original units) using only the features in
    /// `mask`.
    pub fn restricted_predict_proba(&self, query: &Case, mask: &[bool]) -> Result<f64> {
        if mask.len() != self.model.n_features() {
            return Err(Error::LengthMismatch { expected: self.model.n_features(), actual: mask.len() });
        }
        let scaled = self.model.scale_features(&query.features)?;
        self.coalition_value(&scaled, mask, self.exclude(query))
    }

    /// Values of all `2^L` coalitions, indexed by bit mask.
    fn coalition_table(&self, scaled: &[Option<f64>], exclude: Option<&str>, workers: usize) -> Result<Vec<f64>> {
        let l = self.model.n_features();
        parallel::map_indexed(1 << l, workers, |s| self.coalition_value(scaled, &mask_of(s, l), exclude))
            .into_iter()
            .collect()
    }

    /// Shapley values by full subset enumeration.
    pub fn shapley_exact(&self, query: &Case) -> Result<ShapleyResult> {
        self.shapley_exact_with(query, self.workers)
    }

    fn shapley_exact_with(&self, query: &Case, workers: usize) -> Result<ShapleyResult> {
        let l = self.model.n_features();
        if l > EXACT_LIMIT {
            return Err(Error::TooManyFeatures { features: l, limit: EXACT_LIMIT });
        }
        let scaled = self.model.scale_features(&query.features)?;
        let v = self.coalition_table(&scaled, self.exclude(query), workers)?;
        // weight[s] = s! (L - s - 1)! / L!
        let weight: Vec<f64> = (0..l).map(|s| 1.0 / (l as f64 * binomial(l - 1, s))).collect();
        let mut values = vec![0.0; l];
        for (j, phi) in values.iter_mut().enumerate() {
            let bit = 1usize << j;
            for s in (0..1usize << l).filter(|s| s & bit == 0) {
                *phi += weight[s.count_ones() as usize] * (v[s | bit] - v[s]);
            }
        }
        Ok(finish(values, vec![0.0; l], v[0], v[(1 << l) - 1], ShapleyMode::Exact))
    }

    /// Permutation-sampling estimate with per-feature standard errors.
    pub fn shapley_mc(&self, query: &Case, samples: usize, seed: u64) -> Result<ShapleyResult> {
        self.shapley_mc_with(query, samples, seed, self.workers)
    }

    fn shapley_mc_with(&self, query: &Case, samples: usize, seed: u64, workers: usize) -> Result<ShapleyResult> {
        if samples == 0 {
            return Err(Error::InvalidParameter("Monte Carlo Shapley needs at least one permutation".into()));
        }
        let l = self.model.n_features();
        let scaled = self.model.scale_features(&query.features)?;
        let exclude = self.exclude(query);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let permutations: Vec<Vec<usize>> = (0..samples)
            .map(|_| {
                let mut p: Vec<usize> = (0..l).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();

        let table = if l <= TABULATE_LIMIT { Some(self.coalition_table(&scaled, exclude, workers)?) } else { None };
        let baseline = self.model.baseline();
        let contributions: Vec<Result<Vec<f64>>> = parallel::map_indexed(samples, workers, |p| {
            let mut delta = vec![0.0; l];
            let mut mask = vec![false; l];
            let mut bits = 0usize;
            let mut prev = baseline;
            for &j in &permutations[p] {
                mask[j] = true;
                bits |= 1 << j;
                let cur = match &table {
                    Some(t) => t[bits],
                    None => self.coalition_value(&scaled, &mask, exclude)?,
                };
                delta[j] = cur - prev;
                prev = cur;
            }
            Ok(delta)
        });
        let contributions = contributions.into_iter().collect::<Result<Vec<_>>>()?;

        let n = samples as f64;
        let mut values = vec![0.0; l];
        let mut std_errors = vec![0.0; l];
        for j in 0..l {
            let mean = contributions.iter().map(|d| d[j]).sum::<f64>() / n;
            values[j] = mean;
            if samples > 1 {
                let var = contributions.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                std_errors[j] = (var / n).sqrt();
            }
        }
        let full = match &table {
            Some(t) => t[(1 << l) - 1],
            None => self.coalition_value(&scaled, &vec![true; l], exclude)?,
        };
        Ok(finish(values, std_errors, baseline, full, ShapleyMode::MonteCarlo { samples, seed }))
    }

    pub fn shapley(&self, query: &Case, mode: ShapleyMode) -> Result<ShapleyResult> {
        match mode {
            ShapleyMode::Exact => self.shapley_exact(query),
            ShapleyMode::MonteCarlo { samples, seed } => self.shapley_mc(query, samples, seed),
        }
    }

    /// Mean `|phi_j|` over the cases of `data`, as `(feature, value)` sorted
    /// by descending value, ties by feature index.
    pub fn mean_abs_shapley(&self, data: &Dataset, mode: ShapleyMode) -> Result<Vec<(usize, f64)>> {
        data.check_schema(&self.model.schema)?;
        let l = self.model.n_features();
        let per_case: Vec<Result<ShapleyResult>> = parallel::map_indexed(data.len(), self.workers, |i| match mode {
            ShapleyMode::Exact => self.shapley_exact_with(&data.cases[i], 1),
            ShapleyMode::MonteCarlo { samples, seed } => self.shapley_mc_with(&data.cases[i], samples, seed, 1),
        });
        let mut mean = vec![0.0; l];
        for r in per_case {
            for (m, v) in mean.iter_mut().zip(r?.values) {
                *m += v.abs() / data.len() as f64;
            }
        }
        let mut ranking: Vec<(usize, f64)> = mean.into_iter().enumerate().collect();
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(ranking)
    }

    /// The `k` nearest references of `query` next to it in original units.
    pub fn explain_neighbors(&self, query: &Case, k: usize) -> Result<NeighborTable> {
        if k > self.model.k {
            return Err(Error::InvalidParameter(format!("k = {k} exceeds the model's K = {}", self.model.k)));
        }
        let scaled = self.model.scale_features(&query.features)?;
        let neighbors = self.model.neighbors_with(&self.model.similarity, &scaled, k, self.exclude(query))?;
        Ok(self.neighbor_table(query, &neighbors))
    }

    fn neighbor_table(&self, query: &Case, neighbors: &[Neighbor]) -> NeighborTable {
        let schema = &self.model.schema;
        let margin = ProfitMargin::locate(self.model);
        NeighborTable {
            features: (0..schema.len()).map(|j| schema.name(j).to_string()).collect(),
            descriptions: (0..schema.len()).map(|j| schema.description(j).to_string()).collect(),
            query_id: query.id.clone(),
            query: query.features.clone(),
            query_profit_margin: margin.and_then(|m| m.of(&query.features)),
            rows: neighbors
                .iter()
                .map(|n| {
                    let c = &self.model.references()[n.index];
                    NeighborRow {
                        id: c.id.clone(),
                        label: n.label,
                        similarity: n.similarity,
                        values: c.features.clone(),
                        profit_margin: margin.and_then(|m| m.of(&c.features)),
                    }
                })
                .collect(),
        }
    }

    /// Probabilities as the features in `ordering` are replaced one by one
    /// with `target`'s values, starting from `base`.
    pub fn whatif_accumulate(&self, base: &Case, target: &Case, ordering: &[usize]) -> Result<WhatIfTrajectory> {
        let l = self.model.n_features();
        let mut seen = HashSet::new();
        for &j in ordering {
            if j >= l {
                return Err(Error::UnknownFeature(format!("feature index {j}")));
            }
            if !seen.insert(j) {
                return Err(Error::InvalidParameter(format!(
                    "feature {} appears twice in the ordering",
                    self.model.schema.name(j)
                )));
            }
        }
        if target.features.len() != l {
            return Err(Error::LengthMismatch { expected: l, actual: target.features.len() });
        }
        let mut hybrids = Vec::with_capacity(ordering.len() + 1);
        let mut current = base.clone();
        hybrids.push(current.clone());
        for &j in ordering {
            current.features[j] = target.features[j];
            hybrids.push(current.clone());
        }
        let exclude_self = self.exclude_self;
        let probabilities = parallel::map_indexed(hybrids.len(), self.workers, |i| {
            self.model.predict_case(&hybrids[i], exclude_self).map(|p| p.probability)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        let steps = probabilities
            .into_iter()
            .enumerate()
            .map(|(i, probability)| match i {
                0 => WhatIfStep { feature: None, name: None, value: None, probability },
                _ => {
                    let j = ordering[i - 1];
                    WhatIfStep {
                        feature: Some(j),
                        name: Some(self.model.schema.name(j).to_string()),
                        value: target.features[j],
                        probability,
                    }
                }
            })
            .collect();
        Ok(WhatIfTrajectory { base_id: base.id.clone(), target_id: target.id.clone(), steps })
    }

    /// Relevance percentages of the model's global weights.
    pub fn relevance(&self) -> Vec<FeatureRelevance> {
        let schema = &self.model.schema;
        relevance_percent(&self.model.similarity.weights)
            .into_iter()
            .enumerate()
            .map(|(j, percent)| FeatureRelevance {
                feature: schema.name(j).to_string(),
                description: schema.description(j).to_string(),
                percent,
            })
            .collect()
    }

    /// Prediction, all `K` neighbors, relevance and optional Shapley values
    /// and what-if trajectory.
    pub fn report(
        &self,
        query: &Case,
        shapley: Option<ShapleyMode>,
        whatif: Option<(&Case, &[usize])>,
    ) -> Result<ExplanationReport> {
        let prediction = self.model.predict_case(query, self.exclude_self)?;
        Ok(ExplanationReport {
            query_id: query.id.clone(),
            label: prediction.label,
            probability: prediction.probability,
            k: self.model.k,
            neighbors: self.neighbor_table(query, &prediction.neighbors),
            relevance: self.relevance(),
            shapley: shapley.map(|mode| self.shapley(query, mode)).transpose()?,
            whatif: whatif.map(|(target, order)| self.whatif_accumulate(query, target, order)).transpose()?,
            note: SUBSET_NOTE.to_string(),
        })
    }
}

fn mask_of(bits: usize, l: usize) -> Vec<bool> {
    (0..l).map(|j| bits & (1 << j) != 0).collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn finish(values: Vec<f64>, std_errors: Vec<f64>, baseline: f64, full: f64, mode: ShapleyMode) -> ShapleyResult {
    let residual = values.iter().sum::<f64>() - (full - baseline);
    ShapleyResult { values, std_errors, baseline, full, mode, residual }
}

/// Positions of the sales and net income columns, when the schema has them.
#[derive(Debug, Clone, Copy)]
struct ProfitMargin {
    sales: usize,
    net_income: usize,
}

impl ProfitMargin {
    fn locate(model: &TrainedModel) -> Option<Self> {
        Some(ProfitMargin { sales: model.schema.position("Sales")?, net_income: model.schema.position("Net income")? })
    }

    fn of(&self, values: &[Option<f64>]) -> Option<f64> {
        profit_margin(values[self.net_income], values[self.sales])
    }
}

/// Net income over sales in percent; `None` when either is missing or sales
/// are zero.
pub fn profit_margin(net_income: Option<f64>, sales: Option<f64>) -> Option<f64> {
    match (net_income, sales) {
        (Some(n), Some(s)) if s != 0.0 => Some(100.0 * n / s),
        _ => None,
    }
}

/// `points` samples of feature `j`'s local similarity against the signed
/// difference `c - q` over `[-1, 1]` on the scaled axis.
pub fn local_function_curve(model: &TrainedModel, j: usize, points: usize) -> Result<Vec<(f64, f64)>> {
    if j >= model.n_features() {
        return Err(Error::UnknownFeature(format!("feature index {j}")));
    }
    if points < 2 {
        return Err(Error::InvalidParameter("a curve needs at least two points".into()));
    }
    let (a, b) = model.similarity.exponents(j);
    let branch = model.similarity.branch;
    Ok((0..points)
        .map(|i| {
            let diff = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
            (diff, local_sim_with(0.0, diff, a, b, 1.0, branch))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::toy_model;

    #[test]
    fn profit_margin_fixture() {
        // Net income 89,476.07 over the worked example's sales figure.
        let m = profit_margin(Some(89_476.07), Some(4_233_270.93)).unwrap();
        assert!((m - 2.11).abs() < 0.005, "{m}");
        let table5 = profit_margin(Some(89_476.07), Some(4_223_270.93)).unwrap();
        assert!((table5 - 2.11).abs() < 0.01, "{table5}");
        assert_eq!(profit_margin(Some(1.0), None), None);
    }

    #[test]
    fn empty_and_full_coalitions() {
        let model = toy_model(3);
        let ex = Explainer::new(&model).with_workers(1);
        let q = Case::new("q", vec![Some(2.0), Some(3.0)], None);
        assert_eq!(ex.restricted_predict_proba(&q, &[false, false]).unwrap(), 0.5);
        assert_eq!(ex.restricted_predict_proba(&q, &[true, true]).unwrap(), model.predict_proba(&q).unwrap());
    }

    #[test]
    fn curve_shape() {
        let model = toy_model(1);
        let c = local_function_curve(&model, 0, 201).unwrap();
        assert_eq!(c.len(), 201);
        assert_eq!(c[100], (0.0, 1.0));
        for (d, s) in &c {
            assert!((s - (1.0 - d.abs())).abs() < 1e-12);
        }
        assert!(local_function_curve(&model, 5, 201).is_err());
    }

    #[test]
    fn whatif_rejects_duplicates() {
        let model = toy_model(3);
        let ex = Explainer::new(&model);
        let a = model.references()[0].clone();
        let b = model.references()[5].clone();
        assert!(ex.whatif_accumulate(&a, &b, &[0, 0]).is_err());
        assert!(ex.whatif_accumulate(&a, &b, &[2]).is_err());
        let t = ex.whatif_accumulate(&a, &b, &[]).unwrap();
        assert_eq!(t.probabilities(), vec![model.predict_proba(&a).unwrap()]);
    }
}
