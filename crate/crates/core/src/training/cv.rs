//! Frozen stratified folds and the cross-validated retrieval score.
//!
//! Each fold serves once as the query set while the remaining folds form the
//! reference base. The folds are fixed at construction, so the score is a
//! deterministic function of the similarity model and `K`.

use crate::dataset::{stratified_folds, Dataset, Label};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, confusion, Metric};
use crate::parallel;
use crate::retrieval::{majority_vote, top_k_indices};
use crate::similarity::{BranchConvention, GlobalWeights, LocalParams, SimilarityModel};

/// Largest cache, in stored values, that [`CrossValidator::polynomial_cache`]
/// will build (400 MB of `f32`).
pub const POLYNOMIAL_CACHE_LIMIT: usize = 100_000_000;

/// Log-bases `ln((D - |q - c|) / D)` of every query/reference pair of the
/// folds. An exponent search then costs one `exp` per term instead of a
/// `powf`. Values are rounded to `f32`, so scores may differ from the exact
/// path in the last bits; callers re-score their final answer exactly.
#[derive(Debug, Clone)]
pub struct PolynomialCache {
    features: usize,
    /// Start of each query's block.
    offsets: Vec<usize>,
    /// Signed log-base per term: `<= 0` selects exponent `a`, `> 0` holds
    /// the negated log-base for exponent `b`, NaN marks a missing value.
    values: Vec<f32>,
    missing_sq: f64,
}

#[derive(Debug, Clone)]
pub struct CrossValidator {
    features: Vec<Vec<Option<f64>>>,
    labels: Vec<Label>,
    folds: Vec<Vec<usize>>,
    references: Vec<Vec<usize>>,
    fold_of: Vec<usize>,
}

impl CrossValidator {
    /// Stratified, seeded folds over a labeled, scaled dataset.
    pub fn new(data: &Dataset, folds: usize, seed: u64) -> Result<Self> {
        let labels = data.labels()?;
        let assignment = stratified_folds(&labels, folds, seed)?;
        let features = data.cases.iter().map(|c| c.features.clone()).collect();
        CrossValidator::from_parts(features, labels, assignment)
    }

    pub fn from_parts(features: Vec<Vec<Option<f64>>>, labels: Vec<Label>, folds: Vec<Vec<usize>>) -> Result<Self> {
        let n = labels.len();
        if features.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: features.len() });
        }
        let mut fold_of = vec![usize::MAX; n];
        for (f, members) in folds.iter().enumerate() {
            for &i in members {
                if i >= n || fold_of[i] != usize::MAX {
                    return Err(Error::InvalidParameter("folds must partition the cases".into()));
                }
                fold_of[i] = f;
            }
        }
        if fold_of.contains(&usize::MAX) {
            return Err(Error::InvalidParameter("folds must partition the cases".into()));
        }
        let references = (0..folds.len())
            .map(|f| (0..n).filter(|&i| fold_of[i] != f).collect())
            .collect();
        Ok(CrossValidator { features, labels, folds, references, fold_of })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    /// For every case, the global indices of its `k` nearest references
    /// within its fold's reference base, in rank order.
    pub fn neighbors(&self, model: &SimilarityModel, k: usize, workers: usize) -> Result<Vec<Vec<usize>>> {
        let smallest = self.references.iter().map(Vec::len).min().unwrap_or(0);
        if k > smallest {
            return Err(Error::KTooLarge { k, available: smallest });
        }
        let views: Vec<Vec<&[Option<f64>]>> = self
            .references
            .iter()
            .map(|refs| refs.iter().map(|&i| self.features[i].as_slice()).collect())
            .collect();
        let rows = parallel::map_indexed(self.len(), workers, |i| {
            let f = self.fold_of[i];
            let mut sims = vec![0.0; views[f].len()];
            model.similarity_row(&self.features[i], &views[f], &mut sims);
            top_k_indices(&sims, k)
                .expect("k checked against every reference base")
                .into_iter()
                .map(|r| self.references[f][r])
                .collect::<Vec<usize>>()
        });
        Ok(rows)
    }

    /// Mean per-fold `metric` of majority votes over the first `k` entries of
    /// precomputed neighbor lists.
    pub fn score_neighbors(&self, neighbors: &[Vec<usize>], k: usize, metric: Metric) -> Result<f64> {
        let mut total = 0.0;
        for (f, members) in self.folds.iter().enumerate() {
            let truth: Vec<Label> = members.iter().map(|&i| self.labels[i]).collect();
            if metric.needs_both_classes() {
                let pos = truth.iter().filter(|l| l.is_insolvent()).count();
                if pos == 0 || pos == truth.len() {
                    return Err(Error::SingleClassFold { fold: f, metric: metric.as_str().into() });
                }
            }
            let preds: Vec<Label> = members
                .iter()
                .map(|&i| majority_vote(neighbors[i][..k].iter().map(|&r| self.labels[r])))
                .collect();
            total += metric.value(&compute_metrics(&confusion(&preds, &truth)?, 1.0));
        }
        Ok(total / self.folds.len() as f64)
    }

    pub fn score(&self, model: &SimilarityModel, k: usize, metric: Metric, workers: usize) -> Result<f64> {
        let neighbors = self.neighbors(model, k, workers)?;
        self.score_neighbors(&neighbors, k, metric)
    }

    /// Builds the pair cache for polynomial variants under `model`'s ranges,
    /// branch convention and missing-value similarity. `None` when the cache
    /// would exceed [`POLYNOMIAL_CACHE_LIMIT`].
    pub fn polynomial_cache(&self, model: &SimilarityModel, workers: usize) -> Option<PolynomialCache> {
        let l = model.n_features();
        let total: usize = (0..self.len()).map(|i| self.references[self.fold_of[i]].len() * l).sum();
        if total > POLYNOMIAL_CACHE_LIMIT {
            return None;
        }
        let mut offsets = Vec::with_capacity(self.len());
        let mut acc = 0;
        for i in 0..self.len() {
            offsets.push(acc);
            acc += self.references[self.fold_of[i]].len() * l;
        }
        let blocks = parallel::map_indexed(self.len(), workers, |i| {
            let q = &self.features[i];
            let mut block = Vec::with_capacity(self.references[self.fold_of[i]].len() * l);
            for &r in &self.references[self.fold_of[i]] {
                let c = &self.features[r];
                for j in 0..l {
                    block.push(match (q[j], c[j]) {
                        (Some(q), Some(c)) => {
                            let d = model.ranges[j];
                            let base = if d > 0.0 { ((d - (q - c).abs()) / d).max(0.0) } else if q == c { 1.0 } else { 0.0 };
                            let use_a = match model.branch {
                                BranchConvention::QueryAbove => q >= c,
                                BranchConvention::QueryBelow => q <= c,
                            };
                            let ln = base.ln() as f32;
                            if use_a { ln } else { -ln }
                        }
                        _ => f32::NAN,
                    });
                }
            }
            block
        });
        Some(PolynomialCache {
            features: l,
            offsets,
            values: blocks.concat(),
            missing_sq: model.missing_sim * model.missing_sim,
        })
    }

    /// [`CrossValidator::neighbors`] for an ACBR model evaluated through
    /// `cache`.
    pub fn neighbors_cached(
        &self,
        cache: &PolynomialCache,
        weights: &GlobalWeights,
        local: &LocalParams,
        k: usize,
        workers: usize,
    ) -> Result<Vec<Vec<usize>>> {
        let l = cache.features;
        if weights.len() != l || local.len() != l {
            return Err(Error::LengthMismatch { expected: l, actual: weights.len().min(local.len()) });
        }
        let smallest = self.references.iter().map(Vec::len).min().unwrap_or(0);
        if k > smallest {
            return Err(Error::KTooLarge { k, available: smallest });
        }
        let w = weights.as_slice();
        let active: Vec<usize> = (0..l).filter(|&j| w[j] != 0.0).collect();
        let two_a: Vec<f64> = local.a.iter().map(|a| 2.0 * a).collect();
        let two_b: Vec<f64> = local.b.iter().map(|b| -2.0 * b).collect();
        Ok(parallel::map_indexed(self.len(), workers, |i| {
            let refs = &self.references[self.fold_of[i]];
            let block = &cache.values[cache.offsets[i]..cache.offsets[i] + refs.len() * l];
            let sims: Vec<f64> = block
                .chunks_exact(l)
                .map(|row| {
                    let mut acc = 0.0;
                    for &j in &active {
                        let v = f64::from(row[j]);
                        let sq = if v <= 0.0 {
                            (two_a[j] * v).exp()
                        } else if v > 0.0 {
                            (two_b[j] * v).exp()
                        } else {
                            cache.missing_sq
                        };
                        acc += w[j] * sq;
                    }
                    acc
                })
                .collect();
            top_k_indices(&sims, k)
                .expect("k checked against every reference base")
                .into_iter()
                .map(|r| refs[r])
                .collect()
        }))
    }

    /// `agreements[n][i]` is true when the `i`-th neighbor of case `n` shares
    /// its label.
    pub fn agreements(&self, neighbors: &[Vec<usize>], k: usize) -> Vec<Vec<bool>> {
        neighbors
            .iter()
            .enumerate()
            .map(|(n, row)| row[..k].iter().map(|&r| self.labels[r] == self.labels[n]).collect())
            .collect()
    }
}
