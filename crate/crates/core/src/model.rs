//! A trained CBR system: similarity model, `K`, scaling, rank weights and the
//! reference base it retrieves from, plus its versioned JSON file format.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Case, Dataset, FeatureSchema, Label, ScalingParams};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::parallel;
use crate::probability::{predict_proba_labels, ProbFit};
use crate::retrieval::{majority_vote, top_k, Neighbor};
use crate::similarity::{GlobalWeights, LocalParams, SimilarityModel, Variant};
use crate::weighting::ScoringMethod;

pub const MODEL_FORMAT: &str = "acbr-model";
pub const MODEL_VERSION: u32 = 1;

/// Outcome of one scoring method during model selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub method: ScoringMethod,
    pub weights: GlobalWeights,
    pub local: LocalParams,
    /// Cross-validated training metric of the candidate.
    pub cv_score: f64,
    /// Same weights with unit exponents.
    pub epcbr_score: f64,
    /// Objective evaluations spent by the optimizer.
    pub evaluations: usize,
    /// Best optimizer cost after initialization and after each iteration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub metric: Metric,
    pub folds: usize,
    pub seed: u64,
    /// Cross-validated accuracy of every `K` on the grid.
    pub k_scores: Vec<(usize, f64)>,
    /// Equal weights and unit exponents at the chosen `K`.
    pub ewcbr_score: f64,
    pub candidates: Vec<CandidateScore>,
    pub log: Vec<String>,
}

/// Serialized form of [`TrainedModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    schema: FeatureSchema,
    scaling: ScalingParams,
    similarity: SimilarityModel,
    k: usize,
    scoring: Option<ScoringMethod>,
    cv_score: f64,
    cv_scores: BTreeMap<String, f64>,
    probability: Option<ProbFit>,
    training: TrainingSummary,
    references: Vec<Case>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct TrainedModel {
    pub schema: FeatureSchema,
    pub scaling: ScalingParams,
    pub similarity: SimilarityModel,
    pub k: usize,
    /// Scoring method behind the global weights; `None` for equal weights.
    pub scoring: Option<ScoringMethod>,
    /// Cross-validated training metric of the returned parameters.
    pub cv_score: f64,
    /// Every metric at the returned parameters, same folds.
    pub cv_scores: BTreeMap<String, f64>,
    pub probability: Option<ProbFit>,
    pub training: TrainingSummary,
    /// Reference base in original units.
    references: Vec<Case>,
    scaled: Vec<Vec<Option<f64>>>,
    labels: Vec<Label>,
}

/// Per-query output of [`TrainedModel::predict_case`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
    pub probability: f64,
    pub neighbors: Vec<Neighbor>,
}

impl TrainedModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        schema: FeatureSchema,
        scaling: ScalingParams,
        similarity: SimilarityModel,
        k: usize,
        scoring: Option<ScoringMethod>,
        cv_score: f64,
        cv_scores: BTreeMap<String, f64>,
        probability: Option<ProbFit>,
        training: TrainingSummary,
        references: Vec<Case>,
    ) -> Result<Self> {
        let l = schema.len();
        similarity.validate()?;
        for len in [scaling.len(), similarity.n_features()] {
            if len != l {
                return Err(Error::LengthMismatch { expected: l, actual: len });
            }
        }
        if references.is_empty() {
            return Err(Error::EmptyData);
        }
        if k == 0 || k > references.len() {
            return Err(Error::KTooLarge { k, available: references.len() });
        }
        if let Some(fit) = &probability {
            if fit.weights.k() != k {
                return Err(Error::ModelFormat(format!("rank weights cover K = {}, model uses K = {k}", fit.weights.k())));
            }
        }
        let mut labels = Vec::with_capacity(references.len());
        let mut scaled = Vec::with_capacity(references.len());
        for c in &references {
            if c.features.len() != l {
                return Err(Error::LengthMismatch { expected: l, actual: c.features.len() });
            }
            labels.push(c.label.ok_or_else(|| Error::Unlabeled(c.id.clone()))?);
            scaled.push(scaling.scale_case(c).features);
        }
        Ok(TrainedModel {
            schema,
            scaling,
            similarity,
            k,
            scoring,
            cv_score,
            cv_scores,
            probability,
            training,
            references,
            scaled,
            labels,
        })
    }

    pub fn variant(&self) -> Variant {
        self.similarity.variant
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn references(&self) -> &[Case] {
        &self.references
    }

    pub fn reference_labels(&self) -> &[Label] {
        &self.labels
    }

    /// Scaled feature vectors of the reference base.
    pub fn scaled_references(&self) -> &[Vec<Option<f64>>] {
        &self.scaled
    }

    pub fn reference_dataset(&self) -> Result<Dataset> {
        Dataset::new(self.schema.clone(), self.references.clone(), "model reference base")
    }

    /// `P(insolvent)` from ranked neighbor labels: the fitted rank weights,
    /// or the insolvent share when none were fitted.
    pub fn proba_from_labels(&self, labels: &[Label]) -> Result<f64> {
        match &self.probability {
            Some(fit) => predict_proba_labels(labels, &fit.weights),
            None if labels.is_empty() => Err(Error::InvalidParameter("no neighbors".into())),
            None => Ok(labels.iter().filter(|l| l.is_insolvent()).count() as f64 / labels.len() as f64),
        }
    }

    /// Insolvent share of the reference base.
    pub fn baseline(&self) -> f64 {
        self.labels.iter().filter(|l| l.is_insolvent()).count() as f64 / self.labels.len() as f64
    }

    pub fn scale_features(&self, features: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
        if features.len() != self.n_features() {
            return Err(Error::LengthMismatch { expected: self.n_features(), actual: features.len() });
        }
        Ok(features.iter().enumerate().map(|(j, v)| v.map(|x| self.scaling.scale_value(j, x))).collect())
    }

    /// `k` nearest references of a scaled query under `similarity`, skipping
    /// references whose id equals `exclude`.
    pub fn neighbors_with(
        &self,
        similarity: &SimilarityModel,
        query: &[Option<f64>],
        k: usize,
        exclude: Option<&str>,
    ) -> Result<Vec<Neighbor>> {
        let views: Vec<&[Option<f64>]> = self.scaled.iter().map(Vec::as_slice).collect();
        let mut sims = vec![0.0; views.len()];
        similarity.similarity_row(query, &views, &mut sims);
        match exclude {
            None => top_k(&sims, &self.labels, k),
            Some(id) => {
                // Excluded references sink below every real similarity.
                for (s, c) in sims.iter_mut().zip(&self.references) {
                    if c.id == id {
                        *s = f64::NEG_INFINITY;
                    }
                }
                let available = sims.iter().filter(|s| s.is_finite()).count();
                if k > available {
                    return Err(Error::KTooLarge { k, available });
                }
                top_k(&sims, &self.labels, k)
            }
        }
    }

    /// `P(insolvent)` of a scaled query under `similarity`.
    pub fn proba_with(&self, similarity: &SimilarityModel, query: &[Option<f64>], exclude: Option<&str>) -> Result<f64> {
        let nb = self.neighbors_with(similarity, query, self.k, exclude)?;
        let labels: Vec<Label> = nb.iter().map(|n| n.label).collect();
        self.proba_from_labels(&labels)
    }

    /// Neighbors, vote and probability for a case in original units.
    pub fn predict_case(&self, case: &Case, exclude_self: bool) -> Result<Prediction> {
        let query = self.scale_features(&case.features)?;
        let exclude = exclude_self.then_some(case.id.as_str());
        let neighbors = self.neighbors_with(&self.similarity, &query, self.k, exclude)?;
        let labels: Vec<Label> = neighbors.iter().map(|n| n.label).collect();
        Ok(Prediction {
            id: case.id.clone(),
            label: majority_vote(labels.iter().copied()),
            probability: self.proba_from_labels(&labels)?,
            neighbors,
        })
    }

    pub fn predict(&self, case: &Case) -> Result<Label> {
        self.predict_case(case, false).map(|p| p.label)
    }

    pub fn predict_proba(&self, case: &Case) -> Result<f64> {
        self.predict_case(case, false).map(|p| p.probability)
    }

    pub fn predict_batch(&self, data: &Dataset, exclude_self: bool, workers: usize) -> Result<Vec<Prediction>> {
        data.check_schema(&self.schema)?;
        parallel::map_indexed(data.len(), workers, |i| self.predict_case(&data.cases[i], exclude_self))
            .into_iter()
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        TrainedModel::from_json(&text)
    }
}

impl TryFrom<ModelFile> for TrainedModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unexpected format tag {:?}", f.format)));
        }
        if f.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported model version {}", f.version)));
        }
        TrainedModel::new(
            f.schema,
            f.scaling,
            f.similarity,
            f.k,
            f.scoring,
            f.cv_score,
            f.cv_scores,
            f.probability,
            f.training,
            f.references,
        )
    }
}

impl From<TrainedModel> for ModelFile {
    fn from(m: TrainedModel) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            schema: m.schema,
            scaling: m.scaling,
            similarity: m.similarity,
            k: m.k,
            scoring: m.scoring,
            cv_score: m.cv_score,
            cv_scores: m.cv_scores,
            probability: m.probability,
            training: m.training,
            references: m.references,
        }
    }
}
