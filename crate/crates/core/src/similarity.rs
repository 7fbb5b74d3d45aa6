//! Local and global similarity measures for the six CBR variants and the
//! parallel query-by-reference similarity engine.
//!
//! All inputs are expected to be scaled into `[0, 1]`, so the feature range
//! `D_j` of the polynomial local similarity is 1 unless configured otherwise.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Case;
use crate::error::{Error, Result};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Variant {
    /// Learned weights, learned asymmetric polynomial exponents.
    Acbr,
    /// Weighted Euclidean distance.
    Ecbr,
    /// Weighted Manhattan distance.
    Mcbr,
    /// Grey coefficient degrees.
    Gcbr,
    /// Uniform weights, unit exponents.
    Ewcbr,
    /// Learned weights, unit exponents.
    Epcbr,
}

impl Variant {
    pub const ALL: [Variant; 6] =
        [Variant::Ecbr, Variant::Mcbr, Variant::Gcbr, Variant::Ewcbr, Variant::Epcbr, Variant::Acbr];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Acbr => "ACBR",
            Variant::Ecbr => "ECBR",
            Variant::Mcbr => "MCBR",
            Variant::Gcbr => "GCBR",
            Variant::Ewcbr => "EWCBR",
            Variant::Epcbr => "EPCBR",
        }
    }

    /// Variants built on the square-root-of-weighted-squares aggregation of
    /// polynomial local similarities.
    pub fn is_polynomial(self) -> bool {
        matches!(self, Variant::Acbr | Variant::Ewcbr | Variant::Epcbr)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown variant `{s}`")))
    }
}

/// Which exponent applies on which side of the difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchConvention {
    /// `a` when `q >= c`, `b` when `q < c`.
    #[default]
    QueryAbove,
    /// `a` when `q <= c`, `b` when `q > c`.
    QueryBelow,
}

/// Polynomial local similarity `((D - |q - c|) / D)^e` where `e = a` when
/// `q >= c` and `e = b` otherwise.
pub fn local_sim_asym(q: f64, c: f64, a: f64, b: f64, range: f64) -> f64 {
    local_sim_with(q, c, a, b, range, BranchConvention::QueryAbove)
}

#[inline]
pub fn local_sim_with(q: f64, c: f64, a: f64, b: f64, range: f64, branch: BranchConvention) -> f64 {
    let use_a = match branch {
        BranchConvention::QueryAbove => q >= c,
        BranchConvention::QueryBelow => q <= c,
    };
    let exponent = if use_a { a } else { b };
    let base = if range > 0.0 { ((range - (q - c).abs()) / range).max(0.0) } else if q == c { 1.0 } else { 0.0 };
    if base == 1.0 {
        1.0
    } else {
        base.powf(exponent)
    }
}

/// Per-feature exponents of the asymmetric local similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalParams {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LocalParams {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch { expected: a.len(), actual: b.len() });
        }
        if let Some(v) = a.iter().chain(&b).find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParameter(format!("exponent {v} must be positive and finite")));
        }
        Ok(LocalParams { a, b })
    }

    pub fn ones(l: usize) -> Self {
        LocalParams { a: vec![1.0; l], b: vec![1.0; l] }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// From a flat `[a_1..a_L, b_1..b_L]` search position.
    pub fn from_position(x: &[f64]) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(Error::InvalidParameter("position length must be even".into()));
        }
        let (a, b) = x.split_at(x.len() / 2);
        LocalParams::new(a.to_vec(), b.to_vec())
    }

    pub fn to_position(&self) -> Vec<f64> {
        self.a.iter().chain(&self.b).copied().collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.a == self.b
    }
}

/// Non-negative feature weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GlobalWeights(Vec<f64>);

impl GlobalWeights {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidParameter("weights must not be empty".into()));
        }
        if let Some(v) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("weight {v} must be non-negative and finite")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!("weights sum to {sum}, expected 1")));
        }
        Ok(GlobalWeights(w))
    }

    pub fn uniform(l: usize) -> Self {
        GlobalWeights(vec![1.0 / l as f64; l])
    }

    /// Normalizes raw relevance scores; negatives clamp to zero. Returns
    /// `None` when nothing positive remains.
    pub fn from_scores(scores: &[f64]) -> Option<Self> {
        let clamped: Vec<f64> = scores.iter().map(|s| if s.is_finite() && *s > 0.0 { *s } else { 0.0 }).collect();
        let total: f64 = clamped.iter().sum();
        (total > 0.0).then(|| GlobalWeights(clamped.iter().map(|s| s / total).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weights renormalized over the features with `mask[j]` set; the rest
    /// become zero. `None` when the kept features carry no weight.
    pub fn restricted(&self, mask: &[bool]) -> Option<GlobalWeights> {
        let total: f64 = self.0.iter().zip(mask).filter(|(_, &m)| m).map(|(w, _)| *w).sum();
        (total > 0.0).then(|| {
            GlobalWeights(self.0.iter().zip(mask).map(|(w, &m)| if m { w / total } else { 0.0 }).collect())
        })
    }
}

impl TryFrom<Vec<f64>> for GlobalWeights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        GlobalWeights::new(v)
    }
}

impl From<GlobalWeights> for Vec<f64> {
    fn from(w: GlobalWeights) -> Self {
        w.0
    }
}

/// Per-query `inf_j` / `sup_j` of `|q_j - c_j|` over the reference base.
#[derive(Debug, Clone, PartialEq)]
pub struct GreyContext {
    pub inf: Vec<f64>,
    pub sup: Vec<f64>,
}

impl GreyContext {
    pub fn new<'a>(query: &[Option<f64>], references: impl IntoIterator<Item = &'a [Option<f64>]>) -> Self {
        let l = query.len();
        let mut inf = vec![f64::INFINITY; l];
        let mut sup = vec![0.0f64; l];
        let mut any = false;
        for c in references {
            any = true;
            for j in 0..l {
                let d = distance(query[j], c[j]);
                inf[j] = inf[j].min(d);
                sup[j] = sup[j].max(d);
            }
        }
        if !any {
            inf.iter_mut().for_each(|v| *v = 0.0);
        }
        GreyContext { inf, sup }
    }

    /// Grey coefficient degree of feature `j` at distance `dist`; defined as
    /// 1 when both the distance and `sup_j` are zero.
    pub fn degree(&self, j: usize, dist: f64) -> f64 {
        let den = 2.0 * dist + self.sup[j];
        if den == 0.0 {
            1.0
        } else {
            (2.0 * self.inf[j] + self.sup[j]) / den
        }
    }
}

/// `|q - c|`, or the maximal scaled distance 1 when either side is missing.
#[inline]
fn distance(q: Option<f64>, c: Option<f64>) -> f64 {
    match (q, c) {
        (Some(q), Some(c)) => (q - c).abs(),
        _ => 1.0,
    }
}

/// Variant tag plus every parameter needed to compare two scaled cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityModel {
    pub variant: Variant,
    pub weights: GlobalWeights,
    /// Exponents; only read by ACBR. EWCBR and EPCBR always use 1.
    pub local: LocalParams,
    /// `D_j` of the polynomial local similarity.
    pub ranges: Vec<f64>,
    /// Local similarity assigned when either value is missing.
    pub missing_sim: f64,
    #[serde(default)]
    pub branch: BranchConvention,
}

impl SimilarityModel {
    pub fn new(variant: Variant, weights: GlobalWeights, local: LocalParams) -> Result<Self> {
        let l = weights.len();
        let model = SimilarityModel {
            variant,
            weights,
            local,
            ranges: vec![1.0; l],
            missing_sim: 0.0,
            branch: BranchConvention::default(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn acbr(weights: GlobalWeights, local: LocalParams) -> Result<Self> {
        SimilarityModel::new(Variant::Acbr, weights, local)
    }

    pub fn ewcbr(l: usize) -> Self {
        SimilarityModel::new(Variant::Ewcbr, GlobalWeights::uniform(l), LocalParams::ones(l)).expect("valid")
    }

    /// A model of `variant` using `weights`; exponents are set to one.
    pub fn with_weights(variant: Variant, weights: GlobalWeights) -> Self {
        let l = weights.len();
        let weights = if variant == Variant::Ewcbr { GlobalWeights::uniform(l) } else { weights };
        SimilarityModel::new(variant, weights, LocalParams::ones(l)).expect("valid")
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.weights.len();
        for len in [self.local.len(), self.ranges.len()] {
            if len != l {
                return Err(Error::LengthMismatch { expected: l, actual: len });
            }
        }
        if !(0.0..=1.0).contains(&self.missing_sim) {
            return Err(Error::InvalidParameter(format!("missing similarity {} not in [0, 1]", self.missing_sim)));
        }
        if self.ranges.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidParameter("feature ranges must be finite and non-negative".into()));
        }
        LocalParams::new(self.local.a.clone(), self.local.b.clone())?;
        Ok(())
    }

    /// Exponents `(a_j, b_j)` in effect for this variant.
    #[inline]
    pub fn exponents(&self, j: usize) -> (f64, f64) {
        if self.variant == Variant::Acbr {
            (self.local.a[j], self.local.b[j])
        } else {
            (1.0, 1.0)
        }
    }

    /// Local similarity of feature `j` for the polynomial variants.
    #[inline]
    pub fn local_sim(&self, j: usize, q: Option<f64>, c: Option<f64>) -> f64 {
        match (q, c) {
            (Some(q), Some(c)) => {
                let (a, b) = self.exponents(j);
                local_sim_with(q, c, a, b, self.ranges[j], self.branch)
            }
            _ => self.missing_sim,
        }
    }

    /// Same model restricted to the features in `mask`, weights renormalized
    /// over them. `None` when the kept features carry no weight.
    pub fn restricted(&self, mask: &[bool]) -> Option<SimilarityModel> {
        self.weights.restricted(mask).map(|weights| SimilarityModel { weights, ..self.clone() })
    }

    /// Similarity of two scaled feature vectors. GCBR needs the query's grey
    /// context; other variants ignore it.
    pub fn similarity(&self, q: &[Option<f64>], c: &[Option<f64>], grey: Option<&GreyContext>) -> f64 {
        let w = self.weights.as_slice();
        match self.variant {
            Variant::Acbr | Variant::Ewcbr | Variant::Epcbr => {
                let mut acc = 0.0;
                for j in 0..w.len() {
                    if w[j] != 0.0 {
                        let s = self.local_sim(j, q[j], c[j]);
                        acc += w[j] * s * s;
                    }
                }
                acc.sqrt()
            }
            Variant::Ecbr => {
                let mut acc = 0.0;
                for j in 0..w.len() {
                    let t = w[j] * distance(q[j], c[j]);
                    acc += t * t;
                }
                1.0 / (1.0 + acc.sqrt())
            }
            Variant::Mcbr => {
                let acc: f64 = (0..w.len()).map(|j| w[j] * distance(q[j], c[j])).sum();
                1.0 / (1.0 + acc)
            }
            Variant::Gcbr => {
                let grey = grey.expect("GCBR similarity requires a grey context");
                let mut acc = 0.0;
                for j in 0..w.len() {
                    let t = w[j] * grey.degree(j, distance(q[j], c[j]));
                    acc += t * t;
                }
                acc
            }
        }
    }

    /// Similarities of one query against every reference, written to `out`.
    pub fn similarity_row(&self, query: &[Option<f64>], references: &[&[Option<f64>]], out: &mut [f64]) {
        let grey = (self.variant == Variant::Gcbr).then(|| GreyContext::new(query, references.iter().copied()));
        for (o, c) in out.iter_mut().zip(references) {
            *o = self.similarity(query, c, grey.as_ref());
        }
    }
}

fn check_len(q: &[Option<f64>], c: &[Option<f64>], l: usize) -> Result<()> {
    for len in [q.len(), c.len()] {
        if len != l {
            return Err(Error::LengthMismatch { expected: l, actual: len });
        }
    }
    Ok(())
}

/// Square root of the weighted sum of squared polynomial local similarities.
pub fn global_sim_acbr(q: &Case, c: &Case, model: &SimilarityModel) -> Result<f64> {
    if !model.variant.is_polynomial() {
        return Err(Error::InvalidParameter(format!("{} is not a polynomial variant", model.variant)));
    }
    check_len(&q.features, &c.features, model.n_features())?;
    Ok(model.similarity(&q.features, &c.features, None))
}

/// `1 / (1 + sqrt(sum_j (w_j |q_j - c_j|)^2))`.
pub fn sim_ecbr(q: &Case, c: &Case, weights: &GlobalWeights) -> Result<f64> {
    check_len(&q.features, &c.features, weights.len())?;
    Ok(SimilarityModel::with_weights(Variant::Ecbr, weights.clone()).similarity(&q.features, &c.features, None))
}

/// `1 / (1 + sum_j w_j |q_j - c_j|)`.
pub fn sim_mcbr(q: &Case, c: &Case, weights: &GlobalWeights) -> Result<f64> {
    check_len(&q.features, &c.features, weights.len())?;
    Ok(SimilarityModel::with_weights(Variant::Mcbr, weights.clone()).similarity(&q.features, &c.features, None))
}

/// `sum_j (w_j * degree_j)^2` with degrees from the query's grey context.
pub fn sim_gcbr(q: &Case, c: &Case, grey: &GreyContext, weights: &GlobalWeights) -> Result<f64> {
    check_len(&q.features, &c.features, weights.len())?;
    if grey.inf.len() != weights.len() {
        return Err(Error::LengthMismatch { expected: weights.len(), actual: grey.inf.len() });
    }
    Ok(SimilarityModel::with_weights(Variant::Gcbr, weights.clone()).similarity(&q.features, &c.features, Some(grey)))
}

/// Dense query-by-reference similarity matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
}

impl SimilarityMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// CSV with query ids as rows and reference ids as columns.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![String::from("query")];
        header.extend(self.col_ids.iter().cloned());
        w.write_record(&header)?;
        for r in 0..self.rows {
            let mut rec = vec![self.row_ids[r].clone()];
            rec.extend(self.row(r).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| Error::Io { path: "<similarity csv>".into(), source })?;
        Ok(())
    }
}

/// All query/reference similarities, rows split across `workers` threads.
/// The result is identical for every worker count.
pub fn batch_similarity(
    queries: &[Case],
    references: &[Case],
    model: &SimilarityModel,
    workers: usize,
) -> Result<SimilarityMatrix> {
    let l = model.n_features();
    for c in queries.iter().chain(references) {
        if c.features.len() != l {
            return Err(Error::SchemaMismatch(format!(
                "case `{}` has {} features, model has {l}",
                c.id,
                c.features.len()
            )));
        }
    }
    let refs: Vec<&[Option<f64>]> = references.iter().map(|c| c.features.as_slice()).collect();
    let cols = references.len();
    let mut values = vec![0.0; queries.len() * cols];
    parallel::fill_rows(&mut values, cols, workers, |r, row| {
        model.similarity_row(&queries[r].features, &refs, row);
    });
    Ok(SimilarityMatrix {
        rows: queries.len(),
        cols,
        values,
        row_ids: queries.iter().map(|c| c.id.clone()).collect(),
        col_ids: references.iter().map(|c| c.id.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn case(v: &[f64]) -> Case {
        Case::new("x", v.iter().map(|x| Some(*x)).collect(), None)
    }

    #[test]
    fn worked_example_local_values() {
        assert_abs_diff_eq!(local_sim_asym(0.0175, 0.0125, 4.90, 7.18, 1.0), 0.9757, epsilon = 1e-4);
        assert_abs_diff_eq!(local_sim_asym(0.0143, 0.0153, 4.90, 7.18, 1.0), 0.9928, epsilon = 1e-4);
    }

    #[test]
    fn sales_curve_values() {
        assert_abs_diff_eq!(local_sim_asym(0.5, 0.25, 1.0, 1.0, 1.0), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(local_sim_asym(0.5, 0.25, 2.12, 5.53, 1.0), 0.54, epsilon = 0.01);
        assert_abs_diff_eq!(local_sim_asym(0.25, 0.5, 2.12, 5.53, 1.0), 0.20, epsilon = 0.01);
    }

    #[test]
    fn literal_branch_flips_exponents() {
        let above = local_sim_with(0.5, 0.25, 2.12, 5.53, 1.0, BranchConvention::QueryAbove);
        let below = local_sim_with(0.5, 0.25, 2.12, 5.53, 1.0, BranchConvention::QueryBelow);
        assert_abs_diff_eq!(below, local_sim_asym(0.25, 0.5, 2.12, 5.53, 1.0), epsilon = 1e-15);
        assert!(above > below);
    }

    #[test]
    fn identical_values_are_fully_similar() {
        assert_eq!(local_sim_asym(0.3, 0.3, 9.0, 0.1, 1.0), 1.0);
        assert_eq!(local_sim_asym(0.0, 1.0, 2.0, 2.0, 1.0), 0.0);
    }

    #[test]
    fn local_params_validation() {
        assert!(LocalParams::new(vec![1.0], vec![f64::NAN]).is_err());
        assert!(LocalParams::new(vec![0.0], vec![1.0]).is_err());
        assert!(LocalParams::new(vec![1.0, 2.0], vec![1.0]).is_err());
        let p = LocalParams::from_position(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(p.a, vec![1.0, 2.0]);
        assert_eq!(p.to_position(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn weights_validation() {
        assert!(GlobalWeights::new(vec![0.5, 0.4]).is_err());
        assert!(GlobalWeights::new(vec![1.5, -0.5]).is_err());
        let w = GlobalWeights::from_scores(&[2.0, -1.0, 6.0]).unwrap();
        assert_eq!(w.as_slice(), &[0.25, 0.0, 0.75]);
        assert!(GlobalWeights::from_scores(&[0.0, 0.0]).is_none());
        let r = w.restricted(&[true, true, false]).unwrap();
        assert_eq!(r.as_slice(), &[1.0, 0.0, 0.0]);
        assert!(w.restricted(&[false, true, false]).is_none());
    }

    #[test]
    fn acbr_global_examples() {
        let l = 3;
        let m = SimilarityModel::acbr(GlobalWeights::uniform(l), LocalParams::ones(l)).unwrap();
        let q = case(&[0.1, 0.2, 0.3]);
        assert_abs_diff_eq!(global_sim_acbr(&q, &q, &m).unwrap(), 1.0, epsilon = 1e-15);
        let far = case(&[1.0, 1.0, 1.0]);
        let zero = case(&[0.0, 0.0, 0.0]);
        assert_eq!(global_sim_acbr(&zero, &far, &m).unwrap(), 0.0);

        let m2 = SimilarityModel::acbr(GlobalWeights::new(vec![0.5, 0.5]).unwrap(), LocalParams::ones(2)).unwrap();
        // Local similarities 0.6 and 0.8.
        let s = global_sim_acbr(&case(&[0.4, 0.2]), &case(&[0.0, 0.0]), &m2).unwrap();
        assert_abs_diff_eq!(s, (0.5f64 * 0.36 + 0.5 * 0.64).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s, 0.5f64.sqrt(), epsilon = 1e-12);
        assert!(global_sim_acbr(&case(&[0.1]), &case(&[0.1, 0.2]), &m2).is_err());
        let ecbr = SimilarityModel::with_weights(Variant::Ecbr, GlobalWeights::uniform(2));
        assert!(global_sim_acbr(&case(&[0.1, 0.1]), &case(&[0.1, 0.2]), &ecbr).is_err());
    }

    #[test]
    fn distance_variant_examples() {
        let one = GlobalWeights::uniform(1);
        let half = GlobalWeights::new(vec![0.5, 0.5]).unwrap();
        let q = case(&[0.2, 0.4]);
        assert_eq!(sim_ecbr(&q, &q, &half).unwrap(), 1.0);
        assert_eq!(sim_mcbr(&q, &q, &half).unwrap(), 1.0);
        assert_abs_diff_eq!(sim_ecbr(&case(&[0.0]), &case(&[1.0]), &one).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sim_mcbr(&case(&[0.0]), &case(&[1.0]), &one).unwrap(), 0.5, epsilon = 1e-15);
        let origin = case(&[0.0, 0.0]);
        assert_abs_diff_eq!(sim_ecbr(&q, &origin, &half).unwrap(), 1.0 / (1.0 + 0.05f64.sqrt()), epsilon = 1e-12);
        assert_abs_diff_eq!(sim_ecbr(&q, &origin, &half).unwrap(), 0.8172, epsilon = 1e-4);
        assert_abs_diff_eq!(sim_mcbr(&q, &origin, &half).unwrap(), 1.0 / 1.3, epsilon = 1e-12);
        assert_abs_diff_eq!(sim_mcbr(&q, &origin, &half).unwrap(), 0.7692, epsilon = 1e-4);
    }

    #[test]
    fn grey_degree_examples() {
        let g = GreyContext { inf: vec![0.0], sup: vec![1.0] };
        assert_eq!(g.degree(0, 0.0), 1.0);
        assert_abs_diff_eq!(g.degree(0, 1.0), 1.0 / 3.0, epsilon = 1e-15);
        let flat = GreyContext { inf: vec![0.0], sup: vec![0.0] };
        assert_eq!(flat.degree(0, 0.0), 1.0);
        let w = GlobalWeights::uniform(1);
        assert_eq!(sim_gcbr(&case(&[0.3]), &case(&[0.3]), &g, &w).unwrap(), 1.0);
    }

    #[test]
    fn grey_context_spans_references() {
        let refs = [case(&[0.1, 0.5]), case(&[0.9, 0.5]), case(&[0.4, 0.5])];
        let g = GreyContext::new(&[Some(0.4), Some(0.5)], refs.iter().map(|c| c.features.as_slice()));
        assert_abs_diff_eq!(g.inf[0], 0.0);
        assert_abs_diff_eq!(g.sup[0], 0.5, epsilon = 1e-15);
        assert_eq!(g.sup[1], 0.0);
    }

    #[test]
    fn missing_values_use_configured_similarity() {
        let mut m = SimilarityModel::acbr(GlobalWeights::uniform(2), LocalParams::ones(2)).unwrap();
        let q = Case::new("q", vec![None, Some(0.5)], None);
        let c = case(&[0.5, 0.5]);
        assert_abs_diff_eq!(global_sim_acbr(&q, &c, &m).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        m.missing_sim = 1.0;
        assert_abs_diff_eq!(global_sim_acbr(&q, &c, &m).unwrap(), 1.0, epsilon = 1e-15);
        m.missing_sim = 1.5;
        assert!(m.validate().is_err());
        // Distance variants treat a missing slot as maximal distance.
        let w = GlobalWeights::new(vec![1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(sim_mcbr(&q, &c, &w).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn batch_matches_scalar() {
        let m = SimilarityModel::acbr(GlobalWeights::uniform(2), LocalParams::new(vec![2.0, 0.5], vec![3.0, 1.5]).unwrap()).unwrap();
        let q = vec![case(&[0.1, 0.9])];
        let r = vec![case(&[0.3, 0.2])];
        let mat = batch_similarity(&q, &r, &m, 4).unwrap();
        assert_eq!((mat.rows, mat.cols), (1, 1));
        assert_eq!(mat.get(0, 0), global_sim_acbr(&q[0], &r[0], &m).unwrap());
        let bad = vec![case(&[0.3])];
        assert!(batch_similarity(&q, &bad, &m, 1).is_err());
    }

    #[test]
    fn matrix_csv_layout() {
        let m = SimilarityModel::ewcbr(1);
        let mut q = case(&[0.0]);
        q.id = "q1".into();
        let mut r = case(&[0.5]);
        r.id = "r1".into();
        let mat = batch_similarity(&[q], &[r], &m, 1).unwrap();
        let mut buf = Vec::new();
        mat.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "query,r1\nq1,0.5\n");
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("acbr".parse::<Variant>().unwrap(), Variant::Acbr);
        assert_eq!("EWCBR".parse::<Variant>().unwrap(), Variant::Ewcbr);
        assert!("knn".parse::<Variant>().is_err());
    }

    proptest! {
        #[test]
        fn local_sim_bounded_and_monotone(q in 0.0f64..=1.0, c in 0.0f64..=1.0, a in 0.1f64..10.0, b in 0.1f64..10.0, t in 0.0f64..=1.0) {
            let s = local_sim_asym(q, c, a, b, 1.0);
            prop_assert!((0.0..=1.0).contains(&s));
            if q != c { prop_assert!(s < 1.0 || (q - c).abs() < 1e-12); }
            // Moving c toward q on the same side never lowers similarity.
            let closer = q + (c - q) * t;
            prop_assert!(local_sim_asym(q, closer, a, b, 1.0) >= s - 1e-15);
        }

        #[test]
        fn distance_variants_in_unit_interval(v in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..6)) {
            let l = v.len();
            let q = case(&v.iter().map(|p| p.0).collect::<Vec<_>>());
            let c = case(&v.iter().map(|p| p.1).collect::<Vec<_>>());
            let w = GlobalWeights::uniform(l);
            for s in [sim_ecbr(&q, &c, &w).unwrap(), sim_mcbr(&q, &c, &w).unwrap()] {
                prop_assert!(s > 0.0 && s <= 1.0);
                prop_assert_eq!(s == 1.0, v.iter().all(|p| p.0 == p.1));
            }
        }
    }
}
