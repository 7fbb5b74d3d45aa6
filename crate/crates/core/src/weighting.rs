//! Feature relevance scores and the global weights derived from them.
//!
//! Six scorers are available. Gini, entropy and chi2 discretize each feature
//! into equal-frequency bins; mutual information uses the nearest-neighbor
//! estimator for a continuous feature against a discrete class; ANOVA is the
//! one-way F statistic; ReliefF rewards features that separate a case from
//! its nearest misses more than from its nearest hits. Missing values are
//! left out of each feature's computation (ReliefF counts them as a half
//! difference).

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::parallel;
use crate::similarity::GlobalWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMethod {
    Gini,
    Entropy,
    MutualInfo,
    Chi2,
    Anova,
    Relieff,
}

impl ScoringMethod {
    pub const ALL: [ScoringMethod; 6] = [
        ScoringMethod::Gini,
        ScoringMethod::Entropy,
        ScoringMethod::MutualInfo,
        ScoringMethod::Chi2,
        ScoringMethod::Anova,
        ScoringMethod::Relieff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoringMethod::Gini => "gini",
            ScoringMethod::Entropy => "entropy",
            ScoringMethod::MutualInfo => "mutual_info",
            ScoringMethod::Chi2 => "chi2",
            ScoringMethod::Anova => "anova",
            ScoringMethod::Relieff => "relieff",
        }
    }
}

impl fmt::Display for ScoringMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoringMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ScoringMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == key || (key == "mi" && *m == ScoringMethod::MutualInfo))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scoring method {s:?}")))
    }
}

/// Hyperparameters shared by the scorers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    /// Equal-frequency bins for gini, entropy and chi2.
    pub bins: usize,
    /// Neighbor count of the mutual information estimator.
    pub mi_neighbors: usize,
    /// Below this many usable values mutual information falls back to the
    /// binned plug-in estimate.
    pub mi_min_samples: usize,
    /// Hits and misses per sampled case in ReliefF.
    pub relief_neighbors: usize,
    /// ReliefF sample size; `None` samples every case.
    pub relief_samples: Option<usize>,
    pub seed: u64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            bins: 10,
            mi_neighbors: 3,
            mi_min_samples: 50,
            relief_neighbors: 10,
            relief_samples: None,
            seed: 0,
        }
    }
}

/// Raw scores of one method and the weights normalized from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScores {
    pub method: ScoringMethod,
    pub raw: Vec<f64>,
    pub weights: GlobalWeights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Largest finite ANOVA score, used when the classes separate perfectly.
pub const ANOVA_CAP: f64 = 1e12;

/// Scores every feature of labeled, scaled `train` and normalizes the scores
/// into weights. All-zero scores give uniform weights with a warning.
pub fn score_features(train: &Dataset, method: ScoringMethod, config: &ScoringConfig) -> Result<FeatureScores> {
    let labels = train.labels()?;
    let (solvent, insolvent) = train.class_counts();
    if solvent == 0 || insolvent == 0 {
        return Err(Error::SingleClass);
    }
    if config.bins < 1 || config.mi_neighbors < 1 || config.relief_neighbors < 1 {
        return Err(Error::InvalidParameter("scoring hyperparameters must be positive".into()));
    }
    let l = train.n_features();
    let column = |j: usize| -> (Vec<f64>, Vec<Label>) {
        train
            .cases
            .iter()
            .zip(&labels)
            .filter_map(|(c, y)| c.features[j].map(|v| (v, *y)))
            .unzip()
    };
    let raw: Vec<f64> = match method {
        ScoringMethod::Relieff => relieff(train, &labels, config),
        _ => (0..l)
            .map(|j| {
                let (x, y) = column(j);
                let s = match method {
                    ScoringMethod::Gini => gini_gain(&x, &y, config.bins),
                    ScoringMethod::Entropy => information_gain(&x, &y, config.bins),
                    ScoringMethod::MutualInfo => {
                        // The neighbor estimator needs continuous values;
                        // discrete features get the exact plug-in estimate.
                        if x.len() < config.mi_min_samples || distinct_at_most(&x, config.bins) {
                            information_gain(&x, &y, config.bins)
                        } else {
                            mutual_info_knn(&x, &y, config.mi_neighbors)
                        }
                    }
                    ScoringMethod::Chi2 => chi2(&x, &y, config.bins),
                    ScoringMethod::Anova => anova_f(&x, &y),
                    ScoringMethod::Relieff => unreachable!(),
                };
                if s.is_finite() && s > 0.0 {
                    s
                } else {
                    0.0
                }
            })
            .collect(),
    };
    let (weights, warning) = match GlobalWeights::from_scores(&raw) {
        Some(w) => (w, None),
        None => (GlobalWeights::uniform(l), Some(format!("{method}: every feature scored zero, using uniform weights"))),
    };
    Ok(FeatureScores { method, raw, weights, warning })
}

fn distinct_at_most(x: &[f64], limit: usize) -> bool {
    let mut seen: Vec<f64> = Vec::with_capacity(limit + 1);
    for v in x {
        if !seen.contains(v) {
            if seen.len() == limit {
                return false;
            }
            seen.push(*v);
        }
    }
    true
}

/// Bin index of every value under equal-frequency binning.
pub fn quantile_bins(x: &[f64], bins: usize) -> Vec<usize> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // The upper edge of bin b - 1 is the value at rank ceil(b n / bins) - 1.
    let mut edges: Vec<f64> = (1..bins).map(|b| sorted[(b * n).div_ceil(bins).max(1) - 1]).collect();
    edges.dedup();
    x.iter().map(|v| edges.partition_point(|e| e < v)).collect()
}

/// `counts[bin][class]` with class 0 solvent and 1 insolvent.
fn contingency(x: &[f64], y: &[Label], bins: usize) -> Vec<[f64; 2]> {
    let assignment = quantile_bins(x, bins);
    let mut counts = vec![[0.0; 2]; bins.max(1)];
    for (b, label) in assignment.iter().zip(y) {
        counts[*b][label.as_u8() as usize] += 1.0;
    }
    counts.retain(|c| c[0] + c[1] > 0.0);
    counts
}

fn impurity_gain(x: &[f64], y: &[Label], bins: usize, impurity: fn([f64; 2]) -> f64) -> f64 {
    let table = contingency(x, y, bins);
    let total: [f64; 2] = table.iter().fold([0.0; 2], |acc, c| [acc[0] + c[0], acc[1] + c[1]]);
    let n = total[0] + total[1];
    if n == 0.0 {
        return 0.0;
    }
    let conditional: f64 = table.iter().map(|c| (c[0] + c[1]) / n * impurity(*c)).sum();
    (impurity(total) - conditional).max(0.0)
}

fn gini_index(c: [f64; 2]) -> f64 {
    let n = c[0] + c[1];
    if n == 0.0 {
        return 0.0;
    }
    1.0 - (c[0] / n).powi(2) - (c[1] / n).powi(2)
}

fn entropy(c: [f64; 2]) -> f64 {
    let n = c[0] + c[1];
    c.iter()
        .filter(|v| **v > 0.0)
        .map(|v| {
            let p = v / n;
            -p * p.ln()
        })
        .sum()
}

/// Decrease in Gini impurity of the class after splitting on the bins.
pub fn gini_gain(x: &[f64], y: &[Label], bins: usize) -> f64 {
    impurity_gain(x, y, bins, gini_index)
}

/// Decrease in class entropy (nats) after splitting on the bins.
pub fn information_gain(x: &[f64], y: &[Label], bins: usize) -> f64 {
    impurity_gain(x, y, bins, entropy)
}

/// Pearson chi-square statistic of the bin × class table.
pub fn chi2(x: &[f64], y: &[Label], bins: usize) -> f64 {
    let table = contingency(x, y, bins);
    let total: [f64; 2] = table.iter().fold([0.0; 2], |acc, c| [acc[0] + c[0], acc[1] + c[1]]);
    let n = total[0] + total[1];
    if n == 0.0 {
        return 0.0;
    }
    let mut stat = 0.0;
    for row in &table {
        let row_n = row[0] + row[1];
        for k in 0..2 {
            let expected = row_n * total[k] / n;
            if expected > 0.0 {
                stat += (row[k] - expected).powi(2) / expected;
            }
        }
    }
    stat
}

/// One-way ANOVA F statistic between the two classes.
pub fn anova_f(x: &[f64], y: &[Label]) -> f64 {
    let mut sum = [0.0; 2];
    let mut count = [0.0; 2];
    for (v, label) in x.iter().zip(y) {
        let k = label.as_u8() as usize;
        sum[k] += v;
        count[k] += 1.0;
    }
    if count[0] == 0.0 || count[1] == 0.0 {
        return 0.0;
    }
    let n = count[0] + count[1];
    let mean = [sum[0] / count[0], sum[1] / count[1]];
    let grand = (sum[0] + sum[1]) / n;
    let between: f64 = (0..2).map(|k| count[k] * (mean[k] - grand).powi(2)).sum();
    let within: f64 = x.iter().zip(y).map(|(v, label)| (v - mean[label.as_u8() as usize]).powi(2)).sum();
    if between <= 0.0 {
        return 0.0;
    }
    if n <= 2.0 || within <= 0.0 {
        return ANOVA_CAP;
    }
    (between / (within / (n - 2.0))).min(ANOVA_CAP)
}

/// Nearest-neighbor estimate (nats) of the mutual information between a
/// continuous feature and the class, clamped at zero.
pub fn mutual_info_knn(x: &[f64], y: &[Label], k: usize) -> f64 {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    if sorted.first() == sorted.last() {
        return 0.0;
    }
    let mut class_values: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for &i in &order {
        class_values[y[i].as_u8() as usize].push(x[i]);
    }

    let mut used = 0usize;
    let mut sum_class = 0.0;
    let mut sum_m = 0.0;
    let mut sum_k = 0.0;
    for i in 0..n {
        let same = &class_values[y[i].as_u8() as usize];
        if same.len() < 2 {
            continue;
        }
        let kk = k.min(same.len() - 1);
        let radius = kth_neighbor_distance(same, x[i], kk);
        // Points strictly closer than the k-th neighbor, the case itself
        // included; ties at distance zero are all counted.
        let m = if radius > 0.0 {
            count_within(&sorted, x[i], radius, false)
        } else {
            count_within(&sorted, x[i], 0.0, true)
        };
        used += 1;
        sum_class += digamma(same.len() as f64);
        sum_m += digamma(m.max(1) as f64);
        sum_k += digamma(kk as f64);
    }
    if used == 0 {
        return 0.0;
    }
    let u = used as f64;
    (digamma(u) - sum_class / u + sum_k / u - sum_m / u).max(0.0)
}

/// Distance from `v` (a member of the sorted `values`) to its `k`-th nearest
/// other member.
fn kth_neighbor_distance(values: &[f64], v: f64, k: usize) -> f64 {
    let pos = values.partition_point(|x| *x < v);
    // `pos` is the first copy of `v`; it stands for the case itself.
    let (mut lo, mut hi) = (pos, pos + 1);
    let mut d = 0.0;
    for _ in 0..k {
        let left = lo.checked_sub(1).map(|i| v - values[i]);
        let right = values.get(hi).map(|x| x - v);
        match (left, right) {
            (Some(l), Some(r)) if l <= r => {
                d = l;
                lo -= 1;
            }
            (_, Some(r)) => {
                d = r;
                hi += 1;
            }
            (Some(l), None) => {
                d = l;
                lo -= 1;
            }
            (None, None) => break,
        }
    }
    d
}

fn count_within(sorted: &[f64], v: f64, radius: f64, inclusive: bool) -> usize {
    let (lo, hi) = if inclusive {
        (sorted.partition_point(|x| *x < v - radius), sorted.partition_point(|x| *x <= v + radius))
    } else {
        (sorted.partition_point(|x| *x <= v - radius), sorted.partition_point(|x| *x < v + radius))
    };
    hi.saturating_sub(lo)
}

/// ReliefF weights with Manhattan distance on the scaled features.
fn relieff(train: &Dataset, labels: &[Label], config: &ScoringConfig) -> Vec<f64> {
    let l = train.n_features();
    let n = train.len();
    let feats: Vec<&[Option<f64>]> = train.cases.iter().map(|c| c.features.as_slice()).collect();
    let span: Vec<f64> = (0..l)
        .map(|j| {
            let (lo, hi) = feats
                .iter()
                .filter_map(|f| f[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if hi > lo {
                hi - lo
            } else {
                0.0
            }
        })
        .collect();
    let diff = |j: usize, a: Option<f64>, b: Option<f64>| -> f64 {
        if span[j] == 0.0 {
            return 0.0;
        }
        match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() / span[j],
            _ => 0.5,
        }
    };
    let samples: Vec<usize> = match config.relief_samples {
        Some(m) if m < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut s = sample(&mut rng, n, m).into_vec();
            s.sort_unstable();
            s
        }
        _ => (0..n).collect(),
    };
    let k = config.relief_neighbors;
    let workers = parallel::default_workers();
    let contributions = parallel::map_indexed(samples.len(), workers, |s| {
        let i = samples[s];
        let mut dist: Vec<(f64, usize)> = (0..n)
            .filter(|&r| r != i)
            .map(|r| ((0..l).map(|j| diff(j, feats[i][j], feats[r][j])).sum(), r))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let hits: Vec<usize> = dist.iter().filter(|(_, r)| labels[*r] == labels[i]).take(k).map(|(_, r)| *r).collect();
        let misses: Vec<usize> = dist.iter().filter(|(_, r)| labels[*r] != labels[i]).take(k).map(|(_, r)| *r).collect();
        let mut delta = vec![0.0; l];
        for (j, d) in delta.iter_mut().enumerate() {
            if !hits.is_empty() {
                *d -= hits.iter().map(|&r| diff(j, feats[i][j], feats[r][j])).sum::<f64>() / hits.len() as f64;
            }
            if !misses.is_empty() {
                *d += misses.iter().map(|&r| diff(j, feats[i][j], feats[r][j])).sum::<f64>() / misses.len() as f64;
            }
        }
        delta
    });
    let m = samples.len().max(1) as f64;
    (0..l)
        .map(|j| contributions.iter().map(|d| d[j]).sum::<f64>() / m)
        .map(|w: f64| w.max(0.0))
        .collect()
}

/// Weights as percentages summing to 100.
pub fn relevance_percent(weights: &GlobalWeights) -> Vec<f64> {
    weights.as_slice().iter().map(|w| w * 100.0).collect()
}

/// Relevance table sorted by descending weight: `<description> <percent>`,
/// percent to two decimals, plus the feature code and raw weight.
pub fn relevance_table(names: &[(&str, &str)], weights: &GlobalWeights) -> String {
    let pct = relevance_percent(weights);
    let mut order: Vec<usize> = (0..pct.len()).collect();
    order.sort_by(|&a, &b| pct[b].total_cmp(&pct[a]).then(a.cmp(&b)));
    let width = names.iter().map(|(_, d)| d.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for j in order {
        let (code, desc) = names[j];
        out.push_str(&format!("{desc:<width$} {:.2}  ({code}, w={:.6})\n", pct[j], weights.as_slice()[j]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Case, FeatureSchema};
    use rand::Rng;

    fn dataset(cols: Vec<Vec<f64>>, labels: Vec<Label>) -> Dataset {
        let l = cols.len();
        let cases = (0..labels.len())
            .map(|i| Case::new(format!("r{i}"), cols.iter().map(|c| Some(c[i])).collect(), Some(labels[i])))
            .collect();
        Dataset::new(FeatureSchema::generic(l).unwrap(), cases, "test").unwrap()
    }

    fn random_labels(n: usize, rng: &mut ChaCha8Rng) -> Vec<Label> {
        (0..n).map(|i| if i % 2 == 0 || rng.random_bool(0.1) { Label::Insolvent } else { Label::Solvent }).collect()
    }

    #[test]
    fn perfect_predictor_and_constant_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = random_labels(400, &mut rng);
        let perfect: Vec<f64> = y.iter().map(|l| l.as_u8() as f64).collect();
        let noise: Vec<f64> = (0..400).map(|_| rng.random()).collect();
        let constant = vec![0.5; 400];
        let data = dataset(vec![noise, perfect, constant], y);
        for method in ScoringMethod::ALL {
            let s = score_features(&data, method, &ScoringConfig::default()).unwrap();
            let w = s.weights.as_slice();
            assert!(w[1] > w[0] && w[1] > w[2], "{method}: {w:?}");
            assert_eq!(s.raw[2], 0.0, "{method}");
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_features_get_a_fair_share_under_mutual_info() {
        // Four features independent of the label: averaged over replications,
        // each weight sits near the uniform share.
        let l = 4;
        let reps = 40;
        let mut mean = vec![0.0; l];
        for rep in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + rep);
            let y = random_labels(10_000, &mut rng);
            let cols = (0..l).map(|_| (0..10_000).map(|_| rng.random::<f64>()).collect()).collect();
            let data = dataset(cols, y);
            let s = score_features(&data, ScoringMethod::MutualInfo, &ScoringConfig::default()).unwrap();
            for (m, w) in mean.iter_mut().zip(s.weights.as_slice()) {
                *m += w / reps as f64;
            }
        }
        for w in mean {
            assert!(w > 0.5 / l as f64 && w < 2.0 / l as f64, "{w}");
        }
    }

    #[test]
    fn knn_mutual_info_tracks_the_binned_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y = random_labels(5000, &mut rng);
        // Class-shifted uniform: overlap fraction 0.5.
        let x: Vec<f64> = y.iter().map(|l| rng.random::<f64>() + 0.5 * l.as_u8() as f64).collect();
        let knn = mutual_info_knn(&x, &y, 3);
        let binned = information_gain(&x, &y, 20);
        assert!((knn - binned).abs() < 0.03, "{knn} vs {binned}");
        assert!(knn > 0.2);
    }

    #[test]
    fn hand_checked_statistics() {
        use Label::{Insolvent as I, Solvent as S};
        let x = [0.0, 0.0, 1.0, 1.0];
        let y = [S, S, I, I];
        assert!((gini_gain(&x, &y, 2) - 0.5).abs() < 1e-12);
        assert!((information_gain(&x, &y, 2) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((chi2(&x, &y, 2) - 4.0).abs() < 1e-12);
        assert_eq!(anova_f(&x, &y), ANOVA_CAP);
        // Means 1 and 3: between-group SS 4, within-group SS 4, n - 2 = 2.
        let f = anova_f(&[0.0, 2.0, 2.0, 4.0], &y);
        assert!((f - 2.0).abs() < 1e-12, "{f}");
    }

    #[test]
    fn quantile_binning_respects_ties() {
        assert_eq!(quantile_bins(&[3.0, 3.0, 3.0], 10), vec![0, 0, 0]);
        let b = quantile_bins(&(0..100).map(f64::from).collect::<Vec<_>>(), 10);
        for bin in 0..10 {
            assert_eq!(b.iter().filter(|v| **v == bin).count(), 10);
        }
    }

    #[test]
    fn scores_ignore_case_order_and_uniform_duplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = random_labels(300, &mut rng);
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|j| y.iter().map(|l| rng.random::<f64>() + 0.2 * j as f64 * l.as_u8() as f64).collect())
            .collect();
        let base = dataset(cols.clone(), y.clone());
        let mut perm: Vec<usize> = (0..300).collect();
        perm.reverse();
        let permuted = dataset(
            cols.iter().map(|c| perm.iter().map(|&i| c[i]).collect()).collect(),
            perm.iter().map(|&i| y[i]).collect(),
        );
        let doubled = dataset(
            cols.iter().map(|c| c.iter().chain(c.iter()).copied().collect()).collect(),
            y.iter().chain(y.iter()).copied().collect(),
        );
        let rank = |w: &[f64]| {
            let mut o: Vec<usize> = (0..w.len()).collect();
            o.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
            o
        };
        for method in ScoringMethod::ALL {
            let cfg = ScoringConfig::default();
            let a = score_features(&base, method, &cfg).unwrap();
            let b = score_features(&permuted, method, &cfg).unwrap();
            for (u, v) in a.raw.iter().zip(&b.raw) {
                assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0), "{method}: {u} vs {v}");
            }
            if matches!(method, ScoringMethod::Gini | ScoringMethod::Entropy | ScoringMethod::Chi2) {
                let c = score_features(&doubled, method, &cfg).unwrap();
                assert_eq!(rank(a.weights.as_slice()), rank(c.weights.as_slice()), "{method}");
            }
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let data = dataset(vec![vec![0.1, 0.2]], vec![Label::Solvent; 2]);
        assert!(matches!(score_features(&data, ScoringMethod::Gini, &ScoringConfig::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn all_zero_scores_fall_back_to_uniform() {
        let data = dataset(vec![vec![1.0; 4], vec![2.0; 4]], vec![Label::Solvent, Label::Insolvent, Label::Solvent, Label::Insolvent]);
        let s = score_features(&data, ScoringMethod::Anova, &ScoringConfig::default()).unwrap();
        assert_eq!(s.weights, GlobalWeights::uniform(2));
        assert!(s.warning.is_some());
    }

    #[test]
    fn relevance_percent_examples() {
        let p = relevance_percent(&GlobalWeights::new(vec![0.25, 0.75]).unwrap());
        assert_eq!(p, vec![25.0, 75.0]);
        let p = relevance_percent(&GlobalWeights::uniform(28));
        assert!((p.iter().sum::<f64>() - 100.0).abs() < 1e-6);
        assert!((p[0] - 3.5714).abs() < 1e-4);
    }

    #[test]
    fn relevance_table_format() {
        let schema = FeatureSchema::financial();
        let mut w = vec![(1.0 - 0.0612) / 27.0; 28];
        let ap = schema.position("Accounts payable (A.P.)").unwrap();
        w[ap] = 0.0612;
        let names: Vec<(&str, &str)> = (0..28).map(|j| (schema.name(j), schema.description(j))).collect();
        let table = relevance_table(&names, &GlobalWeights::new(w).unwrap());
        let first = table.lines().next().unwrap();
        assert!(first.starts_with("Accounts payable (A.P.)"), "{first}");
        assert!(first.split_whitespace().any(|t| t == "6.12"), "{first}");
    }

    #[test]
    fn method_names_round_trip() {
        for m in ScoringMethod::ALL {
            assert_eq!(m.as_str().parse::<ScoringMethod>().unwrap(), m);
        }
        assert!("bogus".parse::<ScoringMethod>().is_err());
    }
}
