//! Nearest-case retrieval, majority voting and the choice of `K`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::similarity::SimilarityModel;
use crate::training::cv::CrossValidator;

/// A retrieved reference: its position in the reference base, similarity to
/// the query and label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub similarity: f64,
    pub label: Label,
}

/// Rank order: higher similarity first, ties by lower reference index.
#[inline]
fn rank(sims: &[f64], a: usize, b: usize) -> Ordering {
    sims[b].total_cmp(&sims[a]).then(a.cmp(&b))
}

/// Indices of the `k` most similar references in rank order.
pub fn top_k_indices(sims: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > sims.len() {
        return Err(Error::KTooLarge { k, available: sims.len() });
    }
    let mut idx: Vec<usize> = (0..sims.len()).collect();
    if k == 0 {
        return Ok(Vec::new());
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| rank(sims, a, b));
        idx.truncate(k);
    }
    idx.sort_unstable_by(|&a, &b| rank(sims, a, b));
    Ok(idx)
}

pub fn top_k(sims: &[f64], labels: &[Label], k: usize) -> Result<Vec<Neighbor>> {
    if sims.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: sims.len(), actual: labels.len() });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    Ok(top_k_indices(sims, k)?
        .into_iter()
        .map(|i| Neighbor { index: i, similarity: sims[i], label: labels[i] })
        .collect())
}

/// Most frequent label; an exact tie predicts insolvent.
pub fn majority_vote<I: IntoIterator<Item = Label>>(labels: I) -> Label {
    let (insolvent, solvent) = labels.into_iter().fold((0usize, 0usize), |(i, s), l| {
        if l.is_insolvent() {
            (i + 1, s)
        } else {
            (i, s + 1)
        }
    });
    if insolvent >= solvent {
        Label::Insolvent
    } else {
        Label::Solvent
    }
}

/// Odd `K` from 1 to 25.
pub fn default_k_grid() -> Vec<usize> {
    (1..=25).step_by(2).collect()
}

/// `K` maximizing mean cross-validated accuracy over `k_grid` under
/// `model`; ties go to the smaller `K`.
pub fn select_k(
    train: &Dataset,
    model: &SimilarityModel,
    k_grid: &[usize],
    folds: usize,
    seed: u64,
    workers: usize,
) -> Result<usize> {
    let cv = CrossValidator::new(train, folds, seed)?;
    select_k_with(&cv, model, k_grid, workers).map(|(k, _)| k)
}

/// [`select_k`] on prepared folds; also returns each grid point's score.
pub fn select_k_with(
    cv: &CrossValidator,
    model: &SimilarityModel,
    k_grid: &[usize],
    workers: usize,
) -> Result<(usize, Vec<(usize, f64)>)> {
    let k_max = *k_grid
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidParameter("k grid must not be empty".into()))?;
    if k_grid.contains(&0) {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let neighbors = cv.neighbors(model, k_max, workers)?;
    let mut grid: Vec<usize> = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let scores = grid
        .iter()
        .map(|&k| cv.score_neighbors(&neighbors, k, Metric::Accuracy).map(|s| (k, s)))
        .collect::<Result<Vec<_>>>()?;
    let best = scores
        .iter()
        .fold(None::<(usize, f64)>, |best, &(k, s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((k, s)),
        })
        .expect("non-empty grid");
    Ok((best.0, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Case, FeatureSchema};
    use rand::{Rng, SeedableRng};
    use Label::{Insolvent as I, Solvent as S};

    #[test]
    fn top_k_examples() {
        let labels = [S, I, S];
        let n = top_k(&[0.9, 0.1, 0.5], &labels, 2).unwrap();
        assert_eq!(n.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 2]);
        let n = top_k(&[0.4, 0.4, 0.4], &labels, 2).unwrap();
        assert_eq!(n.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1]);
        assert!(matches!(top_k(&[0.1], &[S], 2), Err(Error::KTooLarge { k: 2, available: 1 })));
    }

    #[test]
    fn top_k_matches_full_sort() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            // Coarse values force plenty of ties.
            let sims: Vec<f64> = (0..100).map(|_| (rng.random::<f64>() * 20.0).floor() / 20.0).collect();
            let mut full: Vec<usize> = (0..100).collect();
            full.sort_by(|&a, &b| sims[b].partial_cmp(&sims[a]).unwrap().then(a.cmp(&b)));
            for k in [1, 10, 99, 100] {
                assert_eq!(top_k_indices(&sims, k).unwrap(), full[..k]);
            }
        }
    }

    #[test]
    fn vote_examples() {
        assert_eq!(majority_vote([I, I, S]), I);
        assert_eq!(majority_vote([S, S, S, I]), S);
        assert_eq!(majority_vote([I, S]), I);
    }

    fn clusters(n: usize) -> Dataset {
        let cases = (0..2 * n)
            .map(|i| {
                let (base, y) = if i < n { (0.1, S) } else { (0.9, I) };
                let jitter = (i % n) as f64 * 0.05 / n as f64;
                Case::new(format!("c{i}"), vec![Some(base + jitter), Some(base - jitter)], Some(y))
            })
            .collect();
        Dataset::new(FeatureSchema::generic(2).unwrap(), cases, "clusters").unwrap()
    }

    #[test]
    fn select_k_on_separable_clusters() {
        let d = clusters(20);
        let model = SimilarityModel::ewcbr(2);
        let cv = CrossValidator::new(&d, 5, 3).unwrap();
        let (k, scores) = select_k_with(&cv, &model, &default_k_grid(), 2).unwrap();
        let best = scores.iter().find(|(kk, _)| *kk == k).unwrap().1;
        assert_eq!(best, 1.0);
        assert_eq!(k, 1, "ties go to the smallest K");
        assert_eq!(select_k(&d, &model, &[9], 5, 3, 1).unwrap(), 9);
        assert_eq!(select_k(&d, &model, &[3, 5], 5, 11, 1).unwrap(), select_k(&d, &model, &[3, 5], 5, 11, 4).unwrap());
        assert!(select_k(&d, &model, &[], 5, 3, 1).is_err());
        assert!(matches!(select_k(&d, &model, &[40], 5, 3, 1), Err(Error::KTooLarge { .. })));
    }
}
