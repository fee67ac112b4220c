use super::dictionary::{norm, Dictionary};
use super::lasso::{lasso_solve, LassoConfig, SparseCode};
use crate::error::{Error, Result};

/// Reconstruction error of `y` per person using only that person's atoms.
/// Persons without atoms in the dictionary get `|y|`.
pub fn class_residuals(dict: &Dictionary, x: &[f64], y: &[f64], persons: usize) -> Vec<f64> {
    let mut partial = vec![y.to_vec(); persons];
    let mut present = vec![false; persons];
    for (j, &c) in x.iter().enumerate() {
        let p = dict.labels[j];
        present[p] = true;
        if c != 0.0 {
            partial[p].iter_mut().zip(dict.atom(j)).for_each(|(r, a)| *r -= c * a);
        }
    }
    let y_norm = norm(y);
    partial.iter().zip(&present).map(|(r, &seen)| if seen { norm(r) } else { y_norm }).collect()
}

/// One patch's vote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vote {
    pub person: usize,
    pub confidence: f64,
}

/// `argmin` of the residuals (lowest index on ties) with the relative gap
/// between the mean and the minimum as confidence.
pub fn decide_from_residuals(residuals: &[f64]) -> Result<Vote> {
    if residuals.is_empty() {
        return Err(Error::invalid("no enrolled persons"));
    }
    let (person, min) = residuals
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, r)| if r < best.1 { (i, r) } else { best });
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    let confidence = ((mean - min) / (mean + 1e-12)).clamp(0.0, 1.0);
    Ok(Vote { person, confidence })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchClassification {
    pub vote: Vote,
    pub code: SparseCode,
    pub residuals: Vec<f64>,
}

/// Sparse-codes the query over `dict` and votes for the best-reconstructing
/// person.
pub fn classify_with_dictionary(dict: &Dictionary, y: &[f64], persons: usize, lasso: &LassoConfig) -> Result<PatchClassification> {
    if let Some(&bad) = dict.labels.iter().find(|&&p| p >= persons) {
        return Err(Error::invalid(format!("atom label {bad} outside {persons} persons")));
    }
    let code = lasso_solve(dict, y, lasso)?;
    let residuals = class_residuals(dict, &code.x, y, persons);
    let vote = decide_from_residuals(&residuals)?;
    Ok(PatchClassification { vote, code, residuals })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    pub image: f64,
    pub depth: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights { image: 0.5, depth: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityDecision {
    pub person: usize,
    pub image_scores: Vec<f64>,
    pub depth_scores: Vec<f64>,
    pub fused: Vec<f64>,
    pub image_votes: Vec<Vote>,
    pub depth_votes: Vec<Vote>,
    /// Effective weights after dropping empty modalities.
    pub weights: FusionWeights,
}

fn vote_counts(votes: &[Vote], persons: usize) -> Vec<f64> {
    let mut counts = vec![0.0; persons];
    votes.iter().for_each(|v| counts[v.person] += 1.0);
    counts
}

/// Confidence-weighted vote share per person, summing to 1. When every
/// confidence is zero the plain vote share is used instead.
pub fn modality_scores(votes: &[Vote], persons: usize) -> Vec<f64> {
    let mut scores = vec![0.0; persons];
    votes.iter().for_each(|v| scores[v.person] += v.confidence);
    let mut total: f64 = scores.iter().sum();
    if total <= 0.0 {
        scores = vote_counts(votes, persons);
        total = scores.iter().sum();
    }
    if total > 0.0 {
        scores.iter_mut().for_each(|s| *s /= total);
    }
    scores
}

/// Late fusion of per-patch votes. A modality takes part when it has votes
/// and a positive weight; weights are renormalized over the participants.
/// Ties on the fused score go to the larger raw vote count over the
/// participating modalities, then to the lower person index.
pub fn fuse_and_decide(persons: usize, image_votes: &[Vote], depth_votes: &[Vote], weights: FusionWeights) -> Result<IdentityDecision> {
    if persons == 0 {
        return Err(Error::invalid("no enrolled persons"));
    }
    if let Some(v) = image_votes.iter().chain(depth_votes).find(|v| v.person >= persons) {
        return Err(Error::invalid(format!("vote for person {} outside {persons}", v.person)));
    }
    if !(weights.image >= 0.0 && weights.depth >= 0.0) {
        return Err(Error::invalid("fusion weights must be non-negative"));
    }
    let w_img = if image_votes.is_empty() { 0.0 } else { weights.image };
    let w_dep = if depth_votes.is_empty() { 0.0 } else { weights.depth };
    let total = w_img + w_dep;
    if total <= 0.0 {
        return Err(Error::invalid("no votes in any weighted modality"));
    }
    let used = FusionWeights { image: w_img / total, depth: w_dep / total };
    let image_scores = modality_scores(image_votes, persons);
    let depth_scores = modality_scores(depth_votes, persons);
    let fused: Vec<f64> = (0..persons).map(|p| used.image * image_scores[p] + used.depth * depth_scores[p]).collect();
    let mut raw = vec![0.0; persons];
    if used.image > 0.0 {
        raw.iter_mut().zip(vote_counts(image_votes, persons)).for_each(|(r, c)| *r += c);
    }
    if used.depth > 0.0 {
        raw.iter_mut().zip(vote_counts(depth_votes, persons)).for_each(|(r, c)| *r += c);
    }
    let mut person = 0;
    for p in 1..persons {
        if fused[p] > fused[person] || (fused[p] == fused[person] && raw[p] > raw[person]) {
            person = p;
        }
    }
    Ok(IdentityDecision {
        person,
        image_scores,
        depth_scores,
        fused,
        image_votes: image_votes.to_vec(),
        depth_votes: depth_votes.to_vec(),
        weights: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::lasso::LassoConfig;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(person: usize, confidence: f64) -> Vote {
        Vote { person, confidence }
    }

    #[test]
    fn exact_single_class_reconstruction() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let d = Dictionary::from_columns(3, &cols, vec![1, 1, 1]).unwrap();
        let y = [0.2, -0.5, 0.1];
        let c = classify_with_dictionary(&d, &y, 3, &LassoConfig { lambda: 0.0, ..Default::default() }).unwrap();
        assert!(c.residuals[1] < 1e-12);
        assert_eq!(c.vote.person, 1);
        let yn = norm(&y);
        assert_eq!(c.residuals[0], yn);
        assert_eq!(c.residuals[2], yn);
    }

    #[test]
    fn zero_code_gives_norm_everywhere() {
        let d = Dictionary::from_columns(2, &[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]).unwrap();
        let r = class_residuals(&d, &[0.0, 0.0], &[3.0, 4.0], 3);
        assert_eq!(r, vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn residuals_match_masked_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cols: Vec<Vec<f64>> = (0..30).map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 4).collect();
        let d = Dictionary::from_columns(10, &cols, labels.clone()).unwrap();
        let y: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let code = lasso_solve(&d, &y, &LassoConfig { lambda: 0.05, ..Default::default() }).unwrap();
        let got = class_residuals(&d, &code.x, &y, 5);
        for c in 0..5 {
            let masked: Vec<f64> = code.x.iter().zip(&labels).map(|(&x, &l)| if l == c { x } else { 0.0 }).collect();
            let expected = if labels.contains(&c) {
                let rec = d.reconstruct(&masked);
                y.iter().zip(&rec).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            } else {
                norm(&y)
            };
            assert!((got[c] - expected).abs() < 1e-6);
            assert!(code.residual_norm() <= got[c] + 1e-6);
        }
    }

    #[test]
    fn separated_clusters_are_classified() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let centers: Vec<Vec<f64>> = (0..3).map(|_| (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let sample = |rng: &mut ChaCha8Rng, c: usize| -> Vec<f64> { centers[c].iter().map(|&m| m + rng.random_range(-0.15..0.15)).collect() };
        let mut cols = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3 {
            for _ in 0..20 {
                cols.push(sample(&mut rng, c));
                labels.push(c);
            }
        }
        let d = Dictionary::from_columns(32, &cols, labels).unwrap();
        for i in 0..100 {
            let c = i % 3;
            let mut y = sample(&mut rng, c);
            super::super::dictionary::normalize_in_place(&mut y);
            let got = classify_with_dictionary(&d, &y, 3, &LassoConfig::default()).unwrap();
            assert_eq!(got.vote.person, c);
        }
    }

    #[test]
    fn single_person_always_wins() {
        let d = Dictionary::from_columns(2, &[vec![1.0, 0.0]], vec![0]).unwrap();
        let c = classify_with_dictionary(&d, &[0.0, 1.0], 1, &LassoConfig::default()).unwrap();
        assert_eq!(c.vote.person, 0);
    }

    #[test]
    fn majority_in_one_modality() {
        let d = fuse_and_decide(2, &[v(0, 1.0), v(0, 1.0), v(1, 1.0)], &[], FusionWeights::default()).unwrap();
        assert_eq!(d.person, 0);
        assert_eq!(d.weights, FusionWeights { image: 1.0, depth: 0.0 });
    }

    #[test]
    fn unanimous_modalities_score_one() {
        let d = fuse_and_decide(3, &[v(0, 0.4), v(0, 0.9)], &[v(0, 0.2)], FusionWeights::default()).unwrap();
        assert_eq!(d.person, 0);
        assert!((d.fused[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fused_tie_goes_to_more_raw_votes() {
        let d = fuse_and_decide(2, &[v(0, 1.0), v(0, 1.0), v(0, 1.0)], &[v(1, 1.0)], FusionWeights::default()).unwrap();
        assert_eq!(d.image_scores, vec![1.0, 0.0]);
        assert_eq!(d.depth_scores, vec![0.0, 1.0]);
        assert_eq!(d.fused, vec![0.5, 0.5]);
        assert_eq!(d.person, 0);
        let flipped = fuse_and_decide(2, &[v(1, 1.0)], &[v(0, 1.0), v(0, 1.0), v(0, 1.0)], FusionWeights::default()).unwrap();
        assert_eq!(flipped.person, 0);
        let even = fuse_and_decide(2, &[v(1, 1.0)], &[v(0, 1.0)], FusionWeights::default()).unwrap();
        assert_eq!(even.person, 0);
    }

    #[test]
    fn zero_confidence_falls_back_to_counts() {
        let d = fuse_and_decide(2, &[v(1, 0.0), v(1, 0.0), v(0, 0.0)], &[], FusionWeights::default()).unwrap();
        assert_eq!(d.person, 1);
        assert!((d.image_scores[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_votes_is_an_error() {
        assert!(fuse_and_decide(2, &[], &[], FusionWeights::default()).is_err());
    }

    #[test]
    fn residual_confidence() {
        let vote = decide_from_residuals(&[0.5, 1.0, 1.5]).unwrap();
        assert_eq!(vote.person, 0);
        assert!((vote.confidence - 0.5).abs() < 1e-9);
        assert_eq!(decide_from_residuals(&[1.0, 1.0]).unwrap(), v(0, 0.0));
    }

    fn votes() -> impl Strategy<Value = Vec<Vote>> {
        prop::collection::vec((0usize..4, 0.0f64..1.0).prop_map(|(p, c)| v(p, c)), 0..12)
    }

    proptest! {
        #[test]
        fn one_sided_weights_match_single_modality(img in votes(), dep in votes()) {
            prop_assume!(!img.is_empty() && !dep.is_empty());
            let image_only = fuse_and_decide(4, &img, &[], FusionWeights::default()).unwrap();
            let w10 = fuse_and_decide(4, &img, &dep, FusionWeights { image: 1.0, depth: 0.0 }).unwrap();
            prop_assert_eq!(w10.person, image_only.person);
            let depth_only = fuse_and_decide(4, &[], &dep, FusionWeights::default()).unwrap();
            let w01 = fuse_and_decide(4, &img, &dep, FusionWeights { image: 0.0, depth: 1.0 }).unwrap();
            prop_assert_eq!(w01.person, depth_only.person);
        }

        #[test]
        fn fused_scores_sum_to_one(img in votes(), dep in votes()) {
            prop_assume!(!img.is_empty() || !dep.is_empty());
            let d = fuse_and_decide(4, &img, &dep, FusionWeights::default()).unwrap();
            prop_assert!((d.fused.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let best = d.fused.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert_eq!(d.fused[d.person], best);
        }

        #[test]
        fn atom_order_does_not_change_the_vote(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cols: Vec<Vec<f64>> = (0..12).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
            let y: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cfg = LassoConfig { lambda: 0.1, tol: 1e-13, max_iter: 100_000 };
            let a = classify_with_dictionary(&Dictionary::from_columns(8, &cols, labels.clone()).unwrap(), &y, 3, &cfg).unwrap();
            let rev_cols: Vec<Vec<f64>> = cols.iter().rev().cloned().collect();
            let rev_labels: Vec<usize> = labels.iter().rev().cloned().collect();
            let b = classify_with_dictionary(&Dictionary::from_columns(8, &rev_cols, rev_labels).unwrap(), &y, 3, &cfg).unwrap();
            for (ra, rb) in a.residuals.iter().zip(&b.residuals) {
                prop_assert!((ra - rb).abs() < 1e-6);
            }
            let gap = {
                let mut r = a.residuals.clone();
                r.sort_by(f64::total_cmp);
                r[1] - r[0]
            };
            if gap > 1e-5 {
                prop_assert_eq!(a.vote.person, b.vote.person);
            }
        }
    }
}
