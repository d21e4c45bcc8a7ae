//! Clustering evaluation: optimal label alignment, accuracy, aligned
//! confusion matrices, and total / normalized dispersion.
//!
//! Predicted cluster labels are arbitrary, so scores are computed after
//! aligning them to the ground truth with an optimal assignment over the
//! confusion matrix (maximum-trace matching, deterministic lexicographic
//! tie-break). Dispersion recomputes centroids from the labels being scored,
//! so partitions produced by different pipelines are judged by one rule
//! rather than by whatever centroid representation each pipeline reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean::{
    cluster_dispersion, frechet_mean_gd, frechet_mean_icm, identity_order, pairwise_sum,
    DispersionMetric, MeanSolverConfig,
};
use crate::spd::{spectral_apply, SpdMatrix, SpectralFn};

/// How cluster centroids are recomputed when measuring dispersion.
///
/// `Icm` (the default) is the fast inductive estimator; `Gd` is the gradient
/// solver, available for audits. Under the log-Euclidean metric the mean has
/// a closed form (the exponential of the averaged logarithms) and both
/// methods use it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeanMethod {
    Gd,
    #[default]
    Icm,
}

/// Total dispersion together with the indices of any empty clusters.
///
/// Empty clusters contribute zero instead of failing the evaluation: the
/// dispersion of an empty set is undefined, but aborting would also discard
/// the (more informative) accuracy of the remaining assignment. Callers can
/// inspect `empty_clusters` to decide whether the number is comparable.
#[derive(Clone, Debug, Serialize)]
pub struct DispersionReport {
    pub value: f64,
    pub empty_clusters: Vec<usize>,
}

/// Full evaluation of a predicted partition against the ground truth.
#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    /// Fraction of points whose aligned predicted label matches the truth.
    pub accuracy: f64,
    /// Aligned confusion matrix: entry `[i][j]` counts points with true
    /// label `i` and predicted label `assignment[j]`.
    pub confusion: Vec<Vec<usize>>,
    /// Permutation mapping true cluster `i` to the predicted label
    /// `assignment[i]` it was matched with.
    pub assignment: Vec<usize>,
    /// Total dispersion of the predicted partition.
    pub totdisp: f64,
    /// `totdisp(predicted) / totdisp(truth)`; can drop below one when the
    /// predicted partition is tighter than the labeled one.
    pub normalized_totdisp: f64,
    /// Empty predicted clusters encountered while scoring dispersion.
    pub empty_clusters: Vec<usize>,
    /// Wall-clock seconds per pipeline stage, filled in by the caller that
    /// actually ran the stages (empty when only scoring is performed).
    pub runtime_seconds: BTreeMap<String, f64>,
}

fn check_labels(labels: &[usize], k: usize) -> Result<()> {
    for (position, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(Error::LabelOutOfRange { label, position, k });
        }
    }
    Ok(())
}

fn check_label_pair(labels_true: &[usize], labels_pred: &[usize], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "cluster count k must be at least 1".into(),
        ));
    }
    if labels_true.len() != labels_pred.len() {
        return Err(Error::DimMismatch {
            expected: labels_true.len(),
            got: labels_pred.len(),
        });
    }
    if labels_true.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    check_labels(labels_true, k)?;
    check_labels(labels_pred, k)
}

/// Raw (unaligned) confusion matrix: entry `[i][j]` counts points with true
/// label `i` and predicted label `j`.
pub fn confusion_matrix(
    labels_true: &[usize],
    labels_pred: &[usize],
    k: usize,
) -> Result<Vec<Vec<usize>>> {
    check_label_pair(labels_true, labels_pred, k)?;
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in labels_true.iter().zip(labels_pred.iter()) {
        confusion[t][p] += 1;
    }
    Ok(confusion)
}

/// Minimum-cost perfect assignment on a square cost matrix by the O(k^3)
/// shortest-augmenting-path algorithm with dual potentials. Returns the
/// optimal total cost and the column assigned to each row.
fn min_assignment(cost: &[Vec<i64>]) -> (i64, Vec<usize>) {
    let n = cost.len();
    let inf = i64::MAX / 2;
    // One-indexed with a sentinel column 0, per the standard formulation.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] != 0 {
            assignment[matched_row[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| cost[i][assignment[i]]).sum();
    (total, assignment)
}

/// Aligns predicted labels to the ground truth: finds the permutation `pi`
/// maximizing `sum_i confusion[i][pi(i)]` and returns it together with the
/// aligned confusion matrix `aligned[i][j] = confusion[i][pi(j)]`.
///
/// Among maximizing permutations the lexicographically smallest is returned,
/// fixed one row at a time by re-solving the assignment with a prefix pinned,
/// so ties never depend on iteration order internals.
pub fn hungarian_align(
    labels_true: &[usize],
    labels_pred: &[usize],
    k: usize,
) -> Result<(Vec<usize>, Vec<Vec<usize>>)> {
    let raw = confusion_matrix(labels_true, labels_pred, k)?;
    let base: Vec<Vec<i64>> = raw
        .iter()
        .map(|row| row.iter().map(|&c| -(c as i64)).collect())
        .collect();
    let (best, _) = min_assignment(&base);
    // A cost so large that any assignment touching it is strictly worse than
    // any assignment that does not (totals without it lie in [-N, 0]).
    let forbid = (labels_true.len() as i64 + 1) * (k as i64 + 1);
    let mut perm = vec![0usize; k];
    let mut used = vec![false; k];
    for i in 0..k {
        for j in 0..k {
            if used[j] {
                continue;
            }
            let mut pinned = base.clone();
            perm[i] = j;
            for (row, &col) in perm.iter().enumerate().take(i + 1) {
                for (c, entry) in pinned[row].iter_mut().enumerate() {
                    if c != col {
                        *entry = forbid;
                    }
                }
            }
            if min_assignment(&pinned).0 == best {
                used[j] = true;
                break;
            }
        }
    }
    let aligned = (0..k)
        .map(|i| (0..k).map(|j| raw[i][perm[j]]).collect())
        .collect();
    Ok((perm, aligned))
}

/// Fraction of points assigned to the correct group after optimal alignment.
pub fn accuracy(labels_true: &[usize], labels_pred: &[usize], k: usize) -> Result<f64> {
    let (_, aligned) = hungarian_align(labels_true, labels_pred, k)?;
    let trace: usize = (0..k).map(|i| aligned[i][i]).sum();
    Ok(trace as f64 / labels_true.len() as f64)
}

/// Closed-form log-Euclidean mean: `exp(mean_i log X_i)`.
fn log_euclidean_mean(points: &[SpdMatrix]) -> Result<SpdMatrix> {
    let logs: Vec<_> = points
        .iter()
        .map(|x| spectral_apply(x.matrix(), SpectralFn::Log))
        .collect::<Result<_>>()?;
    let mean_log = pairwise_sum(&logs) / points.len() as f64;
    Ok(SpdMatrix::from_symmetric_unchecked(spectral_apply(
        &mean_log,
        SpectralFn::Exp,
    )?))
}

fn cluster_centroid(
    members: &[SpdMatrix],
    metric: DispersionMetric,
    method: MeanMethod,
) -> Result<SpdMatrix> {
    match metric {
        DispersionMetric::LogEuclidean => log_euclidean_mean(members),
        DispersionMetric::Affine => match method {
            MeanMethod::Gd => Ok(frechet_mean_gd(members, &MeanSolverConfig::default())?.mean),
            MeanMethod::Icm => frechet_mean_icm(members, &identity_order(members.len())),
        },
    }
}

/// Total dispersion `sum_i mean_{x in CL_i} d(x, c_i)^2` with each centroid
/// `c_i` recomputed from the labels by the requested mean method.
pub fn total_dispersion(
    data: &[SpdMatrix],
    labels: &[usize],
    k: usize,
    metric: DispersionMetric,
    method: MeanMethod,
) -> Result<DispersionReport> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "cluster count k must be at least 1".into(),
        ));
    }
    if data.len() != labels.len() {
        return Err(Error::DimMismatch {
            expected: data.len(),
            got: labels.len(),
        });
    }
    if data.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    check_labels(labels, k)?;
    let mut value = 0.0;
    let mut empty_clusters = Vec::new();
    for cluster in 0..k {
        let members: Vec<SpdMatrix> = data
            .iter()
            .zip(labels.iter())
            .filter(|&(_, &l)| l == cluster)
            .map(|(x, _)| x.clone())
            .collect();
        if members.is_empty() {
            empty_clusters.push(cluster);
            continue;
        }
        let centroid = cluster_centroid(&members, metric, method)?;
        value += cluster_dispersion(&members, &centroid, metric)?;
    }
    Ok(DispersionReport {
        value,
        empty_clusters,
    })
}

/// `totdisp(predicted) / totdisp(truth)`. Values below one mean the
/// predicted partition is tighter than the labeled one.
pub fn normalized_dispersion(
    data: &[SpdMatrix],
    labels_pred: &[usize],
    labels_true: &[usize],
    k: usize,
    metric: DispersionMetric,
    method: MeanMethod,
) -> Result<f64> {
    let pred = total_dispersion(data, labels_pred, k, metric, method)?;
    let truth = total_dispersion(data, labels_true, k, metric, method)?;
    if truth.value == 0.0 {
        return Err(Error::InvalidArgument(
            "ground-truth dispersion is zero; normalized dispersion is undefined".into(),
        ));
    }
    Ok(pred.value / truth.value)
}

/// Scores a predicted partition against the ground truth: alignment,
/// accuracy, and (normalized) dispersion in one report.
///
/// `runtime_seconds` is left empty; the harness that actually timed the
/// pipeline stages fills it in.
pub fn evaluate(
    data: &[SpdMatrix],
    labels_true: &[usize],
    labels_pred: &[usize],
    k: usize,
    metric: DispersionMetric,
    method: MeanMethod,
) -> Result<EvalReport> {
    if data.len() != labels_true.len() {
        return Err(Error::DimMismatch {
            expected: data.len(),
            got: labels_true.len(),
        });
    }
    let (assignment, confusion) = hungarian_align(labels_true, labels_pred, k)?;
    let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
    let accuracy = trace as f64 / labels_true.len() as f64;
    let pred = total_dispersion(data, labels_pred, k, metric, method)?;
    let truth = total_dispersion(data, labels_true, k, metric, method)?;
    if truth.value == 0.0 {
        return Err(Error::InvalidArgument(
            "ground-truth dispersion is zero; normalized dispersion is undefined".into(),
        ));
    }
    Ok(EvalReport {
        accuracy,
        confusion,
        assignment,
        totdisp: pred.value,
        normalized_totdisp: pred.value / truth.value,
        empty_clusters: pred.empty_clusters,
        runtime_seconds: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_predictions_align_to_identity() {
        let labels = vec![0, 1, 2, 0, 1, 2, 2, 1];
        let (perm, confusion) = hungarian_align(&labels, &labels, 3).unwrap();
        assert_eq!(perm, vec![0, 1, 2]);
        assert_eq!(confusion[0], vec![2, 0, 0]);
        assert_eq!(confusion[1], vec![0, 3, 0]);
        assert_eq!(confusion[2], vec![0, 0, 3]);
        assert_eq!(accuracy(&labels, &labels, 3).unwrap(), 1.0);
    }

    #[test]
    fn alignment_absorbs_any_relabeling() {
        let truth = vec![0, 0, 1, 1, 2, 2, 3, 3];
        let sigma = [2, 3, 0, 1];
        let pred: Vec<usize> = truth.iter().map(|&l| sigma[l]).collect();
        let (perm, _) = hungarian_align(&truth, &pred, 4).unwrap();
        assert_eq!(perm, vec![2, 3, 0, 1]);
        assert_eq!(accuracy(&truth, &pred, 4).unwrap(), 1.0);
    }

    #[test]
    fn half_flipped_labels_score_one_half_with_lex_tie_break() {
        // Flipping half of each class makes the confusion matrix constant:
        // both permutations tie at trace 10 and the identity must win.
        let truth: Vec<usize> = (0..20).map(|i| i / 10).collect();
        let pred: Vec<usize> = truth
            .iter()
            .enumerate()
            .map(|(i, &l)| if i % 2 == 0 { 1 - l } else { l })
            .collect();
        let (perm, confusion) = hungarian_align(&truth, &pred, 2).unwrap();
        assert_eq!(confusion, vec![vec![5, 5], vec![5, 5]]);
        assert_eq!(perm, vec![0, 1]);
        assert_eq!(accuracy(&truth, &pred, 2).unwrap(), 0.5);
    }

    #[test]
    fn constant_predictor_on_balanced_data_scores_one_half() {
        let truth: Vec<usize> = (0..20).map(|i| i / 10).collect();
        let pred = vec![0usize; 20];
        assert_eq!(accuracy(&truth, &pred, 2).unwrap(), 0.5);
        // Lexicographic tie-break: [0, 1] and [1, 0] both reach trace 10.
        let (perm, _) = hungarian_align(&truth, &pred, 2).unwrap();
        assert_eq!(perm, vec![0, 1]);
    }

    #[test]
    fn one_misassigned_point_in_a_hundred_scores_99_percent() {
        let truth: Vec<usize> = (0..100).map(|i| i / 25).collect();
        let mut pred = truth.clone();
        pred[13] = (pred[13] + 1) % 4;
        assert_relative_eq!(accuracy(&truth, &pred, 4).unwrap(), 0.99);
    }

    #[test]
    fn out_of_range_labels_are_reported_with_their_position() {
        let truth = vec![0, 1, 0];
        let pred = vec![0, 2, 0];
        let err = hungarian_align(&truth, &pred, 2).unwrap_err();
        assert_eq!(
            err,
            Error::LabelOutOfRange {
                label: 2,
                position: 1,
                k: 2
            }
        );
        let err = accuracy(&pred, &truth, 2).unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { position: 1, .. }));
    }

    #[test]
    fn length_mismatch_and_empty_inputs_are_rejected() {
        assert!(matches!(
            hungarian_align(&[0, 1], &[0], 2).unwrap_err(),
            Error::DimMismatch {
                expected: 2,
                got: 1
            }
        ));
        assert!(matches!(
            hungarian_align(&[], &[], 2).unwrap_err(),
            Error::TooFewPoints { .. }
        ));
    }

    fn diag(entries: &[f64]) -> SpdMatrix {
        SpdMatrix::from_diagonal(entries).unwrap()
    }

    #[test]
    fn singleton_clusters_have_zero_dispersion() {
        let data = vec![diag(&[1.0, 2.0]), diag(&[3.0, 1.0]), diag(&[0.5, 5.0])];
        let labels = vec![0, 1, 2];
        for metric in [DispersionMetric::Affine, DispersionMetric::LogEuclidean] {
            for method in [MeanMethod::Gd, MeanMethod::Icm] {
                let report = total_dispersion(&data, &labels, 3, metric, method).unwrap();
                assert!(report.value < 1e-24, "dispersion {}", report.value);
                assert!(report.empty_clusters.is_empty());
            }
        }
    }

    #[test]
    fn two_point_cluster_contributes_quarter_squared_distance() {
        // d(Id, e^2 Id) = 2 sqrt(2) in SPD(2), so the cluster contributes
        // d^2 / 4 = 2 for both mean methods (midpoint centroid).
        let e2 = std::f64::consts::E.powi(2);
        let data = vec![diag(&[1.0, 1.0]), diag(&[e2, e2])];
        let labels = vec![0, 0];
        for method in [MeanMethod::Gd, MeanMethod::Icm] {
            let report =
                total_dispersion(&data, &labels, 1, DispersionMetric::Affine, method).unwrap();
            assert_relative_eq!(report.value, 2.0, max_relative = 1e-7);
        }
    }

    #[test]
    fn metrics_agree_on_commuting_data() {
        let data = vec![
            diag(&[1.0, 4.0]),
            diag(&[2.0, 2.0]),
            diag(&[0.5, 8.0]),
            diag(&[3.0, 0.25]),
        ];
        let labels = vec![0, 0, 1, 1];
        let affine = total_dispersion(
            &data,
            &labels,
            2,
            DispersionMetric::Affine,
            MeanMethod::Icm,
        )
        .unwrap();
        let le = total_dispersion(
            &data,
            &labels,
            2,
            DispersionMetric::LogEuclidean,
            MeanMethod::Icm,
        )
        .unwrap();
        assert_relative_eq!(affine.value, le.value, max_relative = 1e-9);
    }

    #[test]
    fn empty_predicted_clusters_are_flagged_not_fatal() {
        let data = vec![diag(&[1.0, 2.0]), diag(&[2.0, 1.0])];
        let labels = vec![0, 0];
        let report = total_dispersion(
            &data,
            &labels,
            3,
            DispersionMetric::Affine,
            MeanMethod::Icm,
        )
        .unwrap();
        assert_eq!(report.empty_clusters, vec![1, 2]);
        assert!(report.value.is_finite());
    }

    #[test]
    fn predicting_the_truth_normalizes_to_exactly_one() {
        let data = vec![
            diag(&[1.0, 2.0]),
            diag(&[1.5, 2.5]),
            diag(&[8.0, 9.0]),
            diag(&[9.0, 8.0]),
        ];
        let labels = vec![0, 0, 1, 1];
        let norm = normalized_dispersion(
            &data,
            &labels,
            &labels,
            2,
            DispersionMetric::Affine,
            MeanMethod::Icm,
        )
        .unwrap();
        assert_eq!(norm, 1.0);
    }

    #[test]
    fn evaluate_assembles_a_consistent_report() {
        let data = vec![
            diag(&[1.0, 2.0]),
            diag(&[1.5, 2.5]),
            diag(&[8.0, 9.0]),
            diag(&[9.0, 8.0]),
        ];
        let truth = vec![0, 0, 1, 1];
        let pred = vec![1, 1, 0, 0];
        let report = evaluate(
            &data,
            &truth,
            &pred,
            2,
            DispersionMetric::Affine,
            MeanMethod::Icm,
        )
        .unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.assignment, vec![1, 0]);
        assert_eq!(report.normalized_totdisp, 1.0);
        assert!(report.runtime_seconds.is_empty());
        // Row and column sums of the aligned confusion match cluster sizes.
        for i in 0..2 {
            let row: usize = report.confusion[i].iter().sum();
            assert_eq!(row, 2);
            let col: usize = (0..2).map(|r| report.confusion[r][i]).sum();
            assert_eq!(col, 2);
        }
    }
}
