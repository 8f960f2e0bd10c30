//! Ranking and classification metrics, plus Welch's two-sample t-test.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Precondition(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Precondition("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ROC needs both classes, got {n_pos} positive and {n_neg} negative"
        )));
    }
    Ok((n_pos, n_neg))
}

/// Indices sorted by descending score, then grouped into runs of equal score.
fn tie_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Doubled Mann-Whitney count: 2 per (positive, negative) pair the positive
/// wins and 1 per tie.
fn doubled_wins(scores: &[f64], labels: &[bool]) -> u64 {
    let mut negatives_below: u64 = labels.iter().filter(|&&l| !l).count() as u64;
    let mut wins2 = 0u64;
    for group in tie_groups(scores) {
        let pos = group.iter().filter(|&&i| labels[i]).count() as u64;
        let neg = group.len() as u64 - pos;
        negatives_below -= neg;
        wins2 += pos * (2 * negatives_below + neg);
    }
    wins2
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (n_pos, n_neg) = check_scores(scores, labels)?;
    Ok(doubled_wins(scores, labels) as f64 / (2 * n_pos as u64 * n_neg as u64) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC staircase from (0, 0) to (1, 1), one vertex per distinct score.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    let (n_pos, n_neg) = check_scores(scores, labels)?;
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    for group in tie_groups(scores) {
        let pos = group.iter().filter(|&&i| labels[i]).count();
        tp += pos;
        fp += group.len() - pos;
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    Ok(points)
}

/// Area under a piecewise-linear curve by the trapezoid rule.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

/// Mean over relevant items of precision at the item's rank. The ranking is
/// a total order; ties are whatever order it stores.
pub fn average_precision<S: AsRef<str>>(ranking: &[S], relevant: &HashSet<String>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::UndefinedMetric("average precision needs a relevant item".into()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, id) in ranking.iter().enumerate() {
        if relevant.contains(id.as_ref()) {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    if hits != relevant.len() {
        return Err(Error::Precondition(format!(
            "{} of {} relevant items are missing from the ranking",
            relevant.len() - hits,
            relevant.len()
        )));
    }
    Ok(sum / hits as f64)
}

pub fn mean_ap(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::UndefinedMetric("mean of zero average precisions".into()));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Precondition("each group needs at least two values".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if !(va > 0.0 && vb > 0.0) {
        return Err(Error::Precondition(format!(
            "degenerate variance (group variances {va} and {vb})"
        )));
    }
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numeric(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, df, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[&str]) -> HashSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn auc_four_scores() {
        let auc = roc_auc(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert_eq!(auc, 0.75);
    }

    #[test]
    fn auc_extremes() {
        assert_eq!(roc_auc(&[3.0, 2.0, 1.0], &[true, false, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[1.0, 1.0, 1.0], &[true, false, false]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[1.0, 2.0], &[true, true]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn roc_passes_through_corners() {
        let perfect = roc_curve(&[3.0, 2.0, 1.0, 0.0], &[true, true, false, false]).unwrap();
        assert!(perfect.contains(&RocPoint { fpr: 0.0, tpr: 1.0 }));
        let reversed = roc_curve(&[0.0, 1.0, 2.0, 3.0], &[true, true, false, false]).unwrap();
        assert!(reversed.contains(&RocPoint { fpr: 1.0, tpr: 0.0 }));
        assert_eq!(*reversed.last().unwrap(), RocPoint { fpr: 1.0, tpr: 1.0 });
    }

    #[test]
    fn ap_ranks_one_and_three() {
        let ap = average_precision(&["a", "b", "c", "d"], &set(&["a", "c"])).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&["a", "c", "b"], &set(&["a", "c"])).unwrap(), 1.0);
    }

    #[test]
    fn ap_errors() {
        assert!(average_precision(&["a"], &HashSet::new()).is_err());
        assert!(average_precision(&["a"], &set(&["z"])).is_err());
    }

    #[test]
    fn map_values() {
        assert_eq!(mean_ap(&[1.0, 0.0, 0.5]).unwrap(), 0.5);
        assert_eq!(mean_ap(&[0.37]).unwrap(), 0.37);
    }

    #[test]
    fn welch_reference_values() {
        // Reference: scipy.stats.ttest_ind(equal_var=False).
        let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!((r.t + 1.0).abs() < 1e-12);
        assert!((r.df - 8.0).abs() < 1e-12);
        assert!((r.p - 0.346_593_507_087_334_16).abs() < 1e-6);
        let r = welch_t_test(&[1.0, 2.5, 3.1, 8.0], &[0.5, 0.7, 0.9, 1.2, 1.1, 0.8]).unwrap();
        assert!((r.t - 1.831_849_667_463_796_5).abs() < 1e-9);
        assert!((r.p - 0.163_483_804_016_417_2).abs() < 1e-6);
    }

    #[test]
    fn welch_identical_and_swapped() {
        let a = [1.0, 2.0, 4.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        let b = [0.5, 3.0, 3.5, 9.0];
        let (ab, ba) = (welch_t_test(&a, &b).unwrap(), welch_t_test(&b, &a).unwrap());
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p, ba.p);
    }

    #[test]
    fn welch_degenerate() {
        assert!(welch_t_test(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(welch_t_test(&[1.0], &[2.0, 3.0]).is_err());
    }
}
