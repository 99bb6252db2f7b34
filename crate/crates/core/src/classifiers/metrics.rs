//! One-vs-rest ROC AUC by concordance counting.

use serde::{Deserialize, Serialize};

use super::ProbVector;
use crate::hedge_engine::N_PERIODS;
use crate::{Error, Result};

/// AUC of `scores` for the positives flagged in `positive`.
///
/// Equals the fraction of (positive, negative) pairs where the positive scores
/// higher, counting ties as one half. Computed from midranks in `O(n log n)`.
pub fn roc_auc_binary(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::input("scores and labels differ in length"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both positives and negatives".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::input("NaN score"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if positive[k] {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    /// `None` for classes absent from (or covering all of) the labels.
    pub per_class: [Option<f64>; N_PERIODS],
    pub macro_auc: f64,
}

/// Per-class one-vs-rest AUC and their unweighted mean over evaluable classes.
pub fn roc_auc_ovr(scores: &[ProbVector], labels: &[usize]) -> Result<AucReport> {
    if scores.len() != labels.len() {
        return Err(Error::input("scores and labels differ in length"));
    }
    let mut per_class = [None; N_PERIODS];
    for (k, slot) in per_class.iter_mut().enumerate() {
        let pos: Vec<bool> = labels.iter().map(|&l| l == k).collect();
        let col: Vec<f64> = scores.iter().map(|p| p.0[k]).collect();
        match roc_auc_binary(&col, &pos) {
            Ok(auc) => *slot = Some(auc),
            Err(Error::UndefinedMetric(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric("labels contain a single class".into()));
    }
    let macro_auc = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(AucReport { per_class, macro_auc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separating_and_reversed_scores() {
        let pos = [false, false, true, true];
        assert_eq!(roc_auc_binary(&[0.1, 0.2, 0.8, 0.9], &pos).unwrap(), 1.0);
        assert_eq!(roc_auc_binary(&[0.9, 0.8, 0.2, 0.1], &pos).unwrap(), 0.0);
    }

    #[test]
    fn concordant_pair_count() {
        let auc = roc_auc_binary(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert!((auc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn ties_get_half_credit() {
        let auc = roc_auc_binary(&[0.5, 0.5], &[false, true]).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(
            roc_auc_binary(&[0.1, 0.2], &[true, true]),
            Err(Error::UndefinedMetric(_))
        ));
        let scores = vec![ProbVector::uniform(); 3];
        assert!(matches!(roc_auc_ovr(&scores, &[2, 2, 2]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn absent_classes_are_excluded_from_macro() {
        let scores = vec![ProbVector::one_hot(0), ProbVector::one_hot(1), ProbVector::one_hot(0)];
        let rep = roc_auc_ovr(&scores, &[0, 1, 0]).unwrap();
        assert_eq!(rep.per_class[0], Some(1.0));
        assert_eq!(rep.per_class[1], Some(1.0));
        assert!(rep.per_class[2..].iter().all(|c| c.is_none()));
        assert_eq!(rep.macro_auc, 1.0);
    }
}
