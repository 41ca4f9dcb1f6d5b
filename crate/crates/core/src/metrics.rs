//! Brier score, cause-specific concordance, accuracy and AUC.
//!
//! Event indices are 0-based. Rows whose outcome at the evaluation time is
//! unknown (censored or missing time, missing type) are skipped by the Brier
//! score.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation, TimeStatus};
use crate::error::{Error, Result};
use crate::num::Real;

fn check_aligned<T>(values: &[T], data_len: usize) -> Result<()> {
    if values.len() != data_len {
        return Err(Error::Data(format!(
            "{} predictions for {} rows",
            values.len(),
            data_len
        )));
    }
    Ok(())
}

/// `1(t_i ≤ t, y_i = j)` where it is determined by the data.
fn case_indicator<T: Real>(o: &Observation<T>, j: usize, t: T) -> Option<bool> {
    match (o.time, o.event_index()) {
        (TimeStatus::Observed(ti), Some(y)) => Some(ti <= t && y == j),
        (TimeStatus::Observed(ti), None) if ti > t => Some(false),
        (TimeStatus::RightCensored(c), _) if c >= t => Some(false),
        _ => None,
    }
}

/// `(1/n) Σ_i [1(t_i ≤ t, y_i = j) - CIF_j(i, t)]²` over rows whose indicator
/// is known.
pub fn brier_score<T: Real>(cif: &[T], data: &Dataset<T>, j: usize, t: T) -> Result<T> {
    check_aligned(cif, data.len())?;
    let mut sum = T::zero();
    let mut n = 0usize;
    for (o, &p) in data.observations.iter().zip(cif) {
        if let Some(hit) = case_indicator(o, j, t) {
            let d = if hit { T::one() } else { T::zero() } - p;
            sum = sum + d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::UndefinedMetric("no rows with a known outcome".into()));
    }
    Ok(sum / T::from_usize(n).expect("count fits in a float"))
}

/// Estimate of `P(score_i > score_i' | y_i = j, t_i ≤ t, and t_i < t_i' or
/// y_i' ≠ j)` over ordered pairs. Tied scores count one half. Pairs whose
/// comparability cannot be decided (an `i'` of unknown type with
/// `t_i' ≤ t_i`) are left out.
pub fn c_index<T: Real>(scores: &[T], data: &Dataset<T>, j: usize, t: T) -> Result<T> {
    check_aligned(scores, data.len())?;
    let obs = &data.observations;
    let mut num = 0.0;
    let mut den = 0usize;
    for (i, oi) in obs.iter().enumerate() {
        let (TimeStatus::Observed(ti), Some(yi)) = (oi.time, oi.event_index()) else {
            continue;
        };
        if yi != j || ti > t {
            continue;
        }
        for (ip, op) in obs.iter().enumerate() {
            if ip == i {
                continue;
            }
            let comparable = match op.time {
                TimeStatus::Missing => false,
                TimeStatus::Observed(tp) | TimeStatus::RightCensored(tp) => {
                    ti < tp || op.event_index().is_some_and(|y| y != j)
                }
            };
            if !comparable {
                continue;
            }
            den += 1;
            num += match scores[i].partial_cmp(&scores[ip]) {
                Some(Ordering::Greater) => 1.0,
                Some(Ordering::Equal) => 0.5,
                _ => 0.0,
            };
        }
    }
    if den == 0 {
        return Err(Error::UndefinedMetric("no comparable pairs".into()));
    }
    Ok(T::lit(num / den as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub auc: f64,
}

/// Accuracy at threshold 0.5 and the rank-statistic AUC (ties one half) for
/// probabilities of the positive class.
pub fn classification_metrics<T: Real>(probabilities: &[T], labels: &[bool]) -> Result<ClassificationMetrics> {
    check_aligned(probabilities, labels.len())?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let half = T::lit(crate::predict::CLASSIFICATION_THRESHOLD);
    let correct = probabilities
        .iter()
        .zip(labels)
        .filter(|&(&p, &l)| (p >= half) == l)
        .count();
    // Mann-Whitney with mid-ranks
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| probabilities[a].partial_cmp(&probabilities[b]).unwrap_or(Ordering::Equal));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && probabilities[order[end]] == probabilities[order[start]] {
            end += 1;
        }
        let mid_rank = (start + end + 1) as f64 / 2.0;
        rank_sum_pos += mid_rank * order[start..end].iter().filter(|&&i| labels[i]).count() as f64;
        start = end;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    let auc = (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / labels.len() as f64,
        auc,
    })
}
