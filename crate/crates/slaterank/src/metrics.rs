//! Rank-based evaluation: NDCG at cutoffs and MRR, with fixed conventions
//! for degenerate slates so results are reproducible bit-for-bit.
//!
//! Ranking always sorts by score descending with ties broken by original
//! within-slate index ascending (a stable order, chosen over optimistic or
//! pessimistic tie handling for reproducibility).

use std::fmt::Write as _;

use crate::data::Slate;
use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("slate has no mask-true items")]
    AllMasked,
    #[error("evaluation split has no slates")]
    EmptySplit,
}

/// Indices of real items sorted by score descending, ties by index ascending.
fn ranking(scores: &[f64], mask: &[bool]) -> Result<Vec<usize>, MetricsError> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| mask[i]).collect();
    if idx.is_empty() {
        return Err(MetricsError::AllMasked);
    }
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores must be comparable (no NaN)")
            .then(a.cmp(&b))
    });
    Ok(idx)
}

fn gain(label: u32) -> f64 {
    2f64.powi(label as i32) - 1.0
}

fn discount(rank_1based: usize) -> f64 {
    1.0 / (1.0 + rank_1based as f64).log2()
}

/// DCG@k of items taken in the given order.
fn dcg_at_k(order: &[usize], labels: &[u32], k: usize) -> f64 {
    order
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, &i)| gain(labels[i]) * discount(pos + 1))
        .sum()
}

/// NDCG@k with gains `2^label − 1` and discounts `1/log2(1+rank)`.
///
/// Padded items are excluded before ranking; a slate whose real labels are
/// all zero scores exactly 1.0 (there is nothing to get wrong); `k` larger
/// than the slate behaves as `k` = slate length. The ideal DCG truncates at
/// `k` as well.
pub fn ndcg_at_k(
    scores: &[f64],
    labels: &[u32],
    mask: &[bool],
    k: usize,
) -> Result<f64, MetricsError> {
    assert!(k >= 1, "cutoff k must be at least 1");
    let order = ranking(scores, mask)?;
    if order.iter().all(|&i| labels[i] == 0) {
        return Ok(1.0);
    }
    let mut ideal = order.clone();
    ideal.sort_by(|&a, &b| labels[b].cmp(&labels[a]).then(a.cmp(&b)));
    let dcg = dcg_at_k(&order, labels, k);
    let idcg = dcg_at_k(&ideal, labels, k);
    Ok(dcg / idcg)
}

/// Reciprocal rank of the highest-scored relevant item (label > 0), or 0
/// when the slate has no relevant item (the slate still counts in means).
pub fn mrr(scores: &[f64], labels: &[u32], mask: &[bool]) -> Result<f64, MetricsError> {
    let order = ranking(scores, mask)?;
    for (pos, &i) in order.iter().enumerate() {
        if labels[i] > 0 {
            return Ok(1.0 / (pos + 1) as f64);
        }
    }
    Ok(0.0)
}

/// Mean metrics over a split, one uniformly weighted entry per slate.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub cutoffs: Vec<usize>,
    /// Mean NDCG aligned with `cutoffs`.
    pub ndcg: Vec<f64>,
    pub mrr: f64,
    pub slate_count: usize,
    /// Slates whose real labels were all zero (scored as NDCG 1.0).
    pub degenerate_count: usize,
}

impl EvalReport {
    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.cutoffs.iter().position(|&c| c == k).map(|i| self.ndcg[i])
    }

    /// `metric<TAB>cutoff<TAB>value` lines; floats print with Rust's
    /// shortest round-trip formatting so equal runs are byte-identical.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric\tcutoff\tvalue\n");
        for (k, v) in self.cutoffs.iter().zip(&self.ndcg) {
            writeln!(out, "ndcg\t{k}\t{v}").unwrap();
        }
        writeln!(out, "mrr\t-\t{}", self.mrr).unwrap();
        writeln!(out, "slates\t-\t{}", self.slate_count).unwrap();
        writeln!(out, "degenerate_slates\t-\t{}", self.degenerate_count).unwrap();
        out
    }

    /// Console-friendly table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "  {:<12} {:>10}", "metric", "value").unwrap();
        for (k, v) in self.cutoffs.iter().zip(&self.ndcg) {
            writeln!(out, "  {:<12} {:>10.5}", format!("ndcg@{k}"), v).unwrap();
        }
        writeln!(out, "  {:<12} {:>10.5}", "mrr", self.mrr).unwrap();
        writeln!(out, "  {:<12} {:>10}", "slates", self.slate_count).unwrap();
        writeln!(out, "  {:<12} {:>10}", "degenerate", self.degenerate_count).unwrap();
        out
    }
}

/// Scores every slate with `score_fn` and averages per-slate metrics.
/// `score_fn` returns one score per position (padded positions may carry
/// any value; they are excluded by the mask before ranking).
pub fn evaluate_split<F: Real, E>(
    slates: &[Slate<F>],
    cutoffs: &[usize],
    mut score_fn: impl FnMut(&Slate<F>) -> Result<Vec<f64>, E>,
) -> Result<EvalReport, crate::Error>
where
    crate::Error: From<E>,
{
    if slates.is_empty() {
        return Err(MetricsError::EmptySplit.into());
    }
    let mut ndcg_sums = vec![0.0f64; cutoffs.len()];
    let mut mrr_sum = 0.0f64;
    let mut degenerate = 0usize;
    for slate in slates {
        let scores = score_fn(slate)?;
        assert_eq!(scores.len(), slate.len(), "score_fn must score every position");
        for (sum, &k) in ndcg_sums.iter_mut().zip(cutoffs) {
            *sum += ndcg_at_k(&scores, &slate.labels, &slate.mask, k).map_err(crate::Error::Metrics)?;
        }
        mrr_sum += mrr(&scores, &slate.labels, &slate.mask).map_err(crate::Error::Metrics)?;
        if slate
            .labels
            .iter()
            .zip(&slate.mask)
            .all(|(&y, &m)| !m || y == 0)
        {
            degenerate += 1;
        }
    }
    let n = slates.len() as f64;
    Ok(EvalReport {
        cutoffs: cutoffs.to_vec(),
        ndcg: ndcg_sums.into_iter().map(|s| s / n).collect(),
        mrr: mrr_sum / n,
        slate_count: slates.len(),
        degenerate_count: degenerate,
    })
}
