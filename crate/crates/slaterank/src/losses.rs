//! Ranking objectives, built as tape graphs over a model's raw scores.
//!
//! Seven losses share one entry point, [`attach_loss`]: pointwise (`rmse`,
//! `ordinal`), pairwise (`ranknet`, `lambdarank`, `ndcgloss2pp`) and
//! listwise (`listnet`, `listmle`). Each takes the score variable a model
//! produced on the tape, appends the loss computation and returns a `1x1`
//! scalar variable ready for `backward`.
//!
//! Rank-dependent weights of the pairwise family (the ρ/δ/maxDCG terms)
//! are computed from the *current* score values and entered into the graph
//! as constants: the hard permutation is not differentiable, so gradients
//! flow only through the score differences. The same applies to ListMLE's
//! ground-truth permutation, whose label ties are broken uniformly at
//! random per call. When gradient-checking these losses, fix the terms
//! once via [`pairwise_terms`] / [`listmle_order`] and attach with
//! [`attach_pairwise_with_terms`] / [`attach_listmle_with_order`] so the
//! discrete choices cannot flip between perturbed evaluations.

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::data::Slate;
use crate::nn::{NnError, Tape, Tensor, Var};
use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum LossError {
    #[error("every item in the slate is masked out")]
    AllMasked,
    #[error("label {label} out of range for {n_levels} relevance levels")]
    LabelOutOfRange { label: u32, n_levels: usize },
    #[error("binary listnet target undefined: slate has no clicked items")]
    BinaryWithNoClicks,
    #[error("invalid loss spec: {reason}")]
    InvalidSpec { reason: String },
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Rmse,
    Ordinal,
    RankNet,
    LambdaRank,
    #[serde(rename = "ndcgloss2pp")]
    NdcgLoss2pp,
    ListNet,
    ListMle,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Rmse => "rmse",
            LossKind::Ordinal => "ordinal",
            LossKind::RankNet => "ranknet",
            LossKind::LambdaRank => "lambdarank",
            LossKind::NdcgLoss2pp => "ndcgloss2pp",
            LossKind::ListNet => "listnet",
            LossKind::ListMle => "listmle",
        }
    }
}

/// Loss selection plus the handful of scalar knobs the objectives take.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Pairwise sigmoid steepness.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Weight of the δ term in ndcgloss2pp.
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Number of relevance levels (grades run `0..n_levels`).
    #[serde(default = "default_n_levels")]
    pub n_levels: usize,
    /// ListNet against binarized labels (`y > 0` counts as a click).
    #[serde(default)]
    pub binary_listnet: bool,
}

fn default_sigma() -> f64 {
    1.0
}
fn default_mu() -> f64 {
    10.0
}
fn default_n_levels() -> usize {
    5
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        LossSpec {
            kind,
            sigma: default_sigma(),
            mu: default_mu(),
            n_levels: default_n_levels(),
            binary_listnet: false,
        }
    }

    /// Score outputs per item the model must produce for this loss.
    pub fn output_dim(&self) -> usize {
        match self.kind {
            LossKind::Ordinal => self.n_levels - 1,
            _ => 1,
        }
    }

    /// Largest representable grade; rmse rescales sigmoids onto `[0, max]`.
    pub fn max_grade(&self) -> f64 {
        (self.n_levels - 1) as f64
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if self.sigma <= 0.0 {
            return Err(LossError::InvalidSpec {
                reason: format!("sigma must be positive, got {}", self.sigma),
            });
        }
        if self.mu < 0.0 {
            return Err(LossError::InvalidSpec {
                reason: format!("mu must be non-negative, got {}", self.mu),
            });
        }
        if self.n_levels < 2 {
            return Err(LossError::InvalidSpec {
                reason: format!("need at least 2 relevance levels, got {}", self.n_levels),
            });
        }
        Ok(())
    }
}

/// Gains and rank discounts for one slate.
///
/// `gains[i] = (2^{y_i} - 1) / max_dcg` for real items (0 for padded),
/// `discounts[r] = log2(2 + r)` for 0-based rank `r` (so `discounts[0]`
/// is the rank-1 discount), and `max_dcg` is the ideal DCG over the whole
/// slate — defined as 1 when every label is zero so the normalized gains
/// stay finite (they are then all zero anyway).
#[derive(Debug, Clone)]
pub struct GainTable {
    pub gains: Vec<f64>,
    pub discounts: Vec<f64>,
    pub max_dcg: f64,
}

pub fn gain_table(labels: &[u32], mask: &[bool]) -> GainTable {
    let raw: Vec<f64> = labels
        .iter()
        .zip(mask)
        .map(|(&y, &m)| if m { (2f64).powi(y as i32) - 1.0 } else { 0.0 })
        .collect();
    let discounts: Vec<f64> = (0..labels.len()).map(|r| ((2 + r) as f64).log2()).collect();
    let mut ideal: Vec<f64> = raw.iter().copied().filter(|&g| g > 0.0).collect();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let max_dcg: f64 = ideal
        .iter()
        .zip(&discounts)
        .map(|(g, d)| g / d)
        .sum::<f64>()
        .max(1.0);
    GainTable {
        gains: raw.iter().map(|g| g / max_dcg).collect(),
        discounts,
        max_dcg,
    }
}

/// Cumulative ("is the grade above threshold t?") encoding of a grade:
/// grade 2 of 5 levels becomes `[1, 1, 0, 0]`.
pub fn ordinal_encode(label: u32, n_levels: usize) -> Result<Vec<f64>, LossError> {
    if (label as usize) >= n_levels {
        return Err(LossError::LabelOutOfRange { label, n_levels });
    }
    Ok((1..n_levels)
        .map(|t| if (label as usize) >= t { 1.0 } else { 0.0 })
        .collect())
}

/// Collapses the per-level outputs of an ordinal model into one ranking
/// score: the sum of sigmoided outputs, a real number in `(0, n_levels-1)`.
pub fn ordinal_score(outputs: &[f64]) -> f64 {
    outputs.iter().map(|&x| stable_sigmoid(x)).sum()
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// 1-based rank of every item under descending score (ties broken by
/// original index, ascending); padded items get rank 0 and must not be
/// consulted.
fn ranks(scores: &[f64], mask: &[bool]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| mask[i]).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores must be comparable (no NaN)")
            .then(a.cmp(&b))
    });
    let mut r = vec![0usize; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        r[i] = pos + 1;
    }
    r
}

/// All label-discordant pairs `(i, j)` with `y_i > y_j` among unmasked
/// items, each with its loss weight under `kind`:
/// 1 for ranknet, `|G_i - G_j| ρ_ij` for lambdarank and
/// `(ρ_ij + μ δ_ij) |G_i - G_j|` for ndcgloss2pp, where
/// `ρ_ij = |1/D_{r(i)} - 1/D_{r(j)}|` and
/// `δ_ij = |1/D_{|r(i)-r(j)|} - 1/D_{|r(i)-r(j)|+1}|` are read off the
/// current score-induced ranking and the normalized gain table.
pub fn pairwise_terms(
    scores: &[f64],
    labels: &[u32],
    mask: &[bool],
    kind: LossKind,
    mu: f64,
) -> Vec<(usize, usize, f64)> {
    let l = labels.len();
    let rank_of = ranks(scores, mask);
    let table = gain_table(labels, mask);
    // Rank differences range over 1..l, so we need discounts up to D_{l+1};
    // the table holds D_1..D_l at indices 0..l-1.
    let disc = |rank: usize| ((1 + rank) as f64).log2();

    let mut terms = Vec::new();
    for i in 0..l {
        for j in 0..l {
            if !mask[i] || !mask[j] || labels[i] <= labels[j] {
                continue;
            }
            let w = match kind {
                LossKind::RankNet => 1.0,
                LossKind::LambdaRank | LossKind::NdcgLoss2pp => {
                    let (ri, rj) = (rank_of[i], rank_of[j]);
                    let rho = (1.0 / disc(ri) - 1.0 / disc(rj)).abs();
                    let dg = (table.gains[i] - table.gains[j]).abs();
                    if kind == LossKind::LambdaRank {
                        dg * rho
                    } else {
                        let span = ri.abs_diff(rj);
                        let delta = (1.0 / disc(span) - 1.0 / disc(span + 1)).abs();
                        (rho + mu * delta) * dg
                    }
                }
                _ => unreachable!("pairwise_terms called with a non-pairwise kind"),
            };
            terms.push((i, j, w));
        }
    }
    terms
}

/// Ground-truth item order for ListMLE: unmasked indices by label
/// descending, ties shuffled uniformly by `rng`.
pub fn listmle_order(labels: &[u32], mask: &[bool], rng: &mut dyn RngCore) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).filter(|&i| mask[i]).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| labels[b].cmp(&labels[a])); // stable: keeps the shuffle within ties
    order
}

/// Selection matrix that compacts an `l x c` tape value down to the given
/// rows (in the given order) via matmul.
fn selection<F: Real>(rows: &[usize], l: usize) -> Tensor<F> {
    let mut s = Tensor::zeros(rows.len(), l);
    for (k, &i) in rows.iter().enumerate() {
        s.set(k, i, F::one());
    }
    s
}

fn unmasked(slate: &Slate<impl Real>) -> Result<Vec<usize>, LossError> {
    let idx: Vec<usize> = (0..slate.len()).filter(|&i| slate.mask[i]).collect();
    if idx.is_empty() {
        return Err(LossError::AllMasked);
    }
    Ok(idx)
}

/// Builds the configured loss over `scores` (shape `l x spec.output_dim()`)
/// for one slate and returns the scalar loss variable.
pub fn attach_loss<F: Real>(
    tape: &mut Tape<F>,
    scores: Var,
    slate: &Slate<F>,
    spec: &LossSpec,
    rng: &mut dyn RngCore,
) -> Result<Var, LossError> {
    spec.validate()?;
    match spec.kind {
        LossKind::Rmse => attach_rmse(tape, scores, slate, spec.max_grade()),
        LossKind::Ordinal => attach_ordinal(tape, scores, slate, spec.n_levels),
        LossKind::RankNet | LossKind::LambdaRank | LossKind::NdcgLoss2pp => {
            let current: Vec<f64> = column_values(tape, scores);
            let terms = pairwise_terms(&current, &slate.labels, &slate.mask, spec.kind, spec.mu);
            unmasked(slate)?;
            attach_pairwise_with_terms(tape, scores, &terms, spec.sigma)
        }
        LossKind::ListNet => attach_listnet(tape, scores, slate, spec.binary_listnet),
        LossKind::ListMle => {
            let order = listmle_order(&slate.labels, &slate.mask, rng);
            if order.is_empty() {
                return Err(LossError::AllMasked);
            }
            attach_listmle_with_order(tape, scores, &order)
        }
    }
}

fn column_values<F: Real>(tape: &Tape<F>, v: Var) -> Vec<f64> {
    let t = tape.value(v);
    (0..t.rows()).map(|r| t.get(r, 0).to_f64().unwrap()).collect()
}

fn attach_rmse<F: Real>(
    tape: &mut Tape<F>,
    scores: Var,
    slate: &Slate<F>,
    max_grade: f64,
) -> Result<Var, LossError> {
    let idx = unmasked(slate)?;
    let sel = tape.constant(selection(&idx, slate.len()));
    let compact = tape.matmul(sel, scores)?;
    let sig = tape.sigmoid(compact);
    let pred = tape.scale(sig, crate::cast(max_grade));
    let target = tape.constant(Tensor::from_fn(idx.len(), 1, |r, _| {
        crate::cast(slate.labels[idx[r]] as f64)
    }));
    let resid = tape.sub(target, pred)?;
    let sq = tape.mul(resid, resid)?;
    let total = tape.reduce_sum(sq);
    Ok(tape.sqrt(total))
}

fn attach_ordinal<F: Real>(
    tape: &mut Tape<F>,
    scores: Var,
    slate: &Slate<F>,
    n_levels: usize,
) -> Result<Var, LossError> {
    let idx = unmasked(slate)?;
    let mut encodings = Vec::with_capacity(idx.len());
    for &i in &idx {
        encodings.push(ordinal_encode(slate.labels[i], n_levels)?);
    }
    let sel = tape.constant(selection(&idx, slate.len()));
    let compact = tape.matmul(sel, scores)?; // n x (n_levels-1)
    let targets = tape.constant(Tensor::from_fn(idx.len(), n_levels - 1, |r, c| {
        crate::cast(encodings[r][c])
    }));
    // Per-cell binary cross-entropy on logits: softplus(x) - x*t.
    let sp = tape.softplus(compact);
    let xt = tape.mul(compact, targets)?;
    let cells = tape.sub(sp, xt)?;
    let total = tape.reduce_sum(cells);
    let denom = (idx.len() * (n_levels - 1)) as f64;
    Ok(tape.scale(total, crate::cast(1.0 / denom)))
}

/// Pairwise loss with the (i, j, weight) terms already fixed — the form
/// used both internally and by the gradient checker:
/// `sum_ij w_ij * softplus(-sigma (s_i - s_j)) / ln 2`.
pub fn attach_pairwise_with_terms<F: Real>(
    tape: &mut Tape<F>,
    scores: Var,
    terms: &[(usize, usize, f64)],
    sigma: f64,
) -> Result<Var, LossError> {
    let l = tape.value(scores).rows();
    if terms.is_empty() {
        return Ok(tape.constant(Tensor::zeros(1, 1)));
    }
    let mut diff = Tensor::zeros(terms.len(), l);
    let mut weights = Tensor::zeros(terms.len(), 1);
    for (k, &(i, j, w)) in terms.iter().enumerate() {
        diff.set(k, i, F::one());
        diff.set(k, j, -F::one());
        weights.set(k, 0, crate::cast(w));
    }
    let p = tape.constant(diff);
    let w = tape.constant(weights);
    let d = tape.matmul(p, scores)?;
    let neg = tape.scale(d, crate::cast(-sigma));
    let sp = tape.softplus(neg);
    let weighted = tape.mul(sp, w)?;
    let total = tape.reduce_sum(weighted);
    Ok(tape.scale(total, crate::cast(std::f64::consts::LN_2.recip())))
}

fn attach_listnet<F: Real>(
    tape: &mut Tape<F>,
    scores: Var,
    slate: &Slate<F>,
    binary: bool,
) -> Result<Var, LossError> {
    let idx = unmasked(slate)?;
    let target: Vec<f64> = if binary {
        let clicks: Vec<f64> = idx
            .iter()
            .map(|&i| if slate.labels[i] > 0 { 1.0 } else { 0.0 })
            .collect();
        let total: f64 = clicks.iter().sum();
        if total == 0.0 {
            return Err(LossError::BinaryWithNoClicks);
        }
        clicks.iter().map(|c| c / total).collect()
    } else {
        let max = idx
            .iter()
            .map(|&i| slate.labels[i] as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = idx
            .iter()
            .map(|&i| ((slate.labels[i] as f64) - max).exp())
            .collect();
        let z: f64 = exps.iter().sum();
        exps.iter().map(|e| e / z).collect()
    };

    let sel = tape.constant(selection(&idx, slate.len()));
    let compact = tape.matmul(sel, scores)?; // n x 1
    let row = tape.transpose(compact); // 1 x n
    let lse = tape.row_logsumexp(row); // 1 x 1
    let t = tape.constant(Tensor::from_fn(idx.len(), 1, |r, _| crate::cast(target[r])));
    let tdots = tape.mul(compact, t)?;
    let dot = tape.reduce_sum(tdots);
    Ok(tape.sub(lse, dot)?)
}

/// Plackett-Luce negative log-likelihood of the given item order:
/// `sum_k [ logsumexp(s_{o_k}..s_{o_n}) - s_{o_k} ]`. The order is fixed,
/// which is what makes the loss differentiable and the gradient checkable.
pub fn attach_listmle_with_order<F: Real>(
    tape: &mut Tape<F>,
    scores: Var,
    order: &[usize],
) -> Result<Var, LossError> {
    let l = tape.value(scores).rows();
    let sel = tape.constant(selection(order, l));
    let g = tape.matmul(sel, scores)?; // n x 1, ground-truth order
    let suffix = tape.suffix_logsumexp(g)?;
    let nll = tape.sub(suffix, g)?;
    Ok(tape.reduce_sum(nll))
}

/// Arithmetic mean of per-slate scalar losses — the batch objective.
pub fn mean_of<F: Real>(tape: &mut Tape<F>, losses: &[Var]) -> Result<Var, NnError> {
    assert!(!losses.is_empty(), "mean_of needs at least one loss");
    let mut acc = losses[0];
    for &v in &losses[1..] {
        acc = tape.add(acc, v)?;
    }
    Ok(tape.scale(acc, crate::cast(1.0 / losses.len() as f64)))
}

/// One-call evaluation for tests and simple tooling: builds a throwaway
/// tape, attaches the loss over constant scores and reads the value.
pub fn eval_loss<F: Real>(
    scores: &Tensor<F>,
    slate: &Slate<F>,
    spec: &LossSpec,
    rng: &mut dyn RngCore,
) -> Result<f64, LossError> {
    let mut tape = Tape::new();
    let s = tape.constant(scores.clone());
    let loss = attach_loss(&mut tape, s, slate, spec, rng)?;
    Ok(tape.value(loss).item().to_f64().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, ParamSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn slate(labels: Vec<u32>) -> Slate<f64> {
        let l = labels.len();
        Slate::new("q", Tensor::zeros(l, 1), labels)
    }

    fn column(values: &[f64]) -> Tensor<f64> {
        Tensor::from_fn(values.len(), 1, |r, _| values[r])
    }

    fn spec(kind: LossKind) -> LossSpec {
        LossSpec::new(kind)
    }

    fn eval(kind: LossKind, scores: &[f64], labels: Vec<u32>) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        eval_loss(&column(scores), &slate(labels), &spec(kind), &mut rng).unwrap()
    }

    #[test]
    fn rmse_zero_when_rescaled_predictions_hit_labels() {
        // sigmoid(logit(y/4))*4 == y; feed the exact logits.
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let scores = [logit(2.0 / 4.0), logit(1.0 / 4.0), logit(3.0 / 4.0)];
        let loss = eval(LossKind::Rmse, &scores, vec![2, 1, 3]);
        assert!(loss.abs() < 1e-9, "loss {loss}");
    }

    #[test]
    fn rmse_single_item_half_scale() {
        // Raw score 0 maps to 4 * 0.5 = 2; label 4 leaves residual 2.
        let loss = eval(LossKind::Rmse, &[0.0], vec![4]);
        assert!((loss - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ordinal_encoding_matches_contract() {
        assert_eq!(ordinal_encode(2, 5).unwrap(), vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(ordinal_encode(0, 5).unwrap(), vec![0.0, 0.0, 0.0, 0.0]);
        assert_eq!(ordinal_encode(4, 5).unwrap(), vec![1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            ordinal_encode(5, 5),
            Err(LossError::LabelOutOfRange { label: 5, n_levels: 5 })
        ));
    }

    #[test]
    fn ordinal_round_trip_recovers_grade_order() {
        // Strong logits encoding each grade must decode back in grade order.
        for a in 0..5u32 {
            for b in 0..5u32 {
                let enc_a: Vec<f64> = ordinal_encode(a, 5).unwrap().iter().map(|t| 20.0 * (t - 0.5)).collect();
                let enc_b: Vec<f64> = ordinal_encode(b, 5).unwrap().iter().map(|t| 20.0 * (t - 0.5)).collect();
                let (sa, sb) = (ordinal_score(&enc_a), ordinal_score(&enc_b));
                assert_eq!(a.cmp(&b), sa.partial_cmp(&sb).unwrap().then(std::cmp::Ordering::Equal));
            }
        }
    }

    #[test]
    fn ordinal_all_zero_logits_cost_ln2() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scores = Tensor::zeros(3, 4);
        let loss = eval_loss(&scores, &slate(vec![0, 2, 4]), &spec(LossKind::Ordinal), &mut rng).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn ranknet_tied_pair_costs_one_bit() {
        let loss = eval(LossKind::RankNet, &[1.5, 1.5], vec![1, 0]);
        assert!((loss - 1.0).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn all_equal_labels_make_pairwise_losses_vanish() {
        for kind in [LossKind::RankNet, LossKind::LambdaRank, LossKind::NdcgLoss2pp] {
            let loss = eval(kind, &[0.3, -0.2, 0.9], vec![2, 2, 2]);
            assert_eq!(loss, 0.0, "{kind:?}");
        }
    }

    #[test]
    fn pairwise_frozen_oracle_values() {
        // Worked step by step from the rank/gain definitions on
        // labels [2,1,0], scores [0.1,0.2,0.3], sigma 1, mu 10.
        let table = gain_table(&[2, 1, 0], &[true; 3]);
        assert!((table.max_dcg - 3.6309297535714574).abs() < 1e-12);

        let ranknet = eval(LossKind::RankNet, &[0.1, 0.2, 0.3], vec![2, 1, 0]);
        assert!((ranknet - 3.299345728682443).abs() < 1e-12, "{ranknet}");
        let lambdarank = eval(LossKind::LambdaRank, &[0.1, 0.2, 0.3], vec![2, 1, 0]);
        assert!((lambdarank - 0.6623057141218145).abs() < 1e-12, "{lambdarank}");
        let ndcg2pp = eval(LossKind::NdcgLoss2pp, &[0.1, 0.2, 0.3], vec![2, 1, 0]);
        assert!((ndcg2pp - 5.182801948260743).abs() < 1e-12, "{ndcg2pp}");
    }

    #[test]
    fn ndcgloss2pp_with_mu_zero_is_lambdarank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let l = rng.gen_range(2..8);
            let scores: Vec<f64> = (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let labels: Vec<u32> = (0..l).map(|_| rng.gen_range(0..5)).collect();
            let mut s2 = spec(LossKind::NdcgLoss2pp);
            s2.mu = 0.0;
            let a = eval_loss(&column(&scores), &slate(labels.clone()), &s2, &mut rng).unwrap();
            let b = eval_loss(&column(&scores), &slate(labels), &spec(LossKind::LambdaRank), &mut rng).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn pairwise_translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [LossKind::RankNet, LossKind::LambdaRank, LossKind::NdcgLoss2pp] {
            let scores: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let shifted: Vec<f64> = scores.iter().map(|s| s + 17.25).collect();
            let labels: Vec<u32> = (0..6).map(|_| rng.gen_range(0..5)).collect();
            let a = eval(kind, &scores, labels.clone());
            let b = eval(kind, &shifted, labels);
            assert!((a - b).abs() < 1e-9, "{kind:?}: {a} vs {b}");
        }
    }

    #[test]
    fn listwise_translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let shifted: Vec<f64> = scores.iter().map(|s| s - 3.5).collect();
        let labels: Vec<u32> = vec![4, 3, 2, 2, 1, 0];
        for kind in [LossKind::ListNet, LossKind::ListMle] {
            // Same tie-break seed on both sides.
            let mut r1 = ChaCha8Rng::seed_from_u64(9);
            let mut r2 = ChaCha8Rng::seed_from_u64(9);
            let a = eval_loss(&column(&scores), &slate(labels.clone()), &spec(kind), &mut r1).unwrap();
            let b = eval_loss(&column(&shifted), &slate(labels.clone()), &spec(kind), &mut r2).unwrap();
            assert!((a - b).abs() < 1e-9, "{kind:?}: {a} vs {b}");
        }
    }

    #[test]
    fn listnet_uniform_self_cross_entropy_is_ln2() {
        let loss = eval(LossKind::ListNet, &[0.7, 0.7], vec![1, 1]);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn listnet_target_invariant_to_label_shift() {
        let scores = [0.4, -0.1, 0.8];
        let a = eval(LossKind::ListNet, &scores, vec![0, 1, 2]);
        let b = eval(LossKind::ListNet, &scores, vec![2, 3, 4]);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn binary_listnet_frozen_oracle_and_no_click_error() {
        let mut s = spec(LossKind::ListNet);
        s.binary_listnet = true;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // lse(10,-10) - 10 cancels around magnitude 10, so the tiny loss is
        // only accurate to ~ulp(10); pin it to that, not to its own scale.
        let loss = eval_loss(&column(&[10.0, -10.0]), &slate(vec![1, 0]), &s, &mut rng).unwrap();
        assert!((loss - 2.0611536203143807e-9).abs() < 1e-12, "{loss}");

        let err = eval_loss(&column(&[1.0, 2.0]), &slate(vec![0, 0]), &s, &mut rng);
        assert!(matches!(err, Err(LossError::BinaryWithNoClicks)));
    }

    #[test]
    fn listmle_frozen_oracle_value() {
        let loss = eval(LossKind::ListMle, &[3.0, 2.0, 1.0], vec![2, 1, 0]);
        assert!((loss - 0.7208676519626031).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn listmle_trivial_cases() {
        assert_eq!(eval(LossKind::ListMle, &[5.0], vec![3]), 0.0);
        let two = eval(LossKind::ListMle, &[0.2, 0.2], vec![1, 0]);
        assert!((two - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn losses_ignore_storage_order_of_items() {
        // Same (score, label) multiset in two storage orders.
        let kinds = [
            LossKind::Rmse,
            LossKind::RankNet,
            LossKind::LambdaRank,
            LossKind::NdcgLoss2pp,
            LossKind::ListNet,
            LossKind::ListMle,
        ];
        for kind in kinds {
            let mut r1 = ChaCha8Rng::seed_from_u64(11);
            let mut r2 = ChaCha8Rng::seed_from_u64(11);
            let a = eval_loss(
                &column(&[0.5, -0.3, 1.2, 0.0]),
                &slate(vec![3, 0, 2, 1]),
                &spec(kind),
                &mut r1,
            )
            .unwrap();
            let b = eval_loss(
                &column(&[1.2, 0.0, 0.5, -0.3]),
                &slate(vec![2, 1, 3, 0]),
                &spec(kind),
                &mut r2,
            )
            .unwrap();
            assert!((a - b).abs() < 1e-12, "{kind:?}: {a} vs {b}");
        }
        // Ordinal, with matrix scores.
        let sa = Tensor::from_fn(2, 4, |r, c| (r * 4 + c) as f64 * 0.1 - 0.2);
        let mut sb = Tensor::zeros(2, 4);
        sb.row_mut(0).copy_from_slice(sa.row(1));
        sb.row_mut(1).copy_from_slice(sa.row(0));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = eval_loss(&sa, &slate(vec![1, 3]), &spec(LossKind::Ordinal), &mut rng).unwrap();
        let b = eval_loss(&sb, &slate(vec![3, 1]), &spec(LossKind::Ordinal), &mut rng).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn masked_items_never_affect_any_loss() {
        let kinds = [
            LossKind::Rmse,
            LossKind::Ordinal,
            LossKind::RankNet,
            LossKind::LambdaRank,
            LossKind::NdcgLoss2pp,
            LossKind::ListNet,
            LossKind::ListMle,
        ];
        for kind in kinds {
            let sp = spec(kind);
            let dim = sp.output_dim();
            let mut s = slate(vec![2, 0, 1, 4]);
            s.mask[3] = false; // labels[3]=4 would dominate every loss if counted
            let scores_a = Tensor::from_fn(4, dim, |r, c| (r + c) as f64 * 0.3 - 0.4);
            let mut scores_b = scores_a.clone();
            for v in scores_b.row_mut(3).iter_mut() {
                *v = 123.0;
            }
            let mut r1 = ChaCha8Rng::seed_from_u64(13);
            let mut r2 = ChaCha8Rng::seed_from_u64(13);
            let a = eval_loss(&scores_a, &s, &sp, &mut r1).unwrap();
            let b = eval_loss(&scores_b, &s, &sp, &mut r2).unwrap();
            assert!((a - b).abs() < 1e-12, "{kind:?} leaked mask: {a} vs {b}");
        }
    }

    #[test]
    fn all_masked_slate_is_an_error() {
        let mut s = slate(vec![1, 2]);
        s.mask = vec![false, false];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in [LossKind::Rmse, LossKind::RankNet, LossKind::ListNet, LossKind::ListMle] {
            let sp = spec(kind);
            let scores = Tensor::zeros(2, sp.output_dim());
            assert!(matches!(
                eval_loss(&scores, &s, &sp, &mut rng),
                Err(LossError::AllMasked)
            ));
        }
    }

    #[test]
    fn every_loss_gradient_passes_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let kinds = [
            LossKind::Rmse,
            LossKind::Ordinal,
            LossKind::RankNet,
            LossKind::LambdaRank,
            LossKind::NdcgLoss2pp,
            LossKind::ListNet,
            LossKind::ListMle,
        ];
        for kind in kinds {
            let sp = spec(kind);
            let dim = sp.output_dim();
            let mut s = slate(vec![2, 0, 1, 3, 1]);
            s.mask[4] = false;

            let mut params = ParamSet::<f64>::new();
            let raw = params.register(
                "scores",
                Tensor::from_fn(5, dim, |r, c| 0.3 * (r as f64) - 0.2 * (c as f64) + 0.05),
            );
            // Freeze the discrete structure once, from the initial scores.
            let terms = match kind {
                LossKind::RankNet | LossKind::LambdaRank | LossKind::NdcgLoss2pp => {
                    let initial: Vec<f64> =
                        (0..5).map(|r| params.value(raw).get(r, 0)).collect();
                    pairwise_terms(&initial, &s.labels, &s.mask, kind, sp.mu)
                }
                _ => Vec::new(),
            };
            let mut order_rng = ChaCha8Rng::seed_from_u64(2);
            let order = listmle_order(&s.labels, &s.mask, &mut order_rng);

            let report = grad_check(
                &mut params,
                |p, with_grad| {
                    let mut tape = Tape::new();
                    let scores = tape.param(p, raw);
                    let loss = match kind {
                        LossKind::RankNet | LossKind::LambdaRank | LossKind::NdcgLoss2pp => {
                            attach_pairwise_with_terms(&mut tape, scores, &terms, sp.sigma)
                        }
                        LossKind::ListMle => attach_listmle_with_order(&mut tape, scores, &order),
                        _ => {
                            let mut rng = ChaCha8Rng::seed_from_u64(0);
                            attach_loss(&mut tape, scores, &s, &sp, &mut rng)
                        }
                    }
                    .unwrap_or_else(|e| panic!("{kind:?}: {e}"));
                    let value = tape.value(loss).item();
                    if with_grad {
                        tape.backward(loss, p)?;
                    }
                    Ok(value)
                },
                1e-6,
                1e-4,
            )
            .unwrap();
            assert!(report.passed(), "{kind:?} failed grad check: {report:?}");
        }
        let _ = rng.gen::<u8>();
    }

    #[test]
    fn listmle_tie_break_is_uniformly_random_but_seeded() {
        let labels = vec![1, 1, 0];
        let mask = vec![true; 3];
        let mut seen_01 = false;
        let mut seen_10 = false;
        for seed in 0..32 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let order = listmle_order(&labels, &mask, &mut rng);
            assert_eq!(order[2], 2);
            match (order[0], order[1]) {
                (0, 1) => seen_01 = true,
                (1, 0) => seen_10 = true,
                other => panic!("impossible order {other:?}"),
            }
        }
        assert!(seen_01 && seen_10, "tie-break never flipped across seeds");
        // Same seed, same order.
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(listmle_order(&labels, &mask, &mut r1), listmle_order(&labels, &mask, &mut r2));
    }

    #[test]
    fn mean_of_averages_scalars() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::from_fn(1, 1, |_, _| 1.0));
        let b = tape.constant(Tensor::from_fn(1, 1, |_, _| 2.0));
        let c = tape.constant(Tensor::from_fn(1, 1, |_, _| 6.0));
        let m = mean_of(&mut tape, &[a, b, c]).unwrap();
        assert!((tape.value(m).item() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn spec_validation_and_serde_names() {
        let bad = LossSpec { sigma: 0.0, ..LossSpec::new(LossKind::RankNet) };
        assert!(bad.validate().is_err());
        let json = r#"{"kind":"ndcgloss2pp","mu":5.0}"#;
        let sp: LossSpec = serde_json::from_str(json).unwrap();
        assert_eq!(sp.kind, LossKind::NdcgLoss2pp);
        assert_eq!(sp.mu, 5.0);
        assert_eq!(sp.sigma, 1.0);
        assert_eq!(sp.n_levels, 5);
        assert_eq!(LossSpec::new(LossKind::Ordinal).output_dim(), 4);
        assert_eq!(LossSpec::new(LossKind::ListNet).output_dim(), 1);
    }
}
