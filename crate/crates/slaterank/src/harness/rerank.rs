//! The re-ranking pipeline: a weak linear base ranker imposes an input
//! ordering, and the context-aware model (with positional encodings) is
//! trained to refine it.

use std::fmt::Write as _;
use std::path::Path;

use super::config::{Precision, RunConfig};
use super::train::{load_splits, train_on, LoadedData, TrainOutcome};
use super::HarnessError;
use crate::data::Slate;
use crate::metrics::{mrr, ndcg_at_k, EvalReport};
use crate::nn::Tensor;
use crate::Real;

/// Least-squares linear scorer `score = w · x` (no intercept), the stand-in
/// for a production first-stage ranker. Deterministic given its inputs.
#[derive(Clone, Debug)]
pub struct LinearBaseRanker {
    pub weights: Vec<f64>,
}

impl LinearBaseRanker {
    /// Fits `w` by ridge-stabilized normal equations over every real item
    /// of the given slates, targets = labels.
    pub fn fit<F: Real>(slates: &[&Slate<F>]) -> Result<Self, HarnessError> {
        let d = match slates.first() {
            Some(s) => s.d_f(),
            None => {
                return Err(HarnessError::SingularFit {
                    reason: "no slates to fit on".into(),
                })
            }
        };
        let mut xtx = vec![0.0f64; d * d];
        let mut xty = vec![0.0f64; d];
        let mut n_items = 0usize;
        for slate in slates {
            for i in 0..slate.len() {
                if !slate.mask[i] {
                    continue;
                }
                n_items += 1;
                let row: Vec<f64> = slate.features.row(i).iter().map(|v| v.to_f64().unwrap()).collect();
                let y = slate.labels[i] as f64;
                for a in 0..d {
                    xty[a] += row[a] * y;
                    for b in a..d {
                        xtx[a * d + b] += row[a] * row[b];
                    }
                }
            }
        }
        if n_items == 0 {
            return Err(HarnessError::SingularFit {
                reason: "no unmasked items to fit on".into(),
            });
        }
        for a in 0..d {
            for b in 0..a {
                xtx[a * d + b] = xtx[b * d + a];
            }
        }
        let max_diag = (0..d).map(|a| xtx[a * d + a]).fold(0.0f64, f64::max);
        let ridge = 1e-8 * max_diag.max(1.0);
        for a in 0..d {
            xtx[a * d + a] += ridge;
        }
        let weights = cholesky_solve(&mut xtx, &xty, d)?;
        Ok(LinearBaseRanker { weights })
    }

    /// One score per position; padded positions get `-inf` so they sort
    /// last.
    pub fn score<F: Real>(&self, slate: &Slate<F>) -> Vec<f64> {
        (0..slate.len())
            .map(|i| {
                if !slate.mask[i] {
                    return f64::NEG_INFINITY;
                }
                slate
                    .features
                    .row(i)
                    .iter()
                    .zip(&self.weights)
                    .map(|(v, w)| v.to_f64().unwrap() * w)
                    .sum()
            })
            .collect()
    }
}

/// Solves `A x = b` for symmetric positive-definite `A` (given row-major,
/// modified in place into its Cholesky factor).
fn cholesky_solve(a: &mut [f64], b: &[f64], d: usize) -> Result<Vec<f64>, HarnessError> {
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(HarnessError::SingularFit {
                reason: format!("non-positive pivot at column {j}"),
            });
        }
        let diag = diag.sqrt();
        a[j * d + j] = diag;
        for i in (j + 1)..d {
            let mut v = a[i * d + j];
            for k in 0..j {
                v -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = v / diag;
        }
    }
    // Forward substitution L z = b, then back substitution L^T x = z.
    let mut x = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            x[i] -= a[i * d + k] * x[k];
        }
        x[i] /= a[i * d + i];
    }
    for i in (0..d).rev() {
        for k in (i + 1)..d {
            x[i] -= a[k * d + i] * x[k];
        }
        x[i] /= a[i * d + i];
    }
    Ok(x)
}

/// Base scores for every training slate, predicted by a ranker that never
/// saw that slate: slates are assigned round-robin to `k` folds and each
/// fold is scored by a ranker fit on the other `k - 1`.
pub fn kfold_base_scores<F: Real>(
    slates: &[Slate<F>],
    k: usize,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    if k < 2 || k > slates.len() {
        return Err(HarnessError::FoldTooSmall {
            k,
            n_slates: slates.len(),
        });
    }
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); slates.len()];
    for fold in 0..k {
        let train_set: Vec<&Slate<F>> = slates
            .iter()
            .enumerate()
            .filter(|(i, _)| i % k != fold)
            .map(|(_, s)| s)
            .collect();
        let ranker = LinearBaseRanker::fit(&train_set)?;
        for (i, slate) in slates.iter().enumerate() {
            if i % k == fold {
                scores[i] = ranker.score(slate);
            }
        }
    }
    Ok(scores)
}

/// Reorders a slate's real items by descending base score (ties keep
/// their original relative order); padded positions stay at the end.
pub fn sort_by_base_scores<F: Real>(slate: &Slate<F>, scores: &[f64]) -> Slate<F> {
    assert_eq!(scores.len(), slate.len());
    let mut order: Vec<usize> = (0..slate.len()).filter(|&i| slate.mask[i]).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("base scores must be comparable")
            .then(a.cmp(&b))
    });
    order.extend((0..slate.len()).filter(|&i| !slate.mask[i]));
    let mut features = Tensor::zeros(slate.len(), slate.d_f());
    let mut labels = vec![0u32; slate.len()];
    let mut mask = vec![false; slate.len()];
    for (new, &old) in order.iter().enumerate() {
        features.row_mut(new).copy_from_slice(slate.features.row(old));
        labels[new] = slate.labels[old];
        mask[new] = slate.mask[old];
    }
    Slate {
        qid: slate.qid.clone(),
        features,
        labels,
        mask,
    }
}

#[derive(Debug)]
pub struct RerankOutcome {
    /// Test metrics of the base ranker's own ordering.
    pub base_report: EvalReport,
    /// Training outcome on base-sorted slates with positional encodings.
    pub pe: TrainOutcome,
    /// Same data and seeds, positional encodings disabled.
    pub no_pe: TrainOutcome,
}

/// Runs the full comparison: cross-fitted base scores on train (to avoid
/// leaking a slate's own labels into its input ordering), full-fit scores
/// on valid/test, slates sorted by base score, then one model trained with
/// positional encodings and one without. Writes `pe/` and `no_pe/` run
/// directories plus a `rerank.tsv` summary.
pub fn rerank_pipeline(config: &RunConfig, out_dir: &Path) -> Result<RerankOutcome, crate::Error> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("config.json"), config.to_json_pretty())?;
    match config.precision {
        Precision::F64 => rerank_on::<f64>(config, out_dir),
        Precision::F32 => rerank_on::<f32>(config, out_dir),
    }
}

fn rerank_on<F: Real>(config: &RunConfig, out_dir: &Path) -> Result<RerankOutcome, crate::Error> {
    let data = load_splits::<F>(config)?;
    let train_scores = kfold_base_scores(&data.train, config.rerank_folds)?;
    let full_fit = LinearBaseRanker::fit(&data.train.iter().collect::<Vec<_>>())?;
    let valid_scores: Vec<Vec<f64>> = data.valid.iter().map(|s| full_fit.score(s)).collect();
    let test_scores: Vec<Vec<f64>> = data.test.iter().map(|s| full_fit.score(s)).collect();
    let base_report = report_for_scores(&data.test, &test_scores, &config.cutoffs)?;

    let sort_all = |slates: &[Slate<F>], scores: &[Vec<f64>]| -> Vec<Slate<F>> {
        slates
            .iter()
            .zip(scores)
            .map(|(s, sc)| sort_by_base_scores(s, sc))
            .collect()
    };
    let sorted = LoadedData {
        train: sort_all(&data.train, &train_scores),
        valid: sort_all(&data.valid, &valid_scores),
        test: sort_all(&data.test, &test_scores),
    };

    let mut with_pe = config.clone();
    with_pe.model.use_positional_encoding = true;
    let mut without_pe = config.clone();
    without_pe.model.use_positional_encoding = false;
    let pe = train_on(&with_pe, &sorted, &out_dir.join("pe"))?;
    let no_pe = train_on(&without_pe, &sorted, &out_dir.join("no_pe"))?;

    let mut tsv = String::from("variant\tmetric\tcutoff\tvalue\n");
    for (variant, report) in [
        ("base", &base_report),
        ("no_pe", &no_pe.test_report),
        ("pe", &pe.test_report),
    ] {
        for (k, v) in report.cutoffs.iter().zip(&report.ndcg) {
            writeln!(tsv, "{variant}\tndcg\t{k}\t{v}").unwrap();
        }
        writeln!(tsv, "{variant}\tmrr\t-\t{}", report.mrr).unwrap();
    }
    std::fs::write(out_dir.join("rerank.tsv"), tsv)?;

    Ok(RerankOutcome {
        base_report,
        pe,
        no_pe,
    })
}

/// Evaluation report from precomputed per-slate scores.
fn report_for_scores<F: Real>(
    slates: &[Slate<F>],
    scores: &[Vec<f64>],
    cutoffs: &[usize],
) -> Result<EvalReport, crate::Error> {
    assert_eq!(slates.len(), scores.len());
    let mut ndcg_sums = vec![0.0f64; cutoffs.len()];
    let mut mrr_sum = 0.0;
    let mut degenerate = 0usize;
    for (slate, sc) in slates.iter().zip(scores) {
        for (sum, &k) in ndcg_sums.iter_mut().zip(cutoffs) {
            *sum += ndcg_at_k(sc, &slate.labels, &slate.mask, k).map_err(crate::Error::Metrics)?;
        }
        mrr_sum += mrr(sc, &slate.labels, &slate.mask).map_err(crate::Error::Metrics)?;
        if slate.labels.iter().zip(&slate.mask).all(|(&y, &m)| !m || y == 0) {
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_slates(n: usize, l: usize, d: usize, seed: u64) -> Vec<Slate<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|q| {
                let features = Tensor::from_fn(l, d, |_, _| rng.gen_range(-1.0..1.0));
                let labels = (0..l).map(|_| rng.gen_range(0..5)).collect();
                Slate::new(format!("{q}"), features, labels)
            })
            .collect()
    }

    #[test]
    fn least_squares_residual_is_orthogonal_to_features() {
        let slates = random_slates(8, 10, 4, 1);
        let refs: Vec<&Slate<f64>> = slates.iter().collect();
        let ranker = LinearBaseRanker::fit(&refs).unwrap();
        // X^T (y - X w) = 0 is the normal-equation optimality condition.
        let mut residual_dot = vec![0.0f64; 4];
        for slate in &slates {
            let scores = ranker.score(slate);
            for i in 0..slate.len() {
                let r = slate.labels[i] as f64 - scores[i];
                for (a, acc) in residual_dot.iter_mut().enumerate() {
                    *acc += slate.features.get(i, a) * r;
                }
            }
        }
        for (a, v) in residual_dot.iter().enumerate() {
            assert!(v.abs() < 1e-4, "normal equations violated at {a}: {v}");
        }
    }

    #[test]
    fn kfold_rejects_degenerate_fold_counts() {
        let slates = random_slates(4, 5, 3, 2);
        assert!(matches!(
            kfold_base_scores(&slates, 1),
            Err(HarnessError::FoldTooSmall { k: 1, .. })
        ));
        assert!(matches!(
            kfold_base_scores(&slates, 5),
            Err(HarnessError::FoldTooSmall { k: 5, .. })
        ));
        assert!(kfold_base_scores(&slates, 2).is_ok());
        assert!(kfold_base_scores(&slates, 4).is_ok());
    }

    #[test]
    fn kfold_scores_come_from_models_that_never_saw_the_slate() {
        // Labels rise along +x in slate a but along -x in slate b, so the
        // two single-slate fits have opposite weight signs. Each slate's
        // fold model is fit only on the other slate; with leakage the
        // slopes below would both flip.
        let a = Slate::new("a", Tensor::from_fn(4, 1, |r, _| r as f64 + 1.0), vec![0, 1, 2, 3]);
        let b = Slate::new("b", Tensor::from_fn(4, 1, |r, _| -(r as f64) - 1.0), vec![0, 1, 2, 3]);
        let scores = kfold_base_scores(&[a, b], 2).unwrap();
        // a scored with b's fit (negative weight): decreasing in x.
        assert!(scores[0][0] > scores[0][3], "slate a was scored by its own fit");
        // b scored with a's fit (positive weight): decreasing along b's rows.
        assert!(scores[1][0] > scores[1][3], "slate b was scored by its own fit");
    }

    #[test]
    fn sorting_by_base_scores_reorders_and_keeps_padding_last() {
        let mut slate = random_slates(1, 5, 3, 3).remove(0);
        slate.mask[4] = false;
        let scores = vec![0.1, 0.9, -0.3, 0.9, f64::NEG_INFINITY];
        let sorted = sort_by_base_scores(&slate, &scores);
        // Descending with index ties: 1, 3, 0, 2, then the padded row.
        assert_eq!(sorted.labels[0], slate.labels[1]);
        assert_eq!(sorted.labels[1], slate.labels[3]);
        assert_eq!(sorted.labels[2], slate.labels[0]);
        assert_eq!(sorted.labels[3], slate.labels[2]);
        assert!(!sorted.mask[4]);
        assert_eq!(sorted.features.row(0), slate.features.row(1));
    }

    #[test]
    fn pipeline_produces_both_variants_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig::from_json(
            r#"{
                "data": {"synthetic": {"n_slates": 16, "l": 8, "d_f": 5, "task": "positional"}},
                "model": {"d_f": 5, "d_fc": 8, "N": 1, "H": 1, "d_h": 8, "p_drop": 0.0},
                "loss": {"kind": "ordinal"},
                "optimizer": {"lr": 0.005, "epochs": 2},
                "l": 8,
                "rerank_folds": 4
            }"#,
        )
        .unwrap();
        let outcome = rerank_pipeline(&config, dir.path()).unwrap();
        assert!(dir.path().join("rerank.tsv").exists());
        assert!(dir.path().join("pe").join("metrics.tsv").exists());
        assert!(dir.path().join("no_pe").join("metrics.tsv").exists());
        assert!(outcome.base_report.ndcg_at(5).unwrap() > 0.0);
        let tsv = std::fs::read_to_string(dir.path().join("rerank.tsv")).unwrap();
        assert!(tsv.lines().count() > 6);
        assert!(tsv.contains("base\tndcg"));
        assert!(tsv.contains("pe\tndcg"));
    }

    #[test]
    fn k_equal_one_maps_to_fold_too_small_via_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig::from_json(
            r#"{
                "data": {"synthetic": {"n_slates": 8, "l": 6, "d_f": 5, "task": "positional"}},
                "model": {"d_f": 5, "d_fc": 8, "N": 1, "H": 1, "d_h": 8, "p_drop": 0.0},
                "loss": {"kind": "ordinal"},
                "optimizer": {"lr": 0.005, "epochs": 1},
                "rerank_folds": 1
            }"#,
        )
        .unwrap();
        let err = rerank_pipeline(&config, dir.path()).unwrap_err();
        assert!(matches!(
            err,
            crate::Error::Harness(HarnessError::FoldTooSmall { k: 1, .. })
        ));
    }
}
