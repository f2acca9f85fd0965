//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single PASS/FAIL line (visible with `--nocapture`, or on failure).

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slaterank::data::Slate;
use slaterank::harness::{gradcheck_command, rerank_pipeline, train_command, RunConfig};
use slaterank::losses::{eval_loss, ordinal_encode, LossKind, LossSpec};
use slaterank::metrics::ndcg_at_k;
use slaterank::model::{ContextAwareRanker, ModelConfig, Scorer};
use slaterank::nn::{ParamSet, Tape, Tensor};
use slaterank::{cast, Real};

fn verdict(n: usize, name: &str, pass: bool, detail: &str) {
    let v = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n:2} ({name}): {v} — {detail}");
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

// -- criterion 1 -----------------------------------------------------------

fn equivariance_worst<F: Real>() -> f64 {
    let d_f = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let config = ModelConfig {
        d_f,
        d_fc: 32,
        n_blocks: 2,
        n_heads: 2,
        d_h: 32,
        d_ff: None,
        p_drop: 0.3, // irrelevant: scoring runs in eval mode
        use_positional_encoding: false,
        output_dim: 1,
    };
    let mut params = ParamSet::<F>::new();
    let model = ContextAwareRanker::new(config, &mut params, &mut rng).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let l = rng.gen_range(1..=30);
        let features =
            Tensor::<F>::from_fn(l, d_f, |_, _| cast::<F>(rng.gen_range(-2.0..2.0)));
        let slate = Slate::new("q", features, vec![0; l]);
        let base = model.score_slate(&params, &slate).unwrap();

        let mut perm: Vec<usize> = (0..l).collect();
        perm.shuffle(&mut rng);
        let permuted = Slate::new(
            "q",
            Tensor::<F>::from_fn(l, d_f, |r, c| slate.features.get(perm[r], c)),
            perm.iter().map(|&i| slate.labels[i]).collect(),
        );
        let scores = model.score_slate(&params, &permuted).unwrap();
        for (r, &src) in perm.iter().enumerate() {
            worst = worst.max((scores[r] - base[src]).abs());
        }
    }
    worst
}

#[test]
fn criterion_01_permutation_equivariance() {
    let started = Instant::now();
    let worst32 = equivariance_worst::<f32>();
    let worst64 = equivariance_worst::<f64>();
    let elapsed = started.elapsed();
    let pass = worst32 < 1e-5 && worst64 < 1e-10 && elapsed < Duration::from_secs(30);
    verdict(
        1,
        "permutation equivariance",
        pass,
        &format!(
            "100 slates, no PE: max |score(pi(x)) - pi(score(x))| = {worst32:.2e} (f32), {worst64:.2e} (f64), {elapsed:.1?}"
        ),
    );
}

// -- criterion 2 -----------------------------------------------------------

#[test]
fn criterion_02_gradient_suite() {
    let started = Instant::now();
    let summary = gradcheck_command(None, false, 42).unwrap();
    let elapsed = started.elapsed();
    for line in summary.lines() {
        println!("    {line}");
    }
    let worst = summary
        .results
        .iter()
        .map(|(_, r)| r.max_rel_err)
        .fold(0.0f64, f64::max);
    let pass =
        summary.all_passed() && summary.results.len() == 7 && elapsed < Duration::from_secs(300);
    verdict(
        2,
        "gradient suite",
        pass,
        &format!(
            "7 losses through the tiny model, worst rel err {worst:.2e} (tolerance 1e-4), {elapsed:.1?}"
        ),
    );
}

// -- criterion 3 -----------------------------------------------------------

/// DCG@k of one explicit ordering, gains 2^y - 1, discounts 1/log2(1+rank).
fn dcg_of(order: &[usize], labels: &[u32], k: usize) -> f64 {
    order
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, &i)| (2f64.powi(labels[i] as i32) - 1.0) / (pos as f64 + 2.0).log2())
        .sum()
}

fn for_each_permutation(items: &mut Vec<usize>, used: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if items.is_empty() {
        f(used);
        return;
    }
    for i in 0..items.len() {
        let item = items.remove(i);
        used.push(item);
        for_each_permutation(items, used, f);
        used.pop();
        items.insert(i, item);
    }
}

/// Brute-force NDCG: the ideal DCG is the maximum over every ordering of
/// the real items, found exhaustively.
fn oracle_ndcg(scores: &[f64], labels: &[u32], mask: &[bool], k: usize) -> f64 {
    let real: Vec<usize> = (0..labels.len()).filter(|&i| mask[i]).collect();
    if real.iter().all(|&i| labels[i] == 0) {
        return 1.0;
    }
    // Model ordering: score descending, ties by original index.
    let mut order = real.clone();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut best = f64::NEG_INFINITY;
    let mut pool = real.clone();
    for_each_permutation(&mut pool, &mut Vec::new(), &mut |candidate| {
        let d = dcg_of(candidate, labels, k);
        if d > best {
            best = d;
        }
    });
    // The descending-label ordering must itself be optimal; anything else
    // means the oracle (or the gain/discount form) is wrong.
    let mut by_label = real;
    by_label.sort_by(|&a, &b| labels[b].cmp(&labels[a]).then(a.cmp(&b)));
    assert!(
        dcg_of(&by_label, labels, k) >= best - 1e-12,
        "descending labels are not the ideal ordering"
    );
    dcg_of(&order, labels, k) / best
}

#[test]
fn criterion_03_metric_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut max_err = 0.0f64;
    let mut zero_label_slates = 0usize;
    for case in 0..1000 {
        let l = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=6);
        let labels: Vec<u32> = if case % 10 == 0 {
            zero_label_slates += 1;
            vec![0; l]
        } else {
            (0..l).map(|_| rng.gen_range(0..=5)).collect()
        };
        // Coarse score grid so ties actually occur.
        let scores: Vec<f64> = (0..l).map(|_| rng.gen_range(-2..=2) as f64 * 0.5).collect();
        let mut mask = vec![true; l];
        if l > 1 && case % 3 == 0 {
            mask[rng.gen_range(0..l)] = false;
        }
        let got = ndcg_at_k(&scores, &labels, &mask, k).unwrap();
        let want = oracle_ndcg(&scores, &labels, &mask, k);
        if mask.iter().zip(&labels).all(|(&m, &y)| !m || y == 0) {
            assert_eq!(got, 1.0, "all-zero-label slate must score exactly 1.0");
        }
        max_err = max_err.max((got - want).abs());
    }
    let pass = max_err <= 1e-12 && zero_label_slates == 100;
    verdict(
        3,
        "metric oracle",
        pass,
        &format!(
            "1000 exhaustive instances (l <= 6): max |ndcg - oracle| = {max_err:.2e}, {zero_label_slates} all-zero slates returned exactly 1.0"
        ),
    );
}

// -- criteria 4 and 5: the two desk-scale experiments ----------------------

/// 200 contextual slates; grades depend on where an item's utility sits
/// relative to its slate's mean, so a pointwise scorer has nothing to learn.
const CONTEXTUAL_FIXTURE: &str = r#"{
  "data": {"synthetic": {"n_slates": 200, "l": 10, "d_f": 8, "task": "contextual"}},
  "model": {"d_f": 8, "d_fc": 32, "N": 2, "H": 2, "d_h": 32, "p_drop": 0.0},
  "loss": {"kind": "ordinal"},
  "optimizer": {"lr": 0.002, "epochs": 50, "decay_at_epochs": [40]},
  "l": 10,
  "seed": 42
}"#;

/// Positional task with more features than 200 slates let the encoder
/// estimate well; the least-squares base ranker pins the utility direction
/// exactly, so its ordering (exposed through positional encodings) carries
/// signal the feature pathway underfits.
const POSITIONAL_FIXTURE: &str = r#"{
  "data": {"synthetic": {"n_slates": 200, "l": 10, "d_f": 24, "task": "positional"}},
  "model": {"d_f": 24, "d_fc": 32, "N": 2, "H": 2, "d_h": 32, "p_drop": 0.0},
  "loss": {"kind": "ordinal"},
  "optimizer": {"lr": 0.002, "epochs": 50, "decay_at_epochs": [40]},
  "l": 10,
  "seed": 42
}"#;

#[test]
fn criterion_04_contextual_advantage() {
    let started = Instant::now();
    let mut detail = String::new();
    let mut pass = true;
    for loss in ["ordinal", "listnet", "ranknet"] {
        let mut ndcg = [0.0f64; 2];
        for (i, kind) in ["attention", "mlp"].iter().enumerate() {
            let mut config = RunConfig::from_json(CONTEXTUAL_FIXTURE).unwrap();
            config
                .apply_overrides(&[format!("loss.kind={loss}"), format!("model_kind={kind}")])
                .unwrap();
            let dir = tempfile::tempdir().unwrap();
            let outcome = train_command(&config, dir.path()).unwrap();
            ndcg[i] = outcome.test_report.ndcg_at(5).unwrap();
        }
        let margin = ndcg[0] - ndcg[1];
        pass &= margin >= 0.05;
        detail.push_str(&format!("{loss}: {:.3} vs {:.3} (+{margin:.3}); ", ndcg[0], ndcg[1]));
    }
    let elapsed = started.elapsed();
    pass &= elapsed < Duration::from_secs(900);
    detail.push_str(&format!("margins >= 0.05 ndcg@5, {elapsed:.1?}"));
    verdict(4, "contextual advantage over matched mlp", pass, &detail);
}

#[test]
fn criterion_05_reranking_with_positional_encodings() {
    let config = RunConfig::from_json(POSITIONAL_FIXTURE).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = rerank_pipeline(&config, dir.path()).unwrap();
    let pe = outcome.pe.test_report.ndcg_at(5).unwrap();
    let no_pe = outcome.no_pe.test_report.ndcg_at(5).unwrap();
    let base = outcome.base_report.ndcg_at(5).unwrap();
    let pass = pe >= no_pe + 0.01;
    verdict(
        5,
        "re-ranking gains from positional encodings",
        pass,
        &format!("ndcg@5 with PE {pe:.4} vs without {no_pe:.4} (base ordering {base:.4}), margin {:.4} >= 0.01", pe - no_pe),
    );
}

// -- criterion 6 -----------------------------------------------------------

#[test]
fn criterion_06_ordinal_encoding_round_trip() {
    let table: [(u32, [f64; 4]); 5] = [
        (0, [0.0, 0.0, 0.0, 0.0]),
        (1, [1.0, 0.0, 0.0, 0.0]),
        (2, [1.0, 1.0, 0.0, 0.0]),
        (3, [1.0, 1.0, 1.0, 0.0]),
        (4, [1.0, 1.0, 1.0, 1.0]),
    ];
    let mut pass = true;
    for (grade, want) in table {
        let got = ordinal_encode(grade, 5).unwrap();
        pass &= got == want;
        let decoded = got.iter().filter(|&&v| v > 0.5).count() as u32;
        pass &= decoded == grade;
    }
    pass &= ordinal_encode(5, 5).is_err();
    verdict(
        6,
        "ordinal encoding",
        pass,
        "grades 0-4 encode to cumulative indicators and decode back exactly",
    );
}

// -- criterion 7 -----------------------------------------------------------

fn spot(kind: LossKind, scores: Vec<f64>, labels: Vec<u32>) -> f64 {
    let l = labels.len();
    let slate = Slate::new("q", Tensor::<f64>::zeros(l, 1), labels);
    let spec = LossSpec {
        kind,
        sigma: 1.0,
        mu: 10.0,
        n_levels: 5,
        binary_listnet: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    eval_loss(&Tensor::from_vec(l, 1, scores), &slate, &spec, &mut rng).unwrap()
}

#[test]
fn criterion_07_loss_spot_values() {
    let ranknet = spot(LossKind::RankNet, vec![0.7, 0.7], vec![1, 0]);
    let listnet = spot(LossKind::ListNet, vec![0.3, 0.3], vec![2, 2]);
    let listmle = spot(LossKind::ListMle, vec![3.0, 2.0, 1.0], vec![2, 1, 0]);
    let ndcg2pp = spot(LossKind::NdcgLoss2pp, vec![0.1, 0.2, 0.3], vec![2, 1, 0]);

    let listmle_oracle = 0.7208676519626031;
    let ndcg2pp_oracle = 5.182801948260743;
    let pass = ranknet == 1.0
        && (listnet - std::f64::consts::LN_2).abs() <= 1e-12
        && (listmle - listmle_oracle).abs() <= 1e-9
        && (ndcg2pp - ndcg2pp_oracle).abs() <= 1e-9;
    verdict(
        7,
        "loss spot values",
        pass,
        &format!(
            "ranknet tied pair = {ranknet} (exact 1.0), listnet = ln 2 {:+.1e}, listmle {:+.1e}, ndcgloss2pp {:+.1e}",
            listnet - std::f64::consts::LN_2,
            listmle - listmle_oracle,
            ndcg2pp - ndcg2pp_oracle
        ),
    );
}

// -- criterion 8 -----------------------------------------------------------

#[test]
fn criterion_08_training_determinism() {
    let fixture = r#"{
        "data": {"synthetic": {"n_slates": 40, "l": 8, "d_f": 6, "task": "contextual"}},
        "model": {"d_f": 6, "d_fc": 16, "N": 1, "H": 2, "d_h": 16, "p_drop": 0.1},
        "loss": {"kind": "lambdarank"},
        "optimizer": {"lr": 0.002, "epochs": 6},
        "l": 8,
        "seed": 42,
        "precision": "f64"
    }"#;
    let config = RunConfig::from_json(fixture).unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    train_command(&config, d1.path()).unwrap();
    train_command(&config, d2.path()).unwrap();
    let a = std::fs::read(d1.path().join("metrics.tsv")).unwrap();
    let b = std::fs::read(d2.path().join("metrics.tsv")).unwrap();
    let pass = a == b && !a.is_empty();
    verdict(
        8,
        "determinism",
        pass,
        &format!("two identical 64-bit runs: metrics.tsv byte-identical ({} bytes)", a.len()),
    );
}

// -- criterion 9 -----------------------------------------------------------

#[test]
fn criterion_09_extreme_score_robustness() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut non_finite = 0usize;
    for case in 0..10_000 {
        let l = rng.gen_range(2..=8);
        let labels: Vec<u32> = (0..l).map(|_| rng.gen_range(0..=4)).collect();
        let slate = Slate::new("q", Tensor::<f64>::zeros(l, 1), labels);
        let kind = if case % 2 == 0 { LossKind::ListNet } else { LossKind::ListMle };
        let spec = LossSpec {
            kind,
            sigma: 1.0,
            mu: 10.0,
            n_levels: 5,
            binary_listnet: false,
        };
        let scores = Tensor::<f64>::from_fn(l, 1, |_, _| rng.gen_range(-1e3..=1e3));

        let mut params = ParamSet::<f64>::new();
        let id = params.register("scores", scores);
        let mut tape = Tape::new();
        let s = tape.param(&params, id);
        let loss =
            slaterank::losses::attach_loss(&mut tape, s, &slate, &spec, &mut rng).unwrap();
        if !tape.value(loss).item().is_finite() {
            non_finite += 1;
        }
        tape.backward(loss, &mut params).unwrap();
        if params.get(id).grad.data().iter().any(|g| !g.is_finite()) {
            non_finite += 1;
        }
    }
    let pass = non_finite == 0;
    verdict(
        9,
        "numerical robustness",
        pass,
        &format!("listnet/listmle at scores up to ±1e3: {non_finite} non-finite values or gradients in 10,000 instances"),
    );
}

// -- criterion 10 (optional, needs a local WEB30K Fold1 copy) ---------------

#[test]
#[ignore = "needs WEB30K_FOLD1=<dir with train.txt/vali.txt/test.txt>"]
fn criterion_10_web30k_subset_directional() {
    use slaterank::data::{apply_standardizer, fit_standardizer, load_letor_file};
    use slaterank::harness::{train_on, LoadedData};

    let dir = std::path::PathBuf::from(
        std::env::var("WEB30K_FOLD1").expect("set WEB30K_FOLD1 to the Fold1 directory"),
    );
    let mut train = load_letor_file::<f64>(&dir.join("train.txt"), Some(136)).unwrap();
    train.truncate(1000);
    let mut valid = load_letor_file::<f64>(&dir.join("vali.txt"), Some(136)).unwrap();
    valid.truncate(200);
    let mut test = load_letor_file::<f64>(&dir.join("test.txt"), Some(136)).unwrap();
    test.truncate(200);
    let stats = fit_standardizer(&train).unwrap();
    for split in [&mut train, &mut valid, &mut test] {
        for slate in split.iter_mut() {
            *slate = apply_standardizer(slate, &stats);
        }
    }
    let data = LoadedData { train, valid, test };

    let fixture = r#"{
        "data": {"synthetic": {"n_slates": 1, "l": 30, "d_f": 136, "task": "independent"}},
        "model": {"d_f": 136, "d_fc": 64, "N": 2, "H": 2, "d_h": 64, "p_drop": 0.1},
        "loss": {"kind": "ordinal"},
        "optimizer": {"lr": 0.001, "epochs": 20, "decay_at_epochs": [15]},
        "l": 30,
        "seed": 42,
        "standardize": false
    }"#;
    let mut ndcg = [0.0f64; 2];
    for (i, kind) in ["attention", "mlp"].iter().enumerate() {
        let mut config = RunConfig::from_json(fixture).unwrap();
        config.apply_overrides(&[format!("model_kind={kind}")]).unwrap();
        let out = tempfile::tempdir().unwrap();
        let outcome = train_on(&config, &data, out.path()).unwrap();
        ndcg[i] = outcome.test_report.ndcg_at(5).unwrap();
    }
    let pass = ndcg[0] > ndcg[1];
    verdict(
        10,
        "web30k subset directional",
        pass,
        &format!("1000-query subset: attention ndcg@5 {:.4} vs mlp {:.4}", ndcg[0], ndcg[1]),
    );
}
