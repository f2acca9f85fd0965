//! Dataset handling: LETOR/SVMLight-rank parsing, per-query slate assembly,
//! feature standardization, padding/subsampling to fixed length, and
//! synthetic dataset generation for the desk-scale experiments.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, RngCore};

use crate::nn::Tensor;
use crate::{cast, Real};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("negative label on line {line}")]
    NegativeLabel { line: usize },
    #[error("feature index {index} out of range for d_f={d_f} (qid {qid})")]
    FeatureIndexOutOfRange {
        qid: String,
        index: usize,
        d_f: usize,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid synthetic spec: {reason}")]
    InvalidSpec { reason: String },
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
}

/// One parsed line of a ranking file. Feature indices are 1-based in files
/// (SVMLight convention) and 0-based here.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRow {
    pub label: u32,
    pub qid: String,
    pub features: BTreeMap<usize, f64>,
    pub comment: Option<String>,
}

/// All items retrieved for one query, plus padding bookkeeping.
///
/// The three list-aligned structures share length `l`; padded positions
/// (mask `false`) have all-zero features and label 0, and every slate has at
/// least one real item.
#[derive(Clone, Debug, PartialEq)]
pub struct Slate<F> {
    pub qid: String,
    /// `l x d_f` feature matrix.
    pub features: Tensor<F>,
    pub labels: Vec<u32>,
    pub mask: Vec<bool>,
}

impl<F: Real> Slate<F> {
    /// A slate of real items only (mask all true).
    pub fn new(qid: impl Into<String>, features: Tensor<F>, labels: Vec<u32>) -> Self {
        assert_eq!(features.rows(), labels.len(), "features/labels length mismatch");
        assert!(!labels.is_empty(), "slate must have at least one item");
        let mask = vec![true; labels.len()];
        Slate {
            qid: qid.into(),
            features,
            labels,
            mask,
        }
    }

    /// Slate length including padding.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn d_f(&self) -> usize {
        self.features.cols()
    }

    /// Number of real (mask-true) items.
    pub fn real_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Per-feature standardization statistics fitted on training data.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetStats {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

/// Parses LETOR/SVMLight-rank text: one item per line,
/// `<label> qid:<qid> <idx>:<val> ... [# comment]`. Blank lines are
/// skipped; rows come back in file order. Line numbers in errors are
/// 1-based.
pub fn parse_letor(input: &str) -> Result<Vec<RawRow>, DataError> {
    let mut rows = Vec::new();
    for (i, raw_line) in input.lines().enumerate() {
        let line_no = i + 1;
        let (body, comment) = match raw_line.split_once('#') {
            Some((b, c)) => (b, Some(c.trim().to_string())),
            None => (raw_line, None),
        };
        let mut tokens = body.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue; // blank line
        };

        let malformed = |reason: &str| DataError::MalformedLine {
            line: line_no,
            reason: reason.to_string(),
        };

        if label_tok.starts_with('-') && label_tok[1..].parse::<u32>().is_ok() {
            return Err(DataError::NegativeLabel { line: line_no });
        }
        let label: u32 = label_tok
            .parse()
            .map_err(|_| malformed(&format!("label {label_tok:?} is not a non-negative integer")))?;

        let qid_tok = tokens.next().ok_or_else(|| malformed("missing qid field"))?;
        let qid = qid_tok
            .strip_prefix("qid:")
            .ok_or_else(|| malformed(&format!("expected qid:<id>, got {qid_tok:?}")))?;
        if qid.is_empty() {
            return Err(malformed("empty qid"));
        }

        let mut features = BTreeMap::new();
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| malformed(&format!("feature token {tok:?} is not idx:value")))?;
            let idx: usize = idx_s
                .parse()
                .map_err(|_| malformed(&format!("feature index {idx_s:?} is not an integer")))?;
            if idx == 0 {
                return Err(malformed("feature indices are 1-based; got 0"));
            }
            let val: f64 = val_s
                .parse()
                .map_err(|_| malformed(&format!("feature value {val_s:?} is not a number")))?;
            if features.insert(idx - 1, val).is_some() {
                return Err(malformed(&format!("duplicate feature index {idx}")));
            }
        }

        rows.push(RawRow {
            label,
            qid: qid.to_string(),
            features,
            comment,
        });
    }
    Ok(rows)
}

/// Serializes rows back to LETOR text. Values print with Rust's shortest
/// round-trip float formatting, so parse → write → parse is lossless.
pub fn write_letor(rows: &[RawRow]) -> String {
    let mut out = String::new();
    for row in rows {
        write!(out, "{} qid:{}", row.label, row.qid).unwrap();
        for (&idx, &val) in &row.features {
            write!(out, " {}:{}", idx + 1, val).unwrap();
        }
        if let Some(c) = &row.comment {
            write!(out, " # {c}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Converts mask-true items of slates back into rows (zero-valued features
/// are dropped, as is conventional for the sparse format).
pub fn slates_to_rows<F: Real>(slates: &[Slate<F>]) -> Vec<RawRow> {
    let mut rows = Vec::new();
    for slate in slates {
        for i in 0..slate.len() {
            if !slate.mask[i] {
                continue;
            }
            let mut features = BTreeMap::new();
            for (j, &v) in slate.features.row(i).iter().enumerate() {
                let v = v.to_f64().unwrap();
                if v != 0.0 {
                    features.insert(j, v);
                }
            }
            rows.push(RawRow {
                label: slate.labels[i],
                qid: slate.qid.clone(),
                features,
                comment: None,
            });
        }
    }
    rows
}

/// Largest 0-based feature index referenced by any row, if any features
/// are present at all.
pub fn max_feature_index(rows: &[RawRow]) -> Option<usize> {
    rows.iter()
        .filter_map(|r| r.features.keys().next_back().copied())
        .max()
}

/// Groups rows into one slate per distinct qid (order of first appearance,
/// rows in file order within a slate) and densifies the sparse features
/// into `l x d_f` matrices with zeros for absent features.
pub fn group_and_densify<F: Real>(rows: &[RawRow], d_f: usize) -> Result<Vec<Slate<F>>, DataError> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_qid: HashMap<&str, Vec<&RawRow>> = HashMap::new();
    for row in rows {
        by_qid.entry(&row.qid).or_insert_with(|| {
            order.push(&row.qid);
            Vec::new()
        });
        by_qid.get_mut(row.qid.as_str()).unwrap().push(row);
    }

    let mut slates = Vec::with_capacity(order.len());
    for qid in order {
        let group = &by_qid[qid];
        let l = group.len();
        let mut features = Tensor::zeros(l, d_f);
        let mut labels = Vec::with_capacity(l);
        for (i, row) in group.iter().enumerate() {
            for (&idx, &val) in &row.features {
                if idx >= d_f {
                    return Err(DataError::FeatureIndexOutOfRange {
                        qid: qid.to_string(),
                        index: idx,
                        d_f,
                    });
                }
                features.set(i, idx, cast::<F>(val));
            }
            labels.push(row.label);
        }
        slates.push(Slate::new(qid, features, labels));
    }
    Ok(slates)
}

/// Parses a ranking file and groups it into slates. When `d_f` is `None`
/// the feature count is inferred as max referenced index + 1.
pub fn load_letor_file<F: Real>(path: &Path, d_f: Option<usize>) -> Result<Vec<Slate<F>>, DataError> {
    let text = std::fs::read_to_string(path)?;
    let rows = parse_letor(&text)?;
    if rows.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let d_f = d_f.unwrap_or_else(|| max_feature_index(&rows).map_or(1, |m| m + 1));
    group_and_densify(&rows, d_f)
}

/// Fits per-feature mean and standard deviation over the mask-true rows of
/// the given (training) slates. Population standard deviation; constant
/// columns get their stddev floored to 1 so they standardize to zero
/// instead of dividing by zero.
pub fn fit_standardizer<F: Real>(slates: &[Slate<F>]) -> Result<DatasetStats, DataError> {
    let Some(first) = slates.first() else {
        return Err(DataError::EmptyDataset);
    };
    let d_f = first.d_f();
    let mut count = 0usize;
    let mut mean = vec![0.0f64; d_f];
    for slate in slates {
        for i in 0..slate.len() {
            if !slate.mask[i] {
                continue;
            }
            count += 1;
            for (j, &v) in slate.features.row(i).iter().enumerate() {
                mean[j] += v.to_f64().unwrap();
            }
        }
    }
    if count == 0 {
        return Err(DataError::EmptyDataset);
    }
    for m in &mut mean {
        *m /= count as f64;
    }

    let mut var = vec![0.0f64; d_f];
    for slate in slates {
        for i in 0..slate.len() {
            if !slate.mask[i] {
                continue;
            }
            for (j, &v) in slate.features.row(i).iter().enumerate() {
                let d = v.to_f64().unwrap() - mean[j];
                var[j] += d * d;
            }
        }
    }
    let stddev = var
        .into_iter()
        .map(|v| {
            let s = (v / count as f64).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();

    Ok(DatasetStats { mean, stddev })
}

/// Standardizes the mask-true rows of a slate; padded rows stay all-zero.
pub fn apply_standardizer<F: Real>(slate: &Slate<F>, stats: &DatasetStats) -> Slate<F> {
    assert_eq!(slate.d_f(), stats.mean.len(), "standardizer dimension mismatch");
    let mut out = slate.clone();
    for i in 0..out.len() {
        if !out.mask[i] {
            continue;
        }
        for (j, v) in out.features.row_mut(i).iter_mut().enumerate() {
            let x = v.to_f64().unwrap();
            *v = cast::<F>((x - stats.mean[j]) / stats.stddev[j]);
        }
    }
    out
}

/// Pads or subsamples a slate of real items to exactly length `l`.
///
/// Train mode subsamples uniformly without replacement when the slate is
/// longer than `l`, preserving the items' original relative order. Eval mode
/// never subsamples (the caller passes the split's maximum length); a slate
/// already at or above `l` is returned unchanged. Shorter slates gain
/// zero-feature, zero-label, mask-false positions at the end.
pub fn fix_length<F: Real>(
    slate: &Slate<F>,
    l: usize,
    mode: crate::nn::Mode,
    rng: &mut dyn RngCore,
) -> Slate<F> {
    assert!(l >= 1, "target length must be at least 1");
    debug_assert!(
        slate.mask.iter().all(|&m| m),
        "fix_length expects an unpadded slate"
    );
    let n = slate.len();
    if n == l || (n > l && mode == crate::nn::Mode::Eval) {
        return slate.clone();
    }
    if n > l {
        let mut keep = rand::seq::index::sample(rng, n, l).into_vec();
        keep.sort_unstable();
        let mut features = Tensor::zeros(l, slate.d_f());
        let mut labels = Vec::with_capacity(l);
        for (row, &src) in keep.iter().enumerate() {
            features.row_mut(row).copy_from_slice(slate.features.row(src));
            labels.push(slate.labels[src]);
        }
        return Slate {
            qid: slate.qid.clone(),
            features,
            labels,
            mask: vec![true; l],
        };
    }
    // Pad.
    let mut features = Tensor::zeros(l, slate.d_f());
    for i in 0..n {
        features.row_mut(i).copy_from_slice(slate.features.row(i));
    }
    let mut labels = slate.labels.clone();
    labels.resize(l, 0);
    let mut mask = vec![true; n];
    mask.resize(l, false);
    Slate {
        qid: slate.qid.clone(),
        features,
        labels,
        mask,
    }
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Which relationship between features, context, and labels to generate.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticTask {
    /// Each item's grade is a bucketized linear utility of its own
    /// features — a pointwise scorer can be optimal.
    Independent,
    /// Grades depend on an item's utility relative to the *slate mean*
    /// utility, and slates are shifted wholesale along the utility
    /// direction, so no function of a single item's features can order
    /// items optimally. The last two slates are a constructed witness: the
    /// same feature vector appears in both with different labels.
    Contextual,
    /// Independent-style grades with label noise; items are stored sorted
    /// by a noisy utility estimate, so the file order is an informative
    /// base-ranker ordering.
    Positional,
}

/// Size and task parameters for [`generate_synthetic`].
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    pub n_slates: usize,
    /// Items per slate.
    pub l: usize,
    /// Feature count.
    pub d_f: usize,
    pub task: SyntheticTask,
    /// Number of relevance grades (labels run 0..n_grades-1).
    #[serde(default = "default_n_grades")]
    pub n_grades: u32,
}

fn default_n_grades() -> u32 {
    5
}

/// The generator's hidden ground truth, exposed so tests can recompute
/// labels independently.
#[derive(Clone, Debug)]
pub struct SyntheticDetail {
    /// Unit-norm utility direction: an item's utility is `w · x`.
    pub weights: Vec<f64>,
    /// Grade bucket boundaries for utility-based tasks (grade = number of
    /// thresholds strictly below the utility).
    pub thresholds: Vec<f64>,
}

/// Standard deviation of the per-slate shift along the utility direction
/// in the contextual task.
const CONTEXTUAL_SHIFT_SD: f64 = 2.0;
/// Label / ordering noise scales in the positional task.
const POSITIONAL_LABEL_NOISE: f64 = 0.3;
const POSITIONAL_ORDER_NOISE: f64 = 0.3;

pub fn generate_synthetic<F: Real>(
    spec: &SyntheticSpec,
    rng: &mut dyn RngCore,
) -> Result<Vec<Slate<F>>, DataError> {
    generate_synthetic_detailed(spec, rng).map(|(slates, _)| slates)
}

/// Like [`generate_synthetic`] but also returns the generating weights and
/// thresholds.
pub fn generate_synthetic_detailed<F: Real>(
    spec: &SyntheticSpec,
    rng: &mut dyn RngCore,
) -> Result<(Vec<Slate<F>>, SyntheticDetail), DataError> {
    let invalid = |reason: &str| DataError::InvalidSpec {
        reason: reason.to_string(),
    };
    if spec.n_slates == 0 {
        return Err(invalid("n_slates must be at least 1"));
    }
    if spec.l == 0 {
        return Err(invalid("slate length l must be at least 1"));
    }
    if spec.d_f == 0 {
        return Err(invalid("feature count d_f must be at least 1"));
    }
    if spec.n_grades < 2 {
        return Err(invalid("n_grades must be at least 2"));
    }

    // Unit-norm utility direction.
    let mut weights: Vec<f64> = (0..spec.d_f).map(|_| standard_normal(rng)).collect();
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    if norm == 0.0 {
        weights[0] = 1.0;
    } else {
        for w in &mut weights {
            *w /= norm;
        }
    }

    // Utility of one standard-normal item is N(0,1); equal-mass grade
    // buckets come from the normal quantiles. The positional task buckets
    // utility + label noise, so its thresholds are widened to match that
    // variable's standard deviation.
    let value_sd = match spec.task {
        SyntheticTask::Positional => (1.0 + POSITIONAL_LABEL_NOISE * POSITIONAL_LABEL_NOISE).sqrt(),
        _ => 1.0,
    };
    let thresholds: Vec<f64> = (1..spec.n_grades)
        .map(|k| value_sd * inverse_normal_cdf(k as f64 / spec.n_grades as f64))
        .collect();

    let detail = SyntheticDetail {
        weights: weights.clone(),
        thresholds: thresholds.clone(),
    };

    let mut slates = Vec::with_capacity(spec.n_slates);
    match spec.task {
        SyntheticTask::Independent => {
            for s in 0..spec.n_slates {
                let features = normal_features(spec.l, spec.d_f, rng);
                let labels = (0..spec.l)
                    .map(|i| bucketize(dot(&weights, row_f64(&features, i)), &thresholds))
                    .collect();
                slates.push(Slate::new(format!("{}", s + 1), features.to_real::<F>(), labels));
            }
        }
        SyntheticTask::Contextual => {
            let witness_count = if spec.n_slates >= 2 && spec.l >= 2 { 2 } else { 0 };
            for s in 0..spec.n_slates - witness_count {
                let mut features = normal_features(spec.l, spec.d_f, rng);
                let shift = standard_normal(rng) * CONTEXTUAL_SHIFT_SD;
                for i in 0..spec.l {
                    for (x, w) in features.row_mut(i).iter_mut().zip(&weights) {
                        *x += shift * w;
                    }
                }
                let labels = contextual_labels(&features, &weights, spec.n_grades);
                slates.push(Slate::new(format!("{}", s + 1), features.to_real::<F>(), labels));
            }
            if witness_count == 2 {
                let (w1, w2) = witness_slates(spec, &weights);
                slates.push(w1);
                slates.push(w2);
            }
        }
        SyntheticTask::Positional => {
            for s in 0..spec.n_slates {
                let features = normal_features(spec.l, spec.d_f, rng);
                let mut items: Vec<(usize, f64, u32)> = (0..spec.l)
                    .map(|i| {
                        let u = dot(&weights, row_f64(&features, i));
                        let value = u + POSITIONAL_LABEL_NOISE * standard_normal(rng);
                        let base_score = value + POSITIONAL_ORDER_NOISE * standard_normal(rng);
                        (i, base_score, bucketize(value, &thresholds))
                    })
                    .collect();
                // File order = descending noisy base score: an informative
                // but imperfect ordering, like a weak upstream ranker.
                items.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                let mut sorted_features = Tensor::zeros(spec.l, spec.d_f);
                let mut labels = Vec::with_capacity(spec.l);
                for (row, &(src, _, grade)) in items.iter().enumerate() {
                    sorted_features
                        .row_mut(row)
                        .copy_from_slice(features.row(src));
                    labels.push(grade);
                }
                slates.push(Slate::new(
                    format!("{}", s + 1),
                    sorted_features.to_real::<F>(),
                    labels,
                ));
            }
        }
    }
    Ok((slates, detail))
}

/// Grades for the contextual task: an item's relevance is how close its
/// utility sits to the slate's mean utility; grades are quantile buckets of
/// the within-slate relevance rank (ties broken by item index).
pub fn contextual_labels(features: &Tensor<f64>, weights: &[f64], n_grades: u32) -> Vec<u32> {
    let l = features.rows();
    let utils: Vec<f64> = (0..l).map(|i| dot(weights, features.row(i))).collect();
    let mean = utils.iter().sum::<f64>() / l as f64;
    let relevance: Vec<f64> = utils.iter().map(|u| -(u - mean).abs()).collect();
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| relevance[b].partial_cmp(&relevance[a]).unwrap().then(a.cmp(&b)));
    let mut labels = vec![0u32; l];
    for (pos, &item) in order.iter().enumerate() {
        labels[item] = grade_from_rank(pos, l, n_grades);
    }
    labels
}

/// Grade assigned to rank position `pos` (0 = best) among `l` items.
fn grade_from_rank(pos: usize, l: usize, n_grades: u32) -> u32 {
    let bucket = (pos * n_grades as usize) / l;
    (n_grades - 1).saturating_sub(bucket as u32)
}

/// The contextual witness: one feature vector `v` (utility 0) embedded in
/// two slates. In the first, companion utilities straddle zero so `v` is
/// the item closest to the slate mean (top grade); in the second, the
/// companions cluster far away so `v` is the farthest (bottom grade).
fn witness_slates<F: Real>(spec: &SyntheticSpec, weights: &[f64]) -> (Slate<F>, Slate<F>) {
    let d_f = spec.d_f;
    let l = spec.l;

    // v: unit vector orthogonal to the utility direction, so w·v = 0. Start
    // from whichever basis vector is least aligned with w; for d_f = 1 no
    // orthogonal direction exists, so fall back to the zero vector (its
    // utility is also 0).
    let mut v = vec![0.0f64; d_f];
    if d_f > 1 {
        let pivot = (0..d_f)
            .min_by(|&a, &b| weights[a].abs().partial_cmp(&weights[b].abs()).unwrap())
            .unwrap();
        v[pivot] = 1.0;
        let proj = weights[pivot];
        for (vi, wi) in v.iter_mut().zip(weights) {
            *vi -= proj * wi;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for vi in &mut v {
            *vi /= norm;
        }
    }

    // Companion utilities: [1, -1, 2, -2, ...] straddles 0; the far cluster
    // sits near 3.
    let near: Vec<f64> = (1..l)
        .map(|k| {
            let mag = k.div_ceil(2) as f64;
            if k % 2 == 1 {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let far: Vec<f64> = (1..l).map(|k| 3.0 + 0.1 * (k - 1) as f64).collect();

    let build = |companions: &[f64], v_first: bool, qid: String| -> Slate<F> {
        let mut features = Tensor::zeros(l, d_f);
        let v_row = if v_first { 0 } else { l - 1 };
        features.row_mut(v_row).copy_from_slice(&v);
        let mut c = 0;
        for i in 0..l {
            if i == v_row {
                continue;
            }
            for (j, w) in weights.iter().enumerate() {
                features.set(i, j, companions[c] * w);
            }
            c += 1;
        }
        let labels = contextual_labels(&features, weights, spec.n_grades);
        Slate::new(qid, features.to_real::<F>(), labels)
    };

    let w1 = build(&near, true, format!("{}", spec.n_slates - 1));
    // v goes last in the far slate so that at l = 2, where distances to the
    // slate mean tie exactly, the index tie-break still demotes v.
    let w2 = build(&far, false, format!("{}", spec.n_slates));
    (w1, w2)
}

/// Finds a feature vector that appears in two different slates with two
/// different labels, if one exists (the contextual generator plants one).
pub fn find_duplicate_with_different_labels<F: Real>(
    slates: &[Slate<F>],
) -> Option<((usize, usize), (usize, usize))> {
    for (si, a) in slates.iter().enumerate() {
        for (sj, b) in slates.iter().enumerate().skip(si + 1) {
            for i in 0..a.len() {
                if !a.mask[i] {
                    continue;
                }
                for j in 0..b.len() {
                    if !b.mask[j] {
                        continue;
                    }
                    if a.features.row(i) == b.features.row(j) && a.labels[i] != b.labels[j] {
                        return Some(((si, i), (sj, j)));
                    }
                }
            }
        }
    }
    None
}

fn normal_features(l: usize, d_f: usize, rng: &mut dyn RngCore) -> Tensor<f64> {
    Tensor::from_fn(l, d_f, |_, _| standard_normal(rng))
}

fn row_f64(t: &Tensor<f64>, i: usize) -> &[f64] {
    t.row(i)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Grade = number of thresholds strictly below the value.
pub fn bucketize(value: f64, thresholds: &[f64]) -> u32 {
    thresholds.iter().filter(|&&t| value > t).count() as u32
}

/// One draw from N(0,1) via Box-Muller.
pub fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Inverse standard normal CDF (Acklam's rational approximation, absolute
/// error below 1.2e-9 — ample for choosing grade boundaries).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile must be in (0, 1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
