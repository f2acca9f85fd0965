//! The training loop and evaluation commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelKind, Precision, RunConfig};
use super::synth::synthetic_splits;
use super::HarnessError;
use crate::data::{apply_standardizer, fit_standardizer, fix_length, load_letor_file, Slate};
use crate::losses::{attach_loss, mean_of, LossError};
use crate::metrics::{evaluate_split, EvalReport};
use crate::model::{ContextAwareRanker, MlpBaseline, Scorer};
use crate::nn::{load_checkpoint_into, save_checkpoint, Adam, Mode, ParamSet, Tape};
use crate::Real;

/// Distinct deterministic rng streams per purpose, all derived from the
/// run seed, so e.g. evaluation can never perturb training randomness.
pub(super) fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub(super) const STREAM_INIT: u64 = 1;
pub(super) const STREAM_SHUFFLE: u64 = 2;
pub(super) const STREAM_PAD: u64 = 3;
pub(super) const STREAM_DROPOUT: u64 = 4;
pub(super) const STREAM_TIEBREAK: u64 = 5;

pub struct LoadedData<F> {
    pub train: Vec<Slate<F>>,
    pub valid: Vec<Slate<F>>,
    pub test: Vec<Slate<F>>,
}

/// Loads (or generates) the three splits and, if configured, standardizes
/// every split with statistics fit on the training slates only.
pub fn load_splits<F: Real>(config: &RunConfig) -> Result<LoadedData<F>, crate::Error> {
    let mut data = if let Some(spec) = &config.data.synthetic {
        synthetic_splits::<F>(spec, config.seed)?
    } else {
        let d_f = Some(config.model.d_f);
        let path = |p: &Option<PathBuf>| p.clone().expect("validated");
        LoadedData {
            train: load_letor_file(&path(&config.data.train), d_f)?,
            valid: load_letor_file(&path(&config.data.valid), d_f)?,
            test: load_letor_file(&path(&config.data.test), d_f)?,
        }
    };
    if config.standardize {
        let stats = fit_standardizer(&data.train)?;
        for split in [&mut data.train, &mut data.valid, &mut data.test] {
            for slate in split.iter_mut() {
                *slate = apply_standardizer(slate, &stats);
            }
        }
    }
    Ok(data)
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Epoch whose checkpoint was kept (0 = the initialization).
    pub best_epoch: usize,
    pub best_valid_ndcg5: f64,
    /// Final reports of the best checkpoint, at the configured cutoffs.
    pub valid_report: EvalReport,
    pub test_report: EvalReport,
    pub checkpoint_path: PathBuf,
    /// Slates skipped because a binary-listnet target was undefined.
    pub skipped_slates: usize,
}

/// Runs the full `train` command: load data, train, keep the checkpoint
/// with the best validation NDCG@5, evaluate it, and write
/// `config.json`, `train_log.tsv`, `checkpoint.bin` and `metrics.tsv`
/// into `out_dir`.
pub fn train_command(config: &RunConfig, out_dir: &Path) -> Result<TrainOutcome, crate::Error> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("config.json"), config.to_json_pretty())?;
    match config.precision {
        Precision::F64 => {
            let data = load_splits::<f64>(config)?;
            train_on(config, &data, out_dir)
        }
        Precision::F32 => {
            let data = load_splits::<f32>(config)?;
            train_on(config, &data, out_dir)
        }
    }
}

fn build_model<F: Real>(
    kind: ModelKind,
    model_config: crate::model::ModelConfig,
    params: &mut ParamSet<F>,
    rng: &mut ChaCha8Rng,
) -> Result<Box<dyn Scorer<F>>, crate::Error> {
    Ok(match kind {
        ModelKind::Attention => Box::new(ContextAwareRanker::new(model_config, params, rng)?),
        ModelKind::Mlp => Box::new(MlpBaseline::matched_to(&model_config, params, rng)?),
    })
}

/// The training loop proper, over already-loaded data. Exposed separately
/// so the re-ranking pipeline can train on transformed slates.
pub fn train_on<F: Real>(
    config: &RunConfig,
    data: &LoadedData<F>,
    out_dir: &Path,
) -> Result<TrainOutcome, crate::Error> {
    std::fs::create_dir_all(out_dir)?;
    let mut init_rng = stream(config.seed, STREAM_INIT);
    let mut shuffle_rng = stream(config.seed, STREAM_SHUFFLE);
    let mut pad_rng = stream(config.seed, STREAM_PAD);
    let mut dropout_rng = stream(config.seed, STREAM_DROPOUT);
    let mut tiebreak_rng = stream(config.seed, STREAM_TIEBREAK);

    let mut model_config = config.model.clone();
    model_config.output_dim = config.loss.output_dim();
    let mut params = ParamSet::<F>::new();
    let model = build_model(config.model_kind, model_config, &mut params, &mut init_rng)?;
    let mut lr = config.optimizer.lr;
    let mut adam = Adam::<F>::new(crate::cast(lr));

    // Selection always uses NDCG@5 even when 5 is not a reported cutoff.
    let mut selection_cutoffs = config.cutoffs.clone();
    if !selection_cutoffs.contains(&5) {
        selection_cutoffs.push(5);
    }
    let valid_ndcg5 = |params: &ParamSet<F>| -> Result<f64, crate::Error> {
        let report = evaluate_split(&data.valid, &selection_cutoffs, |slate| {
            model.score_slate(params, slate)
        })?;
        Ok(report.ndcg_at(5).expect("cutoff 5 present"))
    };

    let checkpoint_path = out_dir.join("checkpoint.bin");
    let mut best_ndcg5 = valid_ndcg5(&params)?;
    let mut best_epoch = 0usize;
    save_checkpoint(&params, &checkpoint_path)?;

    let mut log = String::from("epoch\tlr\ttrain_loss\tvalid_ndcg5\tskipped\n");
    let mut skipped_total = 0usize;
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 1..=config.optimizer.epochs {
        if config.optimizer.decay_at_epochs.contains(&epoch) {
            lr *= config.optimizer.decay_factor;
            adam.set_lr(crate::cast(lr));
        }
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0f64;
        let mut loss_count = 0usize;
        let mut skipped = 0usize;
        for batch in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let mut slate_losses = Vec::with_capacity(batch.len());
            for &idx in batch {
                let slate = fix_length(
                    &data.train[idx],
                    config.slate_length,
                    Mode::Train,
                    &mut pad_rng,
                );
                let scores =
                    model.score_on_tape(&mut tape, &params, &slate, Mode::Train, &mut dropout_rng)?;
                let loss = match attach_loss(&mut tape, scores, &slate, &config.loss, &mut tiebreak_rng)
                {
                    Ok(v) => v,
                    Err(LossError::BinaryWithNoClicks) => {
                        skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                let value = tape.value(loss).item().to_f64().unwrap();
                if !value.is_finite() {
                    return Err(HarnessError::NonFiniteLoss {
                        slate: slate.qid.clone(),
                        epoch,
                    }
                    .into());
                }
                loss_sum += value;
                loss_count += 1;
                slate_losses.push(loss);
            }
            if slate_losses.is_empty() {
                continue;
            }
            let batch_loss = mean_of(&mut tape, &slate_losses)?;
            tape.backward(batch_loss, &mut params)?;
            adam.step(&mut params);
        }

        let train_loss = if loss_count == 0 {
            f64::NAN
        } else {
            loss_sum / loss_count as f64
        };
        let ndcg5 = valid_ndcg5(&params)?;
        if ndcg5 > best_ndcg5 {
            best_ndcg5 = ndcg5;
            best_epoch = epoch;
            save_checkpoint(&params, &checkpoint_path)?;
        }
        skipped_total += skipped;
        writeln!(log, "{epoch}\t{lr}\t{train_loss}\t{ndcg5}\t{skipped}").unwrap();
    }
    std::fs::write(out_dir.join("train_log.tsv"), &log)?;

    load_checkpoint_into(&checkpoint_path, &mut params)?;
    let valid_report = evaluate_split(&data.valid, &config.cutoffs, |slate| {
        model.score_slate(&params, slate)
    })?;
    let test_report = evaluate_split(&data.test, &config.cutoffs, |slate| {
        model.score_slate(&params, slate)
    })?;
    std::fs::write(out_dir.join("metrics.tsv"), test_report.to_tsv())?;

    Ok(TrainOutcome {
        best_epoch,
        best_valid_ndcg5: best_ndcg5,
        valid_report,
        test_report,
        checkpoint_path,
        skipped_slates: skipped_total,
    })
}

/// Scores the test split with a saved checkpoint and writes `metrics.tsv`.
pub fn eval_command(
    config: &RunConfig,
    checkpoint: &Path,
    out_dir: &Path,
) -> Result<EvalReport, crate::Error> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    match config.precision {
        Precision::F64 => eval_on::<f64>(config, checkpoint, out_dir),
        Precision::F32 => eval_on::<f32>(config, checkpoint, out_dir),
    }
}

fn eval_on<F: Real>(
    config: &RunConfig,
    checkpoint: &Path,
    out_dir: &Path,
) -> Result<EvalReport, crate::Error> {
    let data = load_splits::<F>(config)?;
    let mut init_rng = stream(config.seed, STREAM_INIT);
    let mut model_config = config.model.clone();
    model_config.output_dim = config.loss.output_dim();
    let mut params = ParamSet::<F>::new();
    let model = build_model(config.model_kind, model_config, &mut params, &mut init_rng)?;
    load_checkpoint_into(checkpoint, &mut params)?;
    let report = evaluate_split(&data.test, &config.cutoffs, |slate| {
        model.score_slate(&params, slate)
    })?;
    std::fs::write(out_dir.join("metrics.tsv"), report.to_tsv())?;
    Ok(report)
}
