//! The `gradcheck` command: every loss composed with a tiny model,
//! analytic gradients against central finite differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::train::stream;
use super::HarnessError;
use crate::data::Slate;
use crate::losses::{
    attach_listmle_with_order, attach_loss, attach_pairwise_with_terms, listmle_order,
    pairwise_terms, LossError, LossKind, LossSpec,
};
use crate::model::{ContextAwareRanker, ModelConfig, ModelError, Scorer};
use crate::nn::{grad_check, GradCheckReport, Mode, ParamSet, Tape, Tensor};

const STREAM_CHECK_DATA: u64 = 51;
const STREAM_CHECK_INIT: u64 = 52;
const STREAM_CHECK_ORDER: u64 = 53;

#[derive(Debug)]
pub struct GradCheckSummary {
    /// Per-loss reports, in the order checked.
    pub results: Vec<(String, GradCheckReport)>,
}

impl GradCheckSummary {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|(_, r)| r.passed())
    }

    pub fn first_failure(&self) -> Option<HarnessError> {
        self.results
            .iter()
            .find(|(_, r)| !r.passed())
            .map(|(loss, r)| HarnessError::GradCheckFailed {
                loss: loss.clone(),
                max_rel_err: r.max_rel_err,
            })
    }

    /// One console line per loss.
    pub fn lines(&self) -> Vec<String> {
        self.results
            .iter()
            .map(|(loss, r)| {
                let verdict = if r.passed() { "PASS" } else { "FAIL" };
                let worst = r
                    .worst
                    .as_ref()
                    .map(|w| format!("{} [{}]", w.param, w.index))
                    .unwrap_or_else(|| "-".into());
                format!(
                    "gradcheck {loss:<12} {verdict}  max rel err {:>12.3e}  worst {worst}",
                    r.max_rel_err
                )
            })
            .collect()
    }
}

const ALL_KINDS: [LossKind; 7] = [
    LossKind::Rmse,
    LossKind::Ordinal,
    LossKind::RankNet,
    LossKind::LambdaRank,
    LossKind::NdcgLoss2pp,
    LossKind::ListNet,
    LossKind::ListMle,
];

/// Checks every loss (or just `only`) through a fixed tiny model at 64-bit
/// with dropout off. `sabotage` deliberately scales the score gradients by
/// 1.02 on the backward pass only — a negative control that must fail.
pub fn gradcheck_command(
    only: Option<&str>,
    sabotage: bool,
    seed: u64,
) -> Result<GradCheckSummary, crate::Error> {
    let kinds: Vec<LossKind> = match only {
        None => ALL_KINDS.to_vec(),
        Some(name) => {
            let kind = ALL_KINDS
                .iter()
                .copied()
                .find(|k| k.name() == name)
                .ok_or_else(|| super::ConfigError::Invalid {
                    reason: format!(
                        "unknown loss '{name}'; expected one of {}",
                        ALL_KINDS.map(|k| k.name()).join(", ")
                    ),
                })?;
            vec![kind]
        }
    };

    let base_config = ModelConfig {
        d_f: 3,
        d_fc: 4,
        n_blocks: 1,
        n_heads: 1,
        d_h: 4,
        d_ff: None,
        p_drop: 0.0, // forced off: finite differences need a deterministic function
        use_positional_encoding: false,
        output_dim: 1,
    };
    // One fixed slate with mixed labels (so every loss has signal) and a
    // padded tail position (so masking stays on the checked path).
    let mut data_rng = stream(seed, STREAM_CHECK_DATA);
    let features = Tensor::from_fn(5, 3, |_, _| {
        use rand::Rng;
        data_rng.gen_range(-1.5..1.5)
    });
    let mut slate = Slate::new("check", features, vec![2, 0, 1, 3, 1]);
    slate.mask[4] = false;

    let mut results = Vec::new();
    for kind in kinds {
        let spec = LossSpec::new(kind);
        let mut model_config = base_config.clone();
        model_config.output_dim = spec.output_dim();
        let mut init_rng = stream(seed, STREAM_CHECK_INIT);
        let mut params = ParamSet::<f64>::new();
        let model = ContextAwareRanker::new(model_config, &mut params, &mut init_rng)?;

        // Freeze every discrete choice before perturbing parameters.
        let current = model.score_slate(&params, &slate)?;
        let terms = match kind {
            LossKind::RankNet | LossKind::LambdaRank | LossKind::NdcgLoss2pp => {
                pairwise_terms(&current, &slate.labels, &slate.mask, kind, spec.mu)
            }
            _ => Vec::new(),
        };
        let order = listmle_order(&slate.labels, &slate.mask, &mut stream(seed, STREAM_CHECK_ORDER));

        let report = grad_check(
            &mut params,
            |p, with_grad| {
                let mut inert_rng = ChaCha8Rng::seed_from_u64(0);
                let mut tape = Tape::new();
                let mut scores = model
                    .score_on_tape(&mut tape, p, &slate, Mode::Eval, &mut inert_rng)
                    .map_err(unwrap_nn_model)?;
                if sabotage {
                    scores = tape.grad_scale(scores, 1.02);
                }
                let loss = match kind {
                    LossKind::RankNet | LossKind::LambdaRank | LossKind::NdcgLoss2pp => {
                        attach_pairwise_with_terms(&mut tape, scores, &terms, spec.sigma)
                    }
                    LossKind::ListMle => attach_listmle_with_order(&mut tape, scores, &order),
                    _ => {
                        let mut unused = ChaCha8Rng::seed_from_u64(0);
                        attach_loss(&mut tape, scores, &slate, &spec, &mut unused)
                    }
                }
                .map_err(unwrap_nn_loss)?;
                let value = tape.value(loss).item();
                if with_grad {
                    tape.backward(loss, p)?;
                }
                Ok(value)
            },
            1e-4,
            1e-4,
        )?;
        results.push((kind.name().to_string(), report));
    }
    Ok(GradCheckSummary { results })
}

fn unwrap_nn_model(e: ModelError) -> crate::nn::NnError {
    match e {
        ModelError::Nn(inner) => inner,
        other => unreachable!("fixed check config cannot misconfigure the model: {other}"),
    }
}

fn unwrap_nn_loss(e: LossError) -> crate::nn::NnError {
    match e {
        LossError::Nn(inner) => inner,
        other => unreachable!("fixed check slate cannot break the loss: {other}"),
    }
}
