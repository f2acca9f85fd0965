//! The full slate scorers: self-attention ranker and pointwise MLP baseline.

use rand::RngCore;

use super::attention::{encoder_block, EncoderBlockParams};
use super::{attention_mask_bias, positional_encoding, ModelConfig, ModelError};
use crate::data::Slate;
use crate::nn::{glorot_uniform, Mode, ParamId, ParamSet, Tape, Tensor, Var};
use crate::Real;

/// Anything that can score a slate by building the computation on a tape.
///
/// Implementations register their parameters into a caller-owned
/// [`ParamSet`] at construction; the same set is then passed to every
/// scoring call, which keeps optimizers, checkpoints and the gradient
/// checker decoupled from model internals.
pub trait Scorer<F: Real> {
    /// Builds the forward pass for one slate; the result is `l x output_dim`
    /// raw scores (padded rows produce values too — callers must ignore
    /// them via the slate mask).
    fn score_on_tape(
        &self,
        tape: &mut Tape<F>,
        params: &ParamSet<F>,
        slate: &Slate<F>,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<Var, ModelError>;

    fn output_dim(&self) -> usize;

    /// Number of scalar parameters this model registered.
    fn param_count(&self) -> usize;

    /// Convenience evaluation scores: one `f64` per position, eval mode,
    /// no dropout. Multi-output (ordinal) models are reduced to the sum of
    /// sigmoided outputs; padded positions get `-inf` so any descending
    /// sort puts them last.
    fn score_slate(&self, params: &ParamSet<F>, slate: &Slate<F>) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        // Eval mode never samples; the rng is inert.
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        let out = self.score_on_tape(&mut tape, params, slate, Mode::Eval, &mut rng)?;
        let matrix = tape.value(out);
        let mut scores = Vec::with_capacity(slate.len());
        for i in 0..slate.len() {
            if !slate.mask[i] {
                scores.push(f64::NEG_INFINITY);
                continue;
            }
            let row: Vec<f64> = matrix.row(i).iter().map(|v| v.to_f64().unwrap()).collect();
            let s = if self.output_dim() == 1 {
                row[0]
            } else {
                crate::losses::ordinal_score(&row)
            };
            scores.push(s);
        }
        Ok(scores)
    }
}

/// Self-attention slate scorer: input projection (+ optional positional
/// encodings), N encoder blocks, shared per-item output layer. All items
/// share all parameters; scores of padded positions are garbage by design
/// and flagged through the slate mask.
pub struct ContextAwareRanker {
    config: ModelConfig,
    input_w: ParamId,
    input_b: ParamId,
    adapter: Option<(ParamId, ParamId)>,
    blocks: Vec<EncoderBlockParams>,
    out_w: ParamId,
    out_b: ParamId,
    n_scalars: usize,
}

impl ContextAwareRanker {
    /// Validates the config and registers all parameters (glorot weights,
    /// zero biases, unit layer-norm gains) into `params`.
    pub fn new<F: Real>(
        config: ModelConfig,
        params: &mut ParamSet<F>,
        rng: &mut dyn RngCore,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let before = params.scalar_count();
        let input_w = params.register("input_fc.weight", glorot_uniform(config.d_f, config.d_fc, rng));
        let input_b = params.register("input_fc.bias", Tensor::zeros(1, config.d_fc));
        let adapter = if config.d_fc != config.d_h {
            let w = params.register("adapter.weight", glorot_uniform(config.d_fc, config.d_h, rng));
            let b = params.register("adapter.bias", Tensor::zeros(1, config.d_h));
            Some((w, b))
        } else {
            None
        };
        let blocks = (0..config.n_blocks)
            .map(|i| EncoderBlockParams::register(params, &format!("block{i}"), &config, rng))
            .collect();
        let out_w = params.register(
            "scoring_fc.weight",
            glorot_uniform(config.d_h, config.output_dim, rng),
        );
        let out_b = params.register("scoring_fc.bias", Tensor::zeros(1, config.output_dim));
        let n_scalars = params.scalar_count() - before;
        Ok(ContextAwareRanker {
            config,
            input_w,
            input_b,
            adapter,
            blocks,
            out_w,
            out_b,
            n_scalars,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }
}

impl<F: Real> Scorer<F> for ContextAwareRanker {
    fn score_on_tape(
        &self,
        tape: &mut Tape<F>,
        params: &ParamSet<F>,
        slate: &Slate<F>,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<Var, ModelError> {
        if slate.d_f() != self.config.d_f {
            return Err(ModelError::ConfigMismatch {
                reason: format!(
                    "model expects d_f = {}, slate has {}",
                    self.config.d_f,
                    slate.d_f()
                ),
            });
        }
        let l = slate.len();
        let x = tape.constant(slate.features.clone());
        let w_in = tape.param(params, self.input_w);
        let b_in = tape.param(params, self.input_b);
        let mut h = tape.matmul(x, w_in)?;
        h = tape.add_row(h, b_in)?;

        if self.config.use_positional_encoding {
            let pe = tape.constant(positional_encoding::<F>(l, self.config.d_fc)?);
            h = tape.add(h, pe)?;
        }
        if let Some((w, b)) = self.adapter {
            let wv = tape.param(params, w);
            let bv = tape.param(params, b);
            h = tape.matmul(h, wv)?;
            h = tape.add_row(h, bv)?;
        }

        let mask_bias = if slate.mask.iter().all(|&m| m) {
            None
        } else {
            Some(attention_mask_bias::<F>(&slate.mask))
        };
        for block in &self.blocks {
            h = encoder_block(
                tape,
                h,
                params,
                block,
                mask_bias.as_ref(),
                self.config.p_drop,
                mode,
                rng,
            )?;
        }

        let w_out = tape.param(params, self.out_w);
        let b_out = tape.param(params, self.out_b);
        let scores = tape.matmul(h, w_out)?;
        Ok(tape.add_row(scores, b_out)?)
    }

    fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    fn param_count(&self) -> usize {
        self.n_scalars
    }
}

/// Pointwise baseline: the same feed-forward network applied to each item
/// in isolation, so an item's score can never depend on its companions.
pub struct MlpBaseline {
    d_f: usize,
    hidden: Vec<usize>,
    output_dim: usize,
    layers: Vec<(ParamId, ParamId)>,
    n_scalars: usize,
}

impl MlpBaseline {
    pub fn new<F: Real>(
        d_f: usize,
        hidden: Vec<usize>,
        output_dim: usize,
        params: &mut ParamSet<F>,
        rng: &mut dyn RngCore,
    ) -> Result<Self, ModelError> {
        if d_f == 0 || output_dim == 0 || hidden.iter().any(|&w| w == 0) {
            return Err(ModelError::InvalidConfig {
                reason: "mlp widths must all be at least 1".into(),
            });
        }
        let before = params.scalar_count();
        let mut layers = Vec::new();
        let mut prev = d_f;
        for (i, &w) in hidden.iter().enumerate() {
            let weight = params.register(format!("mlp.layer{i}.weight"), glorot_uniform(prev, w, rng));
            let bias = params.register(format!("mlp.layer{i}.bias"), Tensor::zeros(1, w));
            layers.push((weight, bias));
            prev = w;
        }
        let weight = params.register("mlp.out.weight", glorot_uniform(prev, output_dim, rng));
        let bias = params.register("mlp.out.bias", Tensor::zeros(1, output_dim));
        layers.push((weight, bias));
        let n_scalars = params.scalar_count() - before;
        Ok(MlpBaseline {
            d_f,
            hidden,
            output_dim,
            layers,
            n_scalars,
        })
    }

    /// Builds an MLP whose parameter count is as close as possible to a
    /// given self-attention config's (uniform hidden widths, two hidden
    /// layers), for like-for-like comparisons.
    pub fn matched_to<F: Real>(
        config: &ModelConfig,
        params: &mut ParamSet<F>,
        rng: &mut dyn RngCore,
    ) -> Result<Self, ModelError> {
        let target = attention_param_count(config);
        let widths = matched_hidden_widths(config.d_f, config.output_dim, target, 2);
        MlpBaseline::new(config.d_f, widths, config.output_dim, params, rng)
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.hidden
    }
}

impl<F: Real> Scorer<F> for MlpBaseline {
    fn score_on_tape(
        &self,
        tape: &mut Tape<F>,
        params: &ParamSet<F>,
        slate: &Slate<F>,
        _mode: Mode,
        _rng: &mut dyn RngCore,
    ) -> Result<Var, ModelError> {
        if slate.d_f() != self.d_f {
            return Err(ModelError::ConfigMismatch {
                reason: format!("mlp expects d_f = {}, slate has {}", self.d_f, slate.d_f()),
            });
        }
        let mut h = tape.constant(slate.features.clone());
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let wv = tape.param(params, w);
            let bv = tape.param(params, b);
            h = tape.matmul(h, wv)?;
            h = tape.add_row(h, bv)?;
            if i + 1 < self.layers.len() {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn param_count(&self) -> usize {
        self.n_scalars
    }
}

/// Scalar parameter count of a [`ContextAwareRanker`] with this config,
/// computed from the widths alone.
pub fn attention_param_count(config: &ModelConfig) -> usize {
    let d_h = config.d_h;
    let d_ff = config.d_ff();
    let mut count = config.d_f * config.d_fc + config.d_fc; // input fc
    if config.d_fc != d_h {
        count += config.d_fc * d_h + d_h; // adapter
    }
    let per_block = 3 * d_h * (d_h / config.n_heads) * config.n_heads // q,k,v
        + d_h * d_h // output projection
        + 4 * d_h // two layer-norm affine pairs
        + d_h * d_ff + d_ff // ff in
        + d_ff * d_h + d_h; // ff out
    count += config.n_blocks * per_block;
    count += d_h * config.output_dim + config.output_dim; // scoring fc
    count
}

/// Uniform hidden width (repeated `n_hidden` times) whose MLP parameter
/// count lands closest to `target`.
pub fn matched_hidden_widths(
    d_f: usize,
    output_dim: usize,
    target: usize,
    n_hidden: usize,
) -> Vec<usize> {
    let count_for = |w: usize| -> usize {
        let mut c = d_f * w + w;
        for _ in 1..n_hidden {
            c += w * w + w;
        }
        c + w * output_dim + output_dim
    };
    let mut best = 1;
    let mut best_gap = usize::MAX;
    for w in 1..=4096 {
        let gap = count_for(w).abs_diff(target);
        if gap < best_gap {
            best_gap = gap;
            best = w;
        }
        if count_for(w) > target * 2 {
            break;
        }
    }
    vec![best; n_hidden]
}
