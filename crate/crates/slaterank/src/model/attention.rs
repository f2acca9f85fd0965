//! Scaled dot-product attention, multi-head attention, and the encoder
//! block, all expressed as tape compositions so gradients come for free.

use rand::RngCore;

use super::{ModelConfig, ModelError};
use crate::nn::{glorot_uniform, Mode, NnError, ParamId, ParamSet, Tape, Tensor, Var};
use crate::{cast, Real};

/// `softmax(Q Kᵀ / sqrt(d_k)) V` with an optional additive mask bias on the
/// attention logits. The scaling divisor is the per-head key width `d_k`
/// (the width Q and K actually have here), not the full model dimension.
pub fn scaled_dot_product_attention<F: Real>(
    tape: &mut Tape<F>,
    q: Var,
    k: Var,
    v: Var,
    mask_bias: Option<&Tensor<F>>,
) -> Result<Var, NnError> {
    let d_k = tape.value(q).cols();
    let kt = tape.transpose(k);
    let logits = tape.matmul(q, kt)?;
    let scaled = tape.scale(logits, cast::<F>(1.0 / (d_k as f64).sqrt()));
    let weights = tape.row_softmax(scaled, mask_bias)?;
    tape.matmul(weights, v)
}

/// Per-head projection matrices plus the output projection.
#[derive(Clone, Debug)]
pub struct MultiHeadParams {
    pub w_q: Vec<ParamId>,
    pub w_k: Vec<ParamId>,
    pub w_v: Vec<ParamId>,
    pub w_o: ParamId,
}

impl MultiHeadParams {
    /// Registers `H` head projections `d_h -> d_h/H` and the output
    /// projection `d_h -> d_h`, all glorot-initialized without biases.
    pub fn register<F: Real>(
        params: &mut ParamSet<F>,
        prefix: &str,
        d_h: usize,
        n_heads: usize,
        rng: &mut dyn RngCore,
    ) -> Self {
        let d_head = d_h / n_heads;
        let mut w_q = Vec::with_capacity(n_heads);
        let mut w_k = Vec::with_capacity(n_heads);
        let mut w_v = Vec::with_capacity(n_heads);
        for h in 0..n_heads {
            w_q.push(params.register(format!("{prefix}.head{h}.wq"), glorot_uniform(d_h, d_head, rng)));
            w_k.push(params.register(format!("{prefix}.head{h}.wk"), glorot_uniform(d_h, d_head, rng)));
            w_v.push(params.register(format!("{prefix}.head{h}.wv"), glorot_uniform(d_h, d_head, rng)));
        }
        let w_o = params.register(format!("{prefix}.wo"), glorot_uniform(d_h, d_h, rng));
        MultiHeadParams { w_q, w_k, w_v, w_o }
    }
}

/// Runs every head's projected attention, concatenates the head outputs and
/// projects back to `d_h`.
pub fn multi_head_attention<F: Real>(
    tape: &mut Tape<F>,
    x: Var,
    params: &ParamSet<F>,
    heads: &MultiHeadParams,
    mask_bias: Option<&Tensor<F>>,
) -> Result<Var, NnError> {
    let mut outputs = Vec::with_capacity(heads.w_q.len());
    for h in 0..heads.w_q.len() {
        let wq = tape.param(params, heads.w_q[h]);
        let wk = tape.param(params, heads.w_k[h]);
        let wv = tape.param(params, heads.w_v[h]);
        let q = tape.matmul(x, wq)?;
        let k = tape.matmul(x, wk)?;
        let v = tape.matmul(x, wv)?;
        outputs.push(scaled_dot_product_attention(tape, q, k, v, mask_bias)?);
    }
    let concat = tape.concat_cols(&outputs)?;
    let wo = tape.param(params, heads.w_o);
    tape.matmul(concat, wo)
}

/// One encoder block's parameters: attention, two layer-norm affine pairs,
/// and the position-wise feed-forward.
#[derive(Clone, Debug)]
pub struct EncoderBlockParams {
    pub attention: MultiHeadParams,
    pub ln1_gamma: ParamId,
    pub ln1_beta: ParamId,
    pub ff_w1: ParamId,
    pub ff_b1: ParamId,
    pub ff_w2: ParamId,
    pub ff_b2: ParamId,
    pub ln2_gamma: ParamId,
    pub ln2_beta: ParamId,
}

impl EncoderBlockParams {
    pub fn register<F: Real>(
        params: &mut ParamSet<F>,
        prefix: &str,
        config: &ModelConfig,
        rng: &mut dyn RngCore,
    ) -> Self {
        let d_h = config.d_h;
        let d_ff = config.d_ff();
        let attention =
            MultiHeadParams::register(params, &format!("{prefix}.attn"), d_h, config.n_heads, rng);
        let ones = Tensor::from_fn(1, d_h, |_, _| F::one());
        EncoderBlockParams {
            attention,
            ln1_gamma: params.register(format!("{prefix}.ln1.gamma"), ones.clone()),
            ln1_beta: params.register(format!("{prefix}.ln1.beta"), Tensor::zeros(1, d_h)),
            ff_w1: params.register(format!("{prefix}.ff.w1"), glorot_uniform(d_h, d_ff, rng)),
            ff_b1: params.register(format!("{prefix}.ff.b1"), Tensor::zeros(1, d_ff)),
            ff_w2: params.register(format!("{prefix}.ff.w2"), glorot_uniform(d_ff, d_h, rng)),
            ff_b2: params.register(format!("{prefix}.ff.b2"), Tensor::zeros(1, d_h)),
            ln2_gamma: params.register(format!("{prefix}.ln2.gamma"), ones),
            ln2_beta: params.register(format!("{prefix}.ln2.beta"), Tensor::zeros(1, d_h)),
        }
    }
}

/// `z = LayerNorm(x + Dropout(MultiHead(x)))`,
/// `out = LayerNorm(z + Dropout(FF(z)))` where FF is a two-layer relu
/// network applied to every item independently. Dropout fires only at the
/// two residual-sum points.
pub fn encoder_block<F: Real>(
    tape: &mut Tape<F>,
    x: Var,
    params: &ParamSet<F>,
    block: &EncoderBlockParams,
    mask_bias: Option<&Tensor<F>>,
    p_drop: f64,
    mode: Mode,
    rng: &mut dyn RngCore,
) -> Result<Var, ModelError> {
    let attended = multi_head_attention(tape, x, params, &block.attention, mask_bias)?;
    let attended = tape.dropout(attended, p_drop, mode, rng)?;
    let summed = tape.add(x, attended)?;
    let g1 = tape.param(params, block.ln1_gamma);
    let b1 = tape.param(params, block.ln1_beta);
    let z = tape.layer_norm(summed, g1, b1)?;

    let w1 = tape.param(params, block.ff_w1);
    let b1v = tape.param(params, block.ff_b1);
    let w2 = tape.param(params, block.ff_w2);
    let b2v = tape.param(params, block.ff_b2);
    let hidden = tape.matmul(z, w1)?;
    let hidden = tape.add_row(hidden, b1v)?;
    let hidden = tape.relu(hidden);
    let ff = tape.matmul(hidden, w2)?;
    let ff = tape.add_row(ff, b2v)?;
    let ff = tape.dropout(ff, p_drop, mode, rng)?;

    let summed2 = tape.add(z, ff)?;
    let g2 = tape.param(params, block.ln2_gamma);
    let b2 = tape.param(params, block.ln2_beta);
    Ok(tape.layer_norm(summed2, g2, b2)?)
}
