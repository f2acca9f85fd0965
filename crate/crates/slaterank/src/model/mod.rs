//! The context-aware slate scorer and its pointwise MLP baseline.
//!
//! The scorer projects each item's features, optionally adds sinusoidal
//! positional encodings, runs N encoder blocks of multi-head self-attention
//! with skip connections and layer norm, and applies a shared per-item
//! output layer. Without positional encodings, the whole pipeline is
//! permutation-equivariant: reordering a slate's items reorders the scores
//! identically.

mod attention;
mod ranker;

pub use attention::{
    encoder_block, multi_head_attention, scaled_dot_product_attention, EncoderBlockParams,
    MultiHeadParams,
};
pub use ranker::{attention_param_count, ContextAwareRanker, MlpBaseline, Scorer};

use crate::nn::{NnError, Tensor};
use crate::{cast, Real};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("positional encoding requires an even dimension, got {d}")]
    OddDimension { d: usize },
    #[error("config mismatch: {reason}")]
    ConfigMismatch { reason: String },
    #[error("invalid model config: {reason}")]
    InvalidConfig { reason: String },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Architecture hyperparameters.
///
/// `d_h` must be divisible by `H`; each head projects to
/// `d_q = d_k = d_v = d_h / H`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    /// Input feature count.
    pub d_f: usize,
    /// Input projection width.
    pub d_fc: usize,
    /// Encoder block count.
    #[serde(rename = "N")]
    pub n_blocks: usize,
    /// Attention head count.
    #[serde(rename = "H")]
    pub n_heads: usize,
    /// Encoder hidden width (the model dimension).
    pub d_h: usize,
    /// Feed-forward inner width; defaults to `d_h`.
    #[serde(default)]
    pub d_ff: Option<usize>,
    pub p_drop: f64,
    #[serde(default)]
    pub use_positional_encoding: bool,
    /// 1 for scalar scores, or number of ordinal levels − 1.
    #[serde(default = "default_output_dim")]
    pub output_dim: usize,
}

fn default_output_dim() -> usize {
    1
}

impl ModelConfig {
    pub fn d_ff(&self) -> usize {
        self.d_ff.unwrap_or(self.d_h)
    }

    pub fn head_dim(&self) -> usize {
        self.d_h / self.n_heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |reason: String| Err(ModelError::InvalidConfig { reason });
        for (name, v) in [
            ("d_f", self.d_f),
            ("d_fc", self.d_fc),
            ("N", self.n_blocks),
            ("H", self.n_heads),
            ("d_h", self.d_h),
            ("d_ff", self.d_ff()),
            ("output_dim", self.output_dim),
        ] {
            if v == 0 {
                return invalid(format!("{name} must be at least 1"));
            }
        }
        if self.d_h % self.n_heads != 0 {
            return invalid(format!(
                "d_h = {} must be divisible by H = {}",
                self.d_h, self.n_heads
            ));
        }
        if !(0.0..1.0).contains(&self.p_drop) {
            return invalid(format!("p_drop = {} outside [0, 1)", self.p_drop));
        }
        if self.use_positional_encoding && self.d_fc % 2 != 0 {
            return Err(ModelError::OddDimension { d: self.d_fc });
        }
        Ok(())
    }
}

/// Sinusoidal positional encodings: an `l x d` matrix with
/// `PE[pos, 2i] = sin(pos / 10000^(2i/d))` and
/// `PE[pos, 2i+1] = cos(pos / 10000^(2i/d))`. Added to item representations
/// after the input projection (the projected features play the role of
/// embeddings).
pub fn positional_encoding<F: Real>(l: usize, d: usize) -> Result<Tensor<F>, ModelError> {
    if d % 2 != 0 {
        return Err(ModelError::OddDimension { d });
    }
    Ok(Tensor::from_fn(l, d, |pos, c| {
        let i = c / 2;
        let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
        cast::<F>(if c % 2 == 0 { angle.sin() } else { angle.cos() })
    }))
}

/// `l x l` additive attention bias: columns of padded (mask-false) items
/// carry a large negative constant so no query attends to them.
pub fn attention_mask_bias<F: Real>(mask: &[bool]) -> Tensor<F> {
    let l = mask.len();
    Tensor::from_fn(
        l,
        l,
        |_, j| {
            if mask[j] {
                F::zero()
            } else {
                cast::<F>(crate::nn::MASK_BIAS)
            }
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positional_encoding_row_zero_alternates_zero_one() {
        let pe: Tensor<f64> = positional_encoding(3, 6).unwrap();
        for c in 0..6 {
            let expected = if c % 2 == 0 { 0.0 } else { 1.0 };
            assert_eq!(pe.get(0, c), expected);
        }
    }

    #[test]
    fn positional_encoding_spot_value_and_bounds() {
        let pe: Tensor<f64> = positional_encoding(40, 8).unwrap();
        assert!((pe.get(1, 0) - 1f64.sin()).abs() < 1e-15);
        assert!((pe.get(1, 0) - 0.8414709848078965).abs() < 1e-15);
        assert!(pe.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn positional_encoding_rejects_odd_dimension() {
        assert!(matches!(
            positional_encoding::<f64>(4, 5),
            Err(ModelError::OddDimension { d: 5 })
        ));
    }

    #[test]
    fn config_validation() {
        let good = ModelConfig {
            d_f: 10,
            d_fc: 8,
            n_blocks: 2,
            n_heads: 2,
            d_h: 8,
            d_ff: None,
            p_drop: 0.1,
            use_positional_encoding: false,
            output_dim: 1,
        };
        good.validate().unwrap();
        assert_eq!(good.d_ff(), 8);
        assert_eq!(good.head_dim(), 4);

        let mut bad = good.clone();
        bad.d_h = 9; // not divisible by H=2
        assert!(bad.validate().is_err());

        let mut bad = good.clone();
        bad.p_drop = 1.0;
        assert!(bad.validate().is_err());

        let mut bad = good.clone();
        bad.use_positional_encoding = true;
        bad.d_fc = 7;
        assert!(matches!(
            bad.validate(),
            Err(ModelError::OddDimension { d: 7 })
        ));
    }

    #[test]
    fn config_serde_uses_paper_style_names() {
        let json = r#"{"d_f":5,"d_fc":4,"N":1,"H":1,"d_h":4,"p_drop":0.0}"#;
        let cfg: ModelConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.n_blocks, 1);
        assert_eq!(cfg.n_heads, 1);
        assert_eq!(cfg.output_dim, 1);
        assert!(!cfg.use_positional_encoding);
        let round = serde_json::to_string(&cfg).unwrap();
        assert!(round.contains("\"N\":1"));
        assert!(round.contains("\"H\":1"));
    }
}
