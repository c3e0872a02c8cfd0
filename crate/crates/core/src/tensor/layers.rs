//! Layer primitives: sinusoidal positions, scaled-dot-product attention
//! (standard and `1+sqrt(d_k)` denominators), the convolutional module and
//! the double-ReLU feed-forward network.

use std::cell::RefCell;

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttentionScaling {
    /// scores = QK^T / sqrt(d_k)
    Standard,
    /// scores = QK^T / (1 + sqrt(d_k))
    #[default]
    PlusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PositionMode {
    #[default]
    Multiplicative,
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub num_heads: usize,
    pub model_dim: usize,
    pub scaling: AttentionScaling,
    /// Opt-in "softmax-one" variant: adds 1 to the softmax normalizer so a
    /// head may abstain. Off by default.
    #[serde(default)]
    pub softmax_one: bool,
    #[serde(default)]
    pub dropout: f64,
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<(), TensorError> {
        if self.num_heads == 0 || !self.model_dim.is_multiple_of(self.num_heads) {
            return Err(TensorError::Invalid(format!(
                "model_dim {} not divisible by num_heads {}",
                self.model_dim, self.num_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TensorError::Invalid(format!(
                "dropout {} outside [0,1)",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.num_heads
    }
}

/// Sinusoidal position table of shape `[len, dim]` (`dim` even). Column
/// pair `i` holds `[sin, cos]` of `pos / 10000^(2i/dim)` for even `i` and
/// the swapped `[cos, sin]` for odd `i`.
pub fn sinusoidal_positions<F: Scalar>(len: usize, dim: usize) -> Result<Array2<F>, TensorError> {
    if !dim.is_multiple_of(2) {
        return Err(TensorError::OddDimension(dim));
    }
    let mut table = Array2::<F>::zeros((len, dim));
    for pair in 0..dim / 2 {
        let freq = 1.0 / 10000f64.powf(2.0 * pair as f64 / dim as f64);
        for pos in 0..len {
            let angle = pos as f64 * freq;
            let (s, c) = (angle.sin(), angle.cos());
            let (a, b) = if pair % 2 == 0 { (s, c) } else { (c, s) };
            table[[pos, 2 * pair]] = F::lit(a);
            table[[pos, 2 * pair + 1]] = F::lit(b);
        }
    }
    Ok(table)
}

/// Combine `[L, d]` input with the sinusoidal table, element-wise product
/// by default (additive mode behind the flag).
pub fn apply_positions<F: Scalar>(
    x: &Tensor<F>,
    mode: PositionMode,
) -> Result<Tensor<F>, TensorError> {
    let shape = x.shape();
    if shape.len() != 2 {
        return Err(TensorError::Invalid(format!(
            "apply_positions expects a 2-D tensor, got {:?}",
            shape
        )));
    }
    let table = sinusoidal_positions::<F>(shape[0], shape[1])?;
    let table = Tensor::constant(table.into_dyn());
    match mode {
        PositionMode::Multiplicative => x.mul(&table),
        PositionMode::Additive => x.add(&table),
    }
}

/// Single-head scaled dot-product attention on `[L, d_k]` inputs.
pub fn attention<F: Scalar>(
    q: &Tensor<F>,
    k: &Tensor<F>,
    v: &Tensor<F>,
    scaling: AttentionScaling,
    softmax_one: bool,
) -> Result<Tensor<F>, TensorError> {
    let (qs, ks, vs) = (q.shape(), k.shape(), v.shape());
    if qs != ks || qs != vs {
        return Err(TensorError::ShapeMismatch {
            op: "attention",
            lhs: qs,
            rhs: if ks != q.shape() { ks } else { vs },
        });
    }
    let d_k = qs[1] as f64;
    let denom = match scaling {
        AttentionScaling::Standard => d_k.sqrt(),
        AttentionScaling::PlusOne => 1.0 + d_k.sqrt(),
    };
    let scores = q
        .matmul(&k.transpose2())?
        .mul_scalar(F::lit(1.0 / denom));
    let weights = if softmax_one {
        scores.softmax_one_lastdim()
    } else {
        scores.softmax_lastdim()
    };
    weights.matmul(v)
}

#[derive(Clone)]
pub struct HeadParams<F: Scalar> {
    pub w_q: Tensor<F>,
    pub w_k: Tensor<F>,
    pub w_v: Tensor<F>,
}

#[derive(Clone)]
pub struct MhaParams<F: Scalar> {
    pub heads: Vec<HeadParams<F>>,
    pub w_o: Tensor<F>,
}

/// Multi-head self-attention: per-head `[d, d_k]` projections of the input,
/// heads concatenated and projected back to `d` by `w_o`.
pub fn multi_head_attention<F: Scalar>(
    x: &Tensor<F>,
    params: &MhaParams<F>,
    cfg: &AttentionConfig,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor<F>, TensorError> {
    cfg.validate()?;
    if params.heads.len() != cfg.num_heads {
        return Err(TensorError::Invalid(format!(
            "expected {} head parameter sets, got {}",
            cfg.num_heads,
            params.heads.len()
        )));
    }
    let mut outputs = Vec::with_capacity(cfg.num_heads);
    for head in &params.heads {
        let q = x.matmul(&head.w_q)?;
        let k = x.matmul(&head.w_k)?;
        let v = x.matmul(&head.w_v)?;
        outputs.push(attention(&q, &k, &v, cfg.scaling, cfg.softmax_one)?);
    }
    let concat = Tensor::concat_lastdim(&outputs)?;
    let mut out = concat.matmul(&params.w_o)?;
    if cfg.dropout > 0.0 {
        if let Some(rng) = dropout_rng {
            out = apply_dropout(&out, cfg.dropout, rng)?;
        }
    }
    Ok(out)
}

/// Inverted dropout; identity when `rate == 0`.
pub fn apply_dropout<F: Scalar>(
    x: &Tensor<F>,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor<F>, TensorError> {
    if rate == 0.0 {
        return Ok(x.clone());
    }
    let keep = 1.0 - rate;
    let shape = x.shape();
    let mask_vals: Vec<F> = (0..x.values().len())
        .map(|_| {
            if rng.gen::<f64>() < keep {
                F::lit(1.0 / keep)
            } else {
                F::zero()
            }
        })
        .collect();
    let mask = ArrayD::from_shape_vec(IxDyn(&shape), mask_vals).unwrap();
    x.dropout_with_mask(mask)
}

pub struct ConvModuleParams<F: Scalar> {
    /// `[k, d, d]` depth-preserving kernel, k odd.
    pub kernel: Tensor<F>,
    pub bias: Tensor<F>,
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
    pub running_mean: RefCell<Array1<F>>,
    pub running_var: RefCell<Array1<F>>,
    pub momentum: F,
    pub eps: F,
}

/// `ReLU(BatchNorm(conv1d(x) + b))`, same-padded over the sequence axis.
/// Training mode normalizes with batch statistics and folds them into the
/// running averages; eval mode uses the stored statistics.
pub fn conv_module<F: Scalar>(
    x: &Tensor<F>,
    params: &ConvModuleParams<F>,
    mode: Mode,
) -> Result<Tensor<F>, TensorError> {
    let conv = x.conv1d(&params.kernel, &params.bias)?;
    let normed = match mode {
        Mode::Train => {
            let (out, mean, var) =
                conv.batchnorm_train(&params.gamma, &params.beta, params.eps)?;
            let m = params.momentum;
            let one_m = F::one() - m;
            {
                let mut rm = params.running_mean.borrow_mut();
                let mut rv = params.running_var.borrow_mut();
                for c in 0..mean.len() {
                    rm[c] = m * rm[c] + one_m * mean[c];
                    rv[c] = m * rv[c] + one_m * var[c];
                }
            }
            out
        }
        Mode::Eval => conv.batchnorm_eval(
            &params.gamma,
            &params.beta,
            &params.running_mean.borrow(),
            &params.running_var.borrow(),
            params.eps,
        )?,
    };
    Ok(normed.relu())
}

/// Macaron composition with residual connections:
/// `x1 = x + ½FFN(x); x2 = x1 + MHSA(x1); x3 = x2 + Conv(x2);
/// out = LayerNorm(x3 + ½FFN(x3))`.
#[allow(clippy::too_many_arguments)]
pub fn conformer_block<F: Scalar>(
    x: &Tensor<F>,
    ffn1: &FfnParams<F>,
    mha: &MhaParams<F>,
    conv: &ConvModuleParams<F>,
    ffn2: &FfnParams<F>,
    ln_gamma: &Tensor<F>,
    ln_beta: &Tensor<F>,
    cfg: &AttentionConfig,
    mode: Mode,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor<F>, TensorError> {
    let half = F::lit(0.5);
    let x1 = x.add(&ffn(x, ffn1)?.mul_scalar(half))?;
    let x2 = x1.add(&multi_head_attention(&x1, mha, cfg, dropout_rng)?)?;
    let x3 = x2.add(&conv_module(&x2, conv, mode)?)?;
    let pre = x3.add(&ffn(&x3, ffn2)?.mul_scalar(half))?;
    pre.layernorm(ln_gamma, ln_beta, F::lit(1e-5))
}

#[derive(Clone)]
pub struct FfnParams<F: Scalar> {
    pub w1: Tensor<F>,
    pub b1: Tensor<F>,
    pub w2: Tensor<F>,
    pub b2: Tensor<F>,
}

/// `FFN(x) = ReLU(W2(ReLU(W1 x + b1)) + b2)` — note the outer ReLU.
pub fn ffn<F: Scalar>(x: &Tensor<F>, params: &FfnParams<F>) -> Result<Tensor<F>, TensorError> {
    let hidden = x.matmul(&params.w1)?.add_bias(&params.b1)?.relu();
    Ok(hidden.matmul(&params.w2)?.add_bias(&params.b2)?.relu())
}

/// Glorot/Xavier uniform init. For conv kernels `[k, c_in, c_out]` the fans
/// are `k*c_in` / `k*c_out`.
pub fn xavier_uniform<F: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize]) -> ArrayD<F> {
    let (fan_in, fan_out) = match shape {
        [rows, cols] => (*rows, *cols),
        [k, c_in, c_out] => (k * c_in, k * c_out),
        other => {
            let n = other.iter().product::<usize>().max(1);
            (n, n)
        }
    };
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let vals: Vec<F> = (0..shape.iter().product::<usize>())
        .map(|_| F::lit(rng.gen_range(-bound..bound)))
        .collect();
    ArrayD::from_shape_vec(IxDyn(shape), vals).unwrap()
}
