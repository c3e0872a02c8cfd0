//! The full encoder: structural/semantic fusion, a stack of Conformer
//! blocks, and a small MLP classification head, plus checkpoint I/O.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegraph::{AdjacencyMatrix, GraphKind};
use crate::container::{ContainerError, MatrixContainer, Payload};
use crate::embedding::EmbeddingMatrix;
use crate::tensor::{
    conformer_block, ffn, AttentionConfig, AttentionScaling, ConvModuleParams, FfnParams,
    HeadParams, MhaParams, Mode, PositionMode, Scalar, Tensor, TensorError,
};

pub const CHECKPOINT_VERSION: u32 = 1;
const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("empty input: nothing to encode")]
    EmptyInput,
    #[error("container: {0}")]
    Container(#[from] ContainerError),
    #[error("incompatible-checkpoint: {0}")]
    IncompatibleCheckpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformerConfig {
    pub num_blocks: usize,
    pub num_heads: usize,
    pub model_dim: usize,
    pub ffn_dim: usize,
    pub conv_kernel: usize,
    pub attention_scaling: AttentionScaling,
    #[serde(default)]
    pub softmax_one: bool,
    pub position_mode: PositionMode,
    #[serde(default)]
    pub dropout: f64,
}

impl Default for ConformerConfig {
    /// Desk-scale defaults; the paper-scale stack (12 blocks, 8 heads,
    /// ffn 1024) is expressible but not the default.
    fn default() -> Self {
        ConformerConfig {
            num_blocks: 4,
            num_heads: 4,
            model_dim: 64,
            ffn_dim: 128,
            conv_kernel: 7,
            attention_scaling: AttentionScaling::PlusOne,
            softmax_one: false,
            position_mode: PositionMode::Multiplicative,
            dropout: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub use_ast: bool,
    pub use_cfg: bool,
    pub use_dfg: bool,
    pub max_nodes: usize,
    /// Width of each learned node-embedding table E_g.
    pub node_embed_dim: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            use_ast: true,
            use_cfg: true,
            use_dfg: true,
            max_nodes: 128,
            node_embed_dim: 16,
        }
    }
}

impl FusionConfig {
    pub fn enabled_graphs(&self) -> Vec<GraphKind> {
        let mut v = Vec::new();
        if self.use_ast {
            v.push(GraphKind::Ast);
        }
        if self.use_cfg {
            v.push(GraphKind::Cfg);
        }
        if self.use_dfg {
            v.push(GraphKind::Dfg);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub conformer: ConformerConfig,
    pub fusion: FusionConfig,
    pub vocab_size: usize,
    /// Width of the code-sequence embedding (internal table or ingested).
    pub cse_dim: usize,
    /// When false, the block stack degrades to plain FFN layers
    /// (the "w/o Conformer" ablation).
    #[serde(default = "default_true")]
    pub use_conformer: bool,
    /// When true, the trainable embedding table is replaced by a fixed
    /// one-hot table (the "w/o LLM" ablation).
    #[serde(default)]
    pub one_hot_embedder: bool,
    /// Set by the training harness; untrained models are flagged in
    /// case-study verdicts.
    #[serde(default)]
    pub trained: bool,
}

fn default_version() -> u32 {
    CHECKPOINT_VERSION
}

fn default_true() -> bool {
    true
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            version: CHECKPOINT_VERSION,
            conformer: ConformerConfig::default(),
            fusion: FusionConfig::default(),
            vocab_size: 1024,
            cse_dim: 64,
            use_conformer: true,
            one_hot_embedder: false,
            trained: false,
        }
    }
}

impl ModelConfig {
    /// Feature width after concatenating CSE with every enabled S_g block.
    pub fn fused_width(&self) -> usize {
        self.cse_dim + self.fusion.enabled_graphs().len() * self.fusion.node_embed_dim
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let c = &self.conformer;
        if c.num_blocks == 0 {
            return Err(ModelError::InvalidConfig("num_blocks must be >= 1".into()));
        }
        if c.num_heads == 0 || !c.model_dim.is_multiple_of(c.num_heads) {
            return Err(ModelError::InvalidConfig(format!(
                "model_dim {} not divisible by num_heads {}",
                c.model_dim, c.num_heads
            )));
        }
        if c.conv_kernel.is_multiple_of(2) {
            return Err(ModelError::InvalidConfig(format!(
                "conv_kernel {} must be odd",
                c.conv_kernel
            )));
        }
        if !(0.0..1.0).contains(&c.dropout) {
            return Err(ModelError::InvalidConfig(format!(
                "dropout {} outside [0,1)",
                c.dropout
            )));
        }
        if self.vocab_size < 2 {
            return Err(ModelError::InvalidConfig(
                "vocab_size must cover PAD and UNK".into(),
            ));
        }
        if self.fusion.max_nodes == 0 || self.fusion.node_embed_dim == 0 {
            return Err(ModelError::InvalidConfig(
                "fusion dims must be positive".into(),
            ));
        }
        if !self.fused_width().is_multiple_of(2) {
            // the sinusoidal table applied before the projection needs an
            // even feature width
            return Err(ModelError::InvalidConfig(format!(
                "fused width {} must be even",
                self.fused_width()
            )));
        }
        Ok(())
    }

    fn attention_config(&self) -> AttentionConfig {
        AttentionConfig {
            num_heads: self.conformer.num_heads,
            model_dim: self.conformer.model_dim,
            scaling: self.conformer.attention_scaling,
            softmax_one: self.conformer.softmax_one,
            dropout: self.conformer.dropout,
        }
    }
}

/// One Table-4 component removal applied to a base config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationAxis {
    Baseline,
    WithoutAst,
    WithoutDfg,
    WithoutCfg,
    WithoutConformer,
    WithoutAttentionModified,
    WithoutLlm,
}

impl AblationAxis {
    pub const ALL: [AblationAxis; 7] = [
        AblationAxis::Baseline,
        AblationAxis::WithoutAst,
        AblationAxis::WithoutDfg,
        AblationAxis::WithoutCfg,
        AblationAxis::WithoutConformer,
        AblationAxis::WithoutAttentionModified,
        AblationAxis::WithoutLlm,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationAxis::Baseline => "baseline",
            AblationAxis::WithoutAst => "w/o AST",
            AblationAxis::WithoutDfg => "w/o DFG",
            AblationAxis::WithoutCfg => "w/o CFG",
            AblationAxis::WithoutConformer => "w/o Conformer",
            AblationAxis::WithoutAttentionModified => "w/o Attention-modified",
            AblationAxis::WithoutLlm => "w/o LLM",
        }
    }

    pub fn from_flag(s: &str) -> Option<AblationAxis> {
        match s {
            "baseline" => Some(AblationAxis::Baseline),
            "w/o-ast" | "wo-ast" => Some(AblationAxis::WithoutAst),
            "w/o-dfg" | "wo-dfg" => Some(AblationAxis::WithoutDfg),
            "w/o-cfg" | "wo-cfg" => Some(AblationAxis::WithoutCfg),
            "w/o-conformer" | "wo-conformer" => Some(AblationAxis::WithoutConformer),
            "w/o-attention-modified" | "wo-attention-modified" => {
                Some(AblationAxis::WithoutAttentionModified)
            }
            "w/o-llm" | "wo-llm" => Some(AblationAxis::WithoutLlm),
            _ => None,
        }
    }

    pub fn apply(self, cfg: &mut ModelConfig) {
        match self {
            AblationAxis::Baseline => {}
            AblationAxis::WithoutAst => cfg.fusion.use_ast = false,
            AblationAxis::WithoutDfg => cfg.fusion.use_dfg = false,
            AblationAxis::WithoutCfg => cfg.fusion.use_cfg = false,
            AblationAxis::WithoutConformer => cfg.use_conformer = false,
            AblationAxis::WithoutAttentionModified => {
                cfg.conformer.attention_scaling = AttentionScaling::Standard
            }
            AblationAxis::WithoutLlm => cfg.one_hot_embedder = true,
        }
    }
}

pub struct ConformerModel<F: Scalar> {
    pub config: ModelConfig,
    params: BTreeMap<String, Tensor<F>>,
    /// Per-block conv modules; empty when `use_conformer` is off. Their
    /// weight tensors alias entries in `params`; running stats live here.
    conv_modules: Vec<ConvModuleParams<F>>,
}

/// Build the named parameter store: Xavier weights, zero biases, unit
/// batchnorm scale. Fully determined by (config, seed).
pub fn init_parameters<F: Scalar>(
    config: ModelConfig,
    seed: u64,
) -> Result<ConformerModel<F>, ModelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params: BTreeMap<String, Tensor<F>> = BTreeMap::new();
    let weight = |params: &mut BTreeMap<String, Tensor<F>>,
                      rng: &mut ChaCha8Rng,
                      name: String,
                      shape: &[usize]| {
        params.insert(name, Tensor::param(crate::tensor::xavier_uniform(rng, shape)));
    };
    let zeros = |params: &mut BTreeMap<String, Tensor<F>>, name: String, shape: &[usize]| {
        params.insert(name, Tensor::param(ArrayD::zeros(IxDyn(shape))));
    };
    let ones = |params: &mut BTreeMap<String, Tensor<F>>, name: String, shape: &[usize]| {
        params.insert(name, Tensor::param(ArrayD::ones(IxDyn(shape))));
    };

    let d = config.conformer.model_dim;
    let d_ff = config.conformer.ffn_dim;
    let d_k = d / config.conformer.num_heads;

    if config.one_hot_embedder {
        let mut table = Array2::<F>::zeros((config.vocab_size, config.cse_dim));
        for i in 0..config.vocab_size {
            table[[i, i % config.cse_dim]] = F::one();
        }
        params.insert("embed.table".into(), Tensor::constant(table.into_dyn()));
    } else {
        weight(
            &mut params,
            &mut rng,
            "embed.table".into(),
            &[config.vocab_size, config.cse_dim],
        );
    }
    for kind in config.fusion.enabled_graphs() {
        weight(
            &mut params,
            &mut rng,
            format!("fusion.{}.table", kind.as_str()),
            &[config.fusion.max_nodes, config.fusion.node_embed_dim],
        );
    }
    weight(
        &mut params,
        &mut rng,
        "fusion.proj.w".into(),
        &[config.fused_width(), d],
    );
    zeros(&mut params, "fusion.proj.b".into(), &[d]);

    let mut conv_modules = Vec::new();
    for k in 0..config.conformer.num_blocks {
        if config.use_conformer {
            for half in ["ffn1", "ffn2"] {
                weight(&mut params, &mut rng, format!("block{k:02}.{half}.w1"), &[d, d_ff]);
                zeros(&mut params, format!("block{k:02}.{half}.b1"), &[d_ff]);
                weight(&mut params, &mut rng, format!("block{k:02}.{half}.w2"), &[d_ff, d]);
                zeros(&mut params, format!("block{k:02}.{half}.b2"), &[d]);
            }
            for h in 0..config.conformer.num_heads {
                for proj in ["wq", "wk", "wv"] {
                    weight(
                        &mut params,
                        &mut rng,
                        format!("block{k:02}.attn.h{h}.{proj}"),
                        &[d, d_k],
                    );
                }
            }
            weight(&mut params, &mut rng, format!("block{k:02}.attn.wo"), &[d, d]);
            weight(
                &mut params,
                &mut rng,
                format!("block{k:02}.conv.kernel"),
                &[config.conformer.conv_kernel, d, d],
            );
            zeros(&mut params, format!("block{k:02}.conv.bias"), &[d]);
            ones(&mut params, format!("block{k:02}.conv.gamma"), &[d]);
            zeros(&mut params, format!("block{k:02}.conv.beta"), &[d]);
            ones(&mut params, format!("block{k:02}.ln.gamma"), &[d]);
            zeros(&mut params, format!("block{k:02}.ln.beta"), &[d]);
            conv_modules.push(ConvModuleParams {
                kernel: params[&format!("block{k:02}.conv.kernel")].clone(),
                bias: params[&format!("block{k:02}.conv.bias")].clone(),
                gamma: params[&format!("block{k:02}.conv.gamma")].clone(),
                beta: params[&format!("block{k:02}.conv.beta")].clone(),
                running_mean: RefCell::new(Array1::zeros(d)),
                running_var: RefCell::new(Array1::from_elem(d, F::one())),
                momentum: F::lit(BN_MOMENTUM),
                eps: F::lit(BN_EPS),
            });
        } else {
            weight(&mut params, &mut rng, format!("block{k:02}.ffn.w1"), &[d, d_ff]);
            zeros(&mut params, format!("block{k:02}.ffn.b1"), &[d_ff]);
            weight(&mut params, &mut rng, format!("block{k:02}.ffn.w2"), &[d_ff, d]);
            zeros(&mut params, format!("block{k:02}.ffn.b2"), &[d]);
        }
    }
    weight(&mut params, &mut rng, "head.w1".into(), &[d, d / 2]);
    zeros(&mut params, "head.b1".into(), &[d / 2]);
    weight(&mut params, &mut rng, "head.w2".into(), &[d / 2, 1]);
    zeros(&mut params, "head.b2".into(), &[1]);

    Ok(ConformerModel {
        config,
        params,
        conv_modules,
    })
}

impl<F: Scalar> ConformerModel<F> {
    pub fn named_parameters(&self) -> impl Iterator<Item = (&String, &Tensor<F>)> {
        self.params.iter()
    }

    /// Trainable parameters only (excludes the fixed one-hot table).
    pub fn trainable_parameters(&self) -> Vec<(&String, &Tensor<F>)> {
        self.params
            .iter()
            .filter(|(_, t)| t.requires_grad())
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.values().map(|t| t.values().len()).sum()
    }

    pub fn embedding_table(&self) -> &Tensor<F> {
        &self.params["embed.table"]
    }

    fn tensor(&self, name: &str) -> &Tensor<F> {
        &self.params[name]
    }

    fn ffn_params(&self, prefix: &str) -> FfnParams<F> {
        FfnParams {
            w1: self.tensor(&format!("{prefix}.w1")).clone(),
            b1: self.tensor(&format!("{prefix}.b1")).clone(),
            w2: self.tensor(&format!("{prefix}.w2")).clone(),
            b2: self.tensor(&format!("{prefix}.b2")).clone(),
        }
    }

    fn mha_params(&self, k: usize) -> MhaParams<F> {
        let heads = (0..self.config.conformer.num_heads)
            .map(|h| HeadParams {
                w_q: self.tensor(&format!("block{k:02}.attn.h{h}.wq")).clone(),
                w_k: self.tensor(&format!("block{k:02}.attn.h{h}.wk")).clone(),
                w_v: self.tensor(&format!("block{k:02}.attn.h{h}.wv")).clone(),
            })
            .collect();
        MhaParams {
            heads,
            w_o: self.tensor(&format!("block{k:02}.attn.wo")).clone(),
        }
    }

    /// Fuse the CSE with structural features S_g = A_g·E_g (resized to L),
    /// apply positions, and project to model_dim.
    pub fn encode_input(
        &self,
        cse: &EmbeddingMatrix<F>,
        adjs: &[AdjacencyMatrix],
    ) -> Result<Tensor<F>, ModelError> {
        let l = cse.len();
        if l == 0 {
            return Err(ModelError::EmptyInput);
        }
        if cse.dim() != self.config.cse_dim {
            return Err(TensorError::ShapeMismatch {
                op: "encode_input",
                lhs: cse.values.shape(),
                rhs: vec![l, self.config.cse_dim],
            }
            .into());
        }
        let mut parts = vec![cse.values.clone()];
        for kind in self.config.fusion.enabled_graphs() {
            let adj = adjs
                .iter()
                .find(|a| a.kind == kind)
                .ok_or_else(|| {
                    ModelError::InvalidConfig(format!(
                        "missing {} adjacency for an enabled graph",
                        kind.as_str()
                    ))
                })?;
            if adj.size != self.config.fusion.max_nodes {
                return Err(TensorError::ShapeMismatch {
                    op: "encode_input",
                    lhs: vec![adj.size, adj.size],
                    rhs: vec![self.config.fusion.max_nodes, self.config.fusion.max_nodes],
                }
                .into());
            }
            let a = Tensor::constant(adj.data.mapv(|v| F::lit(v as f64)).into_dyn());
            let table = self.tensor(&format!("fusion.{}.table", kind.as_str()));
            let s = a.matmul(table)?.resize_rows(l);
            parts.push(s);
        }
        let fused = Tensor::concat_lastdim(&parts)?;
        let positioned =
            crate::tensor::apply_positions(&fused, self.config.conformer.position_mode)?;
        Ok(positioned
            .matmul(self.tensor("fusion.proj.w"))?
            .add_bias(self.tensor("fusion.proj.b"))?)
    }

    /// Run the encoder stack on an already-encoded `[L, d]` input.
    pub fn encode_sequence(
        &self,
        mut x: Tensor<F>,
        mode: Mode,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Tensor<F>, ModelError> {
        let attn_cfg = self.config.attention_config();
        for k in 0..self.config.conformer.num_blocks {
            if self.config.use_conformer {
                x = conformer_block(
                    &x,
                    &self.ffn_params(&format!("block{k:02}.ffn1")),
                    &self.mha_params(k),
                    &self.conv_modules[k],
                    &self.ffn_params(&format!("block{k:02}.ffn2")),
                    self.tensor(&format!("block{k:02}.ln.gamma")),
                    self.tensor(&format!("block{k:02}.ln.beta")),
                    &attn_cfg,
                    mode,
                    dropout_rng.as_deref_mut(),
                )?;
            } else {
                x = ffn(&x, &self.ffn_params(&format!("block{k:02}.ffn")))?;
            }
        }
        Ok(x)
    }

    /// Probability of "vulnerable" as a differentiable `[1,1]` tensor.
    pub fn forward(
        &self,
        cse: &EmbeddingMatrix<F>,
        adjs: &[AdjacencyMatrix],
        mode: Mode,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Tensor<F>, ModelError> {
        let x = self.encode_input(cse, adjs)?;
        let x = self.encode_sequence(x, mode, dropout_rng)?;
        let pooled = x.mean_pool_rows();
        let hidden = pooled
            .matmul(self.tensor("head.w1"))?
            .add_bias(self.tensor("head.b1"))?
            .relu();
        let logit = hidden
            .matmul(self.tensor("head.w2"))?
            .add_bias(self.tensor("head.b2"))?;
        Ok(logit.sigmoid())
    }

    /// Snapshot every parameter and batchnorm running buffer as f64 arrays
    /// (lossless for f32 storage), keyed by name.
    pub fn state_entries(&self) -> Vec<(String, ArrayD<f64>)> {
        let mut out: Vec<(String, ArrayD<f64>)> = self
            .params
            .iter()
            .map(|(n, t)| (n.clone(), t.values().mapv(|v| v.to_f64())))
            .collect();
        for (k, cm) in self.conv_modules.iter().enumerate() {
            out.push((
                format!("block{k:02}.conv.running_mean"),
                cm.running_mean.borrow().mapv(|v| v.to_f64()).into_dyn(),
            ));
            out.push((
                format!("block{k:02}.conv.running_var"),
                cm.running_var.borrow().mapv(|v| v.to_f64()).into_dyn(),
            ));
        }
        out
    }

    /// Restore a snapshot taken from a model with the same config.
    pub fn restore_state(&self, entries: &[(String, ArrayD<f64>)]) {
        let stats: BTreeMap<&str, &ArrayD<f64>> =
            entries.iter().map(|(n, a)| (n.as_str(), a)).collect();
        for (name, t) in &self.params {
            if let Some(a) = stats.get(name.as_str()) {
                t.set_values(a.mapv(F::lit));
            }
        }
        for (k, cm) in self.conv_modules.iter().enumerate() {
            for (suffix, cell) in [
                ("running_mean", &cm.running_mean),
                ("running_var", &cm.running_var),
            ] {
                if let Some(a) = stats.get(format!("block{k:02}.conv.{suffix}").as_str()) {
                    *cell.borrow_mut() = a
                        .mapv(F::lit)
                        .into_dimensionality::<ndarray::Ix1>()
                        .expect("running stats are 1-D");
                }
            }
        }
    }

    /// Write all named tensors plus batchnorm running stats to a matrix
    /// container, with the config as a JSON sidecar at `<path>.json`.
    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        let mut container = MatrixContainer::new();
        for (name, t) in &self.params {
            container.push(name.clone(), Payload::F64(t.values().mapv(|v| v.to_f64())))?;
        }
        for (k, cm) in self.conv_modules.iter().enumerate() {
            let rm = cm.running_mean.borrow().mapv(|v| v.to_f64());
            let rv = cm.running_var.borrow().mapv(|v| v.to_f64());
            container.push(
                format!("block{k:02}.conv.running_mean"),
                Payload::F64(rm.into_dyn()),
            )?;
            container.push(
                format!("block{k:02}.conv.running_var"),
                Payload::F64(rv.into_dyn()),
            )?;
        }
        container.save(path)?;
        let sidecar = sidecar_path(path);
        let f = std::fs::File::create(sidecar)?;
        serde_json::to_writer_pretty(f, &self.config)?;
        Ok(())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ConformerModel<F>, ModelError> {
        let path = path.as_ref();
        let f = std::fs::File::open(sidecar_path(path))?;
        let config: ModelConfig = serde_json::from_reader(f)?;
        if config.version != CHECKPOINT_VERSION {
            return Err(ModelError::IncompatibleCheckpoint(format!(
                "checkpoint version {} != supported {}",
                config.version, CHECKPOINT_VERSION
            )));
        }
        let container = MatrixContainer::load(path)?;
        let model = init_parameters::<F>(config, 0)?;
        for (name, t) in &model.params {
            let payload = container.get(name).ok_or_else(|| {
                ModelError::IncompatibleCheckpoint(format!("missing tensor {name}"))
            })?;
            if payload.shape() != t.shape().as_slice() {
                return Err(ModelError::IncompatibleCheckpoint(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    payload.shape(),
                    t.shape()
                )));
            }
            let values = payload
                .as_f64()
                .ok_or_else(|| {
                    ModelError::IncompatibleCheckpoint(format!("tensor {name} is not f64"))
                })?
                .mapv(F::lit);
            t.set_values(values);
        }
        for (k, cm) in model.conv_modules.iter().enumerate() {
            for (suffix, cell) in [
                ("running_mean", &cm.running_mean),
                ("running_var", &cm.running_var),
            ] {
                let name = format!("block{k:02}.conv.{suffix}");
                let payload = container.get(&name).ok_or_else(|| {
                    ModelError::IncompatibleCheckpoint(format!("missing buffer {name}"))
                })?;
                let a = payload
                    .as_f64()
                    .ok_or_else(|| {
                        ModelError::IncompatibleCheckpoint(format!("buffer {name} is not f64"))
                    })?
                    .mapv(F::lit)
                    .into_dimensionality::<ndarray::Ix1>()
                    .map_err(|_| {
                        ModelError::IncompatibleCheckpoint(format!("buffer {name} is not 1-D"))
                    })?;
                *cell.borrow_mut() = a;
            }
        }
        Ok(model)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    std::path::PathBuf::from(s)
}
