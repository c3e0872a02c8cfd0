//! Vulnerability-identification toolkit for C source: structural graph
//! extraction (AST/CFG/DFG), token embedding, a Conformer encoder with a
//! modified attention denominator, and a training/evaluation harness.

pub mod alpaca;
pub mod codegraph;
pub mod container;
pub mod embedding;
pub mod harness;
pub mod model;
pub mod pipeline;
pub mod synthetic;
pub mod tensor;

pub use codegraph::{AdjacencyMatrix, CodeGraph, GraphKind, SourceUnit};
pub use embedding::{EmbeddingMatrix, TokenSequence, Vocabulary};
pub use harness::{DatasetSplit, EvalReport, TrainConfig};
pub use model::{ConformerConfig, ConformerModel, FusionConfig, ModelConfig};
pub use tensor::{Scalar, Tensor, TensorError};
