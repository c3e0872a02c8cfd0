//! C tokenization with identifier preservation, vocabulary fitting, and the
//! L×d code-sequence embedding matrix — either from a trainable internal
//! table or ingested from a matrix-container file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegraph::SourceUnit;
use crate::container::{ContainerError, MatrixContainer, Payload};
use crate::tensor::{Scalar, Tensor, TensorError};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const DEFAULT_MAX_LENGTH: usize = 768;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot fit a vocabulary on an empty corpus")]
    EmptyCorpus,
    #[error("container: {0}")]
    Format(#[from] ContainerError),
    #[error("embedding payload must be 2-D with at most {max} rows, got {got:?}")]
    Shape { got: Vec<usize>, max: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("vocabulary json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Split C source into identifiers, keywords, literals, and operators.
/// Comments and whitespace are dropped. Identifiers always come out whole,
/// so any preserve-list name survives as a single token.
pub fn lex(code: &str) -> Vec<String> {
    let bytes = code.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == '/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c == '/' && bytes.get(i + 1) == Some(&b'*') {
            i += 2;
            while i + 1 < bytes.len() && !(bytes[i] == b'*' && bytes[i + 1] == b'/') {
                i += 1;
            }
            i = (i + 2).min(bytes.len());
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            out.push(code[start..i].to_string());
        } else if c.is_ascii_digit() {
            // number literal, including hex/suffix/exponent forms
            let start = i;
            i += 1;
            while i < bytes.len() {
                let d = bytes[i] as char;
                let is_exp_sign = (d == '+' || d == '-')
                    && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P');
                if d.is_ascii_alphanumeric() || d == '.' || d == '_' || is_exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(code[start..i].to_string());
        } else if c == '"' || c == '\'' {
            let quote = bytes[i];
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i] != quote {
                if bytes[i] == b'\\' {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(bytes.len());
            out.push(code[start..i].to_string());
        } else {
            // longest-match operator/punctuator
            const OPS3: &[&str] = &["<<=", ">>=", "..."];
            const OPS2: &[&str] = &[
                "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=",
                "*=", "/=", "%=", "&=", "^=", "|=", "##",
            ];
            let rest = &code[i..];
            if let Some(op) = OPS3.iter().find(|op| rest.starts_with(**op)) {
                out.push(op.to_string());
                i += 3;
            } else if let Some(op) = OPS2.iter().find(|op| rest.starts_with(**op)) {
                out.push(op.to_string());
                i += 2;
            } else {
                out.push(c.to_string());
                i += c.len_utf8();
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    /// token -> dense id; PAD=0 and UNK=1 are implicit and not stored here.
    map: BTreeMap<String, usize>,
    /// fitting-time frequency per token (preserve-list entries may be 0)
    freq: BTreeMap<String, usize>,
    preserve_list: BTreeSet<String>,
    pub max_length: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.map.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false // PAD and UNK always exist
    }

    pub fn id_of(&self, token: &str) -> usize {
        self.map.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.map.contains_key(token)
    }

    pub fn preserve_list(&self) -> &BTreeSet<String> {
        &self.preserve_list
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let f = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(f)?)
    }
}

/// Count token frequencies over the corpus and assign dense ids from 2
/// upward, ordered by (frequency desc, lexicographic). Preserve-list names
/// always get an id regardless of min_count.
pub fn fit_vocabulary(
    corpus: &[SourceUnit],
    min_count: usize,
    preserve_list: &BTreeSet<String>,
) -> Result<Vocabulary, EmbedError> {
    if corpus.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for unit in corpus {
        for tok in lex(&unit.code) {
            *freq.entry(tok).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&String, usize)> = freq
        .iter()
        .filter(|(t, &c)| c >= min_count || preserve_list.contains(*t))
        .map(|(t, &c)| (t, c))
        .collect();
    for name in preserve_list {
        if !freq.contains_key(name) {
            kept.push((name, 0));
        }
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let map: BTreeMap<String, usize> = kept
        .iter()
        .enumerate()
        .map(|(i, (t, _))| ((*t).clone(), i + 2))
        .collect();
    let freq = kept.iter().map(|(t, c)| ((*t).clone(), *c)).collect();
    Ok(Vocabulary {
        map,
        freq,
        preserve_list: preserve_list.clone(),
        max_length: DEFAULT_MAX_LENGTH,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub ids: Vec<usize>,
    pub max_length: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Lex the unit and map tokens to ids (UNK for out-of-vocabulary),
/// truncating to the vocabulary's max_length.
pub fn tokenize(unit: &SourceUnit, vocab: &Vocabulary) -> TokenSequence {
    let mut tokens = lex(&unit.code);
    tokens.truncate(vocab.max_length);
    let ids = tokens.iter().map(|t| vocab.id_of(t)).collect();
    TokenSequence {
        tokens,
        ids,
        max_length: vocab.max_length,
    }
}

/// Collect every function and variable name declared anywhere in the
/// corpus — identifiers sitting under a "declarator" edge in the AST.
/// Units that fail to parse contribute nothing.
pub fn collect_preserve_list(corpus: &[SourceUnit]) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    for unit in corpus {
        let Ok(ast) = crate::codegraph::parse_ast(unit) else {
            continue;
        };
        for e in &ast.edges {
            let child = &ast.nodes[e.dst];
            if e.edge_tag == "declarator" && child.kind_tag == "identifier" {
                names.insert(unit.code[child.span.0..child.span.1].to_string());
            }
        }
    }
    names
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    Internal,
    Ingested,
}

/// The L×d code-sequence matrix fed to the encoder. Internal matrices are
/// differentiable lookups into a trainable table; ingested ones are frozen.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix<F: Scalar> {
    pub values: Tensor<F>,
    pub source: EmbeddingSource,
}

impl<F: Scalar> EmbeddingMatrix<F> {
    pub fn len(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.shape()[1]
    }
}

/// Row t = table[ids[t]]; PAD rows are zero and receive no gradient, all
/// other rows route gradient back into the table.
pub fn embed<F: Scalar>(
    seq: &TokenSequence,
    table: &Tensor<F>,
) -> Result<EmbeddingMatrix<F>, TensorError> {
    let values = Tensor::gather_rows(table, &seq.ids, PAD_ID)?;
    Ok(EmbeddingMatrix {
        values,
        source: EmbeddingSource::Internal,
    })
}

/// Read a precomputed embedding matrix (first entry of the container);
/// must be 2-D with at most [`DEFAULT_MAX_LENGTH`] rows.
pub fn ingest_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix<f32>, EmbedError> {
    let container = MatrixContainer::load(path)?;
    let payload = container
        .entries()
        .first()
        .map(|(_, p)| p)
        .ok_or_else(|| ContainerError::Format("container holds no matrices".into()))?;
    let shape = payload.shape().to_vec();
    if shape.len() != 2 || shape[0] > DEFAULT_MAX_LENGTH {
        return Err(EmbedError::Shape {
            got: shape,
            max: DEFAULT_MAX_LENGTH,
        });
    }
    let values = match payload {
        Payload::F32(a) => a.clone(),
        Payload::F64(a) => a.mapv(|v| v as f32),
    };
    Ok(EmbeddingMatrix {
        values: Tensor::constant(values),
        source: EmbeddingSource::Ingested,
    })
}
