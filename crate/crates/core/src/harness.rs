//! Dataset handling, metrics, Adam, the training loop, ablation
//! orchestration, and vulnerable/patched case evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::ArrayD;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegraph::{GraphError, SourceUnit};
use crate::embedding::{embed, EmbedError, Vocabulary};
use crate::model::{init_parameters, AblationAxis, ConformerModel, ModelConfig, ModelError};
use crate::pipeline::{featurize, Features};
use crate::tensor::{Mode, Tensor, TensorError};

/// Named parameter/buffer snapshot used for best-epoch restoration.
type StateSnapshot = Vec<(String, ArrayD<f64>)>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("no predictions to score")]
    EmptyPredictions,
    #[error("threshold {0} outside (0,1)")]
    InvalidThreshold(f64),
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("unit {0} has no label")]
    MissingLabel(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub total: usize,
    pub vulnerable: usize,
    pub clean: usize,
}

fn count(units: &[SourceUnit]) -> SplitCounts {
    let vulnerable = units.iter().filter(|u| u.label == Some(true)).count();
    SplitCounts {
        total: units.len(),
        vulnerable,
        clean: units.len() - vulnerable,
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: String,
    pub train: Vec<SourceUnit>,
    pub validation: Vec<SourceUnit>,
    pub test: Vec<SourceUnit>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub train: SplitCounts,
    pub validation: SplitCounts,
    pub test: SplitCounts,
}

impl DatasetSplit {
    pub fn counts(&self) -> DatasetCounts {
        DatasetCounts {
            train: count(&self.train),
            validation: count(&self.validation),
            test: count(&self.test),
        }
    }

    /// Deterministic fractional split of an already-labeled unit list.
    pub fn from_units(
        name: impl Into<String>,
        units: Vec<SourceUnit>,
        train_frac: f64,
        val_frac: f64,
    ) -> DatasetSplit {
        let n = units.len();
        let n_train = (n as f64 * train_frac).round() as usize;
        let n_val = (n as f64 * val_frac).round() as usize;
        let mut it = units.into_iter();
        let train: Vec<_> = it.by_ref().take(n_train).collect();
        let validation: Vec<_> = it.by_ref().take(n_val).collect();
        DatasetSplit {
            name: name.into(),
            train,
            validation,
            test: it.collect(),
        }
    }

    pub fn all_units(&self) -> impl Iterator<Item = &SourceUnit> {
        self.train
            .iter()
            .chain(self.validation.iter())
            .chain(self.test.iter())
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        let mut f = std::fs::File::create(path)?;
        for (split, units) in [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ] {
            for u in units {
                let label = u.label.ok_or_else(|| HarnessError::MissingLabel(u.id.clone()))?;
                let rec = serde_json::json!({
                    "id": u.id,
                    "code": u.code,
                    "label": label as u8,
                    "split": split,
                });
                writeln!(f, "{rec}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: String,
    code: String,
    label: i64,
    split: String,
}

/// Read a JSONL dataset of `{id, code, label, split}` records.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetSplit, HarnessError> {
    let name = path
        .as_ref()
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let f = std::fs::File::open(path)?;
    let mut out = DatasetSplit {
        name,
        ..DatasetSplit::default()
    };
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(&line).map_err(|e| HarnessError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        if rec.label != 0 && rec.label != 1 {
            return Err(HarnessError::Schema {
                line: line_no,
                message: format!("label {} outside {{0,1}}", rec.label),
            });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(HarnessError::DuplicateId(rec.id));
        }
        let unit = SourceUnit::new(rec.id, rec.code).with_label(rec.label == 1);
        match rec.split.as_str() {
            "train" => out.train.push(unit),
            "validation" | "val" => out.validation.push(unit),
            "test" => out.test.push(unit),
            other => {
                return Err(HarnessError::Schema {
                    line: line_no,
                    message: format!("unknown split {other:?}"),
                })
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
}

/// Confusion counts at `threshold` plus the four derived ratios;
/// zero-denominator precision/recall are reported as 0.
pub fn compute_metrics(
    predictions: &[(f64, bool)],
    threshold: f64,
) -> Result<EvalReport, HarnessError> {
    if predictions.is_empty() {
        return Err(HarnessError::EmptyPredictions);
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(HarnessError::InvalidThreshold(threshold));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for &(prob, label) in predictions {
        match (prob >= threshold, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalReport {
        tp,
        fp,
        tn,
        fn_,
        accuracy: ratio(tp + tn, predictions.len()),
        precision,
        recall,
        f1,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub threshold: f64,
    /// Early stop when validation F1 has not improved for this many epochs.
    pub patience: Option<usize>,
    /// Stop as soon as eval-mode train accuracy reaches this value.
    pub stop_at_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 3e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 8,
            epochs: 50,
            seed: 0,
            threshold: 0.5,
            patience: Some(10),
            stop_at_train_accuracy: None,
        }
    }
}

/// Adam over the model's named trainable parameters.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u32,
    state: BTreeMap<String, (ArrayD<f32>, ArrayD<f32>)>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig) -> Adam {
        Adam {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            t: 0,
            state: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, params: &[(&String, &Tensor<f32>)]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        for (name, p) in params {
            let Some(g) = p.grad() else { continue };
            let (m, v) = self
                .state
                .entry((*name).clone())
                .or_insert_with(|| (ArrayD::zeros(g.raw_dim()), ArrayD::zeros(g.raw_dim())));
            m.zip_mut_with(&g, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
            v.zip_mut_with(&g, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
            let lr = self.lr as f32;
            let (bc1, bc2, eps) = (bc1 as f32, bc2 as f32, self.eps as f32);
            let m = &*m;
            let v = &*v;
            p.update_values(|w| {
                ndarray::Zip::from(w).and(m).and(v).for_each(|w, &m, &v| {
                    let m_hat = m / bc1;
                    let v_hat = v / bc2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                });
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
    pub val_f1: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResult {
    pub history: Vec<EpochRecord>,
    /// Epoch whose validation F1 was best (None without a validation split).
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

struct Prepared {
    features: Features,
    label: bool,
}

fn prepare(units: &[SourceUnit], vocab: &Vocabulary, max_nodes: usize) -> Result<Vec<Prepared>, HarnessError> {
    units
        .iter()
        .map(|u| {
            let label = u.label.ok_or_else(|| HarnessError::MissingLabel(u.id.clone()))?;
            Ok(Prepared {
                features: featurize(u, vocab, max_nodes)?,
                label,
            })
        })
        .collect()
}

fn forward_prob(
    model: &ConformerModel<f32>,
    sample: &Prepared,
    mode: Mode,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor<f32>, HarnessError> {
    let cse = embed(&sample.features.seq, model.embedding_table())?;
    Ok(model.forward(&cse, &sample.features.adjs, mode, rng)?)
}

fn eval_accuracy(
    model: &ConformerModel<f32>,
    samples: &[Prepared],
    threshold: f64,
) -> Result<Vec<(f64, bool)>, HarnessError> {
    let _ = threshold;
    samples
        .iter()
        .map(|s| {
            let p = forward_prob(model, s, Mode::Eval, None)?.item() as f64;
            Ok((p, s.label))
        })
        .collect()
}

/// Mini-batch BCE training with Adam; seed-deterministic batch order. The
/// best-validation parameters (by F1) are restored into the model at the
/// end when a validation split exists.
pub fn train(
    model: &mut ConformerModel<f32>,
    dataset: &DatasetSplit,
    vocab: &Vocabulary,
    cfg: &TrainConfig,
) -> Result<TrainResult, HarnessError> {
    if dataset.train.is_empty() {
        return Err(HarnessError::EmptySplit("train"));
    }
    let max_nodes = model.config.fusion.max_nodes;
    let train_set = prepare(&dataset.train, vocab, max_nodes)?;
    let val_set = prepare(&dataset.validation, vocab, max_nodes)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg);
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, StateSnapshot)> = None;
    let mut since_best = 0usize;
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let mut losses = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let sample = &train_set[i];
                let prob = forward_prob(model, sample, Mode::Train, Some(&mut rng))?;
                let target = if sample.label { 1.0 } else { 0.0 };
                losses.push(prob.bce_loss(target));
            }
            let mut total = losses[0].clone();
            for l in &losses[1..] {
                total = total.add(l)?;
            }
            let batch_loss = total.mul_scalar(1.0 / chunk.len() as f32);
            let loss_val = batch_loss.item() as f64;
            if !loss_val.is_finite() {
                return Err(HarnessError::Divergence {
                    epoch,
                    loss: loss_val,
                });
            }
            loss_sum += loss_val * chunk.len() as f64;
            batch_loss.backward()?;
            let trainable = model.trainable_parameters();
            adam.step(&trainable);
            for (_, p) in &trainable {
                p.zero_grad();
            }
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let train_preds = eval_accuracy(model, &train_set, cfg.threshold)?;
        let train_accuracy = compute_metrics(&train_preds, cfg.threshold)?.accuracy;

        let (val_accuracy, val_f1) = if val_set.is_empty() {
            (None, None)
        } else {
            let preds = eval_accuracy(model, &val_set, cfg.threshold)?;
            let report = compute_metrics(&preds, cfg.threshold)?;
            (Some(report.accuracy), Some(report.f1))
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_accuracy,
            val_f1,
        });

        if let Some(f1) = val_f1 {
            let improved = best.as_ref().map(|(_, b, _)| f1 > *b).unwrap_or(true);
            if improved {
                best = Some((epoch, f1, model.state_entries()));
                since_best = 0;
            } else {
                since_best += 1;
                if let Some(patience) = cfg.patience {
                    if since_best >= patience {
                        stopped_early = true;
                        break;
                    }
                }
            }
        }
        if let Some(target) = cfg.stop_at_train_accuracy {
            if train_accuracy >= target {
                stopped_early = true;
                break;
            }
        }
    }

    let best_epoch = best.as_ref().map(|(e, _, _)| *e);
    if let Some((_, _, state)) = &best {
        model.restore_state(state);
    }
    model.config.trained = true;
    Ok(TrainResult {
        history,
        best_epoch,
        stopped_early,
    })
}

/// Eval-mode predictions plus metrics for a unit list.
pub fn evaluate(
    model: &ConformerModel<f32>,
    units: &[SourceUnit],
    vocab: &Vocabulary,
    threshold: f64,
) -> Result<EvalReport, HarnessError> {
    let samples = prepare(units, vocab, model.config.fusion.max_nodes)?;
    let preds = eval_accuracy(model, &samples, threshold)?;
    compute_metrics(&preds, threshold)
}

/// Probability of "vulnerable" for a single (possibly unlabeled) unit.
pub fn predict(
    model: &ConformerModel<f32>,
    unit: &SourceUnit,
    vocab: &Vocabulary,
) -> Result<f64, HarnessError> {
    let features = featurize(unit, vocab, model.config.fusion.max_nodes)?;
    let cse = embed(&features.seq, model.embedding_table())?;
    Ok(model.forward(&cse, &features.adjs, Mode::Eval, None)?.item() as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub axis: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Configuration | ACC | Precision | Recall | F1 |\n|---|---|---|---|---|\n");
        for r in &self.rows {
            s.push_str(&format!(
                "| {} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
                r.axis, r.report.accuracy, r.report.precision, r.report.recall, r.report.f1
            ));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("configuration,accuracy,precision,recall,f1\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6}\n",
                r.axis, r.report.accuracy, r.report.precision, r.report.recall, r.report.f1
            ));
        }
        s
    }
}

/// One trained/evaluated run per axis, each with exactly that component
/// disabled relative to the base config.
pub fn run_ablation(
    base_cfg: &ModelConfig,
    dataset: &DatasetSplit,
    vocab: &Vocabulary,
    train_cfg: &TrainConfig,
    axes: &[AblationAxis],
) -> Result<AblationTable, HarnessError> {
    let mut rows = Vec::new();
    for &axis in axes {
        let mut cfg = base_cfg.clone();
        axis.apply(&mut cfg);
        let mut model = init_parameters::<f32>(cfg, train_cfg.seed)?;
        train(&mut model, dataset, vocab, train_cfg)?;
        let eval_units = if dataset.test.is_empty() {
            &dataset.train
        } else {
            &dataset.test
        };
        let report = evaluate(&model, eval_units, vocab, train_cfg.threshold)?;
        rows.push(AblationRow {
            axis: axis.label().to_string(),
            report,
        });
    }
    Ok(AblationTable { rows })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseReport {
    pub prob_vulnerable: f64,
    pub prob_patched: f64,
    pub verdict: String,
    pub resolved: bool,
    /// True when the model was never trained; verdicts are then advisory.
    pub model_untrained: bool,
}

/// Score a vulnerable/patched pair: "resolved" means the vulnerable side
/// clears the threshold while the patched side stays below it.
pub fn case_eval(
    model: &ConformerModel<f32>,
    pair: (&SourceUnit, &SourceUnit),
    vocab: &Vocabulary,
    threshold: f64,
) -> Result<CaseReport, HarnessError> {
    let prob_vulnerable = predict(model, pair.0, vocab)?;
    let prob_patched = predict(model, pair.1, vocab)?;
    let resolved = prob_vulnerable >= threshold && prob_patched < threshold;
    Ok(CaseReport {
        prob_vulnerable,
        prob_patched,
        verdict: if resolved { "resolved" } else { "unresolved" }.to_string(),
        resolved,
        model_untrained: !model.config.trained,
    })
}
