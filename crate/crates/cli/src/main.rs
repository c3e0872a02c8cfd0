//! `vulnscan`: command-line surface for graph extraction, training,
//! evaluation, prediction, Alpaca export, and the case study.
//!
//! Exit codes: 0 success, 1 fatal error, 2 partial success. Every failure
//! path emits one line of machine-readable JSON on stderr.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use vulnscan_core::alpaca;
use vulnscan_core::codegraph::dot::to_dot;
use vulnscan_core::codegraph::{build_cfg, build_dfg, parse_ast, to_adjacency, GraphKind, SourceUnit};
use vulnscan_core::container::{MatrixContainer, Payload};
use vulnscan_core::embedding::{collect_preserve_list, fit_vocabulary, Vocabulary};
use vulnscan_core::harness::{
    case_eval, evaluate, load_dataset, predict, run_ablation, train, HarnessError, TrainConfig,
};
use vulnscan_core::model::{init_parameters, AblationAxis, ConformerModel, ModelConfig, ModelError};

#[derive(Parser)]
#[command(name = "vulnscan", version, about = "C vulnerability identification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract AST/CFG/DFG graphs from C sources into DOT and matrix archives
    Extract {
        /// C source file or directory of .c files
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated graph kinds: ast,cfg,dfg
        #[arg(long, default_value = "ast,cfg,dfg")]
        graphs: String,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Adjacency matrix node budget
        #[arg(long, default_value_t = 128)]
        max_nodes: usize,
        /// Also write Graphviz DOT text per graph
        #[arg(long)]
        dot: bool,
    },
    /// Train a model on a JSONL dataset
    Train {
        /// JSONL dataset with {id, code, label, split} records
        #[arg(long)]
        dataset: PathBuf,
        /// JSON run config with optional "model" and "train" sections
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for checkpoint, vocabulary, history, config echo
        #[arg(long)]
        out: PathBuf,
        /// Overrides the training seed from the config
        #[arg(long)]
        seed: Option<u64>,
        /// Ablation axis: baseline, w/o-ast, w/o-cfg, w/o-dfg, w/o-conformer,
        /// w/o-attention-modified, w/o-llm
        #[arg(long)]
        ablate: Option<String>,
    },
    /// Evaluate a checkpoint on one dataset split
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Split to score: train, validation, or test
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Score a single C file
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Export a dataset as instruction/input/output JSONL records
    ExportAlpaca {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score vulnerable/patched pairs (<name>.vuln.c / <name>.fixed.c)
    CaseStudy {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Run the ablation table: train once per axis and report metrics
    Ablation {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output path for the CSV table (Markdown goes to stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(m) = cause.downcast_ref::<ModelError>() {
            return match m {
                ModelError::IncompatibleCheckpoint(_) => "incompatible-checkpoint",
                ModelError::InvalidConfig(_) => "invalid-config",
                ModelError::Io(_) => "io",
                ModelError::Json(_) => "json",
                ModelError::Container(_) => "container",
                ModelError::EmptyInput => "empty-input",
                ModelError::Tensor(_) => "tensor",
            };
        }
        if let Some(h) = cause.downcast_ref::<HarnessError>() {
            return match h {
                HarnessError::Schema { .. }
                | HarnessError::DuplicateId(_)
                | HarnessError::MissingLabel(_) => "schema",
                HarnessError::EmptyPredictions => "empty-predictions",
                HarnessError::InvalidThreshold(_) => "invalid-threshold",
                HarnessError::EmptySplit(_) => "empty-split",
                HarnessError::Divergence { .. } => "divergence",
                HarnessError::Io(_) => "io",
                HarnessError::Model(_) => "model",
                HarnessError::Graph(_) => "graph",
                HarnessError::Embed(_) => "embed",
                HarnessError::Tensor(_) => "tensor",
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "json";
        }
    }
    "error"
}

fn emit_error(kind: &str, message: &str) {
    eprintln!(
        "{}",
        serde_json::json!({ "kind": kind, "message": message })
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            emit_error(error_kind(&err), &format!("{err:#}"));
            ExitCode::from(1)
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    model: ModelConfig,
    train: TrainConfig,
}

fn load_run_config(path: &Option<PathBuf>) -> anyhow::Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            Ok(serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", p.display()))?)
        }
    }
}

/// Vocabulary sidecar next to a checkpoint file.
fn vocab_path(ckpt: &Path) -> PathBuf {
    ckpt.parent().unwrap_or(Path::new(".")).join("vocab.json")
}

fn load_model_and_vocab(ckpt: &Path) -> anyhow::Result<(ConformerModel<f32>, Vocabulary)> {
    let model = ConformerModel::<f32>::load_checkpoint(ckpt)?;
    let vocab = Vocabulary::load(vocab_path(ckpt))
        .map_err(|e| anyhow!("loading vocabulary next to checkpoint: {e}"))?;
    Ok((model, vocab))
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Extract {
            input,
            graphs,
            out,
            max_nodes,
            dot,
        } => cmd_extract(&input, &graphs, &out, max_nodes, dot),
        Command::Train {
            dataset,
            config,
            out,
            seed,
            ablate,
        } => cmd_train(&dataset, &config, &out, seed, ablate.as_deref()),
        Command::Eval {
            ckpt,
            dataset,
            split,
            threshold,
        } => cmd_eval(&ckpt, &dataset, &split, threshold),
        Command::Predict {
            ckpt,
            file,
            threshold,
        } => cmd_predict(&ckpt, &file, threshold),
        Command::ExportAlpaca { dataset, out } => cmd_export_alpaca(&dataset, &out),
        Command::CaseStudy {
            ckpt,
            pairs,
            threshold,
        } => cmd_case_study(&ckpt, &pairs, threshold),
        Command::Ablation {
            dataset,
            config,
            seed,
            out,
        } => cmd_ablation(&dataset, &config, seed, &out),
    }
}

#[derive(Default, Serialize)]
struct ExtractStats {
    files: usize,
    succeeded: usize,
    failed: usize,
    truncated: usize,
    unsupported: usize,
}

fn cmd_extract(
    input: &Path,
    graphs: &str,
    out: &Path,
    max_nodes: usize,
    dot: bool,
) -> anyhow::Result<u8> {
    let kinds: Vec<GraphKind> = graphs
        .split(',')
        .map(|s| match s.trim() {
            "ast" => Ok(GraphKind::Ast),
            "cfg" => Ok(GraphKind::Cfg),
            "dfg" => Ok(GraphKind::Dfg),
            other => Err(anyhow!("unknown graph kind {other:?} (use ast,cfg,dfg)")),
        })
        .collect::<Result<_, _>>()?;
    let files: Vec<PathBuf> = if input.is_dir() {
        let mut v: Vec<PathBuf> = walkdir::WalkDir::new(input)
            .into_iter()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_file())
            .map(|e| e.into_path())
            .filter(|p| p.extension().is_some_and(|x| x == "c"))
            .collect();
        v.sort();
        v
    } else {
        vec![input.to_path_buf()]
    };
    std::fs::create_dir_all(out)?;

    let mut stats = ExtractStats {
        files: files.len(),
        ..ExtractStats::default()
    };
    for file in &files {
        let stem = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "unit".into());
        match extract_one(file, &stem, &kinds, out, max_nodes, dot) {
            Ok((truncated, unsupported)) => {
                stats.succeeded += 1;
                stats.truncated += truncated as usize;
                stats.unsupported += unsupported;
            }
            Err(e) => {
                stats.failed += 1;
                emit_error("extract", &format!("{}: {e:#}", file.display()));
            }
        }
    }
    let summary = serde_json::to_string(&stats)?;
    std::fs::write(out.join("summary.json"), format!("{summary}\n"))?;
    println!("{summary}");
    Ok(if stats.failed > 0 { 2 } else { 0 })
}

fn extract_one(
    file: &Path,
    stem: &str,
    kinds: &[GraphKind],
    out: &Path,
    max_nodes: usize,
    dot: bool,
) -> anyhow::Result<(bool, usize)> {
    let code = std::fs::read_to_string(file)?;
    let unit = SourceUnit::new(stem, code);
    let ast = parse_ast(&unit)?;
    let mut container = MatrixContainer::new();
    let mut truncated = false;
    let mut unsupported = 0;
    for &kind in kinds {
        let graph = match kind {
            GraphKind::Ast => ast.clone(),
            GraphKind::Cfg => {
                let cfg = build_cfg(&ast)?;
                unsupported += cfg.unsupported;
                cfg.graph
            }
            GraphKind::Dfg => build_dfg(&ast, &unit.code)?,
        };
        let adj = to_adjacency(&graph, max_nodes);
        truncated |= adj.was_truncated;
        container.push(kind.as_str(), Payload::F32(adj.data.into_dyn()))?;
        if dot {
            std::fs::write(
                out.join(format!("{stem}.{}.dot", kind.as_str())),
                to_dot(&graph),
            )?;
        }
    }
    container.save(out.join(format!("{stem}.dhmx")))?;
    Ok((truncated, unsupported))
}

fn cmd_train(
    dataset: &Path,
    config: &Option<PathBuf>,
    out: &Path,
    seed: Option<u64>,
    ablate: Option<&str>,
) -> anyhow::Result<u8> {
    let ds = load_dataset(dataset)?;
    let mut run_cfg = load_run_config(config)?;
    if let Some(s) = seed {
        run_cfg.train.seed = s;
    }
    let axis = match ablate {
        None => AblationAxis::Baseline,
        Some(flag) => AblationAxis::from_flag(flag)
            .ok_or_else(|| anyhow!("unknown ablation axis {flag:?}"))?,
    };
    axis.apply(&mut run_cfg.model);

    let preserve = collect_preserve_list(&ds.train);
    let vocab = fit_vocabulary(&ds.train, 1, &preserve)?;
    run_cfg.model.vocab_size = vocab.len();

    let mut model = init_parameters::<f32>(run_cfg.model.clone(), run_cfg.train.seed)?;
    let result = train(&mut model, &ds, &vocab, &run_cfg.train)?;

    std::fs::create_dir_all(out)?;
    let ckpt = out.join("model.dhmx");
    model.save_checkpoint(&ckpt)?;
    vocab.save(vocab_path(&ckpt))?;
    std::fs::write(
        out.join("history.json"),
        serde_json::to_string_pretty(&result.history)?,
    )?;
    // echo of the fully resolved run, including the ablation axis
    let echo = serde_json::json!({
        "model": model.config,
        "train": run_cfg.train,
        "ablation": axis.label(),
    });
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(&echo)?)?;
    println!(
        "{}",
        serde_json::json!({
            "checkpoint": ckpt.display().to_string(),
            "epochs": result.history.len(),
            "best_epoch": result.best_epoch,
            "stopped_early": result.stopped_early,
            "final_train_loss": result.history.last().map(|h| h.train_loss),
        })
    );
    Ok(0)
}

fn cmd_eval(ckpt: &Path, dataset: &Path, split: &str, threshold: f64) -> anyhow::Result<u8> {
    let (model, vocab) = load_model_and_vocab(ckpt)?;
    let ds = load_dataset(dataset)?;
    let units = match split {
        "train" => &ds.train,
        "validation" | "val" => &ds.validation,
        "test" => &ds.test,
        other => return Err(anyhow!("unknown split {other:?}")),
    };
    let report = evaluate(&model, units, &vocab, threshold)?;
    println!("{}", serde_json::to_string(&report)?);
    println!();
    println!("| split | ACC | Precision | Recall | F1 | TP | FP | TN | FN |");
    println!("|---|---|---|---|---|---|---|---|---|");
    println!(
        "| {split} | {:.4} | {:.4} | {:.4} | {:.4} | {} | {} | {} | {} |",
        report.accuracy,
        report.precision,
        report.recall,
        report.f1,
        report.tp,
        report.fp,
        report.tn,
        report.fn_
    );
    Ok(0)
}

fn cmd_predict(ckpt: &Path, file: &Path, threshold: f64) -> anyhow::Result<u8> {
    let (model, vocab) = load_model_and_vocab(ckpt)?;
    let code = std::fs::read_to_string(file)?;
    let unit = SourceUnit::new(file.display().to_string(), code);
    let probability = predict(&model, &unit, &vocab)?;
    let verdict = if probability >= threshold {
        alpaca::OUTPUT_VULNERABLE
    } else {
        alpaca::OUTPUT_CLEAN
    };
    println!(
        "{}",
        serde_json::json!({
            "file": file.display().to_string(),
            "probability": probability,
            "verdict": verdict,
            "model_untrained": !model.config.trained,
        })
    );
    Ok(0)
}

fn cmd_export_alpaca(dataset: &Path, out: &Path) -> anyhow::Result<u8> {
    let ds = load_dataset(dataset)?;
    let units: Vec<SourceUnit> = ds.all_units().cloned().collect();
    let file = std::fs::File::create(out)?;
    let n = alpaca::export_jsonl(&units, std::io::BufWriter::new(file))?;
    println!("{}", serde_json::json!({ "records": n, "out": out.display().to_string() }));
    Ok(0)
}

fn cmd_case_study(ckpt: &Path, pairs: &Path, threshold: f64) -> anyhow::Result<u8> {
    let (model, vocab) = load_model_and_vocab(ckpt)?;
    // pair files: <name>.vuln.c and <name>.fixed.c
    let mut vuln: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut fixed: BTreeMap<String, PathBuf> = BTreeMap::new();
    for entry in std::fs::read_dir(pairs)? {
        let path = entry?.path();
        let Some(name) = path.file_name().map(|s| s.to_string_lossy().into_owned()) else {
            continue;
        };
        if let Some(stem) = name.strip_suffix(".vuln.c") {
            vuln.insert(stem.to_string(), path);
        } else if let Some(stem) = name.strip_suffix(".fixed.c") {
            fixed.insert(stem.to_string(), path);
        }
    }
    let names: BTreeSet<String> = vuln.keys().chain(fixed.keys()).cloned().collect();
    let mut unmatched = 0usize;
    let mut resolved = 0usize;
    let mut rows = Vec::new();
    for name in &names {
        let (Some(v), Some(f)) = (vuln.get(name), fixed.get(name)) else {
            unmatched += 1;
            emit_error("unmatched-pair", &format!("{name}: missing counterpart file"));
            continue;
        };
        let vu = SourceUnit::new(format!("{name}.vuln"), std::fs::read_to_string(v)?)
            .with_label(true);
        let fu = SourceUnit::new(format!("{name}.fixed"), std::fs::read_to_string(f)?)
            .with_label(false);
        let report = case_eval(&model, (&vu, &fu), &vocab, threshold)?;
        resolved += report.resolved as usize;
        rows.push((name.clone(), report));
    }
    println!("| pair | P(vulnerable) | P(patched) | verdict |");
    println!("|---|---|---|---|");
    for (name, r) in &rows {
        println!(
            "| {name} | {:.4} | {:.4} | {} |",
            r.prob_vulnerable, r.prob_patched, r.verdict
        );
    }
    println!();
    println!(
        "{}",
        serde_json::json!({
            "pairs": rows.len(),
            "resolved": resolved,
            "unresolved": rows.len() - resolved,
            "unmatched": unmatched,
            "model_untrained": !model.config.trained,
        })
    );
    Ok(if unmatched > 0 { 2 } else { 0 })
}

fn cmd_ablation(
    dataset: &Path,
    config: &Option<PathBuf>,
    seed: Option<u64>,
    out: &Option<PathBuf>,
) -> anyhow::Result<u8> {
    let ds = load_dataset(dataset)?;
    let mut run_cfg = load_run_config(config)?;
    if let Some(s) = seed {
        run_cfg.train.seed = s;
    }
    let preserve = collect_preserve_list(&ds.train);
    let vocab = fit_vocabulary(&ds.train, 1, &preserve)?;
    run_cfg.model.vocab_size = vocab.len();
    let table = run_ablation(
        &run_cfg.model,
        &ds,
        &vocab,
        &run_cfg.train,
        &AblationAxis::ALL,
    )?;
    print!("{}", table.to_markdown());
    if let Some(path) = out {
        std::fs::write(path, table.to_csv())?;
    }
    Ok(0)
}
