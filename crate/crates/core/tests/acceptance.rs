//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails. Run with `--nocapture` to see the
//! lines on success.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use ndarray::{Array1, ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;

use vulnscan_core::alpaca;
use vulnscan_core::codegraph::corpus::CORPUS;
use vulnscan_core::codegraph::dot::{parse_dot, to_dot};
use vulnscan_core::codegraph::{
    analyze_def_use, build_cfg, build_dfg, parse_ast, SiteKind, SourceUnit,
};
use vulnscan_core::container::{MatrixContainer, Payload};
use vulnscan_core::embedding::fit_vocabulary;
use vulnscan_core::harness::{
    compute_metrics, evaluate, run_ablation, train, DatasetSplit, TrainConfig,
};
use vulnscan_core::model::{
    init_parameters, AblationAxis, ConformerConfig, ConformerModel, FusionConfig, ModelConfig,
    CHECKPOINT_VERSION,
};
use vulnscan_core::synthetic::{marker_dataset, separable_dataset};
use vulnscan_core::tensor::gradcheck::check_gradients;
use vulnscan_core::tensor::{
    apply_positions, attention, conformer_block, conv_module, ffn, sinusoidal_positions,
    xavier_uniform, AttentionConfig, AttentionScaling, ConvModuleParams, FfnParams, HeadParams,
    MhaParams, Mode, PositionMode, Tensor,
};

type Check = Result<(), String>;

fn randn(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> ArrayD<f64> {
    let n: usize = shape.iter().product();
    let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    ArrayD::from_shape_vec(IxDyn(shape), vals).unwrap()
}

// ---------------------------------------------------------------- criterion 1

fn gradient_fidelity() -> Check {
    let start = Instant::now();
    let eps = 1e-4;
    let tol = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut run = |name: &str,
                   params: &[&Tensor<f64>],
                   loss: &dyn Fn() -> Tensor<f64>|
     -> Result<(), String> {
        let report = check_gradients(params, loss, eps);
        worst = worst.max(report.max_rel_err);
        if report.max_rel_err > tol {
            return Err(format!(
                "{name}: relative error {:.3e} > {tol:e} over {} entries",
                report.max_rel_err, report.checked
            ));
        }
        Ok(())
    };

    // attention, both denominators
    let q = Tensor::param(randn(&mut rng, &[4, 8], 1.0));
    let k = Tensor::param(randn(&mut rng, &[4, 8], 1.0));
    let v = Tensor::param(randn(&mut rng, &[4, 8], 1.0));
    for (name, scaling) in [
        ("attention/standard", AttentionScaling::Standard),
        ("attention/plus_one", AttentionScaling::PlusOne),
    ] {
        run(name, &[&q, &k, &v], &|| {
            attention(&q, &k, &v, scaling, false).unwrap().sum()
        })?;
    }

    // conv module (train-mode batchnorm path)
    let x = Tensor::param(randn(&mut rng, &[4, 8], 1.0));
    let conv = ConvModuleParams {
        kernel: Tensor::param(randn(&mut rng, &[3, 8, 8], 0.4)),
        bias: Tensor::param(randn(&mut rng, &[8], 0.2)),
        gamma: Tensor::param(randn(&mut rng, &[8], 0.3).mapv(|v| 1.0 + v)),
        beta: Tensor::param(randn(&mut rng, &[8], 0.2)),
        running_mean: RefCell::new(Array1::zeros(8)),
        running_var: RefCell::new(Array1::ones(8)),
        momentum: 0.9,
        eps: 1e-5,
    };
    run(
        "conv_module",
        &[&x, &conv.kernel, &conv.bias, &conv.gamma, &conv.beta],
        &|| conv_module(&x, &conv, Mode::Train).unwrap().sum(),
    )?;

    // FFN
    let f = FfnParams {
        w1: Tensor::param(randn(&mut rng, &[8, 8], 0.5)),
        b1: Tensor::param(randn(&mut rng, &[8], 0.3)),
        w2: Tensor::param(randn(&mut rng, &[8, 8], 0.5)),
        b2: Tensor::param(randn(&mut rng, &[8], 0.3)),
    };
    run("ffn", &[&x, &f.w1, &f.b1, &f.w2, &f.b2], &|| {
        ffn(&x, &f).unwrap().sum()
    })?;

    // position application
    for (name, mode) in [
        ("positions/multiplicative", PositionMode::Multiplicative),
        ("positions/additive", PositionMode::Additive),
    ] {
        run(name, &[&x], &|| apply_positions(&x, mode).unwrap().sum())?;
    }

    // full conformer block, 2 heads over model_dim 8
    let mha = MhaParams {
        heads: (0..2)
            .map(|_| HeadParams {
                w_q: Tensor::param(randn(&mut rng, &[8, 4], 0.5)),
                w_k: Tensor::param(randn(&mut rng, &[8, 4], 0.5)),
                w_v: Tensor::param(randn(&mut rng, &[8, 4], 0.5)),
            })
            .collect(),
        w_o: Tensor::param(randn(&mut rng, &[8, 8], 0.5)),
    };
    let f2 = FfnParams {
        w1: Tensor::param(randn(&mut rng, &[8, 8], 0.5)),
        b1: Tensor::param(randn(&mut rng, &[8], 0.3)),
        w2: Tensor::param(randn(&mut rng, &[8, 8], 0.5)),
        b2: Tensor::param(randn(&mut rng, &[8], 0.3)),
    };
    let ln_gamma = Tensor::param(randn(&mut rng, &[8], 0.2).mapv(|v| 1.0 + v));
    let ln_beta = Tensor::param(randn(&mut rng, &[8], 0.2));
    let cfg = AttentionConfig {
        num_heads: 2,
        model_dim: 8,
        scaling: AttentionScaling::PlusOne,
        softmax_one: false,
        dropout: 0.0,
    };
    let mut block_params: Vec<&Tensor<f64>> = vec![
        &x, &f.w1, &f.b1, &f.w2, &f.b2, &f2.w1, &f2.b1, &f2.w2, &f2.b2, &mha.w_o, &conv.kernel,
        &conv.bias, &conv.gamma, &conv.beta, &ln_gamma, &ln_beta,
    ];
    for h in &mha.heads {
        block_params.extend([&h.w_q, &h.w_k, &h.w_v]);
    }
    run("conformer_block", &block_params, &|| {
        conformer_block(
            &x, &f, &mha, &conv, &f2, &ln_gamma, &ln_beta, &cfg, Mode::Train, None,
        )
        .unwrap()
        .sum()
    })?;

    let elapsed = start.elapsed();
    if elapsed.as_secs() >= 60 {
        return Err(format!("gradient checks took {elapsed:?} (budget 60 s)"));
    }
    println!("       gradient fidelity: worst relative error {worst:.3e}, {elapsed:?}");
    Ok(())
}

// ---------------------------------------------------------------- criterion 2

fn attention_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut max_dev: f64 = 0.0;
    for draw in 0..100 {
        let d_k = [1usize, 4, 16, 64][draw % 4];
        let l = 1 + draw % 6;
        let q = randn(&mut rng, &[l, d_k], 2.0);
        let k = randn(&mut rng, &[l, d_k], 2.0);
        let v = randn(&mut rng, &[l, d_k], 2.0);
        let alpha = (d_k as f64).sqrt() / (1.0 + (d_k as f64).sqrt());
        let plus = attention(
            &Tensor::constant(q.clone()),
            &Tensor::constant(k.clone()),
            &Tensor::constant(v.clone()),
            AttentionScaling::PlusOne,
            false,
        )
        .map_err(|e| e.to_string())?;
        let std = attention(
            &Tensor::constant(q.mapv(|x| x * alpha)),
            &Tensor::constant(k),
            &Tensor::constant(v),
            AttentionScaling::Standard,
            false,
        )
        .map_err(|e| e.to_string())?;
        let dev = (&*plus.values() - &*std.values())
            .iter()
            .fold(0.0f64, |m, &d| m.max(d.abs()));
        max_dev = max_dev.max(dev);
    }
    if max_dev > 1e-6 {
        return Err(format!("max abs deviation {max_dev:.3e} > 1e-6"));
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 3

fn softmax_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for i in 0..1000 {
        let width = 2 + i % 15;
        let row = randn(&mut rng, &[1, width], 8.0);
        let shift = rng.gen_range(-50.0..50.0);
        let s1 = Tensor::constant(row.clone()).softmax_lastdim();
        let s2 = Tensor::constant(row.mapv(|v| v + shift)).softmax_lastdim();
        let sum: f64 = s1.values().iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(format!("row {i}: softmax sums to {sum}, not 1"));
        }
        let dev = (&*s1.values() - &*s2.values())
            .iter()
            .fold(0.0f64, |m, &d| m.max(d.abs()));
        if dev > 1e-6 {
            return Err(format!(
                "row {i}: translation by {shift} moved softmax by {dev:.3e}"
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 4

fn sinusoidal_pattern() -> Check {
    for dim in [4usize, 8, 16, 64] {
        let table = sinusoidal_positions::<f64>(32, dim).map_err(|e| e.to_string())?;
        for pair in 0..dim / 2 {
            let (a, b) = (table[[0, 2 * pair]], table[[0, 2 * pair + 1]]);
            let expect = if pair % 2 == 0 { (0.0, 1.0) } else { (1.0, 0.0) };
            if (a, b) != expect {
                return Err(format!(
                    "dim {dim}, pos 0, pair {pair}: got ({a}, {b}), expected {expect:?}"
                ));
            }
        }
        if table.iter().any(|&v| !(-1.0..=1.0).contains(&v)) {
            return Err(format!("dim {dim}: entry outside [-1, 1]"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 5

/// Simple-path DFS: can `from`'s exit reach `to`'s entry without passing
/// through a node in `kill`?
fn path_reaches(succs: &[Vec<usize>], kill: &BTreeSet<usize>, from: usize, to: usize) -> bool {
    fn dfs(
        node: usize,
        to: usize,
        succs: &[Vec<usize>],
        kill: &BTreeSet<usize>,
        visited: &mut Vec<bool>,
    ) -> bool {
        for &s in &succs[node] {
            if s == to {
                return true;
            }
            if kill.contains(&s) || visited[s] {
                continue;
            }
            visited[s] = true;
            if dfs(s, to, succs, kill, visited) {
                return true;
            }
            visited[s] = false;
        }
        false
    }
    let mut visited = vec![false; succs.len()];
    dfs(from, to, succs, kill, &mut visited)
}

fn graph_oracles() -> Check {
    if CORPUS.len() < 20 {
        return Err(format!("corpus has only {} functions", CORPUS.len()));
    }
    for entry in CORPUS {
        let unit = SourceUnit::new(entry.name, entry.code);
        let ast = parse_ast(&unit).map_err(|e| format!("{}: {e}", entry.name))?;

        // CFG edge sets match the hand-drawn sets exactly
        let cfg = build_cfg(&ast).map_err(|e| format!("{}: {e}", entry.name))?;
        if cfg.graph.node_count() > 12 {
            return Err(format!(
                "{}: {} CFG nodes exceeds the 12-node corpus bound",
                entry.name,
                cfg.graph.node_count()
            ));
        }
        let got: BTreeSet<(usize, usize)> =
            cfg.graph.edges.iter().map(|e| (e.src, e.dst)).collect();
        let want: BTreeSet<(usize, usize)> = entry.cfg_edges.iter().copied().collect();
        if got != want {
            return Err(format!(
                "{}: CFG edges {got:?} != hand-drawn {want:?}",
                entry.name
            ));
        }

        // DFG matches a brute-force simple-path reaching-definitions oracle
        let du = analyze_def_use(&ast, entry.code).map_err(|e| format!("{}: {e}", entry.name))?;
        let n = du.cfg.graph.node_count();
        let mut succs = vec![Vec::new(); n];
        for e in &du.cfg.graph.edges {
            succs[e.src].push(e.dst);
        }
        let gen = du.gen_sets();
        let mut expected: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (u_idx, use_site) in du.sites.iter().enumerate() {
            if use_site.kind != SiteKind::Use {
                continue;
            }
            for (d_idx, def_site) in du.sites.iter().enumerate() {
                if def_site.kind != SiteKind::Def || def_site.var != use_site.var {
                    continue;
                }
                // only a node's last def of the variable survives to its exit
                if gen
                    .get(&def_site.cfg_node)
                    .and_then(|m| m.get(&def_site.var))
                    != Some(&d_idx)
                {
                    continue;
                }
                let kill: BTreeSet<usize> = du
                    .sites
                    .iter()
                    .filter(|s| s.kind == SiteKind::Def && s.var == def_site.var)
                    .map(|s| s.cfg_node)
                    .filter(|&c| c != def_site.cfg_node)
                    .collect();
                if path_reaches(&succs, &kill, def_site.cfg_node, use_site.cfg_node) {
                    expected.insert((d_idx, u_idx));
                }
            }
        }
        let dfg = build_dfg(&ast, entry.code).map_err(|e| format!("{}: {e}", entry.name))?;
        let got: BTreeSet<(usize, usize)> = dfg.edges.iter().map(|e| (e.src, e.dst)).collect();
        if got != expected {
            return Err(format!(
                "{}: DFG edges {got:?} != path-enumerated {expected:?}",
                entry.name
            ));
        }
    }
    println!("       graph oracles: {} corpus functions checked", CORPUS.len());
    Ok(())
}

// ---------------------------------------------------------------- criterion 6

fn overfit_check() -> Check {
    let start = Instant::now();
    let units = marker_dataset(21);
    let vocab = fit_vocabulary(&units, 1, &BTreeSet::new()).map_err(|e| e.to_string())?;
    let config = ModelConfig {
        vocab_size: vocab.len(),
        ..ModelConfig::default()
    };
    let ds = DatasetSplit {
        name: "overfit".into(),
        train: units,
        validation: vec![],
        test: vec![],
    };
    let mut model = init_parameters::<f32>(config, 21).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs: 200,
        stop_at_train_accuracy: Some(1.0),
        patience: None,
        ..TrainConfig::default()
    };
    let result = train(&mut model, &ds, &vocab, &cfg).map_err(|e| e.to_string())?;
    let last = result.history.last().unwrap();
    let elapsed = start.elapsed();
    if last.train_accuracy < 1.0 {
        return Err(format!(
            "train accuracy {:.3} after {} epochs",
            last.train_accuracy,
            result.history.len()
        ));
    }
    if elapsed.as_secs() >= 300 {
        return Err(format!("overfit run took {elapsed:?} (budget 5 min)"));
    }
    println!(
        "       overfit: train ACC 1.0 at epoch {} in {elapsed:?}",
        last.epoch
    );
    Ok(())
}

// ---------------------------------------------------------------- criterion 7

fn small_config(vocab_size: usize) -> ModelConfig {
    ModelConfig {
        version: CHECKPOINT_VERSION,
        conformer: ConformerConfig {
            num_blocks: 1,
            num_heads: 2,
            model_dim: 16,
            ffn_dim: 16,
            conv_kernel: 3,
            ..ConformerConfig::default()
        },
        fusion: FusionConfig {
            max_nodes: 32,
            node_embed_dim: 4,
            ..FusionConfig::default()
        },
        vocab_size,
        cse_dim: 16,
        use_conformer: true,
        one_hot_embedder: false,
        trained: false,
    }
}

fn separability_check() -> Check {
    let units = separable_dataset(2000, 31);
    let vocab = fit_vocabulary(&units, 1, &BTreeSet::new()).map_err(|e| e.to_string())?;
    let ds = DatasetSplit::from_units("separable", units, 0.7, 0.15);
    let mut model =
        init_parameters::<f32>(small_config(vocab.len()), 31).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs: 12,
        stop_at_train_accuracy: Some(0.999),
        patience: None,
        ..TrainConfig::default()
    };
    train(&mut model, &ds, &vocab, &cfg).map_err(|e| e.to_string())?;
    let report = evaluate(&model, &ds.test, &vocab, 0.5).map_err(|e| e.to_string())?;

    // the w/o CFG run must complete and is reported alongside (no ordering
    // asserted between the two accuracies)
    let ablation_cfg = TrainConfig {
        epochs: 3,
        patience: None,
        ..TrainConfig::default()
    };
    let table = run_ablation(
        &small_config(vocab.len()),
        &ds,
        &vocab,
        &ablation_cfg,
        &[AblationAxis::WithoutCfg],
    )
    .map_err(|e| e.to_string())?;
    println!(
        "       separability: baseline test ACC {:.4}; {} test ACC {:.4}",
        report.accuracy, table.rows[0].axis, table.rows[0].report.accuracy
    );
    if report.accuracy < 0.95 {
        return Err(format!("test accuracy {:.4} < 0.95", report.accuracy));
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 8

fn metric_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..1000 {
        let n = rng.gen_range(1..50);
        let threshold = rng.gen_range(0.05..0.95);
        let preds: Vec<(f64, bool)> = (0..n)
            .map(|_| (rng.gen_range(0.0..1.0), rng.gen_bool(0.5)))
            .collect();
        let r = compute_metrics(&preds, threshold).map_err(|e| e.to_string())?;

        // independent recount
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut tn = 0usize;
        let mut fn_ = 0usize;
        for &(p, l) in &preds {
            let pos = p >= threshold;
            if pos && l {
                tp += 1;
            } else if pos {
                fp += 1;
            } else if l {
                fn_ += 1;
            } else {
                tn += 1;
            }
        }
        if (r.tp, r.fp, r.tn, r.fn_) != (tp, fp, tn, fn_) {
            return Err(format!("case {case}: count mismatch"));
        }
        let acc = (tp + tn) as f64 / n as f64;
        let prec = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let rec = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
        for (name, got, want) in [
            ("accuracy", r.accuracy, acc),
            ("precision", r.precision, prec),
            ("recall", r.recall, rec),
            ("f1", r.f1, f1),
        ] {
            if (got - want).abs() > 1e-12 {
                return Err(format!("case {case}: {name} {got} != {want}"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 9

fn determinism_check() -> Check {
    let units = marker_dataset(5);
    let vocab = fit_vocabulary(&units, 1, &BTreeSet::new()).map_err(|e| e.to_string())?;
    let ds = DatasetSplit::from_units("det", units, 0.8, 0.2);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut artifacts = Vec::new();
    for run in 0..2 {
        let mut model =
            init_parameters::<f32>(small_config(vocab.len()), 99).map_err(|e| e.to_string())?;
        let cfg = TrainConfig {
            epochs: 3,
            patience: None,
            ..TrainConfig::default()
        };
        let result = train(&mut model, &ds, &vocab, &cfg).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("run{run}.dhmx"));
        model.save_checkpoint(&path).map_err(|e| e.to_string())?;
        let ckpt = std::fs::read(&path).map_err(|e| e.to_string())?;
        let sidecar =
            std::fs::read(path.with_extension("dhmx.json")).map_err(|e| e.to_string())?;
        let history = serde_json::to_string(&result.history).map_err(|e| e.to_string())?;
        artifacts.push((ckpt, sidecar, history));
    }
    if artifacts[0].0 != artifacts[1].0 {
        return Err("checkpoint bytes differ between same-seed runs".into());
    }
    if artifacts[0].1 != artifacts[1].1 {
        return Err("checkpoint sidecars differ between same-seed runs".into());
    }
    if artifacts[0].2 != artifacts[1].2 {
        return Err("history JSON differs between same-seed runs".into());
    }
    Ok(())
}

// --------------------------------------------------------------- criterion 10

fn round_trips() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(51);

    // container: f32 and f64 payloads survive save/load bit-exactly
    let mut c = MatrixContainer::new();
    let a32: ArrayD<f32> = xavier_uniform(&mut rng, &[3, 5]);
    let a64: ArrayD<f64> = randn(&mut rng, &[2, 4, 3], 3.0);
    c.push("a32", Payload::F32(a32.clone())).map_err(|e| e.to_string())?;
    c.push("a64", Payload::F64(a64.clone())).map_err(|e| e.to_string())?;
    let cpath = dir.path().join("round.dhmx");
    c.save(&cpath).map_err(|e| e.to_string())?;
    let back = MatrixContainer::load(&cpath).map_err(|e| e.to_string())?;
    if back.get("a32").and_then(|p| p.as_f32()) != Some(&a32)
        || back.get("a64").and_then(|p| p.as_f64()) != Some(&a64)
    {
        return Err("container payloads changed across save/load".into());
    }

    // checkpoint: full state and config survive save/load
    let units = marker_dataset(6);
    let vocab = fit_vocabulary(&units, 1, &BTreeSet::new()).map_err(|e| e.to_string())?;
    let model =
        init_parameters::<f32>(small_config(vocab.len()), 17).map_err(|e| e.to_string())?;
    let mpath = dir.path().join("model.dhmx");
    model.save_checkpoint(&mpath).map_err(|e| e.to_string())?;
    let loaded = ConformerModel::<f32>::load_checkpoint(&mpath).map_err(|e| e.to_string())?;
    if loaded.config != model.config {
        return Err("checkpoint config changed across save/load".into());
    }
    if loaded.state_entries() != model.state_entries() {
        return Err("checkpoint state changed across save/load".into());
    }

    // DOT: emit/parse preserves node count and edge sets for all graph kinds
    let unit = SourceUnit::new("dot", "int f(int n){int a=n; while(a){a--;} return a;}");
    let ast = parse_ast(&unit).map_err(|e| e.to_string())?;
    let cfg = build_cfg(&ast).map_err(|e| e.to_string())?.graph;
    let dfg = build_dfg(&ast, &unit.code).map_err(|e| e.to_string())?;
    for g in [&ast, &cfg, &dfg] {
        let parsed = parse_dot(&to_dot(g)).map_err(|e| e.to_string())?;
        let got: BTreeSet<(usize, usize)> = parsed.edges.iter().map(|e| (e.src, e.dst)).collect();
        let want: BTreeSet<(usize, usize)> = g.edges.iter().map(|e| (e.src, e.dst)).collect();
        if parsed.node_count() != g.node_count() || got != want {
            return Err(format!("{:?} graph changed across DOT emit/parse", g.kind));
        }
    }
    Ok(())
}

// --------------------------------------------------------------- criterion 11

fn alpaca_mapping() -> Check {
    let units = marker_dataset(61);
    let mut buf = Vec::new();
    let n = alpaca::export_jsonl(&units, &mut buf).map_err(|e| e.to_string())?;
    if n != units.len() {
        return Err(format!("exported {n} of {} labeled units", units.len()));
    }
    let text = String::from_utf8(buf).map_err(|e| e.to_string())?;
    for (unit, line) in units.iter().zip(text.lines()) {
        let rec: alpaca::AlpacaRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if rec.instruction != alpaca::INSTRUCTION || rec.input != unit.code {
            return Err(format!("{}: instruction or input altered", unit.id));
        }
        let want = if unit.label == Some(true) {
            alpaca::OUTPUT_VULNERABLE
        } else {
            alpaca::OUTPUT_CLEAN
        };
        if rec.output != want {
            return Err(format!(
                "{}: output {:?} does not match the label",
                unit.id, rec.output
            ));
        }
    }
    Ok(())
}

// -------------------------------------------------------------------- driver

#[test]
fn acceptance() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: Vec<Criterion> = vec![
        ("gradient-fidelity", gradient_fidelity),
        ("attention-algebra", attention_algebra),
        ("softmax-properties", softmax_properties),
        ("sinusoidal-pattern", sinusoidal_pattern),
        ("graph-oracles", graph_oracles),
        ("overfit-check", overfit_check),
        ("separability-check", separability_check),
        ("metric-oracle", metric_oracle),
        ("determinism", determinism_check),
        ("round-trips", round_trips),
        ("alpaca-mapping", alpaca_mapping),
    ];
    let mut failures = Vec::new();
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(()) => println!("PASS  {name}"),
            Err(msg) => {
                println!("FAIL  {name}: {msg}");
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
