//! Microbenchmarks for the hot kernels: attention (both denominators),
//! a full Conformer block, CFG extraction, and the tokenizer.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::ArrayD;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;
use std::collections::BTreeSet;
use std::hint::black_box;

use vulnscan_core::codegraph::{build_cfg, parse_ast, SourceUnit};
use vulnscan_core::embedding::{fit_vocabulary, lex, tokenize};
use vulnscan_core::tensor::{
    attention, conformer_block, xavier_uniform, AttentionConfig, AttentionScaling,
    ConvModuleParams, FfnParams, HeadParams, MhaParams, Mode, Tensor,
};

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f32> {
    Tensor::param(xavier_uniform::<f32>(rng, shape))
}

fn bench_attention(c: &mut Criterion) {
    let mut group = c.benchmark_group("attention");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for &len in &[32usize, 128] {
        let q = rand_tensor(&mut rng, &[len, 64]);
        let k = rand_tensor(&mut rng, &[len, 64]);
        let v = rand_tensor(&mut rng, &[len, 64]);
        for (name, scaling) in [
            ("standard", AttentionScaling::Standard),
            ("plus_one", AttentionScaling::PlusOne),
        ] {
            group.bench_with_input(BenchmarkId::new(name, len), &len, |b, _| {
                b.iter(|| attention(black_box(&q), &k, &v, scaling, false).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_conformer_block(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = 64;
    let x = rand_tensor(&mut rng, &[64, d]);
    let ffn1 = FfnParams {
        w1: rand_tensor(&mut rng, &[d, 128]),
        b1: rand_tensor(&mut rng, &[128]),
        w2: rand_tensor(&mut rng, &[128, d]),
        b2: rand_tensor(&mut rng, &[d]),
    };
    let ffn2 = ffn1.clone();
    let mha = MhaParams {
        heads: (0..4)
            .map(|_| HeadParams {
                w_q: rand_tensor(&mut rng, &[d, d / 4]),
                w_k: rand_tensor(&mut rng, &[d, d / 4]),
                w_v: rand_tensor(&mut rng, &[d, d / 4]),
            })
            .collect(),
        w_o: rand_tensor(&mut rng, &[d, d]),
    };
    let conv = ConvModuleParams {
        kernel: rand_tensor(&mut rng, &[7, d, d]),
        bias: rand_tensor(&mut rng, &[d]),
        gamma: Tensor::param(ArrayD::from_elem(ndarray::IxDyn(&[d]), 1.0f32)),
        beta: Tensor::param(ArrayD::zeros(ndarray::IxDyn(&[d]))),
        running_mean: RefCell::new(ndarray::Array1::zeros(d)),
        running_var: RefCell::new(ndarray::Array1::ones(d)),
        momentum: 0.9,
        eps: 1e-5,
    };
    let ln_gamma = Tensor::param(ArrayD::from_elem(ndarray::IxDyn(&[d]), 1.0f32));
    let ln_beta = Tensor::param(ArrayD::zeros(ndarray::IxDyn(&[d])));
    let cfg = AttentionConfig {
        num_heads: 4,
        model_dim: d,
        scaling: AttentionScaling::PlusOne,
        softmax_one: false,
        dropout: 0.0,
    };
    c.bench_function("conformer_block/forward_64x64", |b| {
        b.iter(|| {
            conformer_block(
                black_box(&x),
                &ffn1,
                &mha,
                &conv,
                &ffn2,
                &ln_gamma,
                &ln_beta,
                &cfg,
                Mode::Eval,
                None,
            )
            .unwrap()
        })
    });
    c.bench_function("conformer_block/forward_backward_64x64", |b| {
        b.iter(|| {
            let out = conformer_block(
                black_box(&x),
                &ffn1,
                &mha,
                &conv,
                &ffn2,
                &ln_gamma,
                &ln_beta,
                &cfg,
                Mode::Eval,
                None,
            )
            .unwrap()
            .sum();
            out.backward().unwrap();
            x.zero_grad();
        })
    });
}

const SAMPLE: &str = r#"
int process(char *buf, int len) {
    int i = 0;
    int acc = 0;
    while (i < len) {
        if (buf[i] > 0) { acc += buf[i]; }
        else { acc -= 1; }
        i++;
    }
    for (i = 0; i < 4; i++) { acc *= 2; }
    return acc;
}
"#;

fn bench_cfg_extraction(c: &mut Criterion) {
    let unit = SourceUnit::new("bench", SAMPLE);
    c.bench_function("codegraph/parse_and_cfg", |b| {
        b.iter(|| {
            let ast = parse_ast(black_box(&unit)).unwrap();
            build_cfg(&ast).unwrap()
        })
    });
}

fn bench_tokenizer(c: &mut Criterion) {
    let unit = SourceUnit::new("bench", SAMPLE);
    let vocab = fit_vocabulary(std::slice::from_ref(&unit), 1, &BTreeSet::new()).unwrap();
    c.bench_function("embedding/lex", |b| b.iter(|| lex(black_box(SAMPLE))));
    c.bench_function("embedding/tokenize", |b| {
        b.iter(|| tokenize(black_box(&unit), &vocab))
    });
}

criterion_group!(
    benches,
    bench_attention,
    bench_conformer_block,
    bench_cfg_extraction,
    bench_tokenizer
);
criterion_main!(benches);
