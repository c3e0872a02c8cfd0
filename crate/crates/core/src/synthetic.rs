//! Deterministic synthetic C corpora for overfit, separability, and
//! case-study experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codegraph::SourceUnit;

/// Call name whose presence marks a sample as vulnerable in the marker and
/// separability datasets.
pub const MARKER_CALL: &str = "risky_source";
const SAFE_CALL: &str = "plain_source";

fn filler(rng: &mut ChaCha8Rng, k: usize) -> String {
    match rng.gen_range(0..4) {
        0 => format!("int t{k} = {};", rng.gen_range(0..100)),
        1 => format!("int t{k} = n + {};", rng.gen_range(1..10)),
        2 => format!("int t{k} = n * {};", rng.gen_range(2..5)),
        _ => format!("int t{k} = 0; t{k}++;"),
    }
}

/// 20 functions, half calling [`MARKER_CALL`]; label = marker present.
/// Small random filler keeps the samples from being literal duplicates.
pub fn marker_dataset(seed: u64) -> Vec<SourceUnit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..20)
        .map(|i| {
            let vulnerable = i % 2 == 0;
            let call = if vulnerable { MARKER_CALL } else { SAFE_CALL };
            let f1 = filler(&mut rng, 0);
            let f2 = filler(&mut rng, 1);
            let code = format!(
                "int sample{i}(int n) {{\n  {f1}\n  int acc = {call}(n);\n  {f2}\n  return acc + t0;\n}}\n"
            );
            SourceUnit::new(format!("marker{i:03}"), code).with_label(vulnerable)
        })
        .collect()
}

/// `n` functions over the four (marker token, while loop) combinations in
/// rotation; label = marker present AND loop present. The non-loop variant
/// uses an if-statement so the CFG pattern, not mere length, distinguishes
/// them.
pub fn separable_dataset(n: usize, seed: u64) -> Vec<SourceUnit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let has_token = i % 2 == 0;
            let has_loop = (i / 2) % 2 == 0;
            let label = has_token && has_loop;
            let call = if has_token { MARKER_CALL } else { SAFE_CALL };
            let flow = if has_loop {
                "while (n > 0) { acc += n; n--; }"
            } else {
                "if (n > 0) { acc += n; n = 0; }"
            };
            let f1 = filler(&mut rng, 0);
            let code = format!(
                "int fn{i}(int n) {{\n  int acc = 0;\n  {f1}\n  {flow}\n  acc = {call}(acc);\n  return acc;\n}}\n"
            );
            SourceUnit::new(format!("sep{i:05}"), code).with_label(label)
        })
        .collect()
}

/// A vulnerable/patched source pair for the case study.
#[derive(Debug, Clone)]
pub struct CasePair {
    pub name: String,
    pub vulnerable: SourceUnit,
    pub patched: SourceUnit,
}

/// Four pairs: a memcpy overflow, wrong buffer-size arithmetic, and two
/// missing-pointer-validation variants.
pub fn case_pairs() -> Vec<CasePair> {
    let mk = |name: &str, vuln: &str, fixed: &str| CasePair {
        name: name.to_string(),
        vulnerable: SourceUnit::new(format!("{name}.vuln"), vuln).with_label(true),
        patched: SourceUnit::new(format!("{name}.fixed"), fixed).with_label(false),
    };
    vec![
        mk(
            "memcpy_overflow",
            "void copy_in(char *dst, char *src, int n) {\n  memcpy(dst, src, n);\n}\n",
            "void copy_in(char *dst, char *src, int n) {\n  if (n > 64) { n = 64; }\n  memcpy(dst, src, n);\n}\n",
        ),
        mk(
            "size_arithmetic",
            "void fill(char *buf, int len) {\n  int i = 0;\n  while (i <= len) { buf[i] = 0; i++; }\n}\n",
            "void fill(char *buf, int len) {\n  int i = 0;\n  while (i < len) { buf[i] = 0; i++; }\n}\n",
        ),
        mk(
            "null_deref_read",
            "int first(int *p) {\n  return p[0];\n}\n",
            "int first(int *p) {\n  if (p == 0) { return 0; }\n  return p[0];\n}\n",
        ),
        mk(
            "null_deref_write",
            "void reset(int *p) {\n  *p = 0;\n}\n",
            "void reset(int *p) {\n  if (p == 0) { return; }\n  *p = 0;\n}\n",
        ),
    ]
}

/// Buffer-overflow style training corpus for the case study: vulnerable
/// samples copy unbounded, clean ones clamp first.
pub fn case_training_corpus(n: usize, seed: u64) -> Vec<SourceUnit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let vulnerable = i % 2 == 0;
            let cap = rng.gen_range(16..128);
            let guard = if vulnerable {
                String::new()
            } else {
                format!("  if (n > {cap}) {{ n = {cap}; }}\n")
            };
            let f1 = filler(&mut rng, 0);
            let code = format!(
                "void case{i}(char *dst, char *src, int n) {{\n  {f1}\n{guard}  memcpy(dst, src, n);\n}}\n"
            );
            SourceUnit::new(format!("case{i:04}"), code).with_label(vulnerable)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegraph::parse_ast;

    #[test]
    fn marker_dataset_is_balanced_and_parses() {
        let units = marker_dataset(1);
        assert_eq!(units.len(), 20);
        assert_eq!(units.iter().filter(|u| u.label == Some(true)).count(), 10);
        for u in &units {
            parse_ast(u).unwrap();
            assert_eq!(u.label.unwrap(), u.code.contains(MARKER_CALL));
        }
    }

    #[test]
    fn separable_label_is_token_and_loop() {
        let units = separable_dataset(200, 2);
        let pos = units.iter().filter(|u| u.label == Some(true)).count();
        assert_eq!(pos, 50); // one combo of four
        for u in &units {
            let expect = u.code.contains(MARKER_CALL) && u.code.contains("while");
            assert_eq!(u.label.unwrap(), expect, "{}", u.id);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = separable_dataset(50, 9);
        let b = separable_dataset(50, 9);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.code, y.code);
        }
    }

    #[test]
    fn case_pairs_parse_and_differ() {
        let pairs = case_pairs();
        assert_eq!(pairs.len(), 4);
        for p in &pairs {
            parse_ast(&p.vulnerable).unwrap();
            parse_ast(&p.patched).unwrap();
            assert_ne!(p.vulnerable.code, p.patched.code);
        }
    }
}
