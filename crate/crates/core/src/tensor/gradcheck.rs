//! Central-finite-difference gradient checking, f64 only.

use ndarray::ArrayD;

use super::Tensor;

/// Worst relative error found while checking one parameter tensor.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Compare the reverse-mode gradient of `loss_fn()` w.r.t. each tensor in
/// `params` against central differences at step `eps`. `loss_fn` must be a
/// pure function of the parameter values (it is re-evaluated many times).
pub fn check_gradients(
    params: &[&Tensor<f64>],
    loss_fn: &dyn Fn() -> Tensor<f64>,
    eps: f64,
) -> GradCheckReport {
    for p in params {
        p.zero_grad();
    }
    let loss = loss_fn();
    loss.backward().expect("loss must be scalar");
    let analytic: Vec<ArrayD<f64>> = params
        .iter()
        .map(|p| p.grad().expect("parameter missing gradient"))
        .collect();

    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    for (pi, p) in params.iter().enumerate() {
        let base = p.values().clone();
        for idx in 0..base.len() {
            let orig = base.as_slice().unwrap()[idx];
            set_flat(p, idx, orig + eps);
            let up = loss_fn().item();
            set_flat(p, idx, orig - eps);
            let down = loss_fn().item();
            set_flat(p, idx, orig);
            let numeric = (up - down) / (2.0 * eps);
            let got = analytic[pi].as_slice().unwrap()[idx];
            max_rel = max_rel.max(rel_err(got, numeric));
            checked += 1;
        }
    }
    GradCheckReport {
        max_rel_err: max_rel,
        checked,
    }
}

fn set_flat(t: &Tensor<f64>, idx: usize, v: f64) {
    t.update_values(|vals| {
        vals.as_slice_mut().unwrap()[idx] = v;
    });
}
