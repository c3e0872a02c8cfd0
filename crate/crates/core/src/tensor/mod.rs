//! Dense tensors with reverse-mode gradients.
//!
//! Storage is row-major `ndarray` data, f32 for training and f64 for the
//! gradient-checking mode. A tensor produced by an op keeps handles to its
//! parents plus a backward closure; [`Tensor::backward`] walks the graph in
//! reverse topological order and accumulates gradients into every leaf that
//! requires them.

mod layers;
pub mod gradcheck;

pub use layers::*;

use std::cell::{Ref, RefCell};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array1, Array2, ArrayD, Axis, Ix1, Ix2, IxDyn};
use num_traits::{Float, FromPrimitive};
use thiserror::Error;

/// Element type usable by the engine: f32 in production, f64 for checking.
pub trait Scalar:
    Float
    + FromPrimitive
    + ndarray::ScalarOperand
    + ndarray::LinalgScalar
    + fmt::Debug
    + fmt::Display
    + std::iter::Sum
    + std::ops::AddAssign
    + 'static
{
    /// Lossy conversion from an f64 literal.
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).unwrap()
    }
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }
}
impl Scalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch: {op} got {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("sinusoidal table needs an even dimension, got {0}")]
    OddDimension(usize),
    #[error("token id {id} out of vocabulary (table has {size} rows)")]
    IndexOutOfVocabulary { id: usize, size: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

type BackwardFn<F> = Box<dyn Fn(&ArrayD<F>, &[Tensor<F>])>;

struct Inner<F: Scalar> {
    id: usize,
    values: ArrayD<F>,
    grad: Option<ArrayD<F>>,
    requires_grad: bool,
    parents: Vec<Tensor<F>>,
    backward: Option<BackwardFn<F>>,
}

/// Shared handle to one node of the computation graph.
/// Batch-normalized output plus the per-column batch mean and variance
/// (used to update running statistics).
pub type BatchNormTrainOutput<F> = (Tensor<F>, Array1<F>, Array1<F>);

pub struct Tensor<F: Scalar> {
    inner: Rc<RefCell<Inner<F>>>,
}

impl<F: Scalar> Clone for Tensor<F> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<F: Scalar> fmt::Debug for Tensor<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.borrow();
        write!(
            f,
            "Tensor(shape={:?}, requires_grad={})",
            inner.values.shape(),
            inner.requires_grad
        )
    }
}

impl<F: Scalar> Tensor<F> {
    fn new(values: ArrayD<F>, requires_grad: bool) -> Self {
        let grad = if requires_grad {
            Some(ArrayD::zeros(values.raw_dim()))
        } else {
            None
        };
        Tensor {
            inner: Rc::new(RefCell::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                values,
                grad,
                requires_grad,
                parents: Vec::new(),
                backward: None,
            })),
        }
    }

    fn from_op(
        values: ArrayD<F>,
        parents: Vec<Tensor<F>>,
        backward: BackwardFn<F>,
    ) -> Self {
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        let t = Tensor::new(values, false);
        if requires_grad {
            let mut inner = t.inner.borrow_mut();
            inner.requires_grad = true;
            inner.parents = parents;
            inner.backward = Some(backward);
        }
        t
    }

    pub fn constant(values: ArrayD<F>) -> Self {
        Tensor::new(values, false)
    }

    /// A leaf that accumulates gradient; grad buffer starts zeroed.
    pub fn param(values: ArrayD<F>) -> Self {
        Tensor::new(values, true)
    }

    pub fn scalar(v: F) -> Self {
        Tensor::constant(ArrayD::from_elem(IxDyn(&[]), v))
    }

    pub fn from_array2(a: Array2<F>) -> Self {
        Tensor::constant(a.into_dyn())
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::constant(ArrayD::zeros(IxDyn(shape)))
    }

    pub fn id(&self) -> usize {
        self.inner.borrow().id
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().values.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.borrow().parents.is_empty()
    }

    pub fn values(&self) -> Ref<'_, ArrayD<F>> {
        Ref::map(self.inner.borrow(), |i| &i.values)
    }

    pub fn to_array2(&self) -> Array2<F> {
        self.values()
            .clone()
            .into_dimensionality::<Ix2>()
            .expect("tensor is not 2-D")
    }

    pub fn item(&self) -> F {
        let inner = self.inner.borrow();
        assert_eq!(inner.values.len(), 1, "item() on non-scalar tensor");
        *inner.values.iter().next().unwrap()
    }

    pub fn grad(&self) -> Option<ArrayD<F>> {
        self.inner.borrow().grad.clone()
    }

    pub fn zero_grad(&self) {
        let mut inner = self.inner.borrow_mut();
        if inner.requires_grad {
            inner.grad = Some(ArrayD::zeros(inner.values.raw_dim()));
        }
    }

    /// In-place update of a leaf's values (optimizer step).
    pub fn update_values(&self, f: impl FnOnce(&mut ArrayD<F>)) {
        f(&mut self.inner.borrow_mut().values);
    }

    pub fn set_values(&self, values: ArrayD<F>) {
        let mut inner = self.inner.borrow_mut();
        assert_eq!(inner.values.shape(), values.shape());
        inner.values = values;
    }

    fn accumulate_grad(&self, g: &ArrayD<F>) {
        let mut inner = self.inner.borrow_mut();
        if !inner.requires_grad {
            return;
        }
        match &mut inner.grad {
            Some(buf) => *buf = &*buf + g,
            None => inner.grad = Some(g.clone()),
        }
    }

    /// Reverse-mode accumulation from a scalar loss into every reachable
    /// leaf that requires grad.
    pub fn backward(&self) -> Result<(), TensorError> {
        if self.values().len() != 1 {
            return Err(TensorError::NonScalarLoss(self.shape()));
        }
        // Postorder DFS, then reverse, gives a valid topological order.
        let mut order: Vec<Tensor<F>> = Vec::new();
        let mut visited = std::collections::HashSet::new();
        let mut stack: Vec<(Tensor<F>, bool)> = vec![(self.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if !visited.insert(node.id()) {
                continue;
            }
            stack.push((node.clone(), true));
            for p in node.inner.borrow().parents.iter() {
                if p.requires_grad() {
                    stack.push((p.clone(), false));
                }
            }
        }
        {
            let mut inner = self.inner.borrow_mut();
            let dim = inner.values.raw_dim();
            inner.grad = Some(ArrayD::ones(dim));
        }
        for node in order.iter().rev() {
            let (grad, backward, parents) = {
                let inner = node.inner.borrow();
                if inner.backward.is_none() || inner.grad.is_none() {
                    continue;
                }
                (
                    inner.grad.clone().unwrap(),
                    Rc::clone(&node.inner),
                    inner.parents.clone(),
                )
            };
            let inner = backward.borrow();
            (inner.backward.as_ref().unwrap())(&grad, &parents);
        }
        Ok(())
    }
}

fn shape_err<F: Scalar>(op: &'static str, a: &Tensor<F>, b: &Tensor<F>) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: a.shape(),
        rhs: b.shape(),
    }
}

// ---------------------------------------------------------------------------
// Core ops
// ---------------------------------------------------------------------------

impl<F: Scalar> Tensor<F> {
    pub fn matmul(&self, rhs: &Tensor<F>) -> Result<Tensor<F>, TensorError> {
        let a = self.to_array2();
        let b = rhs.to_array2();
        if a.ncols() != b.nrows() {
            return Err(shape_err("matmul", self, rhs));
        }
        let out = a.dot(&b);
        Ok(Tensor::from_op(
            out.into_dyn(),
            vec![self.clone(), rhs.clone()],
            Box::new(move |g, parents| {
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                let a = parents[0].to_array2();
                let b = parents[1].to_array2();
                parents[0].accumulate_grad(&g2.dot(&b.t()).into_dyn());
                parents[1].accumulate_grad(&a.t().dot(&g2).into_dyn());
            }),
        ))
    }

    pub fn add(&self, rhs: &Tensor<F>) -> Result<Tensor<F>, TensorError> {
        if self.shape() != rhs.shape() {
            return Err(shape_err("add", self, rhs));
        }
        let out = &*self.values() + &*rhs.values();
        Ok(Tensor::from_op(
            out,
            vec![self.clone(), rhs.clone()],
            Box::new(|g, parents| {
                parents[0].accumulate_grad(g);
                parents[1].accumulate_grad(g);
            }),
        ))
    }

    /// `[L, d] + [d]` row-broadcast bias add.
    pub fn add_bias(&self, bias: &Tensor<F>) -> Result<Tensor<F>, TensorError> {
        let x = self.to_array2();
        let b = bias
            .values()
            .clone()
            .into_dimensionality::<Ix1>()
            .map_err(|_| shape_err("add_bias", self, bias))?;
        if x.ncols() != b.len() {
            return Err(shape_err("add_bias", self, bias));
        }
        let out = &x + &b;
        Ok(Tensor::from_op(
            out.into_dyn(),
            vec![self.clone(), bias.clone()],
            Box::new(|g, parents| {
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                parents[0].accumulate_grad(g);
                parents[1].accumulate_grad(&g2.sum_axis(Axis(0)).into_dyn());
            }),
        ))
    }

    pub fn mul(&self, rhs: &Tensor<F>) -> Result<Tensor<F>, TensorError> {
        if self.shape() != rhs.shape() {
            return Err(shape_err("mul", self, rhs));
        }
        let out = &*self.values() * &*rhs.values();
        Ok(Tensor::from_op(
            out,
            vec![self.clone(), rhs.clone()],
            Box::new(|g, parents| {
                let a = parents[0].values().clone();
                let b = parents[1].values().clone();
                parents[0].accumulate_grad(&(g * &b));
                parents[1].accumulate_grad(&(g * &a));
            }),
        ))
    }

    pub fn mul_scalar(&self, c: F) -> Tensor<F> {
        let out = &*self.values() * c;
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, parents| {
                parents[0].accumulate_grad(&(g * c));
            }),
        )
    }

    pub fn relu(&self) -> Tensor<F> {
        let out = self.values().mapv(|v| v.max(F::zero()));
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(|g, parents| {
                let mask = parents[0].values().mapv(|v| {
                    if v > F::zero() {
                        F::one()
                    } else {
                        F::zero()
                    }
                });
                parents[0].accumulate_grad(&(g * &mask));
            }),
        )
    }

    pub fn sigmoid(&self) -> Tensor<F> {
        let out = self
            .values()
            .mapv(|v| F::one() / (F::one() + (-v).exp()));
        let saved = out.clone();
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let ds = saved.mapv(|s| s * (F::one() - s));
                parents[0].accumulate_grad(&(g * &ds));
            }),
        )
    }

    /// Row softmax over the last axis of a 2-D tensor, max-subtracted.
    pub fn softmax_lastdim(&self) -> Tensor<F> {
        let x = self.to_array2();
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            let m = row.iter().cloned().fold(F::neg_infinity(), F::max);
            row.mapv_inplace(|v| (v - m).exp());
            let s: F = row.iter().cloned().sum();
            row.mapv_inplace(|v| v / s);
        }
        let saved = out.clone();
        Tensor::from_op(
            out.into_dyn(),
            vec![self.clone()],
            Box::new(move |g, parents| {
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                let mut dx = Array2::<F>::zeros(g2.raw_dim());
                for i in 0..g2.nrows() {
                    let s = saved.row(i);
                    let gr = g2.row(i);
                    let dot: F = s.iter().zip(gr.iter()).map(|(a, b)| *a * *b).sum();
                    for j in 0..g2.ncols() {
                        dx[[i, j]] = s[j] * (gr[j] - dot);
                    }
                }
                parents[0].accumulate_grad(&dx.into_dyn());
            }),
        )
    }

    /// Softmax with 1 added to the normalizer, so a row may sum to < 1.
    /// Stabilized with m = max(row_max, 0): exp(x-m) / (exp(-m) + sum exp(x-m)).
    pub fn softmax_one_lastdim(&self) -> Tensor<F> {
        let x = self.to_array2();
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            let m = row
                .iter()
                .cloned()
                .fold(F::zero(), F::max);
            row.mapv_inplace(|v| (v - m).exp());
            let s: F = row.iter().cloned().sum::<F>() + (-m).exp();
            row.mapv_inplace(|v| v / s);
        }
        let saved = out.clone();
        Tensor::from_op(
            out.into_dyn(),
            vec![self.clone()],
            Box::new(move |g, parents| {
                // d out_j / d x_k = out_j (delta_jk - out_k), same form as
                // softmax because the extra 1 in the normalizer is constant
                // only pre-stabilization; with y_j = e^{x_j}/(1+S),
                // dy_j/dx_k = y_j delta_jk - y_j y_k.
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                let mut dx = Array2::<F>::zeros(g2.raw_dim());
                for i in 0..g2.nrows() {
                    let s = saved.row(i);
                    let gr = g2.row(i);
                    let dot: F = s.iter().zip(gr.iter()).map(|(a, b)| *a * *b).sum();
                    for j in 0..g2.ncols() {
                        dx[[i, j]] = s[j] * (gr[j] - dot);
                    }
                }
                parents[0].accumulate_grad(&dx.into_dyn());
            }),
        )
    }

    pub fn transpose2(&self) -> Tensor<F> {
        let out = self.to_array2().t().to_owned();
        Tensor::from_op(
            out.into_dyn(),
            vec![self.clone()],
            Box::new(|g, parents| {
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                parents[0].accumulate_grad(&g2.t().to_owned().into_dyn());
            }),
        )
    }

    /// Concatenate 2-D tensors along the feature (last) axis.
    pub fn concat_lastdim(parts: &[Tensor<F>]) -> Result<Tensor<F>, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::Invalid("concat of zero tensors".into()));
        }
        let rows = parts[0].to_array2().nrows();
        let mut widths = Vec::with_capacity(parts.len());
        let arrays: Vec<Array2<F>> = parts.iter().map(|t| t.to_array2()).collect();
        for (i, a) in arrays.iter().enumerate() {
            if a.nrows() != rows {
                return Err(shape_err("concat_lastdim", &parts[0], &parts[i]));
            }
            widths.push(a.ncols());
        }
        let views: Vec<_> = arrays.iter().map(|a| a.view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).unwrap();
        Ok(Tensor::from_op(
            out.into_dyn(),
            parts.to_vec(),
            Box::new(move |g, parents| {
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                let mut start = 0;
                for (p, w) in parents.iter().zip(widths.iter()) {
                    let slice = g2.slice(ndarray::s![.., start..start + w]).to_owned();
                    p.accumulate_grad(&slice.into_dyn());
                    start += w;
                }
            }),
        ))
    }

    /// `[L, d] -> [1, d]` mean over rows.
    pub fn mean_pool_rows(&self) -> Tensor<F> {
        let x = self.to_array2();
        let n = F::lit(x.nrows() as f64);
        let out = x.sum_axis(Axis(0)).mapv(|v| v / n).insert_axis(Axis(0));
        Tensor::from_op(
            out.into_dyn(),
            vec![self.clone()],
            Box::new(move |g, parents| {
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                let rows = parents[0].shape()[0];
                let scale = F::one() / F::lit(rows as f64);
                let mut dx = Array2::<F>::zeros((rows, g2.ncols()));
                for mut row in dx.rows_mut() {
                    row.assign(&g2.row(0));
                }
                dx.mapv_inplace(|v| v * scale);
                parents[0].accumulate_grad(&dx.into_dyn());
            }),
        )
    }

    pub fn sum(&self) -> Tensor<F> {
        let s: F = self.values().iter().cloned().sum();
        let out = ArrayD::from_elem(IxDyn(&[]), s);
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(|g, parents| {
                let gv = *g.iter().next().unwrap();
                let dim = parents[0].values().raw_dim();
                parents[0].accumulate_grad(&ArrayD::from_elem(dim, gv));
            }),
        )
    }

    pub fn mean(&self) -> Tensor<F> {
        let n = F::lit(self.values().len() as f64);
        self.sum().mul_scalar(F::one() / n)
    }

    /// Embedding lookup: `table[ids[t]]` per row. Rows whose id equals
    /// `pad_id` come out as zero and receive no gradient.
    pub fn gather_rows(
        table: &Tensor<F>,
        ids: &[usize],
        pad_id: usize,
    ) -> Result<Tensor<F>, TensorError> {
        let tab = table.to_array2();
        let d = tab.ncols();
        let mut out = Array2::<F>::zeros((ids.len(), d));
        for (t, &id) in ids.iter().enumerate() {
            if id >= tab.nrows() {
                return Err(TensorError::IndexOutOfVocabulary {
                    id,
                    size: tab.nrows(),
                });
            }
            if id != pad_id {
                out.row_mut(t).assign(&tab.row(id));
            }
        }
        let ids_owned = ids.to_vec();
        Ok(Tensor::from_op(
            out.into_dyn(),
            vec![table.clone()],
            Box::new(move |g, parents| {
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                let shape = parents[0].shape();
                let mut dt = Array2::<F>::zeros((shape[0], shape[1]));
                for (t, &id) in ids_owned.iter().enumerate() {
                    if id != pad_id {
                        let mut row = dt.row_mut(id);
                        row += &g2.row(t);
                    }
                }
                parents[0].accumulate_grad(&dt.into_dyn());
            }),
        ))
    }

    /// Mean-pool or zero-pad rows of a 2-D tensor to exactly `target` rows.
    /// With more rows than `target`, consecutive chunks are averaged.
    pub fn resize_rows(&self, target: usize) -> Tensor<F> {
        let x = self.to_array2();
        let (rows, cols) = x.dim();
        let mut out = Array2::<F>::zeros((target, cols));
        // chunk assignment: row r of input feeds output row r * target / rows
        let mut counts = vec![0usize; target];
        if rows <= target {
            for (r, row) in x.rows().into_iter().enumerate() {
                out.row_mut(r).assign(&row);
                counts[r] = 1;
            }
        } else {
            for r in 0..rows {
                let o = r * target / rows;
                let mut orow = out.row_mut(o);
                orow += &x.row(r);
                counts[o] += 1;
            }
            for (o, &c) in counts.iter().enumerate() {
                if c > 1 {
                    let inv = F::one() / F::lit(c as f64);
                    out.row_mut(o).mapv_inplace(|v| v * inv);
                }
            }
        }
        let in_rows = rows;
        Tensor::from_op(
            out.into_dyn(),
            vec![self.clone()],
            Box::new(move |g, parents| {
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                let cols = g2.ncols();
                let mut dx = Array2::<F>::zeros((in_rows, cols));
                if in_rows <= target {
                    for r in 0..in_rows {
                        dx.row_mut(r).assign(&g2.row(r));
                    }
                } else {
                    let mut counts = vec![0usize; target];
                    for r in 0..in_rows {
                        counts[r * target / in_rows] += 1;
                    }
                    for r in 0..in_rows {
                        let o = r * target / in_rows;
                        let inv = F::one() / F::lit(counts[o] as f64);
                        let src = g2.row(o).mapv(|v| v * inv);
                        dx.row_mut(r).assign(&src);
                    }
                }
                parents[0].accumulate_grad(&dx.into_dyn());
            }),
        )
    }

    /// 1-D convolution over the sequence (row) axis with same-padding.
    /// Input `[L, c_in]`, kernel `[k, c_in, c_out]` (k odd), bias `[c_out]`.
    pub fn conv1d(&self, kernel: &Tensor<F>, bias: &Tensor<F>) -> Result<Tensor<F>, TensorError> {
        let x = self.to_array2();
        let kshape = kernel.shape();
        if kshape.len() != 3 || kshape[0].is_multiple_of(2) {
            return Err(TensorError::Invalid(format!(
                "conv1d kernel must be [k_odd, c_in, c_out], got {:?}",
                kshape
            )));
        }
        let (k, c_in, c_out) = (kshape[0], kshape[1], kshape[2]);
        if x.ncols() != c_in {
            return Err(shape_err("conv1d", self, kernel));
        }
        if bias.shape() != [c_out] {
            return Err(shape_err("conv1d-bias", kernel, bias));
        }
        let l = x.nrows();
        let half = k / 2;
        let kv = kernel.values().clone();
        let bv = bias.values().clone().into_dimensionality::<Ix1>().unwrap();
        let mut out = Array2::<F>::zeros((l, c_out));
        for t in 0..l {
            for j in 0..k {
                let src = t as isize + j as isize - half as isize;
                if src < 0 || src >= l as isize {
                    continue;
                }
                let xr = x.row(src as usize);
                for o in 0..c_out {
                    let mut acc = F::zero();
                    for i in 0..c_in {
                        acc += xr[i] * kv[[j, i, o]];
                    }
                    out[[t, o]] += acc;
                }
            }
            for o in 0..c_out {
                out[[t, o]] += bv[o];
            }
        }
        Ok(Tensor::from_op(
            out.into_dyn(),
            vec![self.clone(), kernel.clone(), bias.clone()],
            Box::new(move |g, parents| {
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                let x = parents[0].to_array2();
                let kv = parents[1].values().clone();
                let l = x.nrows();
                let (k, c_in, c_out) = (kv.shape()[0], kv.shape()[1], kv.shape()[2]);
                let half = k / 2;
                let mut dx = Array2::<F>::zeros((l, c_in));
                let mut dk = ArrayD::<F>::zeros(IxDyn(&[k, c_in, c_out]));
                let mut db = Array1::<F>::zeros(c_out);
                for t in 0..l {
                    for o in 0..c_out {
                        db[o] += g2[[t, o]];
                    }
                    for j in 0..k {
                        let src = t as isize + j as isize - half as isize;
                        if src < 0 || src >= l as isize {
                            continue;
                        }
                        let s = src as usize;
                        for i in 0..c_in {
                            let xv = x[[s, i]];
                            for o in 0..c_out {
                                let go = g2[[t, o]];
                                dx[[s, i]] += go * kv[[j, i, o]];
                                dk[[j, i, o]] += go * xv;
                            }
                        }
                    }
                }
                parents[0].accumulate_grad(&dx.into_dyn());
                parents[1].accumulate_grad(&dk);
                parents[2].accumulate_grad(&db.into_dyn());
            }),
        ))
    }

    /// Row-wise layer normalization with learnable scale/shift `[d]`.
    pub fn layernorm(
        &self,
        gamma: &Tensor<F>,
        beta: &Tensor<F>,
        eps: F,
    ) -> Result<Tensor<F>, TensorError> {
        let x = self.to_array2();
        let d = x.ncols();
        if gamma.shape() != [d] || beta.shape() != [d] {
            return Err(shape_err("layernorm", self, gamma));
        }
        let gv = gamma.values().clone().into_dimensionality::<Ix1>().unwrap();
        let bv = beta.values().clone().into_dimensionality::<Ix1>().unwrap();
        let nd = F::lit(d as f64);
        let mut out = Array2::<F>::zeros(x.raw_dim());
        let mut xhat = Array2::<F>::zeros(x.raw_dim());
        let mut inv_std = Array1::<F>::zeros(x.nrows());
        for (r, row) in x.rows().into_iter().enumerate() {
            let mu: F = row.iter().cloned().sum::<F>() / nd;
            let var: F = row.iter().map(|&v| (v - mu) * (v - mu)).sum::<F>() / nd;
            let istd = F::one() / (var + eps).sqrt();
            inv_std[r] = istd;
            for c in 0..d {
                let xh = (row[c] - mu) * istd;
                xhat[[r, c]] = xh;
                out[[r, c]] = xh * gv[c] + bv[c];
            }
        }
        Ok(Tensor::from_op(
            out.into_dyn(),
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |g, parents| {
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                let gv = parents[1]
                    .values()
                    .clone()
                    .into_dimensionality::<Ix1>()
                    .unwrap();
                let d = g2.ncols();
                let nd = F::lit(d as f64);
                let mut dx = Array2::<F>::zeros(g2.raw_dim());
                let mut dgamma = Array1::<F>::zeros(d);
                let mut dbeta = Array1::<F>::zeros(d);
                for r in 0..g2.nrows() {
                    let istd = inv_std[r];
                    let mut sum_dy = F::zero();
                    let mut sum_dy_xh = F::zero();
                    for c in 0..d {
                        let dy = g2[[r, c]] * gv[c];
                        sum_dy += dy;
                        sum_dy_xh += dy * xhat[[r, c]];
                        dgamma[c] += g2[[r, c]] * xhat[[r, c]];
                        dbeta[c] += g2[[r, c]];
                    }
                    for c in 0..d {
                        let dy = g2[[r, c]] * gv[c];
                        dx[[r, c]] =
                            istd * (dy - sum_dy / nd - xhat[[r, c]] * sum_dy_xh / nd);
                    }
                }
                parents[0].accumulate_grad(&dx.into_dyn());
                parents[1].accumulate_grad(&dgamma.into_dyn());
                parents[2].accumulate_grad(&dbeta.into_dyn());
            }),
        ))
    }

    /// Batch normalization over the row axis using the supplied batch
    /// statistics path (training mode). Per-column mean/variance are
    /// computed from `self` and fully differentiated.
    pub fn batchnorm_train(
        &self,
        gamma: &Tensor<F>,
        beta: &Tensor<F>,
        eps: F,
    ) -> Result<BatchNormTrainOutput<F>, TensorError> {
        let x = self.to_array2();
        let (n, d) = x.dim();
        if gamma.shape() != [d] || beta.shape() != [d] {
            return Err(shape_err("batchnorm", self, gamma));
        }
        let gv = gamma.values().clone().into_dimensionality::<Ix1>().unwrap();
        let bv = beta.values().clone().into_dimensionality::<Ix1>().unwrap();
        let nn = F::lit(n as f64);
        let mut mean = Array1::<F>::zeros(d);
        let mut var = Array1::<F>::zeros(d);
        for c in 0..d {
            let col = x.column(c);
            let mu: F = col.iter().cloned().sum::<F>() / nn;
            let v: F = col.iter().map(|&v| (v - mu) * (v - mu)).sum::<F>() / nn;
            mean[c] = mu;
            var[c] = v;
        }
        let mut xhat = Array2::<F>::zeros(x.raw_dim());
        let mut out = Array2::<F>::zeros(x.raw_dim());
        let mut inv_std = Array1::<F>::zeros(d);
        for c in 0..d {
            let istd = F::one() / (var[c] + eps).sqrt();
            inv_std[c] = istd;
            for r in 0..n {
                let xh = (x[[r, c]] - mean[c]) * istd;
                xhat[[r, c]] = xh;
                out[[r, c]] = xh * gv[c] + bv[c];
            }
        }
        let t = Tensor::from_op(
            out.into_dyn(),
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |g, parents| {
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                let gv = parents[1]
                    .values()
                    .clone()
                    .into_dimensionality::<Ix1>()
                    .unwrap();
                let (n, d) = g2.dim();
                let nn = F::lit(n as f64);
                let mut dx = Array2::<F>::zeros(g2.raw_dim());
                let mut dgamma = Array1::<F>::zeros(d);
                let mut dbeta = Array1::<F>::zeros(d);
                for c in 0..d {
                    let istd = inv_std[c];
                    let mut sum_dy = F::zero();
                    let mut sum_dy_xh = F::zero();
                    for r in 0..n {
                        let dy = g2[[r, c]] * gv[c];
                        sum_dy += dy;
                        sum_dy_xh += dy * xhat[[r, c]];
                        dgamma[c] += g2[[r, c]] * xhat[[r, c]];
                        dbeta[c] += g2[[r, c]];
                    }
                    for r in 0..n {
                        let dy = g2[[r, c]] * gv[c];
                        dx[[r, c]] =
                            istd * (dy - sum_dy / nn - xhat[[r, c]] * sum_dy_xh / nn);
                    }
                }
                parents[0].accumulate_grad(&dx.into_dyn());
                parents[1].accumulate_grad(&dgamma.into_dyn());
                parents[2].accumulate_grad(&dbeta.into_dyn());
            }),
        );
        Ok((t, mean, var))
    }

    /// Batch normalization in eval mode: affine transform with fixed
    /// running statistics.
    pub fn batchnorm_eval(
        &self,
        gamma: &Tensor<F>,
        beta: &Tensor<F>,
        running_mean: &Array1<F>,
        running_var: &Array1<F>,
        eps: F,
    ) -> Result<Tensor<F>, TensorError> {
        let x = self.to_array2();
        let d = x.ncols();
        if gamma.shape() != [d] || beta.shape() != [d] || running_mean.len() != d {
            return Err(shape_err("batchnorm_eval", self, gamma));
        }
        let mut scale = Array1::<F>::zeros(d);
        for c in 0..d {
            scale[c] = F::one() / (running_var[c] + eps).sqrt();
        }
        let gv = gamma.values().clone().into_dimensionality::<Ix1>().unwrap();
        let bv = beta.values().clone().into_dimensionality::<Ix1>().unwrap();
        let mean = running_mean.clone();
        let mut out = Array2::<F>::zeros(x.raw_dim());
        for r in 0..x.nrows() {
            for c in 0..d {
                out[[r, c]] = (x[[r, c]] - mean[c]) * scale[c] * gv[c] + bv[c];
            }
        }
        let scale_b = scale.clone();
        Ok(Tensor::from_op(
            out.into_dyn(),
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |g, parents| {
                let g2 = g.clone().into_dimensionality::<Ix2>().unwrap();
                let gv = parents[1]
                    .values()
                    .clone()
                    .into_dimensionality::<Ix1>()
                    .unwrap();
                let x = parents[0].to_array2();
                let (n, d) = g2.dim();
                let mut dx = Array2::<F>::zeros(g2.raw_dim());
                let mut dgamma = Array1::<F>::zeros(d);
                let mut dbeta = Array1::<F>::zeros(d);
                for r in 0..n {
                    for c in 0..d {
                        let xh = (x[[r, c]] - mean[c]) * scale_b[c];
                        dx[[r, c]] = g2[[r, c]] * gv[c] * scale_b[c];
                        dgamma[c] += g2[[r, c]] * xh;
                        dbeta[c] += g2[[r, c]];
                    }
                }
                parents[0].accumulate_grad(&dx.into_dyn());
                parents[1].accumulate_grad(&dgamma.into_dyn());
                parents[2].accumulate_grad(&dbeta.into_dyn());
            }),
        ))
    }

    /// Inverted dropout with a precomputed keep mask (entries 0 or 1/(1-p)).
    pub fn dropout_with_mask(&self, mask: ArrayD<F>) -> Result<Tensor<F>, TensorError> {
        if mask.shape() != self.values().shape() {
            return Err(TensorError::Invalid("dropout mask shape mismatch".into()));
        }
        let out = &*self.values() * &mask;
        Ok(Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, parents| {
                parents[0].accumulate_grad(&(g * &mask));
            }),
        ))
    }

    /// Binary cross-entropy of a scalar probability against a 0/1 target,
    /// with probability clamping for finiteness.
    pub fn bce_loss(&self, target: F) -> Tensor<F> {
        let eps = F::lit(1e-7);
        let p_raw = self.item();
        let p = p_raw.max(eps).min(F::one() - eps);
        let loss = -(target * p.ln() + (F::one() - target) * (F::one() - p).ln());
        let out = ArrayD::from_elem(IxDyn(&[]), loss);
        Tensor::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let gv = *g.iter().next().unwrap();
                // d/dp of -(t ln p + (1-t) ln(1-p)), at the clamped p
                let dp = -(target / p) + (F::one() - target) / (F::one() - p);
                let dim = parents[0].values().raw_dim();
                parents[0].accumulate_grad(&ArrayD::from_elem(dim, gv * dp));
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn t64(a: Array2<f64>) -> Tensor<f64> {
        Tensor::param(a.into_dyn())
    }

    #[test]
    fn relu_clamps_negatives() {
        let x = Tensor::<f64>::constant(array![[-1.0, 0.0, 2.0]].into_dyn());
        assert_eq!(
            x.relu().values().as_slice().unwrap(),
            &[0.0, 0.0, 2.0]
        );
    }

    #[test]
    fn softmax_constant_row_is_uniform() {
        let x = Tensor::<f64>::constant(array![[3.0, 3.0, 3.0, 3.0]].into_dyn());
        let s = x.softmax_lastdim();
        for v in s.values().iter() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_translation_invariant() {
        let x = array![[0.3, -1.2, 2.0, 0.0]];
        let a = Tensor::<f64>::constant(x.clone().into_dyn()).softmax_lastdim();
        let b = Tensor::<f64>::constant((x + 17.5).into_dyn()).softmax_lastdim();
        for (u, v) in a.values().iter().zip(b.values().iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_backward_is_ones() {
        let x = t64(array![[1.0, 2.0], [3.0, 4.0]]);
        x.sum().backward().unwrap();
        assert!(x.grad().unwrap().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn elementwise_square_backward() {
        let x = t64(array![[1.0, -2.0], [3.0, 0.5]]);
        let loss = x.mul(&x).unwrap().sum();
        loss.backward().unwrap();
        let g = x.grad().unwrap();
        for (gv, xv) in g.iter().zip(x.values().iter()) {
            assert!((gv - 2.0 * xv).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_shape_mismatch_reports_shapes() {
        let a = t64(Array2::zeros((2, 3)));
        let b = t64(Array2::zeros((2, 3)));
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn conv1d_identity_kernel() {
        let x = t64(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        // k=3, center tap is identity over channels
        let mut k = ArrayD::<f64>::zeros(IxDyn(&[3, 2, 2]));
        k[[1, 0, 0]] = 1.0;
        k[[1, 1, 1]] = 1.0;
        let kernel = Tensor::constant(k);
        let bias = Tensor::constant(ArrayD::zeros(IxDyn(&[2])));
        let y = x.conv1d(&kernel, &bias).unwrap();
        for (a, b) in y.values().iter().zip(x.values().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn nonscalar_loss_rejected() {
        let x = t64(array![[1.0, 2.0]]);
        assert!(matches!(
            x.backward(),
            Err(TensorError::NonScalarLoss(_))
        ));
    }

    #[test]
    fn gather_rows_pads_and_routes_grads() {
        let table = t64(array![[0.0, 0.0], [1.0, 2.0], [3.0, 4.0]]);
        let e = Tensor::gather_rows(&table, &[2, 0, 1], 0).unwrap();
        let v = e.to_array2();
        assert_eq!(v.row(0).to_vec(), vec![3.0, 4.0]);
        assert_eq!(v.row(1).to_vec(), vec![0.0, 0.0]); // PAD row zero
        e.sum().backward().unwrap();
        let g = table.grad().unwrap();
        assert_eq!(g[[0, 0]], 0.0); // PAD row gets no grad
        assert_eq!(g[[1, 0]], 1.0);
        assert_eq!(g[[2, 0]], 1.0);
    }

    #[test]
    fn param_grad_buffer_exists_before_backward() {
        let x = t64(array![[1.0]]);
        assert!(x.grad().is_some());
        assert!(x.grad().unwrap().iter().all(|&g| g == 0.0));
    }
}
