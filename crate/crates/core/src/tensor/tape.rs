//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation eagerly; [`Tape::backward`] walks the
//! record in reverse and accumulates adjoints. Shape errors inside the tape
//! are programming errors and panic; the layer APIs validate user-supplied
//! shapes beforehand.

use super::{leaky_relu, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    LeakyRelu(Var, f64),
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    RowScale(Var, Var),
    SegmentSoftmax(Var, Vec<usize>, usize),
    ConcatCols(Var, Var),
    MeanRows(Var),
    Sum(Var),
    MaskedCrossEntropy { logits: Var, target: usize, probs: Vec<f64> },
    BceWithLogits(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints indexed by [`Var`]; `None` for nodes the loss does not reach.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b))
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (av, rv) = (self.value(a), self.value(row));
        assert_eq!(rv.shape(), [1, av.cols()], "add_row bias shape");
        let mut out = av.clone();
        let n = av.cols();
        for (i, x) in out.data_mut().iter_mut().enumerate() {
            *x += rv.data()[i % n];
        }
        self.push(out, Op::AddRow(a, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "mul shape");
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::from_vec(av.rows(), av.cols(), data);
        self.push(out, Op::Mul(a, b))
    }

    /// Elementwise product with a constant (not differentiated).
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Var {
        let av = self.value(a);
        assert_eq!(av.shape(), c.shape(), "mul_const shape");
        let data = av.data().iter().zip(c.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::from_vec(av.rows(), av.cols(), data);
        self.push(out, Op::MulConst(a, c))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).scale(c);
        self.push(out, Op::Scale(a, c))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).map(|x| leaky_relu(x, slope));
        self.push(out, Op::LeakyRelu(a, slope))
    }

    /// Inverted dropout; identity when `rate == 0`.
    pub fn dropout(&mut self, a: Var, rate: f64, rng: &mut impl rand::Rng) -> Var {
        if rate <= 0.0 {
            return a;
        }
        let [r, c] = self.value(a).shape();
        let keep = 1.0 - rate;
        let mask = (0..r * c)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        self.mul_const(a, Tensor::from_vec(r, c, mask))
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Var {
        let out = self.value(a).select_rows(idx);
        self.push(out, Op::GatherRows(a, idx.to_vec()))
    }

    /// `out[idx[e]] += a[e]` for an output with `n` rows.
    pub fn scatter_add_rows(&mut self, a: Var, idx: &[usize], n: usize) -> Var {
        let av = self.value(a);
        assert_eq!(av.rows(), idx.len(), "scatter index length");
        let d = av.cols();
        let mut out = Tensor::zeros(n, d);
        for (e, &t) in idx.iter().enumerate() {
            let src = av.row(e);
            let dst = &mut out.data_mut()[t * d..(t + 1) * d];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += s;
            }
        }
        self.push(out, Op::ScatterAddRows(a, idx.to_vec()))
    }

    /// Scales row `e` of `a` by `w[e]` where `w` is `rows x 1`.
    pub fn row_scale(&mut self, a: Var, w: Var) -> Var {
        let (av, wv) = (self.value(a), self.value(w));
        assert_eq!(wv.shape(), [av.rows(), 1], "row_scale weight shape");
        let d = av.cols();
        let data = av.data().iter().enumerate().map(|(i, x)| x * wv.data()[i / d]).collect();
        let out = Tensor::from_vec(av.rows(), d, data);
        self.push(out, Op::RowScale(a, w))
    }

    /// Softmax of a column vector within groups given by `seg` (values in
    /// `0..n_seg`).
    pub fn segment_softmax(&mut self, a: Var, seg: &[usize], n_seg: usize) -> Var {
        let av = self.value(a);
        assert_eq!(av.shape(), [seg.len(), 1], "segment_softmax expects a column");
        let mut max = vec![f64::NEG_INFINITY; n_seg];
        for (e, &s) in seg.iter().enumerate() {
            max[s] = max[s].max(av.data()[e]);
        }
        let mut out: Vec<f64> = seg.iter().enumerate().map(|(e, &s)| (av.data()[e] - max[s]).exp()).collect();
        let mut total = vec![0.0; n_seg];
        for (e, &s) in seg.iter().enumerate() {
            total[s] += out[e];
        }
        for (e, &s) in seg.iter().enumerate() {
            out[e] /= total[s];
        }
        let out = Tensor::column(out);
        self.push(out, Op::SegmentSoftmax(a, seg.to_vec(), n_seg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.rows(), bv.rows(), "concat_cols rows");
        let mut data = Vec::with_capacity(av.len() + bv.len());
        for r in 0..av.rows() {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let out = Tensor::from_vec(av.rows(), av.cols() + bv.cols(), data);
        self.push(out, Op::ConcatCols(a, b))
    }

    /// Column means as a `1 x d` row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        assert!(av.rows() > 0, "mean over zero rows");
        let d = av.cols();
        let mut out = vec![0.0; d];
        for r in 0..av.rows() {
            for (o, x) in out.iter_mut().zip(av.row(r)) {
                *o += x;
            }
        }
        let n = av.rows() as f64;
        let out = Tensor::from_vec(1, d, out.into_iter().map(|x| x / n).collect());
        self.push(out, Op::MeanRows(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    /// `-log softmax_mask(logits)[target]` for a vector of logits.
    pub fn masked_cross_entropy(&mut self, logits: Var, mask: &[bool], target: usize) -> Result<Var, TensorError> {
        let z = self.value(logits).data();
        if !mask.get(target).copied().unwrap_or(false) {
            return Err(TensorError::ShapeMismatch(format!("target {target} is masked out")));
        }
        let probs = super::masked_softmax(z, mask)?;
        let max = z.iter().zip(mask).filter(|(_, &m)| m).map(|(&v, _)| v).fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().zip(mask).filter(|(_, &m)| m).map(|(&v, _)| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - z[target];
        Ok(self.push(
            Tensor::scalar(loss),
            Op::MaskedCrossEntropy { logits, target, probs },
        ))
    }

    /// Mean binary cross-entropy of a logit column against 0/1 labels.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[f64]) -> Var {
        let z = self.value(logits);
        assert_eq!(z.len(), labels.len(), "bce label count");
        let n = labels.len() as f64;
        let loss: f64 = z
            .data()
            .iter()
            .zip(labels)
            .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        self.push(Tensor::scalar(loss), Op::BceWithLogits(logits, labels.to_vec()))
    }

    /// Reverse pass from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let lv = self.value(loss);
        if lv.len() != 1 || !lv.is_finite() {
            return Err(TensorError::NonFiniteLoss(lv.data().first().copied().unwrap_or(f64::NAN)));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(t) => t.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(*b).transpose());
                    let gb = self.value(*a).transpose().matmul(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::AddRow(a, row) => {
                    let n = g.cols();
                    let mut gr = vec![0.0; n];
                    for (k, x) in g.data().iter().enumerate() {
                        gr[k % n] += x;
                    }
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *row, Tensor::from_vec(1, n, gr));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = g.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
                    let gb = g.data().iter().zip(av.data()).map(|(x, y)| x * y).collect();
                    acc(&mut grads, *a, Tensor::from_vec(g.rows(), g.cols(), ga));
                    acc(&mut grads, *b, Tensor::from_vec(g.rows(), g.cols(), gb));
                }
                Op::MulConst(a, c) => {
                    let ga = g.data().iter().zip(c.data()).map(|(x, y)| x * y).collect();
                    acc(&mut grads, *a, Tensor::from_vec(g.rows(), g.cols(), ga));
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g.scale(*c)),
                Op::LeakyRelu(a, slope) => {
                    let av = self.value(*a);
                    let ga = g
                        .data()
                        .iter()
                        .zip(av.data())
                        .map(|(gx, &x)| if x > 0.0 { *gx } else { gx * slope })
                        .collect();
                    acc(&mut grads, *a, Tensor::from_vec(g.rows(), g.cols(), ga));
                }
                Op::GatherRows(a, idx) => {
                    let av = self.value(*a);
                    let d = av.cols();
                    let mut ga = Tensor::zeros(av.rows(), d);
                    for (e, &r) in idx.iter().enumerate() {
                        let dst = &mut ga.data_mut()[r * d..(r + 1) * d];
                        for (o, x) in dst.iter_mut().zip(g.row(e)) {
                            *o += x;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::ScatterAddRows(a, idx) => {
                    acc(&mut grads, *a, g.select_rows(idx));
                }
                Op::RowScale(a, w) => {
                    let (av, wv) = (self.value(*a), self.value(*w));
                    let d = av.cols();
                    let ga = g.data().iter().enumerate().map(|(k, x)| x * wv.data()[k / d]).collect();
                    let gw = (0..av.rows())
                        .map(|r| g.row(r).iter().zip(av.row(r)).map(|(x, y)| x * y).sum())
                        .collect();
                    acc(&mut grads, *a, Tensor::from_vec(av.rows(), d, ga));
                    acc(&mut grads, *w, Tensor::column(gw));
                }
                Op::SegmentSoftmax(a, seg, n_seg) => {
                    let y = node.value.data();
                    let mut dot = vec![0.0; *n_seg];
                    for (e, &s) in seg.iter().enumerate() {
                        dot[s] += g.data()[e] * y[e];
                    }
                    let ga = seg.iter().enumerate().map(|(e, &s)| y[e] * (g.data()[e] - dot[s])).collect();
                    acc(&mut grads, *a, Tensor::column(ga));
                }
                Op::ConcatCols(a, b) => {
                    let (ca, cb) = (self.value(*a).cols(), self.value(*b).cols());
                    let rows = g.rows();
                    let mut ga = Vec::with_capacity(rows * ca);
                    let mut gb = Vec::with_capacity(rows * cb);
                    for r in 0..rows {
                        ga.extend_from_slice(&g.row(r)[..ca]);
                        gb.extend_from_slice(&g.row(r)[ca..]);
                    }
                    acc(&mut grads, *a, Tensor::from_vec(rows, ca, ga));
                    acc(&mut grads, *b, Tensor::from_vec(rows, cb, gb));
                }
                Op::MeanRows(a) => {
                    let av = self.value(*a);
                    let n = av.rows() as f64;
                    let d = av.cols();
                    let data = (0..av.len()).map(|k| g.data()[k % d] / n).collect();
                    acc(&mut grads, *a, Tensor::from_vec(av.rows(), d, data));
                }
                Op::Sum(a) => {
                    let [r, c] = self.value(*a).shape();
                    acc(&mut grads, *a, Tensor::filled(r, c, g.item()));
                }
                Op::MaskedCrossEntropy { logits, target, probs, .. } => {
                    let [r, c] = self.value(*logits).shape();
                    let gs = g.item();
                    let mut data: Vec<f64> = probs.iter().map(|p| p * gs).collect();
                    data[*target] -= gs;
                    acc(&mut grads, *logits, Tensor::from_vec(r, c, data));
                }
                Op::BceWithLogits(a, labels) => {
                    let z = self.value(*a);
                    let n = labels.len() as f64;
                    let gs = g.item();
                    let data = z
                        .data()
                        .iter()
                        .zip(labels)
                        .map(|(&x, &y)| gs * (sigmoid(x) - y) / n)
                        .collect();
                    acc(&mut grads, *a, Tensor::from_vec(z.rows(), z.cols(), data));
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
